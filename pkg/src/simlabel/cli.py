"""Command-line interface: the full pipeline as subcommands.

Subcommands: gen-sim, score, classify, calibrate, eval, profile, fixture.
Defaults follow the benchmark configuration (tau=1, alpha=1, k=6,
calibration fraction 0.95); flags override config-file values which
override defaults.

Every subcommand writes its outputs to files and prints a single
machine-parseable ``key=value`` summary line to stdout. Exit codes:
0 success, 1 usage error, 2 data/format error. Given identical inputs,
outputs are byte-identical across runs and across ``--threads`` settings.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import embedding_store as store
from . import scoring
from . import simclass
from .errors import LabelError, SimlabelError
from .evalkit import benchmark as bench
from .evalkit import fixtures, metrics

log = logging.getLogger("simlabel")

_MODES = {
    "mcm": scoring.ScoreMode.MCM,
    "simlabel": scoring.ScoreMode.SIMLABEL,
    "simlabel-s": scoring.ScoreMode.SIMLABEL_S,
}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("SIMLABEL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise SimlabelError(f"SIMLABEL_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _summary(**pairs) -> None:
    print(" ".join(f"{k}={v}" for k, v in pairs.items()))


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: SIMLABEL_THREADS or all cores); "
                        "results do not depend on this")
    p.add_argument("--verbose", action="store_true", help="log progress to stderr")


def _load_scoring_inputs(args):
    """Shared loader for score/classify: images, text, ids, map, ext names."""
    images = store.load_embeddings(args.images)
    text = store.load_embeddings(args.text)
    labels = store.load_labels(args.labels)
    store.validate_pairing(text, labels)
    map_ = simclass.load_map(args.map) if args.map else None
    if map_ is not None:
        keys = tuple(map_.entries)
        if labels.names[: len(keys)] != keys:
            raise LabelError(
                "label file must start with the map's ID labels in map order"
            )
        ids = store.LabelSet(names=keys, prompt_template=labels.prompt_template)
    else:
        ids = labels
    return images, text, ids, map_, labels.names


def _scoring_config(args) -> scoring.ScoringConfig:
    return scoring.ScoringConfig(
        alpha=args.alpha, tau=args.tau, mode=_MODES[args.mode]
    )


# ---------------------------------------------------------------- subcommands


def _cmd_gen_sim(args) -> int:
    ids = store.load_labels(args.labels)
    if args.strategy == "hierarchy":
        if not args.hierarchy:
            raise SimlabelError("--hierarchy is required for strategy=hierarchy")
        map_ = simclass.from_hierarchy(simclass.load_hierarchy(args.hierarchy), ids)
    elif args.strategy == "candidates":
        for flag in ("candidates", "id_text", "cand_text", "cand_labels"):
            if getattr(args, flag) is None:
                raise SimlabelError(
                    f"--{flag.replace('_', '-')} is required for strategy=candidates"
                )
        id_text = store.load_embeddings(args.id_text)
        store.validate_pairing(id_text, ids)
        cand_names = store.load_labels(args.cand_labels)
        cand_text = store.load_embeddings(args.cand_text)
        store.validate_pairing(cand_text, cand_names)
        map_ = simclass.from_candidates(
            simclass.load_candidates(args.candidates),
            ids, id_text, cand_text, cand_names, k=args.k,
        )
    else:  # image
        for flag in ("id_images", "text"):
            if getattr(args, flag) is None:
                raise SimlabelError(
                    f"--{flag.replace('_', '-')} is required for strategy=image"
                )
        id_images = store.load_embeddings(args.id_images)
        id_text = store.load_embeddings(args.text)
        store.validate_pairing(id_text, ids)
        k_img = args.k_img if args.k_img is not None else args.k
        k_class = args.k_class if args.k_class is not None else args.k
        map_ = simclass.from_image_alignment(
            id_images, id_text, ids, k_img=k_img, k_class=k_class
        )
    simclass.save_map(map_, args.out)
    filled = sum(1 for v in map_.entries.values() if v)
    _summary(stage="gen-sim", strategy=args.strategy, classes=len(map_.entries),
             filled=filled, out=args.out)
    return 0


def _cmd_score(args) -> int:
    images, text, ids, map_, ext_names = _load_scoring_inputs(args)
    cfg = _scoring_config(args)
    batch = scoring.score_batch(
        images, text, ids, map_, cfg,
        n_threads=_resolve_threads(args.threads), ext_names=ext_names,
    )
    scoring.save_score_csv(batch, args.out)
    _summary(stage="score", mode=args.mode, images=len(batch),
             mean_score=format(float(batch.scores.mean()), ".9g"), out=args.out)
    return 0


def _cmd_classify(args) -> int:
    images, text, ids, map_, ext_names = _load_scoring_inputs(args)
    cfg = _scoring_config(args)
    batch = scoring.score_batch(
        images, text, ids, map_, cfg,
        n_threads=_resolve_threads(args.threads), ext_names=ext_names,
    )
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "prediction"])
        for i, pred in enumerate(batch.predictions):
            writer.writerow([i, int(pred)])
    fields = dict(stage="classify", mode=args.mode, images=len(batch), out=args.out)
    if args.ground_truth:
        truth = bench._load_ground_truth(args.ground_truth)
        fields["accuracy"] = format(metrics.accuracy(batch.predictions, truth), ".9g")
    _summary(**fields)
    return 0


def _cmd_calibrate(args) -> int:
    scores, _ = scoring.load_score_csv(args.scores)
    lam = metrics.calibrate_threshold(scores, args.fraction)
    if args.out:
        Path(args.out).write_text(
            json.dumps({"lambda": lam, "fraction": args.fraction}) + "\n",
            encoding="utf-8",
        )
    _summary(stage="calibrate", n=scores.size, fraction=args.fraction,
             **{"lambda": format(lam, ".9g")})
    return 0


def _cmd_eval(args) -> int:
    cfg = bench.BenchmarkConfig.from_json(args.config)
    overrides = {}
    for name in ("alpha", "tau", "k_img", "k_class", "calibration_fraction",
                 "strategy", "mode"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    report = bench.run_benchmark(cfg, n_threads=_resolve_threads(args.threads))
    written = bench.write_report(report, args.out_dir)
    _summary(stage="eval", datasets=len(report.per_dataset),
             auroc=format(report.auroc, ".9g"),
             fpr95=format(report.fpr_at_95, ".9g"),
             **{"lambda": format(report.threshold, ".9g")},
             out=str(written[0]))
    return 0


def _cmd_profile(args) -> int:
    images = store.load_embeddings(args.images)
    text = store.load_embeddings(args.text)
    profile = metrics.similarity_profile(images, text, tau=args.tau)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank", "mean_softmax"])
        for rank, value in enumerate(profile):
            writer.writerow([rank, format(value, ".9g")])
    _summary(stage="profile", labels=profile.size,
             top=format(float(profile[0]), ".9g"), out=args.out)
    return 0


def _cmd_fixture(args) -> int:
    spec = fixtures.FixtureSpec(
        n_classes=args.classes, dim=args.dim, images_per_class=args.per_class,
        n_ood=args.ood, cluster_tightness=args.tightness,
        similar_group_size=args.group_size, seed=args.seed,
    )
    fx = fixtures.synthesize_fixture(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    store.save_embeddings(fx.id_images, out / "id_images.sleb")
    store.save_embeddings(fx.id_text, out / "text.sleb")
    store.save_embeddings(fx.ood_images, out / "ood.sleb")
    store.save_labels(fx.labels, out / "labels.txt")
    (out / "ground_truth.txt").write_text(
        "".join(f"{t}\n" for t in fx.ground_truth), encoding="utf-8"
    )
    config = {
        "id_images": "id_images.sleb",
        "id_labels": "labels.txt",
        "text_embeddings": "text.sleb",
        "id_ground_truth": "ground_truth.txt",
        "ood_datasets": [{"name": "synthetic", "path": "ood.sleb"}],
        "strategy": "image",
        "alpha": 1.0,
        "tau": 1.0,
        "k_img": 6,
        "k_class": 6,
        "calibration_fraction": 0.95,
    }
    (out / "bench.json").write_text(
        json.dumps(config, indent=2) + "\n", encoding="utf-8"
    )
    _summary(stage="fixture", classes=spec.n_classes,
             id_images=fx.id_images.n_rows, ood_images=fx.ood_images.n_rows,
             seed=spec.seed, out_dir=str(out))
    return 0


# ------------------------------------------------------------------- parser


_SLEB_HELP = (
    "SLEB files: 4-byte magic 'SLEB', u32 version=1, u32 rows, u32 dim "
    "(little-endian), then rows*dim float32 values row-major. Label files: "
    "UTF-8, one label per line (LF), line i names row i."
)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="simlabel",
        description="Consistency-guided OOD scoring over precomputed embeddings",
        epilog=_SLEB_HELP,
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser(
        "gen-sim", help="generate a similar-class map",
        epilog="Map JSON: {\"source\": <strategy>, \"entries\": {label: "
               "[similar labels...]}}. Hierarchy JSON: {super-class: [labels]}. "
               "Candidates JSON: {label: [candidate strings]}. " + _SLEB_HELP,
    )
    p.add_argument("--strategy", required=True,
                   choices=["hierarchy", "candidates", "image"])
    p.add_argument("--labels", required=True, help="ID label file")
    p.add_argument("--out", required=True, help="output map JSON")
    p.add_argument("--hierarchy", help="hierarchy JSON (strategy=hierarchy)")
    p.add_argument("--candidates", help="candidate pool JSON (strategy=candidates)")
    p.add_argument("--id-text", dest="id_text",
                   help="ID text embeddings (strategy=candidates)")
    p.add_argument("--cand-text", dest="cand_text",
                   help="candidate text embeddings (strategy=candidates)")
    p.add_argument("--cand-labels", dest="cand_labels",
                   help="candidate label file (strategy=candidates)")
    p.add_argument("--id-images", dest="id_images",
                   help="ID image embeddings (strategy=image)")
    p.add_argument("--text", help="ID text embeddings (strategy=image)")
    p.add_argument("--k", type=int, default=6, help="similar classes per class")
    p.add_argument("--k-img", dest="k_img", type=int, default=None,
                   help="per-image top-k (strategy=image; defaults to --k)")
    p.add_argument("--k-class", dest="k_class", type=int, default=None,
                   help="per-class top-k (strategy=image; defaults to --k)")
    _common_flags(p)
    p.set_defaults(func=_cmd_gen_sim)

    for name, func, extra in (
        ("score", _cmd_score,
         "write per-image OOD scores (CSV header index,score,prediction; "
         "scores carry 9 significant digits)"),
        ("classify", _cmd_classify,
         "write per-image predictions (CSV header index,prediction)"),
    ):
        p = sub.add_parser(name, help=extra, epilog=extra + ". " + _SLEB_HELP)
        p.add_argument("--images", required=True, help="image embeddings (SLEB)")
        p.add_argument("--text", required=True, help="text embeddings (SLEB)")
        p.add_argument("--labels", required=True,
                       help="label file aligned with --text")
        p.add_argument("--map", help="similar-class map JSON")
        p.add_argument("--mode", choices=sorted(_MODES), default="simlabel")
        p.add_argument("--alpha", type=float, default=1.0)
        p.add_argument("--tau", type=float, default=1.0)
        p.add_argument("--out", required=True)
        if name == "classify":
            p.add_argument("--ground-truth", dest="ground_truth",
                           help="true class indices, one per line")
        _common_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser(
        "calibrate", help="pick the ID-retention threshold",
        epilog="Reads an index,score,prediction CSV; lambda is the largest "
               "threshold keeping at least --fraction of the scores (score "
               ">= lambda decides ID).",
    )
    p.add_argument("--scores", required=True, help="score CSV from `score`")
    p.add_argument("--fraction", type=float, default=0.95)
    p.add_argument("--out", help="optional JSON output")
    _common_flags(p)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser(
        "eval", help="run a config-driven benchmark",
        epilog="Config JSON fields: id_images, id_labels, text_embeddings, "
               "ood_datasets [{name,path}], strategy, map_path?, text_labels?, "
               "id_ground_truth?, mode?, alpha, tau, k_img, k_class, "
               "calibration_fraction, sweep? {param: alpha|k, values}. Paths "
               "resolve relative to the config file. Writes report.json plus "
               "datasets.csv (dataset,auroc,fpr95) and sweep.csv.",
    )
    p.add_argument("--config", required=True, help="benchmark config JSON")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--k-img", dest="k_img", type=int, default=None)
    p.add_argument("--k-class", dest="k_class", type=int, default=None)
    p.add_argument("--calibration-fraction", dest="calibration_fraction",
                   type=float, default=None)
    p.add_argument("--strategy", default=None,
                   choices=["image", "mcm", "hierarchy", "candidates"])
    p.add_argument("--mode", default=None, choices=["mcm", "simlabel", "simlabel_s"])
    _common_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser(
        "profile", help="sorted mean-softmax similarity profile",
        epilog="Writes a rank,mean_softmax CSV: per label, the mean over "
               "images of the softmax similarity, sorted descending. "
               + _SLEB_HELP,
    )
    p.add_argument("--images", required=True, help="embeddings of one class's images")
    p.add_argument("--text", required=True, help="ID text embeddings")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--out", required=True)
    _common_flags(p)
    p.set_defaults(func=_cmd_profile)

    p = sub.add_parser(
        "fixture", help="write a seeded synthetic fixture",
        epilog="Writes id_images.sleb, text.sleb, ood.sleb, labels.txt, "
               "ground_truth.txt (one class index per line) and a ready "
               "bench.json for `eval`.",
    )
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--per-class", dest="per_class", type=int, default=50)
    p.add_argument("--ood", type=int, default=100)
    p.add_argument("--tightness", type=float, default=8.0)
    p.add_argument("--group-size", dest="group_size", type=int, default=2)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    _common_flags(p)
    p.set_defaults(func=_cmd_fixture)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except SimlabelError as exc:
        print(f"simlabel: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
