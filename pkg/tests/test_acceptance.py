"""Acceptance gate: the release criteria, one test per criterion.

Each test prints a single [PASS]/[FAIL] line (visible with `pytest -s` or on
failure) and enforces the stated numeric tolerance and runtime budget.
"""

import time
from pathlib import Path

import numpy as np

from oracles import image_alignment_oracle, scan_fpr, scan_threshold
from simlabel.cli import main as cli_main
from simlabel.embedding_store import EmbeddingMatrix, LabelSet
from simlabel.evalkit import (
    FixtureSpec,
    auroc,
    auroc_pairwise,
    auroc_sorted,
    calibrate_threshold,
    fpr_at_tpr,
    synthesize_fixture,
)
from simlabel.scoring import ScoreMode, ScoringConfig, score_batch
from simlabel.simclass import from_hierarchy, from_image_alignment, load_hierarchy
from simlabel.similarity import softmax

DATA = Path(__file__).parent / "data"


def _report(name: str, ok: bool) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    assert ok, name


def _unit(rng, n, d):
    m = rng.standard_normal((n, d))
    m /= np.linalg.norm(m, axis=1, keepdims=True)
    return EmbeddingMatrix(data=m.astype(np.float32))


def test_alpha_collapse_identity():
    """SIMLABEL at alpha=0 equals MCM within 1e-9 with identical predictions."""
    start = time.perf_counter()
    ok = True
    cases = [(c, d) for c in (2, 10, 100) for d in (8, 512)]
    seed = 0
    for trial in range(20):
        c, d = cases[trial % len(cases)]
        rng = np.random.default_rng(1000 + seed)
        seed += 1
        text = _unit(rng, c, d)
        images = _unit(rng, 30, d)
        ids = LabelSet(names=tuple(f"c{i}" for i in range(c)))
        entries = {}
        for i in range(c):
            others = [j for j in range(c) if j != i]
            picks = rng.choice(others, size=min(2, len(others)), replace=False)
            entries[f"c{i}"] = [f"c{int(j)}" for j in picks]
        from simlabel.simclass import MapSource, SimilarClassMap

        m = SimilarClassMap(entries=entries, source=MapSource.IMAGE_ALIGNMENT)
        sim = score_batch(images, text, ids, m, ScoringConfig(alpha=0.0))
        mcm = score_batch(images, text, ids, m,
                          ScoringConfig(alpha=0.0, mode=ScoreMode.MCM))
        ok = ok and bool(np.all(np.abs(sim.scores - mcm.scores) <= 1e-9))
        ok = ok and bool(np.array_equal(sim.predictions, mcm.predictions))
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 5.0
    _report(f"alpha-collapse identity (20 fixtures, {elapsed:.2f}s)", ok)


def test_auroc_oracle_equivalence():
    """Sort-based AUROC equals brute-force pairwise counting exactly."""
    start = time.perf_counter()
    rng = np.random.default_rng(42)
    ok = True
    for _ in range(100):
        n_id = int(rng.integers(1, 201))
        n_ood = int(rng.integers(1, 201))
        # coarse quantization ensures tied pairs are actually exercised
        ids = rng.integers(0, 50, size=n_id) / 25.0
        oods = rng.integers(0, 50, size=n_ood) / 25.0
        a = auroc_sorted(ids, oods)
        b = auroc_pairwise(ids, oods)
        ok = ok and (a == b)
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 5.0
    _report(f"AUROC oracle equivalence (100 sets, {elapsed:.2f}s)", ok)


def test_image_alignment_oracle_equivalence():
    """Similar-class generation matches the exhaustive occurrence count."""
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    ok = True
    for trial in range(50):
        n_cls = int(rng.integers(2, 9))
        n_img = int(rng.integers(2, 101))
        dim = int(rng.integers(n_cls, 17))
        k_img = int(rng.integers(1, 5))
        k_class = int(rng.integers(1, 5))
        texts = _unit(rng, n_cls, dim)
        images = _unit(rng, n_img, dim)
        ids = LabelSet(names=tuple(f"c{i}" for i in range(n_cls)))
        got = from_image_alignment(images, texts, ids, k_img, k_class).entries
        expected = image_alignment_oracle(
            [list(map(float, r)) for r in images.data.astype(np.float64)],
            [list(map(float, r)) for r in texts.data.astype(np.float64)],
            list(ids.names), k_img, k_class,
        )
        ok = ok and (got == expected)
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 10.0
    _report(f"image-alignment oracle equivalence (50 fixtures, {elapsed:.2f}s)", ok)


def test_separation_property():
    """Consistency scoring beats max-similarity scoring on the default fixture."""
    start = time.perf_counter()
    fx = synthesize_fixture(FixtureSpec())
    # similar sets matched to the planted structure: one sibling per class
    m = from_image_alignment(fx.id_images, fx.id_text, fx.labels,
                             k_img=2, k_class=1)
    results = {}
    for mode, alpha in ((ScoreMode.MCM, 0.0), (ScoreMode.SIMLABEL, 1.0)):
        cfg = ScoringConfig(alpha=alpha, tau=1.0, mode=mode)
        idb = score_batch(fx.id_images, fx.id_text, fx.labels, m, cfg)
        oob = score_batch(fx.ood_images, fx.id_text, fx.labels, m, cfg)
        results[mode] = (auroc(idb.scores, oob.scores),
                         fpr_at_tpr(idb.scores, oob.scores))
    elapsed = time.perf_counter() - start
    sim_auroc, sim_fpr = results[ScoreMode.SIMLABEL]
    mcm_auroc, mcm_fpr = results[ScoreMode.MCM]
    ok = sim_auroc > mcm_auroc and sim_fpr < mcm_fpr and elapsed < 2.0
    _report(
        "separation property (sim AUROC "
        f"{sim_auroc:.3f} > mcm {mcm_auroc:.3f}, sim FPR95 {sim_fpr:.3f} < "
        f"mcm {mcm_fpr:.3f}, {elapsed:.2f}s)",
        ok,
    )


def test_hierarchy_fidelity():
    """The shipped super-class subset yields the documented similar sets."""
    hierarchy = load_hierarchy(DATA / "imagenet_hierarchy_subset.json")
    names = tuple(m for members in hierarchy.groups.values() for m in members)
    mapping = from_hierarchy(hierarchy, LabelSet(names=names))
    ok = (
        mapping.entries["Great White Shark"] == ["Hammerhead Shark", "Tiger Shark"]
        and mapping.entries["Water Tower"] == []
    )
    _report("hierarchy fidelity (shark siblings, water tower empty)", ok)


def test_metric_invariance_suite():
    """Softmax normalization/argmax, AUROC invariance, threshold oracles."""
    rng = np.random.default_rng(123)
    ok = True

    for _ in range(50):
        v = rng.standard_normal(int(rng.integers(1, 40)))
        for tau in (0.1, 1.0, 10.0):
            probs = softmax(v, tau)
            ok = ok and abs(probs.sum() - 1.0) < 1e-6
            ok = ok and int(np.argmax(probs)) == int(np.argmax(v))

    for _ in range(20):
        ids = rng.uniform(0, 1, size=int(rng.integers(1, 80)))
        oods = rng.uniform(0, 1, size=int(rng.integers(1, 80)))
        base = auroc(ids, oods)
        for f in (lambda x: 10 * x - 3, np.exp, lambda x: np.tanh(x) + 2):
            ok = ok and abs(auroc(f(ids), f(oods)) - base) <= 1e-12

    for _ in range(100):
        n_id = int(rng.integers(1, 50))
        n_ood = int(rng.integers(1, 50))
        ids = list(rng.integers(0, 20, size=n_id) / 10.0)
        oods = list(rng.integers(0, 20, size=n_ood) / 10.0)
        fraction = float(rng.choice([0.5, 0.8, 0.9, 0.95, 1.0]))
        ok = ok and calibrate_threshold(ids, fraction) == scan_threshold(ids, fraction)
        ok = ok and fpr_at_tpr(ids, oods, fraction) == scan_fpr(ids, oods, fraction)

    _report("metric invariance suite (softmax, AUROC, thresholds)", ok)


def test_cli_determinism(tmp_path):
    """Every subcommand produces byte-identical outputs across runs/threads."""
    ok = True

    def run(argv):
        assert cli_main(argv) == 0

    variants = {}
    for tag, threads in (("a", "1"), ("b", "1"), ("c", "4")):
        root = tmp_path / tag
        fx = root / "fx"
        run(["fixture", "--out-dir", str(fx), "--seed", "7",
             "--threads", threads])
        map_path = root / "map.json"
        run(["gen-sim", "--strategy", "image",
             "--id-images", str(fx / "id_images.sleb"),
             "--text", str(fx / "text.sleb"),
             "--labels", str(fx / "labels.txt"),
             "--k", "2", "--out", str(map_path), "--threads", threads])
        scores = root / "scores.csv"
        run(["score", "--images", str(fx / "id_images.sleb"),
             "--text", str(fx / "text.sleb"),
             "--labels", str(fx / "labels.txt"),
             "--map", str(map_path), "--mode", "simlabel",
             "--out", str(scores), "--threads", threads])
        preds = root / "preds.csv"
        run(["classify", "--images", str(fx / "id_images.sleb"),
             "--text", str(fx / "text.sleb"),
             "--labels", str(fx / "labels.txt"),
             "--map", str(map_path), "--mode", "simlabel",
             "--out", str(preds), "--threads", threads])
        lam = root / "lambda.json"
        run(["calibrate", "--scores", str(scores), "--out", str(lam),
             "--threads", threads])
        profile = root / "profile.csv"
        run(["profile", "--images", str(fx / "id_images.sleb"),
             "--text", str(fx / "text.sleb"), "--out", str(profile),
             "--threads", threads])
        report = root / "report"
        run(["eval", "--config", str(fx / "bench.json"),
             "--out-dir", str(report), "--threads", threads])
        variants[tag] = [
            fx / "id_images.sleb", fx / "text.sleb", fx / "ood.sleb",
            fx / "labels.txt", fx / "ground_truth.txt", fx / "bench.json",
            map_path, scores, preds, lam, profile,
            report / "report.json", report / "datasets.csv",
        ]

    for files_a, files_b in ((variants["a"], variants["b"]),
                             (variants["a"], variants["c"])):
        for pa, pb in zip(files_a, files_b):
            same = pa.read_bytes() == pb.read_bytes()
            ok = ok and same
            if not same:
                print(f"  mismatch: {pa.name}")
    _report("CLI determinism (two runs, threads 1 vs 4, 13 artifacts)", ok)
