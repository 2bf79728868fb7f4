"""Config-driven benchmark: generation -> scoring -> metrics -> report.

The config is a JSON object:

    {
      "id_images": "id.sleb",
      "id_labels": "labels.txt",
      "text_embeddings": "text.sleb",
      "text_labels": "text_labels.txt",        // optional, for extended sets
      "id_ground_truth": "truth.txt",          // optional, enables accuracy
      "ood_datasets": [{"name": "x", "path": "x.sleb"}, ...],
      "strategy": "image" | "mcm" | "hierarchy" | "candidates",
      "map_path": "map.json",                  // required unless image/mcm
      "mode": "mcm" | "simlabel" | "simlabel_s",  // optional
      "alpha": 1.0, "tau": 1.0,
      "k_img": 6, "k_class": 6,
      "calibration_fraction": 0.95,
      "sweep": {"param": "alpha" | "k", "values": [...]}   // optional
    }

Strategy "image" regenerates the similar-class map from the configured ID
image pool; "hierarchy" and "candidates" maps carry extra inputs, so they
are generated up front with ``gen-sim`` and referenced via map_path.
Sweeping "k" regenerates the map per value for "image" and truncates the
(rank-ordered) loaded map lists otherwise.
"""

from __future__ import annotations

import csv
import json
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..embedding_store import (
    EmbeddingMatrix,
    load_embeddings,
    load_labels,
    validate_pairing,
)
from ..errors import FormatError, IoError, ParamError, SimlabelError
from ..scoring import ScoreBatch, ScoreMode, ScoringConfig, score_batch
from ..simclass import SimilarClassMap, from_image_alignment, load_map
from .metrics import accuracy, auroc, calibrate_threshold, fpr_at_tpr

METRIC_POLICY = {
    "auroc_ties": "0.5 credit per tied (ID, OOD) pair (Mann-Whitney statistic)",
    "threshold_rule": "ceil(fraction*N)-th largest ID score, no interpolation",
    "decision_boundary": "inclusive: score >= lambda counts as ID",
}


@dataclass(frozen=True)
class OodDataset:
    name: str
    path: str


@dataclass(frozen=True)
class BenchmarkConfig:
    id_images: str
    id_labels: str
    text_embeddings: str
    ood_datasets: tuple[OodDataset, ...]
    strategy: str = "image"
    map_path: str | None = None
    text_labels: str | None = None
    id_ground_truth: str | None = None
    mode: str | None = None
    alpha: float = 1.0
    tau: float = 1.0
    k_img: int = 6
    k_class: int = 6
    calibration_fraction: float = 0.95
    sweep: tuple[str, tuple[float, ...]] | None = None

    @classmethod
    def from_json(cls, path: str | Path) -> "BenchmarkConfig":
        path = Path(path)
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: malformed JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise FormatError(f"{path}: config must be a JSON object")
        return cls.from_dict(obj, base_dir=path.parent)

    @classmethod
    def from_dict(cls, obj: dict, base_dir: Path | None = None) -> "BenchmarkConfig":
        def resolve(p):
            if p is None:
                return None
            return str(base_dir / p) if base_dir is not None else str(p)

        missing = {"id_images", "id_labels", "text_embeddings", "ood_datasets"} - set(obj)
        if missing:
            raise FormatError(f"config missing fields: {sorted(missing)}")
        raw_sets = obj["ood_datasets"]
        if not isinstance(raw_sets, list) or not raw_sets:
            raise FormatError("ood_datasets must be a non-empty array")
        ood = tuple(
            OodDataset(name=str(d["name"]), path=resolve(d["path"])) for d in raw_sets
        )
        sweep = None
        if obj.get("sweep") is not None:
            s = obj["sweep"]
            if set(s) != {"param", "values"} or s["param"] not in ("alpha", "k"):
                raise FormatError("sweep must be {'param': 'alpha'|'k', 'values': [...]}")
            sweep = (s["param"], tuple(float(v) for v in s["values"]))
        return cls(
            id_images=resolve(obj["id_images"]),
            id_labels=resolve(obj["id_labels"]),
            text_embeddings=resolve(obj["text_embeddings"]),
            ood_datasets=ood,
            strategy=obj.get("strategy", "image"),
            map_path=resolve(obj.get("map_path")),
            text_labels=resolve(obj.get("text_labels")),
            id_ground_truth=resolve(obj.get("id_ground_truth")),
            mode=obj.get("mode"),
            alpha=float(obj.get("alpha", 1.0)),
            tau=float(obj.get("tau", 1.0)),
            k_img=int(obj.get("k_img", 6)),
            k_class=int(obj.get("k_class", 6)),
            calibration_fraction=float(obj.get("calibration_fraction", 0.95)),
            sweep=sweep,
        )

    def scoring_config(self, alpha: float | None = None) -> ScoringConfig:
        if self.mode is not None:
            mode = ScoreMode(self.mode.upper())
        elif self.strategy == "mcm":
            mode = ScoreMode.MCM
        else:
            mode = ScoreMode.SIMLABEL
        return ScoringConfig(
            alpha=self.alpha if alpha is None else alpha, tau=self.tau, mode=mode
        )


@dataclass(frozen=True)
class DatasetResult:
    auroc: float
    fpr_at_95: float


@dataclass(frozen=True)
class SweepRow:
    param: str
    value: float
    auroc: float
    fpr_at_95: float


@dataclass(frozen=True)
class EvalReport:
    auroc: float
    fpr_at_95: float
    threshold: float
    id_accuracy: float | None
    per_dataset: dict[str, DatasetResult]
    sweep_rows: tuple[SweepRow, ...] = ()
    metric_policy: dict[str, str] = field(default_factory=lambda: dict(METRIC_POLICY))

    def to_dict(self) -> dict:
        return {
            "auroc": self.auroc,
            "fpr_at_95": self.fpr_at_95,
            "lambda": self.threshold,
            "id_accuracy": self.id_accuracy,
            "per_dataset": {
                name: {"auroc": r.auroc, "fpr_at_95": r.fpr_at_95}
                for name, r in self.per_dataset.items()
            },
            "sweep_rows": [
                {"param": r.param, "value": r.value, "auroc": r.auroc,
                 "fpr_at_95": r.fpr_at_95}
                for r in self.sweep_rows
            ],
            "metric_policy": self.metric_policy,
        }


@contextmanager
def _stage(name: str):
    """Re-raise component errors with benchmark context (stage, dataset)."""
    try:
        yield
    except SimlabelError as exc:
        raise SimlabelError(f"[{name}] {exc}") from exc


def _truncated(map_: SimilarClassMap, k: int) -> SimilarClassMap:
    return SimilarClassMap(
        entries={key: vals[:k] for key, vals in map_.entries.items()},
        source=map_.source,
    )


def _load_ground_truth(path: str) -> np.ndarray:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        return np.array([int(line) for line in lines if line.strip() != ""],
                        dtype=np.int64)
    except ValueError as exc:
        raise FormatError(f"{path}: ground truth must be integer indices: {exc}") from exc


class _Pipeline:
    """Loaded inputs plus scoring helpers shared by the main run and sweeps."""

    def __init__(self, cfg: BenchmarkConfig, n_threads: int | None):
        self.cfg = cfg
        self.n_threads = n_threads
        with _stage("load id_images"):
            self.id_images = load_embeddings(cfg.id_images)
        with _stage("load id_labels"):
            self.ids = load_labels(cfg.id_labels)
        with _stage("load text_embeddings"):
            self.text = load_embeddings(cfg.text_embeddings)
            if cfg.text_labels is not None:
                self.text_labels = load_labels(cfg.text_labels)
                validate_pairing(self.text, self.text_labels)
                if self.text_labels.names[: len(self.ids)] != self.ids.names:
                    raise FormatError(
                        "text_labels must start with the ID labels in order"
                    )
            else:
                self.text_labels = self.ids
                validate_pairing(self.text, self.ids)
        with _stage("load ood_datasets"):
            self.ood = {
                ds.name: load_embeddings(ds.path) for ds in cfg.ood_datasets
            }
        self.truth = None
        if cfg.id_ground_truth is not None:
            with _stage("load id_ground_truth"):
                self.truth = _load_ground_truth(cfg.id_ground_truth)

    def id_text(self) -> EmbeddingMatrix:
        if self.text.n_rows == len(self.ids):
            return self.text
        return EmbeddingMatrix(data=self.text.data[: len(self.ids)])

    def build_map(self, k_class: int | None = None) -> SimilarClassMap | None:
        cfg = self.cfg
        k_c = cfg.k_class if k_class is None else k_class
        if cfg.map_path is not None:
            with _stage("load map"):
                loaded = load_map(cfg.map_path)
            return loaded if k_class is None else _truncated(loaded, k_c)
        if cfg.strategy == "image":
            with _stage("generate similar classes (image alignment)"):
                return from_image_alignment(
                    self.id_images, self.id_text(), self.ids,
                    k_img=cfg.k_img, k_class=k_c,
                )
        if cfg.strategy == "mcm":
            return None
        raise ParamError(
            f"strategy {cfg.strategy!r} requires map_path (generate with gen-sim)"
        )

    def score_all(
        self, map_: SimilarClassMap | None, scoring: ScoringConfig
    ) -> tuple[ScoreBatch, dict[str, ScoreBatch]]:
        ext_names = self.text_labels.names
        with _stage("score id_images"):
            id_batch = score_batch(
                self.id_images, self.text, self.ids, map_, scoring,
                n_threads=self.n_threads, ext_names=ext_names,
            )

        def score_one(name: str, matrix: EmbeddingMatrix,
                      inner_threads: int | None) -> tuple[str, ScoreBatch]:
            with _stage(f"score ood dataset {name!r}"):
                return name, score_batch(
                    matrix, self.text, self.ids, map_, scoring,
                    n_threads=inner_threads, ext_names=ext_names,
                )

        # Datasets are independent, so they fan out across the pool; each
        # batch is computed in the same fixed row chunks either way, so the
        # results do not depend on the parallel schedule.
        if self.n_threads is not None and self.n_threads > 1 and len(self.ood) > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=self.n_threads) as pool:
                scored = list(pool.map(
                    lambda item: score_one(item[0], item[1], 1), self.ood.items()
                ))
        else:
            scored = [
                score_one(name, matrix, self.n_threads)
                for name, matrix in self.ood.items()
            ]
        return id_batch, dict(scored)

    def metrics_for(
        self, id_batch: ScoreBatch, ood_batches: dict[str, ScoreBatch]
    ) -> dict[str, DatasetResult]:
        out = {}
        for name, batch in ood_batches.items():
            with _stage(f"metrics for dataset {name!r}"):
                out[name] = DatasetResult(
                    auroc=auroc(id_batch.scores, batch.scores),
                    fpr_at_95=fpr_at_tpr(
                        id_batch.scores, batch.scores, self.cfg.calibration_fraction
                    ),
                )
        return out


def run_benchmark(cfg: BenchmarkConfig, n_threads: int | None = None) -> EvalReport:
    """Execute generation, scoring, and metrics for every OOD dataset."""
    pipe = _Pipeline(cfg, n_threads)
    map_ = pipe.build_map()
    scoring = cfg.scoring_config()

    id_batch, ood_batches = pipe.score_all(map_, scoring)
    per_dataset = pipe.metrics_for(id_batch, ood_batches)
    threshold = calibrate_threshold(id_batch.scores, cfg.calibration_fraction)

    id_accuracy = None
    if pipe.truth is not None:
        with _stage("id accuracy"):
            id_accuracy = accuracy(id_batch.predictions, pipe.truth)

    sweep_rows: list[SweepRow] = []
    if cfg.sweep is not None:
        param, values = cfg.sweep
        for value in values:
            if param == "alpha":
                sw_map, sw_scoring = map_, cfg.scoring_config(alpha=value)
            else:
                sw_map, sw_scoring = pipe.build_map(k_class=int(value)), scoring
            sw_id, sw_ood = pipe.score_all(sw_map, sw_scoring)
            results = pipe.metrics_for(sw_id, sw_ood)
            sweep_rows.append(
                SweepRow(
                    param=param,
                    value=float(value),
                    auroc=float(np.mean([r.auroc for r in results.values()])),
                    fpr_at_95=float(np.mean([r.fpr_at_95 for r in results.values()])),
                )
            )

    return EvalReport(
        auroc=float(np.mean([r.auroc for r in per_dataset.values()])),
        fpr_at_95=float(np.mean([r.fpr_at_95 for r in per_dataset.values()])),
        threshold=threshold,
        id_accuracy=id_accuracy,
        per_dataset=per_dataset,
        sweep_rows=tuple(sweep_rows),
    )


def write_report(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """Write report.json plus CSV tables; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out_dir / "report.json"
    json_path.write_text(
        json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8"
    )
    written.append(json_path)

    csv_path = out_dir / "datasets.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset", "auroc", "fpr95"])
        for name, r in report.per_dataset.items():
            writer.writerow([name, format(r.auroc, ".9g"), format(r.fpr_at_95, ".9g")])
        writer.writerow(
            ["average", format(report.auroc, ".9g"), format(report.fpr_at_95, ".9g")]
        )
    written.append(csv_path)

    if report.sweep_rows:
        sweep_path = out_dir / "sweep.csv"
        with open(sweep_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["param", "value", "auroc", "fpr95"])
            for row in report.sweep_rows:
                writer.writerow(
                    [row.param, format(row.value, ".9g"),
                     format(row.auroc, ".9g"), format(row.fpr_at_95, ".9g")]
                )
        written.append(sweep_path)
    return written
