"""Thresholded binary metrics and dataset evaluation under appearance corruptions."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .dense_maps import as_binary_map, as_dense_map, check_same_shape
from .model import TokenBank, infer
from .uncertainty import DEFAULT_ALPHA, DEFAULT_EPSILON

__all__ = [
    "DEFAULT_TAU",
    "MetricReport",
    "CorruptionSpec",
    "CORRUPTION_TABLE",
    "binary_metrics",
    "metrics_from_counts",
    "pool_reports",
    "corrupt",
    "apply_corruption",
    "evaluate_dataset",
    "DatasetReport",
    "format_table",
]

DEFAULT_TAU = 0.5


@dataclass
class MetricReport:
    iou: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int
    tn: int
    tau: float
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iou": self.iou,
            "precision": self.precision,
            "recall": self.recall,
            "counts": {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn},
            "tau": self.tau,
            "flags": list(self.flags),
        }


def _ratio(num: int, den: int, name: str, flags: list[str]) -> float:
    if den == 0:
        flags.append(f"{name}_zero_denominator")
        return 0.0
    return num / den


def metrics_from_counts(tp: int, fp: int, fn: int, tn: int, tau: float) -> MetricReport:
    """Ratios from confusion counts; a zero denominator yields 0 plus a flag."""
    flags: list[str] = []
    iou = _ratio(tp, tp + fp + fn, "iou", flags)
    precision = _ratio(tp, tp + fp, "precision", flags)
    recall = _ratio(tp, tp + fn, "recall", flags)
    return MetricReport(iou, precision, recall, int(tp), int(fp), int(fn), int(tn), tau, flags)


def binary_metrics(score, gt, tau: float = DEFAULT_TAU) -> MetricReport:
    """Confusion counts and ratio metrics of ``score >= tau`` against a binary mask."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    s = as_dense_map(score)
    y = as_binary_map(gt).astype(bool)
    check_same_shape(s, y)
    pred = s >= tau
    tp = int(np.count_nonzero(pred & y))
    fp = int(np.count_nonzero(pred & ~y))
    fn = int(np.count_nonzero(~pred & y))
    tn = int(np.count_nonzero(~pred & ~y))
    return metrics_from_counts(tp, fp, fn, tn, tau)


def pool_reports(reports: list[MetricReport], aggregation: str = "micro") -> MetricReport:
    """Aggregate per-scene reports.

    ``micro`` sums the confusion counts before forming ratios; ``macro``
    averages the per-scene ratios (counts are still summed).
    """
    if not reports:
        raise ValueError("no reports to aggregate")
    tau = reports[0].tau
    tp = sum(r.tp for r in reports)
    fp = sum(r.fp for r in reports)
    fn = sum(r.fn for r in reports)
    tn = sum(r.tn for r in reports)
    pooled = metrics_from_counts(tp, fp, fn, tn, tau)
    if aggregation == "micro":
        return pooled
    if aggregation != "macro":
        raise ValueError(f"unknown aggregation {aggregation!r}")
    flags = sorted({f for r in reports for f in r.flags})
    return MetricReport(
        float(np.mean([r.iou for r in reports])),
        float(np.mean([r.precision for r in reports])),
        float(np.mean([r.recall for r in reports])),
        tp, fp, fn, tn, tau, flags,
    )


# Severity parameters, index 0 is severity 1.
CORRUPTION_TABLE = {
    "gaussian_noise": (0.04, 0.08, 0.12, 0.18, 0.26),  # std, fraction of range
    "gaussian_blur": (0.5, 1.0, 1.5, 2.0, 3.0),  # kernel std, pixels
    "brightness": (0.1, 0.2, 0.3, 0.4, 0.5),  # additive shift
    "contrast": (0.75, 0.6, 0.45, 0.3, 0.15),  # factor about the mean
    "fog_haze": (0.15, 0.3, 0.45, 0.6, 0.75),  # peak blend toward fog
}

FOG_COLOR = np.array([0.78, 0.80, 0.84])


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    severity: int

    def __post_init__(self):
        if self.kind not in CORRUPTION_TABLE:
            raise ValueError(f"unknown corruption {self.kind!r}; expected one of {sorted(CORRUPTION_TABLE)}")
        if int(self.severity) != self.severity or not 1 <= self.severity <= 5:
            raise ValueError(f"severity must be an integer in [1, 5], got {self.severity}")

    @classmethod
    def parse(cls, text: str) -> "CorruptionSpec":
        """Parse ``kind:severity``."""
        kind, sep, sev = text.partition(":")
        if not sep:
            raise ValueError(f"expected kind:severity, got {text!r}")
        try:
            return cls(kind, int(sev))
        except ValueError as exc:
            raise ValueError(str(exc)) from None

    @property
    def parameter(self) -> float:
        return CORRUPTION_TABLE[self.kind][self.severity - 1]


def apply_corruption(image, kind: str, parameter: float, seed: int = 0) -> np.ndarray:
    """Apply ``kind`` at an explicit strength, bypassing the severity table."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"expected a (3, H, W) image, got {img.shape}")
    rng = np.random.default_rng(seed)
    if kind == "gaussian_noise":
        out = img + parameter * rng.standard_normal(img.shape)
    elif kind == "gaussian_blur":
        out = gaussian_filter(img, sigma=(0, parameter, parameter), mode="reflect") if parameter > 0 else img.copy()
    elif kind == "brightness":
        out = img + parameter
    elif kind == "contrast":
        mean = img.mean(axis=(1, 2), keepdims=True)
        out = mean + parameter * (img - mean)
    elif kind == "fog_haze":
        _, h, w = img.shape
        field_ = gaussian_filter(rng.standard_normal((h, w)), sigma=max(h, w) / 8, mode="wrap")
        field_ = (field_ - field_.min()) / (np.ptp(field_) + 1e-12)
        blend = parameter * (0.7 + 0.3 * field_)
        out = (1 - blend) * img + blend * FOG_COLOR[:, None, None]
    else:
        raise ValueError(f"unknown corruption {kind!r}")
    return np.clip(out, 0.0, 1.0)


def corrupt(image, spec: CorruptionSpec, seed: int = 0) -> np.ndarray:
    """Deterministic per ``(image, spec, seed)``; output clamped to [0, 1]."""
    return apply_corruption(image, spec.kind, spec.parameter, seed)


@dataclass
class DatasetReport:
    overall: MetricReport
    per_scene: list[MetricReport]
    aggregation: str = "micro"
    corruption: CorruptionSpec | None = None

    def to_dict(self) -> dict:
        out = self.overall.to_dict()
        out["aggregation"] = self.aggregation
        out["corruption"] = None if self.corruption is None else f"{self.corruption.kind}:{self.corruption.severity}"
        out["per_scene"] = [r.to_dict() for r in self.per_scene]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def evaluate_dataset(
    tokens: TokenBank,
    scenes,
    tau: float = DEFAULT_TAU,
    corruption: CorruptionSpec | None = None,
    seed: int = 0,
    aggregation: str = "micro",
    output: str = "T",
    alpha: float = DEFAULT_ALPHA,
    epsilon: float = DEFAULT_EPSILON,
) -> DatasetReport:
    """Score every scene and aggregate.

    ``output`` picks which map is thresholded (``"T"`` for the fused score,
    ``"P"`` for the mean semantic probability). Scene ``i`` is corrupted with
    seed ``seed + i``.
    """
    if len(scenes) == 0:
        raise ValueError("cannot evaluate an empty scene list")
    reports = []
    for i, scene in enumerate(scenes):
        image = scene.rgb if corruption is None else corrupt(scene.rgb, corruption, seed + i)
        result = infer(tokens, image, alpha, epsilon)
        reports.append(binary_metrics(result.maps()[output], scene.label, tau))
    return DatasetReport(pool_reports(reports, aggregation), reports, aggregation, corruption)


def format_table(report: DatasetReport) -> str:
    """Aligned plain-text rendering of a dataset report."""
    rows = [("scope", "IoU", "Prec", "Rec", "TP", "FP", "FN", "TN")]

    def row(name, r):
        return (name, f"{r.iou:.4f}", f"{r.precision:.4f}", f"{r.recall:.4f}", str(r.tp), str(r.fp), str(r.fn), str(r.tn))

    rows.append(row(report.aggregation, report.overall))
    rows.extend(row(f"scene {i}", r) for i, r in enumerate(report.per_scene))
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    lines = ["  ".join(cell.rjust(wd) for cell, wd in zip(r, widths)) for r in rows]
    header = f"tau={report.overall.tau}"
    if report.corruption is not None:
        header += f"  corruption={report.corruption.kind}:{report.corruption.severity}"
    return "\n".join([header] + lines) + "\n"
