"""Multi-step forecast evaluation: per-step and overall MSE/MAE,
percent improvement against a named baseline, and table/curve exports."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .data import Normalizer, WindowedDataset
from .errors import ConfigError, ShapeError


@dataclass
class MetricsReport:
    model_tag: str
    overall_mse: float
    overall_mae: float
    per_step_mse: list[float]
    per_step_mae: list[float]
    num_samples: int
    denormalized: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricsReport":
        return cls(**doc)


@dataclass
class ComparisonTable:
    baseline_tag: str
    rows: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"baseline_tag": self.baseline_tag, "rows": self.rows}


def evaluate(
    predict_fn,
    test: WindowedDataset,
    normalizer: Normalizer | None = None,
    model_tag: str = "model",
    denormalize: bool = False,
) -> MetricsReport:
    """Score an H-step predictor on (history, future) pairs.

    predict_fn maps a [m, p] history matrix to [m, H] predictions with
    H == test.q. Metrics are computed in normalized units unless
    denormalize is set (which requires the fitted normalizer).
    """
    if len(test) == 0:
        raise ConfigError("empty test dataset")
    preds = np.asarray(predict_fn(test.histories), dtype=float)
    truth = test.futures
    if preds.shape != truth.shape:
        raise ShapeError(f"predictions shape {preds.shape} != futures shape {truth.shape}")
    if denormalize:
        if normalizer is None:
            raise ConfigError("denormalize requested without a normalizer")
        preds = normalizer.invert(preds)
        truth = normalizer.invert(truth)
    err = preds - truth
    per_step_mse = np.mean(err * err, axis=0)
    per_step_mae = np.mean(np.abs(err), axis=0)
    return MetricsReport(
        model_tag=model_tag,
        overall_mse=float(np.mean(err * err)),
        overall_mae=float(np.mean(np.abs(err))),
        per_step_mse=[float(v) for v in per_step_mse],
        per_step_mae=[float(v) for v in per_step_mae],
        num_samples=len(test),
        denormalized=denormalize,
    )


def percent_improvement(baseline: float, candidate: float) -> float:
    """100 * (baseline - candidate) / baseline; negative when worse."""
    if baseline <= 0:
        raise ConfigError(f"baseline must be > 0, got {baseline}")
    return 100.0 * (baseline - candidate) / baseline


def build_comparison(reports: list[MetricsReport], baseline_tag: str) -> ComparisonTable:
    baselines = [r for r in reports if r.model_tag == baseline_tag]
    if not baselines:
        raise ConfigError(f"baseline tag {baseline_tag!r} not among reports")
    base = baselines[0]
    table = ComparisonTable(baseline_tag=baseline_tag)
    for r in reports:
        is_base = r.model_tag == baseline_tag
        table.rows.append(
            {
                "model_tag": r.model_tag,
                "mse": r.overall_mse,
                "mse_improvement_pct": None
                if is_base
                else percent_improvement(base.overall_mse, r.overall_mse),
                "mae": r.overall_mae,
                "mae_improvement_pct": None
                if is_base
                else percent_improvement(base.overall_mae, r.overall_mae),
            }
        )
    return table


def render_comparison_text(table: ComparisonTable) -> str:
    header = ["Model", "MSE", "% Improv.", "MAE", "% Improv."]
    lines = [header]
    for row in table.rows:
        lines.append(
            [
                row["model_tag"],
                f"{row['mse']:.6f}",
                "-" if row["mse_improvement_pct"] is None else f"{row['mse_improvement_pct']:.2f}",
                f"{row['mae']:.6f}",
                "-" if row["mae_improvement_pct"] is None else f"{row['mae_improvement_pct']:.2f}",
            ]
        )
    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    out = []
    for j, line in enumerate(lines):
        out.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
        if j == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out) + "\n"


def export_step_curves(reports: list[MetricsReport], path) -> None:
    """CSV `model_tag,step,mse,mae`, one row per (model, step)."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["model_tag", "step", "mse", "mae"])
        for r in reports:
            for step, (mse, mae) in enumerate(zip(r.per_step_mse, r.per_step_mae), start=1):
                writer.writerow([r.model_tag, step, repr(mse), repr(mae)])


def save_report(report: MetricsReport, path) -> None:
    with open(path, "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def load_report(path) -> MetricsReport:
    with open(path) as f:
        return MetricsReport.from_dict(json.load(f))
