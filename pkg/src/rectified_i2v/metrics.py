"""Latent-space fidelity, temporal coherence and motion metrics.

These stand in for CLIP-based image similarity: values are computed directly
on latents, so absolute numbers are not comparable with image-embedding
scores, only orderings and trends are.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .schedule import ImageLatent, VideoLatent

UNDEFINED = float("nan")
NA = "NA"

REPORT_HEADER = ("# latent-space substitutes for CLIP metrics; "
                 "compare orderings, not absolute values")

REPORT_COLUMNS = (
    "run_id", "L", "D",
    "fidelity_cosine_mean", "fidelity_mse_mean",
    "temporal_coherence", "motion_intensity",
    "fidelity_cosine_per_frame", "fidelity_mse_per_frame",
)


def _cosine_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    denom = na * nb
    dots = np.sum(a * b, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(denom > 0, dots / np.where(denom > 0, denom, 1.0), UNDEFINED)
    return np.clip(cos, -1.0, 1.0)


def fidelity(video: VideoLatent, reference: ImageLatent) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame cosine similarity and MSE against the reference.

    A zero-norm frame or reference gives ``nan`` cosine; MSE is always defined.
    """
    if video.D != reference.D:
        raise ShapeError(f"video D={video.D} vs reference D={reference.D}")
    ref = reference.data[None, :]
    cos = _cosine_rows(video.data, ref)
    mse = np.mean((video.data - ref) ** 2, axis=1)
    return cos, mse


def temporal_coherence(video: VideoLatent) -> float:
    """Mean cosine similarity of adjacent frames."""
    if video.L < 2:
        raise ShapeError("temporal coherence needs at least two frames")
    return float(np.mean(_cosine_rows(video.data[:-1], video.data[1:])))


def motion_intensity(video: VideoLatent) -> float:
    """Mean adjacent-frame L2 distance divided by ``sqrt(D)``."""
    if video.L < 2:
        raise ShapeError("motion intensity needs at least two frames")
    steps = np.linalg.norm(np.diff(video.data, axis=0), axis=1)
    return float(np.mean(steps) / math.sqrt(video.D))


@dataclass(frozen=True)
class MetricReport:
    per_frame_fidelity_cosine: np.ndarray
    per_frame_fidelity_mse: np.ndarray
    temporal_coherence: float
    motion_intensity: float

    @property
    def fidelity_cosine_mean(self) -> float:
        return float(np.mean(self.per_frame_fidelity_cosine))

    @property
    def fidelity_mse_mean(self) -> float:
        return float(np.mean(self.per_frame_fidelity_mse))

    def row(self, run_id: str = "") -> dict[str, str]:
        return {
            "run_id": run_id,
            "L": str(len(self.per_frame_fidelity_cosine)),
            "D": "",
            "fidelity_cosine_mean": fmt(self.fidelity_cosine_mean),
            "fidelity_mse_mean": fmt(self.fidelity_mse_mean),
            "temporal_coherence": fmt(self.temporal_coherence),
            "motion_intensity": fmt(self.motion_intensity),
            "fidelity_cosine_per_frame": ";".join(fmt(v) for v in self.per_frame_fidelity_cosine),
            "fidelity_mse_per_frame": ";".join(fmt(v) for v in self.per_frame_fidelity_mse),
        }


def fmt(x: float) -> str:
    """Round-trippable float text; ``NA`` for undefined values."""
    return NA if x is None or not math.isfinite(x) else repr(float(x))


def metric_report(video: VideoLatent, reference: ImageLatent) -> MetricReport:
    """All metrics at once. Temporal metrics are ``nan`` for single-frame videos."""
    cos, mse = fidelity(video, reference)
    if video.L >= 2:
        coh, mot = temporal_coherence(video), motion_intensity(video)
    else:
        coh = mot = UNDEFINED
    return MetricReport(cos, mse, coh, mot)


def report_csv(report: MetricReport, run_id: str = "", D: int | None = None) -> str:
    row = report.row(run_id)
    if D is not None:
        row["D"] = str(D)
    buf = io.StringIO()
    buf.write(REPORT_HEADER + "\n")
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerow(row)
    return buf.getvalue()


def read_report_csv(text: str) -> list[dict[str, str]]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))
