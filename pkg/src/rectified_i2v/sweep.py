"""Single runs from a :class:`RunConfig` and parameter sweeps over them."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig, SweepSpec, build_run
from .errors import error_category
from .fileio import atomic_write_text
from .metrics import MetricReport, fmt, metric_report
from .pipeline import RunManifest, generate_video
from .schedule import ImageLatent, VideoLatent

log = logging.getLogger(__name__)

METRICS = ("fidelity_cosine_mean", "fidelity_mse_mean", "temporal_coherence", "motion_intensity")

RUNS_COLUMNS = ("row_index", "axis", "value", "seed", "status", "error", *METRICS, "output_sha256")
LONG_COLUMNS = ("row_index", "axis", "value", "seed", "status", "metric", "metric_value")
_SUMMARY_NAMES = ("fidelity_cosine", "fidelity_mse", "temporal_coherence", "motion_intensity")
SUMMARY_COLUMNS = ("axis", "value", "n_ok", "n_failed",
                   *(f"{m}_{s}" for m in _SUMMARY_NAMES for s in ("mean", "std")))


@dataclass
class RunResult:
    video: VideoLatent
    reference: ImageLatent
    manifest: RunManifest
    report: MetricReport


def execute_run(cfg: RunConfig) -> RunResult:
    """Build everything ``cfg`` describes, generate, and score against the reference.

    Errors propagate; if generation itself failed the exception carries the
    partially filled manifest (see :func:`generate_video`).
    """
    built = build_run(cfg)
    video, manifest = generate_video(
        built.reference, None, cfg.L, built.omega, built.tau, built.denoiser, built.plan,
        built.sampler, cfg.seed, built.schedule, prior_id=built.prior.id)
    manifest.extra.update({f"config.{k}": v for k, v in cfg.flat_items()})
    return RunResult(video, built.reference, manifest, metric_report(video, built.reference))


@dataclass(frozen=True)
class SweepRow:
    row_index: int
    value: float
    seed: int
    status: str
    error: str
    metrics: tuple[float, ...]
    output_sha256: str

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def metric(self, name: str) -> float:
        return self.metrics[METRICS.index(name)]


def _run_row(args) -> SweepRow:
    index, spec, value, seed = args
    try:
        result = execute_run(spec.row_config(value, seed))
    except Exception as exc:  # recorded per row, never aborts the sweep
        msg = f"{error_category(exc)}: {exc}".replace("\n", " ")
        return SweepRow(index, value, seed, "error", msg, (math.nan,) * len(METRICS), "")
    rep = result.report
    metrics = (rep.fidelity_cosine_mean, rep.fidelity_mse_mean,
               rep.temporal_coherence, rep.motion_intensity)
    return SweepRow(index, value, seed, "ok", "", metrics, result.manifest.output_sha256)


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow]

    @property
    def failed(self) -> list[SweepRow]:
        return [r for r in self.rows if not r.ok]

    def values(self) -> list[float]:
        return list(self.spec.values)

    def metric_means(self, name: str) -> np.ndarray:
        """Mean of ``name`` over successful seeds, one entry per sweep value."""
        return np.array([self._stats(v, name)[0] for v in self.spec.values])

    def _stats(self, value: float, name: str) -> tuple[float, float]:
        xs = np.array([r.metric(name) for r in self.rows if r.ok and r.value == value])
        xs = xs[np.isfinite(xs)]
        if xs.size == 0:
            return math.nan, math.nan
        std = float(np.std(xs, ddof=1)) if xs.size > 1 else 0.0
        return float(np.mean(xs)), std

    # -- CSV -------------------------------------------------------------

    def runs_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RUNS_COLUMNS)
        for r in self.rows:
            w.writerow([r.row_index, self.spec.axis, repr(r.value), r.seed, r.status, r.error,
                        *(fmt(m) for m in r.metrics), r.output_sha256])
        return buf.getvalue()

    def long_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LONG_COLUMNS)
        for r in self.rows:
            for name, m in zip(METRICS, r.metrics):
                w.writerow([r.row_index, self.spec.axis, repr(r.value), r.seed, r.status,
                            name, fmt(m)])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for v in self.spec.values:
            rows = [r for r in self.rows if r.value == v]
            n_ok = sum(r.ok for r in rows)
            cells = []
            for name in METRICS:
                mean, std = self._stats(v, name)
                cells += [fmt(mean), fmt(std)]
            w.writerow([self.spec.axis, repr(v), n_ok, len(rows) - n_ok, *cells])
        return buf.getvalue()

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        return [atomic_write_text(out / "sweep_runs.csv", self.runs_csv()),
                atomic_write_text(out / "sweep_long.csv", self.long_csv()),
                atomic_write_text(out / "sweep_summary.csv", self.summary_csv())]


def run_sweep(spec: SweepSpec, workers: int | None = None) -> SweepResult:
    """Run values x seeds (value-major order). Row order never depends on workers."""
    jobs = [(i, spec, float(v), int(s))
            for i, (v, s) in enumerate((v, s) for v in spec.values for s in spec.seeds)]
    workers = spec.workers if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_row, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        rows = [_run_row(job) for job in jobs]
    bad = sum(not r.ok for r in rows)
    if bad:
        log.warning("%d of %d sweep rows failed", bad, len(rows))
    return SweepResult(spec, rows)
