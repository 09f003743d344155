"""Command-line front end: ``generate``, ``sweep``, ``eval``, ``export-frames``.

Failures print exactly one line ``error: <category>: <message>`` to stderr,
where category is one of ``config | shape | numeric | io``, and exit with a
category-specific nonzero code.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import OUTPUT_ROOT_ENV, RunConfig, SweepSpec
from .errors import ShapeError, error_category
from .fileio import atomic_write_text, read_vlt1, write_pgm_frames, write_vlt1
from .metrics import metric_report, report_csv
from .schedule import VideoLatent
from .sweep import (LONG_COLUMNS, RUNS_COLUMNS, SUMMARY_COLUMNS, execute_run, run_sweep)

EXIT_CODES = {"config": 2, "shape": 3, "numeric": 4, "io": 5}
SWEEP_FAILED = 6

EPILOG = f"""\
CSV schemas (comma separated, header row first, fixed column order):
  metrics.csv / eval output   one '#' comment line, then
      run_id,L,D,fidelity_cosine_mean,fidelity_mse_mean,temporal_coherence,
      motion_intensity,fidelity_cosine_per_frame,fidelity_mse_per_frame
      (per-frame columns are ';'-joined; undefined values are NA)
  sweep_runs.csv              {",".join(RUNS_COLUMNS)}
  sweep_long.csv              {",".join(LONG_COLUMNS)}
  sweep_summary.csv           {",".join(SUMMARY_COLUMNS)}
      (std is the sample standard deviation over successful seeds)

Errors: one line 'error: <category>: <message>' on stderr; exit codes
config=2 shape=3 numeric=4 io=5, sweep with failed rows=6.
Output root when a config has no output_dir: ${OUTPUT_ROOT_ENV} (default ./outputs).
"""


def cmd_generate(args) -> int:
    cfg = RunConfig.from_file(args.config)
    out = Path(args.output_dir) if args.output_dir else cfg.output_path(f"run-seed{cfg.seed}")
    result = execute_run(cfg)
    video = result.video
    write_vlt1(out / "video.vlt1", video)
    write_vlt1(out / "reference.vlt1", VideoLatent(result.reference.data[None, :], video.dims))
    atomic_write_text(out / "manifest.txt", result.manifest.to_text())
    atomic_write_text(out / "metrics.csv", report_csv(result.report, f"seed{cfg.seed}", video.D))
    write_pgm_frames(video, out / "frames", args.scale)
    print(f"wrote {out} (manifest sha256 {result.manifest.sha256()[:12]})")
    return 0


def cmd_sweep(args) -> int:
    spec = SweepSpec.from_file(args.sweep)
    out = Path(args.output_dir) if args.output_dir else spec.base.output_path(
        f"sweep-{spec.axis}")
    result = run_sweep(spec, workers=args.workers)
    result.write(out)
    sys.stdout.write(result.summary_csv())
    failed = result.failed
    if failed:
        first = failed[0]
        print(f"error: {first.error.split(':')[0]}: {len(failed)} of {len(result.rows)} rows "
              f"failed (first: row {first.row_index}: {first.error})", file=sys.stderr)
        return SWEEP_FAILED
    return 0


def cmd_eval(args) -> int:
    video = read_vlt1(args.video)
    ref_video = read_vlt1(args.reference)
    if ref_video.D != video.D:
        raise ShapeError(f"video D={video.D} but reference D={ref_video.D}")
    report = metric_report(video, ref_video.frame(0))
    text = report_csv(report, Path(args.video).stem, video.D)
    sys.stdout.write(text)
    out = Path(args.output) if args.output else Path(args.video).with_suffix(".metrics.csv")
    atomic_write_text(out, text)
    return 0


def cmd_export_frames(args) -> int:
    video = read_vlt1(args.video)
    paths = write_pgm_frames(video, args.out_dir, args.scale)
    print(f"wrote {len(paths)} frames to {args.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rectified-i2v", description="Tuning-free image-to-video by noise rectification.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text, description=help_text, epilog=EPILOG,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.set_defaults(func=func)
        return sp

    g = add("generate", cmd_generate, "animate one reference latent from a run config")
    g.add_argument("config")
    g.add_argument("--output-dir", help="overrides [run] output_dir")
    g.add_argument("--scale", type=int, default=1, help="PGM upscale factor")

    s = add("sweep", cmd_sweep, "run a parameter sweep (values x seeds)")
    s.add_argument("sweep")
    s.add_argument("--output-dir")
    s.add_argument("--workers", type=int, default=None, help="overrides [sweep] workers")

    e = add("eval", cmd_eval, "score a video against frame 0 of a reference VLT1")
    e.add_argument("video")
    e.add_argument("reference")
    e.add_argument("--output", help="CSV path (default: <video>.metrics.csv)")

    x = add("export-frames", cmd_export_frames, "write one 8-bit PGM per frame")
    x.add_argument("video")
    x.add_argument("out_dir")
    x.add_argument("--scale", type=int, default=1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        category = error_category(exc)
        msg = str(exc).replace("\n", " ") or type(exc).__name__
        print(f"error: {category}: {msg}", file=sys.stderr)
        if args.verbose:
            raise
        return EXIT_CODES[category]


if __name__ == "__main__":
    sys.exit(main())
