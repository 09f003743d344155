import os
import subprocess
import sys

import numpy as np
import pytest

from rectified_i2v.cli import main
from rectified_i2v.fileio import read_pgm, read_vlt1, write_vlt1
from rectified_i2v.metrics import read_report_csv
from rectified_i2v.pipeline import RunManifest
from rectified_i2v.schedule import VideoLatent
from rectified_i2v.synthprior import BlobScene, render_blob_video

RUN = "[run]\nseed = 2\nframes = 6\n[prior]\ngrid = 8, 8\n[sampler]\nsteps = 10\n"


@pytest.fixture
def run_cfg(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(RUN)
    return p


def _err_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    return err[0]


def test_generate_writes_five_artifacts(tmp_path, run_cfg):
    out = tmp_path / "o"
    assert main(["generate", str(run_cfg), "--output-dir", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["frames", "manifest.txt", "metrics.csv",
                                                      "reference.vlt1", "video.vlt1"]
    assert len(list((out / "frames").iterdir())) == 6
    m = RunManifest.from_text((out / "manifest.txt").read_text())
    assert m.status == "ok" and m.L == 6 and m.extra["config.run.seed"] == "2"
    assert read_vlt1(out / "reference.vlt1").L == 1


def test_generate_is_deterministic(tmp_path, run_cfg):
    for name in ("a", "b"):
        assert main(["generate", str(run_cfg), "--output-dir", str(tmp_path / name)]) == 0
    for f in ("video.vlt1", "manifest.txt", "metrics.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_generate_uses_output_root_env(tmp_path, run_cfg, monkeypatch):
    monkeypatch.setenv("RECTI2V_OUTPUT_ROOT", str(tmp_path / "root"))
    assert main(["generate", str(run_cfg)]) == 0
    assert (tmp_path / "root" / "run-seed2" / "video.vlt1").exists()


def test_generate_bad_tau_is_config_error(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[rectifier]\ntau = 0.6, 0.2\n")
    assert main(["generate", str(p)]) == 2
    assert _err_line(capsys).startswith("error: config: ")


def test_missing_file_is_io_error(tmp_path, capsys):
    assert main(["generate", str(tmp_path / "nope.ini")]) == 5
    assert _err_line(capsys).startswith("error: io: ")


def test_eval_self_and_single_frame(tmp_path, capsys):
    v = VideoLatent(render_blob_video(BlobScene(grid=(8, 8)), 5).data, (1, 8, 8))
    write_vlt1(tmp_path / "v.vlt1", v)
    write_vlt1(tmp_path / "r.vlt1", VideoLatent(np.repeat(v.data[:1], 5, axis=0), v.dims))
    assert main(["eval", str(tmp_path / "r.vlt1"), str(tmp_path / "v.vlt1")]) == 0
    row = read_report_csv(capsys.readouterr().out)[0]
    assert float(row["fidelity_cosine_mean"]) == pytest.approx(1.0)
    assert (tmp_path / "r.metrics.csv").exists()

    write_vlt1(tmp_path / "one.vlt1", VideoLatent(v.data[:1], v.dims))
    assert main(["eval", str(tmp_path / "one.vlt1"), str(tmp_path / "v.vlt1"),
                 "--output", str(tmp_path / "one.csv")]) == 0
    row = read_report_csv((tmp_path / "one.csv").read_text())[0]
    assert row["temporal_coherence"] == "NA" and row["motion_intensity"] == "NA"


def test_eval_shape_mismatch(tmp_path, capsys):
    write_vlt1(tmp_path / "a.vlt1", VideoLatent.flat([[1.0, 2.0]]))
    write_vlt1(tmp_path / "b.vlt1", VideoLatent.flat([[1.0, 2.0, 3.0]]))
    assert main(["eval", str(tmp_path / "a.vlt1"), str(tmp_path / "b.vlt1")]) == 3
    assert _err_line(capsys).startswith("error: shape: ")


def test_export_frames(tmp_path, capsys):
    v = render_blob_video(BlobScene(), 16)
    write_vlt1(tmp_path / "v.vlt1", v)
    assert main(["export-frames", str(tmp_path / "v.vlt1"), str(tmp_path / "f"),
                 "--scale", "3"]) == 0
    names = sorted(p.name for p in (tmp_path / "f").iterdir())
    assert names == [f"frame_{i:03d}.pgm" for i in range(16)]
    img = read_pgm(tmp_path / "f" / "frame_008.pgm")
    r, c = np.unravel_index(np.argmax(img), img.shape)
    assert (r // 3, c // 3) == (8, 8)
    write_vlt1(tmp_path / "rgb.vlt1", VideoLatent(np.zeros((1, 12)), (3, 2, 2)))
    assert main(["export-frames", str(tmp_path / "rgb.vlt1"), str(tmp_path / "g")]) == 3


def test_sweep_command(tmp_path, capsys):
    p = tmp_path / "sweep.ini"
    p.write_text(RUN + "[sweep]\naxis = omega_min\nvalues = 0, 1\nseeds = 0-1\n")
    assert main(["sweep", str(p), "--output-dir", str(tmp_path / "s")]) == 0
    assert sorted(x.name for x in (tmp_path / "s").iterdir()) == [
        "sweep_long.csv", "sweep_runs.csv", "sweep_summary.csv"]
    p.write_text(RUN + "[sweep]\naxis = tau_start\nvalues = 0.1, 0.9\nseeds = 0\n")
    assert main(["sweep", str(p), "--output-dir", str(tmp_path / "t")]) == 6
    assert "error: config: 1 of 2 rows failed" in capsys.readouterr().err


def test_help_documents_csv_schemas_and_module_entry():
    env = dict(os.environ)
    out = subprocess.run([sys.executable, "-m", "rectified_i2v", "--help"], capture_output=True,
                         text=True, env=env, check=True).stdout
    for name in ("generate", "sweep", "eval", "export-frames", "sweep_summary.csv",
                 "fidelity_cosine_per_frame", "RECTI2V_OUTPUT_ROOT"):
        assert name in out
