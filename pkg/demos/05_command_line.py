"""
The command-line workflow
=========================

Write a config, generate a video with its manifest, metrics and PGM frames,
score it again with ``eval``, and run a small sweep. Everything goes to a
temporary directory (or $RECTI2V_OUTPUT_ROOT if set).
"""

import os
import tempfile
from pathlib import Path

from rectified_i2v.cli import main

root = Path(os.environ.get("RECTI2V_OUTPUT_ROOT") or tempfile.mkdtemp(prefix="recti2v-"))
root.mkdir(parents=True, exist_ok=True)

config = root / "run.ini"
config.write_text("""\
[run]
seed = 7
frames = 16
output_dir = run

[denoiser]
bias_norm = 0.1

[rectifier]
omega = ramp(0.5)
tau = 0, 0.6
""")

main(["generate", str(config), "--scale", "4"])
print(sorted(p.name for p in (root / "run").iterdir()))
print((root / "run" / "manifest.txt").read_text().splitlines()[-1])

# %% Re-score the stored video against its reference frame
main(["eval", str(root / "run" / "video.vlt1"), str(root / "run" / "reference.vlt1"),
      "--output", str(root / "eval.csv")])

# %% A four-value sweep over the window end, five seeds each
(root / "sweep.ini").write_text(config.read_text()
                                + "\n[sweep]\naxis = tau_end\nvalues = 0, 0.2, 0.6, 1\nseeds = 0-4\n")
status = main(["sweep", str(root / "sweep.ini"), "--output-dir", str(root / "sweep")])
print("sweep exit status", status, "->", root / "sweep")
