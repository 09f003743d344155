"""
Trading fidelity for motion with per-frame weights
==================================================

Inside the window each frame's noise is pulled toward the initial noise. With
weight 0 a frame gets its own initial noise back, so the trajectory returns
to the noised reference image and the frame becomes a still copy. With
weight 1 it only receives frame 0's correction and keeps its own dynamics.
The default ramp goes from 1 at frame 0 down to omega_min at the last frame.
"""

import numpy as np

from rectified_i2v.config import OmegaSpec, RunConfig, SweepSpec
from rectified_i2v.sweep import execute_run, run_sweep

base = RunConfig(L=16, K=50, bias_norm=0.1, tau=(0.0, 0.6))
res = run_sweep(SweepSpec(base, "omega_min", (0.0, 0.25, 0.5, 1.0), tuple(range(20))))
print("omega_min  fidelity  motion")
for v, f, m in zip(res.values(), res.metric_means("fidelity_cosine_mean"),
                   res.metric_means("motion_intensity")):
    print(f"{v:9.2f}  {f:8.3f}  {m:.4f}")

# %% The extreme: every weight zero over the whole trajectory
still = execute_run(RunConfig(bias_norm=0.5, omega=OmegaSpec(None, (0.0,)), tau=(0.0, 1.0)))
print("omega=0, tau=(0,1): fidelity "
      f"{still.report.fidelity_cosine_mean:.6f}, motion {still.report.motion_intensity:.1e}")
print("per-frame fidelity:", np.round(still.report.per_frame_fidelity_cosine, 6))
