"""
Noising a still image and denoising it back
===========================================

Repeat one latent across L frames, push it to t=T with the closed-form
forward process, then run DDIM backwards. If the denoiser knew the exact noise
we added, the reverse pass lands exactly on the still video again; that is
the thought experiment behind noise rectification.
"""

import numpy as np

from rectified_i2v import (SamplerKind, SeededRng, add_noise, generate_video,
                           make_linear_schedule, make_step_plan, motion_intensity,
                           oracle_noise_denoiser, quadrant_blob_prior, repeat_image,
                           sample_reference)

schedule = make_linear_schedule()            # T=1000, beta from 1e-4 to 0.02
print(f"alpha_bar at t=T: {schedule.alpha_bar_at(1000):.3e}")

prior = quadrant_blob_prior(L=16)
z0 = sample_reference(prior, SeededRng(0, stream=1))
still = repeat_image(z0, 16)

# %% The noised latent at t=T is almost pure noise
n = SeededRng(0).normal(still.shape)
z_T = add_noise(still, still.like(n), 1000, schedule)
corr = np.corrcoef(z_T.data.ravel(), still.data.ravel())[0, 1]
print(f"correlation of z_T with the still video: {corr:.3f}")

# %% Denoising with the known noise reconstructs it for any step count
for K in (10, 50, 1000):
    video, manifest = generate_video(z0, None, 16, None, None, oracle_noise_denoiser,
                                     make_step_plan(schedule, K), SamplerKind(), seed=0,
                                     schedule=schedule)
    err = np.abs(video.data - still.data).max()
    print(f"K={K:4d}: max reconstruction error {err:.1e}, "
          f"motion {motion_intensity(video):.1e}")
