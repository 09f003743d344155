"""
Checking the analytic denoisers by brute force
==============================================

For a Gaussian-mixture prior the optimal noise prediction E[eps | z_t] has a
closed form. Monte Carlo gives an independent estimate: draw clean videos from
the prior, weight each by how likely it makes z_t, and average the noise each
one implies.
"""

import numpy as np

from rectified_i2v import (PriorComponent, SeededRng, VideoLatent, VideoPrior,
                           gmm_optimal_denoiser, make_linear_schedule, mc_oracle_eps)
from rectified_i2v.denoisers import NO_CONDITION

schedule = make_linear_schedule()
rng = np.random.default_rng(4)
prior = VideoPrior(tuple(PriorComponent(w, 2.0 * rng.normal(size=(2, 3)), 0.3)
                         for w in (0.5, 0.3, 0.2)), dims=(1, 1, 3))
denoiser = gmm_optimal_denoiser(prior, schedule)

for t in (100, 400, 900):
    ab = schedule.alpha_bar_at(t)
    z0 = prior.sample(SeededRng(t))
    z_t = VideoLatent(np.sqrt(ab) * z0 + np.sqrt(1 - ab) * rng.normal(size=z0.shape), prior.dims)
    exact = denoiser(z_t, NO_CONDITION, t).data
    for samples in (10_000, 100_000):
        est = mc_oracle_eps(z_t, t, prior, samples, SeededRng(t, 5), schedule)
        z = np.abs(est.mean.data - exact) / est.stderr
        print(f"t={t:4d} samples={samples:6d}  ESS={est.ess:8.0f}  "
              f"mean SE={est.stderr.mean():.4f}  max |diff|/SE={z.max():.2f}")
