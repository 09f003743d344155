"""Image-to-video generation by noising and rectified denoising, with analytic denoisers."""

from .errors import ConfigError, FormatError, NumericError, RectifyError, ShapeError
from .schedule import (ImageLatent, NoiseSchedule, SeededRng, VideoLatent, add_noise,
                       make_linear_schedule, repeat_image, sample_gaussian)
from .rectifier import (DEFAULT_OMEGA_MIN, DEFAULT_TAU, NoiseGap, RectifierConfig, in_window,
                        noise_gap, omega_ramp, rectify)
from .samplers import (SamplerKind, StepPlan, Trajectory, ancestral_step, ddim_step,
                       make_step_plan, run_reverse)
from .denoisers import (BiasSpec, ConditionVector, DenoiserHandle, PriorComponent, VideoPrior,
                        biased_denoiser, gaussian_optimal_denoiser, gmm_optimal_denoiser,
                        mc_oracle_eps, oracle_noise_denoiser)
from .synthprior import (BlobScene, blob_mixture_prior, blob_prior, quadrant_blob_prior,
                         render_blob_frame, render_blob_video, sample_reference)
from .metrics import (MetricReport, fidelity, metric_report, motion_intensity,
                      temporal_coherence)
from .pipeline import RunManifest, generate_video
from .fileio import read_vlt1, write_vlt1

__version__ = "0.1.0"
