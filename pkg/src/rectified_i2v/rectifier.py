"""Noise-gap rectification of predicted noise.

The sampler stores the Gaussian noise ``n`` used to noise the repeated
reference image. At every denoising step the gap ``n - n_pred`` is formed and,
inside the rectification window, each frame's predicted noise is shifted by a
per-frame blend of the first frame's gap and its own gap::

    out[i] = n_pred[i] + w[i] * gap[0] + (1 - w[i]) * gap[i]

``w[i] = 0`` pulls frame ``i`` all the way back to its own initial noise;
``w[i] = 1`` keeps the frame's predicted noise and only applies the first
frame's correction. Frame 0 always recovers ``n[0]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .schedule import VideoLatent, check_same_shape

DEFAULT_TAU = (0.0, 0.6)
DEFAULT_OMEGA_MIN = 0.5


def check_tau(tau) -> tuple[float, float]:
    try:
        s, e = (float(v) for v in tau)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"tau must be a pair of numbers, got {tau!r}") from exc
    if not (math.isfinite(s) and math.isfinite(e)) or not 0.0 <= s <= e <= 1.0:
        raise ConfigError(f"tau must satisfy 0 <= start <= end <= 1, got ({s}, {e})")
    return s, e


def check_omega(omega, L: int | None = None) -> np.ndarray:
    w = np.array(omega, dtype=np.float64, copy=True).reshape(-1)
    if L is not None and w.size != L:
        raise ShapeError(f"omega has {w.size} entries for L={L} frames")
    if not np.all(np.isfinite(w)) or np.any(w < 0) or np.any(w > 1):
        raise ConfigError(f"omega values must lie in [0, 1], got {w.tolist()}")
    w.setflags(write=False)
    return w


def omega_ramp(L: int, omega_min: float = DEFAULT_OMEGA_MIN) -> np.ndarray:
    """Linear weights from 1 at frame 0 down to ``omega_min`` at frame ``L-1``."""
    if not 0.0 <= omega_min <= 1.0:
        raise ConfigError(f"omega_min must be in [0, 1], got {omega_min}")
    if L < 1:
        raise ConfigError(f"L must be >= 1, got {L}")
    if L == 1:
        return check_omega([1.0])
    i = np.arange(L, dtype=np.float64)
    return check_omega(1.0 - (i / (L - 1)) * (1.0 - omega_min))


@dataclass(frozen=True)
class RectifierConfig:
    omega: np.ndarray
    tau: tuple[float, float]
    initial_noise: VideoLatent

    def __post_init__(self):
        object.__setattr__(self, "omega", check_omega(self.omega, self.initial_noise.L))
        object.__setattr__(self, "tau", check_tau(self.tau))


@dataclass(frozen=True)
class NoiseGap:
    delta: VideoLatent


def noise_gap(n: VideoLatent, n_pred: VideoLatent) -> NoiseGap:
    check_same_shape(n, n_pred)
    return NoiseGap(n.like(n.data - n_pred.data))


def rectify(n_pred: VideoLatent, n: VideoLatent, omega, gap: NoiseGap | None = None) -> VideoLatent:
    """Blend first-frame and per-frame noise gaps into the predicted noise."""
    check_same_shape(n_pred, n)
    w = check_omega(omega, n_pred.L)[:, None]
    if gap is None:
        gap = noise_gap(n, n_pred)
    delta = gap.delta.data
    return n_pred.like(n_pred.data + w * delta[0:1] + (1.0 - w) * delta)


def in_window(step_index: int, K: int, tau) -> bool:
    """Whether inference step ``step_index`` (0 = first step, at ``t=T``) is rectified.

    The window is the half-open fraction range ``[start, end)`` of the ``K``
    steps; ``end = 1`` therefore covers the final step.
    """
    s, e = check_tau(tau)
    if not 0 <= step_index < K:
        raise ConfigError(f"step_index {step_index} outside [0, {K})")
    frac = step_index / K
    return s <= frac < e
