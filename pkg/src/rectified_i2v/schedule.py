"""Noise schedules, latent containers and the closed-form forward noising.

Timesteps are 1-based: ``t`` runs over ``1..T`` and ``alpha_bar(t)`` is the
cumulative product of ``alpha`` up to and including step ``t``. There is no
schedule entry for ``t = 0``; the clean latent is whatever the sampler
returns after its final step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError, ShapeError

DEFAULT_T = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02
DEFAULT_DIMS = (1, 16, 16)


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class NoiseSchedule:
    """Variance schedule over a 1-based grid of ``T`` timesteps.

    Attributes:
        beta: Per-step variance increments, shape ``(T,)``; ``beta[0]`` is step 1.
        alpha: ``1 - beta``.
        alpha_bar: Running product of ``alpha``.
    """

    beta: np.ndarray
    alpha: np.ndarray = field(init=False)
    alpha_bar: np.ndarray = field(init=False)

    def __post_init__(self):
        beta = _frozen(self.beta)
        if beta.ndim != 1 or beta.size < 1:
            raise ConfigError("beta must be a non-empty 1-D array")
        if not np.all(np.isfinite(beta)) or np.any(beta <= 0) or np.any(beta >= 1):
            raise ConfigError("every beta must lie strictly inside (0, 1)")
        alpha = 1.0 - beta
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", _frozen(alpha))
        object.__setattr__(self, "alpha_bar", _frozen(np.cumprod(alpha)))

    @property
    def T(self) -> int:
        return int(self.beta.size)

    def check_t(self, t: int) -> int:
        if isinstance(t, bool) or int(t) != t or not 1 <= t <= self.T:
            raise ConfigError(f"timestep {t!r} outside [1, {self.T}]")
        return int(t)

    def beta_at(self, t: int) -> float:
        return float(self.beta[self.check_t(t) - 1])

    def alpha_at(self, t: int) -> float:
        return float(self.alpha[self.check_t(t) - 1])

    def alpha_bar_at(self, t: int) -> float:
        return float(self.alpha_bar[self.check_t(t) - 1])


def make_linear_schedule(T: int = DEFAULT_T, beta_start: float = DEFAULT_BETA_START,
                         beta_end: float = DEFAULT_BETA_END) -> NoiseSchedule:
    """Linearly spaced betas from ``beta_start`` to ``beta_end`` over ``T`` steps."""
    if isinstance(T, bool) or int(T) != T or T < 1:
        raise ConfigError(f"T must be a positive integer, got {T!r}")
    for name, v in (("beta_start", beta_start), ("beta_end", beta_end)):
        if not math.isfinite(v):
            raise ConfigError(f"{name} must be finite, got {v!r}")
    if not 0 < beta_start <= beta_end < 1:
        raise ConfigError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})")
    if T == 1:
        beta = np.array([beta_start], dtype=np.float64)
    else:
        beta = np.linspace(beta_start, beta_end, int(T), dtype=np.float64)
    return NoiseSchedule(beta)


def _check_dims(dims, D: int) -> tuple[int, int, int]:
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise ShapeError(f"dims must be three positive integers (C, H, W), got {dims}")
    if math.prod(dims) != D:
        raise ShapeError(f"dims {dims} do not multiply to D={D}")
    return dims


@dataclass(frozen=True)
class ImageLatent:
    """A single latent image stored flat, with its ``(C, H, W)`` layout."""

    data: np.ndarray
    dims: tuple[int, int, int]

    def __post_init__(self):
        data = _frozen(self.data).reshape(-1)
        if data.size < 1:
            raise ShapeError("empty latent")
        object.__setattr__(self, "dims", _check_dims(self.dims, data.size))
        if not np.all(np.isfinite(data)):
            raise NumericError("latent contains non-finite values")
        object.__setattr__(self, "data", data)

    @classmethod
    def flat(cls, values) -> "ImageLatent":
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        return cls(values, (1, 1, values.size))

    @property
    def D(self) -> int:
        return int(self.data.size)

    def grid(self) -> np.ndarray:
        return self.data.reshape(self.dims)


@dataclass(frozen=True)
class VideoLatent:
    """``L`` equally shaped latent frames, stored as an ``(L, D)`` array."""

    data: np.ndarray
    dims: tuple[int, int, int]

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ShapeError(f"video data must have shape (L, D), got {data.shape}")
        object.__setattr__(self, "dims", _check_dims(self.dims, data.shape[1]))
        if not np.all(np.isfinite(data)):
            raise NumericError("video latent contains non-finite values")
        object.__setattr__(self, "data", data)

    @classmethod
    def flat(cls, values) -> "VideoLatent":
        """Build from an ``(L, D)`` array-like with dims ``(1, 1, D)``."""
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        return cls(values, (1, 1, values.shape[1]))

    @classmethod
    def zeros(cls, L: int, dims=DEFAULT_DIMS) -> "VideoLatent":
        return cls(np.zeros((L, math.prod(dims))), dims)

    @property
    def L(self) -> int:
        return int(self.data.shape[0])

    @property
    def D(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.L, self.D)

    def frame(self, i: int) -> ImageLatent:
        return ImageLatent(self.data[i], self.dims)

    def like(self, data) -> "VideoLatent":
        """New latent with this one's dims and the given ``(L, D)`` data."""
        return VideoLatent(data, self.dims)

    def grids(self) -> np.ndarray:
        return self.data.reshape((self.L, *self.dims))


def check_same_shape(*latents: VideoLatent) -> None:
    first = latents[0]
    for other in latents[1:]:
        if other.shape != first.shape:
            raise ShapeError(f"shape mismatch: {first.shape} vs {other.shape}")


class SeededRng:
    """Counter-based Gaussian stream (Philox) keyed by ``(seed, stream)``.

    ``position`` counts the variates (normal or uniform) drawn so far. Two
    handles with the same seed and stream produce identical values when
    consumed in the same order.
    """

    def __init__(self, seed: int, stream: int = 0):
        if isinstance(seed, bool) or int(seed) != seed or not 0 <= seed < 2**64:
            raise ConfigError(f"seed must be an integer in [0, 2**64), got {seed!r}")
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.Philox(ss))
        self.position = 0

    def child(self, stream: int) -> "SeededRng":
        """Independent handle for a named sub-stream of the same seed."""
        return SeededRng(self.seed, stream)

    def normal(self, shape) -> np.ndarray:
        out = self._gen.standard_normal(shape)
        self.position += int(out.size)
        return out

    def uniform(self, shape) -> np.ndarray:
        out = self._gen.random(shape)
        self.position += int(np.size(out))
        return out

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, stream={self.stream}, position={self.position})"


def sample_gaussian(L: int, D: int, rng: SeededRng, dims=None) -> VideoLatent:
    """Draw an ``L``-frame latent of i.i.d. standard normals."""
    if L < 1 or D < 1:
        raise ShapeError(f"need L >= 1 and D >= 1, got L={L}, D={D}")
    dims = (1, 1, D) if dims is None else dims
    return VideoLatent(rng.normal((L, D)), dims)


def repeat_image(z0: ImageLatent, L: int) -> VideoLatent:
    if L < 1:
        raise ShapeError(f"L must be >= 1, got {L}")
    return VideoLatent(np.broadcast_to(z0.data, (L, z0.D)), z0.dims)


def add_noise(z: VideoLatent, n: VideoLatent, t: int, schedule: NoiseSchedule) -> VideoLatent:
    """Closed-form forward noising ``sqrt(ab_t) z + sqrt(1 - ab_t) n``."""
    check_same_shape(z, n)
    ab = schedule.alpha_bar_at(t)
    return z.like(math.sqrt(ab) * z.data + math.sqrt(1.0 - ab) * n.data)
