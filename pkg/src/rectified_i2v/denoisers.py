"""Noise predictors with the ``predict(z_t, cond, t)`` interface.

The analytic predictors return ``E[eps | z_t]``, the exact minimizer of the
usual noise-regression loss, for per-frame factorized Gaussian and
Gaussian-mixture video priors. Under the forward process
``z_t = sqrt(ab) z0 + sqrt(1 - ab) eps`` with ``z0 ~ N(mu, s2)`` per
coordinate, ``(z_t, eps)`` are jointly Gaussian and::

    E[eps | z_t] = sqrt(1 - ab) (z_t - sqrt(ab) mu) / (ab s2 + 1 - ab)

For a mixture the per-component answers are averaged under the posterior
component responsibilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, NumericError, ShapeError
from .schedule import NoiseSchedule, SeededRng, VideoLatent

BIAS_STREAM = 2


@dataclass(frozen=True)
class ConditionVector:
    """Opaque condition.

    For mixture priors ``class_index`` restricts the prediction to one
    component, and a ``values`` vector with one entry per component replaces
    the mixture weights. Every other denoiser ignores the condition.
    """

    values: np.ndarray | None = None
    class_index: int | None = None

    def __post_init__(self):
        if self.values is not None:
            v = np.array(self.values, dtype=np.float64).reshape(-1)
            if not np.all(np.isfinite(v)):
                raise ConfigError("condition values must be finite")
            v.setflags(write=False)
            object.__setattr__(self, "values", v)


NO_CONDITION = ConditionVector()


@dataclass(frozen=True)
class DenoiserHandle:
    predict: Callable[[VideoLatent, ConditionVector, int], VideoLatent]
    id: str

    def __call__(self, z_t, cond, t):
        return self.predict(z_t, cond, t)


@dataclass(frozen=True)
class PriorComponent:
    weight: float
    means: np.ndarray  # (L, D)
    var: float


@dataclass(frozen=True)
class VideoPrior:
    """Mixture of per-frame factorized isotropic Gaussians over ``(L, D)`` videos.

    Frames are independent given the component; component ``k`` has frame
    means ``means[k][i]`` and variance ``var[k]`` on every coordinate.
    """

    components: tuple[PriorComponent, ...]
    dims: tuple[int, int, int]
    id: str = "prior"
    drift: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ConfigError("prior needs at least one component")
        D = math.prod(self.dims)
        fixed = []
        shape = None
        for c in comps:
            means = np.array(c.means, dtype=np.float64, copy=True)
            if means.ndim == 1:
                means = means[None, :]
            if means.ndim != 2 or means.shape[1] != D:
                raise ShapeError(f"component means shape {means.shape} incompatible with D={D}")
            if shape is not None and means.shape != shape:
                raise ShapeError("all components must have the same number of frames")
            shape = means.shape
            if not (c.weight > 0 and math.isfinite(c.weight)):
                raise ConfigError(f"component weight must be positive, got {c.weight}")
            if not (c.var > 0 and math.isfinite(c.var)):
                raise ConfigError(f"component variance must be positive, got {c.var}")
            if not np.all(np.isfinite(means)):
                raise NumericError("component means must be finite")
            means.setflags(write=False)
            fixed.append(PriorComponent(float(c.weight), means, float(c.var)))
        total = sum(c.weight for c in fixed)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"component weights must sum to 1, got {total}")
        object.__setattr__(self, "components", tuple(fixed))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @classmethod
    def drifting(cls, bases, velocity, L: int, variances, weights=None, dims=None,
                 id: str = "prior") -> "VideoPrior":
        """Components whose frame means move linearly: ``mu[i] = base + i * velocity``."""
        bases = np.atleast_2d(np.asarray(bases, dtype=np.float64))
        velocity = np.asarray(velocity, dtype=np.float64).reshape(-1)
        variances = np.broadcast_to(np.asarray(variances, dtype=np.float64), (bases.shape[0],))
        if weights is None:
            weights = np.full(bases.shape[0], 1.0 / bases.shape[0])
        dims = (1, 1, bases.shape[1]) if dims is None else dims
        i = np.arange(L, dtype=np.float64)[:, None]
        comps = tuple(PriorComponent(float(w), b[None, :] + i * velocity[None, :], float(v))
                      for w, b, v in zip(weights, bases, variances))
        return cls(comps, dims, id=id, drift=velocity)

    @property
    def L(self) -> int:
        return int(self.components[0].means.shape[0])

    @property
    def D(self) -> int:
        return int(self.components[0].means.shape[1])

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @property
    def means(self) -> np.ndarray:
        """Stacked component means, shape ``(n_components, L, D)``."""
        return np.stack([c.means for c in self.components])

    @property
    def variances(self) -> np.ndarray:
        return np.array([c.var for c in self.components])

    def mean_video(self) -> VideoLatent:
        return VideoLatent(np.tensordot(self.weights, self.means, axes=1), self.dims)

    def sample(self, rng: SeededRng, n: int | None = None) -> np.ndarray:
        """Draw videos; shape ``(L, D)`` if ``n`` is None else ``(n, L, D)``."""
        count = 1 if n is None else int(n)
        k = self.draw_components(rng, count)
        eps = rng.normal((count, self.L, self.D))
        out = self.means[k] + np.sqrt(self.variances[k])[:, None, None] * eps
        return out[0] if n is None else out

    def draw_components(self, rng: SeededRng, count: int) -> np.ndarray:
        if len(self.components) == 1:
            return np.zeros(count, dtype=np.intp)
        cdf = np.cumsum(self.weights)
        idx = np.searchsorted(cdf, rng.uniform(count), side="right")
        return np.minimum(idx, len(self.components) - 1)


def _check_video(prior: VideoPrior, z_t: VideoLatent) -> None:
    if z_t.shape != (prior.L, prior.D):
        raise ShapeError(f"latent shape {z_t.shape} does not match prior shape {(prior.L, prior.D)}")


def gaussian_eps(z: np.ndarray, mu: np.ndarray, var, alpha_bar: float) -> np.ndarray:
    """``E[eps | z_t]`` for a Gaussian ``z0 ~ N(mu, var)``, elementwise."""
    return math.sqrt(1.0 - alpha_bar) * (z - math.sqrt(alpha_bar) * mu) / (alpha_bar * var + 1.0 - alpha_bar)


def oracle_noise_denoiser(n: VideoLatent) -> DenoiserHandle:
    """Returns the stored noise ``n`` whatever the input."""

    def predict(z_t, cond, t):
        if z_t.shape != n.shape:
            raise ShapeError(f"oracle noise has shape {n.shape}, latent has {z_t.shape}")
        return n

    return DenoiserHandle(predict, "oracle")


def gaussian_optimal_denoiser(prior: VideoPrior, schedule: NoiseSchedule) -> DenoiserHandle:
    if len(prior.components) != 1:
        raise ConfigError("gaussian_optimal_denoiser needs a single-component prior")
    comp = prior.components[0]

    def predict(z_t, cond, t):
        _check_video(prior, z_t)
        ab = schedule.alpha_bar_at(t)
        return z_t.like(gaussian_eps(z_t.data, comp.means, comp.var, ab))

    return DenoiserHandle(predict, f"gaussian-optimal[{prior.id}]")


def _condition_log_weights(prior: VideoPrior, cond: ConditionVector | None) -> np.ndarray:
    n = len(prior.components)
    with np.errstate(divide="ignore"):
        logw = np.log(prior.weights)
    if cond is None:
        return logw
    if cond.class_index is not None:
        if not 0 <= cond.class_index < n:
            raise ConfigError(f"class_index {cond.class_index} outside [0, {n})")
        logw = np.full(n, -np.inf)
        logw[cond.class_index] = 0.0
    elif cond.values is not None and cond.values.size == n:
        w = cond.values
        if np.any(w < 0) or w.sum() <= 0:
            raise ConfigError("condition weights must be non-negative with positive sum")
        with np.errstate(divide="ignore"):
            logw = np.log(w / w.sum())
    return logw


def gmm_responsibilities(prior: VideoPrior, z_t: VideoLatent, t: int, schedule: NoiseSchedule,
                         cond: ConditionVector | None = None) -> np.ndarray:
    """Posterior component probabilities given the whole noisy video."""
    _check_video(prior, z_t)
    ab = schedule.alpha_bar_at(t)
    logw = _condition_log_weights(prior, cond)
    loglik = np.empty(len(prior.components))
    for k, c in enumerate(prior.components):
        v = ab * c.var + 1.0 - ab
        r = z_t.data - math.sqrt(ab) * c.means
        loglik[k] = -0.5 * (np.sum(r * r) / v + r.size * math.log(2.0 * math.pi * v))
    logpost = logw + loglik
    norm = logsumexp(logpost)
    if not np.isfinite(norm):
        raise NumericError(f"all mixture responsibilities underflowed at t={t} "
                           f"(|z_t| max {np.max(np.abs(z_t.data)):.3g})")
    return np.exp(logpost - norm)


def gmm_optimal_denoiser(prior: VideoPrior, schedule: NoiseSchedule) -> DenoiserHandle:

    def predict(z_t, cond, t):
        resp = gmm_responsibilities(prior, z_t, t, schedule, cond)
        ab = schedule.alpha_bar_at(t)
        out = np.zeros_like(z_t.data)
        for r, c in zip(resp, prior.components):
            if r > 0:
                out += r * gaussian_eps(z_t.data, c.means, c.var, ab)
        return z_t.like(out)

    return DenoiserHandle(predict, f"gmm-optimal[{prior.id}]")


@dataclass(frozen=True)
class BiasSpec:
    """Additive error injected into a denoiser's prediction.

    Either an explicit ``vector`` (broadcast against ``(L, D)``) or a random
    unit direction drawn from ``seed`` and scaled so that every frame's bias
    has L2 norm ``norm``. The direction is shared by all frames unless
    ``per_frame`` is set. ``scale`` optionally multiplies the bias by a
    function of the timestep.
    """

    norm: float = 0.0
    seed: int = 0
    per_frame: bool = False
    vector: np.ndarray | None = None
    scale: Callable[[int], float] | None = None

    def __post_init__(self):
        if not math.isfinite(self.norm) or self.norm < 0:
            raise ConfigError(f"bias norm must be finite and >= 0, got {self.norm}")

    def direction(self, shape) -> np.ndarray:
        L, D = shape
        if self.vector is not None:
            return np.broadcast_to(np.asarray(self.vector, dtype=np.float64), shape)
        if self.norm == 0:
            return np.zeros(shape)
        rng = SeededRng(self.seed, BIAS_STREAM)
        g = rng.normal((L, D)) if self.per_frame else np.broadcast_to(rng.normal((1, D)), (L, D))
        return self.norm * g / np.linalg.norm(g, axis=1, keepdims=True)


def biased_denoiser(inner: DenoiserHandle, bias: BiasSpec) -> DenoiserHandle:
    cache: dict[tuple[int, int], np.ndarray] = {}

    def predict(z_t, cond, t):
        eps = inner.predict(z_t, cond, t)
        if z_t.shape not in cache:
            vec = np.array(bias.direction(z_t.shape), dtype=np.float64)
            vec.setflags(write=False)
            cache[z_t.shape] = vec
        vec = cache[z_t.shape]
        factor = 1.0 if bias.scale is None else float(bias.scale(t))
        return eps.like(eps.data + factor * vec)

    if bias.vector is not None:
        label = "vector"
    else:
        label = f"{bias.norm:g}{'/frame' if bias.per_frame else ''},seed={bias.seed}"
    return DenoiserHandle(predict, f"biased[{label}]({inner.id})")


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: VideoLatent
    stderr: np.ndarray
    ess: float


def mc_oracle_eps(z_t: VideoLatent, t: int, prior: VideoPrior, samples: int, rng: SeededRng,
                  schedule: NoiseSchedule, cond: ConditionVector | None = None) -> MonteCarloEstimate:
    """Brute-force ``E[eps | z_t]`` by self-normalized importance weighting of prior draws.

    Each draw ``z0_j`` gets weight ``N(z_t; sqrt(ab) z0_j, 1 - ab)`` and implies
    the noise ``(z_t - sqrt(ab) z0_j) / sqrt(1 - ab)``. Holds all draws in
    memory, so keep ``samples * L * D`` modest.
    """
    if samples < 1000:
        raise ConfigError(f"need at least 1000 samples, got {samples}")
    _check_video(prior, z_t)
    ab = schedule.alpha_bar_at(t)
    if cond is not None and (cond.class_index is not None or cond.values is not None):
        logw = _condition_log_weights(prior, cond)
        weights = np.exp(logw - logsumexp(logw))
        prior = VideoPrior(tuple(PriorComponent(w, c.means, c.var)
                                 for w, c in zip(weights, prior.components) if w > 0),
                           prior.dims, prior.id)
    z0 = prior.sample(rng, samples)
    resid = z_t.data[None] - math.sqrt(ab) * z0
    logw = -0.5 * np.sum(resid * resid, axis=(1, 2)) / (1.0 - ab)
    w = np.exp(logw - logsumexp(logw))
    ess = 1.0 / np.sum(w * w)
    if ess < 10:
        raise NumericError(f"importance weights degenerate (ESS={ess:.1f}) at t={t}")
    eps = resid / math.sqrt(1.0 - ab)
    est = np.tensordot(w, eps, axes=1)
    var = np.tensordot(w * w, (eps - est[None]) ** 2, axes=1)
    return MonteCarloEstimate(z_t.like(est), np.sqrt(var), float(ess))
