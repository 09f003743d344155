"""Reverse-process steps and the trajectory driver.

Two step rules are provided: DDIM (deterministic at ``eta=0``) and ancestral
sampling with the fixed variance ``beta_t``. ``run_reverse`` walks a
:class:`StepPlan`, querying the denoiser once per step and, when a
:class:`~rectified_i2v.rectifier.RectifierConfig` is attached, replacing the
predicted noise inside the rectification window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError
from .fileio import atomic_write_text, write_vlt1
from .rectifier import RectifierConfig, in_window, noise_gap, rectify
from .schedule import NoiseSchedule, SeededRng, VideoLatent, check_same_shape


@dataclass(frozen=True)
class StepPlan:
    """Strictly decreasing training-grid timesteps visited by the sampler."""

    steps: tuple[int, ...]

    def __post_init__(self):
        steps = tuple(int(t) for t in self.steps)
        if not steps:
            raise ConfigError("step plan is empty")
        if any(a <= b for a, b in zip(steps, steps[1:])):
            raise ConfigError(f"step plan must be strictly decreasing: {steps}")
        if steps[-1] < 1:
            raise ConfigError("step plan timesteps must be >= 1")
        object.__setattr__(self, "steps", steps)

    @property
    def K(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __len__(self):
        return len(self.steps)

    def prev(self, i: int) -> int | None:
        """Timestep after step ``i``, or ``None`` at the final step."""
        return self.steps[i + 1] if i + 1 < len(self.steps) else None

    def is_full_grid(self) -> bool:
        return self.steps[-1] == 1 and all(a - b == 1 for a, b in zip(self.steps, self.steps[1:]))


def make_step_plan(schedule: NoiseSchedule, K: int, t_start: int | None = None) -> StepPlan:
    """``K`` timesteps with integer stride ``t_start // K``, starting at ``t_start``.

    ``t_start`` defaults to ``T``; a smaller value gives a partial-noising
    (SDEdit-style) plan.
    """
    t_start = schedule.T if t_start is None else schedule.check_t(t_start)
    if isinstance(K, bool) or int(K) != K or not 1 <= K <= t_start:
        raise ConfigError(f"K must be in [1, {t_start}], got {K!r}")
    stride = t_start // int(K)
    return StepPlan(tuple(t_start - i * stride for i in range(int(K))))


@dataclass(frozen=True)
class SamplerKind:
    kind: str = "ddim"
    eta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ddim", "ancestral"):
            raise ConfigError(f"unknown sampler {self.kind!r}; expected 'ddim' or 'ancestral'")
        if not math.isfinite(self.eta) or not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"eta must be in [0, 1], got {self.eta!r}")

    @property
    def deterministic(self) -> bool:
        return self.kind == "ddim" and self.eta == 0.0

    def __str__(self):
        return f"ddim(eta={self.eta:g})" if self.kind == "ddim" else "ancestral"


def predict_clean(z_t: np.ndarray, eps: np.ndarray, alpha_bar: float) -> np.ndarray:
    return (z_t - math.sqrt(1.0 - alpha_bar) * eps) / math.sqrt(alpha_bar)


def ddim_step(z_t: VideoLatent, eps_hat: VideoLatent, t: int, t_prev: int | None,
              schedule: NoiseSchedule, eta: float = 0.0, rng: SeededRng | None = None) -> VideoLatent:
    """One DDIM update from ``t`` to ``t_prev``.

    With ``t_prev=None`` the predicted clean latent is returned. The rng is
    only consumed when ``eta > 0`` and ``t_prev`` is not ``None``.
    """
    check_same_shape(z_t, eps_hat)
    if not math.isfinite(eta) or not 0.0 <= eta <= 1.0:
        raise ConfigError(f"eta must be in [0, 1], got {eta!r}")
    ab_t = schedule.alpha_bar_at(t)
    x0 = predict_clean(z_t.data, eps_hat.data, ab_t)
    if t_prev is None:
        return z_t.like(x0)
    if t_prev >= t:
        raise ConfigError(f"t_prev={t_prev} must be smaller than t={t}")
    ab_prev = schedule.alpha_bar_at(t_prev)
    sigma = 0.0
    if eta > 0:
        sigma = eta * math.sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * math.sqrt(1.0 - ab_t / ab_prev)
    direction = math.sqrt(max(1.0 - ab_prev - sigma * sigma, 0.0))
    out = math.sqrt(ab_prev) * x0 + direction * eps_hat.data
    if sigma > 0:
        if rng is None:
            raise ConfigError("eta > 0 requires an rng")
        out = out + sigma * rng.normal(out.shape)
    return z_t.like(out)


def ancestral_step(z_t: VideoLatent, eps_hat: VideoLatent, t: int, schedule: NoiseSchedule,
                   rng: SeededRng | None = None, noise: np.ndarray | None = None) -> VideoLatent:
    """Ancestral update from ``t`` to ``t - 1`` with variance ``beta_t``.

    ``noise`` overrides the fresh Gaussian draw (used for hand-checked cases).
    No noise is added at ``t = 1``.
    """
    check_same_shape(z_t, eps_hat)
    beta = schedule.beta_at(t)
    alpha = schedule.alpha_at(t)
    ab = schedule.alpha_bar_at(t)
    mean = (z_t.data - (beta / math.sqrt(1.0 - ab)) * eps_hat.data) / math.sqrt(alpha)
    if t == 1:
        return z_t.like(mean)
    if noise is None:
        if rng is None:
            raise ConfigError("ancestral step at t > 1 requires an rng")
        noise = rng.normal(mean.shape)
    elif np.shape(noise) != mean.shape:
        raise ShapeError(f"noise shape {np.shape(noise)} != latent shape {mean.shape}")
    return z_t.like(mean + math.sqrt(beta) * noise)


@dataclass
class Trajectory:
    """Per-step record of a reverse run.

    ``latents[i]`` is the input to step ``i`` (so ``latents[0]`` is ``z_T``);
    ``predicted[i]`` and ``used[i]`` are the raw and (possibly) rectified
    noise at that step; ``rectified[i]`` flags whether the window was open.
    """

    timesteps: list[int] = field(default_factory=list)
    latents: list[VideoLatent] = field(default_factory=list)
    predicted: list[VideoLatent] = field(default_factory=list)
    used: list[VideoLatent] = field(default_factory=list)
    rectified: list[bool] = field(default_factory=list)
    final: VideoLatent | None = None

    def dump(self, out_dir) -> Path:
        """Write one VLT1 per step (plus the final latent) and ``index.csv``."""
        out_dir = Path(out_dir)
        rows = ["step_index,t,file"]
        for i, (t, z) in enumerate(zip(self.timesteps, self.latents)):
            name = f"step_{i:04d}.vlt1"
            write_vlt1(out_dir / name, z)
            rows.append(f"{i},{t},{name}")
        if self.final is not None:
            name = "final.vlt1"
            write_vlt1(out_dir / name, self.final)
            rows.append(f"{len(self.latents)},0,{name}")
        return atomic_write_text(out_dir / "index.csv", "\n".join(rows) + "\n")


def read_trajectory_index(path) -> list[tuple[int, int, str]]:
    lines = Path(path).read_text().splitlines()
    out = []
    for line in lines[1:]:
        i, t, name = line.split(",")
        out.append((int(i), int(t), name))
    return out


def run_reverse(z_T: VideoLatent, denoiser, rectifier: RectifierConfig | None, plan: StepPlan,
                sampler: SamplerKind, cond, rng: SeededRng | None, schedule: NoiseSchedule,
                record_trajectory: bool = False):
    """Run the reverse chain over ``plan``.

    At each step: predict noise, compute the gap to the stored initial noise,
    rectify if the step lies in the window, then take a sampler step. The gap
    and rectification never touch ``rng``.

    Returns:
        ``(final_latent, trajectory_or_None)``
    """
    if plan.steps[0] > schedule.T:
        raise ConfigError(f"plan starts at t={plan.steps[0]} beyond T={schedule.T}")
    if sampler.kind == "ancestral" and not plan.is_full_grid():
        raise ConfigError("ancestral sampling needs the full contiguous grid down to t=1")
    if rectifier is not None:
        check_same_shape(z_T, rectifier.initial_noise)
        if len(rectifier.omega) != z_T.L:
            raise ShapeError(f"omega has {len(rectifier.omega)} entries for L={z_T.L} frames")

    traj = Trajectory() if record_trajectory else None
    z = z_T
    K = plan.K
    for i, t in enumerate(plan.steps):
        eps_pred = denoiser.predict(z, cond, t)
        if eps_pred.shape != z.shape:
            raise ShapeError(f"denoiser {denoiser.id!r} returned {eps_pred.shape}, expected {z.shape}")
        eps = eps_pred
        active = False
        if rectifier is not None:
            gap = noise_gap(rectifier.initial_noise, eps_pred)
            if in_window(i, K, rectifier.tau):
                eps = rectify(eps_pred, rectifier.initial_noise, rectifier.omega, gap=gap)
                active = True
        if traj is not None:
            traj.timesteps.append(t)
            traj.latents.append(z)
            traj.predicted.append(eps_pred)
            traj.used.append(eps)
            traj.rectified.append(active)
        if sampler.kind == "ddim":
            z = ddim_step(z, eps, t, plan.prev(i), schedule, sampler.eta, rng)
        else:
            z = ancestral_step(z, eps, t, schedule, rng)
    if traj is not None:
        traj.final = z
    return z, traj
