"""Image-to-video generation by noising and rectified denoising.

RNG consumption order for a given seed: the initial noise ``n`` is the first
draw of stream 0, and any sampler noise follows on the same stream. Gap
computation and rectification never draw, so toggling the window cannot shift
later draws.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np

from .denoisers import NO_CONDITION, ConditionVector, DenoiserHandle
from .errors import error_category
from .fileio import sha256_hex, vlt1_bytes
from .rectifier import RectifierConfig
from .samplers import SamplerKind, StepPlan, run_reverse
from .schedule import (ImageLatent, NoiseSchedule, SeededRng, VideoLatent, add_noise,
                       repeat_image, sample_gaussian)

log = logging.getLogger(__name__)

NOISE_STREAM = 0
REFERENCE_STREAM = 1


def initial_noise(seed: int, L: int, dims) -> VideoLatent:
    """The noise ``generate_video`` will draw for this seed and shape."""
    D = int(np.prod(dims))
    return sample_gaussian(L, D, SeededRng(seed, NOISE_STREAM), dims)


@dataclass
class RunManifest:
    """Everything needed to reproduce and identify one generation."""

    seed: int = 0
    T: int = 0
    K: int = 0
    t_start: int = 0
    sampler: str = ""
    eta: float = 0.0
    L: int = 0
    D: int = 0
    dims: tuple[int, int, int] = (1, 1, 1)
    omega: tuple[float, ...] = ()
    tau: tuple[float, float] | None = None
    denoiser_id: str = ""
    prior_id: str = ""
    output_sha256: str = ""
    status: str = "ok"
    error: str = ""
    extra: dict[str, str] = field(default_factory=dict)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            if f.name == "extra":
                continue
            lines.append(f"{f.name} = {_encode(getattr(self, f.name))}")
        for key in sorted(self.extra):
            lines.append(f"extra.{key} = {self.extra[key]}")
        return "\n".join(lines) + "\n"

    def sha256(self) -> str:
        return sha256_hex(self.to_text().encode("utf-8"))

    @classmethod
    def from_text(cls, text: str) -> "RunManifest":
        raw: dict[str, str] = {}
        extra: dict[str, str] = {}
        for line in text.splitlines():
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            key, _, value = line.partition(" = ")
            if key.startswith("extra."):
                extra[key[len("extra."):]] = value
            else:
                raw[key] = value
        m = cls(extra=extra)
        for f in fields(cls):
            if f.name in raw:
                setattr(m, f.name, _decode(f.name, raw[f.name]))
        return m


def _encode(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, (tuple, list)):
        return ",".join(_encode(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


_INT_FIELDS = {"seed", "T", "K", "t_start", "L", "D"}
_FLOAT_FIELDS = {"eta"}


def _decode(name: str, text: str):
    if name in _INT_FIELDS:
        return int(text)
    if name in _FLOAT_FIELDS:
        return float(text)
    if name == "dims":
        return tuple(int(v) for v in text.split(","))
    if name == "omega":
        return tuple(float(v) for v in text.split(",")) if text else ()
    if name == "tau":
        return None if text == "none" else tuple(float(v) for v in text.split(","))
    return text


def generate_video(z0: ImageLatent, cond: ConditionVector | None, L: int, omega, tau,
                   denoiser: DenoiserHandle | Callable[[VideoLatent], DenoiserHandle],
                   plan: StepPlan, sampler: SamplerKind, seed: int, schedule: NoiseSchedule,
                   prior_id: str = "", record_trajectory: bool = False):
    """Animate ``z0`` into ``L`` frames.

    Draws ``n``, noises ``Repeat(z0)`` to the plan's first timestep, then runs
    the reverse chain with rectification inside ``tau``. ``tau=None`` runs
    without any rectifier attached. ``denoiser`` may also be a factory that
    receives the initial noise (used by the oracle denoiser).

    Returns:
        ``(video, manifest)``, or ``(video, manifest, trajectory)`` when
        ``record_trajectory`` is set. On failure the raised exception carries
        a ``manifest`` attribute with ``status = error``.
    """
    manifest = RunManifest(seed=int(seed), T=schedule.T, K=plan.K, t_start=plan.steps[0],
                           sampler=sampler.kind, eta=float(sampler.eta), L=int(L), D=z0.D,
                           dims=z0.dims, prior_id=prior_id,
                           tau=None if tau is None else tuple(float(v) for v in tau))
    try:
        rng = SeededRng(seed, NOISE_STREAM)
        n = sample_gaussian(L, z0.D, rng, z0.dims)
        handle = denoiser if isinstance(denoiser, DenoiserHandle) else denoiser(n)
        manifest.denoiser_id = handle.id
        rectifier = None
        if tau is not None:
            rectifier = RectifierConfig(omega, tau, n)
            manifest.omega = tuple(float(w) for w in rectifier.omega)
        z_start = add_noise(repeat_image(z0, L), n, plan.steps[0], schedule)
        video, traj = run_reverse(z_start, handle, rectifier, plan, sampler,
                                  NO_CONDITION if cond is None else cond, rng, schedule,
                                  record_trajectory=record_trajectory)
    except Exception as exc:
        manifest.status = "error"
        manifest.error = f"{error_category(exc)}: {exc}".replace("\n", " ")
        exc.manifest = manifest
        log.debug("generation failed: %s", manifest.error)
        raise
    manifest.output_sha256 = sha256_hex(vlt1_bytes(video))
    if record_trajectory:
        return video, manifest, traj
    return video, manifest


