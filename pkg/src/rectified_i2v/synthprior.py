"""Toy video content: a Gaussian bump drifting across a small grid."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .denoisers import PriorComponent, VideoPrior
from .errors import ConfigError
from .schedule import ImageLatent, SeededRng, VideoLatent


@dataclass(frozen=True)
class BlobScene:
    grid: tuple[int, int] = (16, 16)
    center: tuple[float, float] = (4.0, 4.0)
    velocity: tuple[float, float] = (0.5, 0.5)
    radius: float = 2.0
    amplitude: float = 1.0
    background: float = 0.0

    def __post_init__(self):
        h, w = (int(g) for g in self.grid)
        if h < 4 or w < 4:
            raise ConfigError(f"grid must be at least 4x4, got {self.grid}")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ConfigError(f"blob radius must be positive, got {self.radius}")
        for v in (*self.center, *self.velocity, self.amplitude, self.background):
            if not math.isfinite(v):
                raise ConfigError("blob scene parameters must be finite")
        object.__setattr__(self, "grid", (h, w))

    @property
    def dims(self) -> tuple[int, int, int]:
        return (1, *self.grid)

    def center_at(self, frame_index: int) -> tuple[float, float]:
        return (self.center[0] + frame_index * self.velocity[0],
                self.center[1] + frame_index * self.velocity[1])


def render_blob_frame(scene: BlobScene, frame_index: int) -> ImageLatent:
    """Bump ``a * exp(-d^2 / (2 r^2)) + background`` sampled at pixel centres, row-major."""
    if frame_index < 0:
        raise ConfigError(f"frame_index must be >= 0, got {frame_index}")
    h, w = scene.grid
    cy, cx = scene.center_at(frame_index)
    rows = np.arange(h, dtype=np.float64)[:, None]
    cols = np.arange(w, dtype=np.float64)[None, :]
    d2 = (rows - cy) ** 2 + (cols - cx) ** 2
    img = scene.amplitude * np.exp(-d2 / (2.0 * scene.radius**2)) + scene.background
    return ImageLatent(img.reshape(-1), scene.dims)


def render_blob_video(scene: BlobScene, L: int) -> VideoLatent:
    return VideoLatent(np.stack([render_blob_frame(scene, i).data for i in range(L)]), scene.dims)


def blob_prior(scene: BlobScene, L: int, sigma: float) -> VideoPrior:
    """Single-Gaussian prior whose frame means follow the rendered blob."""
    if not (sigma > 0 and math.isfinite(sigma)):
        raise ConfigError(f"sigma must be positive, got {sigma}")
    means = render_blob_video(scene, L).data
    vel = scene.velocity
    return VideoPrior((PriorComponent(1.0, means, sigma * sigma),), scene.dims,
                      id=f"blob[v=({vel[0]:g},{vel[1]:g}),sigma={sigma:g}]")


def blob_mixture_prior(scenes, L: int, sigma: float, weights=None) -> VideoPrior:
    """One mixture component per scene (e.g. several motion directions)."""
    scenes = list(scenes)
    if weights is None:
        weights = [1.0 / len(scenes)] * len(scenes)
    dims = scenes[0].dims
    comps = tuple(PriorComponent(float(w), render_blob_video(s, L).data, sigma * sigma)
                  for w, s in zip(weights, scenes))
    return VideoPrior(comps, dims, id=f"blob-mixture[{len(scenes)},sigma={sigma:g}]")


def sample_reference(prior: VideoPrior, rng: SeededRng) -> ImageLatent:
    """Frame 0 of a draw from ``prior``."""
    k = int(prior.draw_components(rng, 1)[0])
    comp = prior.components[k]
    frame = comp.means[0] + math.sqrt(comp.var) * rng.normal(prior.D)
    return ImageLatent(frame, prior.dims)


DEFAULT_SPEEDS = (0.0, 0.25, 0.5)
DEFAULT_SIGMA = 0.05


def quadrant_blob_prior(L: int, grid=(16, 16), speeds=DEFAULT_SPEEDS, sigma: float = DEFAULT_SIGMA,
                        radius: float = 2.0, amplitude: float = 1.0,
                        background: float = 0.0) -> VideoPrior:
    """Mixture of blobs starting in the four quadrants and drifting toward the centre.

    One equally weighted component per (start, speed) pair; a speed of 0 gives
    a static blob. Which start and speed a generated video uses is decided
    during the noisy part of the trajectory, so this prior has the coarse
    "layout first" behaviour a single Gaussian lacks.
    """
    h, w = grid
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    oy, ox = h / 4.0 - 0.5, w / 4.0 - 0.5
    scenes = []
    for sy in (-1, 1):
        for sx in (-1, 1):
            start = (cy + sy * oy, cx + sx * ox)
            heading = np.array([-sy, -sx], dtype=np.float64) / math.sqrt(2.0)
            for speed in speeds:
                vel = tuple(float(v) for v in speed * heading)
                scenes.append(BlobScene(grid=(h, w), center=start, velocity=vel, radius=radius,
                                        amplitude=amplitude, background=background))
    prior = blob_mixture_prior(scenes, L, sigma)
    speeds_txt = ",".join(f"{s:g}" for s in speeds)
    return VideoPrior(prior.components, prior.dims,
                      id=f"quadrant-blobs[speeds={speeds_txt},sigma={sigma:g},r={radius:g}]")
