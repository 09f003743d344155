"""Run and sweep configuration in a flat ``key = value`` format with sections.

Example::

    [run]
    seed = 0
    frames = 16

    [sampler]
    kind = ddim
    steps = 50

    [prior]
    kind = quadrant

    [denoiser]
    bias_norm = 0.1

    [rectifier]
    omega = ramp(0.5)
    tau = 0, 0.6

Every key is optional; see :class:`RunConfig` for defaults. ``tau = none``
detaches the rectifier entirely.
"""

from __future__ import annotations

import configparser
import math
import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .denoisers import (BiasSpec, PriorComponent, VideoPrior, biased_denoiser,
                        gaussian_optimal_denoiser, gmm_optimal_denoiser, oracle_noise_denoiser)
from .errors import ConfigError, FormatError, ShapeError
from .fileio import read_vlt1, write_vlt1, atomic_write_text
from .pipeline import REFERENCE_STREAM
from .rectifier import check_omega, check_tau, omega_ramp
from .samplers import SamplerKind, make_step_plan
from .schedule import ImageLatent, SeededRng, VideoLatent, make_linear_schedule
from .synthprior import (DEFAULT_SIGMA, DEFAULT_SPEEDS, BlobScene, blob_prior,
                         quadrant_blob_prior, sample_reference)

OUTPUT_ROOT_ENV = "RECTI2V_OUTPUT_ROOT"

SECTIONS = ("run", "schedule", "sampler", "prior", "denoiser", "rectifier", "reference")
SWEEP_AXES = ("omega_min", "tau_end", "tau_start", "bias_norm")


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(float(v) for v in re.split(r"[,\s]+", text) if v)
    except ValueError as exc:
        raise ConfigError(f"expected a list of numbers, got {text!r}") from exc


def _fmt_floats(values) -> str:
    return ", ".join(repr(float(v)) for v in values)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"0-19"``, ``"range(20)"`` or an explicit list like ``"1, 5, 9"``."""
    t = text.strip()
    m = re.fullmatch(r"range\(\s*(\d+)\s*\)", t)
    if m:
        return tuple(range(int(m.group(1))))
    m = re.fullmatch(r"(\d+)\s*-\s*(\d+)", t)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        if hi < lo:
            raise ConfigError(f"empty seed range {t!r}")
        return tuple(range(lo, hi + 1))
    try:
        return tuple(int(v) for v in re.split(r"[,\s]+", t) if v)
    except ValueError as exc:
        raise ConfigError(f"bad seed list {t!r}") from exc


@dataclass(frozen=True)
class OmegaSpec:
    """Either ``ramp(omega_min)`` or an explicit per-frame list."""

    omega_min: float | None = 0.5
    values: tuple[float, ...] = ()

    @classmethod
    def parse(cls, text: str) -> "OmegaSpec":
        t = text.strip()
        m = re.fullmatch(r"ramp\(\s*([^)]*)\)", t)
        if m:
            try:
                return cls(omega_min=float(m.group(1)))
            except ValueError as exc:
                raise ConfigError(f"bad ramp spec {t!r}") from exc
        m = re.fullmatch(r"constant\(\s*([^)]*)\)", t)
        if m:
            return cls(omega_min=None, values=(float(m.group(1)),))
        return cls(omega_min=None, values=_floats(t))

    def expand(self, L: int) -> np.ndarray:
        if self.omega_min is not None:
            return omega_ramp(L, self.omega_min)
        if len(self.values) == 1 and L != 1:
            return check_omega(np.full(L, self.values[0]), L)
        return check_omega(self.values, L)

    def __str__(self):
        if self.omega_min is not None:
            return f"ramp({self.omega_min!r})"
        return _fmt_floats(self.values)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    L: int = 16
    output_dir: str = ""
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    sampler: str = "ddim"
    eta: float = 0.0
    K: int = 50
    strength: float = 1.0
    prior_kind: str = "quadrant"
    grid: tuple[int, int] = (16, 16)
    sigma: float = DEFAULT_SIGMA
    speeds: tuple[float, ...] = DEFAULT_SPEEDS
    radius: float = 2.0
    amplitude: float = 1.0
    background: float = 0.0
    center: tuple[float, float] = (4.0, 4.0)
    velocity: tuple[float, float] = (0.5, 0.5)
    prior_path: str = ""
    denoiser: str = "optimal"
    bias_norm: float = 0.0
    bias_seed: int = 0
    bias_per_frame: bool = False
    omega: OmegaSpec = field(default_factory=OmegaSpec)
    tau: tuple[float, float] | None = (0.0, 0.6)
    reference: str = "prior"
    base_dir: str = field(default="", compare=False)

    def validate(self) -> "RunConfig":
        if self.L < 1:
            raise ConfigError(f"frames must be >= 1, got {self.L}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed out of range: {self.seed}")
        if self.sampler not in ("ddim", "ancestral"):
            raise ConfigError(f"sampler kind must be ddim or ancestral, got {self.sampler!r}")
        SamplerKind(self.sampler, self.eta)
        if not 0 < self.strength <= 1:
            raise ConfigError(f"strength must be in (0, 1], got {self.strength}")
        if self.prior_kind not in ("blob", "quadrant", "file"):
            raise ConfigError(f"prior kind must be blob, quadrant or file, got {self.prior_kind!r}")
        if self.prior_kind == "file" and not self.prior_path:
            raise ConfigError("prior kind 'file' needs a path")
        if self.denoiser not in ("optimal", "oracle"):
            raise ConfigError(f"denoiser kind must be optimal or oracle, got {self.denoiser!r}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if not math.isfinite(self.bias_norm) or self.bias_norm < 0:
            raise ConfigError(f"bias_norm must be >= 0, got {self.bias_norm}")
        if self.tau is not None:
            check_tau(self.tau)
        try:
            self.omega.expand(self.L)
        except ShapeError as exc:  # a config-file mistake, not a data-shape one
            raise ConfigError(str(exc)) from exc
        return self

    @property
    def t_start(self) -> int:
        return max(1, int(round(self.strength * self.T)))

    # -- text form -------------------------------------------------------

    @classmethod
    def from_text(cls, text: str, base_dir: str | os.PathLike = "") -> "RunConfig":
        cp = _parser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unparseable config: {exc}".replace("\n", " ")) from exc
        return cls.from_parser(cp, base_dir)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        return cls.from_text(path.read_text(), base_dir=path.parent)

    @classmethod
    def from_parser(cls, cp: configparser.ConfigParser, base_dir="") -> "RunConfig":
        unknown = [s for s in cp.sections() if s not in SECTIONS + ("sweep",)]
        if unknown:
            raise ConfigError(f"unknown config sections: {unknown}")
        kw: dict = {"base_dir": str(base_dir)}

        def get(section, key, conv, name=None):
            if cp.has_option(section, key):
                raw = cp.get(section, key)
                try:
                    kw[name or key] = conv(raw)
                except ConfigError:
                    raise
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from exc

        get("run", "seed", int)
        get("run", "frames", int, "L")
        get("run", "output_dir", str.strip, "output_dir")
        get("schedule", "T", int)
        get("schedule", "beta_start", float)
        get("schedule", "beta_end", float)
        get("sampler", "kind", str.strip, "sampler")
        get("sampler", "eta", float)
        get("sampler", "steps", int, "K")
        get("sampler", "strength", float)
        get("prior", "kind", str.strip, "prior_kind")
        get("prior", "grid", lambda t: tuple(int(v) for v in _floats(t)), "grid")
        get("prior", "sigma", float)
        get("prior", "speeds", _floats)
        get("prior", "radius", float)
        get("prior", "amplitude", float)
        get("prior", "background", float)
        get("prior", "center", _floats)
        get("prior", "velocity", _floats)
        get("prior", "path", str.strip, "prior_path")
        get("denoiser", "kind", str.strip, "denoiser")
        get("denoiser", "bias_norm", float)
        get("denoiser", "bias_seed", int)
        get("denoiser", "bias_per_frame", _bool)
        get("rectifier", "omega", OmegaSpec.parse)
        get("rectifier", "tau", lambda t: None if t.strip().lower() == "none" else _floats(t))
        get("reference", "source", str.strip, "reference")
        for key in ("grid", "center", "velocity"):
            if key in kw and len(kw[key]) != 2:
                raise ConfigError(f"[prior] {key} needs two values, got {kw[key]}")
        if kw.get("tau") is not None and "tau" in kw:
            if len(kw["tau"]) != 2:
                raise ConfigError(f"[rectifier] tau needs two values, got {kw['tau']}")
            check_tau(kw["tau"])
        return cls(**kw).validate()

    def to_text(self, include_output: bool = True) -> str:
        """Canonical text; fixed key order so that hashes are stable."""
        tau = "none" if self.tau is None else _fmt_floats(self.tau)
        rows = [
            ("run", "seed", str(self.seed)),
            ("run", "frames", str(self.L)),
        ]
        if include_output and self.output_dir:
            rows.append(("run", "output_dir", self.output_dir))
        rows += [
            ("schedule", "T", str(self.T)),
            ("schedule", "beta_start", repr(self.beta_start)),
            ("schedule", "beta_end", repr(self.beta_end)),
            ("sampler", "kind", self.sampler),
            ("sampler", "eta", repr(self.eta)),
            ("sampler", "steps", str(self.K)),
            ("sampler", "strength", repr(self.strength)),
            ("prior", "kind", self.prior_kind),
            ("prior", "grid", ", ".join(str(g) for g in self.grid)),
            ("prior", "sigma", repr(self.sigma)),
        ]
        if self.prior_kind == "quadrant":
            rows.append(("prior", "speeds", _fmt_floats(self.speeds)))
        if self.prior_kind == "blob":
            rows += [("prior", "center", _fmt_floats(self.center)),
                     ("prior", "velocity", _fmt_floats(self.velocity))]
        if self.prior_kind in ("blob", "quadrant"):
            rows += [("prior", "radius", repr(self.radius)),
                     ("prior", "amplitude", repr(self.amplitude)),
                     ("prior", "background", repr(self.background))]
        if self.prior_kind == "file":
            rows.append(("prior", "path", self.prior_path))
        rows += [
            ("denoiser", "kind", self.denoiser),
            ("denoiser", "bias_norm", repr(self.bias_norm)),
            ("denoiser", "bias_seed", str(self.bias_seed)),
            ("denoiser", "bias_per_frame", str(self.bias_per_frame).lower()),
            ("rectifier", "omega", str(self.omega)),
            ("rectifier", "tau", tau),
            ("reference", "source", self.reference),
        ]
        out, current = [], None
        for section, key, value in rows:
            if section != current:
                if current is not None:
                    out.append("")
                out.append(f"[{section}]")
                current = section
            out.append(f"{key} = {value}")
        return "\n".join(out) + "\n"

    def flat_items(self) -> list[tuple[str, str]]:
        """``(section.key, value)`` pairs of the canonical text, output dir excluded."""
        items, section = [], ""
        for line in self.to_text(include_output=False).splitlines():
            if line.startswith("["):
                section = line.strip("[]")
            elif " = " in line:
                key, _, value = line.partition(" = ")
                items.append((f"{section}.{key}", value))
        return items

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() or not self.base_dir else Path(self.base_dir) / p

    def output_path(self, fallback_name: str = "run") -> Path:
        if self.output_dir:
            return self.resolve(self.output_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV, "outputs")
        return Path(root) / fallback_name


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    return cp


@dataclass(frozen=True)
class SweepSpec:
    base: RunConfig
    axis: str
    values: tuple[float, ...]
    seeds: tuple[int, ...]
    workers: int = 1

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {self.axis!r}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if not self.seeds:
            raise ConfigError("sweep needs at least one seed")

    @classmethod
    def from_text(cls, text: str, base_dir="") -> "SweepSpec":
        cp = _parser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unparseable sweep file: {exc}".replace("\n", " ")) from exc
        if not cp.has_section("sweep"):
            raise ConfigError("sweep file needs a [sweep] section")
        base = RunConfig.from_parser(cp, base_dir)
        sw = cp["sweep"]
        try:
            axis = sw.get("axis", "").strip()
            values = _floats(sw.get("values", ""))
            seeds = parse_seeds(sw.get("seeds", "0"))
            workers = int(sw.get("workers", "1"))
        except ValueError as exc:
            raise ConfigError(f"[sweep]: {exc}") from exc
        return cls(base, axis, values, seeds, workers)

    @classmethod
    def from_file(cls, path) -> "SweepSpec":
        path = Path(path)
        return cls.from_text(path.read_text(), base_dir=path.parent)

    def row_config(self, value: float, seed: int) -> RunConfig:
        cfg = replace(self.base, seed=int(seed))
        if self.axis == "omega_min":
            cfg = replace(cfg, omega=OmegaSpec(omega_min=float(value)))
        elif self.axis == "tau_end":
            start = 0.0 if cfg.tau is None else cfg.tau[0]
            cfg = replace(cfg, tau=(start, float(value)))
        elif self.axis == "tau_start":
            end = 1.0 if cfg.tau is None else cfg.tau[1]
            cfg = replace(cfg, tau=(float(value), end))
        elif self.axis == "bias_norm":
            cfg = replace(cfg, bias_norm=float(value))
        return cfg.validate()


# -- prior files ----------------------------------------------------------

def write_prior(path, prior: VideoPrior) -> Path:
    """Prior as a text config plus a ``<stem>.means.vlt1`` file next to it.

    When the prior has a drift vector, the means file holds one base frame
    per component and frames are regenerated as ``base + i * drift``.
    """
    path = Path(path)
    means_name = f"{path.stem}.means.vlt1"
    C, H, W = prior.dims
    if prior.drift is not None:
        frames = prior.means[:, 0, :]
        drift = _fmt_floats(prior.drift)
    else:
        frames = prior.means.reshape(-1, prior.D)
        drift = "none"
    write_vlt1(path.parent / means_name, VideoLatent(frames, prior.dims))
    text = "\n".join([
        "[prior]",
        f"id = {prior.id}",
        f"frames = {prior.L}",
        f"dims = {C}, {H}, {W}",
        f"weights = {_fmt_floats(prior.weights)}",
        f"variances = {_fmt_floats(prior.variances)}",
        f"means = {means_name}",
        f"drift = {drift}",
    ]) + "\n"
    return atomic_write_text(path, text)


def read_prior(path) -> VideoPrior:
    path = Path(path)
    cp = _parser()
    try:
        cp.read_string(path.read_text())
        sec = cp["prior"]
        L = int(sec["frames"])
        weights = _floats(sec["weights"])
        variances = _floats(sec["variances"])
        dims = tuple(int(v) for v in _floats(sec["dims"]))
        means_file = path.parent / sec["means"].strip()
        drift_txt = sec.get("drift", "none").strip()
        prior_id = sec.get("id", path.stem).strip()
    except (KeyError, ValueError, configparser.Error) as exc:
        raise ConfigError(f"{path}: bad prior file ({exc})") from exc
    means = read_vlt1(means_file)
    n = len(weights)
    if len(variances) != n:
        raise ConfigError(f"{path}: {n} weights but {len(variances)} variances")
    if drift_txt.lower() != "none":
        drift = np.array(_floats(drift_txt))
        if means.L != n:
            raise FormatError(f"{means_file}: expected {n} base frames, found {means.L}")
        return VideoPrior.drifting(means.data, drift, L, variances, weights, dims=dims, id=prior_id)
    if means.L != n * L:
        raise FormatError(f"{means_file}: expected {n * L} frames, found {means.L}")
    stacked = means.data.reshape(n, L, means.D)
    comps = tuple(PriorComponent(w, m, v) for w, m, v in zip(weights, stacked, variances))
    return VideoPrior(comps, dims, id=prior_id)


# -- building runs ----------------------------------------------------------

@dataclass
class BuiltRun:
    schedule: object
    plan: object
    sampler: SamplerKind
    prior: VideoPrior
    denoiser: object
    reference: ImageLatent
    omega: np.ndarray
    tau: tuple[float, float] | None


def build_prior(cfg: RunConfig) -> VideoPrior:
    if cfg.prior_kind == "file":
        prior = read_prior(cfg.resolve(cfg.prior_path))
        if prior.L != cfg.L:
            raise ConfigError(f"prior file has {prior.L} frames, config asks for {cfg.L}")
        return prior
    if cfg.prior_kind == "blob":
        scene = BlobScene(grid=cfg.grid, center=cfg.center, velocity=cfg.velocity,
                          radius=cfg.radius, amplitude=cfg.amplitude, background=cfg.background)
        return blob_prior(scene, cfg.L, cfg.sigma)
    return quadrant_blob_prior(cfg.L, grid=cfg.grid, speeds=cfg.speeds, sigma=cfg.sigma,
                               radius=cfg.radius, amplitude=cfg.amplitude,
                               background=cfg.background)


def build_run(cfg: RunConfig) -> BuiltRun:
    cfg.validate()
    schedule = make_linear_schedule(cfg.T, cfg.beta_start, cfg.beta_end)
    plan = make_step_plan(schedule, cfg.K, cfg.t_start)
    sampler = SamplerKind(cfg.sampler, cfg.eta)
    prior = build_prior(cfg)
    bias = BiasSpec(cfg.bias_norm, cfg.bias_seed, cfg.bias_per_frame)

    if cfg.denoiser == "oracle":
        def denoiser(n):
            return biased_denoiser(oracle_noise_denoiser(n), bias)
    else:
        inner = (gaussian_optimal_denoiser(prior, schedule) if len(prior.components) == 1
                 else gmm_optimal_denoiser(prior, schedule))
        denoiser = biased_denoiser(inner, bias)

    if cfg.reference == "prior":
        reference = sample_reference(prior, SeededRng(cfg.seed, REFERENCE_STREAM))
    else:
        video = read_vlt1(cfg.resolve(cfg.reference))
        reference = video.frame(0)
        if reference.D != prior.D:
            raise ShapeError(f"reference D={reference.D} does not match prior D={prior.D}")
    return BuiltRun(schedule, plan, sampler, prior, denoiser, reference,
                    cfg.omega.expand(cfg.L), cfg.tau)
