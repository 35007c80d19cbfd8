"""Run configuration: YAML parsing, validation and hypothesis classification."""

from __future__ import annotations

import dataclasses
import logging
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

from bubbles import config
from bubbles.errors import ConfigError, GridError, SeparationError
from bubbles.profiles import BubbleSet, BubbleTarget
from bubbles.spectral import Grid, make_grid

logger = logging.getLogger(__name__)

KINDS = ("construct", "pair", "cauchy", "sweep")
PATH_KINDS = ("brownian", "drift")
PERTURBATIONS = ("params", "field")


@dataclass
class GridConfig:
    extent: float
    points: int


@dataclass
class BubbleSpec:
    """Target (omega, anchor, vartheta) of one bubble."""

    omega: float
    anchor: list[float]
    vartheta: float = 0.0

    def target(self) -> BubbleTarget:
        return BubbleTarget(self.omega, tuple(self.anchor), self.vartheta)


@dataclass
class NoiseConfig:
    """Noise weights and paths.

    :ivar modes: Number of weights and paths
    :ivar nu_star: Flatness order at the anchors
    :ivar envelope: Gaussian scale of the weights (None: L/8)
    :ivar amplitude: Sup norm of each weight
    :ivar seed: Seed of the Brownian paths
    :ivar dt_noise: Path mesh spacing
    :ivar path: brownian or drift
    :ivar rates: Drift rates, one per mode
    """

    modes: int = 1
    nu_star: int = 5
    envelope: float | None = None
    amplitude: float = 1.0
    seed: int = 0
    dt_noise: float = 1e-3
    path: str = "brownian"
    rates: list[float] = field(default_factory=list)


@dataclass
class ControllerConfig:
    """Time-step settings; checkpoints is a count (geometric in T - t) or explicit times."""

    dt_base: float = 1e-3
    c_dt: float = config.C_DT_DEFAULT
    dt_min: float = config.DT_MIN_DEFAULT
    checkpoints: int | list[float] = 20
    u_cap: float = config.U_CAP_DEFAULT


@dataclass
class DiagnosticsConfig:
    decompose: bool = True
    energy_rate: bool = False
    morawetz: bool = False
    overlaps: bool = False
    basin: bool = False
    physical_checkpoints: bool = False


@dataclass
class PairConfig:
    perturbation: str = "params"
    size: float = 1e-3


@dataclass
class SweepConfig:
    seeds: list[int] = field(default_factory=list)


@dataclass
class RunConfig:
    """Everything a run needs; serialized as the run directory's config.yaml."""

    kind: str
    dim: int
    grid: GridConfig
    T: float
    t_n: float | list[float]
    t_end: float
    bubbles: list[BubbleSpec]
    noise: NoiseConfig | None = None
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    pair: PairConfig | None = None
    sweep: SweepConfig | None = None
    workers: int = 1
    case_epsilon: float = 0.1
    out_dir: str = "runs/default"
    profile_cache: str | None = None
    reference: str | None = None

    @property
    def t_n_values(self) -> list[float]:
        return list(self.t_n) if isinstance(self.t_n, list) else [self.t_n]

    def make_grid(self) -> Grid:
        return make_grid(self.dim, self.grid.extent, self.grid.points)

    def targets(self) -> list[BubbleTarget]:
        return [b.target() for b in self.bubbles]

    def bubble_set(self) -> BubbleSet:
        return BubbleSet.from_targets(self.targets(), self.dim)

    def checkpoint_times(self, t_n: float) -> tuple[float, ...]:
        """Checkpoint times between t_n and t_end."""
        marks = self.controller.checkpoints
        if isinstance(marks, list):
            return tuple(float(t) for t in marks)
        taus = np.geomspace(self.T - t_n, self.T - self.t_end, int(marks))
        return tuple(float(self.T - tau) for tau in taus)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def with_overrides(
        self,
        seed: int | None = None,
        out_dir: str | None = None,
        checkpoints: int | None = None,
    ) -> RunConfig:
        out = from_dict(self.to_dict())
        if seed is not None and out.noise is not None:
            out.noise.seed = seed
        if out_dir is not None:
            out.out_dir = out_dir
        if checkpoints is not None:
            out.controller.checkpoints = checkpoints
        return out


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _section(cls, data: Any, name: str):
    if data is None:
        return None
    if not isinstance(data, dict):
        raise ConfigError(name, "expected a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}", "unknown field")
    data = dict(data)
    for f in dataclasses.fields(cls):
        # YAML 1.1 reads exponent literals such as 1e-3 as strings
        value = data.get(f.name)
        if isinstance(value, str) and str(f.type).startswith("float"):
            data[f.name] = _float(value, f"{name}.{f.name}")
        elif isinstance(value, list) and "list[float]" in str(f.type):
            data[f.name] = [
                _float(v, f"{name}.{f.name}[{i}]") if isinstance(v, str) else v for i, v in enumerate(value)
            ]
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(name, str(exc)) from exc


def _float(value: Any, name: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, f"expected a number, got {value!r}") from exc


def from_dict(data: dict[str, Any]) -> RunConfig:
    """Build a RunConfig from parsed YAML.

    :raises ConfigError: On missing or malformed fields
    """
    if not isinstance(data, dict):
        raise ConfigError("config", "expected a mapping at the top level")
    required = ("kind", "dim", "grid", "T", "t_n", "t_end", "bubbles")
    for name in required:
        if name not in data:
            raise ConfigError(name, "missing required field")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    bubbles = data["bubbles"]
    if not isinstance(bubbles, list):
        raise ConfigError("bubbles", "expected a list")
    t_n = data["t_n"]
    t_n = [_float(t, "t_n") for t in t_n] if isinstance(t_n, list) else _float(t_n, "t_n")
    return RunConfig(
        kind=str(data["kind"]),
        dim=int(data["dim"]),
        grid=_section(GridConfig, data["grid"], "grid"),
        T=_float(data["T"], "T"),
        t_n=t_n,
        t_end=_float(data["t_end"], "t_end"),
        bubbles=[_section(BubbleSpec, b, f"bubbles[{i}]") for i, b in enumerate(bubbles)],
        noise=_section(NoiseConfig, data.get("noise"), "noise"),
        controller=_section(ControllerConfig, data.get("controller") or {}, "controller"),
        diagnostics=_section(DiagnosticsConfig, data.get("diagnostics") or {}, "diagnostics"),
        pair=_section(PairConfig, data.get("pair"), "pair"),
        sweep=_section(SweepConfig, data.get("sweep"), "sweep"),
        workers=int(data.get("workers", 1)),
        case_epsilon=_float(data.get("case_epsilon", 0.1), "case_epsilon"),
        out_dir=str(data.get("out_dir", "runs/default")),
        profile_cache=data.get("profile_cache"),
        reference=data.get("reference"),
    )


def parse_config(text: str) -> RunConfig:
    return from_dict(yaml.safe_load(text))


def load_config(path: str) -> RunConfig:
    """Read and validate a config file.

    :raises ConfigError: If parsing or validation fails
    """
    with open(path) as f:
        cfg = parse_config(f.read())
    validate(cfg)
    return cfg


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate(cfg: RunConfig) -> None:
    """Check a config against the run hypotheses.

    :raises ConfigError: Naming the first offending field
    """
    if cfg.kind not in KINDS:
        raise ConfigError("kind", f"must be one of {', '.join(KINDS)}")
    try:
        grid = cfg.make_grid()
    except GridError as exc:
        raise ConfigError("grid", str(exc)) from exc
    if not cfg.bubbles:
        raise ConfigError("bubbles", "at least one bubble is required")
    for i, b in enumerate(cfg.bubbles):
        if not b.omega > 0:
            raise ConfigError(f"bubbles[{i}].omega", "must be positive")
        if len(b.anchor) != cfg.dim:
            raise ConfigError(f"bubbles[{i}].anchor", f"needs {cfg.dim} coordinates")

    _validate_times(cfg, grid)

    try:
        bubbles = cfg.bubble_set()
    except SeparationError as exc:
        raise ConfigError("bubbles", str(exc)) from exc
    sigma = bubbles.sigma if np.isfinite(bubbles.sigma) else grid.extent * config.SEPARATION_FRACTION
    margin = 4.0 * sigma
    for i, b in enumerate(cfg.bubbles):
        if np.max(np.abs(b.anchor)) > grid.extent - margin:
            raise ConfigError(
                f"bubbles[{i}].anchor",
                f"must stay {margin:.4g} (4 sigma) inside the box of half-width {grid.extent}",
            )

    c = cfg.controller
    if not 0 < c.c_dt <= config.C_DT_MAX:
        raise ConfigError("controller.c_dt", f"must lie in (0, {config.C_DT_MAX}]")
    if not c.dt_base > 0:
        raise ConfigError("controller.dt_base", "must be positive")
    if isinstance(c.checkpoints, int) and c.checkpoints < 2:
        raise ConfigError("controller.checkpoints", "need at least 2")

    if cfg.noise is not None:
        _validate_noise(cfg.noise)
    if cfg.kind == "pair":
        if cfg.pair is None:
            raise ConfigError("pair", "required for pair runs")
        if cfg.pair.perturbation not in PERTURBATIONS:
            raise ConfigError("pair.perturbation", f"must be one of {', '.join(PERTURBATIONS)}")
        if not cfg.pair.size > 0:
            raise ConfigError("pair.size", "must be positive")
    if cfg.kind == "sweep":
        if cfg.sweep is None or not cfg.sweep.seeds:
            raise ConfigError("sweep.seeds", "at least one seed is required")
        if len(set(cfg.sweep.seeds)) != len(cfg.sweep.seeds):
            raise ConfigError("sweep.seeds", "seeds must be distinct")
        if cfg.noise is None:
            raise ConfigError("noise", "sweeps vary the noise seed and need noise")
    if cfg.workers < 1:
        raise ConfigError("workers", "must be at least 1")
    if cfg.reference is not None:
        if cfg.kind != "construct":
            raise ConfigError("reference", "only construct runs compare against a reference run")
        index = os.path.join(cfg.reference, config.CHECKPOINT_DIR, config.CHECKPOINT_INDEX)
        if not os.path.isfile(index):
            raise ConfigError("reference", f"no checkpoint index at {index}")


def _validate_times(cfg: RunConfig, grid: Grid) -> None:
    t_ns = cfg.t_n_values
    if cfg.kind == "cauchy":
        if not isinstance(cfg.t_n, list) or len(t_ns) < 3:
            raise ConfigError("t_n", "cauchy runs need a list of at least 3 start times")
        if any(b <= a for a, b in zip(t_ns, t_ns[1:])):
            raise ConfigError("t_n", "start times must be strictly ascending")
    elif isinstance(cfg.t_n, list):
        raise ConfigError("t_n", f"{cfg.kind} runs take a single start time")
    if cfg.t_end < 0:
        raise ConfigError("t_end", "must be nonnegative")
    for t_n in t_ns:
        if not cfg.t_end < t_n < cfg.T:
            raise ConfigError("t_n", f"need t_end < t_n < T, got t_n={t_n}")
    omega_min = min(b.omega for b in cfg.bubbles)
    scale = omega_min * (cfg.T - max(t_ns))
    if scale < grid.resolution_floor:
        raise ConfigError(
            "t_n",
            f"smallest initial scale {scale:.4g} is below the resolution floor {grid.resolution_floor:.4g}",
        )


def _validate_noise(noise: NoiseConfig) -> None:
    if noise.modes < 1:
        raise ConfigError("noise.modes", "must be at least 1")
    if noise.path not in PATH_KINDS:
        raise ConfigError("noise.path", f"must be one of {', '.join(PATH_KINDS)}")
    if noise.path == "drift" and len(noise.rates) != noise.modes:
        raise ConfigError("noise.rates", f"need one rate per mode ({noise.modes})")
    if not noise.dt_noise > 0:
        raise ConfigError("noise.dt_noise", "must be positive")
    if noise.envelope is not None and not noise.envelope > 0:
        raise ConfigError("noise.envelope", "must be positive")
    if noise.nu_star < config.MIN_FLATNESS:
        logger.warning(
            "noise.nu_star=%d is below %d; the construction is not expected to converge",
            noise.nu_star,
            config.MIN_FLATNESS,
        )


def classify_case(cfg: RunConfig) -> str:
    """Which separation hypothesis holds: 'I', 'II', 'I+II' or 'none'.

    Case I: every omega within case_epsilon of the mean. Case II: anchors
    pairwise at least 1/case_epsilon apart.
    """
    eps = cfg.case_epsilon
    omegas = np.array([b.omega for b in cfg.bubbles])
    case_one = bool(np.all(np.abs(omegas - omegas.mean()) <= eps))
    anchors = np.array([b.anchor for b in cfg.bubbles], dtype=float)
    case_two = all(
        np.linalg.norm(anchors[i] - anchors[j]) >= 1.0 / eps
        for i in range(len(anchors))
        for j in range(i)
    )
    if case_one and case_two:
        return "I+II"
    if case_one:
        return "I"
    if case_two:
        return "II"
    return "none"
