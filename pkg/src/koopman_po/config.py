"""Run configuration: TOML blocks, strict keys, defaults and a content hash.

Blocks: ``[system] [sim] [dict] [experiment] [mz] [io]`` plus a top-level
``command``.  Missing values are filled with protocol defaults for the
named system; the resolved config is fully explicit, so serialising it and
parsing it again gives the same object.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import tomli
import tomli_w

from .experiments import DEFAULT_SEEDS, TABLES, default_sigma_grid
from .simulate import SimConfig
from .systems import SYSTEM_NAMES, SdeSystem, make_system

COMMANDS = ("simulate", "fit-edmd", "reference", "mz", "trial", "sweep", "table")

# shorthand name -> (system, fixed params)
SYSTEM_ALIASES = {
    "lorenz_rho28": ("lorenz", {"rho": 28.0}),
    "lorenz_rho13": ("lorenz", {"rho": 13.0}),
    "vdp": ("van_der_pol", {}),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SystemBlock:
    name: str = "van_der_pol"
    params: dict = field(default_factory=dict)
    sigma: float = 0.0


@dataclass(frozen=True)
class SimBlock:
    dt: float | None = None
    dt_obs: float | None = None
    relax_steps_obs: int = 100
    points_per_traj: int | None = None
    n_traj: int = 100
    m_max: int = 8
    seed: int = 0
    init_box: list | None = None


@dataclass(frozen=True)
class DictBlock:
    kind: str = "delay"
    degree: int = 2
    M: int = 8
    ridge: float = 0.0
    ref_degree: int | None = None
    ref_method: str = "crank_nicolson"


@dataclass(frozen=True)
class ExperimentBlock:
    observed_dims: list = field(default_factory=lambda: [1])
    powers: list = field(default_factory=lambda: [1, 2])
    M_values: list | None = None
    degrees: list = field(default_factory=lambda: [1, 2, 3, 4])
    sigma_grid: list | None = None
    seeds: list = field(default_factory=lambda: list(DEFAULT_SEEDS))
    n_test: int = 1000
    test_points_per_traj: int = 10
    table: str = "lorenz_rho28"
    jobs: int = 1


@dataclass(frozen=True)
class MzBlock:
    degree: int = 3
    observed: list = field(default_factory=list)
    target: str = ""
    t_end: float = 1.0
    dt: float = 1e-3
    growth_bound: float = 1e6


@dataclass(frozen=True)
class IoBlock:
    out: str = "runs"
    force: bool = False


_BLOCKS = {"system": SystemBlock, "sim": SimBlock, "dict": DictBlock, "experiment": ExperimentBlock,
           "mz": MzBlock, "io": IoBlock}


@dataclass(frozen=True)
class RunConfig:
    command: str = "trial"
    system: SystemBlock = field(default_factory=SystemBlock)
    sim: SimBlock = field(default_factory=SimBlock)
    dict: DictBlock = field(default_factory=DictBlock)
    experiment: ExperimentBlock = field(default_factory=ExperimentBlock)
    mz: MzBlock = field(default_factory=MzBlock)
    io: IoBlock = field(default_factory=IoBlock)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_toml(self) -> str:
        return tomli_w.dumps(_strip_none(self.to_dict()))

    def config_hash(self) -> str:
        """Hash of the resolved config, excluding output location and overwrite policy."""
        d = self.to_dict()
        d.pop("io")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def build_system(self, sigma: float | None = None) -> SdeSystem:
        s = self.system
        return make_system(s.name, s.params, s.sigma if sigma is None else sigma)

    def sim_config(self) -> SimConfig:
        s = asdict(self.sim)
        s["init_box"] = tuple(tuple(b) for b in s["init_box"])
        return SimConfig(**s)


def _strip_none(d):
    if isinstance(d, dict):
        return {k: _strip_none(v) for k, v in d.items() if v is not None}
    return d


def _build_block(name: str, cls, raw: Mapping) -> Any:
    if not isinstance(raw, Mapping):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(unknown)}; allowed: {', '.join(sorted(known))}")
    return cls(**raw)


def from_mapping(raw: Mapping) -> RunConfig:
    """Strictly build an unresolved RunConfig from nested mappings."""
    unknown = sorted(set(raw) - set(_BLOCKS) - {"command"})
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    kwargs = {name: _build_block(name, cls, raw.get(name, {})) for name, cls in _BLOCKS.items()}
    return RunConfig(command=raw.get("command", "trial"), **kwargs)


def _parse_value(text: str):
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``block.key=value`` strings; values use TOML syntax, bare words are strings."""
    out = json.loads(json.dumps(raw))
    for item in overrides or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        parts = key.strip().split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-table value")
        node[parts[-1]] = _parse_value(value.strip())
    return out


def load_toml(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        return tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _default_sim(name: str, dim: int, m_max: int) -> dict:
    try:
        cfg = SimConfig.protocol_defaults(name, m_max=m_max)
    except ValueError:
        cfg = SimConfig(dt=1e-3, dt_obs=0.1, points_per_traj=101 + m_max, m_max=m_max,
                        init_box=((-1.0, 1.0),) * dim)
    return asdict(cfg)


def resolve(cfg: RunConfig) -> RunConfig:
    """Fill defaults, expand aliases and validate every value range."""
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}; choose from {', '.join(COMMANDS)}")
    name, params = cfg.system.name, dict(cfg.system.params)
    if cfg.command == "table" and cfg.experiment.table in TABLES:
        # table names double as system names; the variants set their own parameters
        name, params = cfg.experiment.table, {}
    if name in SYSTEM_ALIASES:
        name, fixed = SYSTEM_ALIASES[name]
        params = {**params, **fixed}
    if name not in SYSTEM_NAMES:
        raise ConfigError(f"unknown system {cfg.system.name!r}; choose from "
                          f"{', '.join(SYSTEM_NAMES + tuple(SYSTEM_ALIASES))}")
    if not cfg.system.sigma >= 0:
        raise ConfigError("system.sigma must be non-negative")
    try:
        system = make_system(name, params, cfg.system.sigma)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    system_block = SystemBlock(name, dict(system.params) or params, float(cfg.system.sigma))

    sim = asdict(cfg.sim)
    defaults = _default_sim(name, system.dim, sim["m_max"])
    for k, v in sim.items():
        if v is None:
            sim[k] = defaults[k]
    sim["init_box"] = [[float(lo), float(hi)] for lo, hi in sim["init_box"]]
    sim["dt"], sim["dt_obs"] = float(sim["dt"]), float(sim["dt_obs"])
    try:
        SimConfig(**{**sim, "init_box": tuple(map(tuple, sim["init_box"]))})
    except ValueError as exc:
        raise ConfigError(f"[sim] {exc}") from None
    if len(sim["init_box"]) != system.dim:
        raise ConfigError(f"[sim] init_box has {len(sim['init_box'])} intervals for a {system.dim}-dim system")

    d = cfg.dict
    if d.kind not in ("delay", "full_state"):
        raise ConfigError(f"dict.kind must be 'delay' or 'full_state', got {d.kind!r}")
    if d.degree < 1 or d.M < 0 or d.ridge < 0:
        raise ConfigError("dict.degree >= 1, dict.M >= 0 and dict.ridge >= 0 are required")
    if d.kind == "delay" and d.degree not in (1, 2):
        raise ConfigError("delay dictionaries support degree 1 or 2")
    if d.ref_method not in ("crank_nicolson", "matrix_exponential"):
        raise ConfigError(f"unknown dict.ref_method {d.ref_method!r}")
    ref_degree = d.ref_degree if d.ref_degree is not None else (6 if name == "lorenz" else 8)
    dict_block = replace(d, ref_degree=int(ref_degree))

    e = cfg.experiment
    M_values = list(range(sim["m_max"] + 1)) if e.M_values is None else [int(m) for m in e.M_values]
    grid = [float(s) for s in (e.sigma_grid if e.sigma_grid is not None else default_sigma_grid(name))]
    if any(not 0 <= od < system.dim for od in e.observed_dims):
        raise ConfigError(f"experiment.observed_dims must lie in 0..{system.dim - 1} (0-based)")
    if any(m > sim["m_max"] or m < 0 for m in M_values):
        raise ConfigError(f"experiment.M_values must lie in 0..m_max={sim['m_max']}")
    if e.n_test < 1 or e.test_points_per_traj < 1 or e.jobs < 1:
        raise ConfigError("experiment.n_test, test_points_per_traj and jobs must be positive")
    if any(s <= 0 for s in grid):
        raise ConfigError("experiment.sigma_grid entries must be positive")
    if e.table not in TABLES:
        raise ConfigError(f"unknown experiment.table {e.table!r}; choose from {', '.join(TABLES)}")
    if not e.seeds:
        raise ConfigError("experiment.seeds is empty")
    exp_block = replace(e, observed_dims=[int(x) for x in e.observed_dims], powers=[int(p) for p in e.powers],
                        M_values=M_values, degrees=[int(x) for x in e.degrees], sigma_grid=grid,
                        seeds=[int(s) for s in e.seeds])

    mz = cfg.mz
    if mz.t_end <= 0 or mz.dt <= 0 or mz.degree < 1:
        raise ConfigError("mz.t_end, mz.dt and mz.degree must be positive")
    observed = list(mz.observed) or [f"x{i + 1}" for i in range(system.dim)]
    mz_block = replace(mz, observed=observed, target=mz.target or observed[0])
    if mz_block.target not in observed:
        raise ConfigError(f"mz.target {mz_block.target!r} is not among mz.observed")

    return RunConfig(cfg.command, system_block, SimBlock(**sim), dict_block, exp_block, mz_block, cfg.io)


def parse_config(path=None, overrides=(), command: str | None = None) -> RunConfig:
    """Load an optional TOML file, apply ``key=value`` overrides and resolve."""
    raw = load_toml(path) if path is not None else {}
    if command is not None:
        raw["command"] = command
    raw = apply_overrides(raw, overrides)
    try:
        cfg = from_mapping(raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return resolve(cfg)


def loads(text: str) -> RunConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(str(exc)) from None
    return resolve(from_mapping(raw))
