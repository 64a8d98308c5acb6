"""Pipeline configuration: a YAML file with one block per stage."""

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .behavior import PopulationConfig
from .dopf import MODES
from .network import bundled_path
from .posteval import Penalties


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AmbiguityBlock:
    gamma1: float = 0.1
    gamma2: float = 1.0
    epsilon: float = 0.1
    ridge: float = 1e-3


@dataclass(frozen=True)
class DopfBlock:
    z: float = 0.2
    polygon_edges: int = 12
    modes: tuple = MODES
    solver: str = "CLARABEL"


@dataclass(frozen=True)
class EvalBlock:
    realizations: int = 1000
    seed: int = None
    source: str = "gaussian"
    tol: float = 1e-4
    penalties: Penalties = field(default_factory=Penalties)


@dataclass(frozen=True)
class PipelineConfig:
    network: str
    population: PopulationConfig
    scenarios: int = 500
    seed: int = 1
    ambiguity: AmbiguityBlock = field(default_factory=AmbiguityBlock)
    dopf: DopfBlock = field(default_factory=DopfBlock)
    evaluation: EvalBlock = field(default_factory=EvalBlock)
    output: str = "out"

    def __post_init__(self):
        if self.scenarios < 2:
            raise ConfigError("scenarios: at least 2 scenarios are required")
        if not self.dopf.modes:
            raise ConfigError("dopf.modes: at least one mode is required")
        bad = [m for m in self.dopf.modes if m not in MODES]
        if bad:
            raise ConfigError(f"dopf.modes: unknown mode(s) {bad}")
        if self.evaluation.source not in ("gaussian", "behavioral"):
            raise ConfigError("evaluation.source must be 'gaussian' or 'behavioral'")
        if self.evaluation.realizations < 1:
            raise ConfigError("evaluation.realizations must be positive")
        if not self.network_path.is_dir():
            raise ConfigError(f"network: bundle not found: {self.network}")

    @property
    def network_path(self):
        p = Path(self.network)
        return p if p.is_dir() else bundled_path(self.network)

    @property
    def eval_seed(self):
        return self.seed if self.evaluation.seed is None else self.evaluation.seed

    def with_overrides(self, seed=None, output=None, modes=None):
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed, evaluation=replace(cfg.evaluation, seed=None))
        if output is not None:
            cfg = replace(cfg, output=str(output))
        if modes is not None:
            cfg = replace(cfg, dopf=replace(cfg.dopf, modes=tuple(modes)))
        return cfg


def _build(cls, block, where, convert=None):
    if block is None:
        return cls()
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in fields(cls)}
    unknown = set(block) - names
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    kwargs = dict(block)
    for k, fn in (convert or {}).items():
        if k in kwargs:
            kwargs[k] = fn(kwargs[k])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _pairs(v):
    return tuple(tuple(float(x) for x in p) for p in v)


def from_dict(raw, base_dir=None):
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    allowed = {"network", "population", "scenarios", "seed", "ambiguity", "dopf",
               "evaluation", "output"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level field(s) {sorted(unknown)}")
    if "network" not in raw:
        raise ConfigError("network: field is required")
    if "population" not in raw:
        raise ConfigError("population: block is required")
    network = str(raw["network"])
    if base_dir is not None and not Path(network).is_absolute() and (Path(base_dir) / network).is_dir():
        network = str(Path(base_dir) / network)
    pop = _build(PopulationConfig, raw["population"], "population", {
        "arrivals": lambda v: tuple(float(x) for x in v),
        "weight_range": _pairs, "tau_q_range": _pairs, "tau_gap": _pairs,
        "bias_range": lambda v: tuple(float(x) for x in v),
        "beta_range": lambda v: tuple(float(x) for x in v),
    })
    ev_raw = dict(raw.get("evaluation") or {})
    pen = _build(Penalties, ev_raw.pop("penalties", None), "evaluation.penalties")
    ev = _build(EvalBlock, ev_raw, "evaluation")
    ev = replace(ev, penalties=pen)
    try:
        return PipelineConfig(
            network=network, population=pop,
            scenarios=int(raw.get("scenarios", 500)), seed=int(raw.get("seed", 1)),
            ambiguity=_build(AmbiguityBlock, raw.get("ambiguity"), "ambiguity"),
            dopf=_build(DopfBlock, raw.get("dopf"), "dopf", {"modes": tuple}),
            evaluation=ev, output=str(raw.get("output", "out")))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1})" if mark is not None else ""
        raise ConfigError(f"{path.name}: parse error{where}: {getattr(exc, 'problem', exc)}") from None
    try:
        return from_dict(raw, base_dir=path.parent)
    except ConfigError as exc:
        msg = str(exc)
        line = _key_line(yaml.compose(text), _field_path(msg))
        where = f" (line {line})" if line else ""
        raise ConfigError(f"{path.name}{where}: {msg}") from None


def _field_path(msg):
    """Leading ``a: b.c: ...`` identifiers of an error message as ``a.b.c``."""
    parts = []
    for tok in msg.split(": ")[:-1]:
        if not tok.replace(".", "").replace("_", "").isalnum():
            break
        parts.append(tok)
    return ".".join(parts)


def _key_line(node, dotted):
    """1-based line of a dotted key in a composed YAML tree, or None."""
    line = None
    for part in dotted.split("."):
        if not isinstance(node, yaml.MappingNode):
            break
        for k, v in node.value:
            if k.value == part:
                line, node = k.start_mark.line + 1, v
                break
        else:
            break
    return line


def default_config_path(name="ieee33"):
    return Path(__file__).parent / "data" / f"{name}.yaml"
