"""Run configuration: flat JSON schema, grid syntax and validation.

Every key mirrors a command-line flag. Model parameters accept a number, a
comma list ``"1,2,3"`` or an inclusive range ``"start:stop:step"``; which of
them may be grids depends on the task.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .models import LatticeSpec, ModelSpec, bose_hubbard, ising
from .optimize import DEFAULT_SEED

TASKS = ("sweep", "phase-diagram", "compare-mf", "exact", "bias-demo", "single-point")
ANSATZ = ("product", "correlated", "meanfield")
FORMATS = ("csv", "json")
MODEL_PARAMS = {"ising": ("g", "h", "V", "gamma"), "bh": ("J", "U", "F", "gamma", "mu")}
DEFAULTS = {
    "ising": {"g": 0.0, "h": 0.0, "V": 5.0, "gamma": 1.0},
    # U = 1.5 mu keeps the dense phase below 1e-3 in the top level of a 6-level cutoff (see README)
    "bh": {"U": 1.5, "F": 0.4, "gamma": 0.2, "mu": 1.0},
}
SWEEP_AXES = {"ising": ("g", "h", "V"), "bh": ("J", "F", "U")}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))


def parse_grid(spec) -> list[float]:
    """Number, comma list, or ``start:stop:step`` including ``stop`` within half a step."""
    if isinstance(spec, (int, float)):
        return [float(spec)]
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    text = str(spec).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {text!r} must look like start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step == 0 or (stop - start) * step < 0:
            raise ValueError(f"grid {text!r} has a step of the wrong sign or zero")
        n = int(math.floor((stop - start) / step + 0.5)) + 1
        return [round(start + k * step, 12) for k in range(n)]
    return [float(v) for v in text.split(",") if v.strip()]


@dataclass
class RunConfig:
    task: str
    model: str = "ising"
    g: object = None
    h: object = None
    V: object = None
    J: object = None
    U: object = None
    F: object = None
    mu: object = None
    gamma: object = None
    nmax: int = 5
    lattice: str = "square"
    ansatz: str = "product"
    system: str = "torus-3"
    N: object = "2:10:1"
    p: object = "1,2"
    out: str | None = None
    format: str = "csv"
    seed: int = DEFAULT_SEED
    threads: int = 1
    strict: bool = False
    restarts: int = 4
    grids: dict = field(default_factory=dict, repr=False)

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls) if f.name != "grids"]

    @classmethod
    def from_sources(cls, file_values: dict, overrides: dict) -> "RunConfig":
        """Merge a JSON config with command-line values (non-None overrides win)."""
        unknown = sorted(set(file_values) - set(cls.keys()))
        if unknown:
            raise ConfigError([f"unknown config key {k!r}" for k in unknown])
        merged = dict(file_values)
        merged.update({k: v for k, v in overrides.items() if v is not None and k in cls.keys()})
        if "task" not in merged:
            raise ConfigError(["task is required"])
        cfg = cls(**merged)
        cfg.resolve()
        return cfg

    def resolve(self) -> None:
        """Fill model defaults, parse grids and collect every violation before failing."""
        problems = []
        if self.task not in TASKS:
            problems.append(f"task must be one of {TASKS}, got {self.task!r}")
        if self.model not in MODEL_PARAMS:
            raise ConfigError(problems + [f"model must be 'ising' or 'bh', got {self.model!r}"])
        if self.ansatz not in ANSATZ:
            problems.append(f"ansatz must be one of {ANSATZ}, got {self.ansatz!r}")
        if self.format not in FORMATS:
            problems.append(f"format must be one of {FORMATS}, got {self.format!r}")
        if self.threads < 1:
            problems.append("threads must be >= 1")
        if self.restarts < 1:
            problems.append("restarts must be >= 1")
        try:
            LatticeSpec.parse(str(self.lattice))
        except ValueError as e:
            problems.append(str(e))
        own = MODEL_PARAMS[self.model]
        foreign = [k for ps in MODEL_PARAMS.values() for k in ps if k not in own]
        for k in foreign:
            if getattr(self, k) is not None:
                problems.append(f"parameter {k} does not apply to model {self.model}")
        self.grids = {}
        for k in own:
            raw = getattr(self, k)
            if raw is None:
                raw = DEFAULTS[self.model].get(k)
            if raw is None:
                continue
            try:
                vals = parse_grid(raw)
            except ValueError as e:
                problems.append(f"{k}: {e}")
                continue
            if not vals:
                problems.append(f"{k}: empty grid")
                continue
            self.grids[k] = vals
        if self.model == "bh" and self.nmax < 2:
            problems.append("nmax must be >= 2")
        problems += self._task_checks()
        if problems:
            raise ConfigError(problems)

    def grid_axes(self) -> list[str]:
        return [k for k, v in self.grids.items() if len(v) > 1]

    def _task_checks(self) -> list[str]:
        axes = self.grid_axes()
        missing = [k for k in MODEL_PARAMS[self.model] if k not in self.grids]
        out = []
        if self.task == "sweep":
            if len(axes) != 1:
                out.append(f"sweep needs exactly one grid parameter, got {axes or 'none'}")
            elif axes[0] not in SWEEP_AXES[self.model]:
                out.append(f"sweep axis must be one of {SWEEP_AXES[self.model]}")
            if self.ansatz == "correlated" and self.model != "ising":
                out.append("the correlated ansatz is available for the Ising model only")
            out += [f"{k} is required" for k in missing if k not in axes]
        elif self.task == "phase-diagram":
            if self.model != "ising":
                out.append("phase-diagram needs the Ising model")
            elif sorted(axes) != ["V", "g"]:
                out.append(f"phase-diagram needs grids for g and V only, got {axes or 'none'}")
            elif self.grids["h"] != [0.0]:
                out.append("phase-diagram runs at h = 0")
            if self.ansatz == "meanfield":
                out.append("phase-diagram supports the product and correlated ansatz")
        elif self.task == "compare-mf":
            if self.model != "ising":
                out.append("compare-mf needs the Ising model")
            elif not set(axes) <= {"g", "h"}:
                out.append(f"compare-mf grids may only be g and h, got {axes}")
        elif self.task == "exact":
            if len(axes) != 1:
                out.append(f"exact needs exactly one grid parameter, got {axes or 'none'}")
            try:
                parse_system(self.system)
            except ValueError as e:
                out.append(str(e))
        elif self.task == "bias-demo":
            if axes:
                out.append(f"bias-demo takes scalar model parameters, got grids for {axes}")
            try:
                ns = [int(n) for n in parse_grid(self.N)]
                if not ns or min(ns) < 1:
                    out.append("N must be positive chain lengths")
                ps = parse_grid(self.p)
                if not ps or min(ps) < 1:
                    out.append("p values must be >= 1")
            except ValueError as e:
                out.append(f"N/p: {e}")
        elif self.task == "single-point":
            if axes:
                out.append(f"single-point takes scalar parameters, got grids for {axes}")
        return out

    def model_spec(self, **params) -> ModelSpec:
        """Model at the first grid value of every parameter, overridden by ``params``."""
        vals = {k: v[0] for k, v in self.grids.items()}
        vals.update(params)
        lattice = LatticeSpec.parse(self.lattice)
        if self.model == "ising":
            return ising(lattice=lattice, **vals)
        return bose_hubbard(n_max=self.nmax, lattice=lattice, **vals)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "grids"}
        d["resolved_grids"] = self.grids
        return d


def parse_system(name: str):
    """``torus-L``, ``plaquette``, ``chain-N`` or ``ring-N`` (periodic chain)."""
    from .exact import SmallLattice

    kind, _, size = name.partition("-")
    try:
        if kind == "plaquette" and not size:
            return SmallLattice.plaquette()
        if kind == "torus":
            return SmallLattice.torus(int(size))
        if kind in ("chain", "ring"):
            return SmallLattice.chain(int(size), periodic=kind == "ring")
    except (ValueError, TypeError) as e:
        raise ValueError(f"system {name!r}: {e}") from None
    raise ValueError(f"system must be torus-L, plaquette, chain-N or ring-N, got {name!r}")


def load_config_file(path: str | Path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: top level must be a JSON object"])
    return data

