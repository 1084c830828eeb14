"""
Experiment configuration: a flat ``key = value`` text file with typed fields.

Every default reproduces the reference experiment, so an empty file (or no
file at all) is a valid configuration.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .dynamics import INTEGRATORS, TRACKING_MODES
from .errors import ConfigError

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 5
    m: int = 4
    alpha: float = 10.0
    h: float = 1e-3
    t_end: float = 2.0
    switch_period: float = 0.05
    seed: int = 0
    C: float = 1.5
    mu: float = 3.0
    N: int = 60
    fraction: float = 0.5
    integrator: str = "rk4"
    tracking_mode: str = "hessian_flow"
    record_every: int = 10
    hop: int = 2
    weight_lo: float = 0.0
    weight_hi: float = 0.5
    shared_weight: bool = False
    out_dir: str = "out"
    dump_graphs: bool = False
    strict_invariants: bool = False
    plots: bool = True
    sweep_alphas: tuple = (0.1, 1.0, 10.0)
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(ok, name, msg):
            if not ok:
                raise ConfigError(name, msg)

        need(self.n >= 3, "n", "need at least 3 agents for the ring-plus-hop topology")
        need(self.m == 4, "m", "the quadratic feature map fixes m = 4")
        need(self.alpha > 0, "alpha", "must be positive")
        need(self.h > 0, "h", "must be positive")
        need(self.t_end >= 0, "t_end", "must be >= 0")
        need(self.switch_period > 0, "switch_period", "must be positive")
        ratio = self.switch_period / self.h
        need(abs(ratio - round(ratio)) <= 1e-9 * max(1.0, ratio) and round(ratio) >= 1,
             "switch_period", f"must be an integer multiple of h={self.h}")
        ratio = self.t_end / self.h
        need(abs(ratio - round(ratio)) <= 1e-9 * max(1.0, ratio),
             "t_end", f"must be an integer multiple of h={self.h}")
        need(self.C > 0, "C", "must be positive")
        need(self.mu > 0, "mu", "must be positive")
        need(self.N >= 4, "N", "must be >= 4")
        need(0 < self.fraction <= 1, "fraction", "must lie in (0, 1]")
        need(self.fraction * self.N >= 1, "fraction", "fraction*N < 1 leaves shards empty")
        need(self.integrator in INTEGRATORS, "integrator", f"must be one of {INTEGRATORS}")
        need(self.tracking_mode in TRACKING_MODES, "tracking_mode",
             f"must be one of {TRACKING_MODES}")
        need(self.record_every >= 1, "record_every", "must be >= 1")
        need(1 < self.hop < self.n, "hop", "must satisfy 1 < hop < n")
        need(0 <= self.weight_lo < self.weight_hi, "weight_hi", "need 0 <= weight_lo < weight_hi")
        need(2 * self.weight_hi <= 1, "weight_hi", "row sums must stay below 1")
        need(len(self.sweep_alphas) > 0 and all(a > 0 for a in self.sweep_alphas),
             "sweep_alphas", "need at least one positive value")
        need(self.workers >= 1, "workers", "must be >= 1")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, tuple):
                s = ", ".join(repr(float(a)) for a in v)
            elif isinstance(v, float):
                s = repr(v)
            else:
                s = str(v)
            lines.append(f"{f.name} = {s}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sweep_alphas"] = list(self.sweep_alphas)
        return d

    @classmethod
    def from_text(cls, text, **overrides) -> "ExperimentConfig":
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ConfigError(key, "unknown key")
            values[key] = _coerce(key, types[key], val)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from exc
        return cls.from_text(text, **overrides)


def _coerce(key, typ, val):
    try:
        if typ == "bool":
            low = val.lower()
            if low not in _BOOL:
                raise ValueError(val)
            return _BOOL[low]
        if typ == "int":
            return int(val)
        if typ == "float":
            return float(val)
        if typ == "tuple":
            return tuple(float(a) for a in val.split(",") if a.strip())
        return val
    except ValueError:
        raise ConfigError(key, f"cannot parse {val!r} as {typ}") from None
