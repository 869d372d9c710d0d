"""Run configuration (one JSON document) and the initial-data presets."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from functools import cached_property

import numpy as np

from .collision import CollisionOperator, juttner
from .kernels import CollisionKernel, hard_power, load_table, zero_kernel
from .quadrature import MomentumGrid, SphereQuadrature, lebedev, product_gauss
from .transport import (ApproximationLadder, PhaseSpaceDistribution, SpatialGrid,
                        read_snapshot, regularize_initial, truncate_initial)


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


KERNEL_KEYS = {"family", "beta", "gamma", "C", "table"}
SPHERE_KEYS = {"rule", "order", "n_theta", "n_psi"}
INITIAL_KEYS = {
    "juettner": {"preset", "c", "amplitude", "drifts", "profile", "radius"},
    "pulse": {"preset", "x0", "p_cell", "momentum", "value", "cells"},
    "block": {"preset", "radius", "pmax", "value"},
    "file": {"preset", "path"},
}


@dataclass
class RunConfig:
    geometry: str = "slab"
    L: float = 2.0
    cells: int = 64
    boundary: str = "outflow"
    P: float = 5.0
    N: int = 16
    kernel: dict = field(default_factory=lambda: {"family": "hard-power", "beta": 0.0, "gamma": 0.0, "C": 1.0})
    sphere: dict = field(default_factory=lambda: {"rule": "lebedev", "order": 11})
    partners: int | None = None
    n: float = 10.0
    m: float | None = None
    regularize: int | None = None
    T: float = 1.0
    dt: float = 0.125
    initial: dict = field(default_factory=lambda: {"preset": "juettner", "c": 2.0})
    sample_interval: float | None = None
    threads: int = 1
    output: str | None = None
    snapshot: str | None = None
    seed: int = 0

    def __post_init__(self):
        self.validate()

    # -- parsing -----------------------------------------------------------------
    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                return cls.from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.geometry in ("homogeneous", "slab", "box3"), f"unknown geometry {self.geometry!r}")
        need(self.boundary in ("outflow", "periodic"), f"unknown boundary {self.boundary!r}")
        need(self.L > 0 and self.P > 0, "extents L and P must be positive")
        need(int(self.cells) >= 1 and int(self.N) >= 2, "need cells >= 1 and N >= 2")
        need(self.dt > 0, "dt must be positive")
        need(self.T >= 0, "T must be nonnegative")
        need(self.n >= 1, "ladder level n must be >= 1")
        need(self.m is None or self.m > 0, "m must be positive")
        need(self.threads >= 1, "threads must be >= 1")
        need(self.partners is None or self.partners >= 1, "partners must be >= 1")
        need(self.sample_interval is None or self.sample_interval > 0, "sample_interval must be positive")
        need(isinstance(self.kernel, dict) and set(self.kernel) <= KERNEL_KEYS,
             f"kernel keys must be among {sorted(KERNEL_KEYS)}")
        need(isinstance(self.sphere, dict) and set(self.sphere) <= SPHERE_KEYS,
             f"sphere keys must be among {sorted(SPHERE_KEYS)}")
        need(isinstance(self.initial, dict), "initial must be an object")
        preset = self.initial.get("preset")
        need(preset in INITIAL_KEYS, f"initial preset must be one of {sorted(INITIAL_KEYS)}")
        extra = set(self.initial) - INITIAL_KEYS[preset]
        need(not extra, f"unknown keys for preset {preset!r}: {sorted(extra)}")
        try:
            self.base_kernel
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # -- builders --------------------------------------------------------------------
    @property
    def ladder(self) -> ApproximationLadder:
        return ApproximationLadder(self.n, math.inf if self.m is None else self.m)

    @property
    def space(self) -> SpatialGrid:
        return SpatialGrid(self.geometry, float(self.L), int(self.cells), self.boundary)

    @property
    def momentum(self) -> MomentumGrid:
        return MomentumGrid(float(self.P), int(self.N))

    @cached_property
    def base_kernel(self) -> CollisionKernel:
        k = dict(self.kernel)
        fam = k.get("family", "hard-power")
        if fam == "zero":
            return zero_kernel()
        if fam == "tabulated":
            if "table" not in k:
                raise ValueError("tabulated kernel needs 'table'")
            return load_table(k["table"])
        if fam == "hard-power":
            return hard_power(k.get("beta", 0.0), k.get("gamma", 0.0), k.get("C", 1.0))
        raise ValueError(f"unknown kernel family {fam!r}")

    @property
    def sphere_rule(self) -> SphereQuadrature:
        s = self.sphere
        if s.get("rule", "lebedev") == "lebedev":
            return lebedev(int(s.get("order", 11)))
        if s["rule"] == "product":
            return product_gauss(int(s.get("n_theta", 8)), int(s.get("n_psi", 8)))
        raise ConfigError(f"unknown sphere rule {s['rule']!r}")

    def collision_operator(self) -> CollisionOperator | None:
        k = self.base_kernel
        if k.family == "zero":
            return None
        return CollisionOperator(self.momentum, k.truncate(self.n), self.sphere_rule,
                                 self.partners, self.seed)

    def initial_state(self) -> PhaseSpaceDistribution:
        f = build_initial(self.initial, self.space, self.momentum)
        if self.regularize:
            f = regularize_initial(f, int(self.regularize))
        if self.m is not None:
            f = truncate_initial(f, self.m)
        return f


def _x_profile(space: SpatialGrid, profile: str, radius: float | None) -> np.ndarray:
    r = np.linalg.norm(space.positions, axis=1)
    if profile == "uniform" or space.dims == 0:
        return np.ones(space.size)
    if radius is None or radius <= 0:
        raise ConfigError("profile needs a positive radius")
    if profile == "bump":
        return np.where(r < radius, np.cos(np.pi * r / (2.0 * radius)) ** 4, 0.0)
    if profile == "gaussian":
        return np.exp(-0.5 * (r / radius) ** 2)
    if profile == "block":
        return (r < radius).astype(float)
    raise ConfigError(f"unknown profile {profile!r}")


def build_initial(spec: dict, space: SpatialGrid, momentum: MomentumGrid) -> PhaseSpaceDistribution:
    """Initial state from a preset description (see the README for the keys)."""
    preset = spec["preset"]
    if preset == "file":
        f = read_snapshot(spec["path"])
        if f.space != space or f.momentum != momentum:
            raise ConfigError("snapshot grids do not match the config")
        return PhaseSpaceDistribution(space, momentum, f.values, 0.0)
    if preset == "juettner":
        c = float(spec.get("c", 2.0))
        amp = float(spec.get("amplitude", 1.0))
        drifts = spec.get("drifts", [[0.0, 0.0, 0.0]])
        fp = sum(juttner(momentum, c, d, amp) for d in drifts)
        fx = _x_profile(space, spec.get("profile", "uniform"), spec.get("radius"))
        return PhaseSpaceDistribution(space, momentum, np.outer(fx, fp))
    if preset == "pulse":
        vals = np.zeros((space.size, momentum.size))
        if "p_cell" in spec:
            col = int(momentum.flat(np.asarray(spec["p_cell"], dtype=int)))
        else:
            col = momentum.nearest(spec.get("momentum", [0.0, 0.0, 0.0]))
        x0 = np.asarray(spec.get("x0", 0.0), dtype=float)
        x0 = np.resize(x0, 3) if x0.ndim else np.array([float(x0), 0.0, 0.0])
        dist = np.linalg.norm(space.positions - x0, axis=1)
        width = int(spec.get("cells", 1))
        rows = np.argsort(dist, kind="stable")[:width ** max(space.dims, 1) if space.dims else 1]
        vals[rows, col] = float(spec.get("value", 1.0))
        return PhaseSpaceDistribution(space, momentum, vals)
    if preset == "block":
        fx = _x_profile(space, "block", float(spec.get("radius", 0.5)))
        fp = (np.linalg.norm(momentum.nodes, axis=1) <= float(spec.get("pmax", 1.0))).astype(float)
        return PhaseSpaceDistribution(space, momentum, float(spec.get("value", 1.0)) * np.outer(fx, fp))
    raise ConfigError(f"unknown preset {preset!r}")
