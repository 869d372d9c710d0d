"""Moments, entropy functionals, inertia and the checks run along trajectories."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.integrate import quad

CSV_COLUMNS = ("t", "mass", "px", "py", "pz", "energy", "H", "absH", "inertia",
               "shifted_inertia", "inv_energy", "dissipation", "leakage")

# 4/e * (2 pi)^{3/2} * 4 pi * int_0^inf r^2 exp(-sqrt(1+r^2)/2) dr, see entropy_constant_C1
C1_3D = 4397.771712502541


def _radial_factor(limit: int = 200) -> float:
    val, _ = quad(lambda r: r * r * math.exp(-math.sqrt(1.0 + r * r) / 2.0), 0.0, np.inf,
                  epsabs=0.0, epsrel=1e-13, limit=limit)
    return val


def entropy_constant_C1(spatial_dims: int = 3, limit: int = 200) -> float:
    """Constant in ``sum f|ln f| <= ... + C1`` from ``x ln(1/x) <= (2/e) sqrt(x)`` on (0, 1].

    It is ``(4/e) * int exp(-(|y|^2 + p0)/2) dy dp`` with ``y`` ranging over the
    resolved spatial directions.
    """
    return 4.0 / math.e * (2.0 * math.pi) ** (spatial_dims / 2.0) * 4.0 * math.pi * _radial_factor(limit)


@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    px: float
    py: float
    pz: float
    energy: float
    H: float
    absH: float
    inertia: float
    shifted_inertia: float
    inv_energy: float
    dissipation: float = 0.0
    leakage: float = 0.0
    # not written to CSV; needed by the reduced-geometry identities
    unresolved_energy: float = 0.0
    position_momentum: float = 0.0

    def row(self) -> list[str]:
        return [repr(float(getattr(self, c))) for c in CSV_COLUMNS]

    @property
    def momentum(self) -> np.ndarray:
        return np.array([self.px, self.py, self.pz])


@dataclass
class Trajectory:
    records: list[DiagnosticsRecord]
    states: list = field(default_factory=list)
    spatial_dims: int = 3
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def times(self) -> np.ndarray:
        return self.series("t")

    def to_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            for line in header.splitlines():
                buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow(r.row())
        return buf.getvalue()


def read_csv(text: str) -> list[DiagnosticsRecord]:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    return [DiagnosticsRecord(**{c: float(r[c]) for c in CSV_COLUMNS}) for r in rows]


# -- functionals ----------------------------------------------------------------

def _weights(f):
    x = f.space.positions
    p = f.momentum.nodes
    p0 = f.momentum.p0
    return x, p, p0, f.measure


def moments(f):
    """``(mass, momentum, energy)`` of a phase-space state."""
    _, p, p0, dm = _weights(f)
    v = f.values
    tot = v.sum(axis=0)
    return float(tot.sum() * dm), tot @ p * dm, float(tot @ p0 * dm)


def _flogf(v):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(v > 0, v * np.log(np.where(v > 0, v, 1.0)), 0.0)


def h_function(f) -> float:
    return float(np.sum(_flogf(f.values)) * f.measure)


def abs_entropy(f) -> float:
    return float(np.sum(np.abs(_flogf(f.values))) * f.measure)


def inertia(f) -> float:
    x, _, p0, dm = _weights(f)
    return float(np.sum(np.sum(x * x, axis=1) @ f.values * p0) * dm)


def shifted_inertia(f, t: float | None = None) -> float:
    """``sum f [p0 |x - t p/p0|^2 + t^2/p0]``; ``t`` defaults to the state time."""
    t = f.t if t is None else t
    x, p, p0, dm = _weights(f)
    v = f.values
    # p0|x - tv|^2 = p0|x|^2 - 2t x.p + t^2 |p|^2/p0
    a = np.sum(x * x, axis=1) @ v @ p0
    b = np.sum((x @ p.T) * v)
    c = v.sum(axis=0) @ ((np.sum(p * p, axis=1) + 1.0) / p0)
    return float((a - 2.0 * t * b + t * t * c) * dm)


def _unresolved_energy(f) -> float:
    dims = f.space.dims
    p = f.momentum.nodes
    perp = np.sum(p[:, dims:] ** 2, axis=1) if dims < 3 else np.zeros(len(p))
    return float(f.values.sum(axis=0) @ (perp / f.momentum.p0) * f.measure)


def record(f, op=None, n: float | None = None) -> DiagnosticsRecord:
    """All diagnostics of a state; dissipation and leakage need the operator."""
    mass, mom, energy = moments(f)
    x, p, p0, dm = _weights(f)
    v = f.values
    diss = leak = 0.0
    if op is not None:
        live = np.flatnonzero(np.any(v > 0, axis=1))
        if live.size:
            rows = v[live]
            fac = np.ones(live.size)
            if n is not None:
                fac = 1.0 / (1.0 + rows.sum(axis=1) * f.momentum.cell_volume / n)
            diss = float(np.sum(op.entropy_dissipation(rows) * fac) * f.space.cell_volume)
            leak = float(np.sum(op.leakage(rows) * fac) * f.space.cell_volume)
    return DiagnosticsRecord(
        t=float(f.t), mass=mass, px=float(mom[0]), py=float(mom[1]), pz=float(mom[2]),
        energy=energy, H=h_function(f), absH=abs_entropy(f), inertia=inertia(f),
        shifted_inertia=shifted_inertia(f), inv_energy=float(v.sum(axis=0) @ (1.0 / p0) * dm),
        dissipation=diss, leakage=leak, unresolved_energy=_unresolved_energy(f),
        position_momentum=float(np.sum((x @ p.T) * v) * dm),
    )


# -- identities along trajectories ---------------------------------------------

@dataclass
class IdentityReport:
    name: str
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    residual: np.ndarray
    tolerance: float

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual))

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance


def time_derivative(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Central differences inside, one-sided second-order stencils at both ends."""
    t = np.asarray(t, dtype=float)
    if t.size < 3:
        raise ValueError("need at least 3 samples")
    return np.gradient(np.asarray(y, dtype=float), t, edge_order=2)


def _identity(name, traj, lhs_series, rhs, tolerance):
    t = traj.times
    d = time_derivative(t, lhs_series)
    scale = max(float(np.max(np.abs(rhs))), float(np.max(np.abs(d))), 1e-300)
    return IdentityReport(name, t, d, rhs, np.abs(d - rhs) / scale, tolerance)


def verify_shifted_identity(traj: Trajectory, tolerance: float = 2e-2) -> IdentityReport:
    """d/dt shifted_inertia = 2t sum f (1 + |p_u|^2)/p0, ``p_u`` the unresolved components.

    In 3D ``p_u`` is empty and the right side is ``2t inv_energy``.
    """
    rhs = 2.0 * traj.times * (traj.series("inv_energy") + traj.series("unresolved_energy"))
    return _identity("shifted_inertia", traj, traj.series("shifted_inertia"), rhs, tolerance)


def verify_inertia_identity(traj: Trajectory, tolerance: float = 2e-2) -> IdentityReport:
    """d/dt inertia = 2 sum f x.p."""
    rhs = 2.0 * traj.series("position_momentum")
    return _identity("inertia", traj, traj.series("inertia"), rhs, tolerance)


@dataclass
class BoundCheck:
    name: str
    worst_lhs: float
    bound: float
    scale: float
    tolerance: float = 1e-6

    @property
    def margin(self) -> float:
        return self.bound - self.worst_lhs

    @property
    def passed(self) -> bool:
        return self.margin >= -self.tolerance * self.scale


@dataclass
class BoundsReport:
    checks: list[BoundCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


def initial_bound_terms(f0) -> dict[str, float]:
    """Sums of the initial state that enter the a-priori bounds."""
    x, _, p0, dm = _weights(f0)
    v = f0.values
    x2 = np.sum(x * x, axis=1)
    m0, _, e0 = moments(f0)
    with np.errstate(divide="ignore"):
        lnabs = np.where(v > 0, v * np.abs(np.log(np.where(v > 0, v, 1.0))), 0.0)
    return {
        "mass": m0,
        "energy": e0,
        "inertia": inertia(f0),
        "weighted": float((1.0 + x2) @ v @ p0 * dm),
        "abs_log": float(np.sum(lnabs) * dm),
        "budget": m0 + e0 + h_function(f0),
    }


def verify_bounds(traj: Trajectory, f0, T: float, C1: float | None = None,
                  tolerance: float = 1e-6) -> BoundsReport:
    """Sample-wise a-priori bounds over ``[0, T]``.

    The ``T^2`` factor multiplies the mass in 3D; with unresolved directions it
    multiplies the energy instead (the time derivative of the shifted inertia is
    ``2t sum f(1 + |p_u|^2)/p0 <= 2t sum f p0`` there).
    """
    dims = traj.spatial_dims
    C1 = entropy_constant_C1(dims) if C1 is None else C1
    b = initial_bound_terms(f0)
    w = b["mass"] if dims == 3 else b["energy"]
    si = traj.series("shifted_inertia")
    ine = traj.series("inertia")
    ent = traj.series("absH")
    budget = traj.series("mass") + traj.series("energy") + traj.series("H")
    checks = [
        BoundCheck("shifted_inertia", float(si.max()), b["inertia"] + T * T * w,
                   max(b["inertia"] + T * T * w, 1e-300), tolerance),
        BoundCheck("inertia_gronwall", float(ine.max()), math.exp(T) * b["weighted"],
                   max(b["weighted"], 1e-300), tolerance),
        BoundCheck("entropy", float(ent.max()),
                   2 * T * T * w + 2 * b["weighted"] + b["abs_log"] + C1,
                   max(abs(b["abs_log"]), 1.0), tolerance),
        BoundCheck("entropy_budget", float(budget.max()), b["budget"],
                   max(abs(b["mass"]) + abs(b["energy"]) + b["abs_log"], 1e-300), tolerance),
    ]
    return BoundsReport(checks)


def h_monotone_violation(traj: Trajectory) -> float:
    """Largest sample-to-sample increase of H, relative to the initial ``sum f|ln f|``."""
    H = traj.series("H")
    if H.size < 2:
        return 0.0
    scale = max(abs(traj.records[0].absH), abs(H[0]), 1e-300)
    return float(max(np.max(np.diff(H)), 0.0) / scale)


def conservation_drift(traj: Trajectory) -> dict[str, float]:
    """Max relative drift of mass, momentum (relative to energy) and energy."""
    m, e = traj.series("mass"), traj.series("energy")
    mom = np.stack([traj.series(c) for c in ("px", "py", "pz")], axis=1)
    e0 = max(abs(e[0]), 1e-300)
    return {
        "mass": float(np.max(np.abs(m - m[0])) / max(abs(m[0]), 1e-300)),
        "momentum": float(np.max(np.abs(mom - mom[0])) / e0),
        "energy": float(np.max(np.abs(e - e[0])) / e0),
    }
