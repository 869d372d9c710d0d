"""Property suites shared by the CLI, the tests and the demos."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .collision import CollisionOperator, invariant_tests, juttner
from .kinematics import energy, kinematics_residuals, post_collision, random_pairs

KINEMATICS_TOL = {"four_momentum": 1e-12, "g": 1e-12, "s": 1e-12, "s_vs_g": 1e-12,
                  "g_forms": 1e-12, "angle_forms": 1e-10, "angle_vs_omega": 1e-10}


@dataclass
class SuiteResult:
    name: str
    values: dict
    limits: dict
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = all(self.values[k] <= lim for k, lim in self.limits.items())

    def lines(self) -> list[str]:
        out = []
        for k, v in self.values.items():
            lim = self.limits.get(k)
            tag = "" if lim is None else ("PASS" if v <= lim else "FAIL")
            out.append(f"{self.name:>12s} {k:<22s} {v:12.4e}  {'<= %.1e' % lim if lim is not None else ''} {tag}")
        return out


def kinematics_suite(n: int = 10_000, seed: int = 0, corrupt: bool = False) -> SuiteResult:
    """Collision invariants on ``n`` random pairs; ``corrupt`` perturbs one outgoing energy."""
    rng = np.random.default_rng(seed)
    p, p1, omega = random_pairs(rng, n)
    res = kinematics_residuals(p, p1, omega)
    if corrupt:
        pp, pp1 = post_collision(p, p1, omega)
        e_in = energy(p) + energy(p1)
        bad = np.abs((energy(pp) * (1 + 1e-6) + energy(pp1)) - e_in) / e_in
        res["four_momentum"] = float(np.max(bad))
    return SuiteResult("kinematics", res, KINEMATICS_TOL)


def random_state(rng: np.random.Generator, grid, scale: float = 1.0, holes: float = 0.0) -> np.ndarray:
    """Positive random distribution with an exponential envelope."""
    f = scale * juttner(grid, 1.0) * rng.uniform(0.2, 1.8, grid.size)
    if holes:
        f = f * (rng.random(grid.size) >= holes)
    return f


def collision_suite(op: CollisionOperator, seed: int = 0, n_states: int = 20) -> SuiteResult:
    """Weak-form invariance, entropy production sign and Juettner stationarity."""
    rng = np.random.default_rng(seed)
    grid = op.grid
    psis = invariant_tests(grid)
    states = np.vstack([random_state(rng, grid) for _ in range(n_states)])
    gain = op.gain(states)
    q = op(states)
    qscale = np.maximum(np.sum(np.abs(gain), axis=1) * grid.cell_volume, 1e-300)
    vals = {}
    for name, psi in psis.items():
        w = np.abs(np.sum(psi * q, axis=1) * grid.cell_volume) / qscale
        vals[f"weak_form[{name}]"] = float(np.max(w)) if np.any(gain) else 0.0
    diss = op.entropy_dissipation(states)
    scale = float(np.max(np.abs(diss))) if np.any(diss) else 1.0
    vals["neg_dissipation"] = float(max(0.0, -np.min(diss) / max(scale, 1e-300)))
    fj = juttner(grid, 2.0, (0.2, -0.1, 0.05))
    vals["juettner_Q"] = float(np.sum(np.abs(op(fj))) * grid.cell_volume / float(np.max(qscale)))
    vals["juettner_dissipation"] = float(abs(op.entropy_dissipation(fj)))
    limits = {f"weak_form[{k}]": 1e-8 for k in psis}
    limits.update(neg_dissipation=1e-14, juettner_Q=1e-6, juettner_dissipation=1e-12)
    return SuiteResult("collision", vals, limits)


@dataclass
class RatioReport:
    """Empirical constants of the renormalized operator over random samples."""

    sup: np.ndarray
    l1: np.ndarray
    lipschitz: np.ndarray

    def growth(self, half: int) -> dict[str, float]:
        """Max over all samples divided by the max over the first ``half``."""
        return {k: float(np.max(v) / np.max(v[:half])) for k, v in
                (("sup", self.sup), ("l1", self.l1), ("lipschitz", self.lipschitz))}


def renormalization_ratios(op: CollisionOperator, n: float, samples: int = 200,
                           seed: int = 0) -> RatioReport:
    """Sup-norm, L1 and Lipschitz ratios of ``Q~_n`` on random states of widely varying size."""
    rng = np.random.default_rng(seed)
    grid = op.grid
    dp = grid.cell_volume
    sup, l1, lip = [], [], []
    for _ in range(samples):
        phi = random_state(rng, grid, 10.0 ** rng.uniform(-2, 2), holes=0.3)
        if rng.random() < 0.5:
            psi = phi * (1.0 + 0.1 * rng.uniform(-1, 1, grid.size))
        else:
            psi = random_state(rng, grid, 10.0 ** rng.uniform(-2, 2), holes=0.3)
        qa, qb = op.renormalized(np.vstack([phi, psi]), n)
        sup.append(np.max(np.abs(qa)) / np.max(phi))
        l1.append(np.sum(np.abs(qa)) / np.sum(phi))
        lip.append(np.sum(np.abs(qa - qb)) * dp / (np.sum(np.abs(phi - psi)) * dp))
    return RatioReport(np.array(sup), np.array(l1), np.array(lip))
