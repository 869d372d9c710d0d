"""Relativistic two-body collision kinematics in dimensionless units (m = c = 1).

All functions broadcast over leading axes: a momentum is an array whose last
axis has length 3. Energies are always recomputed from momenta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: pairs with relative-momentum invariant below this are treated as degenerate
DEGENERATE_G = 1e-12


class DegenerateCollisionError(ValueError):
    """Raised when the colliding pair has (numerically) coincident momenta."""


def _as_momentum(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1:] != (3,):
        raise ValueError(f"momentum must have a trailing axis of length 3, got {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("momentum components must be finite")
    return p


def energy(p) -> np.ndarray | float:
    """Mass-shell energy ``sqrt(1 + |p|^2)``."""
    p = _as_momentum(p)
    e = np.sqrt(1.0 + np.einsum("...i,...i->...", p, p))
    return float(e) if e.ndim == 0 else e


@dataclass(frozen=True)
class Momentum:
    """A 3-momentum on the unit mass shell; ``p0`` is derived, never stored."""

    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", _as_momentum(self.p).copy())

    @property
    def p0(self):
        return energy(self.p)


@dataclass(frozen=True)
class CollisionGeometry:
    g: float
    s: float
    theta: float | None = None
    psi: float | None = None


def g_squared(p, p1) -> np.ndarray:
    """Relative-momentum invariant squared, from the Minkowski norm of ``p1 - p``."""
    p, p1 = _as_momentum(p), _as_momentum(p1)
    d = p1 - p
    # difference of energies without cancellation
    de = np.einsum("...i,...i->...", d, p1 + p) / (energy(p1) + energy(p))
    g2 = (np.einsum("...i,...i->...", d, d) - de * de) / 4.0
    return np.maximum(g2, 0.0)


def g_squared_inner(p, p1) -> np.ndarray:
    """Same invariant via ``(p10 p0 - p1.p - 1) / 2``."""
    p, p1 = _as_momentum(p), _as_momentum(p1)
    g2 = (energy(p) * energy(p1) - np.einsum("...i,...i->...", p, p1) - 1.0) / 2.0
    return np.maximum(g2, 0.0)


def total_energy_invariant(p, p1) -> np.ndarray:
    """``s = (p0 + p10)^2 - |p + p1|^2``."""
    p, p1 = _as_momentum(p), _as_momentum(p1)
    q = p + p1
    e = energy(p) + energy(p1)
    return e * e - np.einsum("...i,...i->...", q, q)


def invariants(p, p1) -> CollisionGeometry:
    """Return the invariants ``(g, s)`` of a single colliding pair."""
    g2 = float(g_squared(p, p1))
    return CollisionGeometry(g=float(np.sqrt(g2)), s=4.0 * (1.0 + g2))


def _boost(q, e, beta, gamma, sign):
    """Pure boost of (e, q) with velocity ``sign * beta``.

    Uses (gamma - 1) / beta^2 = gamma^2 / (1 + gamma) so beta -> 0 is safe.
    """
    bq = np.einsum("...i,...i->...", beta, q)
    k = gamma * gamma / (1.0 + gamma)
    q_out = q + ((k * bq)[..., None] + sign * (gamma * e)[..., None]) * beta
    e_out = gamma * (e + sign * bq)
    return q_out, e_out


def cm_frame(p, p1):
    """Velocity of the center-of-momentum frame, its Lorentz factor, and the
    momentum of the first particle seen in that frame."""
    p, p1 = _as_momentum(p), _as_momentum(p1)
    e_tot = energy(p) + energy(p1)
    beta = (p + p1) / np.asarray(e_tot)[..., None]
    gamma = 1.0 / np.sqrt(1.0 - np.einsum("...i,...i->...", beta, beta))
    p_star, _ = _boost(p, np.asarray(energy(p)), beta, gamma, -1.0)
    return beta, gamma, p_star


def post_collision(p, p1, omega, *, check: bool = True):
    """Post-collision momenta for outgoing center-of-momentum direction ``omega``.

    The pair is boosted to its center-of-momentum frame, the relative momentum
    is replaced by ``g * omega`` and the result is boosted back. The second
    outgoing momentum is taken as ``p + p1 - p'`` so the momentum balance is
    exact up to a single rounding.
    """
    p, p1 = _as_momentum(p), _as_momentum(p1)
    omega = np.asarray(omega, dtype=float)
    if check and not np.allclose(np.linalg.norm(omega, axis=-1), 1.0, atol=1e-12):
        raise ValueError("omega must be a unit vector")
    g = np.sqrt(g_squared_inner(p, p1))
    if check and np.any(np.sqrt(g_squared(p, p1)) < DEGENERATE_G):
        raise DegenerateCollisionError("coincident momenta: scattering is undefined")
    beta, gamma, _ = cm_frame(p, p1)
    q = g[..., None] * omega
    e_star = np.sqrt(1.0 + g * g)
    p_out, _ = _boost(q, e_star, beta, gamma, +1.0)
    p1_out = (p + p1) - p_out
    return p_out, p1_out


def incoming_direction(p, p1):
    """Unit vector of the first particle's momentum in the center-of-momentum frame."""
    _, _, p_star = cm_frame(p, p1)
    n = np.linalg.norm(p_star, axis=-1)
    if np.any(n < DEGENERATE_G):
        raise DegenerateCollisionError("coincident momenta: scattering is undefined")
    return p_star / n[..., None]


def scattering_angle(p, p1, p_prime) -> np.ndarray | float:
    """Scattering angle from the invariant arccos expression (normative form)."""
    p, p1, pp = _as_momentum(p), _as_momentum(p1), _as_momentum(p_prime)
    g2 = g_squared(p, p1)
    if np.any(np.sqrt(g2) < DEGENERATE_G):
        raise DegenerateCollisionError("scattering angle undefined for g = 0")
    e, e1, ep = energy(p), energy(p1), energy(pp)
    bracket = (e - e1) * (e - ep) - np.einsum("...i,...i->...", p - p1, p - pp)
    c = np.clip(1.0 + bracket / (2.0 * g2), -1.0, 1.0)
    th = np.arccos(c)
    return float(th) if np.ndim(th) == 0 else th


def scattering_angle_mandelstam(p, p1, p_prime) -> np.ndarray | float:
    """Scattering angle from ``cos = 1 - 2 t / (s - 4)``.

    ``t`` is taken as the spacelike square ``|p - p'|^2 - (p0 - p0')^2``; with the
    opposite sign the two angle formulas disagree (e.g. cos = 2 at a right angle).
    """
    p, p1, pp = _as_momentum(p), _as_momentum(p1), _as_momentum(p_prime)
    s = total_energy_invariant(p, p1)
    if np.any(s - 4.0 < 4.0 * DEGENERATE_G**2):
        raise DegenerateCollisionError("scattering angle undefined for g = 0")
    d = p - pp
    de = energy(p) - energy(pp)
    t = np.einsum("...i,...i->...", d, d) - de * de
    c = np.clip(1.0 - 2.0 * t / (s - 4.0), -1.0, 1.0)
    th = np.arccos(c)
    return float(th) if np.ndim(th) == 0 else th


def random_pairs(rng: np.random.Generator, n: int, scale: float = 3.0):
    """Random momentum pairs and isotropic unit vectors, for property checks."""
    p = rng.normal(scale=scale, size=(n, 3))
    p1 = rng.normal(scale=scale, size=(n, 3))
    omega = rng.normal(size=(n, 3))
    omega /= np.linalg.norm(omega, axis=1, keepdims=True)
    return p, p1, omega


def kinematics_residuals(p, p1, omega) -> dict[str, float]:
    """Worst relative residuals of the collision invariants over a batch."""
    pp, pp1 = post_collision(p, p1, omega)
    e_in = energy(p) + energy(p1)
    e_out = energy(pp) + energy(pp1)
    mom_scale = e_in
    mom = np.max(np.linalg.norm((p + p1) - (pp + pp1), axis=-1) / mom_scale)
    en = np.max(np.abs(e_in - e_out) / e_in)
    g2 = g_squared_inner(p, p1)
    g2p = g_squared_inner(pp, pp1)
    s = total_energy_invariant(p, p1)
    sp = total_energy_invariant(pp, pp1)
    n = incoming_direction(p, p1)
    expected = np.arccos(np.clip(np.einsum("...i,...i->...", n, omega), -1, 1))
    th5 = scattering_angle(p, p1, pp)
    tha = scattering_angle_mandelstam(p, p1, pp)
    return {
        "four_momentum": float(max(mom, en)),
        "g": float(np.max(np.abs(np.sqrt(g2p) - np.sqrt(g2)) / np.sqrt(g2))),
        "s": float(np.max(np.abs(sp - s) / s)),
        "s_vs_g": float(np.max(np.abs(s - 4.0 * (1.0 + g2)) / s)),
        "g_forms": float(np.max(np.abs(g_squared(p, p1) - g2) / np.maximum(g2, 1.0))),
        "angle_forms": float(np.max(np.abs(th5 - tha))),
        "angle_vs_omega": float(np.max(np.abs(th5 - expected))),
    }
