"""Momentum grids and sphere quadrature rules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import lebedev_rule


@dataclass(frozen=True)
class MomentumGrid:
    """Uniform cell-centred grid on the cube ``[-P, P]^3`` with ``N`` cells per axis."""

    P: float = 5.0
    N: int = 24

    def __post_init__(self):
        if self.P <= 0 or self.N < 2:
            raise ValueError("need P > 0 and N >= 2")

    @property
    def h(self) -> float:
        return 2.0 * self.P / self.N

    @property
    def cell_volume(self) -> float:
        return self.h**3

    @property
    def size(self) -> int:
        return self.N**3

    @property
    def axis(self) -> np.ndarray:
        return (np.arange(self.N) + 0.5) * self.h - self.P

    @property
    def index(self) -> np.ndarray:
        """Integer index triples, C order, shape (size, 3)."""
        return np.stack(np.unravel_index(np.arange(self.size), (self.N,) * 3), axis=1)

    @property
    def nodes(self) -> np.ndarray:
        return (self.index + 0.5) * self.h - self.P

    @property
    def p0(self) -> np.ndarray:
        p = self.nodes
        return np.sqrt(1.0 + np.sum(p * p, axis=1))

    def flat(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx)
        return (idx[..., 0] * self.N + idx[..., 1]) * self.N + idx[..., 2]

    def nearest(self, p) -> int:
        i = np.clip(np.floor((np.asarray(p, float) + self.P) / self.h), 0, self.N - 1).astype(int)
        return int(self.flat(i))


@dataclass(frozen=True)
class SphereQuadrature:
    """Nodes and weights on the unit sphere.

    With ``relative=True`` the nodes are expressed in a frame whose z axis is
    the incoming centre-of-momentum direction, so the polar angle of a node is
    the scattering angle itself.
    """

    nodes: np.ndarray
    weights: np.ndarray
    relative: bool = False
    name: str = field(default="custom")

    def __post_init__(self):
        if self.nodes.shape != (self.weights.size, 3):
            raise ValueError("nodes must have shape (K, 3)")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def polar_angles(self) -> np.ndarray:
        return np.arccos(np.clip(self.nodes[:, 2], -1.0, 1.0))

    def is_antipodal(self, tol: float = 1e-12) -> bool:
        d = np.linalg.norm(self.nodes[:, None, :] + self.nodes[None, :, :], axis=2)
        j = np.argmin(d, axis=1)
        return bool(np.all(d[np.arange(self.size), j] < tol)
                    and np.allclose(self.weights, self.weights[j], rtol=tol))


def lebedev(order: int = 11) -> SphereQuadrature:
    """Octahedrally symmetric Lebedev rule (weights sum to 4 pi)."""
    x, w = lebedev_rule(order)
    return SphereQuadrature(np.ascontiguousarray(x.T), np.asarray(w), False, f"lebedev-{order}")


def product_gauss(n_theta: int = 8, n_psi: int = 8) -> SphereQuadrature:
    """Gauss-Legendre in cos(theta) times uniform azimuth, in the relative frame.

    No node sits at theta = 0 or pi, so kernels singular there can be sampled.
    """
    if n_psi % 2:
        raise ValueError("n_psi must be even for antipodal symmetry")
    mu, wmu = np.polynomial.legendre.leggauss(n_theta)
    psi = (np.arange(n_psi) + 0.5) * 2.0 * math.pi / n_psi
    M, PS = np.meshgrid(mu, psi, indexing="ij")
    st = np.sqrt(1.0 - M * M)
    nodes = np.stack([st * np.cos(PS), st * np.sin(PS), M], -1).reshape(-1, 3)
    w = np.repeat(wmu, n_psi) * (2.0 * math.pi / n_psi)
    return SphereQuadrature(nodes, w, True, f"gauss-{n_theta}x{n_psi}")


def orthonormal_frame(n: np.ndarray):
    """Two unit vectors completing ``n`` (shape (..., 3)) to a right-handed frame."""
    a = np.where(np.abs(n[..., :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    e1 = np.cross(n, a)
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(n, e1)
    return e1, e2
