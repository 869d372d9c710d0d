import math

import numpy as np
import pytest

from rbekit.quadrature import MomentumGrid, SphereQuadrature, lebedev, orthonormal_frame, product_gauss


@pytest.mark.parametrize("order", [11, 15, 21])
def test_lebedev_rule(order):
    sq = lebedev(order)
    assert sq.weights.sum() == pytest.approx(4 * math.pi, rel=1e-12)
    assert sq.is_antipodal()
    np.testing.assert_allclose(np.linalg.norm(sq.nodes, axis=1), 1.0, atol=1e-14)
    # exact for low-degree polynomials: <x^2> = 4 pi / 3
    assert np.sum(sq.weights * sq.nodes[:, 0] ** 2) == pytest.approx(4 * math.pi / 3, rel=1e-12)


def test_product_rule():
    sq = product_gauss(6, 8)
    assert sq.relative
    assert sq.weights.sum() == pytest.approx(4 * math.pi, rel=1e-12)
    assert sq.is_antipodal()
    th = sq.polar_angles
    assert th.min() > 0 and th.max() < math.pi
    assert np.sum(sq.weights * np.sin(th) ** 2) == pytest.approx(8 * math.pi / 3, rel=1e-10)
    with pytest.raises(ValueError):
        product_gauss(4, 5)


def test_bad_rule():
    with pytest.raises(ValueError):
        SphereQuadrature(np.zeros((3, 3)), np.ones(2))
    with pytest.raises(ValueError):
        SphereQuadrature(np.eye(3), np.array([1.0, 0.0, 1.0]))


def test_momentum_grid():
    g = MomentumGrid(5.0, 24)
    assert g.cell_volume == pytest.approx((10 / 24) ** 3)
    nodes = g.nodes
    assert nodes.shape == (24**3, 3)
    # symmetric under p -> -p
    flipped = g.flat(g.N - 1 - g.index)
    np.testing.assert_allclose(nodes[flipped], -nodes, atol=1e-14)
    assert g.nearest(nodes[1234]) == 1234
    np.testing.assert_array_equal(g.flat(g.index), np.arange(g.size))
    np.testing.assert_allclose(g.p0**2 - np.sum(nodes**2, axis=1), 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        MomentumGrid(0.0, 8)


def test_orthonormal_frame():
    n = np.random.default_rng(0).normal(size=(100, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    e1, e2 = orthonormal_frame(n)
    for a, b in ((e1, e2), (e1, n), (e2, n)):
        np.testing.assert_allclose(np.sum(a * b, axis=1), 0.0, atol=1e-14)
    np.testing.assert_allclose(np.einsum("ij,ij->i", np.cross(e1, e2), n), 1.0, atol=1e-14)
