"""Backend equivalence and an independent basis-recursion oracle."""

import numpy as np
import pytest

from lnets import kernels


def naive_basis(knots, i, p, u):
    """Textbook Cox-de Boor recursion, written independently of the
    kernel implementation (0/0 := 0)."""
    if p == 0:
        last = u == knots[-1] and knots[i] <= u <= knots[i + 1]
        return 1.0 if (knots[i] <= u < knots[i + 1] or last) else 0.0
    left = 0.0
    if knots[i + p] != knots[i]:
        left = (u - knots[i]) / (knots[i + p] - knots[i]) \
            * naive_basis(knots, i, p - 1, u)
    right = 0.0
    if knots[i + p + 1] != knots[i + 1]:
        right = (knots[i + p + 1] - u) / (knots[i + p + 1] - knots[i + 1]) \
            * naive_basis(knots, i + 1, p - 1, u)
    return left + right


def naive_point(surface, u, v):
    n_u, n_v = surface.control_grid.shape[:2]
    out = np.zeros(3)
    for i in range(n_u):
        bu = naive_basis(surface.knots_u, i, surface.degree_u, u)
        if bu == 0.0:
            continue
        for j in range(n_v):
            bv = naive_basis(surface.knots_v, j, surface.degree_v, v)
            out += bu * bv * surface.control_grid[i, j]
    return out


def random_surface(rng, degree_u, degree_v, n_u, n_v):
    from lnets import BSplineSurface

    def clamped(p, n):
        inner = np.sort(rng.uniform(0.1, 0.9, n - p - 1))
        return np.concatenate([np.zeros(p + 1), inner, np.ones(p + 1)])

    ctrl = rng.normal(size=(n_u, n_v, 3))
    return BSplineSurface(degree_u, degree_v, clamped(degree_u, n_u),
                          clamped(degree_v, n_v), ctrl)


@pytest.mark.parametrize("du,dv,nu,nv", [(1, 1, 2, 2), (2, 2, 3, 3),
                                         (2, 3, 6, 7), (3, 3, 8, 5)])
def test_backends_agree(du, dv, nu, nv):
    rng = np.random.default_rng(101 + du + 10 * dv)
    surf = random_surface(rng, du, dv, nu, nv)
    us = rng.uniform(0, 1, 300)
    vs = rng.uniform(0, 1, 300)
    a = kernels.surface_jets_batch_numpy(surf.knots_u, surf.knots_v, du, dv,
                                         surf.control_grid, us, vs)
    b = kernels.surface_jets_batch_numba(surf.knots_u, surf.knots_v, du, dv,
                                         surf.control_grid, us, vs)
    scale = np.max(np.abs(a)) + 1.0
    assert np.max(np.abs(a - b)) <= 1e-13 * scale


def test_points_match_naive_recursion():
    rng = np.random.default_rng(5)
    surf = random_surface(rng, 3, 2, 7, 6)
    for u, v in rng.uniform(0, 1, size=(20, 2)):
        got = kernels.surface_jets_batch(surf.knots_u, surf.knots_v, 3, 2,
                                         surf.control_grid,
                                         np.array([u]), np.array([v]))[0, 0]
        assert np.allclose(got, naive_point(surf, u, v), atol=1e-12)
    # Domain ends included.
    for u, v in ((0.0, 0.0), (1.0, 1.0), (0.0, 1.0)):
        got = kernels.surface_jets_batch(surf.knots_u, surf.knots_v, 3, 2,
                                         surf.control_grid,
                                         np.array([u]), np.array([v]))[0, 0]
        assert np.allclose(got, naive_point(surf, u, v), atol=1e-12)


def test_derivatives_match_naive_finite_differences():
    rng = np.random.default_rng(6)
    surf = random_surface(rng, 3, 3, 7, 7)
    h = 1e-6
    for u, v in rng.uniform(0.05, 0.95, size=(8, 2)):
        jet = kernels.surface_jets_batch(surf.knots_u, surf.knots_v, 3, 3,
                                         surf.control_grid,
                                         np.array([u]), np.array([v]))[0]
        fd_u = (naive_point(surf, u + h, v) - naive_point(surf, u - h, v)) \
            / (2 * h)
        fd_v = (naive_point(surf, u, v + h) - naive_point(surf, u, v - h)) \
            / (2 * h)
        fd_uu = (naive_point(surf, u + h, v) - 2 * naive_point(surf, u, v)
                 + naive_point(surf, u - h, v)) / h ** 2
        assert np.allclose(jet[1], fd_u, atol=1e-6)
        assert np.allclose(jet[2], fd_v, atol=1e-6)
        assert np.allclose(jet[3], fd_uu, atol=2e-3)


def test_find_spans_clamps_to_valid_range():
    knots = np.array([0., 0., 0., 0.25, 0.5, 0.75, 1., 1., 1.])
    spans = kernels.find_spans(knots, 2, 6, np.array([0.0, 0.1, 0.5, 1.0]))
    assert spans.tolist() == [2, 2, 4, 5]
    for s, u in zip(spans, [0.0, 0.1, 0.5, 1.0]):
        if u < 1.0:
            assert knots[s] <= u < knots[s + 1]


def test_degree_one_second_derivatives_vanish():
    from lnets import BSplineSurface, evaluate_jet
    ctrl = np.array([[[0., 0., 0.], [0., 1., 0.]],
                     [[1., 0., 0.], [1., 1., 0.]]])
    surf = BSplineSurface(1, 1, [0, 0, 1, 1], [0, 0, 1, 1], ctrl)
    jet = evaluate_jet(surf, 0.5, 0.5)
    assert np.allclose(jet.f, [0.5, 0.5, 0.0])
    assert np.allclose(jet.f_u, [1, 0, 0]) and np.allclose(jet.f_v, [0, 1, 0])
    for d in (jet.f_uu, jet.f_uv, jet.f_vv):
        assert np.array_equal(d, np.zeros(3))


def test_active_backend_reports_a_name():
    assert kernels.active_backend() in ("numba", "numpy")
