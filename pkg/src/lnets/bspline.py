"""Tensor-product B-spline reference surfaces.

Evaluation with second-order jets, principal frames with the
inward-normal orientation rule, and closest-point projection. The heavy
per-point arithmetic lives in :mod:`lnets.kernels`; this module owns
validation, orientation and the Newton projection logic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .conjugacy import EPS_CLASS
from .errors import ConfigError, CurvatureSignError, UmbilicError

# Regularity threshold: |f_u x f_v| must exceed EPS_REG * |f_u| |f_v|.
EPS_REG = 1e-10
# Default sample-grid resolution used to seed closest-point projection.
PROJECTION_SEED_GRID = 24


@dataclass(frozen=True)
class BSplineSurface:
    """Clamped tensor-product B-spline surface with 3D control points."""

    degree_u: int
    degree_v: int
    knots_u: np.ndarray
    knots_v: np.ndarray
    control_grid: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "knots_u",
                           np.ascontiguousarray(self.knots_u, dtype=float))
        object.__setattr__(self, "knots_v",
                           np.ascontiguousarray(self.knots_v, dtype=float))
        object.__setattr__(self, "control_grid",
                           np.ascontiguousarray(self.control_grid, dtype=float))
        if self.degree_u < 1 or self.degree_v < 1:
            raise ValueError("degrees must be >= 1")
        if self.control_grid.ndim != 3 or self.control_grid.shape[2] != 3:
            raise ValueError("control_grid must have shape (n_u, n_v, 3)")
        for name, knots, degree, n_ctrl in (
                ("knots_u", self.knots_u, self.degree_u, self.control_grid.shape[0]),
                ("knots_v", self.knots_v, self.degree_v, self.control_grid.shape[1])):
            if n_ctrl < degree + 1:
                raise ValueError(f"too few control points along {name[-1]}")
            if knots.shape != (n_ctrl + degree + 1,):
                raise ValueError(
                    f"{name} must have {n_ctrl + degree + 1} entries, "
                    f"got {knots.shape[0]}")
            if np.any(np.diff(knots) < 0):
                raise ValueError(f"{name} must be nondecreasing")
            if (not np.all(knots[:degree + 1] == knots[0])
                    or not np.all(knots[-(degree + 1):] == knots[-1])):
                raise ValueError(f"{name} must be clamped "
                                 f"(end multiplicity {degree + 1})")
            if knots[degree] >= knots[n_ctrl]:
                raise ValueError(f"{name} spans an empty parameter interval")

    @property
    def domain(self):
        """Parameter rectangle ``(u_min, u_max, v_min, v_max)``."""
        return (float(self.knots_u[self.degree_u]),
                float(self.knots_u[self.control_grid.shape[0]]),
                float(self.knots_v[self.degree_v]),
                float(self.knots_v[self.control_grid.shape[1]]))

    def contains(self, u: float, v: float) -> bool:
        u0, u1, v0, v1 = self.domain
        return u0 <= u <= u1 and v0 <= v <= v1


@dataclass(frozen=True)
class SurfaceJet2:
    """Point value and derivatives up to order two of a surface patch."""

    f: np.ndarray
    f_u: np.ndarray
    f_v: np.ndarray
    f_uu: np.ndarray
    f_uv: np.ndarray
    f_vv: np.ndarray

    def __post_init__(self):
        for name in ("f", "f_u", "f_v", "f_uu", "f_uv", "f_vv"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            object.__setattr__(self, name, v)
        cross = np.cross(self.f_u, self.f_v)
        lim = EPS_REG * np.linalg.norm(self.f_u) * np.linalg.norm(self.f_v)
        if np.linalg.norm(cross) <= lim:
            raise ValueError("jet is not regular: f_u and f_v are parallel")


@dataclass(frozen=True)
class PrincipalFrame:
    """Right-handed orthonormal frame ``(t1, t2, n)`` with curvatures.

    ``n`` points to the side that makes both curvatures positive and
    ``kappa1 >= kappa2``; ``t1`` belongs to ``kappa1``.
    """

    t1: np.ndarray
    t2: np.ndarray
    n: np.ndarray
    kappa1: float
    kappa2: float

    def __post_init__(self):
        for name in ("t1", "t2", "n"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "kappa1", float(self.kappa1))
        object.__setattr__(self, "kappa2", float(self.kappa2))


def evaluate_jets(surface: BSplineSurface, us, vs) -> np.ndarray:
    """Batched jet evaluation; returns ``(N, 6, 3)`` arrays.

    Second axis order: ``f, f_u, f_v, f_uu, f_uv, f_vv``. Parameters must
    lie inside the surface domain.
    """
    us = np.atleast_1d(np.asarray(us, dtype=float))
    vs = np.atleast_1d(np.asarray(vs, dtype=float))
    u0, u1, v0, v1 = surface.domain
    if (np.any(us < u0) or np.any(us > u1)
            or np.any(vs < v0) or np.any(vs > v1)):
        raise ValueError("parameters outside the surface domain")
    return kernels.surface_jets_batch(
        surface.knots_u, surface.knots_v, surface.degree_u, surface.degree_v,
        surface.control_grid, us, vs)


def evaluate_jet(surface: BSplineSurface, u: float, v: float) -> SurfaceJet2:
    """Jet of the surface at a single parameter point."""
    j = evaluate_jets(surface, [u], [v])[0]
    return SurfaceJet2(j[0], j[1], j[2], j[3], j[4], j[5])


def _fundamental_forms(jet: SurfaceJet2):
    e = float(np.dot(jet.f_u, jet.f_u))
    f = float(np.dot(jet.f_u, jet.f_v))
    g = float(np.dot(jet.f_v, jet.f_v))
    m = np.cross(jet.f_u, jet.f_v)
    m /= np.linalg.norm(m)
    ll = float(np.dot(jet.f_uu, m))
    mm = float(np.dot(jet.f_uv, m))
    nn = float(np.dot(jet.f_vv, m))
    return e, f, g, ll, mm, nn, m


def oriented_normal(jet: SurfaceJet2) -> np.ndarray:
    """Unit normal chosen so that the mean curvature is positive.

    On a positively curved surface this is the inward normal; raises
    :class:`CurvatureSignError` when the Gaussian curvature is not positive.
    """
    e, f, g, ll, mm, nn, m = _fundamental_forms(jet)
    det_i = e * g - f * f
    gauss = (ll * nn - mm * mm) / det_i
    if gauss <= 0.0:
        raise CurvatureSignError(
            f"Gaussian curvature {gauss:g} is not positive")
    mean = (e * nn - 2.0 * f * mm + g * ll) / (2.0 * det_i)
    return m if mean > 0.0 else -m


def normal_derivatives(jet: SurfaceJet2):
    """Oriented normal and its parameter derivatives ``(n, n_u, n_v)``.

    The derivatives follow from the shape operator expressed in the
    ``(f_u, f_v)`` basis: ``n_u = -(s11 f_u + s21 f_v)`` and
    ``n_v = -(s12 f_u + s22 f_v)``, with the operator taken relative to
    the oriented normal of :func:`oriented_normal`.
    """
    e, f, g, ll, mm, nn, m = _fundamental_forms(jet)
    det_i = e * g - f * f
    mean = (e * nn - 2.0 * f * mm + g * ll) / (2.0 * det_i)
    gauss = (ll * nn - mm * mm) / det_i
    if gauss <= 0.0:
        raise CurvatureSignError(
            f"Gaussian curvature {gauss:g} is not positive")
    sign = 1.0 if mean > 0.0 else -1.0
    ll, mm, nn = sign * ll, sign * mm, sign * nn
    s11 = (g * ll - f * mm) / det_i
    s12 = (g * mm - f * nn) / det_i
    s21 = (e * mm - f * ll) / det_i
    s22 = (e * nn - f * mm) / det_i
    n_u = -(s11 * jet.f_u + s21 * jet.f_v)
    n_v = -(s12 * jet.f_u + s22 * jet.f_v)
    return sign * m, n_u, n_v


def _sign_fix(t1: np.ndarray) -> float:
    """Sign making the first nonzero component of ``t1`` positive."""
    for comp in t1:
        if abs(comp) > 1e-12:
            return 1.0 if comp > 0 else -1.0
    return 1.0


def principal_frame(jet: SurfaceJet2) -> PrincipalFrame:
    """Principal frame and curvatures from a second-order jet.

    The shape operator is diagonalized in closed form; the normal follows
    the positive-mean-curvature rule, curvatures are ordered
    ``kappa1 >= kappa2`` and the sign of ``t1`` is fixed so that its first
    nonzero component is positive.
    """
    e, f, g, ll, mm, nn, m = _fundamental_forms(jet)
    det_i = e * g - f * f
    gauss = (ll * nn - mm * mm) / det_i
    if gauss <= 0.0:
        raise CurvatureSignError(
            f"Gaussian curvature {gauss:g} is not positive")
    mean = (e * nn - 2.0 * f * mm + g * ll) / (2.0 * det_i)
    sign = 1.0 if mean > 0.0 else -1.0
    n = sign * m
    ll, mm, nn = sign * ll, sign * mm, sign * nn

    # Shape operator [[E, F], [F, G]]^-1 [[L, M], [M, N]] in the (f_u, f_v)
    # basis; its eigenvalues are the principal curvatures.
    s11 = (g * ll - f * mm) / det_i
    s12 = (g * mm - f * nn) / det_i
    s21 = (e * mm - f * ll) / det_i
    s22 = (e * nn - f * mm) / det_i
    tr = s11 + s22
    disc = np.sqrt(max(tr * tr / 4.0 - (s11 * s22 - s12 * s21), 0.0))
    kappa1 = tr / 2.0 + disc
    kappa2 = tr / 2.0 - disc
    if abs(kappa1 - kappa2) <= EPS_CLASS * max(abs(kappa1), abs(kappa2)):
        raise UmbilicError(
            f"principal curvatures coincide: {kappa1:g} ~ {kappa2:g}")
    if kappa2 <= 0.0:
        raise CurvatureSignError(f"principal curvature {kappa2:g} <= 0")

    v1 = np.array([s12, kappa1 - s11])
    v2 = np.array([kappa1 - s22, s21])
    ab = v1 if np.dot(v1, v1) >= np.dot(v2, v2) else v2
    t1 = ab[0] * jet.f_u + ab[1] * jet.f_v
    t1 /= np.linalg.norm(t1)
    t1 = _sign_fix(t1) * t1
    t2 = np.cross(n, t1)
    return PrincipalFrame(t1, t2, n, kappa1, kappa2)


def frame_at_params(surface: BSplineSurface, u: float, v: float) -> PrincipalFrame:
    """Principal frame of the surface at parameters ``(u, v)``."""
    return principal_frame(evaluate_jet(surface, u, v))


@dataclass(frozen=True)
class ProjectionResult:
    """Result of a closest-point projection."""

    u: float
    v: float
    foot: np.ndarray
    normal: np.ndarray
    converged: bool


def _seed_grid(surface: BSplineSurface, m: int):
    u0, u1, v0, v1 = surface.domain
    us = np.linspace(u0, u1, m)
    vs = np.linspace(v0, v1, m)
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    return uu.ravel(), vv.ravel()


def _seed_select(points: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Index of the closest seed per query; first minimum wins on ties.

    Seeds are ordered u-major then v, so the first minimum is the one with
    the smallest ``u`` and then the smallest ``v``.
    """
    d2 = ((points[None, :, :] - xs[:, None, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def project_points(surface: BSplineSurface, xs: np.ndarray,
                   seeds_uv: np.ndarray | None = None,
                   grid_m: int = PROJECTION_SEED_GRID,
                   max_iter: int = 50):
    """Batched closest-point projection by damped Newton iteration.

    Seeds come from the best of an inclusive ``grid_m x grid_m`` parameter
    sample unless ``seeds_uv`` provides warm starts. Iterates are clamped
    to the domain; points that have not converged after ``max_iter`` steps
    fall back to their seed parameters.

    Returns ``(uv, feet, normals, converged)`` with shapes
    ``(N, 2), (N, 3), (N, 3), (N,)``.
    """
    xs = np.asarray(xs, dtype=float).reshape(-1, 3)
    n_pts = xs.shape[0]
    u0, u1, v0, v1 = surface.domain
    scale = max(u1 - u0, v1 - v0)

    if seeds_uv is None:
        gu, gv = _seed_grid(surface, grid_m)
        feet = evaluate_jets(surface, gu, gv)[:, 0, :]
        best = _seed_select(feet, xs)
        uv = np.stack([gu[best], gv[best]], axis=1)
    else:
        uv = np.asarray(seeds_uv, dtype=float).reshape(-1, 2).copy()
    seeds = uv.copy()

    converged = np.zeros(n_pts, dtype=bool)
    active = np.ones(n_pts, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        jets = evaluate_jets(surface, uv[idx, 0], uv[idx, 1])
        diff = jets[:, 0, :] - xs[idx]
        g1 = np.einsum("nc,nc->n", diff, jets[:, 1, :])
        g2 = np.einsum("nc,nc->n", diff, jets[:, 2, :])
        speed = np.maximum(np.linalg.norm(jets[:, 1, :], axis=1),
                           np.linalg.norm(jets[:, 2, :], axis=1))
        dist = np.linalg.norm(diff, axis=1)
        tol = 1e-13 * (1.0 + dist * speed)
        done = np.hypot(g1, g2) <= tol
        converged[idx[done]] = True
        active[idx[done]] = False
        if np.all(done):
            break

        rest = ~done
        sub = idx[rest]
        a11 = (np.einsum("nc,nc->n", jets[:, 1, :], jets[:, 1, :])
               + np.einsum("nc,nc->n", diff, jets[:, 3, :]))[rest]
        a12 = (np.einsum("nc,nc->n", jets[:, 1, :], jets[:, 2, :])
               + np.einsum("nc,nc->n", diff, jets[:, 4, :]))[rest]
        a22 = (np.einsum("nc,nc->n", jets[:, 2, :], jets[:, 2, :])
               + np.einsum("nc,nc->n", diff, jets[:, 5, :]))[rest]
        b1, b2 = g1[rest], g2[rest]
        det = a11 * a22 - a12 * a12
        # Regularize nearly singular systems toward gradient descent.
        bad = np.abs(det) <= 1e-300
        damp = np.where(bad, 1e-8 * np.maximum(np.abs(a11) + np.abs(a22), 1.0), 0.0)
        a11 = a11 + damp
        a22 = a22 + damp
        det = a11 * a22 - a12 * a12
        du = (a22 * b1 - a12 * b2) / det
        dv = (a11 * b2 - a12 * b1) / det
        step = np.hypot(du, dv)
        lim = 0.25 * scale
        shrink = np.where(step > lim, lim / step, 1.0)
        uv[sub, 0] = np.clip(uv[sub, 0] - shrink * du, u0, u1)
        uv[sub, 1] = np.clip(uv[sub, 1] - shrink * dv, v0, v1)

    uv[~converged] = seeds[~converged]
    jets = evaluate_jets(surface, uv[:, 0], uv[:, 1])
    feet = jets[:, 0, :]
    normals = np.empty_like(feet)
    for i in range(n_pts):
        jet = SurfaceJet2(jets[i, 0], jets[i, 1], jets[i, 2],
                          jets[i, 3], jets[i, 4], jets[i, 5])
        normals[i] = oriented_normal(jet)
    return uv, feet, normals, converged


def closest_point(surface: BSplineSurface, x,
                  grid_m: int = PROJECTION_SEED_GRID,
                  max_iter: int = 50) -> ProjectionResult:
    """Closest-point projection of a single query point.

    Newton iteration seeded from the best of a coarse ``grid_m x grid_m``
    sample (ties resolved toward smaller ``u``, then smaller ``v``); on
    divergence the seed parameters are returned with ``converged=False``.
    The result is clamped to the domain when the minimizer is exterior.
    """
    uv, feet, normals, conv = project_points(
        surface, np.asarray(x, dtype=float).reshape(1, 3),
        grid_m=grid_m, max_iter=max_iter)
    return ProjectionResult(float(uv[0, 0]), float(uv[0, 1]),
                            feet[0], normals[0], bool(conv[0]))


_SURFACE_KEYS = {"degree_u", "degree_v", "knots_u", "knots_v",
                 "control_points"}


def surface_to_dict(surface: BSplineSurface) -> dict:
    """JSON-ready dictionary in the documented surface schema."""
    return {
        "degree_u": surface.degree_u,
        "degree_v": surface.degree_v,
        "knots_u": surface.knots_u.tolist(),
        "knots_v": surface.knots_v.tolist(),
        "control_points": surface.control_grid.tolist(),
    }


def surface_from_dict(data: dict) -> BSplineSurface:
    """Parse the surface schema strictly: unknown keys are rejected."""
    if not isinstance(data, dict):
        raise ConfigError("surface document must be a JSON object")
    unknown = set(data) - _SURFACE_KEYS
    if unknown:
        raise ConfigError(f"unknown surface keys: {sorted(unknown)}")
    missing = _SURFACE_KEYS - set(data)
    if missing:
        raise ConfigError(f"missing surface keys: {sorted(missing)}")
    try:
        return BSplineSurface(int(data["degree_u"]), int(data["degree_v"]),
                              np.asarray(data["knots_u"], dtype=float),
                              np.asarray(data["knots_v"], dtype=float),
                              np.asarray(data["control_points"], dtype=float))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid surface data: {exc}") from exc


def load_surface(path) -> BSplineSurface:
    """Load a surface from its JSON document."""
    with open(path, "r", encoding="utf-8") as fh:
        return surface_from_dict(json.load(fh))


def save_surface(surface: BSplineSurface, path) -> None:
    """Write a surface as a JSON document."""
    Path(path).write_text(json.dumps(surface_to_dict(surface), indent=1),
                          encoding="utf-8")


def convex_paraboloid_patch(alpha: float = 1.0, beta: float = 0.4,
                            half_extent: float = 1.0) -> BSplineSurface:
    """Built-in convex test patch: the graph ``z = (a x^2 + b y^2) / 2``.

    Represented exactly as a biquadratic Bezier patch over
    ``[-half_extent, half_extent]^2``. For ``alpha != beta`` within the
    default extents the patch is positively curved and free of umbilic
    points, which makes it a convenient reference surface for tests and
    for the command-line examples.
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    e = float(half_extent)
    coords = np.array([-e, 0.0, e])
    pu = np.array([0.5 * alpha * e * e, -0.5 * alpha * e * e,
                   0.5 * alpha * e * e])
    qv = np.array([0.5 * beta * e * e, -0.5 * beta * e * e,
                   0.5 * beta * e * e])
    ctrl = np.empty((3, 3, 3))
    for i in range(3):
        for j in range(3):
            ctrl[i, j] = (coords[i], coords[j], pu[i] + qv[j])
    knots = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    return BSplineSurface(2, 2, knots, knots, ctrl)
