"""Angle fields, conjugate frame-field sampling and extraction of a
field-aligned regular quad grid in the parameter domain.

The tracer integrates the two families of a line field with classic RK4 at
a fixed parameter step. Direction fields are sign-ambiguous; orientation
is propagated by choosing, at every evaluation, the sign that maximizes
the dot product with the previous direction, seeded positively along +u
(first family) and +v (second family) at the domain center. Lines are
clipped at the domain boundary and the grid is trimmed to the maximal
complete rectangle, so the returned grid may be smaller than requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bspline import BSplineSurface, evaluate_jet, principal_frame
from .conjugacy import CongruenceSpec, pseudo_lconj_partner
from .errors import (CurvatureSignError, SingularRadiusError, TracingError,
                     UmbilicError)

ANGLE_FAMILIES = ("constant", "linear_u", "linear_v", "cosine_u", "cosine_v")
# Two traced directions closer than this (as lines) abort tracing.
MIN_FIELD_ANGLE = math.radians(5.0)
# Smallest tolerated |cell area| relative to the mean cell area.
EPS_CELL = 1e-8


@dataclass(frozen=True)
class AngleField:
    """First-direction angle against ``t1`` over the normalized domain.

    Families: ``constant`` (fixed value), ``linear_u`` / ``linear_v``
    (linear blend from ``theta_min`` to ``theta_max`` along one parameter)
    and ``cosine_u`` / ``cosine_v`` (cosine wave between the two bounds,
    periodic with period 1). All angles lie in ``[0, pi/2]``.
    """

    family: str
    theta_min: float
    theta_max: float

    def __post_init__(self):
        if self.family not in ANGLE_FAMILIES:
            raise ValueError(f"unknown angle family {self.family!r}")
        for name in ("theta_min", "theta_max"):
            val = float(getattr(self, name))
            object.__setattr__(self, name, val)
            if not 0.0 <= val <= math.pi / 2.0 + 1e-15:
                raise ValueError(f"{name}={val:g} outside [0, pi/2]")

    @classmethod
    def constant(cls, value: float) -> "AngleField":
        return cls("constant", value, value)

    @classmethod
    def linear_u(cls, theta_min: float, theta_max: float) -> "AngleField":
        return cls("linear_u", theta_min, theta_max)

    @classmethod
    def linear_v(cls, theta_min: float, theta_max: float) -> "AngleField":
        return cls("linear_v", theta_min, theta_max)

    @classmethod
    def cosine_u(cls, theta_min: float, theta_max: float) -> "AngleField":
        return cls("cosine_u", theta_min, theta_max)

    @classmethod
    def cosine_v(cls, theta_min: float, theta_max: float) -> "AngleField":
        return cls("cosine_v", theta_min, theta_max)


def theta_eval(field: AngleField, u: float, v: float) -> float:
    """Angle of the first direction at normalized coordinates ``(u, v)``.

    The cosine families evaluate on the fractional part of the running
    coordinate, making them exactly periodic.
    """
    if field.family == "constant":
        return field.theta_min
    lo, hi = field.theta_min, field.theta_max
    if field.family == "linear_u":
        return (1.0 - u) * lo + u * hi
    if field.family == "linear_v":
        return (1.0 - v) * lo + v * hi
    t = u if field.family == "cosine_u" else v
    t -= math.floor(t)
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * math.cos(2.0 * math.pi * t)


@dataclass(frozen=True)
class FrameSample:
    """Conjugate direction pair at one parameter point.

    ``d1_uv``/``d2_uv`` hold the parameter-domain coefficients and
    ``d1_3d``/``d2_3d`` the corresponding tangent vectors, related by the
    pushforward ``d_3d = d_u f_u + d_v f_v``.
    """

    uv: np.ndarray
    d1_uv: np.ndarray
    d2_uv: np.ndarray
    d1_3d: np.ndarray
    d2_3d: np.ndarray


def _tangent_to_uv(jet, d3d: np.ndarray) -> np.ndarray:
    """Coefficients of a tangent vector in the ``(f_u, f_v)`` basis."""
    e = float(np.dot(jet.f_u, jet.f_u))
    f = float(np.dot(jet.f_u, jet.f_v))
    g = float(np.dot(jet.f_v, jet.f_v))
    b1 = float(np.dot(d3d, jet.f_u))
    b2 = float(np.dot(d3d, jet.f_v))
    det = e * g - f * f
    return np.array([(g * b1 - f * b2) / det, (e * b2 - f * b1) / det])


def frame_at(surface: BSplineSurface, spec: CongruenceSpec, field: AngleField,
             u: float, v: float) -> FrameSample:
    """Conjugate frame sample at surface parameters ``(u, v)``.

    The first direction makes the field angle with ``t1``; the second
    solves the contact-curve conjugacy relation. Errors from frame or
    radius evaluation are re-raised with the sample location attached.
    """
    jet = evaluate_jet(surface, u, v)
    try:
        frame = principal_frame(jet)
        r = spec.radius_at(frame, uv=(u, v))
    except (UmbilicError, CurvatureSignError, SingularRadiusError) as exc:
        raise type(exc)(f"at (u={u:.6g}, v={v:.6g}): {exc}") from exc
    u0, u1, v0, v1 = surface.domain
    theta = theta_eval(field, (u - u0) / (u1 - u0), (v - v0) / (v1 - v0))
    a = np.array([math.cos(theta), math.sin(theta)])
    b = pseudo_lconj_partner(frame, r, a)
    d1_3d = a[0] * frame.t1 + a[1] * frame.t2
    d2_3d = b[0] * frame.t1 + b[1] * frame.t2
    return FrameSample(np.array([u, v]),
                       _tangent_to_uv(jet, d1_3d), _tangent_to_uv(jet, d2_3d),
                       d1_3d, d2_3d)


@dataclass(frozen=True)
class GridSpec:
    """Requested grid size and tracing resolution.

    ``edge_length`` is the target spacing between grid vertices measured
    on the surface; ``rk4_step`` defaults to (domain diagonal) / 400.
    """

    rows: int
    cols: int
    edge_length: float
    rk4_step: float | None = None

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise ValueError("grid needs at least 2 rows and 2 cols")
        if not self.edge_length > 0:
            raise ValueError("edge_length must be positive")
        if self.rk4_step is not None and not self.rk4_step > 0:
            raise ValueError("rk4_step must be positive")


@dataclass(frozen=True)
class QuadGrid:
    """Regular grid of parameter points with implied quad combinatorics."""

    uv: np.ndarray
    domain: tuple

    def __post_init__(self):
        uv = np.asarray(self.uv, dtype=float)
        if uv.ndim != 3 or uv.shape[2] != 2 or uv.shape[0] < 2 or uv.shape[1] < 2:
            raise ValueError("uv must have shape (rows>=2, cols>=2, 2)")
        object.__setattr__(self, "uv", uv)
        u0, u1, v0, v1 = self.domain
        if (np.any(uv[..., 0] < u0) or np.any(uv[..., 0] > u1)
                or np.any(uv[..., 1] < v0) or np.any(uv[..., 1] > v1)):
            raise ValueError("grid vertices outside the parameter domain")
        d10 = uv[1:, :-1] - uv[:-1, :-1]
        d01 = uv[:-1, 1:] - uv[:-1, :-1]
        d11 = uv[1:, 1:] - uv[:-1, :-1]

        def cross2(a, b):
            return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]

        # Shoelace area of each cell, split along the (i,j)->(i+1,j+1) diagonal.
        area = 0.5 * (cross2(d10, d11) + cross2(d11, d01))
        mean = float(np.mean(np.abs(area)))
        if mean == 0.0 or np.min(np.abs(area)) < EPS_CELL * mean:
            raise ValueError("grid contains degenerate cells")

    @property
    def rows(self) -> int:
        return self.uv.shape[0]

    @property
    def cols(self) -> int:
        return self.uv.shape[1]


class _LeftDomain(Exception):
    """Internal: a streamline stepped outside the parameter domain."""


class _FieldOnGrid:
    """Adapts ``frame_at`` to the tracer and enforces the domain box."""

    def __init__(self, surface, spec, field):
        self.surface = surface
        self.spec = spec
        self.field = field
        self.domain = surface.domain

    def __call__(self, u: float, v: float) -> FrameSample:
        u0, u1, v0, v1 = self.domain
        if not (u0 <= u <= u1 and v0 <= v <= v1):
            raise _LeftDomain
        return frame_at(self.surface, self.spec, self.field, u, v)


def _sample_direction(sample: FrameSample, family: int, ref: np.ndarray):
    """Unit-3D-speed parameter direction of one family, sign-aligned."""
    d1, d2 = sample.d1_3d, sample.d2_3d
    cosang = abs(float(np.dot(d1, d2))) / (np.linalg.norm(d1) * np.linalg.norm(d2))
    if math.acos(min(cosang, 1.0)) < MIN_FIELD_ANGLE:
        raise TracingError(
            f"field directions closer than 5 degrees at "
            f"(u={sample.uv[0]:.6g}, v={sample.uv[1]:.6g})", uv=sample.uv)
    duv = sample.d1_uv if family == 0 else sample.d2_uv
    d3d = d1 if family == 0 else d2
    w = duv / np.linalg.norm(d3d)
    if float(np.dot(w, ref)) < 0.0:
        w = -w
    return w


def _rk4_step(field_fn, p: np.ndarray, family: int, ref: np.ndarray, h: float):
    k1 = _sample_direction(field_fn(p[0], p[1]), family, ref)
    q = p + 0.5 * h * k1
    k2 = _sample_direction(field_fn(q[0], q[1]), family, k1)
    q = p + 0.5 * h * k2
    k3 = _sample_direction(field_fn(q[0], q[1]), family, k1)
    q = p + h * k3
    k4 = _sample_direction(field_fn(q[0], q[1]), family, k1)
    return p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _march(field_fn, start: np.ndarray, family: int, ref: np.ndarray,
           n_vertices: int, edge_length: float, h: float):
    """Vertices at ``edge_length`` spacing along one half-streamline.

    The spacing is divided into an integral number of RK4 steps close to
    the requested step size. Marching stops at the domain boundary.
    """
    steps = max(1, round(edge_length / h))
    h_eff = edge_length / steps
    out = []
    p = start.copy()
    direction = ref / np.linalg.norm(ref)
    for _ in range(n_vertices):
        try:
            for _ in range(steps):
                p_new = _rk4_step(field_fn, p, family, direction, h_eff)
                step_vec = p_new - p
                norm = np.linalg.norm(step_vec)
                if norm > 0.0:
                    direction = step_vec / norm
                p = p_new
        except _LeftDomain:
            break
        out.append(p.copy())
    return out, direction


def _initial_direction(sample: FrameSample, family: int) -> np.ndarray:
    """Positive orientation at the seed: +u for family 0, +v for family 1."""
    duv = sample.d1_uv if family == 0 else sample.d2_uv
    primary = 0 if family == 0 else 1
    if duv[primary] != 0.0:
        return duv if duv[primary] > 0 else -duv
    return duv if duv[1 - primary] > 0 else -duv


def trace_grid_from_field(field_fn, domain, spec: GridSpec) -> QuadGrid:
    """Trace a quad grid from an arbitrary frame-field callable.

    ``field_fn(u, v)`` must return a :class:`FrameSample` or raise
    :class:`_LeftDomain`-compatible errors only outside ``domain``. Rows
    follow the first family, columns the second; the seed row passes
    through the domain center.
    """
    u0, u1, v0, v1 = domain
    h = spec.rk4_step
    if h is None:
        h = math.hypot(u1 - u0, v1 - v0) / 400.0
    center = np.array([0.5 * (u0 + u1), 0.5 * (v0 + v1)])
    center_sample = field_fn(center[0], center[1])

    # Seeds march outward from the center along the second family.
    n_lo = (spec.rows - 1) // 2
    n_hi = spec.rows - 1 - n_lo
    d2_ref = _initial_direction(center_sample, 1)
    lo_pts, _ = _march(field_fn, center, 1, -d2_ref, n_lo, spec.edge_length, h)
    hi_pts, _ = _march(field_fn, center, 1, d2_ref, n_hi, spec.edge_length, h)
    seeds = [p for p in reversed(lo_pts)] + [center] + hi_pts
    center_row = len(lo_pts)

    # Orient the first family consistently along the seed curve.
    d1_center = _initial_direction(center_sample, 0)
    refs = [None] * len(seeds)
    refs[center_row] = d1_center
    for k in range(center_row + 1, len(seeds)):
        s = field_fn(seeds[k][0], seeds[k][1])
        d = s.d1_uv if float(np.dot(s.d1_uv, refs[k - 1])) >= 0 else -s.d1_uv
        refs[k] = d
    for k in range(center_row - 1, -1, -1):
        s = field_fn(seeds[k][0], seeds[k][1])
        d = s.d1_uv if float(np.dot(s.d1_uv, refs[k + 1])) >= 0 else -s.d1_uv
        refs[k] = d

    c_lo = (spec.cols - 1) // 2
    c_hi = spec.cols - 1 - c_lo
    rows = []
    got_lo, got_hi = [], []
    for seed, ref in zip(seeds, refs):
        lo, _ = _march(field_fn, seed, 0, -ref, c_lo, spec.edge_length, h)
        hi, _ = _march(field_fn, seed, 0, ref, c_hi, spec.edge_length, h)
        rows.append((lo, seed, hi))
        got_lo.append(len(lo))
        got_hi.append(len(hi))

    # Trim to the maximal complete rectangle.
    keep_lo = min(got_lo)
    keep_hi = min(got_hi)
    uv = np.empty((len(seeds), keep_lo + keep_hi + 1, 2))
    for i, (lo, seed, hi) in enumerate(rows):
        line = [p for p in reversed(lo[:keep_lo])] + [seed] + hi[:keep_hi]
        uv[i] = np.asarray(line)
    return QuadGrid(uv, tuple(domain))


def trace_grid(surface: BSplineSurface, spec: CongruenceSpec,
               field: AngleField, seeds: GridSpec) -> QuadGrid:
    """Field-aligned quad grid on the surface parameter domain."""
    return trace_grid_from_field(_FieldOnGrid(surface, spec, field),
                                 surface.domain, seeds)
