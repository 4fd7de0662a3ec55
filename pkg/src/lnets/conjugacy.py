"""Conjugacy of surface directions relative to an attached tangent sphere
congruence, dual curvature radii, and the classification of contact
elements.

Notation: ``kappa1 >= kappa2 > 0`` are the principal curvatures with radii
``rho_i = 1/kappa_i``; ``r`` is the signed radius of the congruence sphere
at the contact element. The two fundamental coefficient pairs are

* ``(rho_2 - r, rho_1 - r)`` - the dual curvature radii relative to the
  congruence, attached to the first and second principal slots, and
* ``(kappa1 - r kappa1^2, kappa2 - r kappa2^2)`` - the coefficients of the
  contact-curve ("pseudo-conjugate") relation used for field generation.

Directions are expressed as coefficient pairs in the orthonormal principal
basis ``(t1, t2)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FlatError, SingularRadiusError

# Relative tolerance deciding when a dual curvature radius "vanishes";
# always applied against a local length scale, never absolutely.
EPS_CLASS = 1e-8


class ContactClass(enum.Enum):
    """Contact-element type by the sign pattern of the dual radii."""

    L_HYPERBOLIC = "l_hyperbolic"
    L_PARABOLIC = "l_parabolic"
    L_ELLIPTIC = "l_elliptic"
    L_FLAT = "l_flat"


@dataclass(frozen=True)
class CongruenceSpec:
    """Sphere-radius prescription for the attached congruence.

    ``tau_min`` mode sets ``r = tau * min(rho_1, rho_2)`` with
    ``tau in (0, 1)``, which keeps the radius strictly below the smaller
    principal radius everywhere. ``explicit`` mode takes a positive
    constant or a callable ``value(u, v)``; values reaching the smaller
    principal radius raise :class:`SingularRadiusError` where evaluated.
    """

    mode: str
    tau: float | None = None
    value: object = None

    def __post_init__(self):
        if self.mode == "tau_min":
            if self.tau is None or not 0.0 < float(self.tau) < 1.0:
                raise ValueError("tau must lie strictly between 0 and 1")
            object.__setattr__(self, "tau", float(self.tau))
        elif self.mode == "explicit":
            if self.value is None:
                raise ValueError("explicit mode needs a value")
            if not callable(self.value):
                object.__setattr__(self, "value", float(self.value))
        else:
            raise ValueError(f"unknown congruence mode {self.mode!r}")

    @property
    def is_constant(self) -> bool:
        return self.mode == "explicit" and not callable(self.value)

    def radius_at(self, frame, uv=None) -> float:
        """Congruence radius at a contact element.

        ``uv`` is forwarded to a callable explicit field; it is unused in
        the other modes.
        """
        rho_min = 1.0 / frame.kappa1
        if self.mode == "tau_min":
            return self.tau * rho_min
        r = self.value(*uv) if callable(self.value) else self.value
        if not r > 0.0:
            raise SingularRadiusError(f"congruence radius {r:g} must be positive")
        if r >= rho_min:
            raise SingularRadiusError(
                f"congruence radius {r:g} reaches the smaller principal "
                f"radius {rho_min:g}")
        return float(r)


@dataclass(frozen=True)
class LiftedFormCoeffs:
    """Second-form coefficients of the lifted congruence surface."""

    L_P: float
    M_P: float
    N_P: float


@dataclass(frozen=True)
class DualCurvature:
    """Dual curvature radii relative to the congruence and their product."""

    rho_s1: float
    rho_s2: float
    Lambda: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "Lambda", self.rho_s1 * self.rho_s2)


@dataclass(frozen=True)
class SpecialAngles:
    """Self-conjugate / principal-symmetric direction angles from ``t1``.

    Angles are reported in ``[0, pi/2]``; each stands for a ``+-`` pair.
    """

    asymptotic: float | None
    characteristic: float | None


def lifted_form(frame, r: float) -> LiftedFormCoeffs:
    """Lifted second-form coefficients in a principal parameterization.

    ``(kappa1 - r kappa1^2, 0, kappa2 - r kappa2^2)``; the mixed
    coefficient vanishes identically in principal coordinates.
    """
    k1, k2 = frame.kappa1, frame.kappa2
    return LiftedFormCoeffs(k1 - r * k1 * k1, 0.0, k2 - r * k2 * k2)


def lifted_form_from_first(s_u, s_v, n_u, n_v) -> LiftedFormCoeffs:
    """Lifted second-form coefficients from first derivatives of the lifted
    surface and its isotropic normal field.

    Uses the identities ``<<S_uu, N>> = -<<S_u, N_u>>`` (and mixed /
    second variants), valid because ``N`` is normal to the tangent plane.
    """
    from .geometry import minkowski_inner as mi

    return LiftedFormCoeffs(-mi(s_u, n_u), -mi(s_u, n_v), -mi(s_v, n_v))


def lifted_form_from_second(s_uu, s_uv, s_vv, n) -> LiftedFormCoeffs:
    """Lifted second-form coefficients from second derivatives of the
    lifted surface and the isotropic normal at the point."""
    from .geometry import minkowski_inner as mi

    return LiftedFormCoeffs(mi(s_uu, n), mi(s_uv, n), mi(s_vv, n))


def _normalize_direction(b: np.ndarray) -> np.ndarray:
    b = b / np.linalg.norm(b)
    for comp in b:
        if abs(comp) > 1e-12:
            return b if comp > 0 else -b
    return b


def _partner(coef1: float, coef2: float, a, scale: float) -> np.ndarray:
    """Unit solution ``b`` of ``coef1 a1 b1 + coef2 a2 b2 = 0``.

    Degenerate cases: both coefficients vanishing (relative to ``scale``)
    raise :class:`FlatError`; a single vanishing coefficient returns the
    principal direction of the vanishing slot, to which every direction is
    conjugate.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (2,):
        raise ValueError("direction must be a 2-vector")
    zero1 = abs(coef1) <= EPS_CLASS * scale
    zero2 = abs(coef2) <= EPS_CLASS * scale
    if zero1 and zero2:
        raise FlatError("both form coefficients vanish")
    b = np.array([coef2 * a[1], -coef1 * a[0]])
    if np.linalg.norm(b) > 0.0:
        return _normalize_direction(b)
    if zero1:
        return np.array([1.0, 0.0])
    if zero2:
        return np.array([0.0, 1.0])
    raise ValueError("direction must be nonzero")


def lconj_partner(frame, r: float, a) -> np.ndarray:
    """Direction conjugate to ``a`` relative to the congruence of radius
    ``r``, in principal coordinates.

    Solves ``(rho_2 - r) a1 b1 + (rho_1 - r) a2 b2 = 0`` and normalizes the
    result (unit length, first nonzero component positive).
    """
    rho1 = 1.0 / frame.kappa1
    rho2 = 1.0 / frame.kappa2
    return _partner(rho2 - r, rho1 - r, a, max(abs(rho1), abs(rho2)))


def pseudo_lconj_partner(frame, r: float, a) -> np.ndarray:
    """Contact-curve partner direction of ``a``.

    Solves ``(kappa1 - r kappa1^2) a1 b1 + (kappa2 - r kappa2^2) a2 b2 = 0``
    with the same normalization and degeneracy rules as
    :func:`lconj_partner`.
    """
    k1, k2 = frame.kappa1, frame.kappa2
    c1 = k1 - r * k1 * k1
    c2 = k2 - r * k2 * k2
    return _partner(c1, c2, a, max(abs(k1), abs(k2)))


def ordinary_conjugate(frame, a) -> np.ndarray:
    """Classical conjugate direction: ``kappa1 a1 b1 + kappa2 a2 b2 = 0``."""
    return _partner(frame.kappa1, frame.kappa2, a,
                    max(abs(frame.kappa1), abs(frame.kappa2)))


def dual_curvature(frame, r: float, phi: float):
    """Dual curvature radius relative to the congruence at ruling angle
    ``phi`` from ``t1``, together with the principal-slot record.

    ``rho*(phi) = rho_2 cos^2 phi + rho_1 sin^2 phi`` and the returned
    scalar is ``rho*(phi) - r``.
    """
    rho1 = 1.0 / frame.kappa1
    rho2 = 1.0 / frame.kappa2
    c, s = math.cos(phi), math.sin(phi)
    rho_star = rho2 * c * c + rho1 * s * s
    return rho_star - r, DualCurvature(rho2 - r, rho1 - r)


def dual_curvature_record(frame, r: float) -> DualCurvature:
    """Principal dual curvature radii relative to the congruence."""
    return DualCurvature(1.0 / frame.kappa2 - r, 1.0 / frame.kappa1 - r)


def classify_contact(dc: DualCurvature, scale: float) -> ContactClass:
    """Classify a contact element from its dual radii.

    ``scale`` is a local length scale (callers with a frame use
    ``max(rho_1, rho_2)``); radii within ``EPS_CLASS * scale`` of zero
    count as vanishing.
    """
    if not scale > 0.0:
        raise ValueError("scale must be positive")
    zero1 = abs(dc.rho_s1) <= EPS_CLASS * scale
    zero2 = abs(dc.rho_s2) <= EPS_CLASS * scale
    if zero1 and zero2:
        return ContactClass.L_FLAT
    if zero1 != zero2:
        return ContactClass.L_PARABOLIC
    return (ContactClass.L_ELLIPTIC if dc.Lambda > 0.0
            else ContactClass.L_HYPERBOLIC)


def classify_element(frame, r: float) -> ContactClass:
    """Classification with the default scale ``max(rho_1, rho_2)``."""
    scale = max(1.0 / frame.kappa1, 1.0 / frame.kappa2)
    return classify_contact(dual_curvature_record(frame, r), scale)


def special_angles(dc: DualCurvature, scale: float | None = None) -> SpecialAngles:
    """Self-conjugate and principal-symmetric conjugate angles.

    For a hyperbolic element the self-conjugate angle is
    ``atan(sqrt(-rho_s1 / rho_s2))``; for an elliptic one the
    principal-symmetric angle is ``atan(sqrt(rho_s1 / rho_s2))``. A
    parabolic element has the single self-conjugate direction in the
    principal slot of its vanishing radius. Flat elements are rejected.
    """
    if scale is None:
        scale = max(abs(dc.rho_s1), abs(dc.rho_s2))
    if not scale > 0.0:
        raise FlatError("both dual radii vanish")
    cls = classify_contact(dc, scale)
    if cls is ContactClass.L_FLAT:
        raise FlatError("both dual radii vanish")
    if cls is ContactClass.L_PARABOLIC:
        angle = 0.0 if abs(dc.rho_s1) <= EPS_CLASS * scale else math.pi / 2.0
        return SpecialAngles(asymptotic=angle, characteristic=None)
    if cls is ContactClass.L_HYPERBOLIC:
        return SpecialAngles(
            asymptotic=math.atan(math.sqrt(-dc.rho_s1 / dc.rho_s2)),
            characteristic=None)
    return SpecialAngles(
        asymptotic=None,
        characteristic=math.atan(math.sqrt(dc.rho_s1 / dc.rho_s2)))


def midsphere_radius(frame) -> float:
    """Radius of the tangent sphere centered midway between the principal
    curvature centers: ``(rho_1 + rho_2) / 2``."""
    return 0.5 * (1.0 / frame.kappa1 + 1.0 / frame.kappa2)
