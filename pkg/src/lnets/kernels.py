"""Hot numeric kernels: batched tensor-product B-spline jet evaluation.

Two interchangeable backends are provided:

* a ``numba``-jitted scalar implementation (default when numba imports), and
* a pure-numpy implementation vectorized across evaluation points.

Set the environment variable ``LNETS_PURE_NUMPY=1`` before import to force
the numpy path; the numpy path is also used automatically when numba is not
installed. Both backends implement the identical Cox-de Boor recursion and
agree to floating-point roundoff. ``benchmarks/bench_kernels.py`` compares
their throughput.

The batch entry point ``surface_jets_batch`` returns, for ``N`` parameter
pairs, an ``(N, 6, 3)`` array whose second axis is ordered
``f, f_u, f_v, f_uu, f_uv, f_vv``.
"""

from __future__ import annotations

import os

import numpy as np

_FORCE_NUMPY = os.environ.get("LNETS_PURE_NUMPY", "0") not in ("", "0")

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap(args[0]) if args and callable(args[0]) else wrap


def find_spans(knots: np.ndarray, degree: int, n_ctrl: int,
               params: np.ndarray) -> np.ndarray:
    """Knot-span index per parameter, clamped to valid spans.

    The returned ``span`` satisfies ``knots[span] <= u < knots[span+1]``
    except at the right domain end, where the last non-empty span is used.
    """
    spans = np.searchsorted(knots, params, side="right") - 1
    return np.clip(spans, degree, n_ctrl - 1)


def _ders_basis_batch_np(knots, degree, spans, params, n_ders):
    """All nonzero basis functions and derivatives, vectorized over points.

    Returns an array of shape ``(n_ders+1, N, degree+1)``.
    """
    p = degree
    n = params.shape[0]
    du = min(n_ders, p)

    left = np.empty((n, p + 1))
    right = np.empty((n, p + 1))
    ndu = np.empty((n, p + 1, p + 1))
    ndu[:, 0, 0] = 1.0
    for j in range(1, p + 1):
        left[:, j] = params - knots[spans + 1 - j]
        right[:, j] = knots[spans + j] - params
        saved = np.zeros(n)
        for r in range(j):
            ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
            temp = ndu[:, r, j - 1] / ndu[:, j, r]
            ndu[:, r, j] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        ndu[:, j, j] = saved

    ders = np.zeros((n_ders + 1, n, p + 1))
    ders[0] = ndu[:, :, p]

    a = np.empty((n, 2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[:, 0, 0] = 1.0
        for k in range(1, du + 1):
            d = np.zeros(n)
            rk = r - k
            pk = p - k
            if r >= k:
                a[:, s2, 0] = a[:, s1, 0] / ndu[:, pk + 1, rk]
                d = a[:, s2, 0] * ndu[:, rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[:, s2, j] = (a[:, s1, j] - a[:, s1, j - 1]) / ndu[:, pk + 1, rk + j]
                d = d + a[:, s2, j] * ndu[:, rk + j, pk]
            if r <= pk:
                a[:, s2, k] = -a[:, s1, k - 1] / ndu[:, pk + 1, r]
                d = d + a[:, s2, k] * ndu[:, r, pk]
            ders[k, :, r] = d
            s1, s2 = s2, s1

    fact = float(p)
    for k in range(1, du + 1):
        ders[k] *= fact
        fact *= p - k
    return ders


def surface_jets_batch_numpy(knots_u, knots_v, degree_u, degree_v, ctrl,
                             us, vs):
    """Pure-numpy backend for batched surface jets."""
    us = np.ascontiguousarray(us, dtype=float)
    vs = np.ascontiguousarray(vs, dtype=float)
    n_u, n_v = ctrl.shape[0], ctrl.shape[1]
    su = find_spans(knots_u, degree_u, n_u, us)
    sv = find_spans(knots_v, degree_v, n_v, vs)
    bu = _ders_basis_batch_np(knots_u, degree_u, su, us, 2)
    bv = _ders_basis_batch_np(knots_v, degree_v, sv, vs, 2)

    iu = (su - degree_u)[:, None] + np.arange(degree_u + 1)[None, :]
    jv = (sv - degree_v)[:, None] + np.arange(degree_v + 1)[None, :]
    block = ctrl[iu[:, :, None], jv[:, None, :]]  # (N, pu+1, pv+1, 3)

    out = np.empty((us.shape[0], 6, 3))
    orders = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    for slot, (a, b) in enumerate(orders):
        out[:, slot, :] = np.einsum("ni,nj,nijc->nc", bu[a], bv[b], block)
    return out


@njit(cache=True)
def _find_span_nb(knots, degree, n_ctrl, u):  # pragma: no cover - jitted
    lo = degree
    hi = n_ctrl - 1
    if u >= knots[n_ctrl]:
        return n_ctrl - 1
    if u <= knots[degree]:
        return degree
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if knots[mid] <= u:
            lo = mid
        else:
            hi = mid - 1
    return lo


@njit(cache=True)
def _ders_basis_nb(knots, degree, span, u, n_ders, ders):  # pragma: no cover
    p = degree
    du = n_ders if n_ders < p else p
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    ndu = np.empty((p + 1, p + 1))
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = u - knots[span + 1 - j]
        right[j] = knots[span + j] - u
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    for k in range(n_ders + 1):
        for r in range(p + 1):
            ders[k, r] = 0.0
    for r in range(p + 1):
        ders[0, r] = ndu[r, p]

    a = np.empty((2, p + 1))
    for r in range(p + 1):
        s1 = 0
        s2 = 1
        a[0, 0] = 1.0
        for k in range(1, du + 1):
            d = 0.0
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1

    fact = float(p)
    for k in range(1, du + 1):
        for j in range(p + 1):
            ders[k, j] *= fact
        fact *= p - k


@njit(cache=True)
def _surface_jets_nb(knots_u, knots_v, degree_u, degree_v, ctrl, us, vs,
                     out):  # pragma: no cover - jitted
    n_u = ctrl.shape[0]
    n_v = ctrl.shape[1]
    bu = np.empty((3, degree_u + 1))
    bv = np.empty((3, degree_v + 1))
    for idx in range(us.shape[0]):
        u = us[idx]
        v = vs[idx]
        su = _find_span_nb(knots_u, degree_u, n_u, u)
        sv = _find_span_nb(knots_v, degree_v, n_v, v)
        _ders_basis_nb(knots_u, degree_u, su, u, 2, bu)
        _ders_basis_nb(knots_v, degree_v, sv, v, 2, bv)
        for slot in range(6):
            if slot == 0:
                a, b = 0, 0
            elif slot == 1:
                a, b = 1, 0
            elif slot == 2:
                a, b = 0, 1
            elif slot == 3:
                a, b = 2, 0
            elif slot == 4:
                a, b = 1, 1
            else:
                a, b = 0, 2
            for c in range(3):
                acc = 0.0
                for i in range(degree_u + 1):
                    wi = bu[a, i]
                    if wi != 0.0:
                        row = 0.0
                        for j in range(degree_v + 1):
                            row += bv[b, j] * ctrl[su - degree_u + i,
                                                   sv - degree_v + j, c]
                        acc += wi * row
                out[idx, slot, c] = acc


def surface_jets_batch_numba(knots_u, knots_v, degree_u, degree_v, ctrl,
                             us, vs):
    """Numba backend for batched surface jets."""
    us = np.ascontiguousarray(us, dtype=float)
    vs = np.ascontiguousarray(vs, dtype=float)
    out = np.empty((us.shape[0], 6, 3))
    _surface_jets_nb(knots_u, knots_v, degree_u, degree_v, ctrl, us, vs, out)
    return out


if HAS_NUMBA and not _FORCE_NUMPY:
    surface_jets_batch = surface_jets_batch_numba
    _BACKEND = "numba"
else:
    surface_jets_batch = surface_jets_batch_numpy
    _BACKEND = "numpy"


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return _BACKEND
