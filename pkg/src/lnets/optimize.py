"""Sparse Levenberg-Marquardt refinement of an initialized net.

Variable layout: one block of four scalars per face sphere
(``cx, cy, cz, r``, faces in row-major order) followed by one block of
four per vertex plane (``nx, ny, nz, h``, vertices in row-major order).

Residual blocks appear in the fixed order unit, contact, segment
fairness, arc fairness, proximity, tangency, tangential distance,
regularization; blocks whose weight is zero are omitted from the residual
vector (raw energies are still reported for all of them). The
regularization block doubles as the Levenberg damping term: its residual
vanishes at the expansion point, so it contributes exactly ``w_reg * I``
to the normal equations. It therefore stays active in the contact-only
polishing pass as solver damping even though all other auxiliary energy
weights are zero there.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bspline import BSplineSurface, project_points
from .lnet import CORNERS, LNet

BLOCK_ORDER = ("unit", "oc", "lfair", "gfair", "prox", "tan", "td", "reg")


@dataclass(frozen=True)
class Weights:
    """Energy weights; the defaults are the tuning the pipeline ships with."""

    w_oc: float = 1.0
    w_lfair: float = 1e-3
    w_gfair: float = 1e-3
    w_prox: float = 1e-4
    w_tan: float = 1e-4
    w_td: float = 1e-5
    w_reg: float = 1e-4
    w_unit: float = 10.0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def of(self, kind: str) -> float:
        return getattr(self, f"w_{kind}")


@dataclass(frozen=True)
class Schedule:
    """Iteration counts and the fairness decay rule.

    Fairness weights are multiplied by ``fairness_decay`` every
    ``decay_every`` iterations; after the main iterations a contact-only
    pass of ``final_pass_iters`` steps runs with only the contact and
    unit-normal energies (plus solver damping). Footpoints are refreshed
    every iteration. The main loop also stops early when the relative
    total-energy change stays below ``converge_rtol`` for
    ``converge_patience`` consecutive iterations.
    """

    max_iters: int = 100
    fairness_decay: float = 0.1
    decay_every: int = 10
    final_pass_iters: int = 20
    converge_rtol: float = 1e-14
    converge_patience: int = 3

    def __post_init__(self):
        if self.max_iters < 0 or self.final_pass_iters < 0:
            raise ValueError("iteration counts must be nonnegative")
        if self.decay_every < 1 or self.converge_patience < 1:
            raise ValueError("decay_every and converge_patience must be >= 1")


def pack(net: LNet) -> np.ndarray:
    """Flatten a net into the documented variable vector."""
    fr, fc = net.face_shape
    vr, vc = net.vertex_shape
    sph = np.empty((fr * fc, 4))
    sph[:, :3] = net.centers.reshape(-1, 3)
    sph[:, 3] = net.radii.ravel()
    pl = np.empty((vr * vc, 4))
    pl[:, :3] = net.normals.reshape(-1, 3)
    pl[:, 3] = net.intercepts.ravel()
    return np.concatenate([sph.ravel(), pl.ravel()])


def unpack(x: np.ndarray, vertex_shape) -> LNet:
    """Rebuild a net from a variable vector."""
    vr, vc = vertex_shape
    fr, fc = vr - 1, vc - 1
    sph = x[:4 * fr * fc].reshape(fr, fc, 4)
    pl = x[4 * fr * fc:].reshape(vr, vc, 4)
    return LNet(pl[..., :3], pl[..., 3], sph[..., :3], sph[..., 3])


class ResidualSystem:
    """Residual blocks and sparse Jacobian layout for one net shape.

    Holds the static incidence index arrays, the current weights, the
    previous-iterate vector used by the regularization block and the
    frozen footpoint data of the proximity blocks.
    """

    def __init__(self, net: LNet, surface: BSplineSurface, weights: Weights,
                 x_prev: np.ndarray | None = None):
        self.surface = surface
        self.weights = weights
        vr, vc = net.vertex_shape
        fr, fc = net.face_shape
        self.vertex_shape = (vr, vc)
        self.n_faces = fr * fc
        self.n_planes = vr * vc
        self.n_vars = 4 * (self.n_faces + self.n_planes)
        self.plane_base = 4 * self.n_faces
        self.x0 = pack(net)
        self.x_prev = self.x0.copy() if x_prev is None else np.asarray(
            x_prev, dtype=float).copy()

        fi, fj = np.meshgrid(np.arange(fr), np.arange(fc), indexing="ij")

        def fflat(i, j):
            return (i * fc + j).ravel()

        def vflat(i, j):
            return (i * vc + j).ravel()

        # Contact incidences: faces row-major, corners in CORNERS order.
        corners = np.stack([vflat(fi + da, fj + db) for da, db in CORNERS],
                           axis=1)
        self.oc_face = np.repeat(fflat(fi, fj), 4)
        self.oc_vert = corners.reshape(-1)

        # Fairness triples of consecutive faces (axis 0 first).
        tri_f, tri_p = [], []
        if fr >= 3:
            ti, tj = np.meshgrid(np.arange(fr - 2), np.arange(fc),
                                 indexing="ij")
            tri_f.append(np.stack([fflat(ti, tj), fflat(ti + 1, tj),
                                   fflat(ti + 2, tj)], axis=1))
            tri_p.append(np.stack([vflat(ti + 1, tj), vflat(ti + 2, tj),
                                   vflat(ti + 1, tj + 1),
                                   vflat(ti + 2, tj + 1)], axis=1))
        if fc >= 3:
            ti, tj = np.meshgrid(np.arange(fr), np.arange(fc - 2),
                                 indexing="ij")
            tri_f.append(np.stack([fflat(ti, tj), fflat(ti, tj + 1),
                                   fflat(ti, tj + 2)], axis=1))
            tri_p.append(np.stack([vflat(ti, tj + 1), vflat(ti, tj + 2),
                                   vflat(ti + 1, tj + 1),
                                   vflat(ti + 1, tj + 2)], axis=1))
        self.lf_faces = (np.concatenate(tri_f) if tri_f
                         else np.empty((0, 3), dtype=int))
        self.lf_planes = (np.concatenate(tri_p) if tri_p
                          else np.empty((0, 4), dtype=int))

        # Fairness triples of consecutive planes with their four spheres.
        gtri_p, gtri_s = [], []
        if vr >= 3 and fc >= 2:
            ti, tj = np.meshgrid(np.arange(vr - 2), np.arange(1, fc),
                                 indexing="ij")
            gtri_p.append(np.stack([vflat(ti, tj), vflat(ti + 1, tj),
                                    vflat(ti + 2, tj)], axis=1))
            gtri_s.append(np.stack([fflat(ti, tj - 1), fflat(ti + 1, tj - 1),
                                    fflat(ti + 1, tj), fflat(ti, tj)],
                                   axis=1))
        if vc >= 3 and fr >= 2:
            ti, tj = np.meshgrid(np.arange(1, fr), np.arange(vc - 2),
                                 indexing="ij")
            gtri_p.append(np.stack([vflat(ti, tj), vflat(ti, tj + 1),
                                    vflat(ti, tj + 2)], axis=1))
            gtri_s.append(np.stack([fflat(ti - 1, tj), fflat(ti - 1, tj + 1),
                                    fflat(ti, tj + 1), fflat(ti, tj)],
                                   axis=1))
        # Column order below: s0, s1, s2, s3.
        self.gf_planes = (np.concatenate(gtri_p) if gtri_p
                          else np.empty((0, 3), dtype=int))
        self.gf_spheres = (np.concatenate(gtri_s) if gtri_s
                           else np.empty((0, 4), dtype=int))

        # Adjacent sphere pairs (axis 0 pairs first).
        pairs = []
        if fr >= 2:
            ti, tj = np.meshgrid(np.arange(fr - 1), np.arange(fc),
                                 indexing="ij")
            pairs.append(np.stack([fflat(ti, tj), fflat(ti + 1, tj)], axis=1))
        if fc >= 2:
            ti, tj = np.meshgrid(np.arange(fr), np.arange(fc - 1),
                                 indexing="ij")
            pairs.append(np.stack([fflat(ti, tj), fflat(ti, tj + 1)], axis=1))
        self.td_pairs = (np.concatenate(pairs) if pairs
                         else np.empty((0, 2), dtype=int))

        self.foot_x = None
        self.foot_n = None
        self.foot_uv = None
        self.footpoint_fallbacks = 0
        self.refresh_footpoints(self.x0)

    # -- state ------------------------------------------------------------

    def set_weights(self, weights: Weights) -> None:
        self.weights = weights

    def _split(self, x: np.ndarray):
        sph = x[:self.plane_base].reshape(self.n_faces, 4)
        pl = x[self.plane_base:].reshape(self.n_planes, 4)
        return sph[:, :3], sph[:, 3], pl[:, :3], pl[:, 3]

    def contact_points_of(self, x: np.ndarray) -> np.ndarray:
        """Sphere/plane contact points of every incidence, ``(K, 3)``."""
        c, r, n, _ = self._split(x)
        return (c[self.oc_face]
                - r[self.oc_face, None] * n[self.oc_vert])

    def refresh_footpoints(self, x: np.ndarray) -> None:
        """Project all contact points onto the reference surface.

        Projections warm-start from the previous parameters once
        available; fallbacks to grid seeding are counted.
        """
        pts = self.contact_points_of(x)
        uv, feet, normals, conv = project_points(self.surface, pts,
                                                 seeds_uv=self.foot_uv)
        if not np.all(conv) and self.foot_uv is not None:
            # Re-seed the stragglers from the coarse grid.
            bad = ~conv
            uv_b, feet_b, n_b, conv_b = project_points(self.surface, pts[bad])
            uv[bad] = uv_b
            feet[bad] = feet_b
            normals[bad] = n_b
            conv[bad] = conv_b
        self.footpoint_fallbacks = int(np.sum(~conv))
        self.foot_uv = uv
        self.foot_x = feet
        self.foot_n = normals

    # -- residuals ----------------------------------------------------------

    def _block_raw(self, x: np.ndarray, kind: str) -> np.ndarray:
        """Unweighted residual entries of one block kind."""
        c, r, n, h = self._split(x)
        if kind == "unit":
            return np.einsum("pc,pc->p", n, n) - 1.0
        if kind == "oc":
            return (np.einsum("kc,kc->k", c[self.oc_face], n[self.oc_vert])
                    + h[self.oc_vert] - r[self.oc_face])
        if kind == "lfair":
            if self.lf_faces.shape[0] == 0:
                return np.empty(0)
            ci = c[self.lf_faces[:, 0]]
            cj = c[self.lf_faces[:, 1]]
            ck = c[self.lf_faces[:, 2]]
            ri = r[self.lf_faces[:, 0], None]
            rj = r[self.lf_faces[:, 1], None]
            rk = r[self.lf_faces[:, 2], None]
            n0 = n[self.lf_planes[:, 0]]
            n1 = n[self.lf_planes[:, 1]]
            n3 = n[self.lf_planes[:, 2]]
            n2 = n[self.lf_planes[:, 3]]
            va = 2.0 * cj - ci - ck + (ri - rj) * n0 + (rk - rj) * n1
            vb = 2.0 * cj - ci - ck + (ri - rj) * n3 + (rk - rj) * n2
            return np.concatenate([va, vb], axis=1).reshape(-1)
        if kind == "gfair":
            if self.gf_planes.shape[0] == 0:
                return np.empty(0)
            ni = n[self.gf_planes[:, 0]]
            nj = n[self.gf_planes[:, 1]]
            nk = n[self.gf_planes[:, 2]]
            r0 = r[self.gf_spheres[:, 0], None]
            r1 = r[self.gf_spheres[:, 1], None]
            r2 = r[self.gf_spheres[:, 2], None]
            r3 = r[self.gf_spheres[:, 3], None]
            va = r0 * (ni - nj) + r1 * (nk - nj)
            vb = r3 * (ni - nj) + r2 * (nk - nj)
            return np.concatenate([va, vb], axis=1).reshape(-1)
        if kind == "prox":
            return (self.contact_points_of(x) - self.foot_x).reshape(-1)
        if kind == "tan":
            diff = self.contact_points_of(x) - self.foot_x
            return np.einsum("kc,kc->k", diff, self.foot_n)
        if kind == "td":
            if self.td_pairs.shape[0] == 0:
                return np.empty(0)
            d = c[self.td_pairs[:, 0]] - c[self.td_pairs[:, 1]]
            dr = r[self.td_pairs[:, 0]] - r[self.td_pairs[:, 1]]
            return np.einsum("kc,kc->k", d, d) - dr * dr
        if kind == "reg":
            return x - self.x_prev
        raise ValueError(f"unknown block kind {kind!r}")

    def active_blocks(self):
        return tuple(k for k in BLOCK_ORDER if self.weights.of(k) > 0.0)

    def residual(self, x: np.ndarray) -> np.ndarray:
        """Stacked residual vector, each block scaled by sqrt(weight)."""
        parts = []
        for kind in self.active_blocks():
            parts.append(np.sqrt(self.weights.of(kind))
                         * self._block_raw(x, kind))
        return np.concatenate(parts) if parts else np.empty(0)

    def block_slices(self) -> dict:
        """Row ranges of the active blocks in the residual vector."""
        sizes = {"unit": self.n_planes, "oc": self.oc_face.size,
                 "lfair": 6 * self.lf_faces.shape[0],
                 "gfair": 6 * self.gf_planes.shape[0],
                 "prox": 3 * self.oc_face.size, "tan": self.oc_face.size,
                 "td": self.td_pairs.shape[0], "reg": self.n_vars}
        out = {}
        at = 0
        for kind in self.active_blocks():
            out[kind] = slice(at, at + sizes[kind])
            at += sizes[kind]
        return out

    def raw_energies(self, x: np.ndarray) -> dict:
        """Unweighted sum of squares of every block kind."""
        out = {}
        for kind in BLOCK_ORDER:
            res = self._block_raw(x, kind)
            out[kind] = float(res @ res)
        return out

    def total_energy(self, x: np.ndarray) -> float:
        raw = self.raw_energies(x)
        return float(sum(self.weights.of(k) * raw[k] for k in BLOCK_ORDER))

    def max_contact_residual(self, x: np.ndarray) -> float:
        oc = self._block_raw(x, "oc")
        return float(np.max(np.abs(oc))) if oc.size else 0.0

    # -- Jacobian -----------------------------------------------------------

    def _sph_col(self, f, comp):
        return 4 * f + comp

    def _pl_col(self, p, comp):
        return self.plane_base + 4 * p + comp

    def _jac_triplets(self, x: np.ndarray):
        c, r, n, h = self._split(x)
        rows, cols, vals = [], [], []
        at = 0

        def add(rr, cc, vv):
            rows.append(np.asarray(rr, dtype=int).ravel())
            cols.append(np.asarray(cc, dtype=int).ravel())
            vals.append(np.asarray(vv, dtype=float).ravel())

        comp = np.arange(3)
        for kind in self.active_blocks():
            s = np.sqrt(self.weights.of(kind))
            if kind == "unit":
                rr = at + np.arange(self.n_planes)
                add(np.repeat(rr, 3),
                    self._pl_col(np.repeat(np.arange(self.n_planes), 3),
                                 np.tile(comp, self.n_planes)),
                    2.0 * s * n.ravel())
                at += self.n_planes
            elif kind == "oc":
                k = self.oc_face.size
                rr = at + np.arange(k)
                add(np.repeat(rr, 3), self._sph_col(self.oc_face[:, None], comp),
                    s * n[self.oc_vert])
                add(rr, self._sph_col(self.oc_face, 3), np.full(k, -s))
                add(np.repeat(rr, 3), self._pl_col(self.oc_vert[:, None], comp),
                    s * c[self.oc_face])
                add(rr, self._pl_col(self.oc_vert, 3), np.full(k, s))
                at += k
            elif kind == "lfair":
                t = self.lf_faces.shape[0]
                if t:
                    f_i, f_j, f_k = (self.lf_faces[:, m] for m in range(3))
                    base = at + 6 * np.arange(t)
                    for half, (pa, pb) in enumerate(((0, 1), (2, 3))):
                        rr = (base[:, None] + 3 * half + comp)  # (t, 3)
                        na = n[self.lf_planes[:, pa]]
                        nb = n[self.lf_planes[:, pb]]
                        add(rr, self._sph_col(f_i[:, None], comp),
                            np.full((t, 3), -s))
                        add(rr, self._sph_col(f_j[:, None], comp),
                            np.full((t, 3), 2.0 * s))
                        add(rr, self._sph_col(f_k[:, None], comp),
                            np.full((t, 3), -s))
                        add(rr, np.broadcast_to(
                            self._sph_col(f_i, 3)[:, None], (t, 3)), s * na)
                        add(rr, np.broadcast_to(
                            self._sph_col(f_j, 3)[:, None], (t, 3)),
                            -s * (na + nb))
                        add(rr, np.broadcast_to(
                            self._sph_col(f_k, 3)[:, None], (t, 3)), s * nb)
                        ri = r[f_i, None]
                        rj = r[f_j, None]
                        rk = r[f_k, None]
                        add(rr, self._pl_col(self.lf_planes[:, pa][:, None],
                                             comp),
                            s * np.broadcast_to(ri - rj, (t, 3)))
                        add(rr, self._pl_col(self.lf_planes[:, pb][:, None],
                                             comp),
                            s * np.broadcast_to(rk - rj, (t, 3)))
                at += 6 * t
            elif kind == "gfair":
                t = self.gf_planes.shape[0]
                if t:
                    p_i, p_j, p_k = (self.gf_planes[:, m] for m in range(3))
                    ni = n[p_i]
                    nj = n[p_j]
                    nk = n[p_k]
                    base = at + 6 * np.arange(t)
                    for half, (sa, sb) in enumerate(((0, 1), (3, 2))):
                        rr = base[:, None] + 3 * half + comp
                        fa = self.gf_spheres[:, sa]
                        fb = self.gf_spheres[:, sb]
                        ra = r[fa, None]
                        rb = r[fb, None]
                        add(rr, np.broadcast_to(
                            self._sph_col(fa, 3)[:, None], (t, 3)),
                            s * (ni - nj))
                        add(rr, np.broadcast_to(
                            self._sph_col(fb, 3)[:, None], (t, 3)),
                            s * (nk - nj))
                        add(rr, self._pl_col(p_i[:, None], comp),
                            s * np.broadcast_to(ra, (t, 3)))
                        add(rr, self._pl_col(p_j[:, None], comp),
                            -s * np.broadcast_to(ra + rb, (t, 3)))
                        add(rr, self._pl_col(p_k[:, None], comp),
                            s * np.broadcast_to(rb, (t, 3)))
                at += 6 * t
            elif kind == "prox":
                k = self.oc_face.size
                rr = (at + 3 * np.arange(k))[:, None] + comp
                add(rr, self._sph_col(self.oc_face[:, None], comp),
                    np.full((k, 3), s))
                add(rr, np.broadcast_to(
                    self._sph_col(self.oc_face, 3)[:, None], (k, 3)),
                    -s * n[self.oc_vert])
                add(rr, self._pl_col(self.oc_vert[:, None], comp),
                    -s * np.broadcast_to(r[self.oc_face, None], (k, 3)))
                at += 3 * k
            elif kind == "tan":
                k = self.oc_face.size
                rr = at + np.arange(k)
                add(np.repeat(rr, 3), self._sph_col(self.oc_face[:, None], comp),
                    s * self.foot_n)
                add(rr, self._sph_col(self.oc_face, 3),
                    -s * np.einsum("kc,kc->k", n[self.oc_vert], self.foot_n))
                add(np.repeat(rr, 3), self._pl_col(self.oc_vert[:, None], comp),
                    -s * r[self.oc_face, None] * self.foot_n)
                at += k
            elif kind == "td":
                k = self.td_pairs.shape[0]
                if k:
                    rr = at + np.arange(k)
                    fa = self.td_pairs[:, 0]
                    fb = self.td_pairs[:, 1]
                    d = c[fa] - c[fb]
                    dr = r[fa] - r[fb]
                    add(np.repeat(rr, 3), self._sph_col(fa[:, None], comp),
                        2.0 * s * d)
                    add(np.repeat(rr, 3), self._sph_col(fb[:, None], comp),
                        -2.0 * s * d)
                    add(rr, self._sph_col(fa, 3), -2.0 * s * dr)
                    add(rr, self._sph_col(fb, 3), 2.0 * s * dr)
                at += k
            elif kind == "reg":
                rr = at + np.arange(self.n_vars)
                add(rr, np.arange(self.n_vars), np.full(self.n_vars, s))
                at += self.n_vars
        return rows, cols, vals, at

    def jacobian(self, x: np.ndarray, mode: str = "analytic") -> sp.csr_matrix:
        """Sparse Jacobian of the scaled residual vector.

        ``analytic`` uses the closed-form partials (the proximity blocks
        treat their footpoints as constants); ``finite_diff`` builds
        central differences with step ``1e-6 * (1 + |x_i|)`` per variable.
        """
        if mode == "analytic":
            rows, cols, vals, n_rows = self._jac_triplets(x)
            if not rows:
                return sp.csr_matrix((0, self.n_vars))
            return sp.coo_matrix(
                (np.concatenate(vals),
                 (np.concatenate(rows), np.concatenate(cols))),
                shape=(n_rows, self.n_vars)).tocsr()
        if mode != "finite_diff":
            raise ValueError(f"unknown jacobian mode {mode!r}")
        x = np.asarray(x, dtype=float)
        base = self.residual(x)
        jac = np.zeros((base.size, x.size))
        for i in range(x.size):
            step = 1e-6 * (1.0 + abs(x[i]))
            xp = x.copy()
            xp[i] += step
            xm = x.copy()
            xm[i] -= step
            jac[:, i] = (self.residual(xp) - self.residual(xm)) / (2.0 * step)
        return sp.csr_matrix(jac)


def assemble(net: LNet, surface: BSplineSurface, weights: Weights,
             x_prev: np.ndarray | None = None) -> ResidualSystem:
    """Residual system for a net, with footpoints frozen at assembly."""
    return ResidualSystem(net, surface, weights, x_prev)


def jacobian(system: ResidualSystem, x: np.ndarray | None = None,
             mode: str = "analytic") -> sp.csr_matrix:
    """Jacobian of an assembled system at ``x`` (default: assembly point)."""
    return system.jacobian(system.x0 if x is None else x, mode)


def solve_normal_equations(jac: sp.spmatrix, res: np.ndarray, mu: float,
                           free: np.ndarray | None = None) -> np.ndarray:
    """Solve ``(J^T J + mu I) d = -J^T res`` by sparse LU factorization.

    ``free`` masks the variables allowed to move; frozen entries of the
    returned step are zero.
    """
    n = jac.shape[1]
    jc = jac.tocsc()
    if free is not None and not np.all(free):
        jc = jc[:, np.flatnonzero(free)]
    a = (jc.T @ jc).tocsc()
    if mu > 0.0:
        a = a + mu * sp.identity(a.shape[0], format="csc")
    lu = spla.splu(a)
    d = lu.solve(-(jc.T @ res))
    if not np.all(np.isfinite(d)):
        raise RuntimeError("singular normal equations")
    if free is not None and not np.all(free):
        full = np.zeros(n)
        full[np.flatnonzero(free)] = d
        return full
    return d


@dataclass
class IterationRecord:
    """Per-iteration log entry of :func:`lm_run`."""

    iteration: int
    phase: str
    e_total: float
    energies: dict
    max_oc: float
    w_lfair: float
    w_gfair: float
    escalations: int
    footpoint_fallbacks: int
    ms: float = field(default=0.0)


def _attempt_step(system: ResidualSystem, x: np.ndarray, res0: np.ndarray,
                  jac_x: sp.spmatrix, free: np.ndarray | None,
                  base_mu: float, max_escalations: int = 8):
    """One damped step with escalation on energy increase or solver failure.

    Returns ``(x_new, escalations)``; falls back to a zero step when no
    damping level yields a non-increasing energy.
    """
    e0 = float(res0 @ res0)
    for k in range(max_escalations + 1):
        mu = 0.0 if k == 0 else base_mu * 10.0 ** k
        try:
            delta = solve_normal_equations(jac_x, res0, mu, free)
        except RuntimeError:
            continue
        x_try = x + delta
        res1 = system.residual(x_try)
        if float(res1 @ res1) <= e0:
            return x_try, k
    return x.copy(), max_escalations + 1


def _run_phase(system: ResidualSystem, x: np.ndarray, weights: Weights,
               schedule: Schedule, n_iters: int, phase: str,
               free: np.ndarray | None, records: list,
               decay_fairness: bool) -> np.ndarray:
    flat_count = 0
    prev_total = None
    for it in range(1, n_iters + 1):
        t0 = time.perf_counter()
        if decay_fairness:
            factor = schedule.fairness_decay ** ((it - 1) // schedule.decay_every)
            w_it = replace(weights, w_lfair=weights.w_lfair * factor,
                           w_gfair=weights.w_gfair * factor)
        else:
            w_it = weights
        system.set_weights(w_it)
        system.refresh_footpoints(x)
        system.x_prev = x.copy()
        res0 = system.residual(x)
        jac_x = system.jacobian(x)
        x, escal = _attempt_step(system, x, res0, jac_x, free, weights.w_reg)
        raw = system.raw_energies(x)
        total = system.total_energy(x)
        records.append(IterationRecord(
            iteration=len(records) + 1, phase=phase, e_total=total,
            energies=raw, max_oc=system.max_contact_residual(x),
            w_lfair=w_it.w_lfair, w_gfair=w_it.w_gfair, escalations=escal,
            footpoint_fallbacks=system.footpoint_fallbacks,
            ms=(time.perf_counter() - t0) * 1e3))
        if prev_total is not None:
            ref = max(abs(prev_total), abs(total), 1e-300)
            if abs(prev_total - total) / ref < schedule.converge_rtol:
                flat_count += 1
                if flat_count >= schedule.converge_patience:
                    break
            else:
                flat_count = 0
        prev_total = total
    return x


def lm_run(net: LNet, surface: BSplineSurface, weights: Weights = Weights(),
           schedule: Schedule = Schedule(), fix_radii: bool = False):
    """Refine a net: main pass with all energies, then contact-only pass.

    ``fix_radii`` freezes every sphere radius at its initial value, which
    is the faithful treatment of an exactly prescribed constant radius.
    Returns the refined net and the list of :class:`IterationRecord`.
    """
    if weights.w_reg <= 0.0:
        raise ValueError("w_reg must be positive: it provides the damping")
    system = assemble(net, surface, weights)
    x = system.x0.copy()
    free = None
    if fix_radii:
        free = np.ones(system.n_vars, dtype=bool)
        free[4 * np.arange(system.n_faces) + 3] = False

    records: list[IterationRecord] = []
    x = _run_phase(system, x, weights, schedule, schedule.max_iters,
                   "main", free, records, decay_fairness=True)
    w_final = Weights(w_oc=weights.w_oc, w_unit=weights.w_unit,
                      w_reg=weights.w_reg, w_lfair=0.0, w_gfair=0.0,
                      w_prox=0.0, w_tan=0.0, w_td=0.0)
    x = _run_phase(system, x, w_final, schedule, schedule.final_pass_iters,
                   "contact", free, records, decay_fairness=False)
    return unpack(x, system.vertex_shape), records


def lm_least_squares(residual_fn, jacobian_fn, x0: np.ndarray,
                     damping: float = 1e-4, max_iters: int = 50,
                     tol: float = 1e-30):
    """Small generic fixed-damping least-squares loop.

    ``tol`` bounds the squared residual norm at which iteration stops.
    Used for self-contained solver tests; the net pipeline goes through
    :func:`lm_run`.
    """
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_iters):
        res = np.asarray(residual_fn(x), dtype=float)
        if float(res @ res) <= tol:
            break
        jac_x = sp.csr_matrix(np.atleast_2d(np.asarray(jacobian_fn(x),
                                                       dtype=float)))
        e0 = float(res @ res)
        for k in range(9):
            mu = damping * 10.0 ** k
            try:
                delta = solve_normal_equations(jac_x, res, mu)
            except RuntimeError:
                continue
            res1 = np.asarray(residual_fn(x + delta), dtype=float)
            if float(res1 @ res1) <= e0:
                x = x + delta
                break
        else:
            break
    return x
