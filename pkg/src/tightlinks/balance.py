"""Discrete balance criterion.

A link is balanced when a nonnegative measure on its struts and wall
struts cancels the curvature force: ``A mu = -K``, where column ``j`` of
``A`` is the force field of strut ``j`` and rows of constrained endpoints
are projected onto the constraint directions.  The measure is recovered by
nonnegative least squares and judged by the normalized residual
``|A mu + K| / |K|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConstraintViolation, DomainError
from .geometry import PolyLink, candidate_segment_pairs, curvature_force_array
from .numerics import nnls

__all__ = [
    "Strut",
    "WallStrut",
    "StrutSystem",
    "BalanceReport",
    "NetForce",
    "find_struts",
    "assemble",
    "solve_balance",
    "net_force",
    "vertex_loads",
    "strut_weight_between",
    "DEFAULT_STRUT_TOL",
    "DEFAULT_WALL_TOL",
    "DEFAULT_THRESHOLD",
    "RESIDUAL_FLOOR",
]

DEFAULT_STRUT_TOL = 1e-3
DEFAULT_WALL_TOL = 1e-6
DEFAULT_THRESHOLD = 0.02
# attainable accuracy of the conic solve; smaller normalized residuals are noise
RESIDUAL_FLOOR = 1e-7
_T_SNAP = 1e-9


class Strut(NamedTuple):
    """Closest-point pair ``a -> b``; each end is ``(component, segment, t)``."""

    a: tuple
    b: tuple
    length: float
    direction: np.ndarray


class WallStrut(NamedTuple):
    component: int
    vertex: int
    obstacle: int
    normal: np.ndarray


@dataclass
class StrutSystem:
    struts: list
    wall_struts: list
    thickness: float
    strut_tol: float = DEFAULT_STRUT_TOL
    wall_tol: float = DEFAULT_WALL_TOL


@dataclass
class BalanceReport:
    mu: np.ndarray
    residual_norm: float
    normalized_residual: float
    verdict: str
    system: StrutSystem
    vertex_residuals: list = field(default_factory=list)
    threshold: float = DEFAULT_THRESHOLD

    @property
    def balanced(self) -> bool:
        return self.verdict == "balanced"

    @property
    def strut_mu(self) -> np.ndarray:
        return self.mu[: len(self.system.struts)]

    @property
    def wall_mu(self) -> np.ndarray:
        return self.mu[len(self.system.struts):]

    def to_dict(self) -> dict:
        S = self.system
        return {
            "thickness": S.thickness,
            "strut_count": len(S.struts),
            "wall_count": len(S.wall_struts),
            "residual_norm": self.residual_norm,
            "normalized_residual": self.normalized_residual,
            "verdict": self.verdict,
            "struts": [
                {"a": [int(s.a[0]), int(s.a[1]), float(s.a[2])],
                 "b": [int(s.b[0]), int(s.b[1]), float(s.b[2])],
                 "length": float(s.length), "mu": float(m)}
                for s, m in zip(S.struts, self.strut_mu)
            ],
            "walls": [
                {"comp": int(w.component), "vertex": int(w.vertex),
                 "obstacle": int(w.obstacle), "mu": float(m)}
                for w, m in zip(S.wall_struts, self.wall_mu)
            ],
        }


def _endpoint_keys(L, comp, seg, t):
    """Rows ``(component, on_segment, index, t)``: ends within ``_T_SNAP`` of a vertex snap to it."""
    n = np.array([c.n_vertices for c in L.components])[comp]
    at_end = t >= 1 - _T_SNAP
    vertex = (t <= _T_SNAP) | at_end
    idx = np.where(at_end, (seg + 1) % n, seg)
    tr = np.where(vertex, 0.0, np.round(t, 9))
    return np.stack([comp, (~vertex).astype(float), idx, tr], axis=1).astype(float)


def _points_on_segments(L, comp, seg, t):
    starts = np.concatenate([c.segment_starts() for c in L.components])
    ends = np.concatenate([c.segment_ends() for c in L.components])
    base = np.concatenate([[0], np.cumsum([c.n_segments for c in L.components])])
    g = base[comp] + seg
    return starts[g] + t[:, None] * (ends[g] - starts[g])


def _band_mask(L, ci, si, cj, sj, dist, thickness, band=0.25):
    """Keep pairs within ``band * h^2 / thickness`` of the closest partner along either index.

    For fixed segment ``a`` the distances to consecutive partner segments
    grow quadratically away from the closest one, on the scale of the
    squared edge length ``h``.  A strict local minimum keeps too few
    contacts for the discrete forces to balance, while the whole strut
    window keeps far too many.  Dividing by the thickness keeps the band
    invariant under scaling.
    """
    lens = [np.linalg.norm(c.edges(), axis=1) for c in L.components]
    nseg = np.array([len(x) for x in lens])
    base = np.concatenate([[0], np.cumsum(nseg)])
    all_lens = np.concatenate(lens)
    ga = base[ci] + si
    gb = base[cj] + sj
    h = np.maximum(all_lens[ga], all_lens[gb])
    K = len(L.components)
    keep = np.zeros(dist.size, bool)
    for g, other in ((ga, cj), (gb, ci)):
        key = g.astype(np.int64) * K + other
        uniq, inv = np.unique(key, return_inverse=True)
        best = np.full(uniq.size, np.inf)
        np.minimum.at(best, inv, dist)
        keep |= dist <= best[inv] + band * h * h / thickness
    return keep


def _vertex_pairs(L: PolyLink, radius: float):
    """Vertex pairs on distinct components within ``radius``, locally minimal on one side.

    A pair ``(a, b)`` is kept when ``b`` is a nearest vertex to ``a`` among
    ``b``'s chain neighbours, or vice versa.  Such pairs matter at hubs where
    many contacts meet a single vertex: there the closest points on the
    adjacent segments sit off the vertex and their struts would pull the two
    segments apart.
    """
    from scipy.spatial import cKDTree

    comps = L.components
    trees = [cKDTree(c.vertices) for c in comps]
    out = []
    for i in range(len(comps)):
        for j in range(i + 1, len(comps)):
            m = trees[i].sparse_distance_matrix(trees[j], radius, output_type="ndarray")
            if m.size == 0:
                continue
            va, vb = m["i"].astype(int), m["j"].astype(int)
            d = np.sqrt(np.sum((comps[i].vertices[va] - comps[j].vertices[vb]) ** 2, axis=1))
            keep = np.zeros(d.size, bool)
            for side, (c_fix, c_mov, fix, mov) in enumerate(((i, j, va, vb), (j, i, vb, va))):
                cm = comps[c_mov]
                n = cm.n_vertices
                ok = np.ones(d.size, bool)
                for step in (-1, 1):
                    nb = mov + step
                    valid = cm.closed | ((nb >= 0) & (nb < n))
                    nb = nb % n
                    other = comps[c_fix].vertices[fix]
                    dn = np.linalg.norm(cm.vertices[nb] - other, axis=1)
                    ok &= ~valid | (dn >= d * (1 - 1e-12))
                keep |= ok
            for a, b_, dd in zip(va[keep], vb[keep], d[keep]):
                out.append((i, int(a), j, int(b_), float(dd)))
    return out


def _vertex_as_segment(c, v):
    if v < c.n_segments:
        return v, 0.0
    return v - 1, 1.0


def find_struts(L: PolyLink, strut_tol: float = DEFAULT_STRUT_TOL,
                wall_tol: float = DEFAULT_WALL_TOL, prune: bool = True) -> StrutSystem:
    """Struts within ``thickness * (1 + strut_tol)`` and vertices within ``wall_tol`` of a wall.

    With ``prune`` a segment pair is kept only if its distance is close
    to the smallest one found for either of its segments (see
    :func:`_band_mask`); other pairs in the window are near-duplicates.
    Locally closest vertex pairs are added as well.  Struts sharing both
    endpoints (after snapping to vertices) are merged, keeping the shortest.
    """
    if not strut_tol > 0 or not wall_tol > 0:
        raise DomainError("strut_tol and wall_tol must be positive")
    cand = candidate_segment_pairs(L, slack=strut_tol)
    # the candidates include the closest pair, so this equals link_thickness(L)
    thickness = float(np.min(cand[4])) if cand[4].size else math.inf
    if thickness == 0.0:
        raise ConstraintViolation("components touch: link-thickness is zero")
    struts = []
    if math.isfinite(thickness):
        ci, si, cj, sj, dist, s, t = cand
        keep = dist <= thickness * (1 + strut_tol)
        ci, si, cj, sj, dist, s, t = (a[keep] for a in (ci, si, cj, sj, dist, s, t))
        if prune and dist.size:
            keep = _band_mask(L, ci, si, cj, sj, dist, thickness)
            ci, si, cj, sj, dist, s, t = (a[keep] for a in (ci, si, cj, sj, dist, s, t))
        extra = _vertex_pairs(L, thickness * (1 + strut_tol))
        if extra:
            ea = [_vertex_as_segment(L.components[e[0]], e[1]) for e in extra]
            eb = [_vertex_as_segment(L.components[e[2]], e[3]) for e in extra]
            ci = np.concatenate([ci, [e[0] for e in extra]]).astype(int)
            si = np.concatenate([si, [x[0] for x in ea]]).astype(int)
            s = np.concatenate([s, [x[1] for x in ea]])
            cj = np.concatenate([cj, [e[2] for e in extra]]).astype(int)
            sj = np.concatenate([sj, [x[0] for x in eb]]).astype(int)
            t = np.concatenate([t, [x[1] for x in eb]])
            dist = np.concatenate([dist, [e[4] for e in extra]])
        order = np.argsort(dist, kind="stable")
        keys = np.concatenate([_endpoint_keys(L, ci, si, s), _endpoint_keys(L, cj, sj, t)], axis=1)
        _, first = np.unique(keys[order], axis=0, return_index=True)
        k = np.sort(order[first])
        ci, si, cj, sj, dist, s, t = (a[k] for a in (ci, si, cj, sj, dist, s, t))
        pa = _points_on_segments(L, ci, si, s)
        pb = _points_on_segments(L, cj, sj, t)
        d = pb - pa
        d /= np.linalg.norm(d, axis=1)[:, None]
        struts = [Strut((int(a0), int(a1), float(a2)), (int(b0), int(b1), float(b2)), float(ln), dd)
                  for a0, a1, a2, b0, b1, b2, ln, dd in zip(ci, si, s, cj, sj, t, dist, d)]
    walls = []
    for comp, (c, obs) in enumerate(zip(L.components, L.obstacles)):
        for j, o in enumerate(obs):
            for v in np.nonzero(o.value(c.vertices) <= wall_tol)[0]:
                walls.append(WallStrut(comp, int(v), j, o.normal.copy()))
    return StrutSystem(struts, walls, thickness, strut_tol, wall_tol)


class _Rows:
    """Row layout: three rows per free vertex, projected rows for constrained endpoints."""

    def __init__(self, L: PolyLink):
        self.offsets = L.vertex_offsets()
        nv = int(self.offsets[-1])
        self.proj = {}
        for (ci, end), c in L.endpoint_constraints.items():
            v = 0 if end == "start" else L.components[ci].n_vertices - 1
            self.proj[int(self.offsets[ci] + v)] = c.basis
        counts = np.full(nv, 3)
        for g, basis in self.proj.items():
            counts[g] = basis.shape[0]
        self.start = np.concatenate([[0], np.cumsum(counts)])
        self.n_rows = int(self.start[-1])

    def entries(self, g, vec):
        """Row indices and values of a 3-vector force applied at global vertex ``g``."""
        if g in self.proj:
            basis = self.proj[g]
            return self.start[g] + np.arange(basis.shape[0]), basis @ vec
        return self.start[g] + np.arange(3), np.asarray(vec, float)


def assemble(L: PolyLink, S: StrutSystem):
    """Sparse rigidity matrix ``A`` (rows x columns) and right-hand side ``b = -K``."""
    rows = _Rows(L)
    off = rows.offsets
    nverts = np.array([c.n_vertices for c in L.components])
    gs, cols, vecs = [], [], []
    ns = len(S.struts)
    if ns:
        d = np.array([st.direction for st in S.struts])
        j = np.arange(ns)
        for end, sign in ((np.array([st.a for st in S.struts]), -1.0),
                          (np.array([st.b for st in S.struts]), 1.0)):
            comp, seg, t = end[:, 0].astype(int), end[:, 1].astype(int), end[:, 2]
            for v, w in ((seg, 1 - t), ((seg + 1) % nverts[comp], t)):
                nz = w != 0.0
                gs.append(off[comp[nz]] + v[nz])
                cols.append(j[nz])
                vecs.append(sign * w[nz, None] * d[nz])
    if S.wall_struts:
        gs.append(np.array([off[w.component] + w.vertex for w in S.wall_struts]))
        cols.append(ns + np.arange(len(S.wall_struts)))
        vecs.append(np.array([w.normal for w in S.wall_struts]))
    ncol = ns + len(S.wall_struts)
    if gs:
        g, col, vec = np.concatenate(gs), np.concatenate(cols), np.concatenate(vecs)
        proj = np.isin(g, list(rows.proj))
        ri = [(rows.start[g[~proj]][:, None] + np.arange(3)).ravel()]
        ci = [np.repeat(col[~proj], 3)]
        vals = [vec[~proj].ravel()]
        for k in np.nonzero(proj)[0]:
            r, x = rows.entries(int(g[k]), vec[k])
            ri.append(r)
            ci.append(np.full(r.size, col[k]))
            vals.append(x)
        A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(ri), np.concatenate(ci))),
                          shape=(rows.n_rows, ncol)).tocsc()
    else:
        A = sp.csc_matrix((rows.n_rows, ncol))
    b = np.empty(rows.n_rows)
    for comp, c in enumerate(L.components):
        K = curvature_force_array(c)
        g0 = int(off[comp])
        free = np.ones(c.n_vertices, bool)
        for gv in rows.proj:
            v = gv - g0
            if 0 <= v < c.n_vertices:
                free[v] = False
                r, x = rows.entries(gv, -K[v])
                b[r] = x
        idx = rows.start[g0 + np.nonzero(free)[0]]
        b[(idx[:, None] + np.arange(3)).ravel()] = -K[free].ravel()
    return A, b


def _conic_nnls(A, b, tol=1e-10):
    """``min |A mu - b|`` over ``mu >= 0`` as a second-order cone program.

    Minimising ``t`` subject to ``|A mu - b| <= t`` controls the residual
    itself rather than its square, so the attainable accuracy is close to
    ``tol`` instead of ``sqrt(tol)``.
    """
    import clarabel

    m, n = A.shape
    P = sp.csc_matrix((n + 1, n + 1))
    q = np.zeros(n + 1)
    q[n] = 1.0
    Ac = sp.vstack([
        sp.csc_matrix(([-1.0], ([0], [n])), shape=(1, n + 1)),
        sp.hstack([A, sp.csc_matrix((m, 1))]),
        sp.hstack([-sp.identity(n), sp.csc_matrix((n, 1))]),
    ], format="csc")
    bc = np.concatenate([[0.0], b, np.zeros(n)])
    st = clarabel.DefaultSettings()
    st.verbose = False
    st.tol_gap_abs = st.tol_gap_rel = st.tol_feas = tol
    cones = [clarabel.SecondOrderConeT(m + 1), clarabel.NonnegativeConeT(n)]
    sol = clarabel.DefaultSolver(P, q, Ac, bc, cones, st).solve()
    status = str(sol.status)
    if "Solved" not in status:
        raise ConstraintViolation(f"conic NNLS solve failed with status {status}")
    return np.maximum(np.asarray(sol.x[:n]), 0.0)


def solve_balance(L: PolyLink, strut_tol: float = DEFAULT_STRUT_TOL,
                  verdict_threshold: float = DEFAULT_THRESHOLD,
                  wall_tol: float = DEFAULT_WALL_TOL, use_walls: bool = True,
                  solver: str = "auto") -> BalanceReport:
    """Detect struts, assemble ``A mu = -K`` and judge the best nonnegative ``mu``.

    ``solver`` is ``"dense"`` (Lawson-Hanson), ``"conic"`` (sparse cone
    program) or ``"auto"``, which uses the dense solver for small systems.
    """
    if not verdict_threshold > 0:
        raise DomainError("verdict_threshold must be positive")
    S = find_struts(L, strut_tol, wall_tol)
    if not use_walls:
        S = StrutSystem(S.struts, [], S.thickness, S.strut_tol, S.wall_tol)
    A, b = assemble(L, S)
    nb = float(np.linalg.norm(b))
    n = A.shape[1]
    if solver == "auto":
        solver = "dense" if n <= 200 and A.shape[0] <= 2000 else "conic"
    if n == 0:
        mu = np.zeros(0)
    elif solver == "dense":
        mu, _ = nnls(A.toarray(), b)
    elif solver == "conic":
        mu = _conic_nnls(A, b)
    else:
        raise DomainError(f"unknown solver {solver!r}")
    r = A @ mu - b if n else -b
    res = float(np.linalg.norm(r))
    normalized = res / nb if nb > 0 else 0.0
    rows = _Rows(L)
    per_vertex = [r[rows.start[g]:rows.start[g + 1]] for g in range(len(rows.start) - 1)]
    verdict = "balanced" if normalized < verdict_threshold else "unbalanced"
    return BalanceReport(mu, res, normalized, verdict, S, per_vertex, verdict_threshold)


class NetForce(NamedTuple):
    strut: np.ndarray
    curvature: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.strut + self.curvature


def vertex_loads(L: PolyLink, report: BalanceReport) -> list:
    """Unprojected strut and wall force (``(N_i, 3)`` array) on every component's vertices."""
    loads = [np.zeros((c.n_vertices, 3)) for c in L.components]
    S = report.system
    for st, m in zip(S.struts, report.strut_mu):
        if m == 0.0:
            continue
        for (comp, seg, t), sign in ((st.a, -1.0), (st.b, 1.0)):
            n = L.components[comp].n_vertices
            loads[comp][seg] += sign * m * (1 - t) * st.direction
            loads[comp][(seg + 1) % n] += sign * m * t * st.direction
    for ws, m in zip(S.wall_struts, report.wall_mu):
        loads[ws.component][ws.vertex] += m * ws.normal
    return loads


def net_force(L: PolyLink, report: BalanceReport, component: int, vertices: Sequence[int]) -> NetForce:
    """Total strut force and total curvature force over a set of vertices of one component."""
    idx = np.asarray(list(vertices), int)
    loads = vertex_loads(L, report)[component]
    K = curvature_force_array(L.components[component])
    return NetForce(loads[idx].sum(axis=0), K[idx].sum(axis=0))


def strut_weight_between(report: BalanceReport, comp_a: int, comp_b: int) -> float:
    """Total ``mu`` on struts joining two components."""
    pair = {comp_a, comp_b}
    return float(sum(m for st, m in zip(report.system.struts, report.strut_mu)
                     if {st.a[0], st.b[0]} == pair))
