"""Polygonal curves and generalized links.

A :class:`PolyLink` is a list of polygonal components, optional endpoint
constraints on open components, and per-component half-space obstacles.
Lengths are in units of the target link-thickness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConstraintViolation, DomainError

__all__ = [
    "PolyCurve",
    "EndpointConstraint",
    "HalfSpaceObstacle",
    "PolyLink",
    "ForceAtom",
    "length",
    "link_length",
    "turning_angles",
    "total_curvature",
    "curvature_force",
    "curvature_force_array",
    "segment_distance",
    "segment_distances",
    "link_thickness",
    "obstacle_clearance",
    "candidate_segment_pairs",
]

CONSTRAINT_DIM = {"point": 0, "line": 1, "plane": 2}


def _frozen_array(a, shape_tail=None):
    arr = np.array(a, dtype=float)
    if shape_tail is not None and arr.shape[1:] != shape_tail:
        raise DomainError(f"expected array of shape (*, {shape_tail}), got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PolyCurve:
    """Ordered vertex chain in 3-space; ``closed`` adds the segment last -> first."""

    vertices: np.ndarray
    closed: bool = False

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3:
            raise DomainError(f"vertices must have shape (N, 3), got {v.shape}")
        need = 3 if self.closed else 2
        if v.shape[0] < need:
            raise DomainError(f"{'closed' if self.closed else 'open'} curve needs "
                              f">= {need} vertices, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise DomainError("vertices must be finite")
        seg = self._edges(v, self.closed)
        if np.any(np.all(seg == 0.0, axis=1)):
            raise DomainError("consecutive vertices must be distinct")
        object.__setattr__(self, "vertices", _frozen_array(v))

    @staticmethod
    def _edges(v, closed):
        if closed:
            return np.roll(v, -1, axis=0) - v
        return np.diff(v, axis=0)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_segments(self) -> int:
        return self.n_vertices if self.closed else self.n_vertices - 1

    def segment_starts(self) -> np.ndarray:
        return self.vertices[: self.n_segments]

    def segment_ends(self) -> np.ndarray:
        if self.closed:
            return np.roll(self.vertices, -1, axis=0)
        return self.vertices[1:]

    def edges(self) -> np.ndarray:
        return self._edges(self.vertices, self.closed)

    def transformed(self, R=None, shift=None, scale=1.0) -> "PolyCurve":
        v = self.vertices * scale
        if R is not None:
            v = v @ np.asarray(R, float).T
        if shift is not None:
            v = v + np.asarray(shift, float)
        return PolyCurve(v, self.closed)

    def reversed(self) -> "PolyCurve":
        return PolyCurve(self.vertices[::-1].copy(), self.closed)


@dataclass(frozen=True, eq=False)
class EndpointConstraint:
    """Endpoint confined to ``anchor + span(basis)``: a point, line or plane."""

    kind: str
    anchor: np.ndarray
    basis: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def __post_init__(self):
        if self.kind not in CONSTRAINT_DIM:
            raise DomainError(f"unknown constraint kind {self.kind!r}")
        anchor = np.asarray(self.anchor, dtype=float).reshape(3)
        basis = np.asarray(self.basis, dtype=float).reshape(-1, 3)
        if basis.shape[0] != CONSTRAINT_DIM[self.kind]:
            raise DomainError(f"{self.kind} constraint needs {CONSTRAINT_DIM[self.kind]} "
                              f"basis vectors, got {basis.shape[0]}")
        if basis.shape[0] and np.max(np.abs(basis @ basis.T - np.eye(basis.shape[0]))) > 1e-12:
            raise DomainError("constraint basis must be orthonormal")
        object.__setattr__(self, "anchor", _frozen_array(anchor))
        object.__setattr__(self, "basis", _frozen_array(basis))

    @classmethod
    def plane(cls, anchor, normal) -> "EndpointConstraint":
        """Plane through ``anchor`` with the given normal."""
        n = np.asarray(normal, float)
        n = n / np.linalg.norm(n)
        helper = np.eye(3)[int(np.argmin(np.abs(n)))]
        e1 = np.cross(n, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(n, e1)
        return cls("plane", anchor, np.array([e1, e2]))

    def distance(self, p) -> float:
        d = np.asarray(p, float) - self.anchor
        if self.basis.shape[0]:
            d = d - self.basis.T @ (self.basis @ d)
        return float(np.linalg.norm(d))


@dataclass(frozen=True, eq=False)
class HalfSpaceObstacle:
    """Admissible region ``<normal, p> - offset >= 0``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise DomainError("obstacle normal must be a unit vector")
        object.__setattr__(self, "normal", _frozen_array(n))
        object.__setattr__(self, "offset", float(self.offset))

    def value(self, points) -> np.ndarray:
        return np.asarray(points, float) @ self.normal - self.offset


class ForceAtom(NamedTuple):
    component: int
    vertex: int
    vector: np.ndarray


@dataclass(frozen=True, eq=False)
class PolyLink:
    """A generalized link.

    ``endpoint_constraints`` maps ``(component, "start" | "end")`` to an
    :class:`EndpointConstraint`; ``obstacles[i]`` lists the half-spaces that
    component ``i`` must respect.
    """

    components: tuple
    endpoint_constraints: Mapping = field(default_factory=dict)
    obstacles: tuple = ()
    check: bool = True

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise DomainError("a link needs at least one component")
        obstacles = tuple(tuple(o) for o in self.obstacles)
        if not obstacles:
            obstacles = tuple(() for _ in comps)
        if len(obstacles) != len(comps):
            raise DomainError("obstacles must be given per component")
        cons = dict(self.endpoint_constraints)
        for (ci, end) in cons:
            if not 0 <= ci < len(comps):
                raise DomainError(f"constraint on missing component {ci}")
            if end not in ("start", "end"):
                raise DomainError(f"endpoint must be 'start' or 'end', got {end!r}")
            if comps[ci].closed:
                raise DomainError(f"component {ci} is closed and has no endpoints")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "obstacles", obstacles)
        object.__setattr__(self, "endpoint_constraints", cons)
        if self.check:
            self.validate()

    def validate(self, tol: float = 1e-9) -> None:
        for (ci, end), c in self.endpoint_constraints.items():
            v = self.components[ci].vertices
            p = v[0] if end == "start" else v[-1]
            if c.distance(p) > tol:
                raise ConstraintViolation(
                    f"component {ci} {end} point misses its {c.kind} constraint "
                    f"by {c.distance(p):.3g}")
        for ci, obs in enumerate(self.obstacles):
            for j, o in enumerate(obs):
                worst = float(np.min(o.value(self.components[ci].vertices)))
                if worst < -tol:
                    raise ConstraintViolation(
                        f"component {ci} penetrates obstacle {j} by {-worst:.3g}")

    @property
    def n_components(self) -> int:
        return len(self.components)

    def vertex_offsets(self) -> np.ndarray:
        counts = [c.n_vertices for c in self.components]
        return np.concatenate([[0], np.cumsum(counts)])

    def transformed(self, R=None, shift=None, scale=1.0) -> "PolyLink":
        """Image under ``p -> scale * R p + shift`` (constraints and obstacles follow)."""
        R = np.eye(3) if R is None else np.asarray(R, float)
        shift = np.zeros(3) if shift is None else np.asarray(shift, float)
        comps = [c.transformed(R, shift, scale) for c in self.components]
        cons = {}
        for key, c in self.endpoint_constraints.items():
            basis = c.basis @ R.T
            if basis.shape[0] == 2:
                # re-orthonormalise against rounding
                q, _ = np.linalg.qr(basis.T)
                basis = q.T
            elif basis.shape[0] == 1:
                basis = basis / np.linalg.norm(basis)
            cons[key] = EndpointConstraint(c.kind, scale * (R @ c.anchor) + shift, basis)
        obstacles = []
        for obs in self.obstacles:
            new = []
            for o in obs:
                n = R @ o.normal
                n = n / np.linalg.norm(n)
                new.append(HalfSpaceObstacle(n, scale * o.offset + float(n @ shift)))
            obstacles.append(tuple(new))
        return PolyLink(tuple(comps), cons, tuple(obstacles), check=self.check)

    def without_obstacles(self) -> "PolyLink":
        return PolyLink(self.components, self.endpoint_constraints,
                        tuple(() for _ in self.components), check=self.check)


def length(c: PolyCurve) -> float:
    """Sum of segment lengths, including the closing segment of a closed curve."""
    return math.fsum(np.linalg.norm(c.edges(), axis=1))


def link_length(L: PolyLink) -> float:
    return math.fsum(length(c) for c in L.components)


def _unit_edges(c: PolyCurve):
    e = c.edges()
    return e / np.linalg.norm(e, axis=1)[:, None]


def turning_angles(c: PolyCurve) -> np.ndarray:
    """Exterior angle at each interior vertex (every vertex if closed)."""
    t = _unit_edges(c)
    if c.closed:
        t_in, t_out = np.roll(t, 1, axis=0), t
    else:
        t_in, t_out = t[:-1], t[1:]
    cross = np.linalg.norm(np.cross(t_in, t_out), axis=1)
    dot = np.einsum("ij,ij->i", t_in, t_out)
    return np.arctan2(cross, dot)


def total_curvature(c: PolyCurve) -> float:
    return math.fsum(turning_angles(c))


def curvature_force_array(c: PolyCurve) -> np.ndarray:
    """Discrete curvature force as an (N, 3) array aligned with the vertices.

    Interior vertices carry ``T_out - T_in``; open endpoints carry the inward
    unit tangent.  ``-curvature_force_array`` is the gradient of length.
    """
    t = _unit_edges(c)
    if c.closed:
        return t - np.roll(t, 1, axis=0)
    K = np.empty_like(c.vertices)
    K[0] = t[0]
    K[-1] = -t[-1]
    K[1:-1] = t[1:] - t[:-1]
    return K


def curvature_force(c: PolyCurve, component: int = 0) -> list[ForceAtom]:
    K = curvature_force_array(c)
    return [ForceAtom(component, i, K[i]) for i in range(K.shape[0])]


def segment_distances(P1, P2, Q1, Q2):
    """Vectorised closest points between segments ``P1P2`` and ``Q1Q2``.

    Returns ``(dist, s, t)`` arrays with closest points ``P1 + s (P2-P1)``
    and ``Q1 + t (Q2-Q1)``.
    """
    P1 = np.asarray(P1, float)
    Q1 = np.asarray(Q1, float)
    d1 = np.asarray(P2, float) - P1
    d2 = np.asarray(Q2, float) - Q1
    r = P1 - Q1
    a = np.einsum("...i,...i->...", d1, d1)
    e = np.einsum("...i,...i->...", d2, d2)
    f = np.einsum("...i,...i->...", d2, r)
    c = np.einsum("...i,...i->...", d1, r)
    b = np.einsum("...i,...i->...", d1, d2)
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-14 * a * e, np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
        t = (b * s + f) / e
        lo = t < 0.0
        hi = t > 1.0
        s = np.where(lo, np.clip(-c / a, 0.0, 1.0), s)
        s = np.where(hi, np.clip((b - c) / a, 0.0, 1.0), s)
    t = np.clip(t, 0.0, 1.0)
    diff = (P1 + s[..., None] * d1) - (Q1 + t[..., None] * d2)
    return np.linalg.norm(diff, axis=-1), s, t


def segment_distance(p1, p2, q1, q2) -> tuple[float, float, float]:
    """Exact minimum distance between two closed segments and its parameters."""
    p1, p2, q1, q2 = (np.asarray(v, float) for v in (p1, p2, q1, q2))
    if np.all(p1 == p2) or np.all(q1 == q2):
        raise DomainError("segments must have distinct endpoints")
    d, s, t = segment_distances(p1[None], p2[None], q1[None], q2[None])
    return float(d[0]), float(s[0]), float(t[0])


def _sample_segments(c: PolyCurve, h: float):
    """Points covering each segment so every segment point is within h/2 of one."""
    starts, edges = c.segment_starts(), c.edges()
    lens = np.linalg.norm(edges, axis=1)
    k = np.maximum(1, np.ceil(lens / h).astype(int))
    seg = np.repeat(np.arange(lens.size), k)
    first = np.repeat(np.cumsum(k) - k, k)
    frac = (np.arange(seg.size) - first + 0.5) / k[seg]
    pts = starts[seg] + frac[:, None] * edges[seg]
    return pts, seg


def candidate_segment_pairs(L: PolyLink, slack: float = 0.0):
    """Segment pairs on distinct components that may lie within the thickness.

    Returns ``(ci, si, cj, sj, dist, s, t)`` arrays (``ci < cj``) covering
    every pair with distance ``<= d_v * (1 + slack)``, where ``d_v`` is the
    minimum inter-component vertex distance, an upper bound on the thickness.
    """
    comps = L.components
    K = len(comps)
    empty = tuple(np.zeros(0, int) for _ in range(4)) + tuple(np.zeros(0) for _ in range(3))
    if K < 2:
        return empty
    trees = [cKDTree(c.vertices) for c in comps]
    d_v = math.inf
    for i in range(K):
        for j in range(i + 1, K):
            d, _ = trees[j].query(comps[i].vertices, k=1)
            d_v = min(d_v, float(np.min(d)))
    all_lens = np.concatenate([np.linalg.norm(c.edges(), axis=1) for c in comps])
    h = 2.0 * float(np.median(all_lens))
    radius = d_v * (1.0 + slack) + h
    samples = [_sample_segments(c, h) for c in comps]
    stree = [cKDTree(p) for p, _ in samples]
    out = [[] for _ in range(4)]
    for i in range(K):
        for j in range(i + 1, K):
            m = stree[i].sparse_distance_matrix(stree[j], radius, output_type="ndarray")
            if m.size == 0:
                continue
            si = samples[i][1][m["i"]]
            sj = samples[j][1][m["j"]]
            nj = np.int64(comps[j].n_segments)
            key = np.unique(si.astype(np.int64) * nj + sj)
            out[0].append(np.full(key.size, i))
            out[1].append(key // nj)
            out[2].append(np.full(key.size, j))
            out[3].append(key % nj)
    if not out[0]:
        return empty
    ci, si, cj, sj = (np.concatenate(o) for o in out)
    starts = [c.segment_starts() for c in comps]
    ends = [c.segment_ends() for c in comps]
    P1 = np.empty((ci.size, 3))
    P2 = np.empty_like(P1)
    Q1 = np.empty_like(P1)
    Q2 = np.empty_like(P1)
    for k in range(K):
        mi = ci == k
        P1[mi], P2[mi] = starts[k][si[mi]], ends[k][si[mi]]
        mj = cj == k
        Q1[mj], Q2[mj] = starts[k][sj[mj]], ends[k][sj[mj]]
    dist, s, t = segment_distances(P1, P2, Q1, Q2)
    keep = dist <= d_v * (1.0 + slack) * (1 + 1e-12)
    return ci[keep], si[keep], cj[keep], sj[keep], dist[keep], s[keep], t[keep]


def link_thickness(L: PolyLink) -> float:
    """Minimum distance between points on different components (``inf`` if none)."""
    if L.n_components < 2:
        return math.inf
    dist = candidate_segment_pairs(L)[4]
    return float(np.min(dist))


def obstacle_clearance(L: PolyLink) -> float:
    """Smallest obstacle value over all vertices (``inf`` without obstacles)."""
    best = math.inf
    for c, obs in zip(L.components, L.obstacles):
        for o in obs:
            best = min(best, float(np.min(o.value(c.vertices))))
    return best
