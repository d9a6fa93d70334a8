"""Reference configurations used as balanced and unbalanced fixtures."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .clasp import clasp_link
from .errors import DomainError
from .geometry import PolyCurve, PolyLink

__all__ = [
    "CATALOG",
    "circle",
    "simple_chain",
    "wrapped",
    "regular_polygon_angles",
    "covered_hopf",
    "naive_clasp",
    "pressed_clasp",
]


def _check_n(n, lo, name="n"):
    if int(n) != n or n < lo:
        raise DomainError(f"{name} must be an integer >= {lo}, got {n}")
    return int(n)


def circle(center, e1, e2, samples: int, winds: int = 1, radius: float = 1.0) -> np.ndarray:
    """``samples * winds`` points of a circle, starting at ``center + radius * e1``."""
    th = 2 * np.pi * np.arange(samples * winds) / samples
    e1, e2 = np.asarray(e1, float), np.asarray(e2, float)
    return np.asarray(center, float) + radius * (np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2)


def _arc(center, e1, e2, a, b, k):
    th = np.linspace(a, b, k + 1)
    return np.asarray(center, float) + np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2


def simple_chain(n: int) -> PolyLink:
    """Three-component chain: a stadium with two unit circles hooked through it.

    The stadium lies in the xy-plane and is made of unit semicircles about
    ``c1 = (-1/2, 0, 0)`` and ``c2 = (1/2, 0, 0)`` joined by unit segments.
    Circle ``C_i`` lies in the xz-plane, is centred at the apex ``s_i`` of the
    semicircle about ``c_i`` and passes through ``c_i``.  ``n`` is the vertex
    count of each circle; the stadium uses the same spacing.
    """
    n = _check_n(n, 64)
    x, y, z = np.eye(3)
    c1, c2 = np.array([-0.5, 0, 0]), np.array([0.5, 0, 0])
    k_arc = 2 * int(math.ceil(n / 4))  # even, so the apex is a vertex
    k_line = max(1, int(round(n / (2 * math.pi))))
    right = _arc(c2, x, y, -math.pi / 2, math.pi / 2, k_arc)
    top = np.linspace(right[-1], [-0.5, 1, 0], k_line + 1)
    left = _arc(c1, x, y, math.pi / 2, 3 * math.pi / 2, k_arc)
    bottom = np.linspace(left[-1], right[0], k_line + 1)
    stadium = np.concatenate([right, top[1:], left[1:], bottom[1:-1]])
    C1 = circle([-1.5, 0, 0], x, z, n)
    C2 = circle([1.5, 0, 0], -x, z, n)
    return PolyLink((PolyCurve(C1, True), PolyCurve(stadium, True), PolyCurve(C2, True)))


def regular_polygon_angles(k: int) -> list[float]:
    return [2 * math.pi / k] * k


def wrapped(turning_angles: Sequence[float], n: int) -> PolyLink:
    """A convex unit-edge polygon ``P`` wrapped by its outer parallel ``L0`` and vertex circles.

    ``turning_angles`` lists the exterior angles ``2 alpha_i`` of ``P`` at its
    vertices.  Component 0 is ``L0``, the boundary of the unit neighbourhood
    of ``P``.  Component ``i`` is the unit circle through vertex ``c_i``
    centred at the midpoint ``m_i`` of the ``L0`` arc about ``c_i``, lying in
    the vertical plane through ``c_i`` and ``m_i``.
    """
    ang = np.asarray(turning_angles, float)
    n = _check_n(n, 64)
    if ang.ndim != 1 or ang.size < 3:
        raise DomainError("need at least three turning angles")
    if np.any(ang < 0) or np.any(ang > 2 * math.pi / 3 + 1e-12):
        raise DomainError("turning angles must lie in [0, 2 pi / 3]")
    if abs(ang.sum() - 2 * math.pi) > 1e-9:
        raise DomainError("turning angles must sum to 2 pi")
    k = ang.size
    # edge i runs from vertex i to vertex i+1; the turn at vertex i+1 is ang[i+1]
    heading = np.concatenate([[0.0], np.cumsum(ang[1:])])
    edges = np.stack([np.cos(heading), np.sin(heading)], axis=1)
    verts = np.concatenate([[[0.0, 0.0]], np.cumsum(edges, axis=0)])
    if np.linalg.norm(verts[-1]) > 1e-9:
        raise DomainError("polygon with these turning angles and unit edges does not close")
    verts = verts[:-1]
    verts = verts - verts.mean(axis=0)
    normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)  # outward for a ccw polygon
    h = (k + 2 * math.pi) / n
    k_line = max(1, int(math.ceil(1 / h)))
    pts = []
    up = np.array([0.0, 0.0, 1.0])
    circles = []
    for i in range(k):
        c = np.append(verts[i], 0.0)
        n_in = np.append(normals[i - 1], 0.0)
        n_out = np.append(normals[i], 0.0)
        a_in = math.atan2(n_in[1], n_in[0])
        steps = 2 * max(1, int(math.ceil(ang[i] / (2 * h))))
        if ang[i] > 0:
            pts.append(_arc(c, np.array([1.0, 0, 0]), np.array([0, 1.0, 0]),
                            a_in, a_in + ang[i], steps)[:-1])
        nxt = np.append(verts[(i + 1) % k], 0.0)
        pts.append(np.linspace(c + n_out, nxt + n_out, k_line + 1)[:-1])
        r = n_in + n_out
        r = r / np.linalg.norm(r)
        circles.append(PolyCurve(circle(c + r, -r, up, n), True))
    L0 = PolyCurve(np.concatenate(pts), True)
    return PolyLink((L0, *circles))


def covered_hopf(m: int, n: int, samples: int) -> PolyLink:
    """Unit circles in perpendicular planes through each other's centres, wound ``m`` and ``n`` times."""
    m = _check_n(m, 1, "m")
    n = _check_n(n, 1, "n")
    samples = _check_n(samples, 8, "samples")
    samples += samples % 2  # keep the other circle's centre a vertex
    x, y, z = np.eye(3)
    A = circle([0, 0, 0], x, y, samples, winds=m)
    B = circle([1, 0, 0], x, z, samples, winds=n)
    return PolyLink((PolyCurve(A, True), PolyCurve(B, True)))


def naive_clasp(tau: float, n: int, leg: float) -> PolyLink:
    """Naive clasp: a unit arc of angle ``2 arcsin tau`` about the other tip, plus legs."""
    if not (0.0 < tau <= 1.0):
        raise DomainError(f"tau must lie in (0, 1], got {tau}")
    n = _check_n(n, 16)
    a = math.asin(tau)
    phi = np.linspace(-a, a, n + 1)
    arc = np.stack([np.sin(phi), np.zeros_like(phi), 0.5 - np.cos(phi)], axis=1)
    arc[0, 0], arc[-1, 0] = -tau, tau
    return clasp_link(arc, tau, leg)


def pressed_clasp(n: int) -> PolyLink:
    """Semicircles between endpoint planes one unit apart; each tip touches the opposite wall."""
    n = _check_n(n, 64)
    return naive_clasp(1.0, n, 0.0)


CATALOG = {
    "simple_chain": lambda n: simple_chain(n),
    "wrapped": lambda n: wrapped(regular_polygon_angles(6), n),
    "covered_hopf": lambda n: covered_hopf(1, 1, n),
    "covered_hopf_2_1": lambda n: covered_hopf(2, 1, n),
    "naive_clasp": lambda n: naive_clasp(1.0, n, 1.0),
    "pressed_clasp": lambda n: pressed_clasp(n),
}
