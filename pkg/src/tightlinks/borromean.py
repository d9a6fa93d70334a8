"""Critical Borromean rings and the piecewise-circular comparison rings.

One component lies in the xy-plane; the others are its images under the
cyclic rotation ``(x, y, z) -> (z, x, y)``.  Its positive quadrant is the
generating arc from the intip ``I = (2 rho, 0)`` to the tip
``T = (0, 2 sqrt(1 - rho^2))``:

* ``IJ``: a piece of the tau-clasp, ``v`` in ``[0, sigma]``;
* ``JMR``: the unit circle about ``I~ = (0, 2 rho)``;
* ``RS``: conjugate of the clasp piece on the second component;
* ``ST``: conjugate of the circle piece ``J~M~`` on the second component.

The rest of the component follows by reflection in the coordinate axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clasp import _Q as _CLASP_Q
from .clasp import _kappa, clasp_x, cumulative_integrals
from .errors import ConstraintViolation, DomainError
from .geometry import PolyCurve, PolyLink
from .numerics import NewtonConfig, Quadrature, brent, integrate, newton_nd

__all__ = [
    "BorromeanParams",
    "ArcDecomposition",
    "PAPER_GUESS",
    "u_of_v",
    "du_dv",
    "residuals",
    "solve",
    "generating_arc",
    "build",
    "b2_params",
    "b2_arc",
    "b2_build",
    "curvature_profile",
    "component_labels",
    "rotate",
]

PAPER_GUESS = (0.41, 0.42, 0.76)
_RQ = Quadrature(abs_tol=1e-13)
JOIN_TOL = 1e-6
PIECE_FLOOR = 4


@dataclass(frozen=True)
class BorromeanParams:
    rho: float
    sigma: float
    tau: float

    def __post_init__(self):
        if not (0.0 <= self.rho <= self.sigma <= self.tau <= 1.0):
            raise DomainError(f"need 0 <= rho <= sigma <= tau <= 1, got "
                              f"({self.rho}, {self.sigma}, {self.tau})")

    def as_tuple(self):
        return (self.rho, self.sigma, self.tau)

    @property
    def I(self):
        return np.array([2 * self.rho, 0.0])

    @property
    def I_tilde(self):
        return np.array([0.0, 2 * self.rho])

    @property
    def M(self):
        return np.array([math.sqrt(1 - self.rho ** 2), self.rho])

    @property
    def J(self):
        return np.array([math.sqrt(1 - self.sigma ** 2), 2 * self.rho - self.sigma])

    @property
    def R(self):
        return np.array([self.tau, 2 * self.rho + math.sqrt(1 - self.tau ** 2)])

    @property
    def T(self):
        return np.array([0.0, 2 * math.sqrt(1 - self.rho ** 2)])

    @property
    def T_tilde2(self):
        return np.array([2 * math.sqrt(1 - self.rho ** 2), 0.0])


@dataclass
class ArcDecomposition:
    """Sampled generating arc ``I -> T``: labelled 2-d pieces sharing endpoints."""

    pieces: dict
    joins: dict = field(default_factory=dict)

    def points(self) -> np.ndarray:
        """Vertices ``I .. T`` without repeated join points."""
        out = []
        for k, pts in enumerate(self.pieces.values()):
            out.append(pts if k == 0 else pts[1:])
        return np.concatenate(out)

    def labels(self) -> list:
        out = []
        for k, (name, pts) in enumerate(self.pieces.items()):
            out.extend([name] * (len(pts) if k == 0 else len(pts) - 1))
        return out


def u_of_v(rho: float, v):
    """Conjugate parameter on ``S~T~`` of the circle point with ``v = -sin(theta)``.

    ``u^2 = (1 - (2 rho - v)^2 / v^2) / (1 - (2 rho - v)^2)``, evaluated in the
    factored form ``4 rho (v - rho) / (v^2 (1 - (2 rho - v)^2))``.
    """
    v = np.asarray(v, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        u2 = 4 * rho * (v - rho) / (v * v * (1 - (2 * rho - v) ** 2))
    bad = ~np.isfinite(u2) | (u2 < 0.0) | (u2 > 1 + 1e-14)
    if np.any(bad):
        raise DomainError(f"u_of_v radicand outside [0, 1] for rho={rho}")
    u = np.sqrt(np.minimum(u2, 1.0))
    return u if u.ndim else float(u)


def _du_dy(rho, y):
    """``du/dy`` along ``v = rho + y^2``; smooth through ``y = 0``."""
    v = rho + y * y
    D = 1 - (rho - y * y) ** 2
    return 2 * math.sqrt(rho) / (v * np.sqrt(D)) * (1 - 2 * y * y / v - 2 * y * y * (rho - y * y) / D)


def du_dv(rho: float, v):
    """Analytic derivative of :func:`u_of_v`; singular like ``(v - rho)^(-1/2)`` at ``v = rho``."""
    v = np.asarray(v, float)
    y = np.sqrt(v - rho)
    with np.errstate(divide="ignore"):
        d = _du_dy(rho, y) / (2 * y)
    return d if d.ndim else float(d)


def _check_order(rho, sigma, tau):
    BorromeanParams(rho, sigma, tau)


def residuals(p, q: Quadrature = _RQ) -> np.ndarray:
    """``(F1, F2, F3)``: the two join conditions at ``J`` and force balance at ``I~``."""
    rho, sigma, tau = p.as_tuple() if isinstance(p, BorromeanParams) else map(float, p)
    _check_order(rho, sigma, tau)
    if sigma == 0.0:
        Z = 0.0
    else:
        Z = float(cumulative_integrals(tau, [sigma], q)[0][0])
    F1 = 2 * rho - math.sqrt(1 - sigma ** 2) + Z
    F2 = 1 - (2 * rho - sigma) ** 2 - (1 - sigma ** 2) / (1 - sigma ** 2 * (tau - sigma) ** 2)
    if sigma > rho:
        # transmitted force along JM, integrated in y with v = rho + y^2;
        # see the decisions notes for the factor in front
        def f(y):
            v = rho + y * y
            return v / np.sqrt(1 - v * v) * _du_dy(rho, y)

        I3 = integrate(f, 0.0, math.sqrt(sigma - rho), q)[0]
    else:
        I3 = 0.0
    F3 = tau - math.sqrt(1 - sigma ** 2) + I3
    return np.array([F1, F2, F3])


def solve(q: Quadrature = _RQ, cfg: NewtonConfig = NewtonConfig(), x0=PAPER_GUESS) -> BorromeanParams:
    """Newton solve of :func:`residuals` from ``x0``."""
    x = newton_nd(lambda y: residuals(y, q), x0, cfg)
    return BorromeanParams(*map(float, x))


def rotate(points, k: int = 1) -> np.ndarray:
    """Apply ``(x, y, z) -> (z, x, y)`` ``k`` times."""
    p = np.asarray(points, float)
    for _ in range(k % 3):
        p = p[..., [2, 0, 1]]
    return p


def _budget(lengths, n):
    total = sum(lengths.values())
    return {k: max(PIECE_FLOOR, int(round(n / 4 * L / total))) for k, L in lengths.items()}


def _clasp_piece(p, v):
    """Clasp vertices at sorted ``v`` in ``[0, sigma]``: ``(2 rho + Z(v), x_tau(v))``."""
    pos = v > 0
    Z = np.zeros_like(v)
    if np.any(pos):
        Z[pos] = cumulative_integrals(p.tau, v[pos], _CLASP_Q)[0]
    return 2 * p.rho + Z, np.asarray(clasp_x(p.tau, v))


def _conjugate_xy(X, Y, v):
    """Conjugate point in the plane of the generating arc.

    For a point ``(0, X, Y)`` of the second component whose tangent makes
    angle ``arcsin v`` with its y-direction, the conjugate on the first
    component is ``(sqrt(1 - (Y/v)^2), X + (Y/v) sqrt(1 - v^2))``.
    """
    r = Y / v
    return np.sqrt(np.clip(1 - r * r, 0.0, None)), X + r * np.sqrt(1 - v * v)


def _rs(p, v):
    """``RS``: conjugates of clasp points; ``Y/v`` has a closed form finite at ``v = 0``."""
    X, _ = _clasp_piece(p, v)
    w = p.tau - v
    r = np.sqrt((1 - w) * (1 + w)) / np.sqrt((1 - v * w) * (1 + v * w))
    return np.sqrt(np.clip(1 - r * r, 0.0, None)), X + r * np.sqrt(1 - v * v)


def _st(p, v):
    """``ST``: conjugates of circle points ``(sqrt(1 - v^2), 2 rho - v)``."""
    return _conjugate_xy(np.sqrt(1 - v * v), 2 * p.rho - v, v)


def _piece_lengths(p):
    w, sg, t = cumulative_integrals(p.tau, [p.tau - p.sigma, p.sigma, p.tau], _CLASP_Q)[1]
    vs = p.rho + (p.sigma - p.rho) * np.linspace(0, 1, 257) ** 2
    st = np.stack(_st(p, vs), axis=1)
    return {
        "IJ": sg,
        "JM": math.asin(p.sigma) - math.asin(p.rho),
        "MR": math.asin(p.rho) + math.acos(p.tau),
        "RS": t - w,
        "ST": float(np.sum(np.linalg.norm(np.diff(st, axis=0), axis=1))),
    }


def generating_arc(p: BorromeanParams, n: int) -> ArcDecomposition:
    """Sample the quadrant arc ``I -> T`` for a budget of about ``n`` vertices per component."""
    if int(n) != n or n < 4 * PIECE_FLOOR:
        raise DomainError(f"n must be an integer >= {4 * PIECE_FLOOR}")
    counts = _budget(_piece_lengths(p), n)
    pieces = {}
    v = np.sin(np.linspace(0.0, math.asin(p.sigma), counts["IJ"] + 1))
    v[-1] = p.sigma
    pieces["IJ"] = np.stack(_clasp_piece(p, v), axis=1)
    th_J, th_M, th_R = -math.asin(p.sigma), -math.asin(p.rho), math.acos(p.tau)
    for name, a, b in (("JM", th_J, th_M), ("MR", th_M, th_R)):
        th = np.linspace(a, b, counts[name] + 1)
        pieces[name] = np.stack([np.cos(th), 2 * p.rho + np.sin(th)], axis=1)
    v = np.sin(np.linspace(0.0, math.asin(p.sigma), counts["RS"] + 1))
    v[-1] = p.sigma
    pieces["RS"] = np.stack(_rs(p, v), axis=1)
    t = np.linspace(1.0, 0.0, counts["ST"] + 1)
    v = p.rho + (p.sigma - p.rho) * t * t
    pieces["ST"] = np.stack(_st(p, v), axis=1)
    # the last point is T exactly; pin it against rounding in sqrt(1 - 1)
    pieces["ST"][-1] = p.T
    joins = {}
    order = list(pieces)
    for name, (a, b) in zip(("J", "M", "R", "S"), zip(order[:-1], order[1:])):
        gap = float(np.linalg.norm(pieces[a][-1] - pieces[b][0]))
        joins[name] = gap
        if gap > JOIN_TOL:
            raise ConstraintViolation(f"join {name} does not close (gap {gap:.3g})")
    return ArcDecomposition(pieces, joins)


def _close_quadrants(Q):
    """Closed planar curve from the quadrant arc ``Q`` (``I`` on +x, ``T`` on +y)."""
    q2 = (Q * [-1, 1])[::-1][1:]
    q3 = (Q * [-1, -1])[1:]
    q4 = (Q * [1, -1])[::-1][1:-1]
    return np.concatenate([Q, q2, q3, q4])


def _three_components(pts2d):
    c1 = np.column_stack([pts2d, np.zeros(len(pts2d))])
    comps = [PolyCurve(rotate(c1, k), closed=True) for k in range(3)]
    return PolyLink(tuple(comps))


def build(p: BorromeanParams, n: int) -> PolyLink:
    """Three closed components, about ``n`` vertices each."""
    res = residuals(p)
    if np.max(np.abs(res)) > JOIN_TOL:
        raise ConstraintViolation(f"parameters do not satisfy the join equations (residuals {res})")
    arc = generating_arc(p, n)
    return _three_components(_close_quadrants(arc.points()))


def component_labels(p: BorromeanParams, n: int) -> list:
    """Piece name of every vertex of a component of ``build(p, n)``."""
    lab = generating_arc(p, n).labels()
    return lab + lab[::-1][1:] + lab[1:] + lab[::-1][1:-1]


def b2_params() -> tuple[float, float]:
    """``rho2`` with ``2 rho2 + 1 = 2 sqrt(1 - rho2^2)``, and the length ``6 pi + 24 arcsin rho2``."""
    rho2 = brent(lambda r: 8 * r * r + 4 * r - 3, 0.0, 1.0)
    return rho2, 6 * math.pi + 24 * math.asin(rho2)


def b2_arc(n: int) -> ArcDecomposition:
    rho2, _ = b2_params()
    c = math.sqrt(1 - rho2 ** 2)
    a = math.asin(rho2)
    lengths = {"IM": a, "MT": math.pi / 2 + a}
    counts = _budget(lengths, n)
    # IM: unit circle about T~~ = (2c, 0) from angle pi to pi - a
    th = np.linspace(math.pi, math.pi - a, counts["IM"] + 1)
    im = np.stack([2 * c + np.cos(th), np.sin(th)], axis=1)
    # MT: unit circle about I~ = (0, 2 rho2) from angle -a to pi/2
    th = np.linspace(-a, math.pi / 2, counts["MT"] + 1)
    mt = np.stack([np.cos(th), 2 * rho2 + np.sin(th)], axis=1)
    im[0] = [2 * rho2, 0.0]
    mt[-1] = [0.0, 2 * c]
    gap = float(np.linalg.norm(im[-1] - mt[0]))
    if gap > JOIN_TOL:
        raise ConstraintViolation(f"join M does not close (gap {gap:.3g})")
    return ArcDecomposition({"IM": im, "MT": mt}, {"M": gap})


def b2_build(n: int) -> PolyLink:
    """The comparison rings built only from unit-circle arcs."""
    if int(n) != n or n < 64:
        raise DomainError("n must be an integer >= 64")
    return _three_components(_close_quadrants(b2_arc(n).points()))


def curvature_profile(p: BorromeanParams, n: int = 4096):
    """Curvature against arclength from ``I`` along the generating arc.

    Returns ``(s, kappa, labels)``.  Clasp pieces use the closed-form
    curvature, ``JMR`` is the unit circle, and ``ST`` uses turning angles of
    its sampled polyline.
    """
    arc = generating_arc(p, n)
    s_all, k_all, lab = [], [], []
    s0 = 0.0
    for name, pts in arc.pieces.items():
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        s = s0 + np.concatenate([[0.0], np.cumsum(seg)])
        if name == "IJ":
            v = np.sin(np.linspace(0.0, math.asin(p.sigma), len(pts)))
            k = _kappa(p.tau, v)
        elif name == "RS":
            v = np.sin(np.linspace(0.0, math.asin(p.sigma), len(pts)))
            k = _kappa(p.tau, p.tau - v)
        elif name in ("JM", "MR"):
            k = np.ones(len(pts))
        else:
            e = np.diff(pts, axis=0)
            ang = np.unwrap(np.arctan2(e[:, 1], e[:, 0]))
            dk = np.abs(np.diff(ang)) / (0.5 * (seg[1:] + seg[:-1]))
            k = np.concatenate([[dk[0]], dk, [dk[-1]]])
        s_all.append(s)
        k_all.append(k)
        lab.extend([name] * len(pts))
        s0 = s[-1]
    return np.concatenate(s_all), np.concatenate(k_all), lab
