"""The critical tau-clasp.

Two arcs, ``gamma`` in the xz-plane and its image ``gamma~`` under
``(x, y, z) -> (-y, x, -z)``, are parametrised by the sine ``u`` of the
tangent angle.  With ``w = tau - |u|`` the curvature is

    kappa(u) = sqrt((1 - u^2 w^2)^3 (1 - w^2)) / (1 - w^2 + w |u| (1 - u^2))

and ``x(u) = u sqrt(1 - w^2) / sqrt(1 - u^2 w^2)``.  Height and arclength
follow from ``dz/du = u / (kappa sqrt(1 - u^2))`` and
``ds/du = 1 / (kappa sqrt(1 - u^2))``.  The point ``gamma(u)`` is joined by
a unit strut to ``gamma~(+-(tau - |u|))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .geometry import EndpointConstraint, HalfSpaceObstacle, PolyCurve, PolyLink
from .numerics import Quadrature, integrate

__all__ = [
    "ClaspParams",
    "ClaspProfile",
    "ClaspScalars",
    "StrutSample",
    "clasp_kappa",
    "clasp_x",
    "clasp_profile",
    "clasp_profiles",
    "clasp_conjugate",
    "clasp_scalars",
    "clasp_sample",
    "clasp_strut_loop",
    "clasp_savings_scan",
    "cumulative_integrals",
    "mirror",
    "wedge_obstacles",
]

_Q = Quadrature(abs_tol=1e-12)


@dataclass(frozen=True)
class ClaspParams:
    tau: float

    def __post_init__(self):
        _check_tau(self.tau)


class ClaspProfile(NamedTuple):
    """Pointwise clasp data; ``s`` is arclength from the tip (nonnegative)."""

    u: float
    x: float
    z: float
    kappa: float
    s: float


class ClaspScalars(NamedTuple):
    tau: float
    tip_distance: float
    curved_length: float
    excess: float
    naive_excess: float
    max_kappa: float
    shoulder_s: float
    z0: float

    @property
    def savings(self) -> float:
        return self.naive_excess - self.excess

    @property
    def savings_fraction(self) -> float:
        if self.naive_excess == 0.0:
            return math.nan
        return self.savings / self.naive_excess


class StrutSample(NamedTuple):
    s1: float
    s2: float
    a: np.ndarray
    b: np.ndarray

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.b - self.a))


def _check_tau(tau):
    if not (0.0 <= tau <= 1.0):
        raise DomainError(f"tau must lie in [0, 1], got {tau}")


def _check_u(tau, u):
    _check_tau(tau)
    au = np.abs(np.asarray(u, float))
    if np.any(au > tau * (1 + 1e-15) + 1e-300):
        raise DomainError(f"|u| must not exceed tau={tau}")
    return np.minimum(au, tau)


def _kappa(tau, au):
    """Vectorised curvature for ``0 <= au <= tau`` with cancellation-free factors."""
    w = tau - au
    # 1 - w without rounding w first; exact when tau = 1
    one_m_w2 = ((1.0 - tau) + au) * (1.0 + w)
    uw = au * w
    one_m_uw2 = (1.0 - uw) * (1.0 + uw)
    one_m_u2 = (1.0 - au) * (1.0 + au)
    num = np.sqrt(one_m_uw2 ** 3 * one_m_w2)
    den = one_m_w2 + w * au * one_m_u2
    with np.errstate(divide="ignore", invalid="ignore"):
        k = num / den
    return np.where(den == 0.0, np.inf, k)


def _integrands(tau):
    """``(dz/dphi, ds/dphi)`` with ``u = sin(phi)``: ``sin(phi) / kappa`` and ``1 / kappa``.

    In ``phi`` the ``(1 - u^2)^(-1/2)`` factor disappears; only the
    square-root behaviour of ``1 / kappa`` at ``u = 0`` for ``tau = 1`` is left.
    """

    def inv_kappa(phi):
        u = np.sin(phi)
        w = tau - u
        one_m_w2 = ((1.0 - tau) + u) * (1.0 + w)
        uw = u * w
        one_m_uw2 = (1.0 - uw) * (1.0 + uw)
        den = one_m_w2 + w * u * np.cos(phi) ** 2
        num = np.sqrt(one_m_uw2 ** 3 * one_m_w2)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = den / num
        # 0/0 only at tau=1, u=0, where 1/kappa -> 0
        return np.where(num == 0.0, 0.0, r)

    def dz(phi):
        return np.sin(phi) * inv_kappa(phi)

    return dz, inv_kappa


def _ds0(tau):
    # ds/du at u=0: 1/kappa(0) = sqrt(1-tau^2); it vanishes at tau=1
    return math.sqrt(max(0.0, (1.0 - tau) * (1.0 + tau)))


def clasp_kappa(tau: float, u: float) -> float:
    """Closed-form curvature; ``+inf`` only at ``(tau, u) = (1, 0)``."""
    au = _check_u(tau, u)
    return float(_kappa(tau, au))


def clasp_x(tau: float, u):
    """Horizontal coordinate ``x_tau(u)`` (odd in ``u``)."""
    u = np.asarray(u, float)
    au = _check_u(tau, u)
    w = tau - au
    x = u * np.sqrt(((1 - tau) + au) * (1 + w)) / np.sqrt((1 - au * w) * (1 + au * w))
    return x if x.ndim else float(x)


def cumulative_integrals(tau: float, nodes, q: Quadrature = _Q):
    """Cumulative ``Z(v) = int_0^v dz`` and ``S(v) = int_0^v ds`` at sorted nodes in ``[0, tau]``.

    Each gap between consecutive nodes gets its own adaptive integral, so the
    total cost is linear in the node count.
    """
    nodes = np.asarray(nodes, float)
    if nodes.ndim != 1 or nodes.size == 0:
        raise DomainError("nodes must be a nonempty 1-d array")
    if np.any(np.diff(nodes) < 0) or nodes[0] < 0 or nodes[-1] > tau:
        raise DomainError("nodes must be sorted within [0, tau]")
    dz, ds = _integrands(tau)
    grid = np.arcsin(np.concatenate([[0.0], nodes]))
    k = max(1, nodes.size)
    piece_q = Quadrature(abs_tol=max(q.abs_tol / k, 1e-15), rel_tol=q.rel_tol, max_depth=q.max_depth)
    first_q = piece_q.with_singular(left=True)
    Z = np.empty(grid.size - 1)
    S = np.empty(grid.size - 1)
    accz = []
    accs = []
    for i in range(grid.size - 1):
        lo, hi = grid[i], grid[i + 1]
        qq = first_q if lo == 0.0 else piece_q
        accz.append(integrate(dz, lo, hi, qq)[0])
        accs.append(integrate(ds, lo, hi, qq)[0])
        Z[i] = math.fsum(accz)
        S[i] = math.fsum(accs)
    return Z, S


def _full_integrals(tau, q):
    if tau == 0.0:
        return 0.0, 0.0
    dz, ds = _integrands(tau)
    qq = q.with_singular(left=True)
    hi = math.asin(tau)
    return integrate(dz, 0.0, hi, qq)[0], integrate(ds, 0.0, hi, qq)[0]


def _z0(tau, D):
    return 0.5 * (-_ds0(tau) - D)


def clasp_profile(tau: float, u: float, q: Quadrature = _Q) -> ClaspProfile:
    """Coordinates, curvature and arclength of ``gamma`` at parameter ``u``."""
    au = float(_check_u(tau, u))
    D, _ = _full_integrals(tau, q)
    if au == 0.0:
        Zu = Su = 0.0
    else:
        Zu, Su = (float(a[0]) for a in cumulative_integrals(tau, [au], q))
    return ClaspProfile(float(u), clasp_x(tau, u), _z0(tau, D) + Zu, clasp_kappa(tau, au), Su)


def clasp_profiles(tau: float, u, q: Quadrature = _Q):
    """Vectorised :func:`clasp_profile`; returns arrays ``(x, z, kappa, s)``.

    Integrals are accumulated once over the sorted distinct ``|u|`` values.
    """
    u = np.asarray(u, float)
    au = _check_u(tau, u)
    D, _ = _full_integrals(tau, q)
    keys, inv = np.unique(au, return_inverse=True)
    pos = keys > 0
    Zk = np.zeros_like(keys)
    Sk = np.zeros_like(keys)
    if np.any(pos):
        Zk[pos], Sk[pos] = cumulative_integrals(tau, keys[pos], q)
    x = clasp_x(tau, u)
    z = _z0(tau, D) + Zk[inv].reshape(u.shape)
    s = Sk[inv].reshape(u.shape)
    return np.asarray(x), z, _kappa(tau, au), s


def clasp_conjugate(tau: float, u: float) -> float:
    """Conjugate parameter ``u* = tau - |u|``."""
    _check_u(tau, u)
    return tau - abs(u)


def clasp_scalars(tau: float, q: Quadrature = _Q) -> ClaspScalars:
    """Tip distance, curved length, excess and naive excess of the clasp."""
    _check_tau(tau)
    D, S = _full_integrals(tau, q)
    c = _ds0(tau)
    tip = D + c
    curved = 4.0 * S
    excess = curved - 2.0 * tau * tip
    naive = 4.0 * math.asin(tau) - 2.0 * tau
    kmax = math.inf if c == 0.0 else 1.0 / c
    return ClaspScalars(tau, tip, curved, excess, naive, kmax, S, _z0(tau, D))


def mirror(points) -> np.ndarray:
    """The clasp symmetry ``(x, y, z) -> (-y, x, -z)``."""
    p = np.asarray(points, float)
    return np.stack([-p[..., 1], p[..., 0], -p[..., 2]], axis=-1)


def _leg_dirs(tau):
    c = _ds0(tau)
    return np.array([-c, 0.0, tau]), np.array([c, 0.0, tau])


def wedge_obstacles(curve: PolyCurve, t_start, t_end) -> tuple:
    """Half-spaces confining the *other* component to this curve's endpoint wedge.

    ``t_start`` and ``t_end`` are the outward leg directions at the two ends;
    coincident half-spaces (the parallel case) are merged.
    """
    out = []
    for t, p in ((t_start, curve.vertices[0]), (t_end, curve.vertices[-1])):
        t = np.asarray(t, float) / np.linalg.norm(t)
        o = HalfSpaceObstacle(-t, -float(t @ p))
        if not any(np.allclose(o.normal, e.normal, atol=1e-12) and abs(o.offset - e.offset) < 1e-12
                   for e in out):
            out.append(o)
    return tuple(out)


def clasp_link(arc: np.ndarray, tau: float, leg: float) -> PolyLink:
    """Attach tangent legs, endpoint planes and wedge obstacles to an arc of ``gamma``.

    ``arc`` holds vertices of ``gamma`` ordered from ``u=-tau`` to ``u=+tau``.
    """
    if leg < 0 or not math.isfinite(leg):
        raise DomainError(f"leg must be a finite nonnegative length, got {leg}")
    t_start, t_end = _leg_dirs(tau)
    verts = [arc]
    if leg > 0:
        verts = [arc[:1] + leg * t_start, arc, arc[-1:] + leg * t_end]
    g = PolyCurve(np.concatenate(verts), closed=False)
    gt = PolyCurve(mirror(g.vertices), closed=False)
    ts_m, te_m = mirror(t_start), mirror(t_end)
    cons = {
        (0, "start"): EndpointConstraint.plane(g.vertices[0], t_start),
        (0, "end"): EndpointConstraint.plane(g.vertices[-1], t_end),
        (1, "start"): EndpointConstraint.plane(gt.vertices[0], ts_m),
        (1, "end"): EndpointConstraint.plane(gt.vertices[-1], te_m),
    }
    obstacles = (wedge_obstacles(gt, ts_m, te_m), wedge_obstacles(g, t_start, t_end))
    return PolyLink((g, gt), cons, obstacles)


def _phi_grid(tau, n):
    a = math.asin(tau)
    u = np.sin(np.linspace(-a, a, n + 1))
    u[0], u[-1] = -tau, tau
    return u


def clasp_sample(tau: float, n: int, leg: float, q: Quadrature = _Q) -> PolyLink:
    """The critical clasp as a two-component :class:`PolyLink`.

    ``gamma`` is sampled at ``n + 1`` parameters uniform in ``arcsin u``;
    each end gets a straight leg of length ``leg`` along the end tangent,
    ending on a plane perpendicular to it.
    """
    _check_tau(tau)
    if tau == 0.0:
        raise DomainError("the tau=0 clasp is a single point and cannot be sampled")
    if int(n) != n or n < 16:
        raise DomainError(f"n must be an integer >= 16, got {n}")
    u = _phi_grid(tau, int(n))
    x, z, _, _ = clasp_profiles(tau, u, q)
    arc = np.stack([x, np.zeros_like(x), z], axis=1)
    return clasp_link(arc, tau, leg)


def clasp_strut_loop(tau: float, n: int, q: Quadrature = _Q) -> list[StrutSample]:
    """Struts ``gamma(u) -- gamma~(+-(tau - |u|))`` as a closed loop in the ``(s1, s2)`` plane.

    ``s1`` is the signed arclength along ``gamma`` and ``s2`` along
    ``gamma~``.  The first branch uses ``+u*``, the second, traversed back,
    uses ``-u*``, so the loop starts and ends at the same pair.
    """
    _check_tau(tau)
    if int(n) != n or n < 16:
        raise DomainError(f"n must be an integer >= 16, got {n}")
    u = _phi_grid(tau, int(n))
    us = tau - np.abs(u)
    x, z, _, s = clasp_profiles(tau, np.concatenate([u, us]), q)
    m = u.size
    x1, z1, s1 = x[:m], z[:m], np.sign(u) * s[:m]
    xs, zs, ss = x[m:], z[m:], s[m:]
    out = []
    for sign, order in ((1.0, range(m)), (-1.0, reversed(range(m)))):
        for k in order:
            a = np.array([x1[k], 0.0, z1[k]])
            b = mirror(np.array([sign * xs[k], 0.0, zs[k]]))
            out.append(StrutSample(float(s1[k]), float(sign * ss[k]), a, b))
    return out


class ScanRow(NamedTuple):
    tau: float
    excess: float
    naive_excess: float
    savings_fraction: float


def clasp_savings_scan(tau_lo: float, tau_hi: float, steps: int, q: Quadrature = _Q) -> list[ScanRow]:
    """Excess versus naive excess on ``steps`` equal intervals of ``[tau_lo, tau_hi]``."""
    if not (0.0 <= tau_lo < tau_hi <= 1.0):
        raise DomainError("need 0 <= tau_lo < tau_hi <= 1")
    if int(steps) != steps or steps < 2:
        raise DomainError("steps must be an integer >= 2")
    rows = []
    for tau in np.linspace(tau_lo, tau_hi, int(steps) + 1):
        sc = clasp_scalars(float(tau), q)
        rows.append(ScanRow(float(tau), sc.excess, sc.naive_excess, sc.savings_fraction))
    return rows
