"""Numeric kernels: adaptive quadrature, root finding, Newton, NNLS.

Everything here is a pure function of its arguments.  Quadrature handles
integrable inverse-square-root endpoint singularities by the substitution
``u = a + t**2`` (or ``u = b - t**2``), after which a globally adaptive
Gauss-Kronrod 7/15 rule is applied.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import DomainError, NewtonError, QuadratureError, RootFindingError

__all__ = [
    "Quadrature",
    "NewtonConfig",
    "integrate",
    "brent",
    "newton_nd",
    "nnls",
]

# Gauss-Kronrod 7/15 on [-1, 1]
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KWEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss nodes are the odd-indexed Kronrod nodes (1, 3, 5 and the centre)
_GWEIGHTS = np.zeros(15)
_GWEIGHTS[[1, 3, 5]] = _WG[:3]
_GWEIGHTS[7] = _WG[3]
_GWEIGHTS[[9, 11, 13]] = _WG[2::-1]


@dataclass(frozen=True)
class Quadrature:
    """Settings for :func:`integrate`.

    ``left_singular`` / ``right_singular`` declare that the integrand may
    behave like ``(distance to that endpoint)**-0.5`` there.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 0.0
    max_depth: int = 50
    left_singular: bool = False
    right_singular: bool = False

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise DomainError("abs_tol must be positive")
        if not self.rel_tol >= 0:
            raise DomainError("rel_tol must be nonnegative")
        if self.max_depth < 1:
            raise DomainError("max_depth must be at least 1")

    def with_singular(self, left=False, right=False) -> "Quadrature":
        return Quadrature(self.abs_tol, self.rel_tol, self.max_depth, left, right)


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-10
    max_iter: int = 50
    fd_step: float = 1e-7
    damping: float = 0.5

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if not 0 < self.damping < 1:
            raise DomainError("damping must lie in (0, 1)")
        if self.max_iter < 1:
            raise DomainError("max_iter must be at least 1")
        if not self.fd_step > 0:
            raise DomainError("fd_step must be positive")


def _pieces(a, b, q):
    """Split [a, b] into (t_lo, t_hi, map) pieces with smooth transformed integrands.

    ``map(t)`` returns ``(u, du/dt)``.
    """
    def ident(t):
        return t, np.ones_like(t)

    def left(lo):
        return lambda t: (lo + t * t, 2.0 * t)

    def right(hi):
        return lambda t: (hi - t * t, 2.0 * t)

    if q.left_singular and q.right_singular:
        m = 0.5 * (a + b)
        h = math.sqrt(m - a)
        return [(0.0, h, left(a)), (0.0, math.sqrt(b - m), right(b))]
    if q.left_singular:
        return [(0.0, math.sqrt(b - a), left(a))]
    if q.right_singular:
        return [(0.0, math.sqrt(b - a), right(b))]
    return [(a, b, ident)]


def _gk15(f, lo, hi, tmap, vectorized):
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    t = c + h * _NODES
    u, jac = tmap(t)
    if vectorized:
        fu = np.asarray(f(u), dtype=float)
        if fu.shape != u.shape:
            fu = np.broadcast_to(fu, u.shape)
    else:
        fu = np.array([f(float(x)) for x in u], dtype=float)
    if not np.all(np.isfinite(fu)):
        bad = int(np.flatnonzero(~np.isfinite(fu))[0])
        raise QuadratureError(
            f"integrand is not finite at u={u[bad]!r}", point=float(u[bad]))
    g = fu * jac
    kron = h * float(np.dot(_KWEIGHTS, g))
    gauss = h * float(np.dot(_GWEIGHTS, g))
    return kron, abs(kron - gauss)


def integrate(f: Callable, a: float, b: float, q: Quadrature = Quadrature(),
              vectorized: bool = True) -> tuple[float, float]:
    """Integrate ``f`` over ``[a, b]`` to ``max(q.abs_tol, q.rel_tol*|value|)``.

    Parameters
    ----------
    f : callable
        Integrand.  With ``vectorized=True`` it is called on 1-d arrays of
        abscissae; otherwise once per point with a float.
    a, b : float
        Limits with ``a <= b``.  Endpoints are never evaluated.
    q : Quadrature
        Tolerances and singularity flags.

    Returns
    -------
    value, err_est : float
        Integral estimate and the summed Kronrod-Gauss error estimate.

    Raises
    ------
    QuadratureError
        If ``f`` returns a non-finite value (the offending abscissa is
        reported) or the tolerance cannot be reached within ``q.max_depth``
        bisections.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("integration limits must be finite")
    if a > b:
        raise DomainError(f"integrate requires a <= b, got a={a}, b={b}")
    if a == b:
        return 0.0, 0.0

    # heap entries: (-err, seq, lo, hi, depth, piece, value)
    heap = []
    frozen = []
    seq = 0
    pieces = _pieces(a, b, q)
    for k, (lo, hi, tmap) in enumerate(pieces):
        val, err = _gk15(f, lo, hi, tmap, vectorized)
        heapq.heappush(heap, (-err, seq, lo, hi, 0, k, val))
        seq += 1

    def totals():
        items = heap + frozen
        v = math.fsum(it[6] for it in sorted(items, key=lambda it: (it[5], it[2])))
        e = math.fsum(-it[0] for it in items)
        return v, e

    value, err = totals()
    while err > max(q.abs_tol, q.rel_tol * abs(value)):
        if not heap:
            raise QuadratureError(
                f"tolerance not reached within max_depth={q.max_depth} "
                f"(estimate {value!r}, error {err:.3g})", estimate=value, error=err)
        neg, _, lo, hi, depth, k, val = heapq.heappop(heap)
        if depth >= q.max_depth:
            frozen.append((neg, seq, lo, hi, depth, k, val))
            seq += 1
            continue
        tmap = pieces[k][2]
        mid = 0.5 * (lo + hi)
        value -= val
        err += neg
        for sub_lo, sub_hi in ((lo, mid), (mid, hi)):
            v2, e2 = _gk15(f, sub_lo, sub_hi, tmap, vectorized)
            heapq.heappush(heap, (-e2, seq, sub_lo, sub_hi, depth + 1, k, v2))
            seq += 1
            value += v2
            err += e2
    value, err = totals()
    return value, err


def brent(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-14) -> float:
    """Root of ``f`` in the bracket ``[lo, hi]`` (Brent's method).

    Raises :class:`RootFindingError` when ``f(lo)`` and ``f(hi)`` have the
    same strict sign.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return float(lo)
    if fhi == 0:
        return float(hi)
    if not (math.isfinite(flo) and math.isfinite(fhi)) or flo * fhi > 0:
        raise RootFindingError(f"no sign change on [{lo}, {hi}]: f={flo!r}, {fhi!r}")
    try:
        return float(optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps,
                                     maxiter=500))
    except (RuntimeError, ValueError) as exc:
        raise RootFindingError(str(exc)) from exc


def _jacobian(F, x, fx, h):
    n = x.size
    J = np.empty((fx.size, n))
    for j in range(n):
        step = h * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += step
        xm[j] -= step
        J[:, j] = (np.asarray(F(xp), float) - np.asarray(F(xm), float)) / (2 * step)
    return J


def newton_nd(F: Callable, x0: Sequence[float], cfg: NewtonConfig = NewtonConfig()) -> np.ndarray:
    """Solve ``F(x) = 0`` by damped Newton with a central-difference Jacobian.

    Steps are shortened by ``cfg.damping`` until the Euclidean residual
    decreases.  Returns the first iterate with ``max|F(x)| <= cfg.tol``.
    """
    x = np.array(x0, dtype=float)
    if x.ndim != 1 or x.size > 8:
        raise DomainError("newton_nd handles between 1 and 8 unknowns")
    fx = np.asarray(F(x), dtype=float)
    for _ in range(cfg.max_iter):
        if np.max(np.abs(fx)) <= cfg.tol:
            return x
        J = _jacobian(F, x, fx, cfg.fd_step)
        try:
            if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e14:
                raise np.linalg.LinAlgError("ill-conditioned")
            dx = np.linalg.solve(J, -fx)
        except np.linalg.LinAlgError as exc:
            raise NewtonError(f"singular Jacobian at x={x.tolist()}", x, fx) from exc
        merit = float(np.dot(fx, fx))
        lam = 1.0
        while True:
            xt = x + lam * dx
            try:
                ft = np.asarray(F(xt), dtype=float)
                ok = np.all(np.isfinite(ft)) and float(np.dot(ft, ft)) < merit
            except (DomainError, QuadratureError):
                ok = False
            if ok:
                break
            lam *= cfg.damping
            if lam < 1e-12:
                if np.max(np.abs(fx)) <= 10 * cfg.tol:
                    return x
                raise NewtonError(f"line search failed at x={x.tolist()}", x, fx)
        x, fx = xt, ft
    if np.max(np.abs(fx)) <= cfg.tol:
        return x
    raise NewtonError(f"no convergence in {cfg.max_iter} iterations "
                      f"(residual {np.max(np.abs(fx)):.3g})", x, fx)


def nnls(A, b, max_iter: int | None = None) -> tuple[np.ndarray, float]:
    """Nonnegative least squares ``min ||A mu - b||`` s.t. ``mu >= 0``.

    Lawson-Hanson active-set method applied to the column-normalised matrix
    (zero columns get ``mu = 0``).

    Returns
    -------
    mu : ndarray
        Minimiser, ``mu >= 0``.
    residual : float
        ``||A mu - b||_2``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2 or b.ndim != 1 or A.shape[0] != b.shape[0]:
        raise DomainError(f"dimension mismatch: A {A.shape}, b {b.shape}")
    m, n = A.shape
    if m < 1 or n < 1:
        raise DomainError("nnls needs at least one row and one column")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise DomainError("nnls inputs must be finite")

    norms = np.linalg.norm(A, axis=0)
    live = norms > 0
    scale = np.where(live, 1.0 / np.where(live, norms, 1.0), 0.0)
    As = A * scale

    if max_iter is None:
        max_iter = 3 * n + 10
    tol = 10 * np.finfo(float).eps * max(m, n) * max(1.0, float(np.abs(b).max()))

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = As.T @ b
    it = 0
    while True:
        cand = (~passive) & live & (w > tol)
        if not cand.any():
            break
        j = int(np.argmax(np.where(cand, w, -np.inf)))
        passive[j] = True
        while True:
            it += 1
            if it > max_iter:
                break
            idx = np.flatnonzero(passive)
            z = np.zeros(n)
            z[idx] = np.linalg.lstsq(As[:, idx], b, rcond=None)[0]
            if np.all(z[idx] > 0):
                x = z
                break
            neg = idx[z[idx] <= 0]
            alpha = np.min(x[neg] / (x[neg] - z[neg]))
            x = x + alpha * (z - x)
            passive &= x > tol
            x[~passive] = 0.0
        if it > max_iter:
            break
        w = As.T @ (b - As @ x)

    mu = x * scale
    return mu, float(np.linalg.norm(A @ mu - b))
