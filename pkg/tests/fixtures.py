"""Links, balance reports and strut diagnostics shared by several test modules."""

from collections import Counter
from functools import lru_cache

import numpy as np

from tightlinks.balance import RESIDUAL_FLOOR, find_struts, solve_balance
from tightlinks.borromean import b2_build, build, component_labels, generating_arc, rotate, solve
from tightlinks.catalog import covered_hopf, naive_clasp, pressed_clasp, regular_polygon_angles, simple_chain, wrapped
from tightlinks.clasp import clasp_sample

RESOLUTIONS = (256, 512, 1024)


@lru_cache(maxsize=None)
def params():
    return solve()


POSITIVE = {
    "simple_chain": simple_chain,
    "covered_hopf(1,1)": lambda n: covered_hopf(1, 1, n),
    "covered_hopf(2,1)": lambda n: covered_hopf(2, 1, n),
    "wrapped(hexagon)": lambda n: wrapped(regular_polygon_angles(6), n),
    "pressed_clasp": pressed_clasp,
    "clasp_sample(1)": lambda n: clasp_sample(1.0, n, 1.0),
    "B0": lambda n: build(params(), n),
}

NEGATIVE = {
    "naive_clasp(1)": lambda n: naive_clasp(1.0, n, 1.0),
    "b2_build": b2_build,
}


@lru_cache(maxsize=None)
def link(name, n):
    return {**POSITIVE, **NEGATIVE}[name](n)


@lru_cache(maxsize=None)
def report(name, n):
    return solve_balance(link(name, n))


def decreasing(residuals):
    """Strictly decreasing, except between values that are both below the solver floor."""
    return all(b < a or max(a, b) < RESIDUAL_FLOOR for a, b in zip(residuals, residuals[1:]))


def strut_families(p, n, tol=1e-4, guard=2):
    """Families of struts away from piece joins, classified by the pieces they join.

    Strut ends within ``2h`` of an intip image are labelled ``I``; struts with
    an end within ``guard`` vertices of a piece join are skipped.
    """
    L = build(p, n)
    lab = np.asarray(component_labels(p, n))
    nv = L.components[0].n_vertices
    h = np.max(np.linalg.norm(L.components[0].edges(), axis=1))
    chg = np.nonzero(lab != np.roll(lab, 1))[0]
    idx = np.arange(nv)
    dj = np.min(np.abs((idx[:, None] - chg[None, :] + nv // 2) % nv - nv // 2), axis=1)
    intips = np.concatenate([rotate(np.array([[2 * p.rho, 0, 0], [-2 * p.rho, 0, 0]]), k)
                             for k in range(3)])
    fams = set()
    for st in find_struts(L, tol, 1e-6).struts:
        keys, near = [], False
        for c, s, t in (st.a, st.b):
            q = L.components[c]
            x = q.segment_starts()[s] + t * (q.segment_ends()[s] - q.segment_starts()[s])
            v = s if t < 0.5 else (s + 1) % nv
            near |= dj[v] < guard
            keys.append("I" if np.min(np.linalg.norm(intips - x, axis=1)) < 2 * h else str(lab[v]))
        if not near:
            fams.add(frozenset(keys))
    return fams


def _point_segment_distances(x, c):
    P, Q = c.segment_starts(), c.segment_ends()
    E = Q - P
    t = np.clip(np.einsum("ij,ij->i", x - P, E) / np.einsum("ij,ij->i", E, E), 0, 1)
    return np.linalg.norm(P + t[:, None] * E - x, axis=1)


def arc_incidence(p, n, eps=1e-4):
    """Typical number of strut partners of a generating-arc vertex, per piece.

    A partner is a local minimum, along the other component, of the distance
    from the vertex, at most ``1 + eps``.  The count reported per piece is
    the most common one over its central three fifths.
    """
    L = build(p, n)
    labels = generating_arc(p, n).labels()
    C0 = L.components[0].vertices
    per = {}
    for k, name in enumerate(labels):
        cnt = 0
        for j in (1, 2):
            d = _point_segment_distances(C0[k], L.components[j])
            cnt += int(((d <= np.roll(d, 1)) & (d < np.roll(d, -1)) & (d <= 1 + eps)).sum())
        per.setdefault(name, []).append(cnt)
    out = {}
    for name, v in per.items():
        m = len(v)
        core = v[m // 5: m - m // 5] if m >= 5 else v
        out[name] = Counter(core).most_common(1)[0][0]
    return out


ACCEPTANCE = {}


def record(number, title, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE[number] = line
    print(line)
    return ok
