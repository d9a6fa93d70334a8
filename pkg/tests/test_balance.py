import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tightlinks.balance import (RESIDUAL_FLOOR, StrutSystem, assemble, find_struts, net_force, solve_balance,
                                strut_weight_between, vertex_loads)
from tightlinks.catalog import (CATALOG, circle, covered_hopf, naive_clasp, pressed_clasp,
                                regular_polygon_angles, simple_chain, wrapped)
from tightlinks.errors import ConstraintViolation, DomainError
from tightlinks.geometry import PolyCurve, PolyLink

import fixtures

X, Y, Z = np.eye(3)


def _same_residual(a, b):
    both_exact = max(a.normalized_residual, b.normalized_residual) < RESIDUAL_FLOOR
    return both_exact or abs(a.normalized_residual - b.normalized_residual) < 1e-9


def _rotation(seed):
    q, r = np.linalg.qr(np.random.default_rng(seed).normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    return q if np.linalg.det(q) > 0 else -q


def _endpoint_point(L, end):
    comp, seg, t = end
    c = L.components[comp]
    v = c.vertices
    return v[seg] + t * (v[(seg + 1) % c.n_vertices] - v[seg])


def test_hopf_wheels():
    N = 720
    L = covered_hopf(1, 1, N)
    S = find_struts(L)
    # near-duplicate contacts inside the tolerance window inflate the raw count
    assert 2 * N <= len(S.struts) <= 8 * N
    centres = [np.zeros(3), np.array([1.0, 0, 0])]
    h = 2 * math.pi / N
    for comp in (0, 1):
        other = 1 - comp
        touched = set()
        for s in S.struts:
            mine, theirs = (s.a, s.b) if s.a[0] == comp else (s.b, s.a)
            if np.linalg.norm(_endpoint_point(L, theirs) - centres[comp]) < 2 * h:
                touched.add(mine[1])
        # every segment is a spoke of the wheel about the other circle's centre point
        assert len(touched) >= N - 2, (comp, other)
    R = solve_balance(L)
    assert R.balanced
    # unit density on both wheels
    assert abs(R.mu.sum() - 4 * math.pi) < 1e-3


def test_coaxial_circles_constant_distance():
    N = 360
    L = PolyLink((PolyCurve(circle([0, 0, 0], X, Y, N), True),
                  PolyCurve(circle([0, 0, 2], X, Y, N), True)))
    S = find_struts(L)
    assert S.thickness == pytest.approx(2.0, abs=1e-12)
    assert N <= len(S.struts) <= 4 * N
    h = 2 * math.sin(math.pi / N)
    assert all(2.0 - 1e-12 <= s.length <= 2.0 + 0.25 * h * h / 2 for s in S.struts)
    assert {round(s.a[1] + s.a[2]) % N for s in S.struts} == set(range(N))
    R = solve_balance(L)
    # parallel struts cannot cancel the in-plane curvature
    assert not R.balanced and R.normalized_residual > 0.999


def test_chain_contains_hub_strut():
    L = simple_chain(256)
    S = find_struts(L)
    hub = [s for s in S.struts if {s.a[0], s.b[0]} == {0, 2}]
    assert hub
    for s in hub:
        assert abs(s.length - 1) < 1e-3
        pa, pb = _endpoint_point(L, s.a), _endpoint_point(L, s.b)
        assert np.allclose(sorted([pa[0], pb[0]]), [-0.5, 0.5], atol=2 * math.pi / 256)


def test_struts_within_window():
    L = simple_chain(128)
    S = find_struts(L, strut_tol=1e-3)
    for s in S.struts:
        assert S.thickness - 1e-15 <= s.length <= S.thickness * (1 + 1e-3)
        assert s.a[0] != s.b[0]
        d = _endpoint_point(L, s.b) - _endpoint_point(L, s.a)
        assert abs(np.linalg.norm(d) - s.length) < 1e-12
        assert np.allclose(d / s.length, s.direction)


def test_find_struts_errors():
    L = simple_chain(64)
    with pytest.raises(DomainError):
        find_struts(L, strut_tol=0)
    with pytest.raises(DomainError):
        find_struts(L, wall_tol=-1)
    touching = PolyLink((
        PolyCurve(np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0.0]]), True),
        PolyCurve(np.array([[0, 0, 0], [-1, 0, 0], [-1, 0, 1.0]]), True),
    ))
    with pytest.raises(ConstraintViolation):
        find_struts(touching)
    with pytest.raises(ConstraintViolation):
        solve_balance(touching)


def test_single_strut_column():
    L = PolyLink((PolyCurve(np.array([[0, 0, 0], [-1, 0, 0.0]]), False),
                  PolyCurve(np.array([[0, 0, 1], [0, 1, 1.0]]), False)))
    S = find_struts(L)
    assert len(S.struts) == 1
    A, b = assemble(L, S)
    col = A.toarray()[:, 0]
    assert np.count_nonzero(col) <= 6
    assert np.allclose(col[0:3], -Z) and np.allclose(col[6:9], Z)
    assert np.all(col[3:6] == 0) and np.all(col[9:] == 0)


def test_interior_strut_is_split_barycentrically():
    L = PolyLink((PolyCurve(np.array([[-1, 0, 0], [3, 0, 0.0]]), False),
                  PolyCurve(np.array([[0, -1, 1], [0, 1, 1.0]]), False)))
    S = find_struts(L)
    A, _ = assemble(L, S)
    col = A.toarray()[:, 0]
    assert np.allclose(col[[2, 5, 8, 11]], [-0.75, -0.25, 0.5, 0.5])


def test_closed_block_of_b_sums_to_zero():
    L = simple_chain(128)
    _, b = assemble(L, StrutSystem([], [], 1.0))
    off = L.vertex_offsets()
    for i in range(L.n_components):
        block = b[3 * off[i]:3 * off[i + 1]].reshape(-1, 3)
        assert np.abs(block.sum(axis=0)).max() < 1e-12


def test_single_circle_unbalanced():
    L = PolyLink((PolyCurve(circle([0, 0, 0], X, Y, 128), True),))
    R = solve_balance(L)
    assert R.verdict == "unbalanced"
    assert R.normalized_residual == pytest.approx(1.0, abs=1e-12)
    assert len(R.system.struts) == 0


def test_verdict_threshold_validation():
    with pytest.raises(DomainError):
        solve_balance(simple_chain(64), verdict_threshold=0)
    with pytest.raises(DomainError):
        solve_balance(simple_chain(64), solver="magic")


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_mu_nonnegative_and_residual_bounded(name):
    R = solve_balance(CATALOG[name](128))
    assert np.all(R.mu >= 0)
    assert 0 <= R.normalized_residual <= 1 + 1e-9


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_rigid_motion_invariance(name):
    L = CATALOG[name](128)
    M = L.transformed(_rotation(7), shift=[0.3, -1.7, 2.9])
    a, b = solve_balance(L), solve_balance(M)
    assert a.verdict == b.verdict
    assert _same_residual(a, b)


@pytest.mark.parametrize("name", ["simple_chain", "naive_clasp", "pressed_clasp"])
def test_scaling_invariance(name):
    L = CATALOG[name](128)
    a, b = solve_balance(L), solve_balance(L.transformed(scale=2.5))
    assert len(a.system.struts) == len(b.system.struts)
    assert b.system.thickness == pytest.approx(2.5 * a.system.thickness, rel=1e-12)
    assert a.verdict == b.verdict
    assert _same_residual(a, b)


@settings(max_examples=10, deadline=None)
@given(scale=st.floats(0.2, 5.0), seed=st.integers(0, 2 ** 16))
def test_hopf_verdict_under_similarity(scale, seed):
    L = covered_hopf(1, 1, 128)
    R0 = solve_balance(L)
    R1 = solve_balance(L.transformed(_rotation(seed), shift=[1, 2, 3], scale=scale))
    assert R0.verdict == R1.verdict == "balanced"
    assert _same_residual(R0, R1)


def _corner_violation(L, R, mu_tol=1e-8):
    """Largest ``d . e / h`` over loaded strut ends, ``e`` a unit edge direction leaving the end."""
    worst = 0.0
    for s, m in zip(R.system.struts, R.strut_mu):
        if m <= mu_tol:
            continue
        for (comp, seg, t), d in ((s.a, s.direction), (s.b, -s.direction)):
            c = L.components[comp]
            V, n = c.vertices, c.n_vertices
            p = V[seg] + t * (V[(seg + 1) % n] - V[seg])
            h = np.linalg.norm(V[(seg + 1) % n] - V[seg])
            dirs = []
            if t < 1 - 1e-9:
                dirs.append(V[(seg + 1) % n] - p)
            if t > 1e-9:
                dirs.append(V[seg] - p)
            if t <= 1e-9 and (c.closed or seg > 0):
                dirs.append(V[(seg - 1) % n] - V[seg])
            if t >= 1 - 1e-9 and (c.closed or seg + 2 < n):
                dirs.append(V[(seg + 2) % n] - V[(seg + 1) % n])
            for e in dirs:
                worst = max(worst, float(d @ e) / np.linalg.norm(e) / h)
    return worst


@pytest.mark.parametrize("name", list(fixtures.POSITIVE))
def test_corner_condition(name):
    # a loaded strut end never has a neighbouring point closer to the far end, up to O(h)
    L, R = fixtures.link(name, 256), fixtures.report(name, 256)
    assert R.balanced
    assert _corner_violation(L, R) <= 10.0


@pytest.mark.parametrize("factory", [lambda: covered_hopf(1, 1, 32), lambda: naive_clasp(1.0, 16, 1.0),
                                     lambda: naive_clasp(1.0, 16, 0.0), lambda: simple_chain(64)])
def test_dense_and_conic_agree(factory):
    L = factory()
    a = solve_balance(L, solver="dense")
    b = solve_balance(L, solver="conic")
    assert a.verdict == b.verdict
    assert abs(a.normalized_residual - b.normalized_residual) < 1e-6


def test_pressed_tip_rows():
    L = pressed_clasp(128)
    R = solve_balance(L)
    S = R.system
    assert len(S.wall_struts) == 2
    A, _ = assemble(L, S)
    A = A.toarray()
    off = L.vertex_offsets()
    for j, w in enumerate(S.wall_struts):
        row = 3 * (off[w.component] - off[0]) + 3 * w.vertex + 2
        # endpoints of the tip's component are projected: count their lost rows
        cid = w.component
        row -= sum(3 - L.endpoint_constraints[(c, e)].basis.shape[0]
                   for (c, e) in L.endpoint_constraints
                   if off[c] + (0 if e == "start" else L.components[c].n_vertices - 1)
                   < off[cid] + w.vertex)
        wall = A[row, len(S.struts) + j]
        struts = A[row, :len(S.struts)]
        assert wall != 0
        assert np.any(struts * wall < 0)
    assert R.balanced
    assert R.wall_mu.min() > 1.5


def test_pressed_needs_walls():
    L = pressed_clasp(256)
    assert not solve_balance(L, use_walls=False).balanced
    assert not solve_balance(L.without_obstacles()).balanced


def test_zero_weight_struts_are_admitted():
    # turning angles 2 pi / 3: neighbouring circles just touch along the triangle edges
    L = wrapped(regular_polygon_angles(3), 256)
    R = solve_balance(L)
    assert R.balanced
    assert np.count_nonzero(R.strut_mu < 1e-9) > 0
    for i in range(1, 4):
        assert strut_weight_between(R, i, i % 3 + 1) == pytest.approx(1.0, rel=0.01)


def test_chain_weights_and_forces():
    L, R = fixtures.link("simple_chain", 512), fixtures.report("simple_chain", 512)
    assert R.balanced
    assert strut_weight_between(R, 0, 2) == pytest.approx(2.0, rel=0.05)
    st_ = L.components[1].vertices
    right = np.nonzero(st_[:, 0] > 0.5 + 1e-12)[0]
    F = net_force(L, R, 1, right)
    assert np.linalg.norm(F.strut) == pytest.approx(2.0, rel=0.05)
    assert np.allclose(F.curvature, [-2, 0, 0], atol=1e-2)
    assert np.linalg.norm(F.total) < 0.05
    # whole closed component: the residual bounds the net force
    for comp in range(L.n_components):
        idx = range(L.components[comp].n_vertices)
        G = net_force(L, R, comp, idx)
        assert np.linalg.norm(G.total) <= math.sqrt(len(idx)) * R.residual_norm + 1e-12


def test_vertex_loads_reproduce_residual():
    L = simple_chain(128)
    R = solve_balance(L)
    from tightlinks.geometry import curvature_force_array
    loads = vertex_loads(L, R)
    for comp, c in enumerate(L.components):
        r = loads[comp] + curvature_force_array(c)
        off = L.vertex_offsets()[comp]
        got = np.array([R.vertex_residuals[off + v] for v in range(c.n_vertices)])
        assert np.allclose(r, got, atol=1e-12)


def test_report_dict_schema():
    R = solve_balance(pressed_clasp(64))
    d = R.to_dict()
    assert set(d) == {"thickness", "strut_count", "wall_count", "residual_norm",
                      "normalized_residual", "verdict", "struts", "walls"}
    assert d["strut_count"] == len(d["struts"]) and d["wall_count"] == len(d["walls"]) == 2
    assert set(d["struts"][0]) == {"a", "b", "length", "mu"}
    assert set(d["walls"][0]) == {"comp", "vertex", "obstacle", "mu"}
    json.dumps(d, allow_nan=False)
