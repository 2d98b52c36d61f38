from __future__ import annotations

import random
from fractions import Fraction

import pytest

from ncsos import linprog
from ncsos.cones import (
    ConeV,
    LexFunctional,
    PointInsideCone,
    cone_from_json,
    cone_to_json,
    evaluate_lex,
    extend_functional,
    lineality,
    membership,
    separate_point,
)
from ncsos.rcf import RcfScalar

F = Fraction


# ---------------------------------------------------------------------------
# simplex core
# ---------------------------------------------------------------------------

def test_lp_basic_optimum():
    # min -x1 - 2 x2 s.t. x1 + x2 + s = 4, x2 + t = 3, all >= 0
    A = [[F(1), F(1), F(1), F(0)], [F(0), F(1), F(0), F(1)]]
    b = [F(4), F(3)]
    c = [F(-1), F(-2), F(0), F(0)]
    res = linprog.solve_lp(A, b, c)
    assert res.status == linprog.OPTIMAL
    assert res.obj == F(-7)
    assert res.x[0] == 1 and res.x[1] == 3


def test_lp_infeasible_gives_farkas():
    # x1 + x2 = -1 with x >= 0 is infeasible
    A = [[F(1), F(1)]]
    b = [F(-1)]
    res = linprog.solve_lp(A, b, [F(0), F(0)])
    assert res.status == linprog.INFEASIBLE
    y = res.y
    assert y[0] * A[0][0] <= 0 and y[0] * A[0][1] <= 0
    assert y[0] * b[0] > 0


def test_lp_unbounded():
    # min -x1 s.t. x1 - x2 = 0
    A = [[F(1), F(-1)]]
    b = [F(0)]
    res = linprog.solve_lp(A, b, [F(-1), F(0)])
    assert res.status == linprog.UNBOUNDED


def test_lp_random_vs_feasibility():
    rng = random.Random(424242)
    for _ in range(60):
        m, n = rng.randint(1, 3), rng.randint(2, 5)
        A = [[F(rng.randint(-3, 3)) for _ in range(n)] for _ in range(m)]
        xfeas = [F(rng.randint(0, 3)) for _ in range(n)]
        b = [sum(A[i][j] * xfeas[j] for j in range(n)) for i in range(m)]
        res = linprog.solve_lp(A, b, [F(rng.randint(-2, 2)) for _ in range(n)])
        assert res.status in (linprog.OPTIMAL, linprog.UNBOUNDED)
        if res.status == linprog.OPTIMAL:
            for i in range(m):
                assert sum(A[i][j] * res.x[j] for j in range(n)) == b[i]
            assert all(v >= 0 for v in res.x)


# ---------------------------------------------------------------------------
# membership / lineality
# ---------------------------------------------------------------------------

def test_membership_inside():
    C = ConeV(2, [(1, 0), (0, 1)])
    res = membership(C, (2, 3))
    assert res.inside
    assert res.coefficients == [F(2), F(3)]


def test_membership_outside_certificate():
    C = ConeV(2, [(1, 0), (0, 1)])
    res = membership(C, (-1, 5))
    assert not res.inside
    y = res.certificate
    assert all(sum(a * b for a, b in zip(y, g)) <= 0 for g in C.generators)
    assert y[0] * -1 + y[1] * 5 > 0


def test_lineality_halfplane():
    C = ConeV(2, [(1, 0), (-1, 0), (0, 1)])
    basis = lineality(C)
    assert len(basis) == 1
    v = basis[0]
    assert v[1] == 0 and v[0] != 0


def test_lineality_trivial():
    assert lineality(ConeV(2, [(1, 1)])) == []
    assert len(lineality(ConeV(2, [(1, 0), (-1, 0), (0, 1), (0, -1)]))) == 2


# ---------------------------------------------------------------------------
# separation: the contract is the oracle
# ---------------------------------------------------------------------------

def _check_separation_contract(C: ConeV, x, f: LexFunctional):
    lin = lineality(C)

    def in_lin(g):
        if not lin:
            return not any(g)
        from ncsos.exactla import solve_linear
        A = [[lin[j][i] for j in range(len(lin))] for i in range(C.dim)]
        return solve_linear(A, list(g)) is not None

    vx = evaluate_lex(f, x)
    assert vx < 0, "phi(x) must be lexicographically negative"
    for g in C.generators:
        vg = evaluate_lex(f, g)
        assert vg >= 0
        if in_lin(g):
            assert vg == 0
        else:
            assert vg > 0
    for v in lin:
        assert evaluate_lex(f, v) == 0
    assert len(f.stages) <= C.dim


def test_separate_axes_cone():
    C = ConeV(2, [(1, 0), (0, 1)])
    x = (-1, 0)
    f = separate_point(C, x)
    _check_separation_contract(C, x, f)
    # deterministic
    g = separate_point(C, x)
    assert f.stages == g.stages


def test_separate_needs_two_stages():
    # half-plane cone: x-axis is lineality, x below needs the stacked stage
    C = ConeV(2, [(1, 0), (-1, 0), (0, 1)])
    x = (0, -1)
    f = separate_point(C, x)
    _check_separation_contract(C, x, f)
    # the x-axis is killed by every stage
    assert evaluate_lex(f, (1, 0)) == 0
    assert evaluate_lex(f, (-1, 0)) == 0


def test_separate_dim1():
    C = ConeV(1, [(1,)])
    f = separate_point(C, (-1,))
    _check_separation_contract(C, (-1,), f)


def test_separate_rejects_members():
    C = ConeV(2, [(1, 0), (0, 1)])
    with pytest.raises(PointInsideCone) as ei:
        separate_point(C, (2, 1))
    assert ei.value.coefficients == [F(2), F(1)]
    with pytest.raises(PointInsideCone):
        separate_point(C, (0, 0))


def test_separate_point_on_lineality_boundary():
    # x in span of generators but outside the cone
    C = ConeV(3, [(1, 0, 0), (0, 1, 0)])
    x = (-1, -1, 0)
    f = separate_point(C, x)
    _check_separation_contract(C, x, f)


def _random_cone_and_point(rng, dim):
    k = rng.randint(1, 2 * dim)
    gens = []
    while len(gens) < k:
        g = tuple(F(rng.randint(-3, 3)) for _ in range(dim))
        if any(g):
            gens.append(g)
    x = tuple(F(rng.randint(-4, 4)) for _ in range(dim))
    return ConeV(dim, gens), x


def test_separation_randomized_against_membership():
    rng = random.Random(777)
    separated = 0
    for _ in range(60):
        dim = rng.randint(1, 4)
        C, x = _random_cone_and_point(rng, dim)
        res = membership(C, x)
        if res.inside:
            with pytest.raises(PointInsideCone):
                separate_point(C, x)
            continue
        f = separate_point(C, x)
        _check_separation_contract(C, x, f)
        separated += 1
    assert separated >= 20


def test_separation_scale_invariance():
    rng = random.Random(31337)
    for _ in range(20):
        dim = rng.randint(1, 3)
        C, x = _random_cone_and_point(rng, dim)
        if membership(C, x).inside:
            continue
        scale_x = F(rng.randint(1, 5), rng.randint(1, 5))
        factors = [F(rng.randint(1, 4)) for _ in C.generators]
        scaled_gens = [tuple(f * c for c in g)
                       for f, g in zip(factors, C.generators)]
        C2 = ConeV(dim, scaled_gens)
        x2 = tuple(scale_x * c for c in x)
        assert not membership(C2, x2).inside
        f2 = separate_point(C2, x2)
        _check_separation_contract(C2, x2, f2)


# ---------------------------------------------------------------------------
# lexicographic evaluation
# ---------------------------------------------------------------------------

def test_evaluate_lex_levels():
    f = LexFunctional(2, [(1, 0), (0, 1)])
    assert evaluate_lex(f, (0, 1)) == RcfScalar.parse("e^1")
    assert evaluate_lex(f, (2, -3)) == RcfScalar.parse("2 - 3*e^1")
    assert evaluate_lex(f, (0, 0)) == 0
    # third stage sits at eps^3
    f3 = LexFunctional(3, [(1, 0, 0), (0, 1, 0), (0, 0, 1)])
    assert evaluate_lex(f3, (0, 0, 5)) == RcfScalar.parse("5*e^3")


# ---------------------------------------------------------------------------
# extension from a subspace
# ---------------------------------------------------------------------------

def test_extend_functional_basic():
    C = ConeV(2, [(0, 1)])
    f = extend_functional(C, [(1, 0)], [1])
    assert evaluate_lex(f, (1, 0)) == 1          # agrees on H
    v = evaluate_lex(f, (0, 1))
    assert v > 0 and v.is_infinitesimal()        # strictly positive below H


def test_extend_functional_trivial_subspace():
    C = ConeV(2, [(1, 0)])
    f = extend_functional(C, [], [])
    assert evaluate_lex(f, (1, 0)) > 0


def test_extend_functional_zero_on_line():
    C = ConeV(2, [(1, 0), (-1, 0)])
    f = extend_functional(C, [(1, 0)], [0])
    assert evaluate_lex(f, (1, 0)) == 0
    assert evaluate_lex(f, (-1, 0)) == 0


def test_extend_functional_precondition():
    # (C+H) ∩ -(C+H) is the whole plane here, not H
    C = ConeV(2, [(1, 1), (-1, -1), (0, 1), (0, -1)])
    with pytest.raises(ValueError):
        extend_functional(C, [(1, 0)], [1])


def test_extend_functional_lp_fallback():
    # zero-extension of phi_H is negative on the generator (-1, 1); the
    # LP fallback must still produce a valid extension
    C = ConeV(2, [(1, 0), (-1, 1)])
    f = extend_functional(C, [(1, 0)], [1])
    assert evaluate_lex(f, (1, 0)) == 1
    assert evaluate_lex(f, (-1, 1)) >= 0
    assert evaluate_lex(f, (-1, 1)) > 0


def test_extend_functional_rejects_negative_on_h():
    C = ConeV(2, [(1, 0), (0, 1)])
    with pytest.raises(ValueError):
        extend_functional(C, [(1, 0)], [-1])


# ---------------------------------------------------------------------------
# JSON round trips
# ---------------------------------------------------------------------------

def test_cone_json_roundtrip():
    C = ConeV(2, [(F(1, 2), F(-3)), (0, 1)])
    C2 = cone_from_json(cone_to_json(C))
    assert C2.dim == C.dim and C2.generators == C.generators


def test_lexfunctional_json_roundtrip():
    f = LexFunctional(2, [(F(1, 3), F(0)), (F(0), F(-2))])
    g = LexFunctional.from_json(f.to_json())
    assert g.stages == f.stages and g.dim == f.dim
