"""Finitely generated rational cones and infinitesimal-order separation.

A point outside a finitely generated cone in Q^n can always be split from it
by a *stack* of rational covectors evaluated lexicographically: stage 1 is
worth 1, stage i is worth ``level_infinitesimal(i-1)``.  The stack is built
by a descending flag of subspaces, one exact LP per stage, and the result
satisfies, with phi the stacked functional:

* ``phi(x) < 0``,
* ``phi(g) >= 0`` for every generator,
* ``phi(g) > 0`` for every generator outside the lineality space,
* ``phi == 0`` on the lineality space.

Everything is Fraction arithmetic; verdicts are exact.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Sequence

from . import exactla, linprog
from .qc import _frac
from .rcf import RcfScalar, level_infinitesimal

Vec = tuple


def _vec(xs) -> Vec:
    return tuple(_frac(x) for x in xs)


def _dot(u, v) -> Fraction:
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


class ConeV:
    """cone(generators) in Q^dim. Generators are kept as given (no pruning)."""

    __slots__ = ("dim", "generators")

    def __init__(self, dim: int, generators: Sequence[Sequence]):
        gens = tuple(_vec(g) for g in generators)
        for g in gens:
            if len(g) != dim:
                raise ValueError(f"generator {g} does not have dim {dim}")
        self.dim = dim
        self.generators = gens

    def __repr__(self):
        return f"ConeV(dim={self.dim}, {len(self.generators)} generators)"


class MembershipResult:
    __slots__ = ("inside", "coefficients", "certificate")

    def __init__(self, inside, coefficients=None, certificate=None):
        self.inside = inside
        self.coefficients = coefficients  # nonneg combination when inside
        self.certificate = certificate    # covector: <=0 on gens, >0 at x

    def __bool__(self):
        return self.inside

    def __repr__(self):
        return f"MembershipResult(inside={self.inside})"


class PointInsideCone(ValueError):
    """separate_point was handed a member of the cone."""

    def __init__(self, coefficients):
        super().__init__("point lies in the cone; separation is impossible")
        self.coefficients = coefficients


def membership(C: ConeV, x) -> MembershipResult:
    """Exact membership of x in cone(C), LP-certified both ways."""
    x = _vec(x)
    if len(x) != C.dim:
        raise ValueError("point dimension mismatch")
    k = len(C.generators)
    if k == 0:
        if any(x):
            cert = tuple(xi for xi in x)  # <x, .> is positive at x
            return MembershipResult(False, certificate=cert)
        return MembershipResult(True, coefficients=[])
    A = [[C.generators[j][i] for j in range(k)] for i in range(C.dim)]
    res = linprog.solve_lp(A, list(x), [Fraction(0)] * k)
    if res.status == linprog.OPTIMAL:
        return MembershipResult(True, coefficients=res.x)
    assert res.status == linprog.INFEASIBLE
    y = tuple(res.y)
    # Farkas: y.g <= 0 for every generator, y.x > 0
    assert all(_dot(y, g) <= 0 for g in C.generators) and _dot(y, x) > 0
    return MembershipResult(False, certificate=y)


def lineality(C: ConeV):
    """Basis of span{g_j : -g_j in C} = C ∩ -C for finitely generated C."""
    two_sided = [g for g in C.generators
                 if membership(C, tuple(-c for c in g)).inside]
    if not two_sided:
        return []
    rows, pivots = exactla.rref([list(g) for g in two_sided])
    return [tuple(rows[i]) for i in range(len(pivots))]


def _in_span(basis, v) -> bool:
    if not basis:
        return not any(v)
    A = [[basis[j][i] for j in range(len(basis))] for i in range(len(v))]
    return exactla.solve_linear(A, list(v)) is not None


class LexFunctional:
    """A stack of covectors evaluated with infinitesimal level weights.

    ``active_sets[i]`` records which generator indices were still undecided
    when stage i was produced (bookkeeping for the flag construction, also
    used by the tests).
    """

    __slots__ = ("dim", "stages", "active_sets")

    def __init__(self, dim, stages, active_sets=None):
        self.dim = dim
        self.stages = tuple(_vec(s) for s in stages)
        for s in self.stages:
            if len(s) != dim:
                raise ValueError("stage dimension mismatch")
        self.active_sets = tuple(tuple(a) for a in active_sets) \
            if active_sets is not None else tuple(() for _ in self.stages)

    def __repr__(self):
        return f"LexFunctional(dim={self.dim}, {len(self.stages)} stages)"

    def to_json(self) -> str:
        return json.dumps({
            "dim": self.dim,
            "stages": [[str(c) for c in s] for s in self.stages],
        })

    @staticmethod
    def from_json(text: str) -> "LexFunctional":
        data = json.loads(text)
        return LexFunctional(data["dim"], data["stages"])


def evaluate_lex(f: LexFunctional, v, order: int | None = None) -> RcfScalar:
    """phi(v) as a jet: stage i carries weight level_infinitesimal(i-1)."""
    v = _vec(v)
    if len(v) != f.dim:
        raise ValueError("vector dimension mismatch")
    acc = RcfScalar.zero(order)
    for i, stage in enumerate(f.stages):
        val = _dot(stage, v)
        if val:
            acc = acc + level_infinitesimal(i, acc.order) * val
    return acc


# ---------------------------------------------------------------------------
# stage LPs
# ---------------------------------------------------------------------------

def _stage_lp(h_basis, gens, x=None, objective="cover"):
    """One flag stage on the subspace spanned by h_basis.

    Variables: the covector phi = sum lambda_j h_j (lambda free, split), plus
    score variables s_g in [0,1] per generator when objective == "cover".
    Constraints: phi(g) >= s_g, coordinates of phi in [-1,1], and phi(x) <= 0
    when x is given.  objective == "repel" instead maximizes -phi(x).

    Returns (phi, opt) with phi a covector in ambient coordinates.
    """
    k = len(h_basis)
    n = len(h_basis[0]) if k else 0
    ng = len(gens)
    cover = objective == "cover"
    # columns: lam+ (k) | lam- (k) | s (ng if cover) | slacks appended below
    ncore = 2 * k + (ng if cover else 0)
    rows, rhs = [], []

    def phi_row(vec):
        """coefficients of phi(vec) in terms of lam+/lam-"""
        coeffs = [_dot(h, vec) for h in h_basis]
        return coeffs + [-c for c in coeffs]

    for idx, g in enumerate(gens):
        if cover:
            # phi(g) - s_g - u = 0
            row = phi_row(g) + [Fraction(0)] * ng
            row[2 * k + idx] = Fraction(-1)
            rows.append(row)
            rhs.append(Fraction(0))
            # s_g + v = 1
            row = [Fraction(0)] * ncore
            row[2 * k + idx] = Fraction(1)
            rows.append(row)
            rhs.append(Fraction(1))
        else:
            # phi(g) - u = 0  (nonnegativity on the residual generators)
            rows.append(phi_row(g))
            rhs.append(Fraction(0))
    if x is not None:
        # phi(x) + w = 0
        rows.append(phi_row(x) + ([Fraction(0)] * ng if cover else []))
        rhs.append(Fraction(0))
    for c in range(n):
        unit = tuple(Fraction(1) if i == c else Fraction(0) for i in range(n))
        base = phi_row(unit) + ([Fraction(0)] * ng if cover else [])
        rows.append(list(base))   # coord + p = 1
        rhs.append(Fraction(1))
        rows.append([-v for v in base])  # -coord + q = 1
        rhs.append(Fraction(1))

    # append slack identity: every row above is "core-part + slack = rhs"
    # except the phi(g) >= s rows which need slack sign -1 handled already
    m = len(rows)
    slack_signs = []
    ptr = 0
    for idx in range(ng):
        if cover:
            slack_signs.append(-1)  # phi(g) - s - u = 0
            slack_signs.append(1)   # s + v = 1
        else:
            slack_signs.append(-1)  # phi(g) - u = 0
    if x is not None:
        slack_signs.append(1)       # phi(x) + w = 0
    slack_signs.extend([1, 1] * n)
    assert len(slack_signs) == m, (len(slack_signs), m)
    for i in range(m):
        rows[i] = rows[i] + [Fraction(slack_signs[i]) if j == i else Fraction(0)
                             for j in range(m)]
    nvar = ncore + m
    if cover:
        cost = [Fraction(0)] * (2 * k) + [Fraction(-1)] * ng + [Fraction(0)] * m
    else:
        cost = phi_row(x) + [Fraction(0)] * m  # minimize phi(x)
    res = linprog.solve_lp(rows, rhs, cost)
    assert res.status == linprog.OPTIMAL, res.status
    lam = [res.x[j] - res.x[k + j] for j in range(k)]
    phi = tuple(sum((lam[j] * h_basis[j][i] for j in range(k)), Fraction(0))
                for i in range(n))
    return phi, -res.obj


def separate_point(C: ConeV, x) -> LexFunctional:
    """Stacked separating functional for x not in C.

    Flag construction: at stage i, an exact LP finds a covector supported on
    the current subspace, nonnegative on the still-active generators,
    nonpositive at x, scoring as many generators strictly positive as the
    box allows.  Scored generators drop out; the subspace shrinks by the
    kernel; when the active set only spans the lineality space a final
    repelling stage handles x if no earlier stage did.
    """
    x = _vec(x)
    inside = membership(C, x)
    if inside:
        raise PointInsideCone(inside.coefficients)
    n = C.dim
    h_basis = [tuple(Fraction(1) if i == c else Fraction(0) for i in range(n))
               for c in range(n)]
    active = list(range(len(C.generators)))
    x_active = True
    stages, active_sets = [], []
    while active and len(stages) < n:
        gens = [C.generators[j] for j in active]
        phi, opt = _stage_lp(h_basis, gens, x if x_active else None, "cover")
        if opt == 0:
            break  # active generators span a subspace: the lineality
        stages.append(phi)
        active_sets.append(tuple(active))
        if x_active and _dot(phi, x) < 0:
            x_active = False
        active = [j for j in active if _dot(phi, C.generators[j]) == 0]
        h_basis = _restrict(h_basis, phi)
        if not h_basis:
            break
    if x_active:
        gens = [C.generators[j] for j in active]
        phi, opt = _stage_lp(h_basis, gens, x, "repel")
        assert opt > 0, "point outside the cone must admit a repelling stage"
        stages.append(phi)
        active_sets.append(tuple(active))
    return LexFunctional(n, stages, active_sets)


def _restrict(h_basis, phi):
    """Basis of {v in span(h_basis) : phi(v) = 0}."""
    row = [_dot(phi, h) for h in h_basis]
    if not any(row):
        return list(h_basis)
    null = exactla.nullspace([row])
    out = []
    for lam in null:
        v = tuple(sum((lam[j] * h_basis[j][i] for j in range(len(h_basis))),
                      Fraction(0))
                  for i in range(len(h_basis[0])))
        out.append(v)
    return out


def extend_functional(C: ConeV, h_basis: Sequence[Sequence],
                      phi_h: Sequence) -> LexFunctional:
    """Extend a functional given on a subspace H to a stacked functional
    nonnegative on C, agreeing with the original on H and strictly positive
    on every generator outside H.

    Precondition (checked): (C + H) ∩ -(C + H) = H, and the given values are
    nonnegative on the generators that lie inside H.  The H-values stay at
    level 0; the strictness stages live strictly below them.
    """
    h_basis = [_vec(h) for h in h_basis]
    phi_h = [_frac(v) for v in phi_h]
    if len(phi_h) != len(h_basis):
        raise ValueError("one value per H-basis vector required")
    n = C.dim
    for h in h_basis:
        if len(h) != n:
            raise ValueError("H basis dimension mismatch")
    # cone C + H and its lineality
    ext_gens = list(C.generators) + h_basis + [tuple(-c for c in h)
                                               for h in h_basis]
    big = ConeV(n, ext_gens)
    lin = lineality(big)
    if not _same_span(lin, h_basis):
        raise ValueError("(C+H) ∩ -(C+H) must equal H for the extension")
    ext = _min_norm_extension(h_basis, phi_h, n)
    inside_h = [g for g in C.generators if _in_span(h_basis, g)]
    for g in inside_h:
        if _dot(ext, g) < 0:
            raise ValueError("given functional is negative on a generator in H")
    outside = [g for g in C.generators if not _in_span(h_basis, g)]
    if any(_dot(ext, g) < 0 for g in outside):
        ext = _nonneg_extension(h_basis, phi_h, C.generators, n)
    # strictness stages: flag on C+H without a point constraint
    psi_stages = []
    hb = [tuple(Fraction(1) if i == c else Fraction(0) for i in range(n))
          for c in range(n)]
    active = list(range(len(ext_gens)))
    while active and len(psi_stages) < n:
        gens = [ext_gens[j] for j in active]
        phi, opt = _stage_lp(hb, gens, None, "cover")
        if opt == 0:
            break
        psi_stages.append(phi)
        active = [j for j in active if _dot(phi, ext_gens[j]) == 0]
        hb = _restrict(hb, phi)
        if not hb:
            break
    f = LexFunctional(n, [ext] + psi_stages)
    for g in C.generators:
        val = evaluate_lex(f, g)
        if val < 0 or (not _in_span(h_basis, g) and not val > 0):
            raise AssertionError("extension failed its contract on a generator")
    return f


def _same_span(b1, b2) -> bool:
    return all(_in_span(b1, v) for v in b2) and all(_in_span(b2, v) for v in b1)


def _min_norm_extension(h_basis, phi_h, n):
    """The covector inside span(H) taking the given values on the basis."""
    if not h_basis:
        return tuple(Fraction(0) for _ in range(n))
    k = len(h_basis)
    gram = [[_dot(h_basis[i], h_basis[j]) for j in range(k)] for i in range(k)]
    mu = exactla.solve_linear(gram, list(phi_h))
    assert mu is not None, "H basis must be linearly independent"
    return tuple(sum((mu[j] * h_basis[j][i] for j in range(k)), Fraction(0))
                 for i in range(n))


def _nonneg_extension(h_basis, phi_h, gens, n):
    """LP fallback: f with f(h_j) = phi_h_j and f(g) >= 0 on all generators.

    Exists by Farkas whenever the precondition holds; minimizes sum f(g) for
    determinism.
    """
    # variables: f+ (n) | f- (n) | slacks per generator
    ng = len(gens)
    rows, rhs = [], []
    for h, val in zip(h_basis, phi_h):
        rows.append(list(h) + [-c for c in h] + [Fraction(0)] * ng)
        rhs.append(val)
    for i, g in enumerate(gens):
        row = list(g) + [-c for c in g] + [Fraction(0)] * ng
        row[2 * n + i] = Fraction(-1)
        rows.append(row)
        rhs.append(Fraction(0))
    cost_core = [Fraction(0)] * (2 * n)
    for g in gens:
        for i in range(n):
            cost_core[i] += g[i]
            cost_core[n + i] -= g[i]
    cost = cost_core + [Fraction(0)] * ng
    res = linprog.solve_lp(rows, rhs, cost)
    if res.status != linprog.OPTIMAL:
        raise ValueError("no nonnegative extension exists; precondition violated")
    return tuple(res.x[i] - res.x[n + i] for i in range(n))


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def cone_to_json(C: ConeV) -> str:
    return json.dumps({
        "dim": C.dim,
        "generators": [[str(c) for c in g] for g in C.generators],
    })


def cone_from_json(text: str) -> ConeV:
    data = json.loads(text)
    return ConeV(int(data["dim"]), data["generators"])
