"""Finite-dimensional representation witnesses from positive functionals.

Two pipelines live here.

The refutation pipeline turns a negative-value dual functional into a
concrete finite-dimensional representation: build the inner-product space
generated by short words (dropping null vectors), compress the generator
actions onto it, dilate each compression to a unitary of doubled size,
and evaluate the target there.  The evaluation reproduces the
functional's value, so a negative number falls out of explicit matrices
that anyone can replay with matrix products alone.

The cocycle pipeline works in the augmentation ideal: the same
inner-product construction on the c(g) basis yields generator matrices
and a map delta with delta(gh) = pi(g) delta(h) + delta(g).  Solving
delta(g) = pi(g) x - x decides innerness, and pairing delta vectors
turns a cocycle back into a positive functional on ideal products.
"""

import json
import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .groupalg import (
    FINITE,
    FREE,
    FREE_ABELIAN,
    FREE_STAR,
    AlgebraElement,
    AlgebraSpec,
    ball,
    element_from_dict,
    element_to_dict,
)
from .exactla import ldlt_psd_qc, unit_lower_inverse
from .qc import QC
from .soscone import CoverageError, DualWitness, GramAssembly

NULL_TOL = 1e-9          # relative eigenvalue threshold for null modes
CONTRACTION_TOL = 1e-9   # singular values may exceed 1 by at most this
UNITARITY_TOL = 1e-8
COCYCLE_TOL = 1e-8
REPLAY_TOL = 1e-10


def _c(z: QC) -> complex:
    return complex(float(z.re), float(z.im))


def _generator_words(spec: AlgebraSpec):
    """Canonical generator words, one per generator (no inverses)."""
    if spec.kind == FINITE:
        return list(range(1, spec.order))
    if spec.kind == FREE_ABELIAN:
        return [tuple(1 if j == i else 0 for j in range(spec.rank))
                for i in range(spec.rank)]
    return [(i,) for i in range(1, spec.rank + 1)]


def _letter_matrix(spec: AlgebraSpec, letter: int, gens):
    if spec.kind == FREE:
        if letter > 0:
            return gens[letter - 1]
        return gens[-letter - 1].conj().T
    # free_star: letters rank+1..2*rank are starred copies
    if letter <= spec.rank:
        return gens[letter - 1]
    return gens[letter - spec.rank - 1].conj().T


def _word_matrix(spec: AlgebraSpec, w, gens, dim: int):
    M = np.eye(dim, dtype=complex)
    for letter in w:
        M = M @ _letter_matrix(spec, letter, gens)
    return M


# ---------------------------------------------------------------------------
# inner-product space from moment data
# ---------------------------------------------------------------------------

def _orthonormal_frame(Kq, K):
    """Frame and coordinate data for a moment matrix given exactly.

    The positive-semidefiniteness decision is always exact (rational
    LDL*).  When the positive pivots are well separated from zero, the
    frame comes from the exact factor as well: one square root per pivot
    is the only rounding, so dyadic moment data produces exactly
    representable frames, coordinates and states.  Nearly degenerate
    moments fall back to an eigendecomposition with a relative cutoff.

    Returns ``(frame, coords, null_dim, null_vectors)``.
    """
    try:
        ok, dvec, L, _ = ldlt_psd_qc(Kq)
    except ValueError as exc:
        raise ValueError(f"moment matrix is not hermitian: {exc}") from exc
    if not ok:
        raise ValueError("moment matrix is not positive semidefinite")
    n = len(Kq)
    pos = [k for k in range(n) if dvec[k] > 0]
    dmax = max((dvec[k] for k in pos), default=Fraction(0))
    well_separated = pos and (
        min(dvec[k] for k in pos) * 10**6 >= max(Fraction(1), dmax))
    if well_separated:
        Y = unit_lower_inverse(L)
        frame = np.zeros((n, len(pos)), dtype=complex)
        coords = np.zeros((len(pos), n), dtype=complex)
        for c, k in enumerate(pos):
            r = float(dvec[k]) ** 0.5
            for j in range(n):
                frame[j, c] = _c(Y[k][j].conjugate()) / r
                coords[c, j] = r * _c(L[j][k].conjugate())
        null = [k for k in range(n) if dvec[k] == 0]
        null_vectors = np.zeros((n, len(null)), dtype=complex)
        for c, k in enumerate(null):
            for j in range(n):
                null_vectors[j, c] = _c(Y[k][j].conjugate())
        return frame, coords, len(null), null_vectors
    lam, Q = np.linalg.eigh((K + K.conj().T) / 2.0)
    top = max(1.0, float(lam.max(initial=0.0)))
    keep = lam > NULL_TOL * top
    if not keep.any():
        return (np.zeros((n, 0), dtype=complex),
                np.zeros((0, n), dtype=complex), n, Q)
    frame = Q[:, keep] / np.sqrt(lam[keep])
    coords = frame.conj().T @ K
    return frame, coords, int((~keep).sum()), Q[:, ~keep]


@dataclass
class GnsSpace:
    """Span of short-word classes under the functional's inner product.

    moment[i, j] is the normalized value at basis_words[i]* basis_words[j];
    frame maps orthonormal coordinates back to word coefficients, and
    word_coords holds the coordinate vector of each basis word's class.
    Null directions (zero-length vectors) are split off, so
    null_dim + dim equals the basis size.
    """

    spec: AlgebraSpec
    basis_words: list
    moment: np.ndarray
    frame: np.ndarray
    word_coords: np.ndarray
    null_dim: int
    null_vectors: np.ndarray
    word_values: dict

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    @property
    def state(self) -> np.ndarray:
        """Coordinates of the identity class (a unit vector)."""
        e = self.spec.identity_word
        return self.word_coords[:, self.basis_words.index(e)].copy()


def gns_from_moment(phi: DualWitness, d: int) -> GnsSpace:
    """Inner-product space on word classes of length at most d.

    The functional is normalized so that the identity evaluates to 1;
    the class of the identity is then a unit vector.  Directions of
    length zero are dropped.
    """
    if phi.mode != "full":
        raise ValueError("representation spaces need a full-mode functional")
    spec = phi.spec
    e = spec.identity_word
    ve = phi.word_values.get(e)
    if ve is None or ve.im != 0 or ve.re <= 0:
        raise ValueError("functional is not a state: value at identity "
                         "must be a positive real")
    scale = ve.re
    values = {w: QC(z.re / scale, z.im / scale)
              for w, z in phi.word_values.items()}

    basis = ball(spec, d)
    missing = [w for w in basis if w not in set(phi.basis)]
    if missing:
        raise ValueError(f"functional basis does not cover the radius-{d} "
                         "ball")
    n = len(basis)
    Kq = [[QC(0)] * n for _ in range(n)]
    for i, u in enumerate(basis):
        for j, v in enumerate(basis):
            w = spec.word_mul(spec.word_star(u), v)
            z = values.get(w)
            if z is None:
                raise CoverageError(f"missing functional value at {w!r}")
            Kq[i][j] = z
    K = np.array([[_c(Kq[i][j]) for j in range(n)] for i in range(n)])

    frame, coords, null_dim, null_vectors = _orthonormal_frame(Kq, K)
    if frame.shape[1] == 0:
        raise ValueError("trivial space: functional vanishes on the ball")
    space = GnsSpace(spec=spec, basis_words=list(basis), moment=K,
                     frame=frame, word_coords=coords,
                     null_dim=null_dim,
                     null_vectors=null_vectors,
                     word_values={w: _c(z) for w, z in values.items()})
    gram = coords.conj().T @ coords
    if np.abs(gram - K).max() > 1e-8 * max(1.0, float(np.abs(K).max())):
        raise RuntimeError("orthonormal frame does not reproduce the moment")
    return space


def compressions(space: GnsSpace, spec: AlgebraSpec | None = None):
    """Compressed generator actions on the truncated space.

    Entries come from functional values at u* g v, so the data must
    extend one step past the space's radius.  Each compression is a
    contraction; singular values within tolerance of 1 are clipped.
    """
    if spec is None:
        spec = space.spec
    elif spec != space.spec:
        raise ValueError("algebra mismatch between space and spec")
    F = space.frame
    out = []
    for g in _generator_words(spec):
        n = len(space.basis_words)
        T = np.zeros((n, n), dtype=complex)
        for i, u in enumerate(space.basis_words):
            left = spec.word_mul(spec.word_star(u), g)
            for j, v in enumerate(space.basis_words):
                w = spec.word_mul(left, v)
                z = space.word_values.get(w)
                if z is None:
                    raise CoverageError(
                        "functional values do not reach one step past the "
                        f"space (missing {w!r})")
                T[i, j] = z
        M = F.conj().T @ T @ F
        U, s, Vh = np.linalg.svd(M)
        if s.max(initial=0.0) > 1.0 + CONTRACTION_TOL:
            raise ValueError("compression is not a contraction "
                             f"(singular value {s.max():.3e})")
        if s.max(initial=0.0) > 1.0:
            M = U @ np.diag(np.minimum(s, 1.0)) @ Vh
        out.append(M)
    return out


def choi_dilation(M) -> np.ndarray:
    """Unitary of doubled size whose upper-left block is M.

    The off-diagonal blocks are the square roots of I - M M* and
    I - M* M; both are taken through M's singular value decomposition so
    that the block identities cancel at machine precision instead of at
    the square root of it.  Singular values within tolerance above 1 are
    clamped; larger ones are an error.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("dilation needs a square matrix")
    W, s, Vh = np.linalg.svd(M)
    if s.max(initial=0.0) > 1.0 + CONTRACTION_TOL:
        raise ValueError(f"matrix norm {s.max():.6f} exceeds 1")
    s = np.minimum(s, 1.0)
    M = W @ np.diag(s) @ Vh
    c = np.sqrt(1.0 - s * s)
    m = M.shape[0]
    U = np.block([[M, (W * c) @ W.conj().T],
                  [(Vh.conj().T * c) @ Vh, -M.conj().T]])
    if np.abs(U.conj().T @ U - np.eye(2 * m)).max() > UNITARITY_TOL:
        raise RuntimeError("dilation failed the unitarity check")
    return U


# ---------------------------------------------------------------------------
# refutation witnesses
# ---------------------------------------------------------------------------

@dataclass
class UnitaryRepWitness:
    """Explicit representation data showing the target takes a negative
    value: generator images, a unit state vector, and the evaluation.

    For group backends the generator images are unitary; for free
    *-algebras they are the (hermitian, when letters are hermitian)
    compressions themselves.
    """

    generators: list
    state: np.ndarray
    value: float
    target: AlgebraElement


def refutation_witness(b: AlgebraElement, phi: DualWitness) -> UnitaryRepWitness:
    """Matrix refutation of b from a dual functional with phi(b) < 0.

    The space radius is the longest word in b; the functional must carry
    values one step further (products of length 2d + 1).  Group
    generators are dilated to unitaries; free *-algebra generators stay
    as compressions.  The evaluation agrees with the normalized
    functional value within 1e-6 relative + 1e-9 absolute error.
    """
    spec = b.spec
    if spec.kind not in (FREE, FREE_STAR):
        raise ValueError("refutation witnesses need a free group or free "
                         "*-algebra backend")
    if not b.terms:
        raise ValueError("target is zero")
    d = max(spec.word_len(w) for w in b.terms)
    space = gns_from_moment(phi, d)
    expected = 0.0 + 0.0j
    for w, cf in b.terms.items():
        z = space.word_values.get(w)
        if z is None:
            raise CoverageError(f"missing functional value at {w!r}")
        expected += _c(cf) * z
    if abs(expected.imag) > 1e-9 or expected.real >= 0:
        raise ValueError("functional does not refute the target "
                         f"(value {expected:.3e})")

    Ms = compressions(space)
    if spec.kind == FREE:
        gens = [choi_dilation(M) for M in Ms]
        state = np.concatenate([space.state,
                                np.zeros(space.dim, dtype=complex)])
    else:
        gens = [np.asarray(M) for M in Ms]
        state = space.state

    val = 0.0 + 0.0j
    for w, cf in b.terms.items():
        Mw = _word_matrix(spec, w, gens, len(state))
        val += _c(cf) * np.vdot(state, Mw @ state)
    if abs(val.imag) > UNITARITY_TOL:
        raise RuntimeError("evaluation is not real; hermitian data expected")
    value = float(val.real)
    if abs(value - expected.real) > 1e-6 * abs(expected.real) + 1e-9:
        raise RuntimeError("dilated evaluation drifted from the functional "
                           f"({value:.3e} vs {expected.real:.3e})")
    return UnitaryRepWitness(generators=gens, state=state, value=value,
                             target=b)


def replay_witness_value(wit: UnitaryRepWitness) -> float:
    """Recompute the stored value with matrix products only."""
    state = np.asarray(wit.state, dtype=complex)
    gens = [np.asarray(G, dtype=complex) for G in wit.generators]
    val = 0.0 + 0.0j
    for w, cf in wit.target.terms.items():
        Mw = _word_matrix(wit.target.spec, w, gens, len(state))
        val += _c(cf) * np.vdot(state, Mw @ state)
    return float(val.real)


def verify_unitary_witness(wit: UnitaryRepWitness) -> bool:
    """Independent check: generator shape, state normalization, replay."""
    spec = wit.target.spec
    gens = [np.asarray(G, dtype=complex) for G in wit.generators]
    for G in gens:
        if spec.kind == FREE:
            if np.abs(G.conj().T @ G - np.eye(G.shape[0])).max() > UNITARITY_TOL:
                return False
        else:
            s = np.linalg.svd(G, compute_uv=False)
            if s.max(initial=0.0) > 1.0 + 1e-6:
                return False
            if spec.hermitian and np.abs(G - G.conj().T).max() > UNITARITY_TOL:
                return False
    state = np.asarray(wit.state, dtype=complex)
    if abs(np.vdot(state, state).real - 1.0) > 1e-6:
        return False
    if abs(replay_witness_value(wit) - wit.value) > REPLAY_TOL:
        return False
    return wit.value < 0


def _matrix_to_lists(M: np.ndarray):
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def _matrix_from_lists(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows],
                    dtype=complex)


def unitary_witness_to_json(wit: UnitaryRepWitness) -> str:
    return json.dumps({
        "generators": [_matrix_to_lists(np.asarray(G)) for G in wit.generators],
        "state": [[float(z.real), float(z.imag)] for z in np.asarray(wit.state)],
        "value": wit.value,
        "target": element_to_dict(wit.target),
    }, indent=1)


def unitary_witness_from_json(text: str) -> UnitaryRepWitness:
    data = json.loads(text)
    return UnitaryRepWitness(
        generators=[_matrix_from_lists(G) for G in data["generators"]],
        state=np.array([complex(re, im) for re, im in data["state"]],
                       dtype=complex),
        value=float(data["value"]),
        target=element_from_dict(data["target"]),
    )


# ---------------------------------------------------------------------------
# cocycles from augmentation-ideal functionals
# ---------------------------------------------------------------------------

def _ideal_product_value(spec: AlgebraSpec, values: dict, x, y) -> QC:
    """Functional value at c(x)* c(y) from group-word values (identity -> 0)."""
    e = spec.identity_word

    def v(w):
        if w == e:
            return QC(0)
        z = values.get(w)
        if z is None:
            raise CoverageError(f"missing functional value at {w!r}")
        return z

    xs = spec.word_star(x)
    return v(spec.word_mul(xs, y)) - v(xs) - v(y)


def augmentation_gns(phi: DualWitness):
    """Generator matrices and cocycle vectors from an ideal functional.

    Builds the inner-product space on c(w) classes over the largest
    sub-basis closed under left multiplication by generators, represents
    pi(g)[c(h)] = [c(gh)] - [c(g)] there, and returns
    (pi, delta) where delta maps each basis word to its class vector.
    The cocycle identity is asserted on every in-ball pair.
    """
    if phi.mode != "augmentation":
        raise ValueError("cocycle data needs an augmentation-mode functional")
    spec = phi.spec
    if not spec.is_group():
        raise ValueError("cocycle data needs a group backend")
    e = spec.identity_word
    gens = _generator_words(spec)
    gset = []
    for g in gens:
        gset.append(g)
        gi = spec.word_star(g)
        if gi != g and gi not in gset:
            gset.append(gi)

    bset = set(phi.basis)
    B = [w for w in phi.basis
         if all(spec.word_mul(s, w) == e or spec.word_mul(s, w) in bset
                for s in gset)]
    if not B or any(s not in set(B) for s in gset):
        raise ValueError("functional ball too small: generators must have "
                         "all their left translates covered")

    asm = GramAssembly(spec, B, "augmentation")
    Kq = asm.moment_from_values(phi.word_values)
    n = len(B)
    K = np.array([[_c(Kq[i][j]) for j in range(n)] for i in range(n)])
    frame, X, _, _ = _orthonormal_frame(Kq, K)
    if frame.shape[1] == 0:
        raise ValueError("trivial space: functional vanishes on the ideal")
    idx = {w: i for i, w in enumerate(B)}
    delta = {w: X[:, i].copy() for w, i in idx.items()}

    pi = {}
    for s in gset:
        T = np.zeros((n, n), dtype=complex)
        for i, u in enumerate(B):
            base = _ideal_product_value(spec, phi.word_values, u, s)
            for j, w in enumerate(B):
                z = _ideal_product_value(spec, phi.word_values, u,
                                         spec.word_mul(s, w))
                T[i, j] = _c(z - base)
        pi[s] = frame.conj().T @ T @ frame

    scale = max(1.0, float(np.abs(X).max()))
    for s in gset:
        P = pi[s]
        good = []
        for w in B:
            sw = spec.word_mul(s, w)
            moved = P @ delta[w] + delta[s]
            if sw == e:
                err = np.abs(moved).max()
            elif sw in idx:
                err = np.abs(moved - delta[sw]).max()
            else:
                continue
            good.append(w)
            if err > COCYCLE_TOL * scale:
                raise ValueError("cocycle identity failed: functional data "
                                 f"inconsistent at ({s!r}, {w!r})")
        if good:
            A = np.stack([delta[w] for w in good], axis=1)
            img = P @ A
            if np.abs(img.conj().T @ img - A.conj().T @ A).max() \
                    > COCYCLE_TOL * scale * scale:
                raise ValueError("generator action is not isometric on the "
                                 "covered span")
    return pi, delta


def solve_inner_cocycle(pi: dict, delta: dict):
    """Vector x with delta(g) = pi(g) x - x for all generators, or None."""
    keys = [s for s in pi if s in delta]
    if not keys:
        return None
    dim = pi[keys[0]].shape[0]
    A = np.vstack([pi[s] - np.eye(dim) for s in keys])
    rhs = np.concatenate([delta[s] for s in keys])
    x, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    resid = max(np.abs((pi[s] - np.eye(dim)) @ x - delta[s]).max()
                for s in keys)
    return x if resid <= COCYCLE_TOL else None


def _extend_cocycle(spec: AlgebraSpec, pi: dict, delta: dict, w):
    e = spec.identity_word
    known = dict(delta)
    if known:
        dim = next(iter(known.values())).shape[0]
    elif pi:
        dim = next(iter(pi.values())).shape[0]
    else:
        dim = 0

    def get(u):
        if u == e:
            return np.zeros(dim, dtype=complex)
        if u in known:
            return known[u]
        if spec.kind == FINITE or not isinstance(u, tuple) or not u:
            raise ValueError(f"cocycle extension failed for {u!r}")
        if spec.kind == FREE_ABELIAN:
            i = next((k for k, exp in enumerate(u) if exp != 0), None)
            if i is None:
                raise ValueError(f"cocycle extension failed for {u!r}")
            step = tuple((1 if u[i] > 0 else -1) if k == i else 0
                         for k in range(spec.rank))
        else:
            step = (u[0],)
        if step not in pi or step not in known:
            raise ValueError(f"cocycle extension failed for {u!r}: no data "
                             f"for the generator {step!r}")
        rest = spec.word_mul(spec.word_star(step), u)
        known[u] = pi[step] @ get(rest) + known[step]
        return known[u]

    if spec.kind == FINITE:
        # breadth-first closure over the generator matrices
        frontier = [e]
        seen = {e}
        while frontier:
            nxt = []
            for u in frontier:
                for s in pi:
                    if s not in known:
                        continue
                    su = spec.word_mul(s, u)
                    if su in seen:
                        continue
                    seen.add(su)
                    if su != e and su not in known:
                        known[su] = pi[s] @ get(u) + known[s]
                    nxt.append(su)
            frontier = nxt
    return get(w), known


def functional_from_cocycle(spec: AlgebraSpec, pi: dict, delta: dict,
                            pairs) -> dict:
    """Values at c(h)* c(g) from a cocycle: the pairing of delta vectors.

    Extends delta along the cocycle rule where needed, spot-checks the
    exchange identity on random triples, and checks that the assembled
    value matrix is positive semidefinite.
    """
    vecs = {}
    for h, g in pairs:
        for w in (h, g):
            if w not in vecs:
                vecs[w], _ = _extend_cocycle(spec, pi, delta, w)

    scale = max(1.0, max((np.abs(v).max() for v in vecs.values()),
                         default=0.0)) ** 2
    rng = random.Random(0)
    words = [w for w in set(delta) | set(vecs) if w != spec.identity_word]
    checked = 0
    for _ in range(40):
        if checked >= 12 or not words:
            break
        g, h, k = (words[rng.randrange(len(words))] for _ in range(3))
        try:
            dg, _ = _extend_cocycle(spec, pi, delta, g)
            dh, _ = _extend_cocycle(spec, pi, delta, h)
            dk, _ = _extend_cocycle(spec, pi, delta, k)
            dkg, _ = _extend_cocycle(spec, pi, delta, spec.word_mul(k, g))
            ki = spec.word_star(k)
            dki, _ = _extend_cocycle(spec, pi, delta, ki)
            dkh, _ = _extend_cocycle(spec, pi, delta, spec.word_mul(ki, h))
        except ValueError:
            continue
        lhs = np.vdot(dh, dkg - dk)
        rhs = np.vdot(dkh - dki, dg)
        if abs(lhs - rhs) > COCYCLE_TOL * scale:
            raise ValueError("cocycle data fails the exchange identity at "
                             f"({g!r}, {h!r}, {k!r})")
        checked += 1

    order = list(vecs)
    G = np.array([[np.vdot(vecs[u], vecs[v]) for v in order] for u in order])
    if order:
        lam = np.linalg.eigvalsh((G + G.conj().T) / 2.0)
        if lam.min(initial=0.0) < -NULL_TOL * max(1.0, float(lam.max(initial=0.0))):
            raise ValueError("cocycle pairing matrix is not positive "
                             "semidefinite")
    return {(h, g): complex(np.vdot(vecs[h], vecs[g])) for h, g in pairs}
