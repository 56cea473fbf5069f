"""The measures Q^(n), their increasing limit, and exact checks of the identity

    Q[F_n 1{g < n}] = E_P[F_n X_n]

on a finite tree. Q is represented by its horizon slice: leaf weights
``P * X_H * 1{g <= H - 1}``. Paths without any zero have ``g = NEVER`` (read as
-inf) and therefore sit inside every ``{g < n}``.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable

from .pathspace import AdaptedProcess, PathMeasure, PathSpace, SpaceError, expect, Rational
from .randomtimes import NEVER, RandomTime, at_most, before, first_zero_after, last_zero, stop_process


class ConstructionError(RuntimeError):
    """The definitional and closed-form constructions of Q^(n) disagree."""


class QIdentityError(ValueError):
    """Two independent evaluations of a Q quantity disagree; carries the witness."""

    def __init__(self, message: str, n: int, atom: int | None, lhs, rhs):
        super().__init__(message)
        self.n = n
        self.atom = atom
        self.lhs = lhs
        self.rhs = rhs


@dataclass(frozen=True, eq=False)
class QnMeasure:
    measure: PathMeasure
    level: int
    X: AdaptedProcess
    g: RandomTime

    @property
    def space(self) -> PathSpace:
        return self.measure.space

    @property
    def weights(self) -> tuple[Rational, ...]:
        return self.measure.weights

    @property
    def total(self) -> Rational:
        return self.measure.total

    def corrupted(self, leaf_index: int, weight) -> "QnMeasure":
        """Copy with one leaf weight replaced (for negative tests)."""
        return QnMeasure(self.measure.with_weight(leaf_index, weight), self.level, self.X, self.g)


@dataclass(frozen=True, eq=False)
class QSlice:
    measure: PathMeasure
    g: RandomTime

    @property
    def weights(self) -> tuple[Rational, ...]:
        return self.measure.weights

    @property
    def total(self) -> Rational:
        return self.measure.total


def _check_same(space: PathSpace, X: AdaptedProcess) -> None:
    if X.space is not space:
        raise SpaceError("process does not live on the given space")


def _leaf_probs(space: PathSpace) -> list[Rational]:
    return [space._prob[v] for v in space._levels[-1]]


def _terminal(X: AdaptedProcess) -> list[Rational]:
    return [X.values[v] for v in X.space.leaves]


def build_qn(space: PathSpace, X: AdaptedProcess, level: int) -> QnMeasure:
    """Q^(level): density ``X_{p ^ d_level}`` on ``F_p`` for ``p > level``.

    Built from the stopped process and cross-checked against the closed form
    ``P * X_H * 1{g <= level}``.
    """
    _check_same(space, X)
    space.check_time(level, space.horizon - 1)
    key = ("build_qn", level)
    if key in X.memo:
        return X.memo[key]
    probs = _leaf_probs(space)
    stopped = stop_process(X, first_zero_after(X, level))
    definitional = [p * stopped.values[v] for p, v in zip(probs, space.leaves)]

    g = last_zero(X)
    keep = at_most(g, level)
    closed = [p * x if k else Rational(0) for p, x, k in zip(probs, _terminal(X), keep)]
    for i, (a, b) in enumerate(zip(definitional, closed)):
        if a != b:
            raise ConstructionError(
                f"Q^({level}) leaf {space.path(space.leaves[i])}: stopped density gives {a}, "
                f"closed form gives {b}")
    qn = X.memo[key] = QnMeasure(PathMeasure(space, tuple(definitional)), level, X, g)
    return qn


def qn_density_witnesses(qn: QnMeasure, p: int) -> list[tuple[int, Rational, Rational]]:
    """Depth-``p`` atoms where the Q^(n) mass differs from ``E_P[1_atom X_{p ^ d_n}]``."""
    space, X = qn.space, qn.X
    if not qn.level + 1 <= p <= space.horizon:
        raise SpaceError(f"p={p} outside [{qn.level + 1}, {space.horizon}]")
    stopped = stop_process(X, first_zero_after(X, qn.level))
    probs = space._prob
    bad = []
    for atom in space.level(p):
        got = qn.measure.atom_mass(atom)
        want = probs[atom] * stopped.values[atom]
        if got != want:
            bad.append((atom, got, want))
    return bad


def qn_density_matrix_witnesses(qn: QnMeasure) -> list[tuple[int, int, Rational, Rational]]:
    """``(p, atom, got, want)`` over every ``p`` in ``[level+1, H]``, stopping X once."""
    space, X = qn.space, qn.X
    stopped = stop_process(X, first_zero_after(X, qn.level))
    masses = qn.measure.node_masses
    return [
        (p, atom, masses[atom], space._prob[atom] * stopped.values[atom])
        for p in range(qn.level + 1, space.horizon + 1)
        for atom in space._levels[p]
        if masses[atom] != space._prob[atom] * stopped.values[atom]
    ]


def qn_density_check(qn: QnMeasure, p: int) -> bool:
    return not qn_density_witnesses(qn, p)


def qn_future_zero_witnesses(qn: QnMeasure) -> list[int]:
    """Leaf indices with a zero of X in ``(level, H]`` but nonzero weight."""
    space, xs = qn.space, qn.X.values
    # top-down flag: the path to v has a zero at some time in (level, depth(v)]
    flag = [False] * space.n_nodes
    for d in range(qn.level + 1, space.horizon + 1):
        for v in space._levels[d]:
            flag[v] = flag[space._parent[v]] or xs[v] == 0
    leaves = space._levels[-1]
    return [i for i, (w, v) in enumerate(zip(qn.weights, leaves)) if w != 0 and flag[v]]


def qn_kills_future_zeros(qn: QnMeasure) -> bool:
    return not qn_future_zero_witnesses(qn)


def restriction_witnesses(qm: QnMeasure, qn: QnMeasure) -> list[int]:
    """Leaf indices where ``qm != qn * 1{g <= qm.level}``."""
    if qm.space is not qn.space or not qm.X.equals(qn.X):
        raise SpaceError("restriction_check needs measures built on the same space and process")
    if qm.level > qn.level:
        raise SpaceError(f"restriction needs qm.level <= qn.level, got {qm.level} > {qn.level}")
    keep = at_most(qm.g, qm.level)
    return [
        i for i, (a, b, k) in enumerate(zip(qm.weights, qn.weights, keep))
        if a != (b if k else 0)
    ]


def restriction_check(qm: QnMeasure, qn: QnMeasure) -> bool:
    return not restriction_witnesses(qm, qn)


def q_limit(space: PathSpace, X: AdaptedProcess) -> QSlice:
    """Leaf-wise increasing limit of Q^(0), ..., Q^(H-1)."""
    _check_same(space, X)
    H = space.horizon
    weights = [Rational(0)] * space.n_leaves
    for level in range(H):
        qn = build_qn(space, X, level)
        weights = [max(a, b) for a, b in zip(weights, qn.weights)]
    g = last_zero(X)
    keep = at_most(g, H - 1)
    closed = [p * x if k else Rational(0)
              for p, x, k in zip(_leaf_probs(space), _terminal(X), keep)]
    if weights != closed:
        i = next(i for i, (a, b) in enumerate(zip(weights, closed)) if a != b)
        raise ConstructionError(
            f"limit weight {weights[i]} != P*X_H*1{{g<=H-1}} = {closed[i]} on leaf "
            f"{space.path(space.leaves[i])}")
    return QSlice(PathMeasure(space, tuple(weights)), g)


def _q_eval_atoms(space: PathSpace, X: AdaptedProcess, n: int, atoms: Iterable[int], qn: QnMeasure):
    """Per-atom ``(atom, E_P[1_atom X_n], Q^(n-1)[{g < n} & atom])``."""
    strictly = before(qn.g, n)
    rows = []
    for atom in atoms:
        if space.depth(atom) != n:
            raise SpaceError(f"event member {space.path(atom)} is not a depth-{n} atom")
        lhs = space._prob[atom] * X.values[atom]
        lo, hi = space._span[atom]
        rhs = sum((qn.weights[i] for i in range(lo, hi) if strictly[i]), Rational(0))
        rows.append((atom, lhs, rhs))
    return rows


def q_eval(space: PathSpace, X: AdaptedProcess, n: int, event: Iterable[int]) -> Rational:
    """``Q[1_event 1{g < n}]`` for an event made of depth-``n`` atoms.

    Computed both as ``E_P[1_event X_n]`` and as the mass of ``{g < n} & event``
    under Q^(n-1); raises :class:`QIdentityError` naming the first atom where
    the two differ.
    """
    _check_same(space, X)
    if not 1 <= n <= space.horizon:
        raise SpaceError(f"n={n} outside [1, {space.horizon}]")
    atoms = list(dict.fromkeys(event))
    qn = build_qn(space, X, n - 1)
    total = Rational(0)
    for atom, lhs, rhs in _q_eval_atoms(space, X, n, atoms, qn):
        if lhs != rhs:
            raise QIdentityError(
                f"identity fails at n={n}, atom {space.path(atom)}: "
                f"E_P[1_atom X_n] = {lhs} but Q^({n - 1}) mass = {rhs}",
                n, atom, lhs, rhs)
        total += lhs
    return total


def q_eval_witnesses(space: PathSpace, X: AdaptedProcess) -> list[tuple[int, int, Rational, Rational]]:
    """Every ``(n, atom, lhs, rhs)`` with ``1 <= n <= H`` where the identity fails."""
    _check_same(space, X)
    bad = []
    for n in range(1, space.horizon + 1):
        qn = build_qn(space, X, n - 1)
        for atom, lhs, rhs in _q_eval_atoms(space, X, n, space.level(n), qn):
            if lhs != rhs:
                bad.append((n, atom, lhs, rhs))
    return bad


@dataclass(frozen=True)
class GLaw:
    """Law of the last zero under Q on the horizon slice.

    ``masses[n] = Q[g = n]`` for ``n < H``; ``zero_free`` is the mass of paths
    with no zero at all (``g = -inf``).
    """

    masses: tuple[Rational, ...]
    zero_free: Rational
    expectations: tuple[Rational, ...]

    def table(self) -> list[tuple[int, Rational]]:
        return list(enumerate(self.masses))


def q_law_of_g(space: PathSpace, X: AdaptedProcess) -> GLaw:
    _check_same(space, X)
    H = space.horizon
    qs = q_limit(space, X)
    masses = [Rational(0)] * H
    zero_free = Rational(0)
    for w, t in zip(qs.weights, qs.g.values):
        if t is NEVER:
            zero_free += w
        elif t < H:
            masses[t] += w
    expectations = [expect(X, m) for m in range(H + 1)]
    for n, mass in enumerate(masses):
        if mass < 0:
            raise QIdentityError(f"negative mass Q[g={n}] = {mass}", n, None, mass, 0)
    running = zero_free
    for m in range(H + 1):
        if running != expectations[m]:
            raise QIdentityError(
                f"Q[g < {m}] = {running} but E_P[X_{m}] = {expectations[m]}",
                m, None, running, expectations[m])
        if m < H:
            running += masses[m]
    return GLaw(tuple(masses), zero_free, tuple(expectations))


def _solve_exact(n_unknowns: int, equations):
    """Sparse Gaussian elimination over the rationals.

    ``equations`` yields ``(row, rhs)`` with ``row`` a dict ``unknown -> coefficient``.
    Returns ``(solution or None if inconsistent, rank)``; ``solution`` is only
    meaningful when ``rank == n_unknowns``.
    """
    # pivot rows only mention their own variable and variables pivoted later,
    # so reducing in creation order terminates and back-substitution runs in reverse
    pivots: dict[int, tuple[int, dict[int, Rational], Rational]] = {}
    consistent = True
    for row, rhs in equations:
        row = {k: Rational(c) for k, c in row.items() if c}
        rhs = Rational(rhs)
        heap = [(pivots[k][0], k) for k in row if k in pivots]
        heapq.heapify(heap)
        while heap:
            _, var = heapq.heappop(heap)
            coef = row.get(var)
            if not coef:
                continue
            _, prow, prhs = pivots[var]
            for k, c in prow.items():
                nc = row.get(k, 0) - coef * c
                if nc:
                    if k not in row and k in pivots:
                        heapq.heappush(heap, (pivots[k][0], k))
                    row[k] = nc
                else:
                    row.pop(k, None)
            rhs -= coef * prhs
        if not row:
            if rhs != 0:
                consistent = False
            continue
        var = min(row)
        coef = row[var]
        pivots[var] = (len(pivots), {k: c / coef for k, c in row.items()}, rhs / coef)
    rank = len(pivots)
    if not consistent:
        return None, rank
    solution: dict[int, Rational] = {}
    if rank == n_unknowns:
        for var, (_, row, rhs) in sorted(pivots.items(), key=lambda kv: -kv[1][0]):
            solution[var] = rhs - sum((c * solution[k] for k, c in row.items() if k != var), Rational(0))
    return solution, rank


def uniqueness_probe(space: PathSpace, X: AdaptedProcess) -> bool:
    """Rebuild every Q^(n) from ``{E_P[1_atom X_n]}`` and the last-zero annotation alone.

    Unknowns are the Q weights of leaves in ``{g < H}``; each depth-``n`` atom
    contributes ``Q[{g < n} & atom] = E_P[1_atom X_n]``. Equations are fed from
    the leaves upward so the elimination is triangular. The probe succeeds when
    the system is consistent, has full rank, and its restrictions to
    ``{g <= m}`` reproduce :func:`build_qn` exactly.
    """
    _check_same(space, X)
    H = space.horizon
    g = last_zero(X)
    unknowns = [i for i, t in enumerate(g.values) if t is NEVER or t < H]
    col = {leaf: j for j, leaf in enumerate(unknowns)}

    def equations():
        for n in range(H, 0, -1):
            mask = before(g, n)
            for atom in space.level(n):
                lo, hi = space._span[atom]
                row = {col[i]: 1 for i in range(lo, hi) if mask[i]}
                yield row, space._prob[atom] * X.values[atom]

    solution, rank = _solve_exact(len(unknowns), equations())
    if solution is None:
        return False
    if rank < len(unknowns):
        raise RuntimeError(
            f"underdetermined reconstruction: rank {rank} < {len(unknowns)} unknowns")
    weights = [Rational(0)] * space.n_leaves
    for leaf, j in col.items():
        weights[leaf] = solution[j]
    for level in range(H):
        keep = at_most(g, level)
        rebuilt = tuple(w if k else Rational(0) for w, k in zip(weights, keep))
        if rebuilt != build_qn(space, X, level).weights:
            return False
    return True
