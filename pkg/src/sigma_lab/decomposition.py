"""Doob decomposition on event trees and the class (Sigma) structure checks."""

from __future__ import annotations

from dataclasses import dataclass, field

from .pathspace import AdaptedProcess, SpaceError, cond_exp, is_predictable, Rational


class NotSubmartingaleError(ValueError):
    """A one-step conditional drift is negative somewhere."""

    def __init__(self, message: str, node: int, path: tuple[int, ...], drift: Rational):
        super().__init__(message)
        self.node = node
        self.path = path
        self.drift = drift


@dataclass(frozen=True, eq=False)
class Decomposition:
    """``X = N + A`` with ``N`` the martingale part and ``A`` predictable increasing."""

    N: AdaptedProcess
    A: AdaptedProcess

    @property
    def space(self):
        return self.N.space


def _drifts(X: AdaptedProcess, n: int) -> list[tuple[int, Rational]]:
    space = X.space
    return [(v, ce - X.values[v]) for v, ce in zip(space.level(n), cond_exp(X, n))]


def is_martingale(N: AdaptedProcess, start: int = 0) -> bool:
    """True iff ``E[N_{n+1} | F_n] = N_n`` exactly for every ``start <= n < H``."""
    space = N.space
    for n in range(start, space.horizon):
        if any(d != 0 for _, d in _drifts(N, n)):
            return False
    return True


def is_submartingale(X: AdaptedProcess) -> bool:
    return _first_negative_drift(X) is None


def _first_negative_drift(X: AdaptedProcess):
    for n in range(X.space.horizon):
        for v, d in _drifts(X, n):
            if d < 0:
                return v, d
    return None


def doob_decompose(X: AdaptedProcess) -> Decomposition:
    """Split a submartingale into ``N + A``.

    ``A`` accumulates the one-step drifts ``E[X_{k+1} | F_k] - X_k`` along the
    ancestor chain, so it is predictable by construction.

    Raises
    ------
    NotSubmartingaleError
        If some drift is negative; the error carries the witnessing node.
    """
    space = X.space
    bad = _first_negative_drift(X)
    if bad is not None:
        v, d = bad
        raise NotSubmartingaleError(
            f"not a submartingale: drift {d} at node {space.path(v)}", v, space.path(v), d)

    A: list[Rational] = [Rational(0)] * space.n_nodes
    for n in range(space.horizon):
        for v, drift in _drifts(X, n):
            inc = A[v] + drift
            for c in space.children(v):
                A[c] = inc
    A_proc = AdaptedProcess(space, tuple(A))
    return Decomposition(N=X - A_proc, A=A_proc)


@dataclass
class SigmaReport:
    """Outcome of :func:`check_sigma_class`.

    ``violations`` holds ``(node, A increment, X value)`` for each node where
    ``(A(child) - A(node)) * X(node) != 0``. Negative values of X are listed
    separately and do not make the report fail.
    """

    violations: list[tuple[int, Rational, Rational]] = field(default_factory=list)
    invariant_failures: list[str] = field(default_factory=list)
    negative_nodes: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.invariant_failures

    def __bool__(self) -> bool:
        # a report is truthy when it has something to report
        return not self.ok


def check_sigma_class(X: AdaptedProcess, dec: Decomposition) -> SigmaReport:
    space = X.space
    if dec.N.space is not space or dec.A.space is not space:
        raise SpaceError("decomposition and process live on different spaces")
    report = SigmaReport()
    N, A = dec.N.values, dec.A.values
    xs = X.values

    if any(n + a != x for n, a, x in zip(N, A, xs)):
        report.invariant_failures.append("N + A != X")
    if A[space.root] != 0:
        report.invariant_failures.append("A_0 != 0")
    if not is_predictable(dec.A):
        report.invariant_failures.append("A is not predictable")
    if not is_martingale(dec.N):
        report.invariant_failures.append("N is not a martingale")

    decreasing = False
    for v in range(space.n_nodes):
        kids = space.children(v)
        if not kids:
            continue
        inc = A[kids[0]] - A[v]
        if any(A[c] < A[v] for c in kids):
            decreasing = True
        if xs[v] != 0 and any(A[c] != A[v] for c in kids):
            report.violations.append((v, inc, xs[v]))
    if decreasing:
        report.invariant_failures.append("A decreases along some path")

    report.negative_nodes = [v for v, x in enumerate(xs) if x < 0]
    return report
