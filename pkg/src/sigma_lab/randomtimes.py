"""First zero after a time, last zero, and stopping of processes on a tree."""

from __future__ import annotations

from dataclasses import dataclass

from .pathspace import AdaptedProcess, PathSpace, SpaceError


class _Never:
    """Sentinel for a time that does not occur within the horizon.

    It reads as +infinity for hitting times and as -infinity for the last
    zero of a zero-free path; the callers pick the reading.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NEVER"

    def __reduce__(self):
        return (_Never, ())


NEVER = _Never()


class NotStoppingTimeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RandomTime:
    """One value in ``[0, H]`` (or ``NEVER``) per leaf.

    ``stopping=True`` validates measurability once, at construction.
    """

    space: PathSpace
    values: tuple
    stopping: bool = False

    def __post_init__(self):
        if len(self.values) != self.space.n_leaves:
            raise SpaceError("random time needs exactly one value per leaf")
        if self.stopping:
            bad = stopping_time_witness(self)
            if bad is not None:
                raise NotStoppingTimeError(
                    f"{{tau = {bad[0]}}} splits the atom {self.space.path(bad[1])}")

    def __getitem__(self, leaf_index: int):
        return self.values[leaf_index]


def stopping_time_witness(tau: RandomTime):
    """``(n, node)`` where ``{tau = n}`` cuts through a depth-``n`` atom, else None.

    Every leaf with ``tau = t`` must share that value with its whole depth-``t`` atom;
    this covers all ``n`` at once.
    """
    space = tau.space
    hits: dict[int, int] = {}
    owner: dict[int, int] = {}
    for i, t in enumerate(tau.values):
        if t is NEVER:
            continue
        atom = space.leaf_ancestors[t][i]
        hits[atom] = hits.get(atom, 0) + 1
        owner[atom] = t
    for atom, count in hits.items():
        lo, hi = space._span[atom]
        if count != hi - lo:
            return owner[atom], atom
    return None


def is_stopping_time(tau: RandomTime) -> bool:
    return stopping_time_witness(tau) is None


def first_zero_after(X: AdaptedProcess, n: int) -> RandomTime:
    """Least ``p`` in ``(n, H]`` with ``X_p = 0`` on each path, else ``NEVER``."""
    space = X.space
    space.check_time(n, space.horizon - 1)
    key = ("first_zero_after", n)
    if key in X.memo:
        return X.memo[key]
    parent, xs = space._parent, X.values
    hit = [NEVER] * space.n_nodes
    for d in range(n + 1, space.horizon + 1):
        for v in space._levels[d]:
            prev = hit[parent[v]]
            hit[v] = prev if prev is not NEVER else (d if xs[v] == 0 else NEVER)
    tau = X.memo[key] = RandomTime(space, tuple(hit[v] for v in space._levels[-1]), stopping=True)
    return tau


def last_zero(X: AdaptedProcess) -> RandomTime:
    """Greatest ``n`` in ``[0, H]`` with ``X_n = 0`` on each path; ``NEVER`` (read as -inf) if none."""
    if "last_zero" in X.memo:
        return X.memo["last_zero"]
    space = X.space
    parent, xs = space._parent, X.values
    last = [NEVER] * space.n_nodes
    for d in range(space.horizon + 1):
        for v in space._levels[d]:
            if xs[v] == 0:
                last[v] = d
            elif d > 0:
                last[v] = last[parent[v]]
    g = X.memo["last_zero"] = RandomTime(space, tuple(last[v] for v in space._levels[-1]))
    return g


def before(tau: RandomTime, n: int) -> list[bool]:
    """Leaf mask of ``{tau < n}`` with ``NEVER`` read as -inf (the last-zero convention)."""
    return [t is NEVER or t < n for t in tau.values]


def at_most(tau: RandomTime, n: int) -> list[bool]:
    """Leaf mask of ``{tau <= n}`` with ``NEVER`` read as -inf."""
    return [t is NEVER or t <= n for t in tau.values]


def stop_process(X: AdaptedProcess, tau: RandomTime) -> AdaptedProcess:
    """The stopped process ``X_{p ^ tau}``; ``NEVER`` never stops."""
    space = X.space
    if tau.space is not space:
        raise SpaceError("random time and process live on different spaces")
    bad = None if tau.stopping else stopping_time_witness(tau)
    if bad is not None:
        raise NotStoppingTimeError(
            f"cannot stop at a non-stopping time: {{tau = {bad[0]}}} splits "
            f"the atom {space.path(bad[1])}")
    out = list(X.values)
    parent, depth, span, tv = space._parent, space._depth, space._span, tau.values
    # ids are breadth-first, so a parent is always settled before its children
    for v in range(1, space.n_nodes):
        t = tv[span[v][0]]
        if t is not NEVER and t < depth[v]:
            out[v] = out[parent[v]]
    return AdaptedProcess(space, tuple(out))
