"""Finite filtered probability spaces encoded as event trees.

Nodes are integer ids assigned breadth-first, so the nodes of a given depth
come out left-to-right and the leaves below any node form a contiguous run of
the leaf list. The depth-``n`` nodes are the atoms of ``F_n``.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

try:
    from gmpy2 import mpq as Rational
except ImportError:  # pragma: no cover - exercised only without gmpy2
    from fractions import Fraction as Rational


class SpaceError(ValueError):
    """Raised for malformed trees, foreign nodes, or out-of-range times."""


def as_rational(value) -> Rational:
    """Convert ints, rationals and ``"p/q"`` strings to an exact rational.

    Floats are refused: they would silently smuggle rounding into the exact core.
    """
    if isinstance(value, bool):
        raise SpaceError(f"not a rational value: {value!r}")
    if isinstance(value, (int, numbers.Rational)):
        return Rational(value)
    if isinstance(value, str):
        try:
            return Rational(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise SpaceError(f"not a rational string: {value!r}") from exc
    raise SpaceError(f"not a rational value: {value!r} (use an int or a 'p/q' string)")


class PathSpace:
    """Event tree of depth ``horizon`` with rational transition probabilities.

    Parameters
    ----------
    horizon : int
        Number of time steps, at least 1.
    edge_probs : sequence, optional
        ``edge_probs[d][i]`` lists the child probabilities of the ``i``-th
        depth-``d`` node, for ``d < horizon``. Defaults to the fair binary tree.
    """

    def __init__(self, horizon: int, edge_probs: Sequence[Sequence[Sequence]] | None = None):
        if not isinstance(horizon, int) or isinstance(horizon, bool):
            raise SpaceError(f"horizon must be an integer, got {horizon!r}")
        if horizon < 1:
            raise SpaceError(f"horizon must be >= 1, got {horizon}")
        self.horizon = horizon

        self._parent: list[int] = [-1]
        self._depth: list[int] = [0]
        self._slot: list[int] = [0]
        self._edge: list[Rational] = [Rational(1)]
        self._prob: list[Rational] = [Rational(1)]
        self._children: list[tuple[int, ...]] = []
        self._levels: list[list[int]] = [[0]]

        half = Rational(1, 2)
        if edge_probs is not None and len(edge_probs) != horizon:
            raise SpaceError(
                f"edge_probs has {len(edge_probs)} levels, expected {horizon}")
        for d in range(horizon):
            level = self._levels[d]
            if edge_probs is None:
                rows = [(half, half)] * len(level)
            else:
                rows = edge_probs[d]
                if len(rows) != len(level):
                    raise SpaceError(
                        f"edge_probs[{d}] has {len(rows)} entries, "
                        f"expected one per depth-{d} node ({len(level)})")
            nxt: list[int] = []
            for i, (node, row) in enumerate(zip(level, rows)):
                probs = [as_rational(p) for p in row]
                if not probs:
                    raise SpaceError(f"node {i} at depth {d} has no children")
                if any(p <= 0 for p in probs):
                    raise SpaceError(
                        f"non-positive child probability at depth {d}, node {i}: "
                        f"{[str(p) for p in probs]}")
                if sum(probs) != 1:
                    raise SpaceError(
                        f"child probabilities at depth {d}, node {i} sum to "
                        f"{sum(probs)}, not 1")
                kids = []
                for slot, p in enumerate(probs):
                    cid = len(self._parent)
                    self._parent.append(node)
                    self._depth.append(d + 1)
                    self._slot.append(slot)
                    self._edge.append(p)
                    self._prob.append(self._prob[node] * p)
                    kids.append(cid)
                    nxt.append(cid)
                self._children.append(tuple(kids))
            self._levels.append(nxt)
        for _ in self._levels[horizon]:
            self._children.append(())

        # leaf span of every node, bottom-up
        leaves = self._levels[horizon]
        first_leaf = leaves[0]
        span = [(0, 0)] * len(self._parent)
        for leaf in leaves:
            span[leaf] = (leaf - first_leaf, leaf - first_leaf + 1)
        for d in range(horizon - 1, -1, -1):
            for node in self._levels[d]:
                kids = self._children[node]
                span[node] = (span[kids[0]][0], span[kids[-1]][1])
        self._span = span

    # -- structure -----------------------------------------------------------

    def __repr__(self) -> str:
        return f"PathSpace(horizon={self.horizon}, leaves={self.n_leaves})"

    @property
    def n_nodes(self) -> int:
        return len(self._parent)

    @property
    def n_leaves(self) -> int:
        return len(self._levels[self.horizon])

    @property
    def root(self) -> int:
        return 0

    @property
    def leaves(self) -> list[int]:
        return list(self._levels[self.horizon])

    def check_node(self, node: int) -> int:
        if not isinstance(node, int) or not 0 <= node < len(self._parent):
            raise SpaceError(f"node {node!r} does not belong to {self!r}")
        return node

    def check_time(self, n: int, upper: int | None = None) -> int:
        upper = self.horizon if upper is None else upper
        if not isinstance(n, int) or not 0 <= n <= upper:
            raise SpaceError(f"time {n!r} outside [0, {upper}]")
        return n

    def depth(self, node: int) -> int:
        return self._depth[self.check_node(node)]

    def parent(self, node: int) -> int:
        return self._parent[self.check_node(node)]

    def children(self, node: int) -> tuple[int, ...]:
        return self._children[self.check_node(node)]

    def edge_prob(self, node: int) -> Rational:
        return self._edge[self.check_node(node)]

    def level(self, n: int) -> list[int]:
        return list(self._levels[self.check_time(n)])

    def ancestor(self, node: int, depth: int) -> int:
        """The depth-``depth`` node on the path from the root to ``node``."""
        d = self.depth(node)
        if not 0 <= depth <= d:
            raise SpaceError(f"no ancestor at depth {depth} for a depth-{d} node")
        while d > depth:
            node = self._parent[node]
            d -= 1
        return node

    def path(self, node: int) -> tuple[int, ...]:
        """Child slots from the root down to ``node``; used as a human-readable witness."""
        self.check_node(node)
        slots = []
        while node != 0:
            slots.append(self._slot[node])
            node = self._parent[node]
        return tuple(reversed(slots))

    def node_at(self, path: Iterable[int]) -> int:
        node = 0
        for slot in path:
            kids = self._children[node]
            if not 0 <= slot < len(kids):
                raise SpaceError(f"path {tuple(path)!r} leaves the tree")
            node = kids[slot]
        return node

    def leaf_span(self, node: int) -> tuple[int, int]:
        """Half-open range of leaf indices (positions in ``leaves``) below ``node``."""
        return self._span[self.check_node(node)]

    @cached_property
    def leaf_ancestors(self) -> list[list[int]]:
        """``leaf_ancestors[n][i]`` is the depth-``n`` node above leaf index ``i``."""
        out = [list(self._levels[self.horizon])]
        for _ in range(self.horizon):
            out.append([self._parent[v] for v in out[-1]])
        out.reverse()
        return out

    def leaf_chain(self, leaf_index: int) -> list[int]:
        """Nodes ``[v_0, ..., v_H]`` along the root-to-leaf path of a leaf index."""
        node = self._levels[self.horizon][leaf_index]
        chain = [node]
        while node != 0:
            node = self._parent[node]
            chain.append(node)
        chain.reverse()
        return chain

    def probability_measure(self) -> "PathMeasure":
        return PathMeasure(self, tuple(self._prob[leaf] for leaf in self._levels[self.horizon]))


def build_space(spec) -> PathSpace:
    """Build the tree described by a :class:`~sigma_lab.gallery.ProcessSpec`.

    Gallery specs always get the fair binary tree; custom specs may carry
    ``edge_probs``.
    """
    edge_probs = getattr(spec, "edge_probs", None)
    if getattr(spec, "kind", "custom") != "custom":
        edge_probs = None
    return PathSpace(spec.horizon, edge_probs)


def atoms(space: PathSpace, n: int) -> list[int]:
    """Depth-``n`` nodes, left to right."""
    return space.level(n)


def prob(space: PathSpace, node: int) -> Rational:
    return space._prob[space.check_node(node)]


@dataclass(frozen=True, eq=False)
class AdaptedProcess:
    """One rational value per node of ``space``.

    ``memo`` caches derived objects (random times, Q^(n)) keyed by the
    computing module; safe because the process is immutable.
    """

    space: PathSpace
    values: tuple[Rational, ...]
    memo: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.values) != self.space.n_nodes:
            raise SpaceError(
                f"process has {len(self.values)} values, space has {self.space.n_nodes} nodes")

    @classmethod
    def from_node_values(cls, space: PathSpace, values: Iterable) -> "AdaptedProcess":
        return cls(space, tuple(as_rational(v) for v in values))

    @classmethod
    def from_levels(cls, space: PathSpace, levels: Sequence[Sequence]) -> "AdaptedProcess":
        """Build from ``levels[d]`` = depth-``d`` values, left to right."""
        if len(levels) != space.horizon + 1:
            raise SpaceError(
                f"values has {len(levels)} levels, expected {space.horizon + 1}")
        vals: list[Rational | None] = [None] * space.n_nodes
        for d, row in enumerate(levels):
            nodes = space._levels[d]
            if len(row) != len(nodes):
                raise SpaceError(
                    f"values[{d}] has {len(row)} entries, expected {len(nodes)}")
            for node, v in zip(nodes, row):
                vals[node] = as_rational(v)
        return cls(space, tuple(vals))

    @classmethod
    def from_path_function(cls, space: PathSpace, fn: Callable[[tuple[int, ...]], object]) -> "AdaptedProcess":
        return cls(space, tuple(as_rational(fn(space.path(v))) for v in range(space.n_nodes)))

    @classmethod
    def constant(cls, space: PathSpace, c=0) -> "AdaptedProcess":
        c = as_rational(c)
        return cls(space, (c,) * space.n_nodes)

    def __getitem__(self, node: int) -> Rational:
        return self.values[node]

    def at_depth(self, n: int) -> list[Rational]:
        return [self.values[v] for v in self.space.level(n)]

    def levels(self) -> list[list[Rational]]:
        return [self.at_depth(d) for d in range(self.space.horizon + 1)]

    def _same_space(self, other: "AdaptedProcess") -> None:
        if other.space is not self.space:
            raise SpaceError("processes live on different spaces")

    def __add__(self, other: "AdaptedProcess") -> "AdaptedProcess":
        self._same_space(other)
        return AdaptedProcess(self.space, tuple(a + b for a, b in zip(self.values, other.values)))

    def __sub__(self, other: "AdaptedProcess") -> "AdaptedProcess":
        self._same_space(other)
        return AdaptedProcess(self.space, tuple(a - b for a, b in zip(self.values, other.values)))

    def __neg__(self) -> "AdaptedProcess":
        return AdaptedProcess(self.space, tuple(-a for a in self.values))

    def equals(self, other: "AdaptedProcess") -> bool:
        return other.space is self.space and self.values == other.values


@dataclass(frozen=True, eq=False)
class PathMeasure:
    """Nonnegative rational weight per leaf (leaf order = ``space.leaves``)."""

    space: PathSpace
    weights: tuple[Rational, ...]

    def __post_init__(self):
        if len(self.weights) != self.space.n_leaves:
            raise SpaceError(
                f"measure has {len(self.weights)} weights, space has {self.space.n_leaves} leaves")
        for i, w in enumerate(self.weights):
            if w < 0:
                raise SpaceError(f"negative weight {w} on leaf {self.space.path(self.space._levels[-1][i])}")

    @property
    def total(self) -> Rational:
        return self.node_masses[0]

    @cached_property
    def node_masses(self) -> list[Rational]:
        """Mass of every node's subtree, accumulated bottom-up."""
        space = self.space
        masses: list[Rational] = [Rational(0)] * space.n_nodes
        for leaf, w in zip(space._levels[space.horizon], self.weights):
            masses[leaf] = w
        for d in range(space.horizon - 1, -1, -1):
            for v in space._levels[d]:
                masses[v] = sum((masses[c] for c in space._children[v]), Rational(0))
        return masses

    def atom_mass(self, node: int) -> Rational:
        return self.node_masses[self.space.check_node(node)]

    def mass(self, nodes: Iterable[int]) -> Rational:
        """Mass of a union of atoms; the atoms must be pairwise disjoint."""
        return sum((self.atom_mass(v) for v in nodes), Rational(0))

    def with_weight(self, leaf_index: int, weight) -> "PathMeasure":
        w = list(self.weights)
        w[leaf_index] = as_rational(weight)
        return PathMeasure(self.space, tuple(w))

    def equals(self, other: "PathMeasure") -> bool:
        return other.space is self.space and self.weights == other.weights


def cond_exp(proc: AdaptedProcess, n: int) -> list[Rational]:
    """One-step conditional expectation ``E[proc_{n+1} | F_n]`` per depth-``n`` atom."""
    space = proc.space
    space.check_time(n, space.horizon - 1)
    vals = proc.values
    edge = space._edge
    return [
        sum((edge[c] * vals[c] for c in space._children[v]), Rational(0))
        for v in space._levels[n]
    ]


def conditional_expectation(proc: AdaptedProcess, n: int, m: int) -> list[Rational]:
    """``E[proc_n | F_m]`` per depth-``m`` atom, for ``m <= n``, by repeated one-step averaging."""
    space = proc.space
    space.check_time(n)
    space.check_time(m, n)
    vals = {v: proc.values[v] for v in space._levels[n]}
    for d in range(n - 1, m - 1, -1):
        vals = {
            v: sum((space._edge[c] * vals[c] for c in space._children[v]), Rational(0))
            for v in space._levels[d]
        }
    return [vals[v] for v in space._levels[m]]


def expect(proc: AdaptedProcess, n: int, mu: PathMeasure | None = None) -> Rational:
    """``sum over depth-n atoms of mass(atom) * proc(atom)``; ``mu=None`` means P."""
    space = proc.space
    space.check_time(n)
    if mu is None:
        return sum((space._prob[v] * proc.values[v] for v in space._levels[n]), Rational(0))
    if mu.space is not space:
        raise SpaceError("measure and process live on different spaces")
    return sum((mu.atom_mass(v) * proc.values[v] for v in space._levels[n]), Rational(0))


def is_predictable(proc: AdaptedProcess) -> bool:
    space = proc.space
    vals = proc.values
    for kids in space._children:
        if kids and any(vals[c] != vals[kids[0]] for c in kids[1:]):
            return False
    return True
