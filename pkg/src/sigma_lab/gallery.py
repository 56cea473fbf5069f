"""Built-in class (Sigma) processes on the fair coin tree, plus custom specs.

On the binary tree child slot 0 is an up-step (+1) and slot 1 a down-step (-1).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .pathspace import AdaptedProcess, PathSpace, SpaceError, as_rational, build_space

KINDS = ("reflected_srw", "drawdown", "positive_part", "custom")


class SpecError(ValueError):
    """Malformed process spec. ``position`` is ``(line, column)`` for JSON syntax errors."""

    def __init__(self, message: str, position: tuple[int, int] | None = None):
        super().__init__(message)
        self.position = position


def walk_sums(path: Sequence[int]) -> list[int]:
    """Partial sums ``S_0..S_n`` of the walk that follows ``path``."""
    sums = [0]
    for slot in path:
        sums.append(sums[-1] + (1 if slot == 0 else -1))
    return sums


def reflected_srw(sums: Sequence[int]) -> int:
    return abs(sums[-1])


def drawdown(sums: Sequence[int]) -> int:
    return max(sums) - sums[-1]


def positive_part(sums: Sequence[int]) -> int:
    return max(sums[-1], 0)


PATH_FUNCTIONS: dict[str, Callable[[Sequence[int]], int]] = {
    "reflected_srw": reflected_srw,
    "drawdown": drawdown,
    "positive_part": positive_part,
}

# same processes evaluated on an array of partial sums, shape (samples, n + 1)
VECTOR_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "reflected_srw": lambda S: np.abs(S[:, -1]),
    "drawdown": lambda S: S.max(axis=1) - S[:, -1],
    "positive_part": lambda S: np.maximum(S[:, -1], 0),
}


@dataclass(frozen=True)
class ProcessSpec:
    kind: str
    horizon: int
    values: tuple | None = None
    edge_probs: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not isinstance(self.horizon, int) or isinstance(self.horizon, bool):
            raise SpecError(f"horizon must be an integer, got {self.horizon!r}")
        if self.horizon < 1:
            raise SpecError(f"horizon must be >= 1, got {self.horizon}")
        if self.kind == "custom" and self.values is None:
            raise SpecError("custom spec needs 'values'")
        if self.kind != "custom" and (self.values is not None or self.edge_probs is not None):
            raise SpecError(f"gallery kind {self.kind!r} takes no 'values' or 'edge_probs'")

    @classmethod
    def from_dict(cls, data) -> "ProcessSpec":
        if not isinstance(data, dict):
            raise SpecError("spec must be a JSON object")
        unknown = set(data) - {"kind", "horizon", "values", "edge_probs"}
        if unknown:
            raise SpecError(f"unknown spec fields: {sorted(unknown)}")
        for key in ("kind", "horizon"):
            if key not in data:
                raise SpecError(f"spec is missing {key!r}")
        return cls(
            kind=data["kind"],
            horizon=data["horizon"],
            values=_freeze(data.get("values")),
            edge_probs=_freeze(data.get("edge_probs")),
        )

    @classmethod
    def from_json(cls, text: str) -> "ProcessSpec":
        if not text.strip():
            raise SpecError("empty spec", (1, 1))
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON: {exc.msg}", (exc.lineno, exc.colno)) from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "horizon": self.horizon}
        if self.values is not None:
            out["values"] = _thaw(self.values)
        if self.edge_probs is not None:
            out["edge_probs"] = _thaw(self.edge_probs)
        return out

    def digest(self) -> str:
        """sha256 of the canonical JSON form."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _freeze(obj):
    if isinstance(obj, list):
        return tuple(_freeze(x) for x in obj)
    return obj


def _thaw(obj):
    if isinstance(obj, tuple):
        return [_thaw(x) for x in obj]
    return obj


def make_process(spec: ProcessSpec) -> tuple[PathSpace, AdaptedProcess]:
    try:
        space = build_space(spec)
        if spec.kind == "custom":
            X = AdaptedProcess.from_levels(space, spec.values)
        else:
            fn = PATH_FUNCTIONS[spec.kind]
            X = AdaptedProcess.from_path_function(space, lambda path: fn(walk_sums(path)))
    except SpaceError as exc:
        raise SpecError(str(exc)) from exc
    return space, X


def tabulate(horizon: int, fn: Callable[[list[int]], object]) -> ProcessSpec:
    """Custom spec on the fair binary tree with ``X = fn(S_0..S_n)`` at every node.

    Values are stored as ``"p/q"`` strings, matching the JSON format.
    """
    space = PathSpace(horizon)
    levels = [
        [str(as_rational(fn(walk_sums(space.path(v))))) for v in space.level(d)]
        for d in range(horizon + 1)
    ]
    return ProcessSpec("custom", horizon, values=_freeze(levels))
