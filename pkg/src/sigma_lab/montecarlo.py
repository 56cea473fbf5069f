"""Monte Carlo estimates of Q functionals by weighting walk samples with X_n.

Floating point lives here and only here; the exact enumeration in
:mod:`sigma_lab.qmeasure` is the oracle these estimates are tested against.

Parallel runs split ``count`` samples into ``streams`` independent streams.
Stream ``i`` uses the sub-seed::

    derive_seed(seed, i) = mix64(seed + (i + 1) * 0xD1B54A32D192ED03 mod 2**64)

with ``mix64`` the SplitMix64 finaliser. A single stream uses ``seed`` itself.
Results depend on ``streams`` but not on how many threads execute them
(``SIGMA_LAB_THREADS`` caps the thread count).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import kernels
from .gallery import VECTOR_FUNCTIONS

STREAM_CONSTANT = 0xD1B54A32D192ED03
MASK64 = (1 << 64) - 1
# samples per kernel call; bounds memory, does not affect results
BLOCK_CELLS = 1 << 22


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    stderr: float
    count: int
    seed: int
    target: float | None = None
    discrete_target: float | None = None

    @property
    def degenerate(self) -> bool:
        """One sample: the standard error is reported as 0 but carries no information."""
        return self.count < 2

    @property
    def bias(self) -> float | None:
        return None if self.target is None else self.estimate - self.target

    @property
    def z(self) -> float | None:
        if self.target is None:
            return None
        if self.stderr == 0:
            return 0.0 if self.estimate == self.target else math.copysign(math.inf, self.bias)
        return self.bias / self.stderr


@dataclass(frozen=True)
class ScalingSpec:
    """Walk with ``m`` steps per unit time and step size ``1/sqrt(m)``, run to time ``t``."""

    t: float
    m: int

    def __post_init__(self):
        if not isinstance(self.m, int) or isinstance(self.m, bool) or self.m < 1:
            raise ValueError(f"steps per unit time must be a positive integer, got {self.m!r}")
        if not (isinstance(self.t, (int, float)) and math.isfinite(self.t) and self.t > 0):
            raise ValueError(f"target time must be a positive real, got {self.t!r}")
        if self.horizon < 1:
            raise ValueError(f"t*m = {self.t * self.m} rounds to a zero-step walk")

    @property
    def horizon(self) -> int:
        return round(self.t * self.m)


@dataclass(frozen=True)
class _Moments:
    n: int
    mean: float
    m2: float

    @classmethod
    def of(cls, values: np.ndarray) -> "_Moments":
        if values.size == 0:
            return cls(0, 0.0, 0.0)
        mean = float(values.mean())
        return cls(int(values.size), mean, float(((values - mean) ** 2).sum()))

    def merge(self, other: "_Moments") -> "_Moments":
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        return _Moments(n, mean, m2)

    def estimate(self, seed: int, **extra) -> MCEstimate:
        sd = math.sqrt(self.m2 / (self.n - 1)) if self.n > 1 else 0.0
        return MCEstimate(self.mean, sd / math.sqrt(self.n), self.n, seed, **extra)


def derive_seed(seed: int, stream: int) -> int:
    return kernels.mix64((seed + (stream + 1) * STREAM_CONSTANT) & MASK64)


def thread_cap() -> int:
    raw = os.environ.get("SIGMA_LAB_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"SIGMA_LAB_THREADS must be an integer, got {raw!r}") from None
    return max(cap, 1)


def _validate(count, seed, streams) -> None:
    if not isinstance(count, int) or isinstance(count, bool) or count < 1:
        raise ValueError(f"sample count must be a positive integer, got {count!r}")
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    if not isinstance(streams, int) or streams < 1:
        raise ValueError(f"streams must be a positive integer, got {streams!r}")


def _run_streams(sample_block: Callable[[int, int, int], np.ndarray], count: int, seed: int,
                 streams: int, cells_per_sample: int) -> _Moments:
    """Draw ``count`` values split over ``streams``; ``sample_block(seed, start, size)``."""
    sizes = [count // streams + (i < count % streams) for i in range(streams)]
    seeds = [seed] if streams == 1 else [derive_seed(seed, i) for i in range(streams)]
    block = max(1, BLOCK_CELLS // max(cells_per_sample, 1))

    def one(i: int) -> _Moments:
        acc = _Moments(0, 0.0, 0.0)
        for start in range(0, sizes[i], block):
            size = min(block, sizes[i] - start)
            acc = acc.merge(_Moments.of(sample_block(seeds[i], start, size)))
        return acc

    threads = min(streams, thread_cap())
    if threads == 1:
        parts = [one(i) for i in range(streams)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, range(streams)))
    total = _Moments(0, 0.0, 0.0)
    for part in parts:
        total = total.merge(part)
    return total


def _as_vector_fn(fn, what: str):
    if isinstance(fn, str):
        try:
            return VECTOR_FUNCTIONS[fn]
        except KeyError:
            raise ValueError(f"unknown {what} {fn!r}") from None
    return fn


def estimate_q_functional(generator, X, n: int, F, count: int, seed: int, *,
                          streams: int = 1, target: float | None = None) -> MCEstimate:
    """Estimate ``Q[F_n 1{g < n}] = E_P[F_n X_n]`` by sampling under P.

    Parameters
    ----------
    generator : callable or None
        ``generator(seed, start, size, n)`` returning walk partial sums of shape
        ``(size, n + 1)``; ``None`` uses the compiled/numpy walk kernel.
    X : callable or str
        Weight process evaluated on the sums array, or a gallery name.
    F : callable or None
        Functional of the first ``n`` steps, evaluated on the sums array;
        ``None`` means ``F = 1``.
    """
    _validate(count, seed, streams)
    if not isinstance(n, int) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    gen = kernels.walk_sums if generator is None else generator
    weight = _as_vector_fn(X, "weight process")

    def block(s: int, start: int, size: int) -> np.ndarray:
        sums = gen(s, start, size, n)
        vals = np.asarray(weight(sums), dtype=np.float64)
        if F is not None:
            vals = vals * np.asarray(F(sums), dtype=np.float64)
        return vals

    moments = _run_streams(block, count, seed, streams, n + 1)
    return moments.estimate(seed, target=target)


def exact_mean_abs_walk(k: int) -> Fraction:
    """``E|S_k|`` for the simple symmetric walk, by summing over the binomial law."""
    return Fraction(sum(math.comb(k, j) * abs(2 * j - k) for j in range(k + 1)), 2 ** k)


def brownian_mean_abs(t: float) -> float:
    """``E|B_t| = sqrt(2t/pi)``."""
    return math.sqrt(2 * t / math.pi)


def discretization_bias(scaling: ScalingSpec) -> float:
    """Exact ``E|S_k|/sqrt(m) - sqrt(2t/pi)`` for ``k = round(t*m)``."""
    return float(exact_mean_abs_walk(scaling.horizon)) / math.sqrt(scaling.m) - brownian_mean_abs(scaling.t)


def estimate_q_g_tail(scaling: ScalingSpec, count: int, seed: int, *, streams: int = 1) -> MCEstimate:
    """Estimate ``Q[g <= t] = E|B_t|`` with the scaled reflected walk ``|S_{round(tm)}|/sqrt(m)``.

    ``target`` is the Brownian value; ``discrete_target`` is the exact mean of
    the walk at this ``m``, so their difference is the discretization gap.
    """
    _validate(count, seed, streams)
    k = scaling.horizon
    scale = 1.0 / math.sqrt(scaling.m)

    def block(s: int, start: int, size: int) -> np.ndarray:
        return kernels.abs_endpoints(s, start, size, k) * scale

    moments = _run_streams(block, count, seed, streams, 1)
    return moments.estimate(
        seed,
        target=brownian_mean_abs(scaling.t),
        discrete_target=float(exact_mean_abs_walk(k)) * scale,
    )
