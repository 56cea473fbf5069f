import pickle

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import GALLERY, gallery
import oracles
from sigma_lab.decomposition import is_martingale
from sigma_lab.pathspace import AdaptedProcess, PathSpace, SpaceError
from sigma_lab.randomtimes import (
    NEVER,
    NotStoppingTimeError,
    RandomTime,
    at_most,
    before,
    first_zero_after,
    is_stopping_time,
    last_zero,
    stop_process,
)


def leaf(space, steps):
    return space.leaf_span(space.node_at(tuple(0 if s == 1 else 1 for s in steps)))[0]


def test_first_zero_after_trivial():
    space = PathSpace(3)
    assert first_zero_after(AdaptedProcess.constant(space, 0), 0).values == (1,) * 8
    assert first_zero_after(AdaptedProcess.constant(space, 2), 0).values == (NEVER,) * 8


def test_first_zero_after_reflected_path():
    space, X = gallery("reflected_srw", 4)
    d0 = first_zero_after(X, 0)
    assert d0[leaf(space, (1, -1, 1, 1))] == 2
    assert d0.stopping and is_stopping_time(d0)


def test_first_zero_after_range():
    _, X = gallery("reflected_srw", 3)
    for n in (-1, 3):
        with pytest.raises(SpaceError):
            first_zero_after(X, n)


def test_last_zero_examples():
    space, X = gallery("reflected_srw", 4)
    g = last_zero(X)
    assert g[leaf(space, (1, -1, 1, -1))] == 4
    assert g[leaf(space, (1, 1, 1, 1))] == 0
    assert last_zero(AdaptedProcess.constant(space, 1)).values == (NEVER,) * 16


@pytest.mark.parametrize("kind", GALLERY)
def test_last_zero_matches_oracle(kind):
    space, X = gallery(kind, 6)
    g = last_zero(X)
    for i, steps in enumerate(oracles.step_paths(6)):
        expected = oracles.last_zero(oracles.FUNCS[kind], steps)
        assert g[i] == (NEVER if expected is None else expected)


def test_last_zero_is_not_stopping():
    _, X = gallery("reflected_srw", 4)
    assert not is_stopping_time(last_zero(X))
    with pytest.raises(NotStoppingTimeError):
        stop_process(X, last_zero(X))


def test_non_stopping_rejected_at_construction():
    space = PathSpace(2)
    with pytest.raises(NotStoppingTimeError):
        RandomTime(space, (1, 2, 2, 2), stopping=True)
    with pytest.raises(SpaceError):
        RandomTime(space, (1, 1))


def test_stop_process_trivial():
    space, X = gallery("drawdown", 4)
    never = RandomTime(space, (NEVER,) * 16, stopping=True)
    assert stop_process(X, never).equals(X)
    zero = RandomTime(space, (0,) * 16, stopping=True)
    assert stop_process(X, zero).equals(AdaptedProcess.constant(space, X.values[space.root]))


def test_stopped_at_d1_is_martingale_after():
    _, X = gallery("reflected_srw", 4)
    assert is_martingale(stop_process(X, first_zero_after(X, 1)), start=2)


@pytest.mark.parametrize("kind", GALLERY)
@pytest.mark.parametrize("h", [4, 6])
def test_hitting_time_properties(kind, h):
    space, X = gallery(kind, h)
    g = last_zero(X)
    prev = None
    for n in range(h):
        d = first_zero_after(X, n)
        assert all(t is NEVER or t > n for t in d.values)
        # {g <= n} is exactly {d_n = NEVER}
        assert at_most(g, n) == [t is NEVER for t in d.values]
        stopped = stop_process(X, d)
        for i, t in enumerate(d.values):
            if t is not NEVER:
                assert stopped.values[space.leaf_ancestors[h][i]] == 0
        assert is_martingale(stopped, start=n + 1)
        if prev is not None:
            for a, b in zip(prev.values, d.values):
                if a is not NEVER and b is not NEVER:
                    assert b >= a
        prev = d


def test_event_masks_read_never_as_minus_infinity():
    space = PathSpace(1)
    g = RandomTime(space, (NEVER, 1))
    assert before(g, 0) == [True, False]
    assert before(g, 2) == [True, True]
    assert at_most(g, 1) == [True, True]


def test_never_singleton():
    assert pickle.loads(pickle.dumps(NEVER)) is NEVER
    assert repr(NEVER) == "NEVER"


def brute_is_stopping(space, values):
    H = space.horizon
    for n in range(H + 1):
        for atom in space.level(n):
            lo, hi = space.leaf_span(atom)
            if len({values[i] == n for i in range(lo, hi)}) > 1:
                return False
    return True


@given(st.lists(st.sampled_from([0, 1, 2, 3, NEVER]), min_size=8, max_size=8))
def test_stopping_check_matches_definition(values):
    space = PathSpace(3)
    tau = RandomTime(space, tuple(values))
    assert is_stopping_time(tau) == brute_is_stopping(space, values)
