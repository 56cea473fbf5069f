from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import GALLERY, gallery
from sigma_lab.gallery import ProcessSpec
from sigma_lab.pathspace import (
    AdaptedProcess,
    PathSpace,
    SpaceError,
    atoms,
    build_space,
    cond_exp,
    conditional_expectation,
    expect,
    is_predictable,
    prob,
)
from sigma_lab.decomposition import doob_decompose
import oracles


def test_build_space_fair_binary_h2():
    space = build_space(ProcessSpec("reflected_srw", 2))
    P = space.probability_measure()
    assert space.n_leaves == 4
    assert P.weights == (Fraction(1, 4),) * 4


def test_build_space_h12_normalised():
    space = build_space(ProcessSpec("reflected_srw", 12))
    assert space.n_leaves == 4096
    assert space.probability_measure().total == 1


def test_custom_edge_probs_product_rule():
    spec = ProcessSpec("custom", 2, values=((0,), (0, 0), (0, 0, 0, 0)),
                       edge_probs=((("1/3", "2/3"),), (("1/2", "1/2"), ("1/4", "3/4"))))
    space = build_space(spec)
    assert space.probability_measure().weights == (
        Fraction(1, 6), Fraction(1, 6), Fraction(2, 12), Fraction(6, 12))
    assert prob(space, space.node_at((0,))) == Fraction(1, 3)


@pytest.mark.parametrize("edge_probs, msg", [
    ([[["1/2", "1/3"]]], "sum to"),
    ([[["0", "1"]]], "non-positive"),
    ([[[]]], "no children"),
    ([[["1/2", "1/2"]], [["1"]]], "levels"),
])
def test_bad_edge_probs(edge_probs, msg):
    with pytest.raises(SpaceError, match=msg):
        PathSpace(1, edge_probs)


@pytest.mark.parametrize("h", [0, -3])
def test_horizon_must_be_positive(h):
    with pytest.raises(SpaceError):
        PathSpace(h)


def test_general_k_ary_tree():
    space = PathSpace(2, [[["1/3", "1/3", "1/3"]], [["1"], ["1/2", "1/2"], ["1/5", "4/5"]]])
    assert space.n_leaves == 5
    assert space.probability_measure().total == 1
    assert [space.depth(v) for v in atoms(space, 2)] == [2] * 5


def test_atoms():
    space = PathSpace(2)
    assert atoms(space, 0) == [space.root]
    assert len(atoms(space, 1)) == 2
    assert len(atoms(space, 2)) == 4
    assert [space.path(v) for v in atoms(space, 2)] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    with pytest.raises(SpaceError):
        atoms(space, 3)


def test_prob():
    space = PathSpace(3)
    assert prob(space, space.root) == 1
    assert prob(space, space.node_at((1, 0, 1))) == Fraction(1, 8)
    with pytest.raises(SpaceError):
        prob(space, space.n_nodes)


def test_cond_exp_examples():
    space = PathSpace(3)
    five = AdaptedProcess.constant(space, 5)
    for n in range(3):
        assert cond_exp(five, n) == [5] * (2 ** n)
    _, X = gallery("reflected_srw", 3)
    assert cond_exp(X, 0) == [1]
    _, D = gallery("drawdown", 3)
    assert cond_exp(D, 0) == [Fraction(1, 2)]
    with pytest.raises(SpaceError):
        cond_exp(X, 3)


def test_expect_examples():
    space, X = gallery("reflected_srw", 3)
    assert expect(X, 3) == Fraction(3, 2) == oracles.expect(oracles.reflected, 3)
    assert expect(X, 1) == 1
    zero = AdaptedProcess.constant(space, 0)
    assert expect(zero, 2) == 0
    assert expect(zero, 2, space.probability_measure().with_weight(0, 7)) == 0
    with pytest.raises(SpaceError):
        expect(X, 4)


def test_expect_under_custom_measure_uses_atom_mass():
    space, X = gallery("reflected_srw", 2)
    mu = space.probability_measure().with_weight(0, 1).with_weight(3, 0)
    # atoms at depth 1 get masses 1 + 1/4 and 1/4 + 0; X_1 = 1 on both
    assert expect(X, 1, mu) == Fraction(3, 2)


def test_is_predictable_examples():
    space, X = gallery("reflected_srw", 3)
    assert is_predictable(AdaptedProcess.constant(space, 2))
    assert not is_predictable(X)
    assert is_predictable(doob_decompose(X).A)


def test_finite_additivity():
    space = PathSpace(4)
    mu = space.probability_measure().with_weight(5, Fraction(3, 7))
    for n in range(5):
        nodes = atoms(space, n)
        assert mu.mass(nodes) == mu.total
        for v in nodes:
            lo, hi = space.leaf_span(v)
            assert mu.atom_mass(v) == sum(mu.weights[lo:hi])
            if space.children(v):
                assert mu.atom_mass(v) == mu.mass(space.children(v))


def test_negative_weights_rejected():
    space = PathSpace(1)
    with pytest.raises(SpaceError):
        space.probability_measure().with_weight(0, -1)


@pytest.mark.parametrize("kind", GALLERY)
@pytest.mark.parametrize("h", range(1, 9))
def test_tower_property(kind, h):
    _, X = gallery(kind, h)
    for n in range(h + 1):
        target = expect(X, n)
        for m in range(n + 1):
            lifted = conditional_expectation(X, n, m)
            space = X.space
            assert sum(prob(space, v) * c for v, c in zip(atoms(space, m), lifted)) == target


@given(st.integers(1, 7), st.data())
def test_atoms_partition_leaves(h, data):
    space = PathSpace(h)
    n = data.draw(st.integers(0, h))
    covered = []
    for v in atoms(space, n):
        lo, hi = space.leaf_span(v)
        covered.extend(range(lo, hi))
    assert sorted(covered) == list(range(space.n_leaves))


@given(st.lists(st.lists(st.integers(1, 5), min_size=1, max_size=3), min_size=1, max_size=3))
def test_random_trees_normalised(weights):
    # one level of random positive weights, normalised per node
    rows = [[f"{w}/{sum(ws)}" for w in ws] for ws in weights[:1]]
    space = PathSpace(1, [rows])
    assert space.probability_measure().total == 1


def test_fraction_fallback_without_gmpy2():
    import subprocess
    import sys

    code = ("import sys; sys.modules['gmpy2'] = None\n"
            "from sigma_lab.gallery import ProcessSpec, make_process\n"
            "from sigma_lab.qmeasure import q_law_of_g\n"
            "from sigma_lab.pathspace import Rational\n"
            "space, X = make_process(ProcessSpec('reflected_srw', 6))\n"
            "print(Rational.__name__, [str(m) for m in q_law_of_g(space, X).masses])")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "Fraction ['1', '0', '1/2', '0', '3/8', '0']"
