import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pavl.metrics import (
    average_depth,
    sigma,
    tree_height,
    tree_metrics,
    violating_fraction,
)
from pavl.tree import PavlTree


def build(p, keys, seed=0):
    tree = PavlTree(p, seed)
    tree.insert_all(keys)
    return tree


def from_scratch(tree):
    """Recursive oracle computing everything without cached fields."""

    def walk(node, depth):
        if node is None:
            return -1, 0, 0, 0.0, 0  # height, size, depth_sum, sigma_sum, bad
        lh, ls, ld, lsig, lbad = walk(node.left, depth + 1)
        rh, rs, rd, rsig, rbad = walk(node.right, depth + 1)
        size = 1 + ls + rs
        bf = abs(lh - rh)
        excess = max(0, bf - 1) * size
        return (1 + max(lh, rh), size, depth + ld + rd,
                excess + lsig + rsig, (1 if bf > 1 else 0) + lbad + rbad)

    h, size, depth_sum, sigma_sum, bad = walk(tree.root, 0)
    return h, depth_sum / size, sigma_sum / size, bad / size


def mirror(node):
    if node is None:
        return
    node.left, node.right = node.right, node.left
    mirror(node.left)
    mirror(node.right)


# --- height ------------------------------------------------------------------

def test_height_empty_tree():
    assert tree_height(PavlTree(0.5, 0)) == -1


def test_height_single_node():
    assert tree_height(build(0.0, [1])) == 0


def test_height_chain_of_three():
    assert tree_height(build(0.0, [3, 2, 1])) == 2


# --- average depth -----------------------------------------------------------

def test_avg_depth_single_node():
    assert average_depth(build(0.0, [1])) == 0.0


def test_avg_depth_chain_of_three():
    assert average_depth(build(0.0, [3, 2, 1])) == 1.0


def test_avg_depth_perfect_seven():
    tree = build(0.0, [4, 2, 6, 1, 3, 5, 7])
    assert average_depth(tree) == pytest.approx(10 / 7)


def test_avg_depth_empty_is_error():
    with pytest.raises(ValueError):
        average_depth(PavlTree(0.5, 0))


# --- sigma -------------------------------------------------------------------

def test_sigma_zero_for_avl_tree():
    keys = random.Random(5).sample(range(10 ** 6), 500)
    assert sigma(build(1.0, keys, seed=5)) == 0.0


def test_sigma_left_chain_of_three():
    assert sigma(build(0.0, [3, 2, 1])) == pytest.approx(1.0)


def test_sigma_single_node():
    assert sigma(build(0.0, [1])) == 0.0


def test_sigma_empty_is_error():
    with pytest.raises(ValueError):
        sigma(PavlTree(0.5, 0))


# --- violating fraction ------------------------------------------------------

def test_violating_fraction_avl_tree():
    keys = random.Random(6).sample(range(10 ** 6), 500)
    assert violating_fraction(build(1.0, keys, seed=6)) == 0.0


def test_violating_fraction_chain_of_three():
    assert violating_fraction(build(0.0, [3, 2, 1])) == pytest.approx(1 / 3)


def test_violating_fraction_single_node():
    assert violating_fraction(build(0.0, [1])) == 0.0


# --- combined and properties -------------------------------------------------

key_lists = st.lists(st.integers(0, 10 ** 6), min_size=1, max_size=150,
                     unique=True)


@given(keys=key_lists, p=st.floats(0, 1), seed=st.integers(0, 2 ** 32))
@settings(max_examples=100, deadline=None)
def test_metrics_match_from_scratch_oracle(keys, p, seed):
    tree = build(p, keys, seed)
    m = tree_metrics(tree)
    h, avg, sig, vio = from_scratch(tree)
    assert m.height == h == tree_height(tree)
    assert m.avg_depth == pytest.approx(avg)
    assert m.sigma == pytest.approx(sig)
    assert m.violating_fraction == pytest.approx(vio)
    assert m.avg_depth <= m.height
    assert (m.sigma == 0) == (m.violating_fraction == 0)
    assert 0 <= m.violating_fraction <= 1
    assert m.sigma <= m.n


@given(keys=key_lists, p=st.floats(0, 1), seed=st.integers(0, 2 ** 32))
@settings(max_examples=60, deadline=None)
def test_sigma_and_violations_invariant_under_mirror(keys, p, seed):
    tree = build(p, keys, seed)
    before = (sigma(tree), violating_fraction(tree))
    mirror(tree.root)
    assert sigma(tree) == pytest.approx(before[0])
    assert violating_fraction(tree) == pytest.approx(before[1])
