"""Structural statistics of a finished tree.

All functions are pure and read the cached ``height``/``size`` fields
(cache correctness is audited separately by ``tree.validate``). Traversals
are iterative because low-p trees degenerate toward chains.
"""

from dataclasses import dataclass

from .tree import PavlTree


@dataclass
class TreeMetrics:
    n: int
    height: int
    avg_depth: float
    sigma: float
    violating_fraction: float


def _root_of(tree):
    return tree.root if isinstance(tree, PavlTree) else tree


def tree_height(tree):
    """Height in edges; the empty tree has height -1."""
    root = _root_of(tree)
    return -1 if root is None else root.height


def _walk(root):
    """Yield (node, depth) over the whole tree, root depth 0."""
    stack = [(root, 0)]
    while stack:
        node, depth = stack.pop()
        yield node, depth
        if node.left is not None:
            stack.append((node.left, depth + 1))
        if node.right is not None:
            stack.append((node.right, depth + 1))


def average_depth(tree):
    """Mean node depth in edges, root at depth 0."""
    root = _root_of(tree)
    if root is None:
        raise ValueError("average_depth is undefined for an empty tree")
    total = 0
    for _, depth in _walk(root):
        total += depth
    return total / root.size


def _bf(node):
    lh = node.left.height if node.left is not None else -1
    rh = node.right.height if node.right is not None else -1
    return lh - rh


def sigma(tree):
    """Size-weighted global imbalance: mean of max(0, |BF|-1) * subtree size.

    Zero exactly when every node satisfies the AVL condition, so any p = 1
    tree scores 0; a left chain of three scores 1.0.
    """
    root = _root_of(tree)
    if root is None:
        raise ValueError("sigma is undefined for an empty tree")
    total = 0
    for node, _ in _walk(root):
        excess = abs(_bf(node)) - 1
        if excess > 0:
            total += excess * node.size
    return total / root.size


def violating_fraction(tree):
    """Fraction of nodes with |BF| > 1."""
    root = _root_of(tree)
    if root is None:
        raise ValueError("violating_fraction is undefined for an empty tree")
    bad = 0
    for node, _ in _walk(root):
        bf = _bf(node)
        if bf > 1 or bf < -1:
            bad += 1
    return bad / root.size


def tree_metrics(tree):
    """All end-of-build statistics in one traversal."""
    root = _root_of(tree)
    if root is None:
        raise ValueError("metrics are undefined for an empty tree")
    depth_total = 0
    sigma_total = 0
    bad = 0
    for node, depth in _walk(root):
        depth_total += depth
        lh = node.left.height if node.left is not None else -1
        rh = node.right.height if node.right is not None else -1
        bf = lh - rh
        if bf < 0:
            bf = -bf
        if bf > 1:
            bad += 1
            sigma_total += (bf - 1) * node.size
    n = root.size
    return TreeMetrics(
        n=n,
        height=root.height,
        avg_depth=depth_total / n,
        sigma=sigma_total / n,
        violating_fraction=bad / n,
    )
