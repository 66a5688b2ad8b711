"""Probabilistically rebalanced AVL tree.

Insertion is plain BST descent followed by bottom-up unwinding. At every
ancestor on the way back to the root the cached height/size are refreshed;
if the node's balance factor leaves [-1, 1] an imbalance event is recorded
and, with probability ``p``, a single repair action (one single or one
double rotation) is applied. Unwinding always continues to the root, so a
skipped repair can leave |BF| > 2 behind; later inserts that pass through
the node count it again.
"""

import random
from dataclasses import dataclass


class DuplicateKeyError(ValueError):
    """Key already present in the tree."""


class StructuralError(ValueError):
    """Rotation or repair called on a node that cannot support it."""


class Node:
    """One tree node. ``height`` is in edges (leaf = 0), ``size`` counts nodes."""

    __slots__ = ("key", "left", "right", "height", "size")

    def __init__(self, key):
        self.key = key
        self.left = None
        self.right = None
        self.height = 0
        self.size = 1


def _refresh(node):
    left, right = node.left, node.right
    lh = left.height if left is not None else -1
    rh = right.height if right is not None else -1
    node.height = (lh if lh > rh else rh) + 1
    node.size = 1 + (left.size if left is not None else 0) \
                  + (right.size if right is not None else 0)


def balance_factor(node):
    lh = node.left.height if node.left is not None else -1
    rh = node.right.height if node.right is not None else -1
    return lh - rh


def rotate_right(node):
    """Right rotation; left child becomes the subtree root."""
    pivot = node.left
    if pivot is None:
        raise StructuralError("rotate_right requires a left child")
    node.left = pivot.right
    pivot.right = node
    _refresh(node)
    _refresh(pivot)
    return pivot


def rotate_left(node):
    """Left rotation; right child becomes the subtree root."""
    pivot = node.right
    if pivot is None:
        raise StructuralError("rotate_left requires a right child")
    node.right = pivot.left
    pivot.left = node
    _refresh(node)
    _refresh(pivot)
    return pivot


def repair(node):
    """One AVL repair action at a violating node.

    Returns ``(new_subtree_root, kind)`` with kind "single" or "double".
    The standard four-case analysis is used, with the child tie (BF = 0)
    resolved as a single rotation. Exactly one action is performed even if
    the node stays imbalanced afterwards (possible when earlier repairs
    were skipped and |BF| > 2).
    """
    bf = balance_factor(node)
    if -1 <= bf <= 1:
        raise StructuralError("repair called on a balanced node (BF=%d)" % bf)
    if bf > 1:
        if balance_factor(node.left) >= 0:
            return rotate_right(node), "single"
        node.left = rotate_left(node.left)
        return rotate_right(node), "double"
    if balance_factor(node.right) <= 0:
        return rotate_left(node), "single"
    node.right = rotate_right(node.right)
    return rotate_left(node), "double"


@dataclass
class RepairCounters:
    rotations_total: int = 0
    single_rotations: int = 0
    double_rotations: int = 0
    imbalance_events: int = 0
    repairs_fired: int = 0


@dataclass
class InsertReport:
    imbalance_events_this_insert: int
    rotations_this_insert: int
    depth_of_new_node: int


@dataclass
class StructureReport:
    node_count: int
    max_abs_bf: int
    keys_ordered: bool
    caches_consistent: bool


class PavlTree:
    """AVL tree whose triggered repairs fire with fixed probability ``p``.

    ``p = 0`` degenerates to naive BST insertion, ``p = 1`` to a standard
    bottom-up AVL tree. The coin stream comes from a private
    ``random.Random(seed)``, so identical (p, seed, key sequence) rebuilds
    the identical tree.
    """

    def __init__(self, p, seed):
        if not 0.0 <= p <= 1.0:
            raise ValueError("repair probability must lie in [0, 1], got %r" % (p,))
        self.p = p
        self.rng = random.Random(seed)
        self.root = None
        self.counters = RepairCounters()

    def insert(self, key):
        node = self.root
        if node is None:
            self.root = Node(key)
            return InsertReport(0, 0, 0)

        path = []
        append = path.append
        while True:
            append(node)
            if key < node.key:
                nxt = node.left
                if nxt is None:
                    node.left = Node(key)
                    break
            elif key > node.key:
                nxt = node.right
                if nxt is None:
                    node.right = Node(key)
                    break
            else:
                raise DuplicateKeyError("key %r already present" % (key,))
            node = nxt

        depth = len(path)
        events = 0
        rotations = 0
        counters = self.counters
        p = self.p
        rand = self.rng.random
        for i in range(depth - 1, -1, -1):
            node = path[i]
            left, right = node.left, node.right
            lh = left.height if left is not None else -1
            rh = right.height if right is not None else -1
            node.height = (lh if lh > rh else rh) + 1
            node.size = 1 + (left.size if left is not None else 0) \
                          + (right.size if right is not None else 0)
            bf = lh - rh
            if bf > 1 or bf < -1:
                events += 1
                if rand() < p:
                    new_root, kind = repair(node)
                    counters.repairs_fired += 1
                    if kind == "single":
                        counters.single_rotations += 1
                        counters.rotations_total += 1
                        rotations += 1
                    else:
                        counters.double_rotations += 1
                        counters.rotations_total += 2
                        rotations += 2
                    if i > 0:
                        parent = path[i - 1]
                        if parent.left is node:
                            parent.left = new_root
                        else:
                            parent.right = new_root
                    else:
                        self.root = new_root
        counters.imbalance_events += events
        return InsertReport(events, rotations, depth)

    def insert_all(self, keys):
        for key in keys:
            self.insert(key)

    def __len__(self):
        return self.root.size if self.root is not None else 0

    def __contains__(self, key):
        node = self.root
        while node is not None:
            if key == node.key:
                return True
            node = node.right if key > node.key else node.left
        return False

    def in_order(self):
        """Keys in sorted order (iterative; trees can be chain-deep)."""
        out = []
        stack = []
        node = self.root
        while stack or node is not None:
            while node is not None:
                stack.append(node)
                node = node.left
            node = stack.pop()
            out.append(node.key)
            node = node.right
        return out


def validate(tree):
    """Recompute heights/sizes from scratch and audit the cached fields.

    Returns a StructureReport; failures are reported, never raised.
    """
    root = tree.root if isinstance(tree, PavlTree) else tree
    if root is None:
        return StructureReport(0, 0, True, True)

    consistent = True
    max_bf = 0
    count = 0
    # post-order without recursion: (node, visited) stack
    true_h = {}
    true_s = {}
    stack = [(root, False)]
    while stack:
        node, visited = stack.pop()
        if not visited:
            stack.append((node, True))
            if node.left is not None:
                stack.append((node.left, False))
            if node.right is not None:
                stack.append((node.right, False))
            continue
        count += 1
        lh = true_h[id(node.left)] if node.left is not None else -1
        rh = true_h[id(node.right)] if node.right is not None else -1
        ls = true_s[id(node.left)] if node.left is not None else 0
        rs = true_s[id(node.right)] if node.right is not None else 0
        true_h[id(node)] = max(lh, rh) + 1
        true_s[id(node)] = 1 + ls + rs
        if node.height != true_h[id(node)] or node.size != true_s[id(node)]:
            consistent = False
        bf = abs(lh - rh)
        if bf > max_bf:
            max_bf = bf

    # BST order == in-order traversal strictly increasing
    ordered = True
    prev = None
    stack = []
    node = root
    while stack or node is not None:
        while node is not None:
            stack.append(node)
            node = node.left
        node = stack.pop()
        if prev is not None and node.key <= prev:
            ordered = False
            break
        prev = node.key
        node = node.right

    return StructureReport(count, max_bf, ordered, consistent)
