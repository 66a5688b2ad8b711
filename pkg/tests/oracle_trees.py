"""Independent reference implementations used as structural oracles."""


class RefNode:
    def __init__(self, key):
        self.key = key
        self.left = None
        self.right = None
        self.height = 0


def bst_insert(root, key):
    node = RefNode(key)
    if root is None:
        return node
    cur = root
    while True:
        if key < cur.key:
            if cur.left is None:
                cur.left = node
                return root
            cur = cur.left
        else:
            if cur.right is None:
                cur.right = node
                return root
            cur = cur.right


def _h(node):
    return node.height if node is not None else -1


def _bf(node):
    return _h(node.left) - _h(node.right)


def _update(node):
    node.height = 1 + max(_h(node.left), _h(node.right))


def _ref_rot_right(node):
    pivot = node.left
    node.left = pivot.right
    pivot.right = node
    _update(node)
    _update(pivot)
    return pivot


def _ref_rot_left(node):
    pivot = node.right
    node.right = pivot.left
    pivot.left = node
    _update(node)
    _update(pivot)
    return pivot


def avl_insert(node, key):
    """Classic recursive bottom-up AVL insert, one repair per node, with the
    BF(child) = 0 tie resolved as a single rotation."""
    if node is None:
        return RefNode(key)
    if key < node.key:
        node.left = avl_insert(node.left, key)
    else:
        node.right = avl_insert(node.right, key)
    _update(node)
    bf = _bf(node)
    if bf > 1:
        if _bf(node.left) >= 0:
            return _ref_rot_right(node)
        node.left = _ref_rot_left(node.left)
        return _ref_rot_right(node)
    if bf < -1:
        if _bf(node.right) <= 0:
            return _ref_rot_left(node)
        node.right = _ref_rot_right(node.right)
        return _ref_rot_left(node)
    return node


def same_shape(a, b):
    if a is None or b is None:
        return a is None and b is None
    return (a.key == b.key and same_shape(a.left, b.left)
            and same_shape(a.right, b.right))
