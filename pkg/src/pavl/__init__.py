"""p-AVL trees: probabilistically rebalanced AVL insertion, a seeded
Monte-Carlo sweep harness, curve fitting, and Pareto knee analysis."""

__version__ = "0.1.0"

from .tree import (  # noqa: F401
    DuplicateKeyError,
    InsertReport,
    Node,
    PavlTree,
    RepairCounters,
    StructuralError,
    StructureReport,
    repair,
    rotate_left,
    rotate_right,
    validate,
)
from .metrics import (  # noqa: F401
    TreeMetrics,
    average_depth,
    sigma,
    tree_height,
    tree_metrics,
    violating_fraction,
)
