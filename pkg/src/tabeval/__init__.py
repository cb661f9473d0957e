"""Scoring and analysis tools for table recognition output."""

from .table_model import (
    CellGrid,
    Complexity,
    Kind,
    Mode,
    TableTree,
    TokenizedTable,
    TreeNode,
    classify_complexity,
    detokenize,
    parse_table,
    project_grid,
    serialize,
    tokenize,
)
from .teds import (
    EditCostModel,
    TedsScore,
    exact_structure_match,
    node_substitution_cost,
    normalized_levenshtein_similarity,
    teds,
    tree_edit_distance,
)

__version__ = "0.1.0"
