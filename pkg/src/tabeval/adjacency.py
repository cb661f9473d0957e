"""Adjacency-relation precision/recall/F1, the baseline table metric.

Every non-empty cell is linked to its nearest non-empty neighbour to the right
(along the cell's top row) and below (along its leftmost column). Empty slots
and empty cells are skipped. The two tables' relation multisets are then
compared by exact match of ``(from, to, direction)``.
"""

from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass

from .table_model import CellGrid, TableTree, plain_text, project_grid

_WHITESPACE = re.compile(r"\s+")


class Direction(str, enum.Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


@dataclass(frozen=True)
class AdjacencyRelation:
    from_content: str
    to_content: str
    direction: Direction


@dataclass(frozen=True)
class RelationScore:
    precision: float
    recall: float
    f1: float
    n_gt: int
    n_pred: int
    n_matched: int


def cell_text(tokens) -> str:
    return _WHITESPACE.sub(" ", plain_text(tokens)).strip()


def adjacency_relations(grid: CellGrid) -> list[AdjacencyRelation]:
    texts = [cell_text(c.content) for c in grid.cells]
    relations = []
    for index, (i, j) in enumerate(grid.origins):
        if not texts[index]:
            continue
        height, width = grid.extents[index]
        for direction, positions in (
            (Direction.HORIZONTAL, ((i, c) for c in range(j + width, grid.n_cols))),
            (Direction.VERTICAL, ((r, j) for r in range(i + height, grid.n_rows))),
        ):
            for r, c in positions:
                slot = grid.slots[r][c]
                if slot is None or slot.cell == index or not texts[slot.cell]:
                    continue
                relations.append(AdjacencyRelation(texts[index], texts[slot.cell], direction))
                break
    return relations


def score_relations(gt: list[AdjacencyRelation], pred: list[AdjacencyRelation]) -> RelationScore:
    n_gt, n_pred = len(gt), len(pred)
    if n_gt == 0:
        # degenerate ground truth: perfect only when the prediction is empty too
        value = 1.0 if n_pred == 0 else 0.0
        return RelationScore(value, value, value, 0, n_pred, 0)
    matched = sum((Counter(gt) & Counter(pred)).values())
    precision = matched / n_pred if n_pred else 0.0
    recall = matched / n_gt
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return RelationScore(precision, recall, f1, n_gt, n_pred, matched)


def adjacency_f1(gt: TableTree, pred: TableTree) -> RelationScore:
    return score_relations(
        adjacency_relations(project_grid(gt)),
        adjacency_relations(project_grid(pred)),
    )
