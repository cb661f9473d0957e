"""Cell-shift and cell-content perturbations, and the metric-response sweep.

The sweep perturbs every table of a corpus at several levels and scores the
perturbed table against the original with both TEDS and adjacency F1.
"""

from __future__ import annotations

import enum
import math
import string
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .adjacency import adjacency_f1
from .table_model import (
    Complexity,
    Kind,
    TableTree,
    TreeNode,
    cell,
    classify_complexity,
    is_tag_token,
    project_grid,
    row,
)
from .teds import teds

DEFAULT_LEVELS = (0.1, 0.3, 0.5, 0.7, 0.9)
FALLBACK_ALPHABET = string.ascii_letters + string.digits


class PerturbationKind(str, enum.Enum):
    CELL_SHIFT = "shift"
    CELL_CONTENT = "content"


class SpanningCellsUnsupported(ValueError):
    pass


class EmptyCorpus(ValueError):
    pass


class TooFewColumns(UserWarning):
    """No cell is selected at this level; the table is returned unchanged."""


@dataclass(frozen=True)
class PerturbationConfig:
    kind: PerturbationKind
    level: float
    seed: int = 0

    def __post_init__(self) -> None:
        _check_level(self.level)

    def apply(self, tree: TableTree, seed=None) -> TableTree:
        if self.kind is PerturbationKind.CELL_SHIFT:
            return perturb_shift(tree, self.level)
        return perturb_content(tree, self.level, self.seed if seed is None else seed)


def _check_level(level: float) -> None:
    if not 0.0 < level <= 1.0:
        raise ValueError(f"perturbation level must be in (0, 1], got {level}")


def _round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def perturb_shift(tree: TableTree, level: float) -> TableTree:
    """Shift the rightmost cells of the first row down in a staircase.

    ``k = round(level * n_cols)`` cells are selected; the i-th of them (1-based,
    left to right) moves down by ``i`` rows. The remaining cells of each
    selected column move down by ``k`` so that they stay aligned with each
    other below the staircase. Vacated slots become empty cells. Tables with
    more rows than columns are handled on the transpose, i.e. first-column
    cells move right.
    """
    _check_level(level)
    if classify_complexity(tree) is Complexity.COMPLEX:
        raise SpanningCellsUnsupported("cell shift is only defined on tables without spans")
    grid = project_grid(tree)
    matrix = [
        [() if slot is None else grid.cells[slot.cell].content for slot in slots]
        for slots in grid.slots
    ]
    transposed = grid.n_rows > grid.n_cols
    if transposed:
        matrix = [list(col) for col in zip(*matrix)]
    height = len(matrix)
    width = len(matrix[0]) if matrix else 0
    k = _round_half_away(level * width)
    if k == 0:
        warnings.warn(
            f"level {level} selects no cell of a {width}-wide table", TooFewColumns, stacklevel=2
        )
        return tree

    columns = [[matrix[r][c] for r in range(height)] for c in range(width)]
    for rank, j in enumerate(range(width - k, width), start=1):
        col = columns[j]
        columns[j] = [()] * rank + [col[0]] + [()] * (k - rank) + col[1:]
    new_height = max(len(col) for col in columns)
    for col in columns:
        col.extend([()] * (new_height - len(col)))
    shifted = [[columns[c][r] for c in range(width)] for r in range(new_height)]
    if transposed:
        shifted = [list(r) for r in zip(*shifted)]
    return TableTree.from_rows([row(*(cell(content) for content in r)) for r in shifted])


def _alphabet(tree: TableTree) -> list[str]:
    chars = sorted({t for c in tree.cells() for t in c.content if not is_tag_token(t)})
    return chars if len(chars) >= 2 else list(FALLBACK_ALPHABET)


def perturb_content(tree: TableTree, level: float, seed) -> TableTree:
    """Replace each character with a different one with probability ``level``.

    Replacement characters are drawn uniformly from the characters present in
    the table. Inline markup tokens are never touched. ``seed`` is anything
    :func:`numpy.random.default_rng` accepts, e.g. an int or ``[seed, index]``.
    """
    _check_level(level)
    rng = np.random.default_rng(seed)
    alphabet = _alphabet(tree)
    position = {ch: i for i, ch in enumerate(alphabet)}

    def substitute(token: str) -> str:
        if is_tag_token(token) or rng.random() >= level:
            return token
        pick = int(rng.integers(len(alphabet) - 1))
        own = position.get(token)
        if own is not None and pick >= own:
            pick += 1
        return alphabet[pick]

    def visit(node: TreeNode) -> TreeNode:
        if node.is_cell:
            return TreeNode(
                Kind.CELL,
                colspan=node.colspan,
                rowspan=node.rowspan,
                content=tuple(substitute(t) for t in node.content),
            )
        return TreeNode(node.kind, tuple(visit(c) for c in node.children))

    return TableTree(visit(tree.root))


def synthetic_corpus(n: int, seed: int = 0) -> list[TableTree]:
    """Dense random tables: 4-10 rows, 3-8 columns, 3-10 alphanumerics per cell."""
    rng = np.random.default_rng(seed)
    letters = np.array(list(FALLBACK_ALPHABET))
    tables = []
    for _ in range(n):
        n_rows = int(rng.integers(4, 11))
        n_cols = int(rng.integers(3, 9))
        rows = [
            row(*(cell("".join(rng.choice(letters, int(rng.integers(3, 11))))) for _ in range(n_cols)))
            for _ in range(n_rows)
        ]
        tables.append(TableTree.from_rows(rows))
    return tables


@dataclass
class SweepResult:
    kind: PerturbationKind
    levels: list[float]
    mean_teds: list[float]
    mean_adjacency_f1: list[float]
    counts: list[int]
    n: int
    skipped: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "levels": self.levels,
            "mean_teds": self.mean_teds,
            "mean_adjacency_f1": self.mean_adjacency_f1,
            "n": self.n,
            "counts": self.counts,
            "skipped": self.skipped,
        }

    def csv_rows(self) -> list[list]:
        header = ["level", "mean_teds", "mean_adjacency_f1", "count"]
        body = [
            [level, t, f, c]
            for level, t, f, c in zip(self.levels, self.mean_teds, self.mean_adjacency_f1, self.counts)
        ]
        return [header, *body]


def _score_sample(args) -> list[tuple[float, float]]:
    tree, kind, levels, seed, index = args
    scores = []
    for level in levels:
        if level == 0.0:
            perturbed = tree
        elif kind is PerturbationKind.CELL_SHIFT:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", TooFewColumns)
                perturbed = perturb_shift(tree, level)
        else:
            perturbed = perturb_content(tree, level, [seed, index])
        scores.append((teds(tree, perturbed).value, adjacency_f1(tree, perturbed).f1))
    return scores


def run_sweep(
    corpus: Sequence[TableTree],
    kind: PerturbationKind | str,
    levels: Sequence[float] = DEFAULT_LEVELS,
    seed: int = 0,
    jobs: int = 1,
    indices: Optional[Sequence[int]] = None,
) -> SweepResult:
    """Score perturbed-vs-original tables at every level.

    An unperturbed baseline at level 0.0 is always the first row. Sample ``i``
    draws its content perturbation from the stream ``[seed, i]``, so results do
    not depend on ``jobs``. Tables with spans are skipped for cell shift and
    their positions (or ``indices[i]``) listed in ``skipped``.
    """
    kind = PerturbationKind(kind)
    for level in levels:
        _check_level(level)
    all_levels = [0.0, *sorted(set(float(x) for x in levels) - {0.0})]
    if indices is None:
        indices = range(len(corpus))

    work, skipped = [], []
    for i, tree in zip(indices, corpus):
        if kind is PerturbationKind.CELL_SHIFT and classify_complexity(tree) is Complexity.COMPLEX:
            skipped.append(i)
            continue
        work.append((tree, kind, all_levels, seed, i))
    if not work:
        raise EmptyCorpus("no table left to perturb")

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_score_sample, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        results = [_score_sample(w) for w in work]

    n = len(results)
    mean_teds = [math.fsum(r[li][0] for r in results) / n for li in range(len(all_levels))]
    mean_f1 = [math.fsum(r[li][1] for r in results) / n for li in range(len(all_levels))]
    return SweepResult(kind, all_levels, mean_teds, mean_f1, [n] * len(all_levels), n, skipped)
