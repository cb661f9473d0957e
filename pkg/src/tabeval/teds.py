"""Tree-edit-distance-based similarity (TEDS) between two table trees."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

from .table_model import TableTree, TreeNode


def levenshtein_distance(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        current = [i]
        for j, y in enumerate(b, 1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (x != y),
            ))
        previous = current
    return previous[-1]


def normalized_levenshtein_similarity(a: Sequence[Hashable], b: Sequence[Hashable]) -> float:
    """``1 - lev(a, b) / max(len(a), len(b))``; two empty sequences are identical."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    if tuple(a) == tuple(b):
        return 1.0
    return 1.0 - levenshtein_distance(a, b) / longest


@dataclass(frozen=True)
class EditCostModel:
    """Unit insert/delete costs and the cell-aware substitution rule."""

    insert_cost: float = 1.0
    delete_cost: float = 1.0

    def insert(self, node: TreeNode) -> float:
        return self.insert_cost

    def delete(self, node: TreeNode) -> float:
        return self.delete_cost

    def rename(self, a: TreeNode, b: TreeNode) -> float:
        return node_substitution_cost(a, b)


def node_substitution_cost(a: TreeNode, b: TreeNode) -> float:
    if not a.is_cell or not b.is_cell:
        return 0.0 if a.kind is b.kind else 1.0
    if a.colspan != b.colspan or a.rowspan != b.rowspan:
        return 1.0
    return 1.0 - normalized_levenshtein_similarity(a.content, b.content)


DEFAULT_COSTS = EditCostModel()


class _PostorderTree:
    __slots__ = ("nodes", "leftmost", "keyroots")

    def __init__(self, root: TreeNode) -> None:
        self.nodes: list[TreeNode] = []
        self.leftmost: list[int] = []
        self._visit(root)
        # a keyroot is the highest node for each distinct leftmost leaf
        highest: dict[int, int] = {}
        for i, leaf in enumerate(self.leftmost):
            highest[leaf] = i
        self.keyroots = sorted(highest.values())

    def _visit(self, node: TreeNode) -> int:
        first = None
        for child in node.children:
            leaf = self._visit(child)
            if first is None:
                first = leaf
        index = len(self.nodes)
        self.nodes.append(node)
        self.leftmost.append(index if first is None else first)
        return self.leftmost[index]


def _root(tree: TableTree | TreeNode) -> TreeNode:
    return tree.root if isinstance(tree, TableTree) else tree


def tree_edit_distance(
    a: TableTree | TreeNode,
    b: TableTree | TreeNode,
    model: EditCostModel = DEFAULT_COSTS,
) -> float:
    """Exact ordered tree edit distance (Zhang-Shasha keyroot dynamic program).

    Table trees are shallow, so the keyroot decomposition stays close to
    ``O(|a| * |b|)`` in practice.
    """
    ta, tb = _PostorderTree(_root(a)), _PostorderTree(_root(b))
    na, nb = len(ta.nodes), len(tb.nodes)
    la, lb = ta.leftmost, tb.leftmost
    delete = [model.delete(n) for n in ta.nodes]
    insert = [model.insert(n) for n in tb.nodes]
    rename_cache: dict[tuple[int, int], float] = {}

    def rename(i: int, j: int) -> float:
        key = (i, j)
        cost = rename_cache.get(key)
        if cost is None:
            cost = rename_cache[key] = model.rename(ta.nodes[i], tb.nodes[j])
        return cost

    treedist = [[0.0] * nb for _ in range(na)]
    for i in ta.keyroots:
        for j in tb.keyroots:
            ioff, joff = la[i] - 1, lb[j] - 1
            rows, cols = i - ioff, j - joff
            fd = [[0.0] * (cols + 1) for _ in range(rows + 1)]
            for x in range(1, rows + 1):
                fd[x][0] = fd[x - 1][0] + delete[x + ioff]
            for y in range(1, cols + 1):
                fd[0][y] = fd[0][y - 1] + insert[y + joff]
            for x in range(1, rows + 1):
                xn = x + ioff
                lx = la[xn]
                fd_x, fd_prev = fd[x], fd[x - 1]
                del_cost = delete[xn]
                td_x = treedist[xn]
                for y in range(1, cols + 1):
                    yn = y + joff
                    best = fd_prev[y] + del_cost
                    alt = fd_x[y - 1] + insert[yn]
                    if alt < best:
                        best = alt
                    if lx == la[i] and lb[yn] == lb[j]:
                        alt = fd_prev[y - 1] + rename(xn, yn)
                        if alt < best:
                            best = alt
                        fd_x[y] = best
                        td_x[yn] = best
                    else:
                        alt = fd[lx - 1 - ioff][lb[yn] - 1 - joff] + td_x[yn]
                        if alt < best:
                            best = alt
                        fd_x[y] = best
    return treedist[na - 1][nb - 1]


@dataclass(frozen=True)
class TedsScore:
    value: float
    edit_distance: float
    size_a: int
    size_b: int


def teds(gt: TableTree, pred: TableTree) -> TedsScore:
    """``1 - TED / max(|gt|, |pred|)``, floored at 0.

    The distance can exceed the larger node count when the two trees admit
    almost no ancestry-preserving mapping (rows stacked under ``thead`` in one
    table and under ``tbody`` in the other, say). The score is floored there;
    ``edit_distance`` keeps the raw value.
    """
    distance = tree_edit_distance(gt, pred)
    size_a, size_b = gt.size(), pred.size()
    return TedsScore(
        value=max(0.0, 1.0 - distance / max(size_a, size_b)),
        edit_distance=distance,
        size_a=size_a,
        size_b=size_b,
    )


def exact_structure_match(gt: TableTree, pred: TableTree) -> bool:
    """True when the trees agree on everything except cell text."""
    return gt.strip_content() == pred.strip_content()
