import random
from collections import Counter

import pytest

from oracles import dense_table, random_table
from tabeval.adjacency import (
    AdjacencyRelation,
    Direction,
    adjacency_f1,
    adjacency_relations,
    cell_text,
)
from tabeval.table_model import OverlappingSpans, TableTree, cell, project_grid, row

H, V = Direction.HORIZONTAL, Direction.VERTICAL


def relations(tree):
    return Counter(
        (r.from_content, r.to_content, r.direction) for r in adjacency_relations(project_grid(tree))
    )


def test_two_by_two():
    assert relations(dense_table([["a", "b"], ["c", "d"]])) == Counter(
        {("a", "b", H): 1, ("c", "d", H): 1, ("a", "c", V): 1, ("b", "d", V): 1}
    )


def test_empty_cell_is_skipped():
    tree = TableTree.from_rows([row(cell("a"), cell(""), cell("b"))])
    assert relations(tree) == Counter({("a", "b", H): 1})


def test_grid_hole_is_skipped():
    tree = TableTree.from_rows([row(cell("a"), cell("x"), cell("b")), row(cell("c"))])
    assert relations(tree) == Counter(
        {("a", "x", H): 1, ("x", "b", H): 1, ("a", "c", V): 1}
    )


def test_single_cell_has_no_relations():
    assert relations(dense_table([["a"]])) == Counter()


def test_spanning_cell_relates_once_per_direction():
    tree = TableTree.from_rows([
        row(cell("a", colspan=2), cell("b")),
        row(cell("c"), cell("d"), cell("e")),
    ])
    assert relations(tree) == Counter({
        ("a", "b", H): 1,
        ("a", "c", V): 1,
        ("b", "e", V): 1,
        ("c", "d", H): 1,
        ("d", "e", H): 1,
    })


def test_rowspan_cell_scans_below_its_extent():
    tree = TableTree.from_rows([
        row(cell("a", rowspan=2), cell("b")),
        row(cell("c")),
        row(cell("d"), cell("e")),
    ])
    assert relations(tree) == Counter({
        ("a", "b", H): 1,
        ("a", "d", V): 1,
        ("b", "c", V): 1,
        ("c", "e", V): 1,
        ("d", "e", H): 1,
    })


def test_content_normalization():
    assert cell_text(("<b>", "a", "</b>", " ", " ", "b", "\n")) == "a b"
    tree = TableTree.from_rows([row(cell(("<i>", "x", "</i>")), cell("  "), cell("y  z"))])
    assert relations(tree) == Counter({("x", "y z", H): 1})


def test_duplicate_pairs_are_kept():
    assert relations(dense_table([["a", "a", "a"]]))[("a", "a", H)] == 2


class TestF1:
    def test_identical(self):
        t = dense_table([["a", "b"], ["c", "d"]])
        score = adjacency_f1(t, t)
        assert (score.precision, score.recall, score.f1) == (1.0, 1.0, 1.0)

    def test_one_misread_cell(self):
        gt = dense_table([["a", "b"], ["c", "d"]])
        pred = dense_table([["a", "b"], ["c", "x"]])
        score = adjacency_f1(gt, pred)
        assert (score.n_gt, score.n_pred, score.n_matched) == (4, 4, 2)
        assert score.precision == score.recall == score.f1 == 0.5

    def test_direction_is_part_of_the_key(self):
        gt = dense_table([["a", "b"]])
        pred = dense_table([["a"], ["b"]])
        assert adjacency_f1(gt, pred).f1 == 0.0

    def test_degenerate_ground_truth(self):
        lonely = dense_table([["a"]])
        assert adjacency_f1(lonely, lonely).f1 == 1.0
        assert adjacency_f1(lonely, dense_table([["a", "b"]])).f1 == 0.0

    def test_swap_exchanges_precision_and_recall(self):
        rng = random.Random(8)
        for _ in range(200):
            a, b = random_table(rng, spans=False), random_table(rng, spans=False)
            ab, ba = adjacency_f1(a, b), adjacency_f1(b, a)
            assert ab.precision == pytest.approx(ba.recall)
            assert ab.recall == pytest.approx(ba.precision)
            assert ab.f1 == pytest.approx(ba.f1)

    def test_self_score_and_relation_bound(self):
        rng = random.Random(9)
        for _ in range(300):
            t = random_table(rng)
            try:
                rels = adjacency_relations(project_grid(t))
            except OverlappingSpans:
                continue
            non_empty = sum(bool(cell_text(c.content)) for c in t.cells())
            assert len(rels) <= 2 * non_empty
            if rels:
                assert adjacency_f1(t, t).f1 == 1.0

    def test_single_character_change_breaks_at_most_four_relations(self):
        rng = random.Random(10)
        for _ in range(50):
            n_rows, n_cols = rng.randint(2, 6), rng.randint(2, 6)
            grid = [[f"c{i}_{j}" for j in range(n_cols)] for i in range(n_rows)]
            gt = dense_table(grid)
            i, j = rng.randrange(n_rows), rng.randrange(n_cols)
            grid[i][j] = "#" + grid[i][j][1:]
            score = adjacency_f1(gt, dense_table(grid))
            assert score.n_gt - score.n_matched <= 4
            assert score.n_gt - score.n_matched >= 2


def test_relation_type_fields():
    rel = adjacency_relations(project_grid(dense_table([["a", "b"]])))[0]
    assert rel == AdjacencyRelation("a", "b", Direction.HORIZONTAL)
