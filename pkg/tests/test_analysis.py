import math
from fractions import Fraction

import numpy as np
from pytest import approx, fixture, raises

from fracvis.analysis import (
    ScalingTable,
    box_count,
    carve,
    carved_projection,
    corner_mask,
    count_corner_triples,
    count_passed,
    count_shadow_hits,
    default_stripe_epsilon,
    dim_slope,
    direction_grid,
    first_bounded_scale,
    is_block,
    is_corner,
    line_slope_sign,
    oneil_bound,
    projection_coverage,
    projection_measure,
    radial_coverage,
    stripe_cover_count,
    stripe_decomposition,
    stripe_epsilon_bound,
    stripe_squares,
    theoretical_dim,
    visibility_threshold,
    visible_length_estimate,
)
from fracvis.config import DEFAULT_DIRECTIONS, TABLE_COLUMNS
from fracvis.exactgeom import DirectionSpec, Interval, Viewpoint
from fracvis.exceptions import LevelOutOfRange, OutsideDomain
from fracvis.grid import ROOT, DyadicSquare, PercolationTree, PercParams, generate
from fracvis.visibility import LineSight, PointSight, visible_from_line


@fixture()
def full_tree():
    yield generate(PercParams(1, depth=4))


@fixture()
def deep_full_tree():
    yield generate(PercParams(1, depth=6))


@fixture()
def random_tree():
    yield generate(PercParams("3/4", depth=7, seed=5))


class TestScaling:
    def test_from_tree(self, full_tree):
        table = ScalingTable.from_tree(full_tree)
        assert table.counts == [1, 4, 16, 64, 256]
        assert table.metadata["n"] == 4
        assert table.is_consistent()

    def test_slope(self, full_tree):
        fit = dim_slope(ScalingTable.from_tree(full_tree), (1, 4))
        assert fit.slope == 2.0
        assert fit.residual == approx(0, abs=1e-9)

    def test_slope_of_cover(self, full_tree):
        cover = visible_from_line(full_tree, 4, (1, 0))
        fit = dim_slope(ScalingTable.from_cover(cover))
        assert fit.slope == 1.0

    def test_too_few_rows(self, full_tree):
        with raises(OutsideDomain):
            dim_slope(ScalingTable.from_tree(full_tree), (3, 4))

    def test_empty_count(self):
        with raises(OutsideDomain):
            dim_slope(ScalingTable([1, 2, 0, 0]))

    def test_select(self):
        table = ScalingTable([1, 3, 7, 9], first=2)
        assert table.select((3, 4))["N_k"].tolist() == [3, 7]
        assert table.first == 2

    def test_inconsistent(self):
        assert not ScalingTable([1, 5]).is_consistent()
        assert not ScalingTable([2, 1]).is_consistent()

    def test_box_count(self, random_tree):
        squares = [DyadicSquare(7, ix, iy) for ix, iy in random_tree.cells(7).tolist()]
        assert box_count(squares, 3) == random_tree.count(3)
        assert box_count(random_tree.cells(7), 5, level=7) == random_tree.count(5)

    def test_first_bounded_scale(self):
        table = ScalingTable([1, 3, 3, 5])
        assert first_bounded_scale(table, lambda k: 1) == 2
        assert first_bounded_scale(ScalingTable([1, 4, 16]), lambda k: 1) is None


class TestTheory:
    def test_theoretical_dim(self):
        assert theoretical_dim(1) == approx(2)
        assert theoretical_dim("1/2") == approx(1)
        assert theoretical_dim(Fraction(1, 4)) == 0.0
        assert theoretical_dim("1/9", M=3) == 0.0

    def test_oneil_bound(self):
        assert oneil_bound(2) == approx(0.5 + math.sqrt(1.25))
        with raises(OutsideDomain):
            oneil_bound(0.5)

    def test_visibility_threshold(self):
        assert visibility_threshold() == Fraction(1, 2)
        assert visibility_threshold(3) == Fraction(1, 3)

    def test_direction_grid(self):
        assert direction_grid(1) == [(1, -1), (1, 1)]
        assert direction_grid(1, axes=True) == [(0, 1), (1, -1), (1, 0), (1, 1)]
        assert len(set(direction_grid(5))) == len(direction_grid(5))


class TestCorners:
    def test_slope_sign(self):
        assert line_slope_sign((1, 1)) == -1
        assert line_slope_sign((1, -2)) == 1
        with raises(OutsideDomain):
            line_slope_sign((0, 1))

    def test_is_corner(self):
        assert is_corner(DyadicSquare(2, 0, 3), -1)
        assert is_corner(DyadicSquare(2, 3, 0), -1)
        assert not is_corner(DyadicSquare(2, 0, 0), -1)
        assert is_corner(DyadicSquare(3, 4, 4), 1)
        assert is_corner(DyadicSquare(3, 7, 7), 1)

    def test_is_corner_level(self):
        with raises(LevelOutOfRange):
            is_corner(DyadicSquare(1, 0, 0), -1)

    def test_corner_mask(self):
        cells = np.array([[0, 3], [1, 1], [3, 0], [4, 7]])
        assert corner_mask(cells, 2, -1).tolist() == [True, False, True, True]

    def test_no_corner_triples(self):
        for d in DEFAULT_DIRECTIONS:
            for n in range(2, 6):
                assert count_corner_triples(n, d) == 0

    def test_corner_triples_level(self):
        with raises(LevelOutOfRange):
            count_corner_triples(1, (1, 1))


class TestCarving:
    def test_contains(self):
        region = carve(ROOT, Fraction(1, 8), "line", -1)
        assert not region.contains((0, 1))
        assert not region.contains((1, 0))
        assert region.contains((0, 0))
        assert region.contains((Fraction(1, 8), 1))
        assert region.contains((Fraction(1, 2), Fraction(1, 2)))
        assert not region.contains((2, 0))

    def test_point_mode(self):
        region = carve(ROOT, Fraction(1, 8), "point")
        assert not region.contains((0, 0))
        assert not region.contains((1, 1))

    def test_bad_epsilon(self):
        with raises(OutsideDomain):
            carve(ROOT, Fraction(1, 2))
        with raises(OutsideDomain):
            carve(ROOT, 0)

    def test_projection(self):
        region = carve(ROOT, Fraction(1, 8), "line", -1)
        union = carved_projection(region, DirectionSpec(1, 1))
        assert union.intervals == [Interval(Fraction(-7, 8), Fraction(7, 8))]

    def test_projection_of_arc(self):
        region = carve(ROOT, Fraction(1, 8), "point")
        x = Viewpoint(2, Fraction(1, 2))
        arc = carved_projection(region, PointSight(x)).intervals[0]
        assert Fraction(-1, 3) < arc.lo < arc.hi < Fraction(1, 3)
        assert arc.lo == -arc.hi

    def test_block_full_tree(self, full_tree):
        assert is_block(full_tree, DyadicSquare(1, 0, 0), (1, 1), 3)
        assert is_block(full_tree, DyadicSquare(2, 3, 1), (1, -2), 4)

    def test_block_not_retained(self):
        tree = PercolationTree.from_leaves([(0, 0)], depth=2)
        with raises(OutsideDomain):
            is_block(tree, DyadicSquare(1, 1, 1), (1, 1), 2)

    def test_block_single_descendant(self):
        tree = PercolationTree.from_leaves([(0, 0)], depth=2)
        assert not is_block(tree, ROOT, (1, 1), 2)

    def test_block_level(self, full_tree):
        with raises(LevelOutOfRange):
            is_block(full_tree, DyadicSquare(1, 0, 0), (1, 1), 5)

    def test_block_monotone_in_depth(self):
        for seed in range(4):
            tree = generate(PercParams("9/10", depth=6, seed=seed))
            for ix, iy in tree.cells(1).tolist():
                Qt = DyadicSquare(1, ix, iy)
                for d in ((1, 1), (1, -2)):
                    flags = [is_block(tree, Qt, d, m) for m in range(1, 7)]
                    # once uncovered, deeper levels stay uncovered
                    assert flags == sorted(flags, reverse=True)

    def test_coverage_full_tree(self, full_tree):
        for m in range(5):
            assert projection_coverage(full_tree, m, (1, 2), Fraction(1, 8))
            assert radial_coverage(full_tree, m, (-1, -1), Fraction(1, 8))

    def test_coverage_sparse_tree(self):
        tree = PercolationTree.from_leaves([(0, 0), (3, 3)], depth=2)
        assert not projection_coverage(tree, 2, (1, 1), Fraction(1, 8))

    def test_projection_measure(self, full_tree):
        measure = projection_measure(full_tree, 2, (1, 1))
        assert measure.length == 2
        assert measure.normalized == approx(math.sqrt(2))


class TestStripes:
    def test_epsilon_bound(self):
        assert stripe_epsilon_bound((1, 1)) == Fraction(1, 4)
        assert stripe_epsilon_bound((1, 2)) == Fraction(1, 5)
        assert default_stripe_epsilon((1, 1)) == Fraction(1, 8)
        assert default_stripe_epsilon((1, 3)) == Fraction(1, 8)
        with raises(OutsideDomain):
            default_stripe_epsilon((1, 0))

    def test_decomposition(self):
        stripes = stripe_decomposition((1, 1), n=2, epsilon=Fraction(1, 8))
        assert len(stripes) == 64
        assert stripes[0].lo == -1
        assert stripes[-1].hi == 1
        for left, right in zip(stripes, stripes[1:]):
            assert left.hi == right.lo

    def test_decomposition_bound(self):
        with raises(OutsideDomain):
            stripe_decomposition((1, 1), n=2, epsilon=Fraction(1, 4))

    def test_partition(self, full_tree):
        total = 0
        for I in stripe_decomposition((1, 2), n=3):
            process = stripe_squares(full_tree, 3, (1, 2), 1, I)
            assert len(process.c_cells) == len(process.q_cells)
            total += len(process.q_cells)
        assert total == 64

    def test_front_to_back(self, full_tree):
        for I in stripe_decomposition((1, 1), n=3):
            process = stripe_squares(full_tree, 3, (1, 1), 1, I)
            depth = process.q_cells.sum(axis=1)
            assert (np.diff(depth) > 0).all()
            assert process.x.tolist() == np.cumsum(process.z).tolist()

    def test_stripe_level(self, full_tree):
        with raises(LevelOutOfRange):
            stripe_squares(full_tree, 1, (1, 1), 1, (0, Fraction(1, 8)))

    def test_cover_count_full_tree(self, deep_full_tree):
        for I in stripe_decomposition((1, 1), n=2):
            count = stripe_cover_count(deep_full_tree, 2, (1, 1), 1, I)
            if count.first_block is None:
                assert count.process.z.all()
                assert count.Y == len(count.process.c_cells)
            else:
                assert count.first_block <= count.Y <= len(count.process.c_cells)

    def test_length_estimate(self, random_tree):
        estimate = visible_length_estimate(random_tree, 3, (1, 1), m=7)
        assert list(estimate.table.columns) == TABLE_COLUMNS["stripes"]
        assert estimate.S == estimate.table["Y"].sum()
        assert estimate.estimate == approx(math.sqrt(2) * estimate.S / 8)


class TestPassed:
    def test_horizontal(self, full_tree):
        line = ((0, Fraction(1, 3)), (1, Fraction(1, 3)))
        assert [count_passed(full_tree, k, line) for k in range(5)] == [1, 2, 4, 8, 16]

    def test_vertical(self, full_tree):
        line = ((Fraction(1, 3), 0), (Fraction(1, 3), 1))
        assert count_passed(full_tree, 3, line) == 8

    def test_grid_line(self, full_tree):
        line = ((0, Fraction(1, 2)), (1, Fraction(1, 2)))
        assert count_passed(full_tree, 0, line) == 1
        assert count_passed(full_tree, 2, line) == 8

    def test_degenerate(self, full_tree):
        with raises(OutsideDomain):
            count_passed(full_tree, 2, ((0, 0), (0, 0)))

    def test_shadow_hits(self, full_tree):
        sight = LineSight((1, 0))
        assert count_shadow_hits(full_tree, 2, Fraction(1, 8), sight) == 4
        assert count_shadow_hits(full_tree, 2, Fraction(1, 4), sight) == 8
        assert count_shadow_hits(full_tree, 2, Fraction(1, 4), sight, Fraction(1, 2)) == 0

    def test_shadow_hits_scale(self, full_tree):
        with raises(OutsideDomain):
            count_shadow_hits(full_tree, 2, 0, LineSight((1, 0)), 2)
