from fractions import Fraction

from pytest import fixture, raises

from fracvis.exactgeom import DirectionSpec
from fracvis.exceptions import CertificationFailure, LevelOutOfRange, OutsideDomain
from fracvis.grid import DyadicSquare, PercolationTree, PercParams, generate
from fracvis.visibility import (
    LineSight,
    PointSight,
    VisibleCover,
    certify,
    in_diagonal_region,
    project_root,
    ray_cast_oracle,
    sight_ray,
    visible_from,
    visible_from_line,
    visible_from_point,
    witness_ray,
)


@fixture()
def full_tree():
    yield generate(PercParams(1, depth=3))


@fixture()
def random_tree():
    yield generate(PercParams("3/4", depth=6, seed=7))


class TestSights:
    def test_line_from_text(self):
        sight = LineSight.from_text("1,2,-")
        assert sight.d == (1, 2)
        assert sight.side == -1
        assert sight.direction == (-1, -2)
        assert str(sight) == "line 1,2,-"

    def test_line_default_side(self):
        assert LineSight.from_text("2,4").side == 1

    def test_bad_side(self):
        with raises(OutsideDomain):
            LineSight((1, 1), "x")

    def test_point_from_text(self):
        sight = PointSight.from_text("-1,1/2")
        assert sight.x == (-1, Fraction(1, 2))
        assert str(sight) == "point -1,1/2"

    def test_point_inside(self):
        with raises(OutsideDomain):
            PointSight.from_text("1/2,1/2")

    def test_diagonal_region(self):
        assert in_diagonal_region((-1, -1))
        assert in_diagonal_region((2, Fraction(-1, 3)))
        assert not in_diagonal_region((Fraction(1, 2), -3))

    def test_project_root(self):
        assert project_root(DirectionSpec(1, 1)) == (-1, 1)
        assert project_root(DirectionSpec(-2, 1)) == (-3, 0)

    def test_line_ray(self):
        ray = sight_ray(LineSight((1, 0)), Fraction(1, 4))
        assert ray.origin is None
        assert ray.through == (0, Fraction(1, 4))
        assert ray.direction == (1, 0)


class TestFullTree:
    def test_horizontal(self, full_tree):
        cover = visible_from_line(full_tree, 3, (1, 0))
        assert len(cover) == 8
        assert (cover.marked[:, 0] == 0).all()

    def test_horizontal_other_side(self, full_tree):
        cover = visible_from_line(full_tree, 3, (1, 0), side="-")
        assert (cover.marked[:, 0] == 7).all()

    def test_diagonal(self, full_tree):
        cover = visible_from_line(full_tree, 3, (1, 1))
        assert len(cover) == 15
        assert ((cover.marked[:, 0] == 0) | (cover.marked[:, 1] == 0)).all()

    def test_point(self, full_tree):
        cover = visible_from_point(full_tree, 3, (-1, -1))
        assert len(cover) == 15
        assert ((cover.marked[:, 0] == 0) | (cover.marked[:, 1] == 0)).all()

    def test_counts(self, full_tree):
        cover = visible_from_line(full_tree, 3, (1, 0))
        assert cover.counts == [1, 2, 4, 8]

    def test_oracle_sees_every_row(self, full_tree):
        cover = visible_from_line(full_tree, 3, (1, 0))
        summary = certify(cover, full_tree, rays=4**6)
        assert summary["oracle"] == len(cover) == 8

    def test_level_zero(self, full_tree):
        cover = visible_from_line(full_tree, 0, (1, 2))
        assert cover.squares == [DyadicSquare(0, 0, 0)]

    def test_level_out_of_range(self, full_tree):
        with raises(LevelOutOfRange):
            visible_from_line(full_tree, 4, (1, 1))

    def test_unknown_method(self, full_tree):
        with raises(OutsideDomain):
            visible_from_line(full_tree, 2, (1, 1), method="foo")


class TestRandomTree:
    directions = [(1, 1), (1, 2), (2, -1), (0, 1), (3, 1)]

    def test_methods_agree(self, random_tree):
        for d in self.directions:
            for side in (1, -1):
                lattice = visible_from_line(random_tree, 6, d, side)
                sweep = visible_from_line(random_tree, 6, d, side, method="sweep")
                exact = visible_from_line(
                    random_tree, 6, d, side, method="elementary"
                )
                assert lattice == sweep == exact

    def test_point_methods_agree(self, random_tree):
        for x in [(-1, -1), (Fraction(1, 2), -3), (2, Fraction(1, 3))]:
            sweep = visible_from_point(random_tree, 6, x)
            exact = visible_from_point(random_tree, 6, x, method="elementary")
            assert sweep == exact

    def test_marked_are_retained(self, random_tree):
        cover = visible_from_line(random_tree, 5, (1, 2))
        assert all(sq in random_tree for sq in cover.squares)

    def test_visible_never_exceeds_level(self, random_tree):
        cover = visible_from_line(random_tree, 6, (1, 1))
        assert 0 < len(cover) <= random_tree.count(6)

    def test_certify_line(self, random_tree):
        cover = visible_from(random_tree, 6, LineSight((1, 2), "+"))
        summary = certify(cover, random_tree, rays=500)
        assert summary["witnesses"] == len(cover)
        assert summary["oracle"] <= len(cover)

    def test_certify_point(self, random_tree):
        cover = visible_from(random_tree, 6, PointSight((-1, Fraction(1, 3))))
        summary = certify(cover, random_tree, rays=500)
        assert summary["oracle"] <= len(cover)

    def test_oracle_is_nested(self, random_tree):
        sight = LineSight((1, 1))
        coarse = ray_cast_oracle(random_tree, 6, sight, 100)
        fine = ray_cast_oracle(random_tree, 6, sight, 300)
        assert coarse <= fine

    def test_witness_ray(self, random_tree):
        cover = visible_from_line(random_tree, 6, (1, 2))
        sq = cover.squares[0]
        ray = witness_ray(cover, sq, random_tree)
        assert ray.direction == (1, 2)

    def test_witness_of_unmarked(self, random_tree):
        cover = visible_from_line(random_tree, 6, (1, 0))
        with raises(OutsideDomain):
            cover.witness_of(DyadicSquare(6, 63, 63))


class TestCertify:
    def test_not_retained(self):
        tree = PercolationTree.from_leaves([(0, 0)], depth=1)
        cover = VisibleCover(LineSight((1, 0)), 1, 2, [(1, 1)], [Fraction(3, 4)])
        with raises(CertificationFailure):
            certify(cover, tree)

    def test_wrong_witness(self, full_tree):
        cover = visible_from_line(full_tree, 3, (1, 0))
        data = cover.as_dict()
        data["marked"] = [[1, iy] for _, iy in data["marked"]]
        with raises(CertificationFailure):
            certify(VisibleCover.from_dict(data), full_tree)

    def test_missing_square(self, full_tree):
        cover = visible_from_line(full_tree, 3, (1, 0))
        data = cover.as_dict()
        data["marked"] = data["marked"][1:]
        data["witnesses"] = data["witnesses"][1:]
        with raises(CertificationFailure):
            certify(VisibleCover.from_dict(data), full_tree, rays=64)

    def test_level_above_tree(self, full_tree):
        cover = visible_from_line(full_tree, 3, (1, 0))
        with raises(LevelOutOfRange):
            certify(cover, generate(PercParams(1, depth=2)))


class TestVisibleCover:
    def test_round_trip(self, random_tree):
        cover = visible_from_point(random_tree, 5, (2, 2))
        again = VisibleCover.from_dict(cover.as_dict())
        assert again == cover
        assert again.witnesses == cover.witnesses
        assert again.params == random_tree.params

    def test_sorted(self):
        cover = VisibleCover(
            LineSight((1, 0)), 1, 2, [(0, 1), (0, 0)], [Fraction(3, 4), Fraction(1, 4)]
        )
        assert cover.marked.tolist() == [[0, 0], [0, 1]]
        assert cover.witnesses == [Fraction(1, 4), Fraction(3, 4)]

    def test_one_witness_per_square(self):
        with raises(OutsideDomain):
            VisibleCover(LineSight((1, 0)), 1, 2, [(0, 1), (0, 0)], [Fraction(1, 4)])

    def test_extinct_level(self):
        tree = generate(PercParams("1/10", depth=4, seed=1))
        for k in range(5):
            if tree.count(k) == 0:
                assert len(visible_from_line(tree, k, (1, 1))) == 0


def marked_set(cover):
    return set(map(tuple, cover.marked.tolist()))


class TestSymmetries:
    directions = [(1, 1), (1, 2), (2, -1), (0, 1), (3, 1), (1, -3)]

    @fixture()
    def leaves(self):
        yield generate(PercParams("3/4", depth=5, seed=7)).cells(5).tolist()

    def test_reflection(self, leaves):
        tree = PercolationTree.from_leaves(leaves, 5)
        mirror = PercolationTree.from_leaves([(31 - ix, iy) for ix, iy in leaves], 5)
        for a, b in self.directions:
            for side in (1, -1):
                cover = visible_from_line(tree, 5, (a, b), side)
                reflected = visible_from_line(mirror, 5, (-a, b), side)
                assert {(31 - ix, iy) for ix, iy in marked_set(cover)} == marked_set(
                    reflected
                )

    def test_fewer_occluders(self, leaves):
        tree = PercolationTree.from_leaves(leaves, 5)
        subset = leaves[::2]
        sparse = PercolationTree.from_leaves(subset, 5)
        for d in self.directions:
            seen = marked_set(visible_from_line(tree, 5, d))
            assert seen & set(map(tuple, subset)) <= marked_set(
                visible_from_line(sparse, 5, d)
            )

    def test_hidden_squares_do_not_matter(self, leaves):
        tree = PercolationTree.from_leaves(leaves, 5)
        for d in self.directions:
            cover = visible_from_line(tree, 5, d)
            front = PercolationTree.from_leaves(cover.marked.tolist(), 5)
            assert marked_set(visible_from_line(front, 5, d)) == marked_set(cover)

    def test_direction_representation(self, random_tree):
        for d, multiple in (((1, 1), (2, 2)), ((1, -2), (3, -6)), ((0, 1), (0, 5))):
            cover = visible_from_line(random_tree, 6, d)
            again = visible_from_line(random_tree, 6, multiple)
            assert again == cover
            assert again.witnesses == cover.witnesses

    def test_opposite_sides(self, random_tree):
        plus = visible_from_line(random_tree, 6, (1, 1), "+")
        minus = visible_from_line(random_tree, 6, (-1, -1), "-")
        assert marked_set(plus) == marked_set(minus)
