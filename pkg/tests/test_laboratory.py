from fractions import Fraction
from pathlib import Path

from pytest import fixture, raises

from fracvis import Laboratory
from fracvis.exceptions import OutsideDomain
from fracvis.visibility import LineSight, PointSight


@fixture()
def lab(tmp_path):
    yield Laboratory(tmp_path, workers=1)


class TestLaboratory:
    def test_dir(self, lab, tmp_path):
        assert lab.dir == tmp_path
        lab.dir = str(tmp_path / "other")
        assert lab.dir == tmp_path / "other"

    def test_tree_saved(self, lab, tmp_path):
        tree = lab.tree(1, 2, save_as="t.json")
        assert (tmp_path / "t.json").exists()
        assert lab.load_tree("t.json") == tree

    def test_visible_saved(self, lab, tmp_path):
        tree = lab.tree(1, 3)
        cover = lab.visible(tree, 3, LineSight((1, 0)), save_as="c.json")
        assert len(cover) == 8
        assert lab.counts_path("c.json") == tmp_path / "c_counts.csv"
        assert lab.counts_path("c.json").exists()

    def test_box_dimension(self, lab):
        tree = lab.tree(1, 4)
        table, fit = lab.box_dimension(tree)
        assert table.counts == [1, 4, 16, 64, 256]
        assert fit.slope == 2.0

    def test_coverage(self, lab):
        tree = lab.tree(1, 3)
        sights = [LineSight((1, 1)), PointSight((2, 2))]
        frame = lab.coverage(tree, [1, 2], Fraction(1, 8), sights)
        assert len(frame) == 4
        assert frame["covered"].all()
        assert set(frame["epsilon"]) == {"1/8"}

    def test_passed(self, lab):
        tree = lab.tree(1, 2)
        frame = lab.passed(tree, [(("0", "1/3"), ("1", "1/3"))])
        assert frame["V_k"].tolist() == [1, 2, 4]

    def test_certify_regenerates(self, lab):
        tree = lab.tree("3/4", 5, seed=3)
        cover = lab.visible(tree, 5, LineSight((2, 1)))
        summary = lab.certify(cover, rays=50)
        assert summary["witnesses"] == len(cover)

    def test_certify_without_params(self, lab):
        tree = lab.tree(1, 2)
        cover = lab.visible(tree, 2, LineSight((1, 1)))
        data = cover.as_dict()
        del data["tree"]
        with raises(OutsideDomain):
            lab.certify(type(cover).from_dict(data))

    def test_repr(self):
        assert "Laboratory" in repr(Laboratory(Path("x")))

    def test_stripes_block_level_clamped(self, lab):
        tree = lab.tree("3/4", 4, seed=2)
        estimate = lab.stripes(tree, 3, (1, 1))
        again = lab.stripes(tree, 3, (1, 1), m=4)
        assert estimate.S == again.S
        assert estimate.table.equals(again.table)
