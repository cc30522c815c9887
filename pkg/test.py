import json
from fractions import Fraction
from tempfile import TemporaryDirectory

from pytest import approx, fixture

from fracvis import ExperimentConfig, PercParams, certify, generate, run, visible_from
from fracvis.analysis import count_corner_triples, theoretical_dim
from fracvis.cli import main
from fracvis.config import DEFAULT_DIRECTIONS
from fracvis.visibility import LineSight, PointSight

data_dir = TemporaryDirectory()


@fixture()
def sights():
    yield [
        LineSight((1, 1)),
        LineSight((1, -2), "-"),
        LineSight((2, 3)),
        PointSight((-1, -1)),
        PointSight((Fraction(5, 2), Fraction(1, 3))),
    ]


def audits(report):
    return {(a["audit"], a["p"]): a["violations"] for a in report.audits}


class TestFracvis:
    def test_extinction_matches_oracle(self):
        config = ExperimentConfig(
            "extinction", ["1/4", "1/2", "3/4"], depth=6, trials=400, seed=11
        )
        report = run(config, workers=1)
        assert report.passed
        assert len(report.audits) == 3

    def test_dimension_near_theory(self):
        config = ExperimentConfig(
            "dimension",
            ["3/4"],
            depth=8,
            trials=20,
            seed=5,
            dimension_window=[1.45, 1.70],
        )
        report = run(config, workers=1)
        estimate = report.estimate("3/4", "dimension")
        assert estimate == approx(theoretical_dim("3/4"), abs=0.15)
        assert audits(report)[("dimension_window", "3/4")] == 0

    def test_visible_dimension_near_one(self):
        config = ExperimentConfig(
            "visible_dimension",
            ["3/4"],
            depth=8,
            trials=10,
            seed=5,
            directions=[[1, 1], [1, 2]],
            viewpoints=[],
        )
        report = run(config, workers=1)
        for label in ("slope line 1,1,+", "slope line 1,2,+"):
            assert report.estimate("3/4", label) == approx(1.0, abs=0.2)

    def test_covers_are_certified(self, sights):
        for seed in range(5):
            tree = generate(PercParams("3/4", depth=7, seed=seed))
            for sight in sights:
                cover = visible_from(tree, 7, sight)
                summary = certify(cover, tree, rays=300)
                assert summary["witnesses"] == len(cover)

    def test_full_tree_closed_form(self):
        tree = generate(PercParams(1, depth=10))
        cover = visible_from(tree, 10, LineSight((1, 1)))
        for k in range(11):
            assert tree.count(k) == 4**k
            assert cover.counts[k] == 2 * 2**k - 1

    def test_oracle_finds_every_marked_square(self):
        complete = []
        for seed in range(20):
            tree = generate(PercParams("3/4", depth=3, seed=seed))
            for sight in (LineSight((1, 2)), LineSight((2, -1))):
                cover = visible_from(tree, 3, sight)
                if not len(cover):
                    continue
                complete.append(certify(cover, tree, rays=4**6)["complete"])
        assert sum(complete) >= 0.99 * len(complete)

    def test_coverage_is_monotone(self):
        config = ExperimentConfig(
            "coverage",
            ["3/4", "9/10"],
            depth=6,
            trials=10,
            depths=[2, 4, 6],
            directions=[[1, 2]],
            viewpoints=[[-1, -1]],
        )
        report = run(config, workers=1)
        assert audits(report)[("coverage_monotone", "3/4")] == 0
        assert audits(report)[("coverage_monotone", "9/10")] == 0

    def test_workers_do_not_matter(self):
        config = ExperimentConfig("extinction", ["1/2"], depth=5, trials=30, seed=9)
        assert run(config, workers=1).to_dict() == run(config, workers=3).to_dict()

    def test_full_grid_lines(self):
        config = ExperimentConfig("passed_counts", [1], depth=6, trials=1)
        report = run(config, workers=1)
        assert audits(report)[("passed_full_grid", "1")] == 0

    def test_no_corner_triples(self):
        for d in DEFAULT_DIRECTIONS:
            for n in range(2, 6):
                assert count_corner_triples(n, d) == 0

    def test_gen_is_deterministic(self):
        outputs = []
        for name in ("a.json", "b.json"):
            path = f"{data_dir.name}/{name}"
            args = ["gen", "--p", "3/4", "--depth", "7", "--seed", "42", "--out", path]
            assert main(args) == 0
            with open(path, "rb") as f:
                outputs.append(f.read())
        assert outputs[0] == outputs[1]
        assert json.loads(outputs[0])["format"] == 1
