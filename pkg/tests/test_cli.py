import json
from unittest.mock import patch

import pandas as pd
from pytest import fixture

from fracvis.cli import build_parser, main
from fracvis.config import TABLE_COLUMNS


@fixture()
def tree_file(tmp_path):
    path = tmp_path / "t.json"
    assert main(["gen", "--p", "1", "--depth", "3", "--out", str(path)]) == 0
    yield path


class TestParser:
    def test_help(self, capsys):
        assert main(["--help"]) == 0
        out = capsys.readouterr().out
        for name in TABLE_COLUMNS:
            assert name in out
        assert "FRACVIS_THREADS" in out

    def test_no_command(self):
        assert main([]) == 1

    def test_unknown_flag(self):
        assert main(["gen", "--foo"]) == 1

    def test_bad_value(self, tmp_path):
        assert main(["gen", "--p", "abc", "--depth", "2", "--out", str(tmp_path / "t")]) == 1

    def test_point_argument(self):
        args = build_parser().parse_args(["vis", "--point=-1,-1", "--out", "c.json"])
        assert args.point.x == (-1, -1)


class TestGen:
    def test_byte_identical(self, tmp_path):
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        for path in paths:
            args = ["gen", "--p", "0.75", "--depth", "6", "--seed", "7", "--out", str(path)]
            assert main(args) == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_params_only(self, tmp_path):
        path = tmp_path / "t.json"
        args = ["gen", "--p", "1/2", "--depth", "4", "--params-only", "--out", str(path)]
        assert main(args) == 0
        assert "levels" not in json.loads(path.read_text())

    def test_needs_depth(self, tmp_path):
        assert main(["gen", "--p", "1/2", "--out", str(tmp_path / "t.json")]) == 1

    def test_bad_p(self, tmp_path):
        assert main(["gen", "--p", "2", "--depth", "2", "--out", str(tmp_path / "t.json")]) == 1


class TestVisAndCertify:
    def test_line(self, tmp_path, tree_file):
        cover = tmp_path / "cover.json"
        args = ["vis", "--tree", str(tree_file), "--line", "1,1,+", "--out", str(cover)]
        assert main(args) == 0
        data = json.loads(cover.read_text())
        assert len(data["marked"]) == 15
        assert (tmp_path / "cover_counts.csv").exists()
        assert main(["certify", "--cover", str(cover), "--rays", "100"]) == 0
        assert main(["certify", "--cover", str(cover), "--tree", str(tree_file)]) == 0

    def test_point(self, tmp_path, tree_file):
        cover = tmp_path / "cover.json"
        args = ["vis", "--tree", str(tree_file), "--point=-1,-1", "--out", str(cover)]
        assert main(args) == 0
        assert json.loads(cover.read_text())["sight"]["kind"] == "point"

    def test_one_sight(self, tmp_path, tree_file):
        out = str(tmp_path / "cover.json")
        assert main(["vis", "--tree", str(tree_file), "--out", out]) == 1
        args = ["vis", "--tree", str(tree_file), "--line", "1,0", "--point=2,2", "--out", out]
        assert main(args) == 1

    def test_tampered_cover(self, tmp_path, tree_file):
        cover = tmp_path / "cover.json"
        args = ["vis", "--tree", str(tree_file), "--line", "1,0,+", "--out", str(cover)]
        assert main(args) == 0
        data = json.loads(cover.read_text())
        data["marked"] = [[1, iy] for _, iy in data["marked"]]
        cover.write_text(json.dumps(data))
        assert main(["certify", "--cover", str(cover)]) == 2

    def test_missing_tree(self, tmp_path):
        args = ["vis", "--tree", str(tmp_path / "nothing.json"), "--line", "1,1"]
        assert main(args + ["--out", str(tmp_path / "c.json")]) == 1


class TestTables:
    def test_boxdim(self, tmp_path, tree_file):
        out = tmp_path / "scaling.csv"
        args = ["boxdim", "--tree", str(tree_file), "--krange", "0:3", "--out", str(out)]
        assert main(args) == 0
        assert pd.read_csv(out)["N_k"].tolist() == [1, 4, 16, 64]

    def test_boxdim_visible(self, tmp_path, tree_file):
        out = tmp_path / "scaling.csv"
        args = ["boxdim", "--tree", str(tree_file), "--set", "V", "--line", "1,0"]
        assert main(args + ["--out", str(out)]) == 0
        assert pd.read_csv(out)["N_k"].tolist() == [1, 2, 4, 8]

    def test_stripes(self, tmp_path):
        out = tmp_path / "stripes.csv"
        args = ["stripes", "--p", "1", "--depth", "6", "--line", "1,1,+", "--level", "2"]
        assert main(args + ["--out", str(out)]) == 0
        assert list(pd.read_csv(out).columns) == TABLE_COLUMNS["stripes"]

    def test_stripes_block_level_clamped(self, tmp_path):
        for level in ("3", "4"):
            out = tmp_path / f"stripes{level}.csv"
            args = ["stripes", "--p", "3/4", "--depth", "4", "--line", "1,1,+"]
            assert main(args + ["--level", level, "--out", str(out)]) == 0
            assert out.exists()

    def test_coverage(self, tmp_path, tree_file):
        out = tmp_path / "coverage.csv"
        args = [
            "coverage", "--tree", str(tree_file), "--line", "1,2", "--point=-1,-1",
            "--depths", "1,3", "--out", str(out),
        ]
        assert main(args) == 0
        frame = pd.read_csv(out)
        assert len(frame) == 4
        assert frame["covered"].all()

    def test_passed(self, tmp_path, tree_file):
        out = tmp_path / "passed.csv"
        args = [
            "passed", "--tree", str(tree_file), "--through", "0,1/3:1,1/3",
            "--out", str(out),
        ]
        assert main(args) == 0
        assert pd.read_csv(out)["V_k"].tolist() == [1, 2, 4, 8]


class TestMonteCarlo:
    def write_config(self, tmp_path, **data):
        path = tmp_path / "exp.json"
        path.write_text(json.dumps({"format": 1, **data}))
        return path

    def test_run(self, tmp_path):
        config = self.write_config(
            tmp_path, kind="extinction", p=["1"], depth=3, trials=5
        )
        out = tmp_path / "report.json"
        assert main(["mc", str(config), "--workers", "1", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["passed"]
        assert (tmp_path / "report_cells.csv").exists()

    def test_invalid_config(self, tmp_path):
        config = self.write_config(tmp_path, kind="extinction", p=["1"], trials=0)
        assert main(["mc", str(config)]) == 1

    @patch("fracvis.laboratory.run")
    def test_failed_audit(self, m_run, tmp_path):
        report = m_run.return_value
        report.passed = False
        report.audits = [{"audit": "extinction_oracle", "violations": 1}]
        report.cells = pd.DataFrame(columns=TABLE_COLUMNS["cells"])
        config = self.write_config(tmp_path, kind="extinction", p=["1/2"])
        assert main(["mc", str(config), "--workers", "1"]) == 2
        assert m_run.call_count == 1
