from fractions import Fraction
from pathlib import Path

import numpy as np
from pytest import raises

from fracvis.utils import (
    format_fraction,
    get_extended_name,
    lazy_property,
    parse_int_list,
    parse_pair,
    parse_range,
    round_float,
    to_fraction,
)


class TestFractions:
    def test_to_fraction(self):
        assert to_fraction(0.7) == Fraction(7, 10)
        assert to_fraction("3/4") == to_fraction("0.75") == Fraction(3, 4)
        assert to_fraction(" 2 ") == 2
        assert to_fraction(np.int64(5)) == 5
        assert to_fraction(np.float64(0.25)) == Fraction(1, 4)

    def test_to_fraction_errors(self):
        with raises(TypeError):
            to_fraction(True)
        with raises(ValueError):
            to_fraction(float("nan"))
        with raises(ValueError):
            to_fraction("abc")

    def test_format_fraction(self):
        assert format_fraction(Fraction(6, 8)) == "3/4"
        assert format_fraction(-2) == "-2"
        assert format_fraction(0.0) == "0"
        assert format_fraction("-1/3") == "-1/3"

    def test_round_float(self):
        assert round_float(2 / 3) == 0.6666666667
        assert round_float(123456789012.5) == 123456789000.0
        assert round_float(0) == 0
        assert round_float(None) is None
        assert round_float(2 / 3, digits=3) == 0.667


class TestParsing:
    def test_pair(self):
        assert parse_pair("1,-1/2") == (1, Fraction(-1, 2))
        with raises(ValueError):
            parse_pair("1,2,3")

    def test_range(self):
        assert parse_range("2:7") == (2, 7)
        with raises(ValueError):
            parse_range("2-7")
        with raises(ValueError):
            parse_range("1:2:3")

    def test_int_list(self):
        assert parse_int_list("4,6,8") == [4, 6, 8]
        assert parse_int_list("4,") == [4]
        with raises(ValueError):
            parse_int_list("4,x")


class TestPaths:
    def test_extended_name(self):
        assert get_extended_name("out/cover.json", "counts", ".csv") == Path(
            "out/cover_counts.csv"
        )
        assert get_extended_name(Path("report.json"), "cells") == Path(
            "report_cells.json"
        )


class TestLazyProperty:
    def test_computed_once(self):
        calls = []

        class Holder:
            @lazy_property
            def value(self):
                calls.append(1)
                return 42

        holder = Holder()
        assert holder.value == 42
        assert holder.value == 42
        assert len(calls) == 1
        assert isinstance(Holder.value, lazy_property)
