import logging
import math
from fractions import Fraction
from pathlib import Path

from .config import FLOAT_DIGITS

logger = logging.getLogger(__name__)


class lazy_property:
    """A property computed on first access and then stored on the instance,
    used for the derived arrays of trees and covers which never change
    """

    def __init__(self, compute):
        self.compute = compute
        self.name = compute.__name__
        self.__doc__ = compute.__doc__

    def __get__(self, instance, owner=None):
        if instance is None:
            return self
        value = self.compute(instance)
        instance.__dict__[self.name] = value

        return value


def to_fraction(value):
    """Convert a number or a string to an exact rational

    Floats are read through their shortest decimal representation so that
    0.7 becomes 7/10 and not its binary expansion.
    '3/4', '0.75', 0.75 and Fraction(3, 4) all give Fraction(3, 4).
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError(f"{value!r} is not a number")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"{value!r} is not a finite number")
        return Fraction(repr(float(value)))
    if isinstance(value, str):
        return Fraction(value.strip())
    # numpy scalars and other numbers
    return to_fraction(value.item() if hasattr(value, "item") else float(value))


def format_fraction(value):
    """Canonical string of a rational: '3/4', '-2', '0'"""
    value = to_fraction(value)
    if value.denominator == 1:
        return str(value.numerator)

    return f"{value.numerator}/{value.denominator}"


def round_float(value, digits=FLOAT_DIGITS):
    """Round a float to a fixed number of significant digits so that it is
    written identically on every platform
    """
    if value is None:
        return None
    value = float(value)
    if not math.isfinite(value) or value == 0:
        return value

    return float(f"{value:.{digits}g}")


def parse_pair(text):
    """Parse 'a,b' into a pair of rationals"""
    parts = [x for x in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"'{text}' is not a pair")

    return tuple(to_fraction(x) for x in parts)


def parse_range(text):
    """Parse 'lo:hi' into an inclusive range of integers"""
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError:
        raise ValueError(f"'{text}' is not a range 'lo:hi'") from None

    return lo, hi


def parse_int_list(text):
    """Parse '4,6,8' into [4, 6, 8]"""
    return [int(x) for x in text.split(",") if x.strip()]


def get_extended_name(file_path, extension, suffix=None):
    """Appends the name of this file
    'cover.json' -> 'cover_counts.csv' with extension 'counts' and suffix
    '.csv'
    """
    file_path = Path(file_path)
    suffix = file_path.suffix if suffix is None else suffix

    return file_path.with_name(f"{file_path.stem}_{extension}{suffix}")
