import logging
import math
from collections import namedtuple
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pandas as pd

from .config import BLOCK_EPSILON, BLOCK_EXTRA_DEPTH, DEFAULT_BASE, DIRECTION_BOUND
from .exactgeom import (
    ArcUnion,
    DirectionSpec,
    Interval,
    IntervalUnion,
    Viewpoint,
    cell_arcs,
    cell_shadows,
    pseudo_angle,
)
from .exceptions import LevelOutOfRange, OutsideDomain
from .grid import DyadicSquare, cell_codes, count_ancestors, is_extinct
from .utils import format_fraction, round_float, to_fraction
from .visibility import LineSight, PointSight, VisibleCover, project_root

logger = logging.getLogger(__name__)


class ScalingTable:
    """The box counts N_k of a set over a contiguous range of levels"""

    def __init__(self, counts, first=0, **metadata):
        """
        Parameters
        ----------
        counts : list
            N_k for k = first, first + 1, ...
        first : int, optional
            The level of the first count, by default 0
        **metadata
            p, M, n, sight, seed and any other description of the set
        """
        self._frame = pd.DataFrame(
            {
                "k": np.arange(first, first + len(counts), dtype=np.int64),
                "N_k": np.asarray(counts, dtype=np.int64),
            }
        )
        self._metadata = metadata

    def __len__(self):

        return len(self._frame)

    def __repr__(self):

        return f"ScalingTable({self.counts}, first={self.first})"

    @classmethod
    def from_tree(cls, tree, n=None, **metadata):
        """N_k(E_n) for k = 0..n, counted as level-k ancestors of C_n"""
        n = tree.depth if n is None else n
        cells = tree.cells(n)
        counts = [count_ancestors(cells, n, k, tree.M) for k in range(n + 1)]
        metadata = {**tree.params.as_dict(), "n": n, "set": "E", **metadata}

        return cls(counts, **metadata)

    @classmethod
    def from_cover(cls, cover, **metadata):
        """N_k of the visible part for k = 0..level"""
        metadata = {
            **({} if cover.params is None else cover.params.as_dict()),
            "M": cover.M,
            "n": cover.level,
            "set": "V",
            "sight": str(cover.sight),
            **metadata,
        }

        return cls(cover.counts, **metadata)

    def select(self, k_range=None):
        """Get the rows with k in the inclusive range (lo, hi)"""
        if k_range is None:
            return self._frame.copy()
        lo, hi = k_range

        return self._frame[self._frame["k"].between(lo, hi)].reset_index(
            drop=True
        )

    def is_consistent(self, M=DEFAULT_BASE):
        """Check N_k >= 1, the child bound and monotonicity"""
        counts = self._frame["N_k"].to_numpy()
        if not len(counts):
            return True
        steps = counts[1:], counts[:-1]

        return bool(
            (counts >= 1).all()
            and (steps[0] <= M * M * steps[1]).all()
            and (steps[0] >= steps[1]).all()
        )

    @property
    def frame(self):
        """A copy of the (k, N_k) rows"""
        return self._frame.copy()

    @property
    def metadata(self):
        """The description of the counted set"""
        return dict(self._metadata)

    @property
    def first(self):
        """The first level of the table"""
        return int(self._frame["k"].iloc[0]) if len(self._frame) else 0

    @property
    def counts(self):
        """The list of N_k"""
        return self._frame["N_k"].tolist()


def box_count(squares, k, level=None, M=DEFAULT_BASE):
    """Get the number of distinct level-k ancestors of level-n squares

    Parameters
    ----------
    squares : list, VisibleCover or array
        DyadicSquares of one level, a cover, or an (N, 2) array of cells
    k : int
        The counting level
    level : int, optional
        The level of an array of cells, by default None
    M : int, optional
        The base of an array of cells, by default 2

    Raises
    ------
    LevelOutOfRange
        raised when k is larger than the level of the squares
    """
    if isinstance(squares, VisibleCover):
        return count_ancestors(squares.marked, squares.level, k, squares.M)
    if level is None:
        squares = list(squares)
        if not squares:
            return 0
        level, M = squares[0].level, squares[0].base
        if any(sq.level != level for sq in squares):
            raise OutsideDomain(level, "squares of different levels")
        squares = [(sq.ix, sq.iy) for sq in squares]

    return count_ancestors(squares, level, k, M)


SlopeFit = namedtuple("SlopeFit", ["slope", "intercept", "residual"])


def dim_slope(table, k_range=None):
    """Get the least-squares slope of log N_k against k log M

    The slope and intercept are rounded to fixed significant digits and the
    largest absolute residual to fixed decimals so that repeated fits are
    identical.

    Raises
    ------
    OutsideDomain
        raised when the range has fewer than 3 rows or an empty count
    """
    rows = table.select(k_range)
    if len(rows) < 3:
        raise OutsideDomain(k_range, "fewer than 3 counts in range")
    if (rows["N_k"] < 1).any():
        raise OutsideDomain(k_range, "empty counts in range")
    M = table.metadata.get("M", DEFAULT_BASE)

    x = rows["k"].to_numpy(dtype=float) * math.log(M)
    y = np.log(rows["N_k"].to_numpy(dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    residual = np.abs(y - (slope * x + intercept)).max()

    return SlopeFit(
        round_float(slope), round_float(intercept), round(float(residual), 10)
    )


def theoretical_dim(p, M=DEFAULT_BASE):
    """log(M^2 p) / log M, or 0 when M^2 p <= 1"""
    p = to_fraction(p)
    if M * M * p <= 1:
        return 0.0

    return math.log(M * M * p) / math.log(M)


def oneil_bound(d):
    """The upper bound 1/2 + sqrt(d - 3/4) on the dimension of the part
    visible from a point, for a set of dimension d

    Raises
    ------
    OutsideDomain
        raised when d < 3/4
    """
    if d < 0.75:
        raise OutsideDomain(d, "dimension below 3/4")

    return 0.5 + math.sqrt(d - 0.75)


def visibility_threshold(M=DEFAULT_BASE):
    """The retention probability above which the dimension exceeds 1"""
    return Fraction(1, M)


def direction_grid(bound=DIRECTION_BOUND, axes=False):
    """Get the reduced integer directions (a, b) with |a|, |b| <= bound

    One direction is kept per line (a > 0, or a == 0 and b > 0); the
    opposite ones are reached through the side of a sight.
    """
    directions = []
    for a in range(0, bound + 1):
        for b in range(-bound, bound + 1):
            if math.gcd(a, b) != 1 or (a == 0 and b < 0):
                continue
            if not axes and (a == 0 or b == 0):
                continue
            directions.append(DirectionSpec(a, b))

    return directions


def line_slope_sign(d):
    """The sign of the slope of the lines perpendicular to d

    Raises
    ------
    OutsideDomain
        raised for horizontal and vertical directions
    """
    d = d if isinstance(d, DirectionSpec) else DirectionSpec(*d)
    if d.axis_aligned:
        raise OutsideDomain(tuple(d), "axis direction has no slope sign")

    return -1 if d.a * d.b > 0 else 1


def _carve_sign(d):
    """Slope sign of a direction, negative for axis directions"""
    d = d if isinstance(d, DirectionSpec) else DirectionSpec(*d)

    return -1 if d.axis_aligned else line_slope_sign(d)


def _corner_cells(M, slope_sign):
    """Relative positions of the two corner cells in the M^2 grid"""
    last = M * M - 1
    if slope_sign < 0:
        return ((0, last), (last, 0))

    return ((0, 0), (last, last))


def corner_mask(cells, M, slope_sign):
    """Vectorized 'is_corner' for an (N, 2) array of cells of level >= 2"""
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
    rel = cells % (M * M)
    mask = np.zeros(len(cells), dtype=bool)
    for rx, ry in _corner_cells(M, slope_sign):
        mask |= (rel[:, 0] == rx) & (rel[:, 1] == ry)

    return mask


def is_corner(sq, slope_sign):
    """Check if the square is a designated corner cell of the M^2 x M^2
    grid of its level n-2 ancestor

    Upper left and lower right for a negative slope sign, lower left and
    upper right for a positive one.

    Raises
    ------
    LevelOutOfRange
        raised when the square is above level 2
    """
    if sq.level < 2:
        raise LevelOutOfRange(sq.level, 2, math.inf)
    rel = (sq.ix % sq.base**2, sq.iy % sq.base**2)

    return rel in _corner_cells(sq.base, slope_sign)


class CarvedRegion(
    namedtuple("CarvedRegion", ["square", "epsilon", "mode", "slope_sign"])
):
    """A square minus half-open corner squares of side epsilon * side

    The line mode removes the two corners of the diagonal given by the
    slope sign; the point mode removes all four.
    """

    __slots__ = ()

    def removed(self):
        """The removed corners as (corner, inward x, inward y) signs"""
        x0, x1, y0, y1 = self.square.bounds
        corners = {
            "ll": ((x0, y0), 1, 1),
            "lr": ((x1, y0), -1, 1),
            "ul": ((x0, y1), 1, -1),
            "ur": ((x1, y1), -1, -1),
        }
        if self.mode == "point":
            names = ("ll", "lr", "ul", "ur")
        elif self.slope_sign < 0:
            names = ("ul", "lr")
        else:
            names = ("ll", "ur")

        return {name: corners[name] for name in names}, corners

    @property
    def vertices(self):
        """The vertices of the closure of the region"""
        removed, corners = self.removed()
        e = self.epsilon * self.square.side
        points = []
        for name, ((cx, cy), sx, sy) in corners.items():
            if name in removed:
                points += [
                    (cx + sx * e, cy),
                    (cx + sx * e, cy + sy * e),
                    (cx, cy + sy * e),
                ]
            else:
                points.append((cx, cy))

        return points

    def contains(self, point):
        """Check if a point lies in the region"""
        px, py = (to_fraction(c) for c in point)
        x0, x1, y0, y1 = self.square.bounds
        if not (x0 <= px <= x1 and y0 <= py <= y1):
            return False
        e = self.epsilon * self.square.side
        removed, _ = self.removed()

        return not any(
            abs(px - cx) < e and abs(py - cy) < e
            for (cx, cy), _, _ in removed.values()
        )


def carve(Q, epsilon, mode="line", slope_sign=-1):
    """Carve the corners of a square

    Raises
    ------
    OutsideDomain
        raised when epsilon is not in (0, 1/2) or the mode is unknown
    """
    epsilon = to_fraction(epsilon)
    if not 0 < epsilon < Fraction(1, 2):
        raise OutsideDomain(epsilon, "epsilon must be in (0, 1/2)")
    if mode not in ("line", "point"):
        raise OutsideDomain(mode, "mode is 'line' or 'point'")

    return CarvedRegion(Q, epsilon, mode, -1 if slope_sign < 0 else 1)


def carved_projection(region, sight):
    """Get the exact shadow of a carved region

    Parameters
    ----------
    region : CarvedRegion
        The carved square
    sight : DirectionSpec, LineSight, Viewpoint or PointSight
        A direction gives an interval of <p, d_perp>, a viewpoint an arc of
        pseudo-angles

    Returns
    -------
    IntervalUnion or ArcUnion
        a union of a single closed interval or arc
    """
    vertices = region.vertices
    if isinstance(sight, PointSight):
        sight = sight.x
    if isinstance(sight, Viewpoint):
        r = sight.reference
        phis = [
            pseudo_angle((px - sight.x1, py - sight.x2), r) for px, py in vertices
        ]
        return ArcUnion(sight, [(min(phis), max(phis))])
    if isinstance(sight, LineSight):
        sight = sight.direction
    if not isinstance(sight, DirectionSpec):
        sight = DirectionSpec(*sight)
    bx, by = sight.perp
    values = [bx * px + by * py for px, py in vertices]

    return IntervalUnion([(min(values), max(values))])


def _shadow_union(cells, d):
    """The union of the shadows of level cells in grid units"""
    lows = cell_shadows(cells, d)

    return IntervalUnion.from_arrays(lows, lows + d.width)


def _covers(union, piece, units):

    lo, hi = piece

    return union.covers(Interval(lo * units, hi * units))


def is_block(tree, Qt, d, m, epsilon=BLOCK_EPSILON):
    """Check if the shadows of the depth-m descendants of Qt cover the
    shadow of Qt carved at epsilon

    Parameters
    ----------
    tree : PercolationTree
        The percolation tree
    Qt : DyadicSquare
        A retained square
    d : DirectionSpec
        The viewing direction
    m : int
        The probing level
    epsilon : Fraction, optional
        The carving, by default 1/8

    Raises
    ------
    OutsideDomain
        raised when Qt is not retained
    LevelOutOfRange
        raised when m is above Qt or deeper than the tree
    """
    if Qt not in tree:
        raise OutsideDomain(Qt, "square is not retained")
    if not Qt.level <= m <= tree.depth:
        raise LevelOutOfRange(m, Qt.level, tree.depth)
    d = d if isinstance(d, DirectionSpec) else DirectionSpec(*d)
    region = carve(Qt, epsilon, "line", _carve_sign(d))
    target = carved_projection(region, d).intervals[0]
    cells = tree.descendants(Qt, m)
    if not len(cells):
        return False

    return _covers(_shadow_union(cells, d), target, tree.M**m)


def stripe_epsilon_bound(d):
    """The largest allowed stripe epsilon, |ab| / (2 (a^2 + b^2))"""
    d = d if isinstance(d, DirectionSpec) else DirectionSpec(*d)

    return Fraction(abs(d.a * d.b), 2 * d.norm2)


def default_stripe_epsilon(d):
    """The largest power of 1/2 strictly below the bound of the direction"""
    bound = stripe_epsilon_bound(d)
    if bound == 0:
        raise OutsideDomain(tuple(d), "axis directions have no stripes")
    epsilon = Fraction(1, 2)
    while epsilon >= bound:
        epsilon /= 2

    return epsilon


def _travel(d, side):

    return LineSight(d, side).direction


def stripe_decomposition(d, side=1, n=0, epsilon=None, M=DEFAULT_BASE):
    """Divide the shadow of the unit square into stripes

    The stripes are contiguous and have length epsilon M^-n (|a| + |b|) / 2
    in the shadow coordinate <p, d_perp>, the last one possibly shorter.

    Raises
    ------
    OutsideDomain
        raised when epsilon violates the bound of the direction
    """
    t = _travel(d, side)
    bound = stripe_epsilon_bound(t)
    epsilon = default_stripe_epsilon(t) if epsilon is None else to_fraction(epsilon)
    if not 0 < epsilon < bound:
        raise OutsideDomain(
            epsilon, f"stripe epsilon must be in (0, {format_fraction(bound)})"
        )
    lo, hi = project_root(t)
    length = epsilon * Fraction(t.width, 2) / M**n
    count = math.ceil((hi - lo) / length)

    return [
        Interval(lo + j * length, min(lo + (j + 1) * length, hi))
        for j in range(count)
    ]


@lru_cache(maxsize=8)
def _centre_index(n, M, a, b):
    """All cells of level n sorted by twice their centre shadow coordinate
    in grid units
    """
    side = M**n
    ix, iy = np.divmod(np.arange(side * side, dtype=np.int64), side)
    keys = -b * (2 * ix + 1) + a * (2 * iy + 1)
    order = np.argsort(keys, kind="stable")
    cells = np.column_stack((ix, iy))[order]
    keys = keys[order]
    keys.setflags(write=False)
    cells.setflags(write=False)

    return keys, cells


class StripeProcess:
    """The grid squares Q_I of level n whose centre projects into I, and the
    retained ones C_I, front to back, with corner indicators Z and their
    partial sums X
    """

    def __init__(self, interval, level, M, direction, q_cells, c_cells, z):

        self.interval = interval
        self.level = level
        self.M = M
        self.direction = direction
        self.q_cells = q_cells
        self.c_cells = c_cells
        self.z = z

    def __repr__(self):

        return (
            f"StripeProcess([{format_fraction(self.interval.lo)}, "
            f"{format_fraction(self.interval.hi)}), Q={len(self.q_cells)}, "
            f"C={len(self.c_cells)})"
        )

    @property
    def x(self):
        """X_m, the number of corners among the first m retained squares"""
        return np.cumsum(self.z)

    @property
    def q_corners(self):
        """Corner indicators of Q_I"""
        return corner_mask(
            self.q_cells, self.M, line_slope_sign(self.direction)
        )

    def corner_triples(self):
        """Count the runs of three consecutive corners in Q_I"""
        z = self.q_corners.astype(np.int64)
        if len(z) < 3:
            return 0

        return int(((z[:-2] + z[1:-1] + z[2:]) == 3).sum())

    def squares(self, retained=True):
        """C_I (or Q_I) as DyadicSquares"""
        cells = self.c_cells if retained else self.q_cells

        return [DyadicSquare(self.level, ix, iy, self.M) for ix, iy in cells.tolist()]


def _stripe_cells(n, M, t, I):
    """Q_I front to back for the travel direction t"""
    keys, cells = _centre_index(n, M, t.a, t.b)
    units = 2 * M**n
    lo, hi = np.searchsorted(
        keys, [math.ceil(I.lo * units), math.ceil(I.hi * units)], "left"
    )
    q_cells = cells[lo:hi]
    depth = t.a * (2 * q_cells[:, 0] + 1) + t.b * (2 * q_cells[:, 1] + 1)

    return q_cells[np.lexsort((q_cells[:, 1], q_cells[:, 0], depth))]


def count_corner_triples(n, d, side=1, epsilon=None, M=DEFAULT_BASE):
    """Count the runs of three consecutive corners over every Q_I of the
    stripe decomposition at level n. The count is 0 for every admissible
    epsilon.
    """
    if n < 2:
        raise LevelOutOfRange(n, 2, math.inf)
    t = _travel(d, side)
    sign = line_slope_sign(t)
    total = 0
    for I in stripe_decomposition(d, side, n, epsilon, M):
        z = corner_mask(_stripe_cells(n, M, t, I), M, sign).astype(np.int64)
        if len(z) >= 3:
            total += int(((z[:-2] + z[1:-1] + z[2:]) == 3).sum())

    return total


def stripe_squares(tree, n, d, side, I):
    """Get the stripe process of an interval of the shadow axis

    Q_I holds the level-n grid squares whose centre coordinate s satisfies
    lo <= s < hi, ordered by the projection of their centre on the travel
    direction, ties by (ix, iy).

    Raises
    ------
    OutsideDomain
        raised for an empty interval or an axis direction
    LevelOutOfRange
        raised when n is below 2 or deeper than the tree
    """
    I = I if isinstance(I, Interval) else Interval(*I)
    if I.length == 0:
        raise OutsideDomain(tuple(I), "empty interval")
    if not 2 <= n <= tree.depth:
        raise LevelOutOfRange(n, 2, tree.depth)
    t = _travel(d, side)
    sign = line_slope_sign(t)
    M = tree.M
    q_cells = _stripe_cells(n, M, t, I)

    retained = np.isin(cell_codes(q_cells, n, M), tree.codes(n))
    c_cells = q_cells[retained]

    return StripeProcess(
        I, n, M, t, q_cells, c_cells, corner_mask(c_cells, M, sign)
    )


StripeCount = namedtuple("StripeCount", ["Y", "first_block", "process"])
StripeCount.__doc__ = """Squares needed to cover the visible part above a
stripe; first_block is the 1-based index of the block-inducing square or
None when no square of the stripe induces a block
"""


def stripe_cover_count(tree, n, d, side, I, m=None, blocks=None):
    """Count the retained squares covering the visible part above a stripe

    Walk C_I front to back up to the first non-corner square whose level
    n-2 ancestor is a block; Y is its index plus the later members of C_I
    under the same ancestor. Without such a square Y = |C_I|.

    Parameters
    ----------
    m : int, optional
        The block probing level, by default n + 4
    blocks : dict, optional
        A cache of block tests keyed by ancestor, shared across stripes
    """
    m = n + BLOCK_EXTRA_DEPTH if m is None else m
    if not n <= m <= tree.depth:
        raise LevelOutOfRange(m, n, tree.depth)
    process = stripe_squares(tree, n, d, side, I)
    blocks = {} if blocks is None else blocks
    M = tree.M
    parents = process.c_cells // (M * M)

    for i, ((px, py), corner) in enumerate(zip(parents.tolist(), process.z)):
        if corner:
            continue
        key = (px, py)
        if key not in blocks:
            Qt = DyadicSquare(n - 2, px, py, M)
            blocks[key] = is_block(tree, Qt, process.direction, m)
        if blocks[key]:
            later = parents[i + 1 :]
            same = int(((later[:, 0] == px) & (later[:, 1] == py)).sum())
            return StripeCount(i + 1 + same, i + 1, process)

    return StripeCount(len(process.c_cells), None, process)


LengthEstimate = namedtuple("LengthEstimate", ["estimate", "S", "table"])
LengthEstimate.__doc__ = """The upper estimate sqrt(2) M^-n S_n of the length
of the visible part, S_n and the per-stripe table
(j, Q_I, C_I, Y, first_block)
"""


def visible_length_estimate(tree, n, d, side=1, epsilon=None, m=None):
    """Estimate the length of the visible part from a line with stripes"""
    blocks = {}
    rows = []
    extinct = is_extinct(tree, n)
    for j, I in enumerate(stripe_decomposition(d, side, n, epsilon, tree.M)):
        if extinct:
            rows.append((j, 0, 0, 0, None))
            continue
        count = stripe_cover_count(tree, n, d, side, I, m, blocks)
        rows.append(
            (
                j,
                len(count.process.q_cells),
                len(count.process.c_cells),
                count.Y,
                count.first_block,
            )
        )
    table = pd.DataFrame(rows, columns=["j", "Q_I", "C_I", "Y", "first_block"])
    table["first_block"] = table["first_block"].astype("Int64")
    S = int(table["Y"].sum())

    return LengthEstimate(math.sqrt(2) * S / tree.M**n, S, table)


def projection_coverage(tree, m, d, epsilon):
    """Check if the shadows of C_m cover the shadow of the carved unit
    square
    """
    d = d if isinstance(d, DirectionSpec) else DirectionSpec(*d)
    region = carve(DyadicSquare(0, 0, 0, tree.M), epsilon, "line", _carve_sign(d))
    target = carved_projection(region, d).intervals[0]
    cells = tree.cells(m)
    if not len(cells):
        return False

    return _covers(_shadow_union(cells, d), target, tree.M**m)


def _arc_union(cells, level, M, x, scale=1):

    union = ArcUnion(x)
    for arc in sorted(cell_arcs(cells, level, M, x, scale)):
        union.insert(arc)

    return union


def radial_coverage(tree, m, x, epsilon):
    """Check if the shadow arcs of C_m cover the arc of the unit square
    with its four corners carved
    """
    x = x if isinstance(x, Viewpoint) else Viewpoint(*x)
    region = carve(DyadicSquare(0, 0, 0, tree.M), epsilon, "point")
    target = carved_projection(region, x).intervals[0]
    cells = tree.cells(m)
    if not len(cells):
        return False

    return _arc_union(cells, m, tree.M, x).covers(target)


ProjectionMeasure = namedtuple("ProjectionMeasure", ["length", "normalized"])


def projection_measure(tree, m, d):
    """Get the exact length of the union of the shadows of C_m in the
    coordinate <p, d_perp>, and that length divided by |d|
    """
    d = d if isinstance(d, DirectionSpec) else DirectionSpec(*d)
    cells = tree.cells(m)
    if not len(cells):
        return ProjectionMeasure(Fraction(0), 0.0)
    length = Fraction(_shadow_union(cells, d).length, tree.M**m)

    return ProjectionMeasure(length, float(length) / math.sqrt(d.norm2))


def _line_form(line, units):
    """Integer A, B, C with A x + B y = C for a line through two points,
    in units of grid cells scaled by the common denominator
    """
    (x1, y1), (x2, y2) = [[to_fraction(c) * units for c in p] for p in line]
    if (x1, y1) == (x2, y2):
        raise OutsideDomain(line, "degenerate line")
    den = math.lcm(*(c.denominator for c in (x1, y1, x2, y2)))
    x1, y1, x2, y2 = (int(c * den) for c in (x1, y1, x2, y2))
    A, B = y2 - y1, x1 - x2

    return A, B, A * x1 + B * y1, den


def count_passed(tree, k, line):
    """Count the squares of C_k passed by a line

    A line passes a square when it meets both vertical sides or both
    horizontal sides; sides are closed, so a line along a grid line passes
    the squares on both of its sides.

    Raises
    ------
    OutsideDomain
        raised when the two points of the line coincide
    """
    A, B, C, den = _line_form(line, tree.M**k)
    cells = tree.cells(k)
    if not len(cells):
        return 0
    big = max(abs(A), abs(B)) * den * (tree.M**k + 1) + abs(C) >= 1 << 62
    cells = cells.astype(object) if big else cells

    def side(dx, dy):

        return np.sign(
            A * (cells[:, 0] + dx) * den + B * (cells[:, 1] + dy) * den - C
        ).astype(np.int64)

    ll, lr, ul, ur = side(0, 0), side(1, 0), side(0, 1), side(1, 1)
    vertical = (ll * ul <= 0) & (lr * ur <= 0)
    horizontal = (ll * lr <= 0) & (ul * ur <= 0)

    return int((vertical | horizontal).sum())


def count_shadow_hits(tree, k, z, sight, lam=1):
    """Count the squares of C_k whose concentric lam-scaled square has a
    shadow containing z

    Parameters
    ----------
    z : Fraction or pair
        A shadow coordinate for a line sight; a pseudo-angle or a direction
        vector for a point sight
    sight : LineSight, DirectionSpec, PointSight or Viewpoint
        The sight
    lam : Fraction, optional
        The relative side of the concentric squares, in (0, 1], by default 1

    Raises
    ------
    OutsideDomain
        raised when lam is not in (0, 1]
    """
    lam = to_fraction(lam)
    if not 0 < lam <= 1:
        raise OutsideDomain(lam, "scale must be in (0, 1]")
    cells = tree.cells(k)
    if not len(cells):
        return 0
    if isinstance(sight, Viewpoint):
        sight = PointSight(sight)
    if isinstance(sight, PointSight):
        x = sight.x
        if isinstance(z, (tuple, list)):
            z = pseudo_angle(z, x.reference)
        z = to_fraction(z)
        return sum(arc.contains(z) for arc in cell_arcs(cells, k, tree.M, x, lam))

    t = sight.direction if isinstance(sight, LineSight) else DirectionSpec(*sight)
    z = to_fraction(z) * 2 * tree.M**k
    keys = -t.b * (2 * cells[:, 0] + 1) + t.a * (2 * cells[:, 1] + 1)
    # |z - key| <= lam * width, cleared of denominators
    den = z.denominator * lam.denominator
    lhs = np.abs(int(z * den) - keys.astype(object) * den)

    return int((lhs <= int(lam * t.width * den)).sum())


def first_bounded_scale(table, weights, M=DEFAULT_BASE):
    """Get the first level from which N_k <= a_k M^k holds up to the end of
    the table, or None

    weights maps k to a_k.
    """
    frame = table.frame
    holds = [
        n <= weights(k) * M**k for k, n in zip(frame["k"].tolist(), frame["N_k"].tolist())
    ]
    first = None
    for k, ok in zip(frame["k"].tolist(), holds):
        if not ok:
            first = None
        elif first is None:
            first = k

    return first
