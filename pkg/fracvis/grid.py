import logging
from collections import namedtuple
from fractions import Fraction
from functools import lru_cache

import numpy as np
from tqdm import tqdm

from .config import DEFAULT_BASE, PRACTICAL_DEPTH, TILE_CELLS
from .exceptions import InvalidParameters, LevelOutOfRange, OutsideDomain
from .utils import format_fraction, lazy_property, to_fraction

logger = logging.getLogger(__name__)

_TWO_64 = 1 << 64


class PercParams:
    """The parameters of a fractal percolation tree

    Two trees generated from equal parameters are identical.
    """

    def __init__(self, p, M=DEFAULT_BASE, depth=0, seed=0):
        """
        Parameters
        ----------
        p : Fraction, float, int or str
            The retention probability of a subsquare, in (0, 1]
        M : int, optional
            The subdivision base: each square has M * M subsquares,
            by default 2
        depth : int, optional
            The deepest generated level, by default 0
        seed : int, optional
            The 64-bit unsigned master seed, by default 0

        Raises
        ------
        InvalidParameters
            raised when a parameter is outside of its range
        """
        raw = {"p": p, "M": M, "depth": depth, "seed": seed}
        try:
            self._p = to_fraction(p)
        except (TypeError, ValueError, ZeroDivisionError):
            raise InvalidParameters(raw, "p is not a number") from None
        if not 0 < self._p <= 1:
            raise InvalidParameters(raw, "p must be in (0, 1]")
        for name, value, lowest in (("M", M, 2), ("depth", depth, 0)):
            if isinstance(value, bool) or not isinstance(value, int):
                raise InvalidParameters(raw, f"{name} must be an integer")
            if value < lowest:
                raise InvalidParameters(raw, f"{name} must be >= {lowest}")
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise InvalidParameters(raw, "seed must be an integer")
        if not 0 <= seed < _TWO_64:
            raise InvalidParameters(raw, "seed must fit in 64 unsigned bits")
        if M ** (2 * depth) >= 1 << 62:
            raise InvalidParameters(raw, "grid too fine to be addressed")

        self._M = M
        self._depth = depth
        self._seed = seed
        if depth > PRACTICAL_DEPTH and M == 2:
            logger.debug(f"depth {depth} is beyond the practical ceiling")

    def __eq__(self, other):

        if not isinstance(other, PercParams):
            return NotImplemented

        return self.key == other.key

    def __hash__(self):

        return hash(self.key)

    def __repr__(self):

        return (
            f"PercParams(p={format_fraction(self._p)}, M={self._M}, "
            f"depth={self._depth}, seed={self._seed})"
        )

    def replace(self, **changes):
        """Get a copy of these parameters with some fields changed"""
        fields = {
            "p": self._p,
            "M": self._M,
            "depth": self._depth,
            "seed": self._seed,
        }
        fields.update(changes)

        return PercParams(**fields)

    def as_dict(self):
        """Get the JSON-ready dict of these parameters"""
        return {
            "p": format_fraction(self._p),
            "M": self._M,
            "depth": self._depth,
            "seed": self._seed,
        }

    @classmethod
    def from_dict(cls, data):
        """Build parameters from the dict written by 'as_dict'"""
        try:
            return cls(
                data["p"],
                M=data.get("M", DEFAULT_BASE),
                depth=data["depth"],
                seed=data.get("seed", 0),
            )
        except KeyError as e:
            raise InvalidParameters(data, f"missing {e}") from None

    @property
    def key(self):
        """The tuple identifying these parameters"""
        return (self._p, self._M, self._depth, self._seed)

    @property
    def p(self):
        """The retention probability as an exact rational"""
        return self._p

    @property
    def M(self):
        """The subdivision base"""
        return self._M

    @property
    def depth(self):
        """The deepest generated level"""
        return self._depth

    @property
    def seed(self):
        """The master seed"""
        return self._seed

    @property
    def threshold(self):
        """A raw 64-bit draw below this value retains a square"""
        return (self._p.numerator * _TWO_64) // self._p.denominator


class DyadicSquare(namedtuple("DyadicSquare", ["level", "ix", "iy", "base"])):
    """A closed grid cell of side M^-level

    It covers [ix, ix + 1] x [iy, iy + 1] scaled by M^-level. Squares sort
    by (level, ix, iy).
    """

    __slots__ = ()

    def __new__(cls, level, ix, iy, base=DEFAULT_BASE):

        level, ix, iy, base = int(level), int(ix), int(iy), int(base)
        if level < 0 or base < 2:
            raise OutsideDomain((level, ix, iy, base), "not a grid cell")
        if not (0 <= ix < base**level and 0 <= iy < base**level):
            raise OutsideDomain(
                (level, ix, iy), f"index outside [0, {base**level})"
            )

        return super().__new__(cls, level, ix, iy, base)

    def __repr__(self):

        return f"DyadicSquare(level={self.level}, ix={self.ix}, iy={self.iy})"

    @property
    def side(self):
        """The exact side length"""
        return Fraction(1, self.base**self.level)

    @property
    def bounds(self):
        """The exact (x0, x1, y0, y1) of this square"""
        s = self.side

        return (self.ix * s, (self.ix + 1) * s, self.iy * s, (self.iy + 1) * s)

    @property
    def corners(self):
        """The four corners, counterclockwise from the lower left one"""
        x0, x1, y0, y1 = self.bounds

        return ((x0, y0), (x1, y0), (x1, y1), (x0, y1))

    @property
    def center(self):
        """The exact centre"""
        s = self.side

        return ((2 * self.ix + 1) * s / 2, (2 * self.iy + 1) * s / 2)

    def children(self):
        """The M * M subsquares of the next level, in lexicographic order"""
        m = self.base

        return [
            DyadicSquare(self.level + 1, m * self.ix + u, m * self.iy + v, m)
            for u in range(m)
            for v in range(m)
        ]

    def contains(self, other):
        """Check if this square contains another square of this grid"""
        if other.level < self.level:
            return False

        return ancestor(other, other.level - self.level) == self


ROOT = DyadicSquare(0, 0, 0)


def ancestor(sq, levels_up):
    """Get the square levels_up levels above this square which contains it

    Raises
    ------
    LevelOutOfRange
        raised when levels_up is negative or larger than the square level
    """
    if not 0 <= levels_up <= sq.level:
        raise LevelOutOfRange(levels_up, 0, sq.level)
    f = sq.base**levels_up

    return DyadicSquare(sq.level - levels_up, sq.ix // f, sq.iy // f, sq.base)


def sort_cells(cells):
    """Sort an (N, 2) array of cell indices lexicographically by (ix, iy)"""
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
    order = np.lexsort((cells[:, 1], cells[:, 0]))

    return cells[order]


def cell_codes(cells, k, M):
    """Encode (ix, iy) rows of level k into single integers"""
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)

    return cells[:, 0] * M**k + cells[:, 1]


def _empty_cells():

    return np.zeros((0, 2), dtype=np.int64)


class PercolationTree:
    """The retained squares C_0, ..., C_depth of a fractal percolation

    Each level is stored as a read-only (N, 2) integer array of (ix, iy)
    sorted lexicographically. C_0 is the unit square or, for hand-built
    trees whose leaves are all gone, empty.
    """

    def __init__(self, params, levels):
        """
        Parameters
        ----------
        params : PercParams
            The parameters of the tree
        levels : list
            One (N, 2) array of retained cell indices per level 0..depth
        """
        if len(levels) != params.depth + 1:
            raise InvalidParameters(
                params.as_dict(), f"{len(levels)} levels given"
            )
        self._params = params
        self._levels = []
        for cells in levels:
            cells = sort_cells(cells)
            cells.setflags(write=False)
            self._levels.append(cells)

    def __repr__(self):

        return f"PercolationTree({self._params!r}, counts={self.counts})"

    def __eq__(self, other):

        if not isinstance(other, PercolationTree):
            return NotImplemented

        return self._params == other._params and all(
            np.array_equal(a, b) for a, b in zip(self._levels, other._levels)
        )

    def __contains__(self, sq):

        if sq.base != self.M or not 0 <= sq.level <= self.depth:
            return False
        codes = self.codes(sq.level)
        code = sq.ix * self.M**sq.level + sq.iy
        i = np.searchsorted(codes, code)

        return bool(i < len(codes) and codes[i] == code)

    def cells(self, k):
        """Get the (N, 2) array of retained cells at level k"""
        self._check_level(k)

        return self._levels[k]

    def codes(self, k):
        """Get the sorted integer codes of the retained cells at level k"""
        self._check_level(k)

        return self._codes[k]

    def count(self, k):
        """Get the number of retained squares at level k"""
        return len(self.cells(k))

    def descendants(self, sq, level):
        """Get the retained cells of this level inside this square"""
        self._check_level(level)
        if level < sq.level:
            raise LevelOutOfRange(level, sq.level, self.depth)
        f = self.M ** (level - sq.level)
        cells = self._levels[level]
        lo, hi = np.searchsorted(cells[:, 0], [sq.ix * f, (sq.ix + 1) * f])
        block = cells[lo:hi]
        inside = (block[:, 1] >= sq.iy * f) & (block[:, 1] < (sq.iy + 1) * f)

        return block[inside]

    def as_dict(self, include_levels=True):
        """Get the JSON-ready dict of this tree

        Without levels, the tree is stored as its parameters only and is
        regenerated when loaded.
        """
        data = self._params.as_dict()
        if include_levels:
            data["levels"] = [cells.tolist() for cells in self._levels]

        return data

    @classmethod
    def from_dict(cls, data):
        """Build a tree from the dict written by 'as_dict'

        Raises
        ------
        InvalidParameters
            raised when the levels are not nested
        """
        params = PercParams.from_dict(data)
        if "levels" not in data:
            return generate(params)
        levels = [
            np.asarray(cells, dtype=np.int64).reshape(-1, 2)
            for cells in data["levels"]
        ]
        tree = cls(params, levels)
        tree.check_nesting()

        return tree

    @classmethod
    def from_leaves(cls, leaves, depth, M=DEFAULT_BASE, p=1, seed=0):
        """Build a tree whose level-depth squares are these leaves

        The upper levels are the ancestors of the leaves.
        """
        params = PercParams(p, M=M, depth=depth, seed=seed)
        cells = np.asarray(
            [(sq.ix, sq.iy) if hasattr(sq, "ix") else sq for sq in leaves],
            dtype=np.int64,
        ).reshape(-1, 2)
        levels = [cells]
        for _ in range(depth):
            levels.append(np.unique(levels[-1] // M, axis=0))
        levels.reverse()

        return cls(params, levels)

    def check_nesting(self):
        """Check that every retained square has a retained parent"""
        M = self.M
        for k in range(1, self.depth + 1):
            parents = cell_codes(self._levels[k] // M, k - 1, M)
            if not np.isin(parents, self.codes(k - 1)).all():
                raise InvalidParameters(
                    self._params.as_dict(), f"level {k} is not nested"
                )

    def _check_level(self, k):

        if not 0 <= k <= self.depth:
            raise LevelOutOfRange(k, 0, self.depth)

    @lazy_property
    def _codes(self):

        return [
            cell_codes(cells, k, self.M) for k, cells in enumerate(self._levels)
        ]

    @property
    def params(self):
        """The parameters of this tree"""
        return self._params

    @property
    def depth(self):
        """The deepest level of this tree"""
        return self._params.depth

    @property
    def M(self):
        """The subdivision base of this tree"""
        return self._params.M

    @property
    def counts(self):
        """The number of retained squares per level"""
        return [len(cells) for cells in self._levels]


def tile_depth(M):
    """Get the largest t such that an M^t x M^t tile has at most
    TILE_CELLS cells
    """
    t = 0
    while M ** (2 * (t + 1)) <= TILE_CELLS:
        t += 1

    return t


def _tile_draws(seed, M, k, tx, ty, size):
    """Raw 64-bit draws of one tile of level k

    The stream is a Philox counter stream keyed by (seed, M, k, tx, ty), so
    the draw of a cell is a pure function of the seed and its address.
    """
    key = np.random.SeedSequence([seed, M, k, tx, ty]).generate_state(
        2, dtype=np.uint64
    )

    return np.random.Philox(key=key).random_raw(size)


@lru_cache(maxsize=512)
def _cached_tile_draws(seed, M, k, tx, ty, size):

    draws = _tile_draws(seed, M, k, tx, ty, size)
    draws.setflags(write=False)

    return draws


def _tiling(M, k):
    """Get the tile edge and the number of tiles per row at level k"""
    edge = M ** min(k, tile_depth(M))

    return edge, M**k // edge


def _retained(params, k, cells):
    """Decide which candidate cells of level k are retained"""
    if params.p == 1:
        return np.ones(len(cells), dtype=bool)
    M = params.M
    edge, per_row = _tiling(M, k)
    tile_codes = (cells[:, 0] // edge) * per_row + cells[:, 1] // edge
    local = (cells[:, 0] % edge) * edge + cells[:, 1] % edge

    tiles, inverse = np.unique(tile_codes, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    bounds = np.concatenate(([0], np.cumsum(np.bincount(inverse))))

    draws = np.empty(len(cells), dtype=np.uint64)
    for i, code in enumerate(tiles.tolist()):
        members = order[bounds[i] : bounds[i + 1]]
        tx, ty = divmod(code, per_row)
        stream = _tile_draws(params.seed, M, k, tx, ty, edge * edge)
        draws[members] = stream[local[members]]

    return draws < np.uint64(params.threshold)


def is_retained(params, k, ix, iy):
    """Decide if the level-k cell (ix, iy) passes its own draw

    The cell is in the tree only if all its ancestors also pass theirs.
    """
    if k == 0 or params.p == 1:
        return True
    edge, per_row = _tiling(params.M, k)
    draws = _cached_tile_draws(
        params.seed, params.M, k, ix // edge, iy // edge, edge * edge
    )

    return int(draws[(ix % edge) * edge + iy % edge]) < params.threshold


def _children(parents, M):
    """Get the M * M children of each parent cell"""
    offsets = np.array(
        [(u, v) for u in range(M) for v in range(M)], dtype=np.int64
    )

    return (parents[:, None, :] * M + offsets[None, :, :]).reshape(-1, 2)


def generate(params, verbose=False):
    """Generate the fractal percolation tree of these parameters

    Parameters
    ----------
    params : PercParams
        The parameters of the tree
    verbose : bool, optional
        Whether a progress bar is shown, by default False

    Returns
    -------
    PercolationTree
        The retained squares of every level
    """
    M = params.M
    levels = [np.zeros((1, 2), dtype=np.int64)]
    for k in tqdm(range(1, params.depth + 1), disable=not verbose):
        parents = levels[-1]
        if len(parents) == 0:
            levels.append(_empty_cells())
            continue
        children = _children(parents, M)
        levels.append(children[_retained(params, k, children)])
        logger.debug(f"level {k}: {len(levels[-1])} squares retained")

    return PercolationTree(params, levels)


def survives_to(params, level):
    """Check if the tree of these parameters has a retained square at this
    level without generating the whole tree

    The search is depth-first over the same draws as 'generate' and stops
    at the first surviving square.
    """
    if level < 0:
        raise LevelOutOfRange(level, 0, params.depth)
    M = params.M
    stack = [(0, 0, 0)]
    while stack:
        k, ix, iy = stack.pop()
        if k == level:
            return True
        for u in range(M - 1, -1, -1):
            for v in range(M - 1, -1, -1):
                cx, cy = M * ix + u, M * iy + v
                if is_retained(params, k + 1, cx, cy):
                    stack.append((k + 1, cx, cy))

    return False


def squares_at(tree, k):
    """Get the retained squares of level k in lexicographic order

    Raises
    ------
    LevelOutOfRange
        raised when k is not in [0, depth]
    """
    M = tree.M

    return [DyadicSquare(k, ix, iy, M) for ix, iy in tree.cells(k).tolist()]


def is_extinct(tree, k):
    """Check if no square is retained at level k"""
    return tree.count(k) == 0


def count_ancestors(cells, level, k, M=DEFAULT_BASE):
    """Get the number of distinct level-k ancestors of level cells

    Raises
    ------
    LevelOutOfRange
        raised when k is not in [0, level]
    """
    if not 0 <= k <= level:
        raise LevelOutOfRange(k, 0, level)
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
    if not len(cells):
        return 0

    return len(np.unique(cell_codes(cells // M ** (level - k), k, M)))
