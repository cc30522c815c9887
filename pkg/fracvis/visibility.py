import logging
import math
from bisect import bisect_left, bisect_right
from collections import namedtuple
from fractions import Fraction

import numpy as np

from .exactgeom import (
    ArcUnion,
    DirectionSpec,
    IntervalUnion,
    Ray,
    Viewpoint,
    cell_arcs,
    cell_shadows,
    direction_at,
    first_hit,
    integer_ray,
    shadow_arc,
)
from .exceptions import (
    CertificationFailure,
    LevelOutOfRange,
    MalformedFile,
    OutsideDomain,
)
from .grid import (
    ROOT,
    DyadicSquare,
    PercParams,
    cell_codes,
    count_ancestors,
)
from .utils import format_fraction, lazy_property, to_fraction

logger = logging.getLogger(__name__)

METHODS = ("lattice", "sweep", "elementary")


def parse_side(side):
    """Read a side as +1 or -1 from '+', '-', 1 or -1"""
    if side in ("+", "+1", 1):
        return 1
    if side in ("-", "-1", -1):
        return -1
    raise OutsideDomain(side, "side must be '+' or '-'")


class LineSight(namedtuple("LineSight", ["d", "side"])):
    """Sight from a line far away: the rays travel along side * d"""

    __slots__ = ()

    kind = "line"

    def __new__(cls, d, side=1):

        if not isinstance(d, DirectionSpec):
            d = DirectionSpec(*d)

        return super().__new__(cls, d, parse_side(side))

    def __str__(self):

        sign = "+" if self.side > 0 else "-"

        return f"line {self.d.a},{self.d.b},{sign}"

    @classmethod
    def from_text(cls, text):
        """Parse 'a,b,side' into a sight, the side defaulting to '+'"""
        parts = text.split(",")
        if len(parts) not in (2, 3):
            raise ValueError(f"'{text}' is not a line 'a,b,side'")
        side = parts[2] if len(parts) == 3 else "+"

        return cls(DirectionSpec(parts[0], parts[1]), side)

    @property
    def direction(self):
        """The direction in which the rays travel"""
        return self.d if self.side > 0 else -self.d

    def as_dict(self):

        return {
            "kind": self.kind,
            "d": self.d.as_list(),
            "side": "+" if self.side > 0 else "-",
        }


class PointSight(namedtuple("PointSight", ["x"])):
    """Sight from a viewpoint outside of the unit square"""

    __slots__ = ()

    kind = "point"

    def __new__(cls, x):

        if not isinstance(x, Viewpoint):
            x = Viewpoint(*x)

        return super().__new__(cls, x)

    def __str__(self):

        return "point {},{}".format(*self.x.as_list())

    @classmethod
    def from_text(cls, text):
        """Parse 'x1,x2' into a sight"""
        return cls(Viewpoint.from_text(text))

    def as_dict(self):

        return {"kind": self.kind, "x": self.x.as_list()}


def sight_from_dict(data):
    """Build a line or point sight from its dict"""
    kind = data.get("kind")
    if kind == LineSight.kind:
        return LineSight(DirectionSpec(*data["d"]), data.get("side", "+"))
    if kind == PointSight.kind:
        return PointSight(Viewpoint(*data["x"]))
    raise MalformedFile("sight", f"unknown sight kind {kind!r}")


def in_diagonal_region(x):
    """Check if no coordinate of the viewpoint lies within [0, 1]"""
    if not isinstance(x, Viewpoint):
        x = Viewpoint(*x)

    return not (0 <= x.x1 <= 1) and not (0 <= x.x2 <= 1)


class VisibleCover:
    """The retained squares of a level that meet the visible part

    Each marked square keeps the coordinate of its witness ray: a shadow
    coordinate for a line sight, a pseudo-angle for a point sight.
    """

    def __init__(
        self,
        sight,
        level,
        M,
        marked,
        witnesses,
        method="lattice",
        discrepancies=0,
        params=None,
    ):
        """
        Parameters
        ----------
        sight : LineSight or PointSight
            The sight of this cover
        level : int
            The level of the marked squares
        M : int
            The subdivision base
        marked : array-like
            The (N, 2) indices of the marked squares
        witnesses : list
            The witness coordinate of each marked square
        method : str, optional
            The algorithm which marked the squares, by default 'lattice'
        discrepancies : int, optional
            The number of witnesses which failed before the exact
            elementary algorithm took over, by default 0
        params : PercParams, optional
            The parameters of the tree, by default None
        """
        marked = np.asarray(marked, dtype=np.int64).reshape(-1, 2)
        if len(marked) != len(witnesses):
            raise OutsideDomain(len(witnesses), "one witness per square")
        order = np.lexsort((marked[:, 1], marked[:, 0]))
        self._marked = marked[order]
        self._marked.setflags(write=False)
        self._witnesses = [witnesses[i] for i in order.tolist()]
        self._sight = sight
        self._level = level
        self._M = M
        self._method = method
        self._discrepancies = discrepancies
        self._params = params

    def __repr__(self):

        return (
            f"VisibleCover({self._sight}, level={self._level}, "
            f"marked={len(self._marked)})"
        )

    def __len__(self):

        return len(self._marked)

    def __contains__(self, sq):

        return self._position(sq) is not None

    def __eq__(self, other):

        if not isinstance(other, VisibleCover):
            return NotImplemented

        return (
            self._sight == other._sight
            and self._level == other._level
            and np.array_equal(self._marked, other._marked)
        )

    def _position(self, sq):

        if sq.level != self._level or sq.base != self._M:
            return None
        i = np.searchsorted(self._codes, sq.ix * self._M**self._level + sq.iy)
        if i < len(self._codes) and self._codes[i] == (
            sq.ix * self._M**self._level + sq.iy
        ):
            return int(i)

        return None

    @lazy_property
    def _codes(self):

        return cell_codes(self._marked, self._level, self._M)

    def witness_of(self, sq):
        """Get the witness coordinate of a marked square"""
        i = self._position(sq)
        if i is None:
            raise OutsideDomain(sq, "square is not marked")

        return self._witnesses[i]

    def as_dict(self):
        """Get the JSON-ready dict of this cover"""
        data = {
            "sight": self._sight.as_dict(),
            "level": self._level,
            "M": self._M,
            "method": self._method,
            "discrepancies": self._discrepancies,
            "marked": self._marked.tolist(),
            "witnesses": [format_fraction(z) for z in self._witnesses],
            "counts": [[k, n] for k, n in enumerate(self.counts)],
        }
        if self._params is not None:
            data["tree"] = self._params.as_dict()

        return data

    @classmethod
    def from_dict(cls, data):
        """Build a cover from the dict written by 'as_dict'"""
        try:
            params = data.get("tree")
            return cls(
                sight_from_dict(data["sight"]),
                data["level"],
                data["M"],
                data["marked"],
                [to_fraction(z) for z in data["witnesses"]],
                method=data.get("method", "lattice"),
                discrepancies=data.get("discrepancies", 0),
                params=None if params is None else PercParams.from_dict(params),
            )
        except (KeyError, TypeError) as e:
            raise MalformedFile("cover", f"missing or invalid {e}") from None

    @property
    def sight(self):
        """The sight of this cover"""
        return self._sight

    @property
    def level(self):
        """The level of the marked squares"""
        return self._level

    @property
    def M(self):
        """The subdivision base"""
        return self._M

    @property
    def marked(self):
        """The (N, 2) indices of the marked squares"""
        return self._marked

    @property
    def squares(self):
        """The marked squares in lexicographic order"""
        return [
            DyadicSquare(self._level, ix, iy, self._M)
            for ix, iy in self._marked.tolist()
        ]

    @property
    def witnesses(self):
        """The witness coordinates, aligned with 'squares'"""
        return list(self._witnesses)

    @property
    def method(self):
        """The algorithm which marked the squares"""
        return self._method

    @property
    def discrepancies(self):
        """The number of failed witnesses of the fast algorithm"""
        return self._discrepancies

    @property
    def params(self):
        """The parameters of the tree, when known"""
        return self._params

    @lazy_property
    def counts(self):
        """N_j, the number of level-j ancestors of the marked squares"""
        return [
            count_ancestors(self._marked, self._level, j, self._M)
            for j in range(self._level + 1)
        ]


def _line_order(cells, t):
    """Front to back order: centre projection onto the travel direction,
    ties by (ix, iy)
    """
    key = t.a * (2 * cells[:, 0] + 1) + t.b * (2 * cells[:, 1] + 1)

    return np.lexsort((cells[:, 1], cells[:, 0], key))


def _middle_cell(start, length):
    """Half-integer grid coordinate inside the middle unit of a run"""
    return Fraction(2 * (start + (length - 1) // 2) + 1, 2)


def _line_lattice(cells, t):
    """First square in front to back order over each unit of the shadow
    axis; a square is visible iff it wins some unit
    """
    order = _line_order(cells, t)
    cells = cells[order]
    lows = cell_shadows(cells, t)
    base = int(lows.min())
    span = int(lows.max()) + t.width - base
    nobody = len(cells)

    winner = np.full(span, nobody, dtype=np.int64)
    rank = np.arange(len(cells), dtype=np.int64)
    for offset in range(t.width):
        np.minimum.at(winner, lows - base + offset, rank)

    change = np.flatnonzero(np.diff(winner)) + 1
    starts = np.concatenate(([0], change))
    lengths = np.concatenate((change, [span])) - starts
    owners = winner[starts]
    won = owners < nobody
    starts, lengths, owners = starts[won], lengths[won], owners[won]

    # the first of the longest runs of each owner
    pick = np.lexsort((starts, -lengths, owners))
    firsts = np.concatenate(([True], owners[pick][1:] != owners[pick][:-1]))
    chosen = pick[firsts]

    witnesses = [
        _middle_cell(int(s) + base, int(n))
        for s, n in zip(starts[chosen], lengths[chosen])
    ]

    return cells[owners[chosen]], witnesses


def _line_sweep(cells, t):
    """Literal front to back sweep with a union of shadows"""
    order = _line_order(cells, t)
    cells = cells[order]
    lows = cell_shadows(cells, t).tolist()
    union = IntervalUnion()
    marked, witnesses = [], []
    for i, lo in enumerate(lows):
        piece = (lo, lo + t.width)
        rest = union.uncovered(piece)
        if rest.length > 0:
            longest = rest.longest()
            marked.append(i)
            witnesses.append(_middle_cell(longest.lo, longest.length))
        union.insert(piece)

    return cells[marked], witnesses


def _point_order(cells, level, M, x):
    """Squares by squared distance from x to their centre, ties by (ix, iy)"""
    units = M**level
    den = math.lcm(x.x1.denominator, x.x2.denominator)
    ox, oy = int(2 * x.x1 * units * den), int(2 * x.x2 * units * den)

    def distance(i):

        ix, iy = cells[i]
        return ((2 * ix + 1) * den - ox) ** 2 + ((2 * iy + 1) * den - oy) ** 2

    cells = cells.tolist()

    return sorted(range(len(cells)), key=lambda i: (distance(i), cells[i]))


def _point_sweep(cells, level, M, x):
    """Front to back sweep with a union of shadow arcs"""
    arcs = cell_arcs(cells, level, M, x)
    union = ArcUnion(x)
    marked, witnesses = [], []
    for i in _point_order(cells, level, M, x):
        rest = union.uncovered(arcs[i])
        if rest.length > 0:
            marked.append(i)
            witnesses.append(rest.longest().midpoint)
        union.insert(arcs[i])

    return cells[marked], witnesses


def sight_ray(sight, z, M=2):
    """Get the exact ray of a sight at a witness coordinate

    For a line sight z is a shadow coordinate <P, d_perp> of the travel
    direction; for a point sight it is a pseudo-angle.
    """
    if sight.kind == LineSight.kind:
        t = sight.direction
        a, b = t
        scale = Fraction(z) / t.norm2

        return Ray(None, (-b * scale, a * scale), (a, b))
    x = sight.x
    v = direction_at(x, z)

    return Ray((x.x1, x.x2), (x.x1 + v[0], x.x2 + v[1]), v)


class _ShadowIndex:
    """Stabbing queries over the shadows of the retained squares of a level

    Line shadows are kept in grid units of the level and all have the same
    width; arcs are kept as sorted pseudo-angle bounds.
    """

    def __init__(self, tree, level, sight):

        self.cells = tree.cells(level)
        self.level = level
        self.M = tree.M
        self.units = tree.M**level
        self.sight = sight
        if sight.kind == LineSight.kind:
            lows = cell_shadows(self.cells, sight.direction)
            self._order = np.argsort(lows, kind="stable")
            self._lows = lows[self._order]
            self._width = sight.direction.width
        else:
            arcs = cell_arcs(self.cells, level, self.M, sight.x)
            order = sorted(range(len(arcs)), key=lambda i: arcs[i].lo)
            self._order = np.array(order, dtype=np.int64)
            self._arcs = [arcs[i] for i in order]
            self._lows = [arc.lo for arc in self._arcs]
            self._width = max((arc.length for arc in arcs), default=0)

    def endpoints(self):
        """All shadow endpoints, sorted, in index coordinates"""
        if self.sight.kind == LineSight.kind:
            lows = np.unique(self._lows)
            return np.union1d(lows, lows + self._width).tolist()
        ends = {arc.lo for arc in self._arcs} | {arc.hi for arc in self._arcs}

        return sorted(ends)

    def coordinate(self, z):
        """Convert a witness coordinate to index coordinates"""
        if self.sight.kind == LineSight.kind:
            return z * self.units

        return z

    def witness(self, z):
        """Convert an index coordinate back to a witness coordinate"""
        if self.sight.kind == LineSight.kind:
            return Fraction(z) / self.units

        return z

    def stab(self, z):
        """Get the cell indices whose closed shadow contains z"""
        if self.sight.kind == LineSight.kind:
            lo = np.searchsorted(self._lows, math.ceil(z - self._width), "left")
            hi = np.searchsorted(self._lows, math.floor(z), "right")
            return self._order[lo:hi]
        lo = bisect_left(self._lows, z - self._width)
        hi = bisect_right(self._lows, z)
        hits = [k for k in range(lo, hi) if self._arcs[k].hi >= z]

        return self._order[hits]

    def first_hit(self, z):
        """Get the index of the first cell hit at a witness coordinate and
        whether that hit is ambiguous
        """
        candidates = self.stab(self.coordinate(z))
        if not len(candidates):
            return None, False
        ray = sight_ray(self.sight, z, self.M)
        found = first_hit(
            integer_ray(ray.origin, ray.through, ray.direction, self.units),
            self.cells[candidates],
            np.ones(len(candidates), dtype=np.int64),
            np.column_stack(
                (np.full(len(candidates), self.level), self.cells[candidates])
            ),
        )
        if found is None:
            return None, False

        return int(candidates[found[0]]), found[3]


def _failed_witnesses(cover, index):
    """Get the marked squares whose witness ray first hits another square"""
    failed = []
    for (ix, iy), z in zip(cover.marked.tolist(), cover.witnesses):
        hit, _ = index.first_hit(z)
        if hit is None or tuple(index.cells[hit].tolist()) != (ix, iy):
            failed.append(((ix, iy), hit))

    return failed


def _elementary_cover(tree, level, sight, index=None):
    """Exact cover: the first hit square at the middle of each elementary
    piece between consecutive shadow endpoints is visible
    """
    index = index or _ShadowIndex(tree, level, sight)
    ends = index.endpoints()
    best = {}
    for lo, hi in zip(ends[:-1], ends[1:]):
        if sight.kind == LineSight.kind:
            z = _middle_cell(lo, hi - lo)
        else:
            z = Fraction(lo + hi, 2)
        if not len(index.stab(z)):
            continue
        hit, _ = index.first_hit(index.witness(z))
        if hit is None:
            continue
        length = hi - lo
        if hit not in best or length > best[hit][0]:
            best[hit] = (length, index.witness(z))

    owners = sorted(best)

    return index.cells[owners], [best[i][1] for i in owners]


def _cover(tree, level, sight, method, check):

    cells = tree.cells(level)
    M = tree.M
    if method not in METHODS:
        raise OutsideDomain(method, f"method is not one of {METHODS}")
    if not len(cells):
        marked, witnesses = cells, []
    elif method == "elementary":
        marked, witnesses = _elementary_cover(tree, level, sight)
    elif sight.kind == LineSight.kind:
        run = _line_lattice if method == "lattice" else _line_sweep
        marked, witnesses = run(cells, sight.direction)
        witnesses = [z / M**level for z in witnesses]
    else:
        marked, witnesses = _point_sweep(cells, level, M, sight.x)

    cover = VisibleCover(
        sight, level, M, marked, witnesses, method, params=tree.params
    )
    if not check or method == "elementary" or not len(cells):
        return cover

    index = _ShadowIndex(tree, level, sight)
    failed = _failed_witnesses(cover, index)
    if not failed:
        return cover

    logger.warning(
        f"{len(failed)} witness rays of {sight} at level {level} failed, "
        f"first {failed[0][0]}; recomputing with elementary pieces"
    )
    marked, witnesses = _elementary_cover(tree, level, sight, index)
    exact = VisibleCover(
        sight,
        level,
        M,
        marked,
        witnesses,
        "elementary",
        discrepancies=len(failed),
        params=tree.params,
    )
    differ = set(map(tuple, cover.marked.tolist())) ^ set(
        map(tuple, exact.marked.tolist())
    )
    if differ:
        logger.warning(f"{len(differ)} squares differ from the fast cover")

    return exact


def visible_from_line(tree, n, d, side=1, method="lattice", check=True):
    """Compute the squares of C_n meeting the visible part from a line

    Parameters
    ----------
    tree : PercolationTree
        The percolation tree
    n : int
        The level of the cover
    d : DirectionSpec or pair
        The viewing direction
    side : int or str, optional
        Whether the rays travel along d ('+') or -d ('-'), by default 1
    method : str, optional
        'lattice', 'sweep' or 'elementary', by default 'lattice'
    check : bool, optional
        Whether every witness ray is verified, by default True

    Returns
    -------
    VisibleCover
        The marked squares, their witnesses and the counts N_j

    Raises
    ------
    LevelOutOfRange
        raised when n is not in [0, depth]
    """
    return _cover(tree, n, LineSight(d, side), method, check)


def visible_from_point(tree, n, x, method="sweep", check=True):
    """Compute the squares of C_n meeting the visible part from a point

    The squares are swept by distance of their centre from x; every witness
    ray is verified and a failure switches to the exact elementary
    algorithm.

    Raises
    ------
    OutsideDomain
        raised when x lies in the unit square
    """
    if method == "lattice":
        method = "sweep"

    return _cover(tree, n, PointSight(x), method, check)


def visible_from(tree, n, sight, **kwargs):
    """Compute the visible cover of a line or a point sight"""
    if sight.kind == LineSight.kind:
        return visible_from_line(tree, n, sight.d, sight.side, **kwargs)

    return visible_from_point(tree, n, sight.x, **kwargs)


def _check_level(cover, tree, n):

    if n is not None and n != cover.level:
        raise LevelOutOfRange(n, cover.level, cover.level)
    if cover.level > tree.depth:
        raise LevelOutOfRange(cover.level, 0, tree.depth)


def witness_ray(cover, sq, tree, n=None, index=None):
    """Build and verify the witness ray of a marked square

    Returns
    -------
    Ray
        The exact ray through the witness coordinate

    Raises
    ------
    CertificationFailure
        raised when the first square hit by the ray is not sq
    """
    _check_level(cover, tree, n)
    z = cover.witness_of(sq)
    index = index or _ShadowIndex(tree, cover.level, cover.sight)
    hit, _ = index.first_hit(z)
    if hit is None:
        raise CertificationFailure(sq, reason="its witness ray hits nothing")
    ix, iy = index.cells[hit].tolist()
    if (ix, iy) != (sq.ix, sq.iy):
        raise CertificationFailure(sq, DyadicSquare(cover.level, ix, iy, cover.M))

    return sight_ray(cover.sight, z, cover.M)


def _oracle(tree, n, sight, rays, index):

    if rays < 1:
        raise OutsideDomain(rays, "at least one ray")
    if sight.kind == LineSight.kind:
        extent = project_root(sight.direction)
        lo, width = extent[0], extent[1] - extent[0]
    else:
        arc = shadow_arc(ROOT, sight.x)
        lo, width = arc.lo, arc.length

    found, skipped = set(), 0
    for i in range(rays):
        z = lo + Fraction((2 * i + 1) * width, 2 * rays)
        hit, ambiguous = index.first_hit(z)
        if hit is None:
            continue
        if ambiguous:
            skipped += 1
            continue
        found.add(tuple(index.cells[hit].tolist()))
    if skipped:
        logger.warning(f"{skipped} grazing oracle rays of {sight} skipped")

    return {DyadicSquare(n, ix, iy, tree.M) for ix, iy in found}, skipped


def project_root(t):
    """The exact shadow extent of the unit square along a direction"""
    a, b = t
    offsets = (0, -b, a, a - b)

    return Fraction(min(offsets)), Fraction(max(offsets))


def ray_cast_oracle(tree, n, sight, R):
    """Get the squares first hit by R rays spread evenly over the shadow of
    the unit square

    Ray i sits at lo + (2i + 1) W / (2R), so the rays of R are among the
    rays of 3R. Rays that graze a square or enter two squares at once are
    skipped, which makes the result a subset of the visible cover.
    """
    if not 0 <= n <= tree.depth:
        raise LevelOutOfRange(n, 0, tree.depth)
    found, _ = _oracle(tree, n, sight, R, _ShadowIndex(tree, n, sight))

    return found


def certify(cover, tree, rays=None):
    """Verify every witness ray of a cover and, with rays, that the ray-cast
    oracle sees only marked squares

    Returns
    -------
    dict
        a summary of the checks

    Raises
    ------
    CertificationFailure
        raised at the first failed check
    """
    _check_level(cover, tree, None)
    if cover.M != tree.M:
        raise OutsideDomain(cover.M, f"cover base differs from tree base {tree.M}")
    n = cover.level
    retained = np.isin(cell_codes(cover.marked, n, cover.M), tree.codes(n))
    if not retained.all():
        ix, iy = cover.marked[np.argmin(retained)].tolist()
        raise CertificationFailure(
            DyadicSquare(n, ix, iy, cover.M), reason="square is not retained"
        )

    index = _ShadowIndex(tree, n, cover.sight)
    for sq in cover.squares:
        witness_ray(cover, sq, tree, index=index)

    summary = {
        "sight": str(cover.sight),
        "level": n,
        "witnesses": len(cover),
        "rays": rays or 0,
        "oracle": None,
        "skipped": 0,
        "complete": None,
    }
    if not rays:
        return summary

    found, skipped = _oracle(tree, n, cover.sight, rays, index)
    unmarked = sorted(sq for sq in found if sq not in cover)
    if unmarked:
        raise CertificationFailure(unmarked[0], reason="seen by the oracle")
    summary.update(
        oracle=len(found), skipped=skipped, complete=len(found) == len(cover)
    )

    return summary
