import logging
import math
from bisect import bisect_left, bisect_right
from collections import namedtuple
from fractions import Fraction

import numpy as np

from .exceptions import OutsideDomain
from .utils import format_fraction, to_fraction

logger = logging.getLogger(__name__)

# integer arrays switch to python ints above this magnitude
_SAFE_INT = 1 << 62


class DirectionSpec(namedtuple("DirectionSpec", ["a", "b"])):
    """A viewing direction d = (a, b) stored as a reduced integer vector

    Rays travel along d. The shadow axis is d_perp = (-b, a).
    """

    __slots__ = ()

    def __new__(cls, a, b):

        a, b = to_fraction(a), to_fraction(b)
        if a == 0 and b == 0:
            raise OutsideDomain((a, b), "zero direction")
        den = math.lcm(a.denominator, b.denominator)
        ia, ib = int(a * den), int(b * den)
        g = math.gcd(ia, ib)

        return super().__new__(cls, ia // g, ib // g)

    def __neg__(self):

        return DirectionSpec(-self.a, -self.b)

    @classmethod
    def from_text(cls, text):
        """Parse 'a,b' into a direction"""
        parts = text.split(",")
        if len(parts) != 2:
            raise ValueError(f"'{text}' is not a direction 'a,b'")

        return cls(*parts)

    @property
    def perp(self):
        """The shadow axis (-b, a)"""
        return (-self.b, self.a)

    @property
    def axis_aligned(self):
        """Whether d is horizontal or vertical"""
        return self.a == 0 or self.b == 0

    @property
    def width(self):
        """|a| + |b|, the shadow width of a unit square"""
        return abs(self.a) + abs(self.b)

    @property
    def norm2(self):
        """a^2 + b^2"""
        return self.a * self.a + self.b * self.b

    def as_list(self):

        return [self.a, self.b]


class Viewpoint(namedtuple("Viewpoint", ["x1", "x2"])):
    """A rational point outside of the closed unit square"""

    __slots__ = ()

    def __new__(cls, x1, x2):

        x1, x2 = to_fraction(x1), to_fraction(x2)
        if 0 <= x1 <= 1 and 0 <= x2 <= 1:
            raise OutsideDomain((x1, x2), "viewpoint inside the unit square")

        return super().__new__(cls, x1, x2)

    def __repr__(self):

        return f"Viewpoint({format_fraction(self.x1)}, {format_fraction(self.x2)})"

    @classmethod
    def from_text(cls, text):
        """Parse 'x1,x2' into a viewpoint"""
        parts = text.split(",")
        if len(parts) != 2:
            raise ValueError(f"'{text}' is not a point 'x1,x2'")

        return cls(*parts)

    @property
    def reference(self):
        """The direction from the viewpoint to the centre of the unit square"""
        return (Fraction(1, 2) - self.x1, Fraction(1, 2) - self.x2)

    def as_list(self):

        return [format_fraction(self.x1), format_fraction(self.x2)]


class Interval(namedtuple("Interval", ["lo", "hi"])):
    """A closed interval [lo, hi]"""

    __slots__ = ()

    def __new__(cls, lo, hi):

        if hi < lo:
            raise OutsideDomain((lo, hi), "empty interval")

        return super().__new__(cls, lo, hi)

    @property
    def length(self):

        return self.hi - self.lo

    @property
    def midpoint(self):

        return Fraction(self.lo + self.hi, 2)

    def contains(self, z):
        """Check if z lies in this closed interval"""
        return self.lo <= z <= self.hi


def _as_interval(piece):

    return piece if isinstance(piece, Interval) else Interval(*piece)


class IntervalUnion:
    """A canonical union of closed intervals

    The intervals are sorted, pairwise disjoint, and touching intervals are
    merged. Endpoints may be integers or Fractions.
    """

    def __init__(self, intervals=()):
        """
        Parameters
        ----------
        intervals : iterable, optional
            Intervals or (lo, hi) pairs, by default none
        """
        self._lo = []
        self._hi = []
        for piece in intervals:
            self.insert(piece)

    def __len__(self):

        return len(self._lo)

    def __iter__(self):

        return (Interval(lo, hi) for lo, hi in zip(self._lo, self._hi))

    def __eq__(self, other):

        if not isinstance(other, IntervalUnion):
            return NotImplemented

        return self._lo == other._lo and self._hi == other._hi

    def __repr__(self):

        pieces = ", ".join(
            f"[{format_fraction(lo)}, {format_fraction(hi)}]"
            for lo, hi in zip(self._lo, self._hi)
        )

        return f"{self.__class__.__name__}({pieces})"

    @classmethod
    def from_arrays(cls, los, his):
        """Build the union of many intervals given as two numpy arrays"""
        union = cls.__new__(cls)
        union._lo, union._hi = merge_intervals(los, his)

        return union

    def copy(self):

        union = self.__class__.__new__(self.__class__)
        union.__dict__.update(self.__dict__)
        union._lo = list(self._lo)
        union._hi = list(self._hi)

        return union

    def insert(self, piece):
        """Add a closed interval to this union in place"""
        lo, hi = _as_interval(piece)
        # intervals [i, j) overlap or touch the piece
        i = bisect_left(self._hi, lo)
        j = bisect_right(self._lo, hi)
        if i < j:
            lo = min(lo, self._lo[i])
            hi = max(hi, self._hi[j - 1])
        self._lo[i:j] = [lo]
        self._hi[i:j] = [hi]

        return self

    def uncovered(self, piece):
        """Get the closure of piece minus this union

        Only pieces of positive length are kept.
        """
        lo, hi = _as_interval(piece)
        rest = IntervalUnion()
        current = lo
        i = bisect_right(self._hi, lo)
        while i < len(self._lo) and self._lo[i] < hi:
            if self._lo[i] > current:
                rest._lo.append(current)
                rest._hi.append(self._lo[i])
            current = max(current, self._hi[i])
            i += 1
        if current < hi:
            rest._lo.append(current)
            rest._hi.append(hi)

        return rest

    def covers(self, piece):
        """Check if a closed interval lies inside this union"""
        lo, hi = _as_interval(piece)
        i = bisect_left(self._hi, hi)

        return i < len(self._lo) and self._lo[i] <= lo

    def contains(self, z):
        """Check if a point lies in this union"""
        i = bisect_left(self._hi, z)

        return i < len(self._lo) and self._lo[i] <= z

    @property
    def intervals(self):
        """The list of intervals of this union"""
        return list(self)

    @property
    def length(self):
        """The exact total length"""
        return sum((hi - lo for lo, hi in zip(self._lo, self._hi)), 0)

    @property
    def is_empty(self):

        return not self._lo

    def longest(self):
        """Get the first of the longest intervals"""
        best = None
        for piece in self:
            if best is None or piece.length > best.length:
                best = piece

        return best


class ArcUnion(IntervalUnion):
    """A canonical union of direction arcs seen from a viewpoint

    Arcs are intervals of the pseudo-angle around the direction from the
    viewpoint to the centre of the unit square (see 'pseudo_angle').
    """

    def __init__(self, viewpoint, arcs=()):

        self.viewpoint = viewpoint
        super().__init__(arcs)

    def __eq__(self, other):

        if not isinstance(other, ArcUnion):
            return NotImplemented

        return self.viewpoint == other.viewpoint and super().__eq__(other)

    @classmethod
    def from_arrays(cls, los, his, viewpoint=None):

        union = super().from_arrays(los, his)
        union.viewpoint = viewpoint

        return union

    def uncovered(self, piece):

        rest = super().uncovered(piece)
        arcs = ArcUnion(self.viewpoint)
        arcs._lo, arcs._hi = rest._lo, rest._hi

        return arcs


def merge_intervals(los, his):
    """Merge closed intervals given as arrays into sorted disjoint lists"""
    los = np.asarray(los)
    his = np.asarray(his)
    if not len(los):
        return [], []
    order = np.argsort(los, kind="stable")
    los, his = los[order], his[order]
    reach = np.maximum.accumulate(his)
    # a new piece starts where the interval begins after everything before
    starts = np.concatenate(([True], los[1:] > reach[:-1]))
    first = np.nonzero(starts)[0]
    last = np.concatenate((first[1:], [len(los)])) - 1

    return los[first].tolist(), reach[last].tolist()


def _phi(p, q):
    """Pseudo-angle from the dot product p and the cross product q"""
    if q < 0:
        return -_phi(p, -q)
    if p == 0 and q == 0:
        raise OutsideDomain((p, q), "zero vector has no direction")
    t = Fraction(q, abs(p) + q)

    return t if p >= 0 else 2 - t


def pseudo_angle(v, r):
    """Get the exact pseudo-angle of the vector v around the reference r

    The value lies in (-2, 2], is 0 along r, positive counterclockwise, and
    increases with the true angle, so it orders directions exactly.
    """
    v = [to_fraction(c) for c in v]
    r = [to_fraction(c) for c in r]

    return _phi(v[0] * r[0] + v[1] * r[1], r[0] * v[1] - r[1] * v[0])


def direction_at(x, phi):
    """Get a direction from the viewpoint x whose pseudo-angle is phi"""
    r = x.reference
    rperp = (-r[1], r[0])
    phi = to_fraction(phi)
    f = abs(phi)
    if f > 2:
        raise OutsideDomain(phi, "pseudo-angle outside of (-2, 2]")
    p, q = (1 - f, f) if f <= 1 else (1 - f, 2 - f)
    if phi < 0:
        q = -q

    return (p * r[0] + q * rperp[0], p * r[1] + q * rperp[1])


def project_square(sq, d):
    """Get the exact shadow [min, max] of <c, d_perp> over the square corners

    Parameters
    ----------
    sq : DyadicSquare
        The projected square
    d : DirectionSpec
        The viewing direction

    Returns
    -------
    Interval
        The shadow, of width (|a| + |b|) * M^-level
    """
    a, b = d
    base = -b * sq.ix + a * sq.iy
    offsets = (0, -b, a, a - b)

    return Interval(
        (base + min(offsets)) * sq.side, (base + max(offsets)) * sq.side
    )


def cell_shadows(cells, d):
    """Get the lower shadow ends of level cells in grid units

    Each shadow is [lo, lo + d.width].
    """
    a, b = d
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)

    return -b * cells[:, 0] + a * cells[:, 1] + min(0, -b, a, a - b)


def _scaled_viewpoint(x, units):
    """The viewpoint in grid units times its denominator, with that
    denominator
    """
    den = math.lcm(x.x1.denominator, x.x2.denominator)

    return (int(x.x1 * units * den), int(x.x2 * units * den)), den


def _integer_reference(x):

    r = x.reference
    den = math.lcm(r[0].denominator, r[1].denominator)

    return int(r[0] * den), int(r[1] * den)


def _corner_arc(corners, origin, reference):
    """Min and max pseudo-angle of integer corner vectors"""
    rx, ry = reference
    phis = [
        _phi((cx - origin[0]) * rx + (cy - origin[1]) * ry,
             rx * (cy - origin[1]) - ry * (cx - origin[0]))
        for cx, cy in corners
    ]

    return Interval(min(phis), max(phis))


def shadow_arc(sq, x):
    """Get the closed arc of directions from the viewpoint x to the square

    The arc is given in pseudo-angles (see 'pseudo_angle'); its endpoints
    are the directions to two corners of the square.

    Raises
    ------
    OutsideDomain
        raised when x lies in the square
    """
    x0, x1, y0, y1 = sq.bounds
    if x0 <= x.x1 <= x1 and y0 <= x.x2 <= y1:
        raise OutsideDomain(x, f"viewpoint inside {sq}")
    units = sq.base**sq.level
    origin, den = _scaled_viewpoint(x, units)
    corners = [
        ((sq.ix + u) * den, (sq.iy + v) * den) for u in (0, 1) for v in (0, 1)
    ]

    return _corner_arc(corners, origin, _integer_reference(x))


def cell_arcs(cells, level, M, x, scale=Fraction(1)):
    """Get the shadow arcs of level cells seen from x

    With a scale below 1 the arc of the concentric square of that relative
    side is returned instead.
    """
    units = M**level
    origin, den = _scaled_viewpoint(x, units)
    reference = _integer_reference(x)
    scale = to_fraction(scale)
    # corners of the scaled square around the centre, in units of 1/(2 q den)
    q = scale.denominator
    half = scale.numerator
    origin = (origin[0] * 2 * q, origin[1] * 2 * q)
    arcs = []
    for ix, iy in np.asarray(cells).reshape(-1, 2).tolist():
        cx, cy = (2 * ix + 1) * q, (2 * iy + 1) * q
        corners = [
            ((cx + su * half) * den, (cy + sv * half) * den)
            for su in (-1, 1)
            for sv in (-1, 1)
        ]
        arcs.append(_corner_arc(corners, origin, reference))

    return arcs


def union_insert(u, piece):
    """Insert an interval or an arc into a union and return the union"""
    return u.insert(piece)


def uncovered_part(u, piece):
    """Get piece minus the union as a canonical union

    Its 'length' attribute is the total uncovered length.
    """
    return u.uncovered(piece)


Ray = namedtuple("Ray", ["origin", "through", "direction"])
Ray.__doc__ = """An exact ray

origin is None for a ray coming from infinity along direction and passing
through the point 'through'.
"""

RayHit = namedtuple("RayHit", ["square", "entry", "exit", "ambiguous"])
RayHit.__doc__ = """The first square hit by a ray

entry and exit are the ray parameters of the hit; ambiguous is set when
the ray only grazes the square or enters several squares at once.
"""


class IntegerRay(
    namedtuple("IntegerRay", ["origin", "velocity", "scale", "bounded", "factor"])
):
    """The ray (origin + t * velocity) / scale in grid units, with integer
    origin, velocity and scale

    'factor' converts t back to the parameter of the original ray.
    """

    __slots__ = ()


def integer_ray(origin, through, direction, units):
    """Convert an exact ray into grid units of cells of side 1/units

    Raises
    ------
    OutsideDomain
        raised when the ray has no direction
    """
    if origin is None:
        if direction is None:
            raise OutsideDomain(through, "ray without origin nor direction")
        start = [to_fraction(c) * units for c in through]
        velocity = [to_fraction(c) for c in direction]
        bounded = False
    else:
        origin = [to_fraction(c) for c in origin]
        start = [c * units for c in origin]
        velocity = [to_fraction(t) - o for t, o in zip(through, origin)]
        bounded = True
    if velocity[0] == 0 and velocity[1] == 0:
        raise OutsideDomain(velocity, "degenerate ray")

    scale = math.lcm(start[0].denominator, start[1].denominator)
    vden = math.lcm(velocity[0].denominator, velocity[1].denominator)
    vx, vy = int(velocity[0] * vden), int(velocity[1] * vden)
    g = math.gcd(vx, vy)

    return IntegerRay(
        (int(start[0] * scale), int(start[1] * scale)),
        (vx // g, vy // g),
        scale,
        bounded,
        Fraction(vden, g * scale * units),
    )


def slab_entries(ray, lows, sizes):
    """Exact entry and exit parameters of a ray in boxes [low, low + size]

    Returns
    -------
    tuple
        entry and exit numerators, the hit mask and their common positive
        denominator
    """
    lows = np.asarray(lows).reshape(-1, 2)
    sizes = np.asarray(sizes).reshape(-1)
    (ox, oy), (vx, vy), scale = ray.origin, ray.velocity, ray.scale
    dens = (abs(vx) or 1, abs(vy) or 1)
    common = dens[0] * dens[1]
    extent = int(lows.max()) + int(sizes.max()) + 1 if len(lows) else 1
    bound = (scale * extent + max(abs(ox), abs(oy))) * common
    dtype = object if bound >= _SAFE_INT else np.int64
    lows = lows.astype(dtype)
    sizes = sizes.astype(dtype)

    mask = np.ones(len(lows), dtype=bool)
    entry = exit = None
    for axis, (o, v) in enumerate(((ox, vx), (oy, vy))):
        near = scale * lows[:, axis] - o
        far = scale * (lows[:, axis] + sizes) - o
        if v == 0:
            mask &= (near <= 0) & (far >= 0)
            continue
        if v < 0:
            near, far = -far, -near
        other = dens[1 - axis]
        near, far = near * other, far * other
        entry = near if entry is None else np.maximum(entry, near)
        exit = far if exit is None else np.minimum(exit, far)

    mask &= entry <= exit
    if ray.bounded:
        mask &= exit >= 0
        entry = np.maximum(entry, 0)

    return entry, exit, mask, common


def first_hit(ray, lows, sizes, keys):
    """Get the index of the box a ray enters first

    Ties on the entry go to the smallest key row (level, ix, iy).

    Returns
    -------
    tuple or None
        the index, the entry and exit parameters and the ambiguity flag
    """
    if not len(lows):
        return None
    entry, exit, mask, common = slab_entries(ray, lows, sizes)
    hit = np.nonzero(mask)[0]
    if not len(hit):
        return None
    best = entry[hit].min()
    tied = hit[entry[hit] == best]
    if len(tied) > 1:
        tied_keys = np.asarray(keys)[tied]
        tied = tied[np.lexsort(tied_keys.T[::-1])]
    pick = int(tied[0])
    ambiguous = bool(len(tied) > 1 or exit[pick] == entry[pick])

    return (
        pick,
        Fraction(int(best), common) * ray.factor,
        Fraction(int(exit[pick]), common) * ray.factor,
        ambiguous,
    )


def ray_first_hit(origin, through, squares, direction=None):
    """Get the first square hit by an exact ray

    Parameters
    ----------
    origin : pair or None
        The start of the ray, None for a ray coming from infinity
    through : pair
        A point of the ray other than its origin
    squares : list
        The candidate DyadicSquares, of one base but any levels
    direction : DirectionSpec or pair, optional
        The direction of a ray coming from infinity, by default None

    Returns
    -------
    RayHit or None
        The square with the smallest entry parameter, ties broken by
        (level, ix, iy), or None when no square is hit

    Raises
    ------
    OutsideDomain
        raised when the ray is degenerate
    """
    squares = list(squares)
    level = max((sq.level for sq in squares), default=0)
    M = squares[0].base if squares else 2
    ray = integer_ray(origin, through, direction, M**level)
    if not squares:
        return None

    sizes = [M ** (level - sq.level) for sq in squares]
    lows = [(sq.ix * f, sq.iy * f) for sq, f in zip(squares, sizes)]
    keys = [(sq.level, sq.ix, sq.iy) for sq in squares]
    found = first_hit(ray, np.array(lows), np.array(sizes), np.array(keys))
    if found is None:
        return None
    pick, entry, exit, ambiguous = found

    return RayHit(squares[pick], entry, exit, ambiguous)
