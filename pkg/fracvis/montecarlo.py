import json
import logging
import math
import time
from collections import Counter, namedtuple
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pandas as pd
from scipy.stats import binomtest, norm
from tqdm import tqdm

from .analysis import (
    ScalingTable,
    corner_mask,
    count_corner_triples,
    count_passed,
    default_stripe_epsilon,
    dim_slope,
    direction_grid,
    first_bounded_scale,
    is_block,
    line_slope_sign,
    projection_coverage,
    projection_measure,
    radial_coverage,
    stripe_cover_count,
    stripe_decomposition,
    stripe_epsilon_bound,
    stripe_squares,
    theoretical_dim,
    visible_length_estimate,
    visibility_threshold,
)
from .config import (
    BLOCK_EXTRA_DEPTH,
    EXPERIMENT_DEFAULTS,
    EXPERIMENT_KINDS,
    MIN_BUCKET_SAMPLES,
    MIN_SURVIVORS,
    TABLE_COLUMNS,
    worker_count,
)
from .datafile import load_document, save_document, write_table
from .exactgeom import DirectionSpec, Viewpoint
from .exceptions import FracvisError, InvalidConfig, MalformedFile, OutsideDomain
from .grid import DyadicSquare, PercParams, generate, is_extinct, survives_to
from .utils import format_fraction, get_extended_name, to_fraction
from .visibility import (
    LineSight,
    PointSight,
    in_diagonal_region,
    visible_from,
    visible_from_line,
)

logger = logging.getLogger(__name__)

# oracle probabilities are rounded to this many bits once they outgrow it
ORACLE_BITS = 512


def _converted(key, convert, value):

    try:
        return convert(value)
    except (FracvisError, TypeError, ValueError, ZeroDivisionError) as e:
        raise InvalidConfig(key, str(e)) from None


def _integer(value, lowest=0):

    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError(f"{value!r} is not an integer")
    if value < lowest:
        raise ValueError(f"{value} is below {lowest}")

    return value


def _line(value):

    (x1, y1), (x2, y2) = value
    line = ((to_fraction(x1), to_fraction(y1)), (to_fraction(x2), to_fraction(y2)))
    if line[0] == line[1]:
        raise ValueError("the two points of a line coincide")

    return line


def _window(value):

    if value is None:
        return None
    lo, hi = (float(x) for x in value)
    if not lo < hi:
        raise ValueError(f"[{lo}, {hi}] is an empty window")

    return (lo, hi)


def _window_list(window):

    return None if window is None else list(window)


def default_lines(depth, M=2, count=20):
    """Get near-horizontal lines through the unit square

    Each line rises by less than M^-depth / 4 across the square and never
    meets a grid vertex, so with p = 1 it passes M^k or M^k - 1 squares of
    every level k <= depth.
    """
    rise = 41 * M ** (depth + 1)
    lines = []
    for j in range(count):
        y0 = Fraction(10 + 3 * j, 71)
        lines.append(((Fraction(0), y0), (Fraction(1), y0 + Fraction(2 * j - 19, rise))))

    return lines


class ExperimentConfig:
    """The configuration of a Monte Carlo experiment

    Missing keys take the values of EXPERIMENT_DEFAULTS.
    """

    def __init__(self, kind, p, **options):
        """
        Parameters
        ----------
        kind : str
            One of EXPERIMENT_KINDS
        p : Fraction, float, str or list
            The retention probability or probabilities
        options
            The other keys of EXPERIMENT_DEFAULTS

        Raises
        ------
        InvalidConfig
            raised when a key is unknown or a value is not valid
        """
        if kind not in EXPERIMENT_KINDS:
            raise InvalidConfig("kind", f"{kind!r} is not one of {EXPERIMENT_KINDS}")
        unknown = sorted(set(options) - set(EXPERIMENT_DEFAULTS))
        if unknown:
            raise InvalidConfig(unknown[0], "unknown key")
        values = {**EXPERIMENT_DEFAULTS, **options}

        self.kind = kind
        p = p if isinstance(p, (list, tuple)) else [p]
        self.p = _converted("p", lambda v: [to_fraction(x) for x in v], p)
        if not self.p or not all(0 < x <= 1 for x in self.p):
            raise InvalidConfig("p", "probabilities must be in (0, 1]")
        self.M = _converted("M", lambda v: _integer(v, 2), values["M"])
        self.depth = _converted("depth", _integer, values["depth"])
        self.trials = _converted("trials", lambda v: _integer(v, 1), values["trials"])
        self.seed = _converted("seed", _integer, values["seed"])
        if self.seed >= 1 << 64:
            raise InvalidConfig("seed", "seed must fit in 64 unsigned bits")
        self.directions = _converted(
            "directions", lambda v: [DirectionSpec(*d) for d in v], values["directions"]
        )
        self.viewpoints = _converted(
            "viewpoints", lambda v: [Viewpoint(*x) for x in v], values["viewpoints"]
        )
        self.direction_bounds = _converted(
            "direction_bounds",
            lambda v: [_integer(b, 1) for b in v],
            values["direction_bounds"],
        )
        self.epsilon = _converted("epsilon", to_fraction, values["epsilon"])
        if not 0 < self.epsilon < Fraction(1, 2):
            raise InvalidConfig("epsilon", "epsilon must be in (0, 1/2)")
        block_depth = values["block_depth"]
        self.block_depth = (
            None
            if block_depth is None
            else _converted("block_depth", _integer, block_depth)
        )
        for key in ("depths", "levels", "m_values"):
            setattr(
                self,
                key,
                _converted(key, lambda v: sorted(_integer(x) for x in v), values[key]),
            )
        k_range = values["k_range"]
        self.k_range = (
            None
            if k_range is None
            else _converted("k_range", lambda v: tuple(_integer(k) for k in v), k_range)
        )
        eta = values["eta"]
        self.eta = None if eta is None else _converted("eta", float, eta)
        if self.eta is not None and not 0 < self.eta < 1:
            raise InvalidConfig("eta", "eta must be in (0, 1)")
        self.lines = _converted("lines", lambda v: [_line(x) for x in v], values["lines"])
        step = values["step"]
        self.step = None if step is None else _converted("step", lambda v: _integer(v, 1), step)
        self.zeta_max = _converted("zeta_max", float, values["zeta_max"])
        if not 0 < self.zeta_max <= 1:
            raise InvalidConfig("zeta_max", "zeta_max must be in (0, 1]")
        self.median_ratio_max = _converted(
            "median_ratio_max", float, values["median_ratio_max"]
        )
        if self.median_ratio_max <= 1:
            raise InvalidConfig("median_ratio_max", "the ratio bound must exceed 1")
        self.growth_min = _converted("growth_min", float, values["growth_min"])
        if self.growth_min <= 0:
            raise InvalidConfig("growth_min", "the growth bound must be positive")
        for key in ("dimension_window", "visible_window"):
            setattr(self, key, _converted(key, _window, values[key]))
        self.output = values["output"]

        try:
            PercParams(self.p[0], self.M, self.tree_depth, self.seed)
        except FracvisError as e:
            raise InvalidConfig("depth", str(e)) from None
        self._check_kind()

    def __repr__(self):

        return f"ExperimentConfig({self.kind!r}, p={[format_fraction(x) for x in self.p]})"

    def __eq__(self, other):

        if not isinstance(other, ExperimentConfig):
            return NotImplemented

        return self.as_dict() == other.as_dict()

    def _check_kind(self):
        """Check the keys used by this kind of experiment"""
        kind = self.kind
        if kind in ("dimension", "visible_dimension"):
            lo, hi = self.slope_range
            if not (0 <= lo and hi <= self.depth and hi - lo >= 2):
                raise InvalidConfig("k_range", f"({lo}, {hi}) is not inside [0, depth]")
        if kind == "visible_dimension" and not (self.directions or self.viewpoints):
            raise InvalidConfig("directions", "no sight to look from")
        if kind in ("corner", "block", "stripe_length"):
            if not self.directions:
                raise InvalidConfig("directions", "at least one direction is needed")
            axes = [tuple(d) for d in self.directions if d.axis_aligned]
            if axes:
                raise InvalidConfig("directions", f"{axes[0]} has no stripes")
        if kind in ("corner", "block") and self.depth < 2:
            raise InvalidConfig("depth", "stripes need a depth of at least 2")
        if kind == "block" and self.block_level < self.depth:
            raise InvalidConfig("block_depth", "the block level is above the depth")
        if kind == "stripe_length":
            if not self.levels or self.levels[0] < 2 or self.levels[-1] > self.depth:
                raise InvalidConfig("levels", f"levels must be in [2, {self.depth}]")
        if kind == "coverage":
            if not self.depths or self.depths[-1] > self.depth:
                raise InvalidConfig("depths", f"depths must be in [0, {self.depth}]")
        if kind == "corner" and not self.m_values:
            raise InvalidConfig("m_values", "at least one length is needed")

    def as_dict(self):
        """Get the canonical JSON-ready dict of this configuration"""
        return {
            "kind": self.kind,
            "p": [format_fraction(x) for x in self.p],
            "M": self.M,
            "depth": self.depth,
            "trials": self.trials,
            "seed": self.seed,
            "directions": [d.as_list() for d in self.directions],
            "viewpoints": [x.as_list() for x in self.viewpoints],
            "direction_bounds": list(self.direction_bounds),
            "epsilon": format_fraction(self.epsilon),
            "block_depth": self.block_depth,
            "depths": list(self.depths),
            "levels": list(self.levels),
            "k_range": None if self.k_range is None else list(self.k_range),
            "m_values": list(self.m_values),
            "eta": self.eta,
            "lines": [
                [[format_fraction(c) for c in point] for point in line]
                for line in self.lines
            ],
            "step": self.step,
            "zeta_max": self.zeta_max,
            "median_ratio_max": self.median_ratio_max,
            "growth_min": self.growth_min,
            "dimension_window": _window_list(self.dimension_window),
            "visible_window": _window_list(self.visible_window),
            "output": self.output,
        }

    @classmethod
    def from_dict(cls, data):
        """Build a configuration from a JSON dict"""
        data = dict(data)
        data.pop("format", None)
        for key in ("kind", "p"):
            if key not in data:
                raise InvalidConfig(key, "missing key")
        kind = data.pop("kind")
        p = data.pop("p")

        return cls(kind, p, **data)

    @classmethod
    def from_file(cls, path):
        """Read a configuration file

        Raises
        ------
        MalformedFile
            raised when the file cannot be read
        InvalidConfig
            raised when the configuration is not valid
        """
        return cls.from_dict(load_document(path))

    @property
    def slope_range(self):
        """The levels of the dimension fits, by default the deeper half"""
        if self.k_range is not None:
            return self.k_range
        return (self.depth // 2, self.depth)

    @property
    def block_level(self):
        """The level probed by the block tests of the block experiment"""
        if self.block_depth is not None:
            return self.block_depth
        return self.depth + BLOCK_EXTRA_DEPTH

    @property
    def tree_depth(self):
        """The depth of the generated trees"""
        if self.kind == "block":
            return max(self.depth, self.block_level)
        return self.depth

    @property
    def sights(self):
        """The line sights of the directions then the point sights"""
        return [LineSight(d, 1) for d in self.directions] + [
            PointSight(x) for x in self.viewpoints
        ]

    @property
    def passed_lines(self):
        """The lines of the passed counts experiment"""
        return self.lines or default_lines(self.depth, self.M)


Aggregate = namedtuple("Aggregate", ["estimate", "stderr", "n", "ci_low", "ci_high"])


def wilson_interval(successes, n, confidence=0.95):
    """Get the Wilson score interval of a binomial proportion"""
    if n == 0:
        raise OutsideDomain(n, "no samples")
    ci = binomtest(int(successes), int(n)).proportion_ci(
        confidence_level=confidence, method="wilson"
    )

    return max(0.0, float(ci.low)), min(1.0, float(ci.high))


def proportion(successes, n, confidence=0.95):
    """Summarize successes out of n trials with a Wilson interval"""
    estimate = successes / n if n else 0.0
    lo, hi = wilson_interval(successes, n, confidence)
    stderr = math.sqrt(estimate * (1 - estimate) / n)

    return Aggregate(estimate, stderr, n, lo, hi)


def aggregate(values, kind="mean", confidence=0.95):
    """Summarize per-trial values

    Parameters
    ----------
    values : iterable
        Numbers for a mean, booleans or 0/1 for a proportion
    kind : str, optional
        'mean' gives a normal interval, 'proportion' a Wilson interval

    Raises
    ------
    OutsideDomain
        raised when there are no values or the kind is unknown
    """
    values = np.asarray(list(values), dtype=float)
    n = len(values)
    if n == 0:
        raise OutsideDomain(n, "no values to aggregate")
    if kind == "proportion":
        return proportion(int(values.sum()), n, confidence)
    if kind == "mean":
        estimate = float(values.mean())
        stderr = float(values.std(ddof=1)) / math.sqrt(n) if n > 1 else 0.0
        z = norm.ppf(0.5 + confidence / 2)
        lo, hi = estimate - z * stderr, estimate + z * stderr
    else:
        raise OutsideDomain(kind, "kind must be 'mean' or 'proportion'")

    return Aggregate(estimate, stderr, n, lo, hi)


def extinction_oracle(p, M, n):
    """Get P(C_n is empty) from q_0 = 0 and q_{j+1} = (1 - p + p q_j)^(M^2)

    The value is exact while its denominator fits in ORACLE_BITS bits and
    rounded to that many bits afterwards.
    """
    p = to_fraction(p)
    if not 0 < p <= 1:
        raise OutsideDomain(p, "p must be in (0, 1]")
    unit = 1 << ORACLE_BITS
    q = Fraction(0)
    for _ in range(n):
        q = (1 - p + p * q) ** (M * M)
        if q.denominator.bit_length() > ORACLE_BITS:
            q = Fraction(round(q * unit), unit)

    return q


def extinction_limit(p, M=2, tol=1e-15):
    """Get the probability of eventual extinction, the smallest fixed point
    of q = (1 - p + p q)^(M^2)
    """
    p = float(to_fraction(p))
    if p * M * M <= 1:
        return 1.0
    q = 0.0
    for _ in range(100000):
        nxt = (1 - p + p * q) ** (M * M)
        if abs(nxt - q) < tol:
            return nxt
        q = nxt

    return q


def growth_step(p, M=2, limit=64):
    """The smallest s with (M^s - 1) p^s > 2, or None up to limit"""
    p = to_fraction(p)
    for s in range(1, limit + 1):
        if (M**s - 1) * p**s > 2:
            return s

    return None


def trial_seeds(seed, trials):
    """Derive the tree seed of every trial from the master seed"""
    return [
        int(np.random.SeedSequence([seed, i]).generate_state(1, np.uint64)[0])
        for i in range(trials)
    ]


def _stripe_epsilon(config, d):
    """The configured epsilon when the direction allows it"""
    if config.epsilon < stripe_epsilon_bound(d):
        return config.epsilon
    return default_stripe_epsilon(d)


def _tree(config, p, seed):

    return generate(PercParams(p, config.M, config.tree_depth, seed))


def _extinction_trial(config, p, seed):

    params = PercParams(p, config.M, config.depth, seed)

    return {"extinct": not survives_to(params, config.depth)}


def _dimension_trial(config, p, seed):

    tree = _tree(config, p, seed)
    if is_extinct(tree, config.depth):
        return {"extinct": True}
    fit = dim_slope(ScalingTable.from_tree(tree), config.slope_range)

    return {"extinct": False, "slope": fit.slope}


def _visible_dimension_trial(config, p, seed):

    tree = _tree(config, p, seed)
    n = config.depth
    if is_extinct(tree, n):
        return {"extinct": True}
    k_range = config.slope_range
    result = {
        "extinct": False,
        "slope": dim_slope(ScalingTable.from_tree(tree), k_range).slope,
        "sights": {},
        "grids": {},
    }
    for sight in config.sights:
        cover = visible_from(tree, n, sight)
        table = ScalingTable.from_cover(cover)
        power = 2 if sight.kind == "line" else 3
        result["sights"][str(sight)] = {
            "slope": dim_slope(table, k_range).slope,
            "length": len(cover) / config.M**n,
            "first_scale": first_bounded_scale(table, lambda k: k**power, config.M),
        }
    for bound in config.direction_bounds:
        slopes = [
            dim_slope(ScalingTable.from_cover(visible_from_line(tree, n, d)), k_range).slope
            for d in direction_grid(bound)
        ]
        result["grids"][str(bound)] = float(np.mean(slopes))

    return result


def _corner_trial(config, p, seed):

    tree = _tree(config, p, seed)
    n = config.depth
    if is_extinct(tree, n):
        return {"extinct": True}
    sequences = []
    for d in config.directions:
        for I in stripe_decomposition(d, 1, n, _stripe_epsilon(config, d), config.M):
            process = stripe_squares(tree, n, d, 1, I)
            if len(process.c_cells):
                sequences.append(process.z.astype(int).tolist())

    return {"extinct": False, "sequences": sequences}


def _block_trial(config, p, seed):

    tree = _tree(config, p, seed)
    n, m, M = config.depth, config.block_level, config.M
    if is_extinct(tree, n):
        return {"extinct": True}
    cells = tree.cells(n)
    result = {"extinct": False, "blocks": {}, "Y": []}
    for d in config.directions:
        others = cells[~corner_mask(cells, M, line_slope_sign(d))]
        parents, counts = np.unique(others // (M * M), axis=0, return_counts=True)
        hits = 0
        for (px, py), count in zip(parents.tolist(), counts.tolist()):
            if is_block(tree, DyadicSquare(n - 2, px, py, M), d, m):
                hits += count
        result["blocks"][str(LineSight(d))] = [hits, int(counts.sum())]
    d = config.directions[0]
    blocks = {}
    for I in stripe_decomposition(d, 1, n, _stripe_epsilon(config, d), M):
        count = stripe_cover_count(tree, n, d, 1, I, m, blocks)
        if len(count.process.c_cells):
            result["Y"].append(count.Y)

    return result


def _stripe_length_trial(config, p, seed):

    tree = _tree(config, p, seed)
    d = config.directions[0]
    rows = []
    for n in config.levels:
        if is_extinct(tree, n):
            rows.append({"n": n, "extinct": True})
            continue
        m = min(n + BLOCK_EXTRA_DEPTH, config.depth)
        estimate = visible_length_estimate(tree, n, d, 1, _stripe_epsilon(config, d), m)
        cover = visible_from_line(tree, n, d)
        rows.append(
            {
                "n": n,
                "extinct": False,
                "estimate": estimate.estimate,
                "S": estimate.S,
                "visible": len(cover) / config.M**n,
            }
        )

    return {"levels": rows}


def _coverage_trial(config, p, seed):

    tree = _tree(config, p, seed)
    covered = {}
    for sight in config.sights:
        if sight.kind == "line":
            check = projection_coverage
            target = sight.d
        else:
            check = radial_coverage
            target = sight.x
        covered[str(sight)] = [
            bool(check(tree, m, target, config.epsilon)) for m in config.depths
        ]
    measures = {
        str(LineSight(d)): projection_measure(tree, config.depths[-1], d).normalized
        for d in config.directions
    }

    return {"covered": covered, "measure": measures}


def _passed_counts_trial(config, p, seed):

    tree = _tree(config, p, seed)

    return {
        "counts": [
            [count_passed(tree, k, line) for k in range(config.depth + 1)]
            for line in config.passed_lines
        ]
    }


_TRIALS = {
    "extinction": _extinction_trial,
    "dimension": _dimension_trial,
    "visible_dimension": _visible_dimension_trial,
    "corner": _corner_trial,
    "block": _block_trial,
    "stripe_length": _stripe_length_trial,
    "coverage": _coverage_trial,
    "passed_counts": _passed_counts_trial,
}


@lru_cache(maxsize=4)
def _config_from_text(text):

    return ExperimentConfig.from_dict(json.loads(text))


def _run_trial(task):
    """Run one trial in a worker: (config JSON, p, seed)"""
    text, p, seed = task
    config = _config_from_text(text)

    return _TRIALS[config.kind](config, to_fraction(p), seed)


def _map(tasks, workers, verbose, desc):
    """Run the trials in order, in worker processes when there are several"""
    if workers <= 1 or len(tasks) <= 1:
        return [_run_trial(t) for t in tqdm(tasks, desc=desc, disable=not verbose)]
    chunksize = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(
            tqdm(
                pool.map(_run_trial, tasks, chunksize=chunksize),
                total=len(tasks),
                desc=desc,
                disable=not verbose,
            )
        )


class _Findings:
    """Accumulates the cells, tables, summaries and audits of a run"""

    def __init__(self):

        self.cells = []
        self.tables = {}
        self.summary = {}
        self.audits = []

    def cell(self, p, label, agg):

        self.cells.append(
            {
                "p": format_fraction(p),
                "cell": label,
                "estimate": agg.estimate,
                "stderr": agg.stderr,
                "n": agg.n,
                "ci_low": agg.ci_low,
                "ci_high": agg.ci_high,
            }
        )

    def audit(self, name, p, violations, **detail):

        self.audits.append(
            {"audit": name, "p": format_fraction(p), "violations": int(violations), **detail}
        )
        if violations:
            logger.warning(f"audit '{name}' failed for p={format_fraction(p)}: {detail}")

    def row(self, table, row):

        self.tables.setdefault(table, []).append(row)

    def note(self, p, key, value):

        self.summary.setdefault(format_fraction(p), {})[key] = value


def _survivors(config, p, results, findings):
    """Keep the surviving trials and record the discard rate"""
    alive = [r for r in results if not r.get("extinct")]
    findings.note(p, "survivors", len(alive))
    findings.note(p, "discard_rate", 1 - len(alive) / len(results))
    if len(alive) < MIN_SURVIVORS:
        logger.warning(
            f"only {len(alive)} surviving trees for p={format_fraction(p)}, "
            f"fewer than {MIN_SURVIVORS}"
        )
        findings.note(p, "insufficient", True)

    return alive


def _summarize_extinction(config, p, results, findings):

    extinct = [r["extinct"] for r in results]
    agg = aggregate(extinct, "proportion")
    findings.cell(p, "extinction", agg)
    oracle = float(extinction_oracle(p, config.M, config.depth))
    stderr = math.sqrt(oracle * (1 - oracle) / len(extinct))
    deviation = abs(agg.estimate - oracle)
    findings.note(p, "oracle", oracle)
    findings.note(p, "limit", extinction_limit(p, config.M))
    findings.note(p, "deviation", deviation / stderr if stderr else 0.0)
    violated = deviation > 4 * stderr if stderr else deviation > 0
    findings.audit("extinction_oracle", p, int(violated), oracle=oracle)


def _summarize_dimension(config, p, results, findings):

    alive = _survivors(config, p, results, findings)
    findings.note(p, "theoretical", theoretical_dim(p, config.M))
    if not alive:
        return
    agg = aggregate(r["slope"] for r in alive)
    findings.cell(p, "dimension", agg)
    if config.dimension_window is not None:
        _audit_window(
            findings, "dimension_window", p, [agg.estimate], config.dimension_window
        )


def _audit_window(findings, name, p, values, window):
    """Count the values outside of the inclusive window"""
    lo, hi = window
    outside = [v for v in values if not lo <= v <= hi]
    findings.audit(name, p, len(outside), window=list(window), outside=outside)


def _summarize_visible_dimension(config, p, results, findings):

    alive = _survivors(config, p, results, findings)
    dim = theoretical_dim(p, config.M)
    findings.note(p, "theoretical", dim)
    findings.note(p, "above_threshold", p > visibility_threshold(config.M))
    if not alive:
        return
    findings.cell(p, "dimension", aggregate(r["slope"] for r in alive))
    regions = {True: [], False: []}
    line_slopes = []
    for sight in config.sights:
        label = str(sight)
        values = [r["sights"][label] for r in alive]
        slope = aggregate(v["slope"] for v in values)
        findings.cell(p, f"slope {label}", slope)
        if sight.kind == "line":
            line_slopes.append(slope.estimate)
        findings.cell(p, f"length {label}", aggregate(v["length"] for v in values))
        scales = [v["first_scale"] for v in values]
        bounded = [k for k in scales if k is not None]
        findings.note(p, f"first_scale {label}", max(bounded) if bounded else None)
        findings.note(p, f"unbounded {label}", len(scales) - len(bounded))
        if sight.kind == "line":
            gaps = [r["slope"] - v["slope"] for r, v in zip(alive, values)]
            findings.cell(p, f"gap {label}", aggregate(gaps))
        else:
            regions[in_diagonal_region(sight.x)].extend(v["length"] for v in values)
    for diagonal, lengths in regions.items():
        if lengths:
            name = "diagonal" if diagonal else "other"
            findings.cell(p, f"point length {name}", aggregate(lengths))
    for bound in config.direction_bounds:
        findings.cell(p, f"grid {bound}", aggregate(r["grids"][str(bound)] for r in alive))
    if config.visible_window is not None and line_slopes:
        mean = float(np.mean(line_slopes))
        _audit_window(findings, "visible_window", p, [mean], config.visible_window)


def _summarize_corner(config, p, results, findings):

    alive = _survivors(config, p, results, findings)
    triples = sum(
        count_corner_triples(k, d, 1, _stripe_epsilon(config, d), config.M)
        for k in range(2, config.depth + 1)
        for d in config.directions
    )
    findings.audit("corner_triples", p, triples)
    sequences = [z for r in alive for z in r["sequences"]]
    histories = Counter()
    corners = Counter()
    for z in sequences:
        x = 0
        for value in z:
            histories[x] += 1
            corners[x] += value
            x += value
    zeta = None
    above = []
    for x in sorted(histories):
        frequency = corners[x] / histories[x]
        findings.row("buckets", [format_fraction(p), x, histories[x], frequency])
        if histories[x] >= MIN_BUCKET_SAMPLES:
            zeta = frequency if zeta is None else max(zeta, frequency)
            if frequency > config.zeta_max:
                above.append(x)
    findings.note(p, "zeta", zeta)
    if zeta is None:
        logger.warning(f"no history bucket with {MIN_BUCKET_SAMPLES} samples")
        return
    findings.audit("zeta_bound", p, len(above), zeta=zeta, buckets=above)
    if zeta >= 1:
        logger.warning(f"zeta is {zeta}, the Azuma check is skipped")
        return
    eta = config.eta if config.eta is not None else (1 - zeta) / 2
    findings.note(p, "eta", eta)
    violations = 0
    for m in config.m_values:
        long_enough = [z for z in sequences if len(z) >= m]
        if not long_enough:
            findings.note(p, f"azuma {m}", None)
            continue
        exceed = [sum(z[:m]) > (zeta + eta) * m for z in long_enough]
        agg = aggregate(exceed, "proportion")
        bound = math.exp(-eta * eta * m / 2)
        findings.cell(p, f"azuma {m}", agg)
        findings.note(p, f"azuma bound {m}", bound)
        violations += agg.estimate > bound + 4 * agg.stderr
    findings.audit("azuma", p, violations, eta=eta)


def _survival_decay(values):
    """Fit log P(Y >= i) against i and return exp of the slope"""
    values = np.asarray(values)
    levels = np.arange(1, values.max() + 1)
    survival = np.array([(values >= i).mean() for i in levels])
    keep = survival > 0
    if keep.sum() < 2:
        return None, levels, survival
    slope, _ = np.polyfit(levels[keep], np.log(survival[keep]), 1)

    return math.exp(slope), levels, survival


def _audit_positive(findings, name, p, successes, n, **detail):
    """Fail unless the Wilson lower bound of successes out of n is positive"""
    if not n:
        findings.audit(name, p, 1, successes=successes, n=n, ci_low=None, **detail)
        return
    lo, _ = wilson_interval(successes, n)
    findings.audit(name, p, int(lo <= 0), successes=successes, n=n, ci_low=lo, **detail)


def _summarize_block(config, p, results, findings):

    alive = _survivors(config, p, results, findings)
    if not alive:
        return
    pooled = [0, 0]
    for sight in (str(LineSight(d)) for d in config.directions):
        hits = sum(r["blocks"][sight][0] for r in alive)
        total = sum(r["blocks"][sight][1] for r in alive)
        pooled[0] += hits
        pooled[1] += total
        if total:
            findings.cell(p, f"block {sight}", proportion(hits, total))
    _audit_positive(findings, "block_positive", p, *pooled)
    if pooled[1]:
        findings.note(p, "block_frequency", pooled[0] / pooled[1])
    values = [y for r in alive for y in r["Y"]]
    if not values:
        return
    findings.cell(p, "Y", aggregate(values))
    decay, levels, survival = _survival_decay(values)
    for i, s in zip(levels.tolist(), survival.tolist()):
        findings.row("tail", [format_fraction(p), i, s])
    findings.note(p, "decay_rate", decay)
    if decay is not None:
        findings.audit("tail_decay", p, int(decay >= 1), decay_rate=decay)


def _summarize_stripe_length(config, p, results, findings):

    medians = {"estimate": [], "visible": []}
    violations = 0
    for j, n in enumerate(config.levels):
        rows = [r["levels"][j] for r in results if not r["levels"][j]["extinct"]]
        findings.note(p, f"survivors {n}", len(rows))
        if not rows:
            continue
        estimates = [row["estimate"] for row in rows]
        visible = [row["visible"] for row in rows]
        findings.cell(p, f"estimate {n}", aggregate(estimates))
        findings.cell(p, f"visible {n}", aggregate(visible))
        medians["estimate"].append(float(np.median(estimates)))
        medians["visible"].append(float(np.median(visible)))
        findings.note(p, f"median {n}", medians["estimate"][-1])
        findings.note(p, f"median visible {n}", medians["visible"][-1])
        violations += sum(e < v / 4 for e, v in zip(estimates, visible))
    findings.audit("stripe_dominance", p, violations)

    ratios = {}
    for name, values in medians.items():
        if len(values) < 2:
            continue
        ratios[name] = max(values) / min(values) if min(values) > 0 else math.inf
    for name, ratio in ratios.items():
        findings.note(p, f"median_ratio {name}", ratio)
    if ratios:
        above = sorted(name for name, r in ratios.items() if r >= config.median_ratio_max)
        findings.audit("stripe_median_ratio", p, len(above), series=above)


def _summarize_coverage(config, p, results, findings):

    violations = 0
    for sight in config.sights:
        label = str(sight)
        for i, m in enumerate(config.depths):
            flags = [r["covered"][label][i] for r in results]
            findings.cell(p, f"coverage {label} m={m}", aggregate(flags, "proportion"))
        for trial, r in enumerate(results):
            flags = r["covered"][label]
            # covering at a deeper level implies covering above it
            violations += sum(b and not a for a, b in zip(flags, flags[1:]))
            for m, covered in zip(config.depths, flags):
                findings.row(
                    "coverage_trials",
                    [trial, label, m, format_fraction(config.epsilon), covered],
                )
    for sight in (str(LineSight(d)) for d in config.directions):
        findings.cell(p, f"measure {sight}", aggregate(r["measure"][sight] for r in results))
    findings.audit("coverage_monotone", p, violations)
    deepest = [r["covered"][str(sight)][-1] for sight in config.sights for r in results]
    _audit_positive(
        findings, "coverage_positive", p, sum(deepest), len(deepest), m=config.depths[-1]
    )


def _summarize_passed_counts(config, p, results, findings):

    M, n = config.M, config.depth
    step = config.step or growth_step(p, M, n)
    findings.note(p, "step", step)
    ratios = []
    violations = 0
    for trial, r in enumerate(results):
        for line, counts in enumerate(r["counts"]):
            for k, v in enumerate(counts):
                findings.row("passed_trials", [trial, line, k, v])
                if p == 1 and not M**k - 1 <= v <= M**k + 1:
                    violations += 1
            if step is None:
                continue
            ratios.extend(
                counts[k + step] / counts[k]
                for k in range(n - step + 1)
                if counts[k] > 0
            )
    if p == 1:
        findings.audit("passed_full_grid", p, violations)
    if not ratios:
        return
    median = float(np.median(ratios))
    findings.cell(p, f"growth {step}", aggregate(ratios))
    findings.note(p, "median_growth", median)
    # the growth bound holds only for supercritical steps
    if (M**step - 1) * p**step > 2:
        findings.audit(
            "passed_growth",
            p,
            int(median <= config.growth_min),
            median=median,
            step=step,
        )


_SUMMARIES = {
    "extinction": _summarize_extinction,
    "dimension": _summarize_dimension,
    "visible_dimension": _summarize_visible_dimension,
    "corner": _summarize_corner,
    "block": _summarize_block,
    "stripe_length": _summarize_stripe_length,
    "coverage": _summarize_coverage,
    "passed_counts": _summarize_passed_counts,
}


class ExperimentReport:
    """The outcome of a Monte Carlo experiment"""

    def __init__(self, config, findings, seeds, runtime=None):

        self._config = config
        self._cells = pd.DataFrame(findings.cells, columns=TABLE_COLUMNS["cells"])
        self._tables = {
            name: pd.DataFrame(rows, columns=TABLE_COLUMNS[name])
            for name, rows in findings.tables.items()
        }
        self._summary = findings.summary
        self._audits = findings.audits
        self._seeds = seeds
        self._runtime = runtime

    def __repr__(self):

        state = "passed" if self.passed else "failed"

        return f"ExperimentReport({self._config.kind!r}, {len(self._cells)} cells, {state})"

    def to_dict(self):
        """Get the JSON-ready dict of this report

        The runtime is left out so that equal runs give equal files.
        """
        return {
            "config": self._config.as_dict(),
            "cells": self._cells.to_dict(orient="records"),
            "summary": self._summary,
            "audits": self._audits,
            "seeds": self._seeds,
            "passed": self.passed,
        }

    def save(self, path):
        """Write the report as JSON and its tables as CSV files next to it

        Returns
        -------
        list
            The paths of the written files
        """
        paths = [save_document(self.to_dict(), path)]
        paths.append(write_table(self._cells, get_extended_name(path, "cells", ".csv"), "cells"))
        for name, frame in sorted(self._tables.items()):
            paths.append(write_table(frame, get_extended_name(path, name, ".csv"), name))

        return paths

    @property
    def config(self):
        """The configuration of the experiment"""
        return self._config

    @property
    def cells(self):
        """The estimates of every (p, cell) pair"""
        return self._cells

    @property
    def tables(self):
        """The extra tables of the experiment, by name"""
        return self._tables

    @property
    def summary(self):
        """Scalars of the experiment keyed by p"""
        return self._summary

    @property
    def audits(self):
        """The audits and their violation counts"""
        return self._audits

    @property
    def seeds(self):
        """The tree seeds of the trials"""
        return self._seeds

    @property
    def runtime(self):
        """The wall-clock duration in seconds"""
        return self._runtime

    @property
    def passed(self):
        """Whether no audit has a violation"""
        return all(a["violations"] == 0 for a in self._audits)

    def estimate(self, p, cell):
        """Get the estimate of a cell"""
        rows = self._cells[
            (self._cells["p"] == format_fraction(p)) & (self._cells["cell"] == cell)
        ]
        if rows.empty:
            raise KeyError(f"no cell {cell!r} for p={format_fraction(p)}")

        return float(rows["estimate"].iloc[0])


def run(config, workers=None, verbose=False):
    """Run an experiment

    Parameters
    ----------
    config : ExperimentConfig
        The experiment
    workers : int, optional
        The number of worker processes, by default worker_count(); the
        results do not depend on it
    verbose : bool, optional
        Whether a progress bar is shown, by default False

    Returns
    -------
    ExperimentReport
        The cells, tables and audits of the experiment
    """
    start = time.perf_counter()
    workers = worker_count() if workers is None else max(1, int(workers))
    seeds = trial_seeds(config.seed, config.trials)
    text = json.dumps(config.as_dict(), sort_keys=True)
    tasks = [(text, format_fraction(p), seed) for p in config.p for seed in seeds]
    logger.info(
        f"running {len(tasks)} '{config.kind}' trials on {workers} worker(s)"
    )
    results = _map(tasks, workers, verbose, config.kind)

    findings = _Findings()
    for j, p in enumerate(config.p):
        chunk = results[j * config.trials : (j + 1) * config.trials]
        _SUMMARIES[config.kind](config, p, chunk, findings)
    report = ExperimentReport(config, findings, seeds, time.perf_counter() - start)
    logger.info(f"{report} in {report.runtime:.1f}s")

    return report


def load_report(path):
    """Read the JSON part of a saved report"""
    data = load_document(path)
    if "config" not in data or "cells" not in data:
        raise MalformedFile(path, "not an experiment report")

    return data
