import logging
import os
from fractions import Fraction

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

DEFAULT_BASE = 2

# depth above which generation is slow on a desk machine (M=2)
PRACTICAL_DEPTH = 13

# the Philox stream of a tile covers at most this many cells
TILE_CELLS = 1024

BLOCK_EPSILON = Fraction(1, 8)

# a block test for an n-level stripe analysis probes level n + 4
BLOCK_EXTRA_DEPTH = 4

DIRECTION_BOUND = 12

# digits kept when floats are written to files
FLOAT_DIGITS = 10

THREADS_VARIABLE = "FRACVIS_THREADS"

MIN_SURVIVORS = 30

MIN_BUCKET_SAMPLES = 50

# audit thresholds of the Monte Carlo experiments
ZETA_MAX = 0.95
MEDIAN_RATIO_MAX = 2.0
GROWTH_MIN = 1.5

DEFAULT_DIRECTIONS = (
    (1, 1),
    (1, 2),
    (2, 1),
    (1, 3),
    (3, 1),
    (2, 3),
    (-1, 1),
    (1, -2),
)

DEFAULT_VIEWPOINTS = (
    (Fraction(-1), Fraction(-1)),
    (Fraction(2), Fraction(-1)),
    (Fraction(-1), Fraction(2)),
    (Fraction(2), Fraction(2)),
    (Fraction(1, 2), Fraction(-3)),
    (Fraction(-3), Fraction(1, 2)),
    (Fraction(5, 2), Fraction(1, 3)),
    (Fraction(1, 3), Fraction(5, 2)),
)

EXPERIMENT_KINDS = (
    "extinction",
    "dimension",
    "visible_dimension",
    "corner",
    "block",
    "stripe_length",
    "coverage",
    "passed_counts",
)

EXPERIMENT_DEFAULTS = {
    "M": DEFAULT_BASE,
    "depth": 8,
    "trials": 100,
    "seed": 0,
    "directions": [list(d) for d in DEFAULT_DIRECTIONS],
    "viewpoints": [[str(c) for c in x] for x in DEFAULT_VIEWPOINTS],
    "direction_bounds": [],
    "epsilon": "1/8",
    "block_depth": None,
    "depths": [4, 6, 8],
    "levels": [4, 6, 8],
    "k_range": None,
    "m_values": [10, 20, 40],
    "eta": None,
    "lines": [],
    "step": None,
    "zeta_max": ZETA_MAX,
    "median_ratio_max": MEDIAN_RATIO_MAX,
    "growth_min": GROWTH_MIN,
    "dimension_window": None,
    "visible_window": None,
    "output": None,
}

# columns of every CSV table written by fracvis
TABLE_COLUMNS = {
    "scaling": ["k", "N_k"],
    "stripes": ["j", "Q_I", "C_I", "Y", "first_block"],
    "coverage": ["sight", "m", "epsilon", "covered"],
    "passed": ["line", "k", "V_k"],
    "cells": ["p", "cell", "estimate", "stderr", "n", "ci_low", "ci_high"],
    "coverage_trials": ["trial", "sight", "m", "epsilon", "covered"],
    "passed_trials": ["trial", "line", "k", "V_k"],
    "buckets": ["p", "history", "n", "frequency"],
    "tail": ["p", "i", "survival"],
}


def worker_count():
    """Get the number of Monte Carlo workers

    The count is capped by the FRACVIS_THREADS environment variable and
    defaults to the number of CPUs.
    """
    cpus = os.cpu_count() or 1
    value = os.environ.get(THREADS_VARIABLE)
    if not value:
        return cpus
    try:
        cap = int(value)
    except ValueError:
        logger.warning(f"ignoring {THREADS_VARIABLE}={value!r}")
        return cpus

    return max(1, min(cap, cpus))
