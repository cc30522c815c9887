import logging

from .exceptions import (
    CertificationFailure,
    FracvisError,
    InvalidConfig,
    InvalidParameters,
    LevelOutOfRange,
    MalformedFile,
    OutsideDomain,
    UsageError,
)
from .exactgeom import DirectionSpec, Viewpoint
from .grid import DyadicSquare, PercParams, PercolationTree, generate
from .laboratory import Laboratory
from .montecarlo import ExperimentConfig, ExperimentReport, run
from .visibility import LineSight, PointSight, VisibleCover, certify, visible_from

logging.basicConfig(level=logging.INFO, format="%(message)s")

logger = logging.getLogger(__name__)

laboratory = Laboratory()
