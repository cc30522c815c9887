import logging
from pathlib import Path

import pandas as pd

from .analysis import (
    ScalingTable,
    count_passed,
    dim_slope,
    projection_coverage,
    radial_coverage,
    visible_length_estimate,
)
from .config import BLOCK_EXTRA_DEPTH, DEFAULT_BASE
from .datafile import load_cover, load_tree, save_cover, save_tree, write_table
from .exceptions import OutsideDomain
from .grid import PercParams, generate
from .montecarlo import run
from .utils import format_fraction, get_extended_name
from .visibility import certify, visible_from

logger = logging.getLogger(__name__)


class Laboratory:
    """A handler for fractal percolation computations

    Use it to generate trees, compute visible covers and run estimates,
    with their results saved into an output directory.
    """

    def __init__(self, output_dir=None, workers=None, verbose=False):
        """
        Parameters
        ----------
        output_dir : str, optional
            The directory where result files are saved, by default the
            current directory
        workers : int, optional
            The number of Monte Carlo workers, by default worker_count()
        verbose : bool, optional
            Whether progress bars are shown, by default False
        """
        self._dir = Path(output_dir) if output_dir else Path.cwd()
        self._workers = workers
        self._vb = verbose

    def __repr__(self):

        return f"Laboratory({str(self._dir)!r})"

    def _path(self, name):

        return self._dir.joinpath(name)

    def tree(self, p, depth, M=DEFAULT_BASE, seed=0, save_as=None, include_levels=True):
        """Generate a percolation tree

        Parameters
        ----------
        p : Fraction, float or str
            The retention probability
        depth : int
            The deepest level
        save_as : str, optional
            The file name of the saved tree, not saved if None
        include_levels : bool, optional
            Whether the cells are saved or only the parameters

        Returns
        -------
        PercolationTree
            The generated tree
        """
        tree = generate(PercParams(p, M, depth, seed), verbose=self._vb)
        if save_as:
            path = save_tree(tree, self._path(save_as), include_levels)
            logger.info(f"tree saved to {path}")

        return tree

    def load_tree(self, path):
        """Load a tree file"""
        return load_tree(self._path(path))

    def load_cover(self, path):
        """Load a cover file"""
        return load_cover(self._path(path))

    def visible(self, tree, n, sight, method=None, check=True, save_as=None):
        """Compute the squares of C_n meeting the visible part

        Returns
        -------
        VisibleCover
            The cover, saved with its counts when save_as is given
        """
        kwargs = {"check": check}
        if method:
            kwargs["method"] = method
        cover = visible_from(tree, n, sight, **kwargs)
        logger.info(
            f"{len(cover)} of {tree.count(n)} squares of level {n} "
            f"are visible from {cover.sight}"
        )
        if save_as:
            save_cover(cover, self._path(save_as))

        return cover

    def box_dimension(self, source, k_range=None, save_as=None):
        """Fit the box-counting slope of a tree or a cover

        Returns
        -------
        tuple
            The ScalingTable and its SlopeFit
        """
        if hasattr(source, "sight"):
            table = ScalingTable.from_cover(source)
        else:
            table = ScalingTable.from_tree(source)
        fit = dim_slope(table, k_range)
        if save_as:
            write_table(table.frame, self._path(save_as), "scaling")

        return table, fit

    def stripes(self, tree, n, d, side=1, epsilon=None, m=None, save_as=None):
        """Estimate the visible length from a line with stripes

        Returns
        -------
        LengthEstimate
            The estimate, S_n and the per-stripe table
        """
        if m is None:
            m = min(n + BLOCK_EXTRA_DEPTH, tree.depth)
            if m < n + BLOCK_EXTRA_DEPTH:
                logger.warning(f"block level reduced to the tree depth {m}")
        estimate = visible_length_estimate(tree, n, d, side, epsilon, m)
        if save_as:
            write_table(estimate.table, self._path(save_as), "stripes")

        return estimate

    def coverage(self, tree, depths, epsilon, sights, save_as=None):
        """Check the coverage of the carved projections at several depths

        Returns
        -------
        DataFrame
            Rows of sight, m, epsilon and covered
        """
        rows = []
        for sight in sights:
            for m in depths:
                if sight.kind == "line":
                    covered = projection_coverage(tree, m, sight.d, epsilon)
                else:
                    covered = radial_coverage(tree, m, sight.x, epsilon)
                rows.append((str(sight), m, format_fraction(epsilon), bool(covered)))
        frame = pd.DataFrame(rows, columns=["sight", "m", "epsilon", "covered"])
        if save_as:
            write_table(frame, self._path(save_as), "coverage")

        return frame

    def passed(self, tree, lines, levels=None, save_as=None):
        """Count the squares passed by lines at every level

        Returns
        -------
        DataFrame
            Rows of line index, k and V_k
        """
        levels = range(tree.depth + 1) if levels is None else levels
        rows = [
            (i, k, count_passed(tree, k, line))
            for i, line in enumerate(lines)
            for k in levels
        ]
        frame = pd.DataFrame(rows, columns=["line", "k", "V_k"])
        if save_as:
            write_table(frame, self._path(save_as), "passed")

        return frame

    def experiment(self, config, save_as=None):
        """Run a Monte Carlo experiment

        Returns
        -------
        ExperimentReport
            The report, saved as JSON and CSV files when save_as or the
            output of the configuration is given
        """
        report = run(config, workers=self._workers, verbose=self._vb)
        save_as = save_as or config.output
        if save_as:
            paths = report.save(self._path(save_as))
            logger.info(f"report saved to {', '.join(str(p) for p in paths)}")

        return report

    def certify(self, cover, tree=None, rays=None):
        """Certify a cover against its tree

        Without a tree, the tree is regenerated from the parameters stored
        with the cover.

        Raises
        ------
        OutsideDomain
            raised when there is no tree and the cover has no parameters
        CertificationFailure
            raised at the first failed check
        """
        if tree is None:
            if cover.params is None:
                raise OutsideDomain(cover, "the cover has no tree parameters")
            tree = generate(cover.params)

        return certify(cover, tree, rays)

    def counts_path(self, save_as):
        """The path of the counts table written next to a cover"""
        return get_extended_name(self._path(save_as), "counts", ".csv")

    @property
    def dir(self):
        """Gets the path of the directory where results are saved"""
        return self._dir

    @dir.setter
    def dir(self, new_dir_path):
        """Sets the path of the directory where results are saved"""
        self._dir = Path(new_dir_path)
