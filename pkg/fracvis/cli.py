import argparse
import logging
import sys

from .config import BLOCK_EPSILON, TABLE_COLUMNS, THREADS_VARIABLE
from .exceptions import CertificationFailure, FracvisError, UsageError
from .laboratory import Laboratory
from .montecarlo import ExperimentConfig, default_lines
from .utils import parse_int_list, parse_pair, parse_range, to_fraction
from .visibility import METHODS, LineSight, PointSight

logger = logging.getLogger(__name__)

EPILOG = "\n".join(
    [
        "CSV tables (columns in order):",
        *(f"  {name}: {', '.join(columns)}" for name, columns in TABLE_COLUMNS.items()),
        "",
        "JSON files carry \"format\": 1.",
        f"{THREADS_VARIABLE} caps the number of Monte Carlo workers.",
        "Exit codes: 0 success, 1 usage or input error, 2 certification or audit failure.",
    ]
)


class _Parser(argparse.ArgumentParser):
    """An argument parser which raises instead of exiting on bad flags"""

    def error(self, message):

        raise UsageError(f"{self.prog}: {message}")


def _line_pair(text):
    """Parse 'x1,y1:x2,y2' into the two points of a line"""
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"'{text}' is not a line 'x1,y1:x2,y2'")

    return tuple(parse_pair(part) for part in parts)


def _add_tree_arguments(parser):

    group = parser.add_argument_group("tree")
    group.add_argument("--tree", help="a tree file written by 'gen'")
    group.add_argument("--p", type=to_fraction, help="retention probability")
    group.add_argument("--depth", type=int, help="deepest level")
    group.add_argument("--M", type=int, default=2, help="subdivision base (default 2)")
    group.add_argument("--seed", type=int, default=0, help="master seed (default 0)")


def _add_sight_arguments(parser, many=False):

    action = "append" if many else "store"
    parser.add_argument(
        "--line",
        type=LineSight.from_text,
        action=action,
        help="direction and side 'a,b,+' or 'a,b,-'",
    )
    parser.add_argument(
        "--point", type=PointSight.from_text, action=action, help="viewpoint 'x1,x2'"
    )


def build_parser():
    """Build the argument parser of the fracvis command"""
    parser = _Parser(
        prog="fracvis",
        description="Fractal percolation and its visible parts",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="show progress bars"
    )
    commands = parser.add_subparsers(dest="command", parser_class=_Parser)

    gen = commands.add_parser("gen", help="generate a percolation tree")
    _add_tree_arguments(gen)
    gen.add_argument("--out", required=True, help="tree file")
    gen.add_argument(
        "--params-only", action="store_true", help="save the parameters only"
    )

    vis = commands.add_parser("vis", help="compute a visible cover")
    _add_tree_arguments(vis)
    _add_sight_arguments(vis)
    vis.add_argument("--level", type=int, help="level of the cover (default depth)")
    vis.add_argument("--method", choices=METHODS, help="cover algorithm")
    vis.add_argument("--no-check", action="store_true", help="skip witness checks")
    vis.add_argument("--out", required=True, help="cover file, counts CSV beside it")

    boxdim = commands.add_parser("boxdim", help="fit a box-counting slope")
    _add_tree_arguments(boxdim)
    _add_sight_arguments(boxdim)
    boxdim.add_argument("--cover", help="a cover file written by 'vis'")
    boxdim.add_argument("--set", choices=("E", "V"), default="E", help="counted set")
    boxdim.add_argument("--level", type=int, help="level of the counted set")
    boxdim.add_argument("--krange", type=parse_range, help="fitted levels 'lo:hi'")
    boxdim.add_argument("--out", help="scaling CSV")

    stripes = commands.add_parser("stripes", help="estimate the visible length")
    _add_tree_arguments(stripes)
    stripes.add_argument(
        "--line", type=LineSight.from_text, required=True, help="'a,b,+' or 'a,b,-'"
    )
    stripes.add_argument("--level", type=int, required=True, help="stripe level n")
    stripes.add_argument("--epsilon", type=to_fraction, help="stripe epsilon")
    stripes.add_argument(
        "--block-depth", type=int, help="block level (default n + 4, at most the depth)"
    )
    stripes.add_argument("--out", help="stripes CSV")

    coverage = commands.add_parser("coverage", help="check carved coverage")
    _add_tree_arguments(coverage)
    _add_sight_arguments(coverage, many=True)
    coverage.add_argument("--depths", type=parse_int_list, required=True, help="'4,6,8'")
    coverage.add_argument(
        "--epsilon", type=to_fraction, default=BLOCK_EPSILON, help="carving epsilon"
    )
    coverage.add_argument("--out", help="coverage CSV")

    passed = commands.add_parser("passed", help="count squares passed by lines")
    _add_tree_arguments(passed)
    passed.add_argument(
        "--through", type=_line_pair, action="append", help="line 'x1,y1:x2,y2'"
    )
    passed.add_argument("--levels", type=parse_int_list, help="levels '0,1,2'")
    passed.add_argument("--out", help="passed CSV")

    mc = commands.add_parser("mc", help="run a Monte Carlo experiment")
    mc.add_argument("config", help="experiment configuration file")
    mc.add_argument("--out", help="report file, CSV tables beside it")
    mc.add_argument("--workers", type=int, help=f"worker processes (capped by {THREADS_VARIABLE})")

    cert = commands.add_parser("certify", help="certify a stored cover")
    cert.add_argument("--cover", required=True, help="a cover file written by 'vis'")
    cert.add_argument("--tree", help="its tree file (default: regenerated)")
    cert.add_argument("--rays", type=int, help="number of oracle rays")

    return parser


def _tree(lab, args):
    """Load the tree of a command or generate it from its flags"""
    if args.tree:
        return lab.load_tree(args.tree)
    if args.p is None or args.depth is None:
        raise UsageError("give --tree or both --p and --depth")

    return lab.tree(args.p, args.depth, args.M, args.seed)


def _sight(args):

    if (args.line is None) == (args.point is None):
        raise UsageError("give exactly one of --line and --point")

    return args.line or args.point


def _gen(lab, args):

    if args.tree:
        raise UsageError("gen takes --p and --depth, not --tree")
    if args.p is None or args.depth is None:
        raise UsageError("gen needs --p and --depth")
    tree = lab.tree(
        args.p,
        args.depth,
        args.M,
        args.seed,
        save_as=args.out,
        include_levels=not args.params_only,
    )
    logger.info(f"counts {tree.counts}")

    return 0


def _vis(lab, args):

    tree = _tree(lab, args)
    level = tree.depth if args.level is None else args.level
    cover = lab.visible(
        tree, level, _sight(args), args.method, not args.no_check, save_as=args.out
    )
    if cover.discrepancies:
        logger.warning(f"{cover.discrepancies} witnesses failed and were recomputed")

    return 0


def _boxdim(lab, args):

    if args.cover:
        source = lab.load_cover(args.cover)
    else:
        tree = _tree(lab, args)
        if args.set == "V":
            level = tree.depth if args.level is None else args.level
            source = lab.visible(tree, level, _sight(args))
        else:
            source = tree
    table, fit = lab.box_dimension(source, args.krange, save_as=args.out)
    logger.info(f"counts {table.counts}")
    logger.info(f"slope {fit.slope} residual {fit.residual}")

    return 0


def _stripes(lab, args):

    tree = _tree(lab, args)
    sight = args.line
    estimate = lab.stripes(
        tree,
        args.level,
        sight.d,
        sight.side,
        args.epsilon,
        args.block_depth,
        save_as=args.out,
    )
    logger.info(f"S_n {estimate.S} estimate {estimate.estimate:.6f}")

    return 0


def _coverage(lab, args):

    tree = _tree(lab, args)
    sights = (args.line or []) + (args.point or [])
    if not sights:
        raise UsageError("give at least one --line or --point")
    frame = lab.coverage(tree, args.depths, args.epsilon, sights, save_as=args.out)
    for row in frame.itertuples(index=False):
        logger.info(f"{row.sight} m={row.m} covered={row.covered}")

    return 0


def _passed(lab, args):

    tree = _tree(lab, args)
    lines = args.through or default_lines(tree.depth, tree.M)
    frame = lab.passed(tree, lines, args.levels, save_as=args.out)
    logger.info(
        f"{len(lines)} lines, median V_{tree.depth} "
        f"{frame[frame['k'] == frame['k'].max()]['V_k'].median()}"
    )

    return 0


def _mc(lab, args):

    config = ExperimentConfig.from_file(args.config)
    report = lab.experiment(config, save_as=args.out)
    for row in report.cells.itertuples(index=False):
        logger.info(f"p={row.p} {row.cell}: {row.estimate:.6g} ± {row.stderr:.2g} (n={row.n})")
    if not report.passed:
        failed = [a["audit"] for a in report.audits if a["violations"]]
        logger.error(f"audits failed: {', '.join(failed)}")
        return 2

    return 0


def _certify(lab, args):

    cover = lab.load_cover(args.cover)
    tree = lab.load_tree(args.tree) if args.tree else None
    summary = lab.certify(cover, tree, args.rays)
    logger.info(
        f"{summary['witnesses']} witnesses of {summary['sight']} "
        f"at level {summary['level']} verified"
    )
    if summary["rays"]:
        logger.info(
            f"oracle: {summary['oracle']} squares seen by {summary['rays']} rays, "
            f"{summary['skipped']} skipped"
        )

    return 0


_COMMANDS = {
    "gen": _gen,
    "vis": _vis,
    "boxdim": _boxdim,
    "stripes": _stripes,
    "coverage": _coverage,
    "passed": _passed,
    "mc": _mc,
    "certify": _certify,
}


def main(argv=None):
    """Run the fracvis command line

    Returns
    -------
    int
        0 on success, 1 on a usage, parameter or file error, 2 when a
        certification or an audit fails
    """
    parser = build_parser()
    try:
        args = parser.parse_args(sys.argv[1:] if argv is None else argv)
        if args.command is None:
            raise UsageError("a command is needed, see 'fracvis --help'")
        lab = Laboratory(verbose=args.verbose, workers=getattr(args, "workers", None))
        return _COMMANDS[args.command](lab, args)
    except SystemExit as e:
        return e.code or 0
    except CertificationFailure as e:
        logger.error(str(e))
        return 2
    except FracvisError as e:
        logger.error(str(e))
        return 1
    except ValueError as e:
        logger.error(str(e))
        return 1
