import json
import logging
import math
from pathlib import Path

import pandas as pd

from .config import FORMAT_VERSION, TABLE_COLUMNS
from .exceptions import FracvisError, MalformedFile
from .grid import PercolationTree
from .utils import get_extended_name, round_float
from .visibility import VisibleCover

logger = logging.getLogger(__name__)


def _plain(value):
    """Convert numpy scalars, NaN and tuples into JSON values"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        value = value.item()
    if isinstance(value, float):
        return round_float(value) if math.isfinite(value) else None

    return value


def save_document(data, path):
    """Write a versioned JSON document

    Keys are sorted and floats rounded so that equal data gives
    byte-identical files.

    Returns
    -------
    Path
        The path of the written file
    """
    path = Path(path)
    document = _plain(data)
    document["format"] = FORMAT_VERSION
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as f:
        f.write(json.dumps(document, indent=2, sort_keys=True))
        f.write("\n")
    logger.debug(f"{path} saved")

    return path


def load_document(path):
    """Read a versioned JSON document

    Raises
    ------
    MalformedFile
        raised when the file is missing, is not JSON or has another format
    """
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as e:
        raise MalformedFile(path, e.strerror or str(e)) from None
    except json.JSONDecodeError as e:
        raise MalformedFile(path, f"invalid JSON at line {e.lineno}") from None
    if not isinstance(data, dict):
        raise MalformedFile(path, "the document is not an object")
    if data.get("format") != FORMAT_VERSION:
        raise MalformedFile(
            path, f"format {data.get('format')!r} is not {FORMAT_VERSION}"
        )
    logger.debug(f"{path} loaded")

    return data


def save_tree(tree, path, include_levels=True):
    """Save a percolation tree, or only its parameters"""
    return save_document(tree.as_dict(include_levels), path)


def load_tree(path):
    """Load a percolation tree saved with its cells or its parameters

    Raises
    ------
    MalformedFile
        raised when the document does not describe a valid tree
    """
    data = load_document(path)
    try:
        return PercolationTree.from_dict(data)
    except (FracvisError, KeyError, TypeError, ValueError) as e:
        raise MalformedFile(path, str(e)) from None


def save_cover(cover, path):
    """Save a visible cover and its scaling table next to it

    Returns
    -------
    list
        The paths of the JSON file and the CSV table
    """
    json_path = save_document(cover.as_dict(), path)
    counts = pd.DataFrame(
        [(k, n) for k, n in enumerate(cover.counts)], columns=["k", "N_k"]
    )
    csv_path = write_table(counts, get_extended_name(path, "counts", ".csv"), "scaling")

    return [json_path, csv_path]


def load_cover(path):
    """Load a visible cover

    Raises
    ------
    MalformedFile
        raised when the document does not describe a cover
    """
    data = load_document(path)
    try:
        return VisibleCover.from_dict(data)
    except (FracvisError, KeyError, TypeError, ValueError) as e:
        raise MalformedFile(path, str(e)) from None


def write_table(frame, path, name=None):
    """Write a table as CSV with LF line endings

    The columns of a named table are checked against TABLE_COLUMNS.
    """
    path = Path(path)
    if name is not None:
        expected = TABLE_COLUMNS[name]
        if list(frame.columns) != expected:
            raise ValueError(f"{name} table columns {list(frame.columns)} != {expected}")
    frame = frame.copy()
    for column in frame.columns:
        if pd.api.types.is_float_dtype(frame[column]):
            frame[column] = frame[column].map(round_float)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.debug(f"{path} written")

    return path


def read_table(path):
    """Read a CSV table written by write_table"""
    try:
        return pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise MalformedFile(path, str(e)) from None
