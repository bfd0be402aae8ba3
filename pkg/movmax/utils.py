"""
Utility functions.

Shared helpers for number formatting and parsing used across movmax modules.
"""

import math
import re
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np


def format_number(value: float) -> str:
    """
    Format a float with full double precision.

    Args:
        value: Number to format

    Returns:
        str: Shortest-ambiguity-free representation with 17 significant digits
    """
    return format(float(value), ".17g")


def format_row(values: Iterable[float]) -> str:
    """Join numbers as one CSV row at full precision."""
    return ",".join(format_number(v) for v in values)


def parse_number_list(text: str) -> List[float]:
    """
    Parse a comma or whitespace separated list of numbers.

    Args:
        text: e.g. "0, 1, 3" or "0.5 1 2"

    Returns:
        List[float]: Parsed values

    Raises:
        ValueError: If an entry is not a number or the list is empty
    """
    tokens = [tok for tok in re.split(r"[,\s]+", text.strip()) if tok]
    if not tokens:
        raise ValueError("empty number list")
    values = []
    for tok in tokens:
        try:
            values.append(float(tok))
        except ValueError:
            raise ValueError(f"'{tok}' is not a number")
    return values


def parse_coordinates(text: str) -> np.ndarray:
    """
    Parse inline site coordinates.

    One-dimensional sites are a flat list ("0, 1, 3"). Two-dimensional
    sites are semicolon separated pairs ("0 0; 3 4").

    Args:
        text: Coordinate text

    Returns:
        np.ndarray: Shape (d,) for 1D, (d, 2) for 2D

    Raises:
        ValueError: On malformed input
    """
    if ";" not in text:
        return np.array(parse_number_list(text))

    rows = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        row = parse_number_list(chunk)
        if len(row) != 2:
            raise ValueError(f"2D site '{chunk.strip()}' must have exactly two coordinates")
        rows.append(row)
    if not rows:
        raise ValueError("empty coordinate list")
    return np.array(rows)


def parse_int(text: str, name: str) -> int:
    """
    Parse an integer, tolerating a float spelling like "1e4".

    Raises:
        ValueError: If the value is not integral
    """
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be an integer, got '{text}'")
    if not math.isfinite(value) or value != int(value):
        raise ValueError(f"{name} must be an integer, got '{text}'")
    return int(value)


def pair_indices(d: int) -> List[Tuple[int, int]]:
    """All index pairs (j, m) with j < m, in lexicographic order."""
    return [(j, m) for j in range(d) for m in range(j + 1, d)]


def key_lines(lines: Sequence[str]) -> Dict[Tuple[str, str], int]:
    """
    Map (section, key) to the 1-based line where the key is defined.

    Accepts the "key = value" and "key: value" forms of configparser.

    Args:
        lines: Raw lines of an INI file

    Returns:
        Dict[Tuple[str, str], int]: Line numbers, lowercase keys
    """
    section = ""
    found: Dict[Tuple[str, str], int] = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        header = re.match(r"^\[([^\]]+)\]$", line)
        if header:
            section = header.group(1).strip().lower()
            found[(section, "")] = number
            continue
        entry = re.match(r"^([^=:]+)[=:]", line)
        if entry:
            found[(section, entry.group(1).strip().lower())] = number
    return found
