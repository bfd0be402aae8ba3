"""
Run configuration.

INI files with the sections [model], [sites], [sim], [estimate] and [mc]:

    [model]
    model = dexp1d
    beta = 1

    [sites]
    coords = 0, 2            ; or: file = sites.csv

    [sim]
    n = 20000
    seed = 7

    [estimate]
    k = 500

    [mc]
    runs = 500

Every invalid value raises ConfigError naming the section, key and line.
"""

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from .data import SiteSet, read_sites
from .errors import ConfigError, DataError, DomainError
from .estimation import ESTIMATORS
from .kernels import KernelModel
from .simulator import SimConfig
from .utils import key_lines, parse_coordinates, parse_int, parse_number_list

_SECTIONS = ("model", "sites", "sim", "estimate", "mc")


@dataclass
class RunConfig:
    """
    Parsed configuration.

    Attributes:
        model: Kernel model with the true parameters
        sites: Observation sites
        n: Replications per simulation
        sim: Simulator settings
        k: Threshold count (None when only k_grid is given)
        k_grid: Threshold counts for a sweep
        estimator: auto | pairwise | range | exp2d | general-normal
        beta_max: Root-search bound of the exp2d estimator
        runs: Monte-Carlo experiment count
        mc_workers: Worker processes of the experiment harness
        mc_seed: Master seed of the experiment harness
        source: File the configuration was read from
    """
    model: KernelModel
    sites: SiteSet
    n: int
    sim: SimConfig
    k: Optional[int] = None
    k_grid: List[int] = field(default_factory=list)
    estimator: str = "auto"
    beta_max: Optional[float] = None
    runs: int = 1
    mc_workers: int = 1
    mc_seed: int = 0
    source: Optional[Path] = None

    def thresholds(self) -> List[int]:
        """k values to run, k_grid taking precedence."""
        if self.k_grid:
            return list(self.k_grid)
        return [] if self.k is None else [self.k]


class _Reader:
    """Typed access to a ConfigParser that knows the source lines."""

    def __init__(self, parser: configparser.ConfigParser, lines: Dict[Tuple[str, str], int]):
        self.parser = parser
        self.lines = lines

    def fail(self, section: str, key: Optional[str], message: str) -> ConfigError:
        where = f"[{section}] {key}" if key else f"[{section}]"
        line = self.lines.get((section, key)) if key else None
        return ConfigError(f"{where}: {message}", line)

    def raw(self, section: str, key: str) -> Optional[str]:
        if not self.parser.has_section(section):
            return None
        value = self.parser.get(section, key, fallback=None)
        if value is None or value.strip() == "":
            return None
        return value.strip()

    def integer(self, section: str, key: str, default: Optional[int] = None,
                minimum: Optional[int] = None) -> Optional[int]:
        text = self.raw(section, key)
        if text is None:
            return default
        try:
            value = parse_int(text, key)
        except ValueError as e:
            raise self.fail(section, key, str(e))
        if minimum is not None and value < minimum:
            raise self.fail(section, key, f"must be at least {minimum}, got {value}")
        return value

    def real(self, section: str, key: str, default: Optional[float] = None) -> Optional[float]:
        text = self.raw(section, key)
        if text is None:
            return default
        try:
            return float(text)
        except ValueError:
            raise self.fail(section, key, f"must be a number, got '{text}'")


def _read_model(reader: _Reader) -> KernelModel:
    if not reader.parser.has_section("model"):
        raise ConfigError("missing [model] section")
    block = dict(reader.parser.items("model"))
    try:
        return KernelModel.from_mapping(block)
    except DomainError as e:
        message = str(e)
        # point at the parameter the message names, else at the tag
        key = next((k for k in ("beta1", "beta2", "beta", "nu", "alpha", "rho")
                    if message.startswith(k + " ") and k in block), "model")
        raise reader.fail("model", key, message)


def _read_sites(reader: _Reader, base: Path) -> SiteSet:
    coords = reader.raw("sites", "coords")
    path = reader.raw("sites", "file")
    if (coords is None) == (path is None):
        raise reader.fail("sites", None, "give exactly one of 'coords' or 'file'")
    if path is not None:
        target = Path(path)
        if not target.is_absolute():
            target = base / target
        try:
            return read_sites(target)
        except DataError as e:
            raise reader.fail("sites", "file", str(e))
    try:
        return SiteSet(parse_coordinates(coords))
    except (ValueError, DomainError) as e:
        raise reader.fail("sites", "coords", str(e))


def _read_sim(reader: _Reader) -> SimConfig:
    margin_text = reader.raw("sim", "window_margin")
    margin = None
    if margin_text is not None and margin_text.lower() != "auto":
        margin = reader.real("sim", "window_margin")

    values = {
        "seed": reader.integer("sim", "seed", 0, minimum=0),
        "window_margin": margin,
        "tail_mass_tol": reader.real("sim", "tail_mass_tol", 1e-8),
        "max_points": reader.integer("sim", "max_points", 10 ** 7),
        "workers": reader.integer("sim", "workers", 1),
    }
    try:
        return SimConfig(**values)
    except DomainError as e:
        message = str(e)
        key = next((k for k in values if message.startswith(k + " ")), None)
        raise reader.fail("sim", key, message)


def _read_k_grid(reader: _Reader) -> List[int]:
    text = reader.raw("estimate", "k_grid")
    if text is None:
        return []
    try:
        values = parse_number_list(text)
    except ValueError as e:
        raise reader.fail("estimate", "k_grid", str(e))
    grid = []
    for value in values:
        if value != int(value) or value < 1:
            raise reader.fail("estimate", "k_grid", f"entries must be positive integers, got {value!r}")
        grid.append(int(value))
    return grid


def parse_config(text: str, base: Union[str, Path] = ".", source: Optional[Path] = None) -> RunConfig:
    """
    Parse configuration text.

    Args:
        text: INI text
        base: Directory relative site files are resolved against
        source: Originating file, recorded in the result

    Returns:
        RunConfig: Validated configuration

    Raises:
        ConfigError: On any invalid or missing value
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"cannot parse configuration: {e}", getattr(e, "lineno", None))

    reader = _Reader(parser, key_lines(text.splitlines()))
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}] (expected {', '.join(_SECTIONS)})")

    model = _read_model(reader)
    sites = _read_sites(reader, Path(base))
    if sites.dimension != model.dimension:
        raise reader.fail("sites", "coords" if reader.raw("sites", "coords") else "file",
                          f"{model.tag} is {model.dimension}D but the sites are {sites.dimension}D")

    sim = _read_sim(reader)
    n = reader.integer("sim", "n", 1, minimum=1)

    k = reader.integer("estimate", "k", None, minimum=1)
    k_grid = _read_k_grid(reader)
    for value in ([k] if k is not None else []) + k_grid:
        if value >= n and reader.raw("sim", "n") is not None:
            key = "k" if value == k else "k_grid"
            raise reader.fail("estimate", key, f"must be below n = {n}, got {value}")

    estimator = (reader.raw("estimate", "estimator") or "auto").lower()
    if estimator not in ESTIMATORS:
        raise reader.fail("estimate", "estimator", f"unknown estimator '{estimator}' (expected {' | '.join(ESTIMATORS)})")
    beta_max = reader.real("estimate", "beta_max")
    if beta_max is not None and not beta_max > 0:
        raise reader.fail("estimate", "beta_max", f"must be positive, got {beta_max!r}")

    return RunConfig(
        model=model,
        sites=sites,
        n=n,
        sim=sim,
        k=k,
        k_grid=k_grid,
        estimator=estimator,
        beta_max=beta_max,
        runs=reader.integer("mc", "runs", 1, minimum=1),
        mc_workers=reader.integer("mc", "workers", 1, minimum=1),
        mc_seed=reader.integer("mc", "seed", sim.seed, minimum=0),
        source=source,
    )


def load_config(path: Union[str, Path]) -> RunConfig:
    """
    Read and validate a configuration file.

    Raises:
        ConfigError: If the file cannot be read or is invalid
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read configuration {path}: {e}")
    return parse_config(text, base=path.parent, source=path)
