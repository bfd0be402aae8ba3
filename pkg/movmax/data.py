"""
Site sets and observation matrices.

Containers shared by the simulator and the estimators, plus the CSV
formats they are exchanged in:

    sites CSV         index,x[,y]
    observations CSV  site_1,...,site_d  (one row per replication)
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from .errors import DataError, DomainError
from .utils import format_row, pair_indices

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass
class SiteSet:
    """
    Ordered observation sites t_1, ..., t_d.

    Attributes:
        coords: Shape (d,) for 1D sites, (d, 2) for 2D sites
        allow_coincident: Accept repeated sites (degenerate designs used
            by limit checks); estimation designs keep the default
    """
    coords: np.ndarray
    allow_coincident: bool = field(default=False, repr=False)

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        if coords.ndim == 2 and coords.shape[1] == 1:
            coords = coords[:, 0]
        if coords.ndim not in (1, 2) or (coords.ndim == 2 and coords.shape[1] != 2):
            raise DomainError(f"sites must be a list of reals or of 2D points, got shape {coords.shape}")
        if coords.shape[0] < 1:
            raise DomainError("at least one site is required")
        if not np.all(np.isfinite(coords)):
            raise DomainError("site coordinates must be finite")
        if not self.allow_coincident:
            keys = [tuple(np.atleast_1d(c)) for c in coords]
            if len(set(keys)) != len(keys):
                raise DomainError("sites must be distinct")
        coords.setflags(write=False)
        self.coords = coords

    @property
    def dimension(self) -> int:
        """Spatial dimension (1 or 2)."""
        return 1 if self.coords.ndim == 1 else 2

    @property
    def d(self) -> int:
        """Number of sites."""
        return self.coords.shape[0]

    def __len__(self) -> int:
        return self.d

    def points(self) -> np.ndarray:
        """Sites as a (d, dimension) array."""
        return self.coords.reshape(self.d, self.dimension)

    def displacement(self, j: int, m: int) -> Union[float, np.ndarray]:
        """Displacement t_m - t_j (a float in 1D, a 2-vector in 2D)."""
        delta = self.coords[m] - self.coords[j]
        return float(delta) if self.dimension == 1 else np.array(delta)

    def distance(self, j: int, m: int) -> float:
        """Euclidean distance between sites j and m."""
        return float(np.linalg.norm(np.atleast_1d(self.coords[m] - self.coords[j])))

    def pairs(self) -> List[Tuple[int, int]]:
        """All pairs (j, m) with j < m."""
        return pair_indices(self.d)

    def min_pair_distance(self) -> float:
        """Smallest distance between two distinct sites (inf when d = 1)."""
        distances = [self.distance(j, m) for j, m in self.pairs()]
        positive = [dist for dist in distances if dist > 0]
        return min(positive) if positive else math.inf

    def site_range(self) -> float:
        """max t_j - min t_j for 1D sites."""
        if self.dimension != 1:
            raise DomainError("the site range is defined for 1D sites only")
        return float(self.coords.max() - self.coords.min())

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-axis lower and upper bounds of the sites."""
        pts = self.points()
        return pts.min(axis=0), pts.max(axis=0)

    def subset(self, indices) -> "SiteSet":
        """Sites restricted to the given indices, in that order."""
        return SiteSet(self.coords[list(indices)], allow_coincident=self.allow_coincident)


@dataclass
class ObservationMatrix:
    """
    n replications observed at d sites.

    Attributes:
        values: Array of shape (n, d)
        sites: Sites of the columns
    """
    values: np.ndarray
    sites: SiteSet

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2:
            raise DataError(f"observations must be a matrix, got shape {values.shape}")
        if values.shape[1] != self.sites.d:
            raise DataError(
                f"observation matrix has {values.shape[1]} column(s) but {self.sites.d} site(s)"
            )
        if not np.all(np.isfinite(values)):
            raise DataError("observations must be finite")
        self.values = values

    @property
    def n(self) -> int:
        """Number of replications."""
        return self.values.shape[0]

    @property
    def d(self) -> int:
        """Number of sites."""
        return self.values.shape[1]

    def column(self, j: int) -> np.ndarray:
        """Observations at site j."""
        return self.values[:, j]

    def with_values(self, values: np.ndarray) -> "ObservationMatrix":
        """Same sites, new values."""
        return ObservationMatrix(values, self.sites)


def write_sites(path: PathLike, sites: SiteSet) -> None:
    """
    Write a sites CSV with header index,x[,y].

    Args:
        path: Output file
        sites: Sites to write
    """
    header = "index,x" if sites.dimension == 1 else "index,x,y"
    lines = [header]
    for j, point in enumerate(sites.points()):
        lines.append(f"{j}," + format_row(point))
    Path(path).write_text("\n".join(lines) + "\n")


def read_sites(path: PathLike) -> SiteSet:
    """
    Read a sites CSV written by write_sites.

    Raises:
        DataError: If the file is malformed
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DataError(f"cannot read sites file {path}: {e}")

    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines:
        raise DataError(f"sites file {path} is empty")
    header = [h.strip() for h in lines[0].split(",")]
    if header not in (["index", "x"], ["index", "x", "y"]):
        raise DataError(f"sites file {path}: expected header 'index,x[,y]', got '{lines[0]}'")

    rows = []
    for number, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != len(header):
            raise DataError(f"sites file {path} line {number}: expected {len(header)} fields")
        try:
            rows.append([float(v) for v in fields[1:]])
        except ValueError:
            raise DataError(f"sites file {path} line {number}: non-numeric coordinate")
    if not rows:
        raise DataError(f"sites file {path} has no sites")

    coords = np.array(rows)
    try:
        return SiteSet(coords[:, 0] if len(header) == 2 else coords)
    except DomainError as e:
        raise DataError(f"sites file {path}: {e}")


def write_observations(path: PathLike, obs: ObservationMatrix) -> None:
    """
    Write observations with header site_1,...,site_d at 17 significant digits.

    Args:
        path: Output file
        obs: Observations to write
    """
    header = ",".join(f"site_{j + 1}" for j in range(obs.d))
    with open(path, "w") as handle:
        handle.write(header + "\n")
        for row in obs.values:
            handle.write(format_row(row) + "\n")
    logger.debug("wrote %d x %d observations to %s", obs.n, obs.d, path)


def read_observations(path: PathLike, sites: SiteSet) -> ObservationMatrix:
    """
    Read an observations CSV and attach its sites.

    Args:
        path: Observations file
        sites: Sites of the columns

    Returns:
        ObservationMatrix: Parsed observations

    Raises:
        DataError: If the file is malformed or the column count does not
            match the sites
    """
    path = Path(path)
    try:
        with open(path) as handle:
            header = handle.readline().strip()
            values = np.loadtxt(handle, delimiter=",", ndmin=2)
    except OSError as e:
        raise DataError(f"cannot read observations file {path}: {e}")
    except ValueError as e:
        raise DataError(f"observations file {path}: {e}")

    columns = [h.strip() for h in header.split(",")] if header else []
    if len(columns) != sites.d:
        raise DataError(
            f"observations file {path} has {len(columns)} column(s) but {sites.d} site(s)"
        )
    if values.size == 0:
        raise DataError(f"observations file {path} has no rows")
    return ObservationMatrix(values, sites)
