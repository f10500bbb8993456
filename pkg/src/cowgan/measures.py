"""Empirical measures, samplers and point-cloud I/O.

Every sampler draws from a caller-supplied ``numpy.random.Generator`` so a
run is reproducible from one seed.
"""

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ContractError, DimensionError, ParseError


@dataclass
class EmpiricalMeasure:
    """Uniform measure (1/n each) on the rows of ``points``.

    ``tensor`` is set for generator batches and carries the graph back to the
    generator parameters; ``points`` is always its detached value.
    """

    points: np.ndarray
    tensor: ad.Tensor = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ContractError(f"an empirical measure needs at least one point, got shape {pts.shape}")
        if not np.isfinite(pts).all():
            raise ContractError("empirical measure has non-finite coordinates")
        self.points = pts

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    @property
    def weights(self):
        return np.full(self.n, 1.0 / self.n)

    def integrate(self, f):
        """Mean of ``f`` over the support; ``f`` maps an (n, d) array to n values."""
        return float(np.mean(np.broadcast_to(f(self.points), (self.n,))))

    def as_tensor(self):
        return self.tensor if self.tensor is not None else ad.Tensor(self.points)

    @classmethod
    def dirac(cls, point):
        return cls(np.asarray(point, dtype=np.float64).reshape(1, -1))


@dataclass
class GaussianMixture:
    """Isotropic Gaussian mixture in R^d."""

    means: np.ndarray
    stds: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        k = self.means.shape[0]
        self.stds = np.broadcast_to(np.asarray(self.stds, dtype=np.float64), (k,)).copy()
        self.weights = np.broadcast_to(np.asarray(self.weights, dtype=np.float64), (k,)).copy()
        if np.any(self.stds < 0):
            raise ContractError("mixture standard deviations must be non-negative")
        if np.any(self.weights < 0) or not np.isclose(self.weights.sum(), 1.0, rtol=0, atol=1e-12):
            raise ContractError("mixture weights must be non-negative and sum to 1")

    @property
    def d(self):
        return self.means.shape[1]

    @property
    def n_components(self):
        return self.means.shape[0]

    def sample_with_labels(self, n, rng):
        _check_n(n)
        labels = rng.choice(self.n_components, size=n, p=self.weights)
        noise = rng.standard_normal((n, self.d))
        pts = self.means[labels] + self.stds[labels, None] * noise
        return EmpiricalMeasure(pts), labels

    def sample(self, n, rng):
        return self.sample_with_labels(n, rng)[0]


@dataclass
class GeneratorMeasure:
    """Push-forward of standard normal noise through a generator network."""

    generator: object
    noise_dim: int = None

    def __post_init__(self):
        if self.noise_dim is None:
            self.noise_dim = self.generator.d_in
        if self.noise_dim != self.generator.d_in:
            raise DimensionError("noise_dim does not match the generator input width")

    @property
    def d(self):
        return self.generator.d_out

    def sample(self, n, rng, noise=None):
        _check_n(n)
        z = rng.standard_normal((n, self.noise_dim)) if noise is None else np.asarray(noise)
        out = self.generator(z)
        return EmpiricalMeasure(out.data, tensor=out)


class DatasetPool:
    """A fixed point cloud; batches are drawn without replacement within an epoch."""

    def __init__(self, points, normalization="none"):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ParseError("dataset is empty")
        self.points = pts
        self.normalization = normalization
        self._order = None
        self._cursor = 0

    def __len__(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    def sample(self, n, rng):
        _check_n(n)
        if n > len(self):
            raise ContractError(f"batch of {n} exceeds pool of {len(self)}")
        if self._order is None or self._cursor + n > len(self):
            self._order = rng.permutation(len(self))
            self._cursor = 0
        idx = self._order[self._cursor:self._cursor + n]
        self._cursor += n
        return EmpiricalMeasure(self.points[idx])


def _check_n(n):
    if int(n) != n or n < 1:
        raise ContractError(f"sample size must be a positive integer, got {n}")


def sample(source, n, rng):
    """Draw an n-point empirical measure from any source with a ``sample`` method."""
    return source.sample(n, rng)


def benchmark_4x4_gaussians(seed=0, std=0.2, offset=(3.0, 0.0)):
    """Two equal-weight 4-component mixtures on offset 2x2 grids.

    The first has means at (+-1, +-1); the second is the same square shifted
    by ``offset``. Both have isotropic ``std``. ``seed`` is accepted for API
    symmetry with other benchmarks; placement is deterministic.
    """
    del seed
    square = np.array([[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]])
    weights = np.full(4, 0.25)
    first = GaussianMixture(square, std, weights)
    second = GaussianMixture(square + np.asarray(offset, dtype=np.float64), std, weights)
    return first, second


# --- point-cloud files ---------------------------------------------------------
# Binary layout: uint64 N, uint64 d, then N*d little-endian f64 values row-major.

_BIN_HEADER = struct.Struct("<QQ")


def load_pointcloud(path, format="csv", normalization="none"):
    """Read a point cloud as a :class:`DatasetPool`.

    ``format`` is ``"csv"`` (no header, one point per row) or ``"f64"``.
    """
    if format == "csv":
        rows, width = [], None
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or all(not cell.strip() for cell in row):
                    continue
                try:
                    values = [float(cell) for cell in row]
                except ValueError:
                    raise ParseError(f"non-numeric cell in {row!r}", line=lineno) from None
                if width is None:
                    width = len(values)
                elif len(values) != width:
                    raise ParseError(f"expected {width} columns, found {len(values)}", line=lineno)
                rows.append(values)
        if not rows:
            raise ParseError(f"{path}: no points")
        pts = np.array(rows, dtype=np.float64)
    elif format in ("f64", "f64le", "f64le-binary"):
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) < _BIN_HEADER.size:
            raise ParseError(f"{path}: file shorter than its header")
        n, d = _BIN_HEADER.unpack_from(raw)
        body = raw[_BIN_HEADER.size:]
        if len(body) != 8 * n * d:
            raise ParseError(f"{path}: header says {n}x{d} but body holds {len(body) // 8} values")
        if n == 0:
            raise ParseError(f"{path}: no points")
        pts = np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(n, d)
    else:
        raise ContractError(f"unknown point-cloud format {format!r}")
    if not np.isfinite(pts).all():
        raise ParseError(f"{path}: non-finite coordinates")
    return DatasetPool(pts, normalization=normalization)


def save_pointcloud(path, points, format="csv"):
    pts = np.asarray(points.points if isinstance(points, EmpiricalMeasure) else points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for row in pts:
                writer.writerow([repr(float(v)) for v in row])
    elif format in ("f64", "f64le", "f64le-binary"):
        with open(path, "wb") as fh:
            fh.write(_BIN_HEADER.pack(*pts.shape))
            fh.write(np.ascontiguousarray(pts, dtype="<f8").tobytes())
    else:
        raise ContractError(f"unknown point-cloud format {format!r}")
