"""Exact reference solvers used to check the learned estimates.

* :func:`exact_w1` solves W1 between two equal-size uniform point clouds as
  an assignment problem.
* :func:`w1_sorted_1d` is the monotone-coupling closed form on the line.
* :func:`median_minimizer` grid-searches y -> sum_i |X_i - y| and certifies
  that the minimizer is a median, which is where a point-mass generator
  trained on single-sample batches ends up.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import BudgetError, ContractError, DimensionError
from .measures import EmpiricalMeasure
from .transport import cost_matrix

MAX_ASSIGNMENT = 4096


def _points(m):
    if isinstance(m, EmpiricalMeasure):
        return m.points
    pts = np.asarray(m, dtype=np.float64)
    return pts[:, None] if pts.ndim == 1 else pts


@dataclass
class Coupling:
    """Optimal matching: point i of the first cloud goes to point ``assignment[i]``."""

    assignment: np.ndarray
    costs: np.ndarray

    @property
    def cost(self):
        return float(np.mean(self.costs))

    def __float__(self):
        return self.cost


def exact_w1(mu_n, nu_n, max_n=MAX_ASSIGNMENT):
    """Exact W1 between two uniform empirical measures of the same size."""
    x, y = _points(mu_n), _points(nu_n)
    if x.shape[0] != y.shape[0]:
        raise ContractError(f"exact W1 needs equal sizes, got {x.shape[0]} and {y.shape[0]}")
    if x.shape[0] > max_n:
        raise BudgetError(f"n = {x.shape[0]} exceeds the assignment budget of {max_n}")
    costs = cost_matrix(x, y)
    rows, cols = linear_sum_assignment(costs)
    sigma = np.empty(x.shape[0], dtype=np.int64)
    sigma[rows] = cols
    return Coupling(sigma, costs[np.arange(x.shape[0]), sigma])


def brute_force_w1(mu_n, nu_n):
    """Minimum matching cost over all n! permutations. Only for tiny n."""
    x, y = _points(mu_n), _points(nu_n)
    n = x.shape[0]
    if y.shape[0] != n:
        raise ContractError("brute force needs equal sizes")
    if n > 9:
        raise BudgetError("brute force is limited to n <= 9")
    costs = cost_matrix(x, y)
    rows = np.arange(n)
    best = min(costs[rows, list(p)].sum() for p in itertools.permutations(range(n)))
    return best / n


def w1_sorted_1d(mu_n, nu_n, p=1.0):
    """(1/n) sum |x_(i) - y_(i)|^p over sorted samples on the real line."""
    x, y = _points(mu_n), _points(nu_n)
    if x.shape[1] != 1 or y.shape[1] != 1:
        raise DimensionError("the sorted closed form is one-dimensional")
    if x.shape[0] != y.shape[0]:
        raise ContractError("the sorted closed form needs equal sizes")
    if p < 1:
        raise ContractError("p must be at least 1")
    diff = np.abs(np.sort(x[:, 0]) - np.sort(y[:, 0]))
    return float(np.mean(diff ** p))


@dataclass
class MedianCertificate:
    minimizer: float
    value: float
    grid: np.ndarray
    objective: np.ndarray
    interval: tuple
    closed_form: float

    @property
    def in_interval(self):
        lo, hi = self.interval
        return lo - 1e-12 <= self.minimizer <= hi + 1e-12


def median_interval(points):
    """[X_[(m+1)/2], X_[(m+2)/2]] with 1-based floor indices on the sorted sample."""
    xs = np.sort(np.asarray(points, dtype=np.float64).ravel())
    m = xs.size
    return float(xs[(m + 1) // 2 - 1]), float(xs[(m + 2) // 2 - 1])


def median_closed_form(points):
    """sum_{i <= floor((m+1)/2)} (X_{m+1-i} - X_i), the minimum of sum |X_i - y|."""
    xs = np.sort(np.asarray(points, dtype=np.float64).ravel())
    m = xs.size
    k = (m + 1) // 2
    return float(np.sum(xs[::-1][:k] - xs[:k]))


def transport_objective(points, ys):
    """sum_i |X_i - y| for every y in ``ys``."""
    xs = np.asarray(points, dtype=np.float64).ravel()
    ys = np.asarray(ys, dtype=np.float64).ravel()
    return np.abs(xs[None, :] - ys[:, None]).sum(axis=1)


def median_minimizer(points, lo=None, hi=None, step=None):
    """Grid search for argmin_y sum_i |X_i - y| over [lo, hi].

    The grid is uniform with spacing ``step`` (default 1e-3 of the range) and
    also contains the sample points inside the range, where the piecewise
    linear objective has its kinks. Ties go to the smallest grid value.
    """
    xs = np.asarray(points, dtype=np.float64).ravel()
    if xs.size < 2:
        raise ContractError("need at least two support points")
    lo = float(xs.min()) if lo is None else float(lo)
    hi = float(xs.max()) if hi is None else float(hi)
    if step is None:
        step = 1e-3 * (hi - lo) if hi > lo else 1.0
    if hi < lo or step <= 0:
        raise ContractError("empty grid")
    n_steps = int(np.floor((hi - lo) / step + 1e-9))
    grid = lo + step * np.arange(n_steps + 1)
    grid = np.union1d(grid, xs[(xs >= lo) & (xs <= hi)])
    if grid.size == 0:
        raise ContractError("empty grid")
    objective = transport_objective(xs, grid)
    k = int(np.argmin(objective))
    return MedianCertificate(
        minimizer=float(grid[k]), value=float(objective[k]), grid=grid, objective=objective,
        interval=median_interval(xs), closed_form=median_closed_form(xs))


def is_median(points, y):
    """Check mu((-inf, y]) >= 1/2 and mu([y, inf)) >= 1/2 for the uniform measure on ``points``."""
    xs = np.asarray(points, dtype=np.float64).ravel()
    return bool(np.mean(xs <= y) >= 0.5 and np.mean(xs >= y) >= 0.5)
