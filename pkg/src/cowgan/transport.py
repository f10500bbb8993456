"""Dual objectives for the 1-Wasserstein distance on mini-batches.

For a potential ``phi`` and two batches ``mu_n`` (points x_i) and ``nu_n``
(points y_j), with cost c(x, y) = |x - y|:

    phi^c(y; mu_n)    = min_i |x_i - y| - phi(x_i)
    (-phi)^c(x; nu_n) = min_j |x - y_j| + phi(y_j)

    J1 = mean phi(x) - mean phi(y)
    J2 = mean phi(x) + mean phi^c(y; mu_n)
    J3 = mean (-phi)^c(x; nu_n) - mean phi(y)
    J4 = mean (-phi)^c(x; nu_n) + mean phi^c(y; mu_n)

If phi(x) - phi(y) <= |x - y| on every cross pair, then J1 <= J2 <= J4 and
J1 <= J3 <= J4. A pair breaking that condition makes J2 < J1 on the
singleton batches (delta_x, delta_y); the training loop uses these
comparisons as its Lipschitz test.

A potential is any callable mapping a (k, d) :class:`~cowgan.autodiff.Tensor`
to k values (a Tensor, or an array when no gradient is needed).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from . import autodiff as ad
from .errors import ContractError, DimensionError, NonFiniteError
from .measures import EmpiricalMeasure

COINCIDENT = 1e-12


class UndefinedEstimateError(ContractError):
    """Every pair handed to the slope estimator was coincident."""


def _points(m):
    if isinstance(m, EmpiricalMeasure):
        return m.points
    pts = np.asarray(m, dtype=np.float64)
    return pts[:, None] if pts.ndim == 1 else pts


def _measure(m):
    return m if isinstance(m, EmpiricalMeasure) else EmpiricalMeasure(m)


def cost_matrix(x, y):
    """Pairwise Euclidean distances, shape (len(x), len(y))."""
    x, y = _points(x), _points(y)
    if x.shape[1] != y.shape[1]:
        raise DimensionError(f"point dimensions differ: {x.shape[1]} vs {y.shape[1]}")
    return cdist(x, y)


def potential_values(phi, measure, source="phi"):
    """Evaluate ``phi`` on a measure's support as a length-n Tensor."""
    measure = _measure(measure)
    try:
        out = ad.as_tensor(phi(measure.as_tensor()))
    except NonFiniteError as exc:
        raise NonFiniteError("potential produced a non-finite value", source=source,
                             payload=measure.points) from exc
    if out.size != measure.n:
        raise DimensionError(f"potential returned {out.shape} for {measure.n} points")
    return out.reshape(measure.n)


def _support_min(costs, values):
    """min over rows i of costs[i, j] - values[i]; returns (Tensor[k], argmins[k])."""
    shifted = ad.sub(ad.Tensor(costs), values.reshape(values.size, 1))
    return ad.tmin(shifted, axis=0)


def c_transform(phi_values, support, query):
    """c-transform of ``phi`` restricted to the points of ``support``.

    Args:
        phi_values: phi evaluated at the support points (length n), array or Tensor.
        support: the measure (or (n, d) array) whose points the infimum runs over.
        query: (k, d) points at which to evaluate.

    Returns:
        ``(values, argmins)``: a length-k Tensor with
        ``values[j] = min_i |x_i - y_j| - phi(x_i)``, and the lowest-index
        minimizing ``i`` for every query point.
    """
    sup = _points(support)
    if sup.shape[0] == 0:
        raise ContractError("c-transform over an empty support")
    q = _points(query)
    if q.shape[0] == 0:
        raise ContractError("c-transform needs at least one query point")
    values = ad.as_tensor(phi_values).reshape(-1)
    if values.size != sup.shape[0]:
        raise DimensionError(f"{values.size} potential values for {sup.shape[0]} support points")
    return _support_min(cost_matrix(sup, q), values)


@dataclass
class ObjectiveReport:
    """The four objective values for one batch pair.

    ``argmin_nu[j]`` is the index of the mu-point attaining phi^c(y_j; mu_n);
    ``argmin_mu[i]`` the nu-point attaining (-phi)^c(x_i; nu_n). ``terms``
    holds the differentiable scalars keyed ``"j1"`` ... ``"j4"``.
    """

    j1: float
    j2: float
    j3: float
    j4: float
    argmin_nu: np.ndarray = field(repr=False)
    argmin_mu: np.ndarray = field(repr=False)
    terms: dict = field(default_factory=dict, repr=False, compare=False)

    def values(self):
        return (self.j1, self.j2, self.j3, self.j4)

    def spread(self):
        v = self.values()
        return max(v) - min(v)

    def ordered(self, tol=0.0):
        """True when J1 <= J2 <= J4 and J1 <= J3 <= J4 up to ``tol``."""
        return (self.j1 <= self.j2 + tol and self.j2 <= self.j4 + tol
                and self.j1 <= self.j3 + tol and self.j3 <= self.j4 + tol)


def evaluate_objectives(phi, mu_n, nu_n):
    """Compute J1..J4 for ``phi`` on the batch pair, keeping the graph for backward."""
    mu_n, nu_n = _measure(mu_n), _measure(nu_n)
    fx = potential_values(phi, mu_n, source="phi(mu_n)")
    fy = potential_values(phi, nu_n, source="phi(nu_n)")
    costs = cost_matrix(mu_n.points, nu_n.points)
    phi_c, argmin_nu = _support_min(costs, fx)
    neg_phi_c, argmin_mu = _support_min(costs.T, ad.neg(fy))
    mean_fx, mean_fy = fx.mean(), fy.mean()
    mean_phi_c, mean_neg_phi_c = phi_c.mean(), neg_phi_c.mean()
    terms = {
        "j1": mean_fx - mean_fy,
        "j2": mean_fx + mean_phi_c,
        "j3": mean_neg_phi_c - mean_fy,
        "j4": mean_neg_phi_c + mean_phi_c,
    }
    return ObjectiveReport(
        *(terms[k].item() for k in ("j1", "j2", "j3", "j4")),
        argmin_nu=argmin_nu, argmin_mu=argmin_mu, terms=terms)


@dataclass(frozen=True)
class AdmissibilityViolation:
    x: np.ndarray
    y: np.ndarray
    excess: float
    i: int
    j: int


def _detached_values(phi, pts):
    with ad.no_grad():
        return potential_values(phi, EmpiricalMeasure(pts)).data


def check_admissibility(phi, mu_pts, nu_pts, tol=0.0):
    """All cross pairs with phi(x) - phi(y) - |x - y| > tol, largest excess first.

    The condition is one-sided: x ranges over ``mu_pts`` and y over ``nu_pts``.
    An empty list certifies admissibility on these samples.
    """
    x, y = _points(mu_pts), _points(nu_pts)
    excess = _detached_values(phi, x)[:, None] - _detached_values(phi, y)[None, :] - cost_matrix(x, y)
    ii, jj = np.nonzero(excess > tol)
    order = np.lexsort((jj, ii, -excess[ii, jj]))
    return [AdmissibilityViolation(x[i].copy(), y[j].copy(), float(excess[i, j]), int(i), int(j))
            for i, j in zip(ii[order], jj[order])]


def lipschitz_estimate(phi, set_a, set_b=None):
    """Largest |phi(x) - phi(y)| / |x - y| over x in ``set_a``, y in ``set_b``.

    With ``set_b`` omitted the scan runs within ``set_a``. Pairs closer than
    1e-12 are skipped.
    """
    a = _points(set_a)
    b = a if set_b is None else _points(set_b)
    dist = cost_matrix(a, b)
    keep = dist >= COINCIDENT
    if not keep.any():
        raise UndefinedEstimateError("all pairs are coincident")
    diff = np.abs(_detached_values(phi, a)[:, None] - _detached_values(phi, b)[None, :])
    return float(np.max(diff[keep] / dist[keep]))


# --- analytic potentials (1-Lipschitz families used for checks) -----------------

def linear_potential(direction, offset=0.0):
    """phi(x) = <direction, x> + offset, differentiable in nothing but x."""
    a = np.asarray(direction, dtype=np.float64).reshape(-1, 1)
    col = ad.Tensor(a)

    def phi(x):
        return ad.add(ad.matmul(ad.as_tensor(x), col), offset).reshape(-1)

    phi.slope = float(np.linalg.norm(a))
    return phi


def cone_potential(centers, offsets):
    """phi(x) = min_k |x - p_k| + b_k, which is 1-Lipschitz for any centers/offsets."""
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    offsets = np.asarray(offsets, dtype=np.float64).reshape(-1)

    def phi(x):
        pts = ad.as_tensor(x).data
        return ad.Tensor((cdist(pts, centers) + offsets[None, :]).min(axis=1))

    return phi
