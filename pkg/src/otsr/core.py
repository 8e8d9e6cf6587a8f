"""Probability vectors, ground costs and the Shannon entropy.

Everything downstream works on flat float64 arrays. A *probability vector*
is a read-only 1-D array with nonnegative finite entries summing to one; an
image of side ``m`` is flattened row-major (``i = r * m + c``) so that it
lines up with :func:`cost_grid2d`.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import NegativeEntry, NonFinite, ZeroMass

__all__ = [
    "SUM_TOL",
    "CostMatrix",
    "TransportPlan",
    "make_probvec",
    "is_probvec",
    "cost_grid2d",
    "cost_lattice1d",
    "entropy",
    "entropy_grad",
]

#: Maximum allowed deviation of a probability vector's sum from one.
SUM_TOL = 1e-9

# Inputs already this close to unit mass are returned unchanged, which makes
# make_probvec exactly idempotent.
_IDEMPOTENT_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def make_probvec(raw):
    """Normalize a nonnegative sequence to unit mass.

    Parameters
    ----------
    raw : array_like
        Nonnegative finite values. Any shape is accepted and flattened
        row-major.

    Returns
    -------
    numpy.ndarray
        Read-only float64 vector summing to one.

    Raises
    ------
    NonFinite, NegativeEntry, ZeroMass
    """
    x = np.asarray(raw, dtype=float).ravel()
    if x.size == 0:
        raise ZeroMass()
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        raise NonFinite(int(bad[0]))
    neg = np.flatnonzero(x < 0)
    if neg.size:
        raise NegativeEntry(int(neg[0]))
    total = x.sum()
    if total <= 0:
        raise ZeroMass()
    if abs(total - 1.0) <= _IDEMPOTENT_TOL:
        return _frozen(x)
    return _frozen(x / total)


def is_probvec(p, tol=SUM_TOL):
    p = np.asarray(p, dtype=float)
    return bool(
        p.ndim == 1
        and p.size > 0
        and np.all(np.isfinite(p))
        and np.all(p >= 0)
        and abs(p.sum() - 1.0) <= tol
    )


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Square ground-cost matrix together with the geometry that produced it.

    ``np.asarray(cost)`` yields the entries, so a ``CostMatrix`` can be
    passed anywhere a plain array is expected.
    """

    entries: np.ndarray
    geometry: str
    m: Optional[int] = None
    metric: Optional[str] = None
    power: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(self.entries))

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True, eq=False)
class TransportPlan:
    entries: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def marginal_error(self):
        """Max-norm violation of both marginal constraints."""
        rows = np.abs(self.entries.sum(axis=1) - self.row_marginal).max()
        cols = np.abs(self.entries.sum(axis=0) - self.col_marginal).max()
        return float(max(rows, cols))


def cost_lattice1d(n, power=1.0):
    """Cost ``|i - j| ** power`` between positions of a 1-D lattice.

    ``power=1`` gives the lattice metric. ``power=2`` (squared distance) is
    not a metric, but its steeper growth is what the two-peak 1-D demo needs
    (see ``demos/demo_1d_sparse.py``).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    idx = np.arange(n, dtype=float)
    c = np.abs(idx[:, None] - idx[None, :]) ** power
    return CostMatrix(c, "lattice-1d", power=float(power))


def cost_grid2d(m, metric="L2"):
    """Pixel-to-pixel distance on an ``m x m`` grid, row-major indexing.

    Parameters
    ----------
    m : int
        Side length; the matrix has shape ``(m*m, m*m)``.
    metric : {"L2", "L1"}
        Euclidean or Manhattan distance between integer pixel coordinates.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    metric = metric.upper()
    r, c = np.divmod(np.arange(m * m), m)
    dr = np.abs(r[:, None] - r[None, :]).astype(float)
    dc = np.abs(c[:, None] - c[None, :]).astype(float)
    if metric == "L2":
        cost = np.hypot(dr, dc)
    elif metric == "L1":
        cost = dr + dc
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return CostMatrix(cost, "grid-2d", m=m, metric=metric)


def entropy(p):
    """Shannon entropy ``-sum p log p`` with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    q = p[p > 0]
    return float(-np.sum(q * np.log(q)))


def entropy_grad(p):
    """Derivative of :func:`entropy`, set to zero on the zero entries of ``p``.

    The analytic derivative ``-(log p_i + 1)`` is unbounded at the boundary
    of the simplex; zeroing it there keeps the sparse solver on the face it
    has reached.
    """
    p = np.asarray(p, dtype=float)
    g = np.zeros_like(p)
    pos = p > 0
    g[pos] = -(np.log(p[pos]) + 1.0)
    return g
