"""Entropic optimal transport by Sinkhorn matrix scaling.

The solver alternates the two scaling updates

    f_i = mu_i / sum_j exp(-C_ij / eps) g_j
    g_j = nu_j / sum_i exp(-C_ij / eps) f_i

until the implied plan ``P_ij = f_i exp(-C_ij / eps) g_j`` matches both
marginals. Two numerical modes are provided:

* ``stabilized=True`` (default) keeps the dual potentials ``eps * log f`` and
  ``eps * log g`` explicitly and only scales a kernel in which those
  potentials have been absorbed, with optional eps-scaling warm-up. This is
  required for small ``eps`` relative to the cost range, e.g. ``eps=1e-3``
  on a 32x32 pixel grid where ``exp(-C/eps)`` underflows entirely.
* ``stabilized=False`` iterates on the plain kernel exactly as written
  above. It exists to cross-check the stabilized mode.

Entries where a marginal is zero are dropped from the iteration; the
corresponding rows or columns of the plan are zero and their potential is
``-inf``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import SUM_TOL, TransportPlan
from .exceptions import DimensionMismatch, NotConverged, NumericalUnderflow

__all__ = [
    "SinkhornConfig",
    "SinkhornResult",
    "sinkhorn",
    "grad_wrt_first",
    "projected_potential",
]

# Scalings outside [1/_ABSORB, _ABSORB] are folded into the potentials.
_ABSORB = 1e50
# Marginal tolerance for intermediate eps-scaling stages.
_STAGE_TOL = 1e-5


@dataclass(frozen=True)
class SinkhornConfig:
    """Parameters of :func:`sinkhorn`.

    Attributes
    ----------
    epsilon : float
        Entropic regularization strength, in cost units.
    max_iter : int
        Cap on scaling iterations, summed over eps-scaling stages.
    tol : float
        Convergence threshold on the max-norm marginal violation.
    stabilized : bool
        Log-domain absorption scheme (True) or plain kernel scaling (False).
    eps_scaling : bool
        Start the stabilized solve at the largest cost and halve epsilon down
        to the target. Ignored when ``stabilized`` is False.
    """

    epsilon: float = 0.1
    max_iter: int = 1000
    tol: float = 1e-8
    stabilized: bool = True
    eps_scaling: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True, eq=False)
class SinkhornResult:
    """Output of :func:`sinkhorn`.

    ``distance`` is the transport cost ``sum C_ij P_ij`` of the regularized
    plan. ``regularized_cost`` is the optimal value of the regularized
    problem, ``sum C_ij P_ij + eps * sum P_ij log P_ij``. The dual potentials
    ``potential_f = eps * log f`` and ``potential_g = eps * log g`` are,
    up to an additive constant, the gradients of ``regularized_cost`` with
    respect to ``mu`` and ``nu``.
    """

    distance: float
    regularized_cost: float
    potential_f: np.ndarray
    potential_g: np.ndarray
    plan: TransportPlan
    iterations: int
    converged: bool
    marginal_error: float
    epsilon: float


def _check_inputs(mu, nu, cost):
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    cost = np.asarray(cost, dtype=float)
    if mu.ndim != 1 or nu.ndim != 1:
        raise DimensionMismatch("marginals must be 1-D")
    if cost.shape != (mu.size, nu.size):
        raise DimensionMismatch(
            f"cost shape {cost.shape} does not match marginals ({mu.size}, {nu.size})"
        )
    for name, p in (("mu", mu), ("nu", nu)):
        if not (np.all(np.isfinite(p)) and np.all(p >= 0)):
            raise ValueError(f"{name} must be finite and nonnegative")
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"{name} must sum to one (got {p.sum()!r})")
    return mu, nu, cost


def _safe_log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _scale_direct(m, n, c, eps, max_iter, tol):
    kernel = np.exp(-c / eps)
    if np.any(kernel.sum(axis=1) == 0) or np.any(kernel.sum(axis=0) == 0):
        raise NumericalUnderflow(
            f"kernel exp(-C/eps) has an all-zero row or column at eps={eps}"
        )
    f = np.ones_like(m)
    g = np.ones_like(n)
    it = 0
    converged = False
    while True:
        kg = kernel @ g
        if it > 0 and np.abs(f * kg - m).max() <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        if np.any(kg == 0):
            raise NumericalUnderflow("kernel row sum underflowed during scaling")
        f = m / kg
        ktf = kernel.T @ f
        if np.any(ktf == 0):
            raise NumericalUnderflow("kernel column sum underflowed during scaling")
        g = n / ktf
        it += 1
    with np.errstate(divide="ignore"):
        return eps * np.log(f), eps * np.log(g), it, converged


def _scale_stabilized(m, n, c, eps, max_iter, tol, eps_scaling):
    log_m = np.log(m)
    log_n = np.log(n)
    a = np.zeros_like(m)
    b = np.zeros_like(n)
    e = max(eps, float(c.max())) if eps_scaling else eps
    it = 0
    converged = False
    while True:
        final = e == eps
        stage_tol = tol if final else max(tol, _STAGE_TOL)
        # log-domain half steps so no kernel row or column starts out empty
        a = e * (log_m - logsumexp((b[None, :] - c) / e, axis=1))
        b = e * (log_n - logsumexp((a[:, None] - c) / e, axis=0))
        kernel = np.exp((a[:, None] + b[None, :] - c) / e)
        u = np.ones_like(m)
        v = np.ones_like(n)
        while True:
            kv = kernel @ v
            if np.abs(u * kv - m).max() <= stage_tol:
                converged = final
                break
            if it >= max_iter:
                break
            if np.any(kv == 0):
                a += e * np.log(u)
                b += e * np.log(v)
                a = e * (log_m - logsumexp((b[None, :] - c) / e, axis=1))
                kernel = np.exp((a[:, None] + b[None, :] - c) / e)
                u[:] = 1.0
                v[:] = 1.0
                kv = kernel @ v
            u = m / kv
            ktu = kernel.T @ u
            if np.any(ktu == 0):
                a += e * np.log(u)
                b += e * np.log(v)
                b = e * (log_n - logsumexp((a[:, None] - c) / e, axis=0))
                kernel = np.exp((a[:, None] + b[None, :] - c) / e)
                u[:] = 1.0
                v[:] = 1.0
                ktu = kernel.T @ u
            v = n / ktu
            it += 1
            if (
                u.max() > _ABSORB
                or v.max() > _ABSORB
                or u.min() < 1 / _ABSORB
                or v.min() < 1 / _ABSORB
            ):
                a += e * np.log(u)
                b += e * np.log(v)
                kernel = np.exp((a[:, None] + b[None, :] - c) / e)
                u[:] = 1.0
                v[:] = 1.0
        a += e * np.log(u)
        b += e * np.log(v)
        if final:
            break
        if it >= max_iter:
            # out of budget mid-schedule: one half step at the target eps so
            # the returned plan is built from potentials at the right scale
            a = eps * (log_m - logsumexp((b[None, :] - c) / eps, axis=1))
            b = eps * (log_n - logsumexp((a[:, None] - c) / eps, axis=0))
            break
        e = max(eps, e / 2)
    return a, b, it, converged


def sinkhorn(mu, nu, cost, config=None):
    """Entropic-regularized optimal transport between two histograms.

    Parameters
    ----------
    mu, nu : array_like, shape (n,), (m,)
        Probability vectors. Zero entries are allowed.
    cost : array_like or CostMatrix, shape (n, m)
        Ground cost.
    config : SinkhornConfig, optional

    Returns
    -------
    SinkhornResult

    Raises
    ------
    DimensionMismatch
        If the shapes of ``mu``, ``nu`` and ``cost`` disagree.
    NumericalUnderflow
        Direct mode only, when the plain kernel loses a whole row or column.

    Examples
    --------
    >>> import numpy as np
    >>> r = sinkhorn([0.5, 0.5], [0.5, 0.5], np.array([[0.0, 1.0], [1.0, 0.0]]))
    >>> round(r.distance, 6)
    0.0
    """
    cfg = config or SinkhornConfig()
    mu, nu, cost = _check_inputs(mu, nu, cost)
    rows = mu > 0
    cols = nu > 0
    m = mu[rows]
    n = nu[cols]
    c = cost[np.ix_(rows, cols)]
    eps = cfg.epsilon

    if cfg.stabilized:
        a, b, it, converged = _scale_stabilized(
            m, n, c, eps, cfg.max_iter, cfg.tol, cfg.eps_scaling
        )
    else:
        a, b, it, converged = _scale_direct(m, n, c, eps, cfg.max_iter, cfg.tol)

    log_p = (a[:, None] + b[None, :] - c) / eps
    p_sub = np.exp(log_p)
    plan = np.zeros(cost.shape)
    plan[np.ix_(rows, cols)] = p_sub
    err = float(
        max(np.abs(p_sub.sum(axis=1) - m).max(), np.abs(p_sub.sum(axis=0) - n).max())
    )
    distance = float(np.sum(p_sub * c))
    pos = p_sub > 0
    neg_ent = float(np.sum(p_sub[pos] * log_p[pos]))

    pot_f = np.full(mu.size, -np.inf)
    pot_f[rows] = a
    pot_g = np.full(nu.size, -np.inf)
    pot_g[cols] = b
    return SinkhornResult(
        distance=distance,
        regularized_cost=distance + eps * neg_ent,
        potential_f=pot_f,
        potential_g=pot_g,
        plan=TransportPlan(plan, mu, nu),
        iterations=it,
        converged=converged and err <= cfg.tol,
        marginal_error=err,
        epsilon=eps,
    )


def projected_potential(potential, support):
    """Project a dual potential onto the tangent space of a simplex face.

    Entries outside ``support`` are set to zero and the mean over the
    support is subtracted from the rest.
    """
    support = np.asarray(support, dtype=bool)
    out = np.zeros(support.shape)
    vals = np.asarray(potential, dtype=float)[support]
    out[support] = vals - vals.mean()
    return out


def grad_wrt_first(result, mu, require_converged=True):
    """Simplex-tangent gradient of the regularized cost with respect to ``mu``.

    This is ``potential_f`` centred over the support of ``mu``, with zeros
    where ``mu`` vanishes. The result sums to zero.

    Raises
    ------
    NotConverged
        If ``result.converged`` is False and ``require_converged`` is set.
    """
    if require_converged and not result.converged:
        raise NotConverged(
            f"Sinkhorn stopped after {result.iterations} iterations "
            f"with marginal error {result.marginal_error:.3g}"
        )
    return projected_potential(result.potential_f, np.asarray(mu) > 0)
