"""Sparse approximation of a histogram by entropy-penalized transport.

:func:`sparse_approx` minimizes

    J(mu) = d_eps(mu, nu) + lam * H(mu)

over the probability simplex, where ``d_eps`` is the Sinkhorn transport cost
and ``H`` the Shannon entropy. Each step moves against the dual potential
plus ``lam * grad H``, restricted to the current support and centred there.
Negative entries are clamped to zero and the iterate is renormalized. A
coordinate that reaches zero never comes back, so the support only shrinks.
"""

from dataclasses import dataclass, field, replace
from typing import List

import numpy as np

from .core import entropy, entropy_grad, make_probvec
from .exceptions import DimensionMismatch, EmptySupport
from .sinkhorn import SinkhornConfig, sinkhorn

__all__ = [
    "SolverConfig",
    "SparseSolveTrace",
    "objective",
    "project_tangent",
    "sparse_approx",
    "SIMULATION_DEFAULTS",
    "STAR_DEFAULTS",
]

# Backtracking halves the trial step at most this many times.
_MAX_HALVINGS = 20


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of :func:`sparse_approx`.

    Every iteration first tries ``step_cap`` (``min(initial_step, step_cap)``
    on the very first iteration) and halves the trial step until the
    objective strictly decreases, down to ``step_cap / 2**20``.
    """

    lam: float = 1.0
    initial_step: float = 0.01
    step_cap: float = 0.01
    max_steps: int = 50
    tol: float = 1e-6
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if not (self.initial_step > 0 and self.step_cap > 0):
            raise ValueError("step sizes must be positive")
        if self.max_steps < 0:
            raise ValueError("max_steps must be nonnegative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    @property
    def epsilon(self):
        return self.sinkhorn.epsilon

    def with_(self, **kwargs):
        """Copy with fields replaced; ``epsilon``, ``sinkhorn_iters`` and
        ``sinkhorn_tol`` are forwarded to the nested Sinkhorn config."""
        sk = {}
        for key, name in (
            ("epsilon", "epsilon"),
            ("sinkhorn_iters", "max_iter"),
            ("sinkhorn_tol", "tol"),
        ):
            if key in kwargs:
                sk[name] = kwargs.pop(key)
        cfg = replace(self, **kwargs)
        if sk:
            cfg = replace(cfg, sinkhorn=replace(cfg.sinkhorn, **sk))
        return cfg


#: Settings of the 1-D two-peak demo.
SIMULATION_DEFAULTS = SolverConfig(
    lam=10.0,
    initial_step=0.01,
    step_cap=0.01,
    max_steps=50,
    sinkhorn=SinkhornConfig(epsilon=0.1, max_iter=5000),
)

#: Settings for 32x32 star-field patches.
STAR_DEFAULTS = SolverConfig(
    lam=1.0,
    initial_step=0.001,
    step_cap=0.01,
    max_steps=50,
    sinkhorn=SinkhornConfig(epsilon=0.001, max_iter=500),
)


@dataclass(eq=False)
class SparseSolveTrace:
    """Iterates and objective values of one :func:`sparse_approx` run.

    ``iterates[0]`` is the measurement itself; ``objectives[t]`` is J at
    ``iterates[t]``. ``stop_reason`` is one of ``"converged"``,
    ``"max_steps"``, ``"line_search_stalled"`` or ``"stationary"`` (zero
    projected gradient, e.g. a point mass).
    """

    iterates: List[np.ndarray]
    objectives: List[float]
    step_sizes: List[float]
    converged: bool
    stop_reason: str
    sinkhorn_unconverged: int = 0

    @property
    def final(self):
        return self.iterates[-1]

    @property
    def steps(self):
        return len(self.iterates) - 1


def objective(mu, nu, cost, lam, epsilon=None, sinkhorn_config=None):
    """``d_eps(mu, nu) + lam * H(mu)``, using the Sinkhorn transport cost."""
    cfg = sinkhorn_config or SinkhornConfig()
    if epsilon is not None:
        cfg = replace(cfg, epsilon=epsilon)
    return sinkhorn(mu, nu, cost, cfg).distance + lam * entropy(mu)


def project_tangent(w, support):
    """Restrict ``w`` to ``support`` and remove its mean there.

    >>> project_tangent([3.0, 5.0, 7.0], [0, 2])
    array([-2.,  0.,  2.])
    """
    w = np.asarray(w, dtype=float)
    support = np.asarray(support)
    if support.dtype != bool:
        mask = np.zeros(w.shape, dtype=bool)
        mask[support] = True
        support = mask
    if not support.any():
        raise EmptySupport("cannot project onto an empty face")
    out = np.zeros_like(w)
    out[support] = w[support] - w[support].mean()
    return out


def _step(v, w, alpha):
    t = v - alpha * w
    t[t < 0] = 0.0
    total = t.sum()
    if total <= 0:
        return None
    return make_probvec(t / total)


def sparse_approx(nu, cost, config=None):
    """Sparse approximation of ``nu`` by projected gradient descent.

    Parameters
    ----------
    nu : array_like, shape (n,)
        Measurement; normalized to unit mass if needed.
    cost : array_like or CostMatrix, shape (n, n)
    config : SolverConfig, optional

    Returns
    -------
    SparseSolveTrace
    """
    cfg = config or SolverConfig()
    nu = make_probvec(nu)
    if np.asarray(cost).shape != (nu.size, nu.size):
        raise DimensionMismatch(
            f"cost shape {np.asarray(cost).shape} does not match n={nu.size}"
        )
    sk_cfg = cfg.sinkhorn
    lam = cfg.lam
    unconverged = 0

    def evaluate(mu):
        nonlocal unconverged
        res = sinkhorn(mu, nu, cost, sk_cfg)
        if not res.converged:
            unconverged += 1
        return res, res.distance + lam * entropy(mu)

    v = nu
    res, j = evaluate(v)
    iterates = [v]
    objectives = [j]
    steps = []
    alpha0 = min(cfg.initial_step, cfg.step_cap)
    min_alpha = cfg.step_cap * 2.0**-_MAX_HALVINGS
    converged = False
    reason = "max_steps"

    for _ in range(cfg.max_steps):
        support = v > 0
        w = np.where(support, res.potential_f, 0.0) + lam * entropy_grad(v)
        w = project_tangent(w, support)
        if not np.any(w):
            converged, reason = True, "stationary"
            break
        alpha = alpha0
        accepted = None
        while alpha >= min_alpha:
            trial = _step(v, w, alpha)
            if trial is not None:
                trial_res, trial_j = evaluate(trial)
                if trial_j < j:
                    accepted = trial
                    break
            alpha /= 2
        if accepted is None:
            reason = "line_search_stalled"
            break
        change = float(np.abs(accepted - v).sum())
        v, res, j = accepted, trial_res, trial_j
        iterates.append(v)
        objectives.append(j)
        steps.append(alpha)
        alpha0 = cfg.step_cap
        if change <= cfg.tol:
            converged, reason = True, "converged"
            break

    return SparseSolveTrace(
        iterates=iterates,
        objectives=objectives,
        step_sizes=steps,
        converged=converged,
        stop_reason=reason,
        sinkhorn_unconverged=unconverged,
    )
