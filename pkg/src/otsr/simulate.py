"""Noise models, exact transport oracles and brute-force sparse retrieval.

These routines are small-scale references used to check the solvers:

* :func:`generate_noisy` / :func:`assignment_bound` draw Gaussian clouds
  around a few point sources and compute the cost of sending every sample
  back to its own source, an upper bound on the squared-Euclidean transport
  distance between the clean and noisy empirical measures. Its mean is
  ``d * sigma**2`` and its variance ``2 * d * sigma**4 / N``.
* :func:`exact_ot_1d` and :func:`exact_ot_lp` compute unregularized optimal
  transport exactly, by the cumulative-distribution formula and by linear
  programming respectively.
* :func:`sparse_retrieval_bruteforce` finds the lowest-entropy histogram
  on a simplex grid within a transport ball, and :func:`stability_probe`
  measures how that minimizer moves when the centre of the ball is
  perturbed.
"""

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .core import CostMatrix, make_probvec
from .exceptions import DimensionMismatch, EmptyFeasibleSet, TooLarge

__all__ = [
    "NoisySampleSet",
    "generate_noisy",
    "assignment_bound",
    "exact_ot_1d",
    "exact_ot_lp",
    "empirical_ot_sq",
    "simplex_grid",
    "sparse_retrieval_bruteforce",
    "stability_probe",
    "noise_bench",
    "NOISE_BENCH_COLUMNS",
    "write_rows_csv",
]

LP_MAX_VARIABLES = 144
BRUTE_MAX_N = 8
BRUTE_MAX_POINTS = 2_000_000
# Strict ball constraint d < r is tested as d <= r - _BALL_SLACK.
_BALL_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class NoisySampleSet:
    """Gaussian samples around ``k`` point sources in ``R^d``.

    ``samples[i, j]`` is the ``j``-th draw around ``true_points[i]``.
    """

    true_points: np.ndarray
    sigma: float
    samples_per_point: int
    samples: np.ndarray
    seed: int

    @property
    def k(self):
        return self.true_points.shape[0]

    @property
    def d(self):
        return self.true_points.shape[1]

    @property
    def N(self):
        return self.k * self.samples_per_point


def generate_noisy(true_points, sigma, n, seed):
    """Draw ``n`` samples ``p_i + sigma * z`` around every source ``p_i``."""
    p = np.atleast_2d(np.asarray(true_points, dtype=float))
    if p.shape[0] < 1 or p.shape[1] < 1:
        raise ValueError("need at least one source in at least one dimension")
    if n < 1 or sigma < 0:
        raise ValueError("n must be >= 1 and sigma >= 0")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((p.shape[0], n, p.shape[1]))
    samples = p[:, None, :] + sigma * z
    return NoisySampleSet(p, float(sigma), int(n), samples, seed)


def assignment_bound(s):
    """Mean squared distance from each sample to its own source."""
    diff = s.samples - s.true_points[:, None, :]
    return float(np.sum(diff**2) / s.N)


def exact_ot_1d(mu, nu):
    """Exact transport distance on the lattice ``0..n-1`` with cost ``|i-j|``.

    Equals ``sum_i |CDF_mu(i) - CDF_nu(i)|``. Leading axes broadcast, so a
    stack of histograms can be compared in one call.
    """
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if mu.shape[-1] != nu.shape[-1]:
        raise DimensionMismatch(f"lengths differ: {mu.shape[-1]} vs {nu.shape[-1]}")
    cdf = np.cumsum(mu - nu, axis=-1)
    return np.abs(cdf[..., :-1]).sum(axis=-1)


def exact_ot_lp(mu, nu, cost, max_variables=LP_MAX_VARIABLES):
    """Exact optimal transport cost by linear programming (HiGHS simplex).

    Parameters
    ----------
    mu, nu : array_like, shapes (n,), (m,)
        Nonnegative weights with equal total mass.
    cost : array_like, shape (n, m)
    max_variables : int
        Largest plan size ``n * m`` accepted; 144 corresponds to 12 x 12.
    """
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    c = np.asarray(cost, dtype=float)
    n, m = mu.size, nu.size
    if c.shape != (n, m):
        raise DimensionMismatch(f"cost shape {c.shape} does not match ({n}, {m})")
    if n * m > max_variables:
        raise TooLarge(n * m, max_variables)
    a_eq = np.zeros((n + m, n * m))
    for i in range(n):
        a_eq[i, i * m : (i + 1) * m] = 1.0
    for j in range(m):
        a_eq[n + j, j::m] = 1.0
    b_eq = np.concatenate([mu, nu * (mu.sum() / nu.sum())])
    res = linprog(
        c.ravel(),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def empirical_ot_sq(s):
    """Exact squared-Euclidean transport between sources and samples.

    The sources carry weight ``1/k`` each and the samples ``1/N`` each.
    """
    x = s.samples.reshape(-1, s.d)
    cost = np.sum((s.true_points[:, None, :] - x[None, :, :]) ** 2, axis=-1)
    return exact_ot_lp(np.full(s.k, 1.0 / s.k), np.full(s.N, 1.0 / s.N), cost)


def simplex_grid(n, resolution=0.02, max_points=BRUTE_MAX_POINTS):
    """All integer compositions of ``round(1/resolution)`` into ``n`` parts.

    Returns an ``(count, n)`` integer array in lexicographic order.
    """
    total = int(round(1.0 / resolution))
    count = math.comb(total + n - 1, n - 1)
    if count > max_points:
        raise TooLarge(count, max_points)
    # stars and bars: bar positions among total + n - 1 slots
    bars = np.array(list(itertools.combinations(range(total + n - 1), n - 1)), dtype=int)
    bars = bars.reshape(count, n - 1)
    edges = np.hstack([np.full((count, 1), -1), bars, np.full((count, 1), total + n - 1)])
    counts = np.diff(edges, axis=1) - 1
    order = np.lexsort(counts.T[::-1])
    return counts[order]


def _is_lattice_metric(cost):
    return (
        isinstance(cost, CostMatrix)
        and cost.geometry == "lattice-1d"
        and cost.power == 1.0
    )


def _distances_to(grid, nubar, cost):
    if _is_lattice_metric(cost):
        return exact_ot_1d(grid, nubar)
    c = np.asarray(cost, dtype=float)
    return np.array([exact_ot_lp(g, nubar, c) for g in grid])


def _grid_entropy(grid_p):
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(grid_p > 0, grid_p * np.log(grid_p), 0.0)
    return -terms.sum(axis=1)


def sparse_retrieval_bruteforce(nubar, cost, lambda_prime, resolution=0.02):
    """Minimum-entropy grid histogram strictly inside a transport ball.

    Enumerates every histogram with entries on multiples of ``resolution``,
    keeps those with exact transport distance to ``nubar`` below
    ``lambda_prime``, and returns the one with least entropy. Ties go to
    the smaller support, then to the lexicographically smallest grid point.

    Raises
    ------
    TooLarge
        If ``n > 8`` or the grid has more than two million points.
    EmptyFeasibleSet
        If no grid point lies inside the ball.
    """
    nubar = make_probvec(nubar)
    n = nubar.size
    if np.asarray(cost).shape != (n, n):
        raise DimensionMismatch("cost does not match nubar")
    if n > BRUTE_MAX_N:
        raise TooLarge(n, BRUTE_MAX_N)
    if not lambda_prime > 0:
        raise ValueError("lambda_prime must be positive")
    counts = simplex_grid(n, resolution)
    grid_p = counts / counts.sum(axis=1, keepdims=True)
    dist = _distances_to(grid_p, nubar, cost)
    feasible = dist <= lambda_prime - _BALL_SLACK
    if not feasible.any():
        raise EmptyFeasibleSet(f"no grid point within {lambda_prime} of nubar")
    idx = np.flatnonzero(feasible)
    h = np.round(_grid_entropy(grid_p[idx]), 12)
    support = (counts[idx] > 0).sum(axis=1)
    # grid is already lexicographic, so a stable sort on (h, support) keeps that order
    best = idx[np.lexsort((support, h))[0]]
    return make_probvec(grid_p[best])


def stability_probe(nu, cost, lambda_prime, perturbation_size, trials, seed, resolution=0.02):
    """Largest L1 move of the brute-force retrieval under random perturbations.

    Each trial mixes ``nu`` with a random Dirichlet histogram so that the
    transport distance from ``nu`` is at most ``perturbation_size`` (exactly
    so for metric costs, where that distance scales linearly along the
    segment), then reruns :func:`sparse_retrieval_bruteforce`.
    """
    nu = make_probvec(nu)
    base = sparse_retrieval_bruteforce(nu, cost, lambda_prime, resolution)
    if perturbation_size <= 0:
        return 0.0
    worst = 0.0
    for t in range(trials):
        rng = np.random.default_rng(seed + t)
        q = rng.dirichlet(np.ones(nu.size))
        full = float(_distances_to(q[None, :], nu, cost)[0])
        if full == 0:
            continue
        radius = perturbation_size * rng.uniform()
        s = min(1.0, radius / full)
        moved = make_probvec(nu + s * (q - nu))
        out = sparse_retrieval_bruteforce(moved, cost, lambda_prime, resolution)
        worst = max(worst, float(np.abs(out - base).sum()))
    return worst


NOISE_BENCH_COLUMNS = ("trial", "bound", "exact_distance")


def noise_bench(d, sigma, n, k, trials, seed, exact=True):
    """Monte Carlo rows ``(trial, bound, exact_distance)``.

    Source positions are drawn once from ``seed`` (uniform in ``[-5, 5]^d``);
    trial ``t`` uses seed ``seed + t``. ``exact_distance`` is NaN when
    ``exact`` is False.
    """
    rng = np.random.default_rng(seed)
    points = rng.uniform(-5.0, 5.0, size=(k, d))
    rows = []
    for t in range(trials):
        s = generate_noisy(points, sigma, n, seed + t)
        bound = assignment_bound(s)
        dist = empirical_ot_sq(s) if exact else float("nan")
        rows.append((t, bound, dist))
    return rows


def write_rows_csv(path_or_file, header, rows):
    """Write rows with ``repr``-exact floats so reruns are byte-identical."""

    def fmt(x):
        if isinstance(x, (float, np.floating)):
            return repr(float(x))
        return str(x)

    def emit(f):
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as f:
            emit(f)
