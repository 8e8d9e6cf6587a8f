"""Sparse approximation of a noisy two-cluster histogram on ten points.

The measurement has a narrow cluster at the left end and a wide cluster
around position 8. With a growing entropy weight the solver first keeps
the measurement, then collapses each cluster to a single spike, then
merges everything into one spike.

Run with ``python3 demos/demo_1d_sparse.py``.
"""

import numpy as np

from otsr.cli import DEMO_NU
from otsr.core import cost_lattice1d, entropy, make_probvec
from otsr.solver import SIMULATION_DEFAULTS, sparse_approx


def main():
    nu = make_probvec(DEMO_NU)
    cost = cost_lattice1d(nu.size, power=2.0)
    np.set_printoptions(precision=3, suppress=True)
    print(f"measurement       {nu}  H={entropy(nu):.3f}")
    for lam in (0.0, 10.0, 100.0):
        trace = sparse_approx(nu, cost, SIMULATION_DEFAULTS.with_(lam=lam))
        mu = trace.final
        print(
            f"lambda={lam:<6g}     {mu}  H={entropy(mu) + 0.0:.3f}  "
            f"steps={trace.steps} ({trace.stop_reason})"
        )


if __name__ == "__main__":
    main()
