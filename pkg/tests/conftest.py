import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import otsr.cli
import otsr.pipeline
import otsr.solver

from invariants import trace_violations
from report import RESULTS, SOLVER_LOG

_original = otsr.solver.sparse_approx


def _recording_sparse_approx(*args, **kwargs):
    trace = _original(*args, **kwargs)
    SOLVER_LOG.append(trace_violations(trace))
    return trace


for _mod in (otsr.solver, otsr.pipeline, otsr.cli):
    _mod.sparse_approx = _recording_sparse_approx


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in RESULTS:
        terminalreporter.write_line(line)
    bad = sum(1 for v in SOLVER_LOG if v)
    terminalreporter.write_line(
        f"solver traces recorded this session: {len(SOLVER_LOG)}, with violations: {bad}"
    )


def pytest_collection_modifyitems(items):
    # acceptance last, so the solver-invariant criterion sees every solver run
    items.sort(key=lambda item: item.module.__name__ == "test_acceptance")
