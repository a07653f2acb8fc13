import numpy as np
import pytest

from lavgap.core import Interval, Trajectory
from lavgap.examples import get_example
from lavgap.lagrangian import Lagrangian


def line(a=0.0, b=1.0, slope=1.0, c=0.0):
    return Trajectory(Interval(a, b), lambda s: c + slope * np.asarray(s, dtype=float),
                      lambda s: np.full(np.shape(s), slope, dtype=float),
                      monotone=slope != 0,
                      inverse=(lambda z: (np.asarray(z, dtype=float) - c) / slope) if slope else None,
                      name="line")


def quadratic_lagrangian(**kw):
    return Lagrangian(lam=lambda s, z, v: np.asarray(v, dtype=float) ** 2,
                      psi=lambda s, z: np.ones(np.broadcast_shapes(np.shape(s), np.shape(z))),
                      lam_grad_v=lambda s, z, v: 2.0 * np.asarray(v, dtype=float),
                      growth=(1.0, 0.25), name="v^2", **kw)


def barrier_lagrangian():
    """1/(1 - |v|) on |v| < 1."""
    return Lagrangian(lam=lambda s, z, v: 1.0 / (1.0 - np.abs(v)),
                      psi=lambda s, z: np.ones(np.broadcast_shapes(np.shape(s), np.shape(z))),
                      domain=lambda s, z, v: np.abs(np.asarray(v, dtype=float)) < 1.0,
                      real_valued=False, name="barrier")


@pytest.fixture(scope="session")
def mania():
    return get_example("mania")


@pytest.fixture(scope="session")
def alberti():
    return get_example("alberti")


@pytest.fixture(scope="session")
def baseline():
    return get_example("baseline")


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for *_, line in results:
        tr.write_line(line)
    by = {}
    for crit, _, ok, _ in results:
        by.setdefault(crit, []).append(ok)
    tr.write_line("")
    for crit, oks in by.items():
        tr.write_line(f"criterion {crit}: {'PASS' if all(oks) else 'FAIL'} "
                      f"({sum(oks)}/{len(oks)} checks)")
