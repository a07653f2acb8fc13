"""Numerical toolkit for Lipschitz approximation by time reparametrization and energy gaps."""

__version__ = "0.1.0"

from .core import Interval, IntervalSet, Trajectory  # noqa: E402
from .energy import convergence_study, energy  # noqa: E402
from .examples import get_example, list_examples  # noqa: E402
from .lagrangian import DistanceKind, Lagrangian  # noqa: E402
from .reparam import Anchor, build_time_change, make_plan, reparametrize  # noqa: E402

__all__ = [
    "Anchor", "DistanceKind", "Interval", "IntervalSet", "Lagrangian", "Trajectory",
    "build_time_change", "convergence_study", "energy", "get_example", "list_examples",
    "make_plan", "reparametrize", "__version__",
]
