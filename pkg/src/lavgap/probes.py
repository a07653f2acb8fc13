"""Seeded probe sets and checker verdicts shared by the falsification checkers."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

DEFAULT_PROBES = 10_000
#: A checked inequality counts as violated only beyond this margin.
VIOLATION_TOL = 1e-9


class Verdict(str, Enum):
    PASS = "pass"
    FALSIFIED = "falsified"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class HypothesisReport:
    name: str
    verdict: Verdict
    witness: Optional[Dict[str, Any]] = None
    statistic: Optional[float] = None
    detail: str = ""

    def __post_init__(self):
        if self.verdict is Verdict.FALSIFIED and self.witness is None:
            raise ValueError("a falsified verdict needs a witness")

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    def as_dict(self) -> Dict[str, Any]:
        out = {"name": self.name, "verdict": self.verdict.value}
        if self.statistic is not None:
            out["statistic"] = self.statistic
        if self.witness is not None:
            out["witness"] = self.witness
        if self.detail:
            out["detail"] = self.detail
        return out


def witness(**values) -> Dict[str, Any]:
    """Plain-float witness record (arrays become lists)."""
    out = {}
    for k, v in values.items():
        arr = np.asarray(v, dtype=float)
        out[k] = float(arr) if arr.ndim == 0 else arr.tolist()
    return out


@dataclass(frozen=True)
class ProbeSet:
    """Points ``(s, z, v)`` with ``n = 1`` stored as flat arrays."""

    s: np.ndarray
    z: np.ndarray
    v: np.ndarray
    seed: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.s.shape == self.z.shape[: self.s.ndim] == self.v.shape[: self.s.ndim]):
            raise ValueError("probe arrays must share their leading shape")
        if self.s.size == 0:
            raise ValueError("empty probe set")

    def __len__(self):
        return self.s.shape[0]

    def subset(self, mask) -> "ProbeSet":
        return ProbeSet(self.s[mask], self.z[mask], self.v[mask], self.seed)

    @classmethod
    def uniform(cls, seed, size, s_range, z_range, v_range) -> "ProbeSet":
        rng = np.random.default_rng(seed)
        s = rng.uniform(*s_range, size)
        z = rng.uniform(*z_range, size)
        v = rng.uniform(*v_range, size)
        return cls(s, z, v, seed)

    @classmethod
    def along(cls, traj, seed=0, size=DEFAULT_PROBES, v_max=10.0, log_share=0.5) -> "ProbeSet":
        """Probes on ``I x y(I) x [-v_max, v_max]``.

        ``z`` is ``y`` at an independent random time so ``z`` ranges over the
        image; a ``log_share`` fraction of speeds is log-uniform in
        ``[1e-6, v_max]`` to reach both small and large velocities.
        """
        rng = np.random.default_rng(seed)
        s = rng.uniform(traj.t, traj.T, size)
        z = np.asarray(traj.value(rng.uniform(traj.t, traj.T, size)), dtype=float)
        n_log = int(size * log_share)
        mag = np.concatenate([
            np.exp(rng.uniform(np.log(1e-6), np.log(v_max), n_log)),
            rng.uniform(0.0, v_max, size - n_log),
        ])
        sign = rng.choice([-1.0, 1.0], size)
        return cls(s, z, sign * mag, seed)


@dataclass(frozen=True)
class ConditionSConstants:
    """Candidate constants for the time-Lipschitz condition on ``Lambda``.

    ``gamma_bound`` is a uniform bound standing in for an integrable ``gamma``.
    """

    kappa: float = 0.0
    beta: float = 0.0
    gamma_bound: float = 0.0
    eps_star: float = 1.0
    K: float = 1.0

    def __post_init__(self):
        if min(self.kappa, self.beta, self.gamma_bound) < 0:
            raise ValueError("kappa, beta and gamma_bound must be nonnegative")
        if not (self.eps_star > 0 and self.K > 0):
            raise ValueError("eps_star and K must be positive")
