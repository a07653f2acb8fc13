"""Registry of worked problems with closed-form reference quantities.

``mania``     Lambda = v^6, Psi = (z^3 - s)^2, y = s^(1/3); minimizer with F(y) = 0.
``alberti``   Lambda = 0 on {0 <= z < 1, v <= q(z)}, +inf elsewhere, y = 1 - sqrt(1 - s).
``baseline``  Lambda = v^2, Psi = 1, y = s^0.6; every hypothesis holds.
``power``     Lambda = |v|^q, Psi = 1, y = s^a (the baseline is q = 2, a = 0.6).
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .core import Interval, Trajectory
from .errors import PreconditionError, UnknownExampleError
from .lagrangian import Lagrangian
from .probes import ConditionSConstants

UNIT = Interval(0.0, 1.0)
#: Rounding slack on the Alberti velocity bound v * 2(1 - z) <= 1. The second
#: term absorbs the absolute rounding of ``z`` near 1, which ``v`` amplifies.
ALBERTI_SLACK = 1e-12
ALBERTI_ULP_SLACK = 4.0 * np.finfo(float).eps


@dataclass(frozen=True)
class Analytic:
    """Closed-form reference data.

    ``xi(nu)`` is the supremum of ``P`` over in-domain ``|v| >= nu`` along the
    graph and ``upsilon(lam, rho)`` the infimum of ``P`` over ``|v| < lam``
    well inside the domain by ``rho``.
    """

    F_y: Optional[float] = None
    xi: Optional[Callable[[float], float]] = None
    upsilon: Optional[Callable[[float, float], float]] = None
    closed_forms: Dict[str, Callable] = field(default_factory=dict)


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    lagrangian: Lagrangian
    trajectory: Trajectory
    X: float
    Y: Optional[float]
    analytic: Analytic
    consts: ConditionSConstants
    lambda_bar: Optional[float] = None
    mu: Optional[float] = None
    state_set: Optional[Callable[[np.ndarray], np.ndarray]] = None
    description: str = ""
    params: Dict[str, float] = field(default_factory=dict)


def _cbrt_deriv(s):
    with np.errstate(divide="ignore"):
        return 1.0 / (3.0 * np.cbrt(np.asarray(s, dtype=float)) ** 2)


def mania_psi(s, z):
    """``(z^3 - s)^2`` in factored form, exactly zero on ``z = s^(1/3)``."""
    r = np.cbrt(np.asarray(s, dtype=float))
    z = np.asarray(z, dtype=float)
    return ((z - r) * (z * z + z * r + r * r)) ** 2


# Manià closed forms along the one-endpoint reparametrization at speed nu.

def mania_tau0(nu):
    return (1.0 / (3.0 * nu)) ** 1.5


def mania_s0(nu):
    return 1.0 / (math.sqrt(3.0) * nu**1.5)


def mania_shift(nu):
    return 2.0 / (3.0 * math.sqrt(3.0) * nu**1.5)


def mania_y_nu(s, nu):
    s = np.asarray(s, dtype=float)
    return np.where(s < mania_s0(nu), nu * s, np.cbrt(s - mania_shift(nu)))


def mania_psi_nu(s, nu):
    s = np.asarray(s, dtype=float)
    return np.where(s < mania_s0(nu), (nu * s) ** 3, s + (mania_tau0(nu) - mania_s0(nu)))


def mania_phi_end(nu):
    """``phi_nu(1) = 1 + tau0^(1/3)/nu - tau0``."""
    t0 = mania_tau0(nu)
    return 1.0 + t0 ** (1.0 / 3.0) / nu - t0


def mania_eps(nu):
    t0 = mania_tau0(nu)
    return t0 ** (1.0 / 3.0) / nu - t0


def mania_energy_head(nu):
    """Energy of ``y_nu`` on ``[0, s0)``, where ``y_nu`` is linear."""
    return 68.0 * nu**1.5 / (945.0 * math.sqrt(3.0))


def mania_energy(nu):
    """Full energy of ``y_nu``: linear head plus the tail ``(s - c)^(1/3)``."""
    c = mania_shift(nu)
    tail = 8.0 / (2187.0 * c) - c * c / (2187.0 * (1.0 - c) ** 3)
    return mania_energy_head(nu) + tail


def mania_w11_head(nu):
    """``int_0^s0 |y_nu' - y'|``."""
    t0, s0 = mania_tau0(nu), mania_s0(nu)
    return 2.0 * t0 ** (1.0 / 3.0) - 2.0 * nu * t0 + nu * s0 - s0 ** (1.0 / 3.0)


def mania_w11_head_bound(nu):
    """``y_nu(s0) + y(s0)``, an upper bound for the head term."""
    return 1.0 / math.sqrt(3.0 * nu) + 1.0 / (3.0 ** (1.0 / 6.0) * math.sqrt(nu))


def mania_w11_tail(nu):
    """``int_s0^1 |y_nu' - y'|``, exact by concavity of the cube root."""
    c = mania_shift(nu)
    return ((1.0 - c) ** (1.0 / 3.0) - 1.0) - (1.0 / math.sqrt(3.0 * nu)
                                               - 3.0 ** (-1.0 / 6.0) / math.sqrt(nu))


def mania_truncation_w11(h):
    """``||y_h' - y'||_1`` for the truncation at ``1/h``."""
    return h ** (-1.0 / 3.0)


def _sixth_power(s, z, v):
    with np.errstate(over="ignore"):
        return np.asarray(v, dtype=float) ** 6


def mania() -> ProblemSpec:
    growth_d = 6.0 ** -0.2 * (5.0 / 6.0)
    lag = Lagrangian(
        lam=_sixth_power,
        psi=mania_psi,
        growth=(1.0, growth_d),
        lam_grad_v=lambda s, z, v: 6.0 * np.asarray(v, dtype=float) ** 5,
        name="mania",
    )
    traj = Trajectory(UNIT, np.cbrt, _cbrt_deriv, singular_points=(0.0,), monotone=True,
                      inverse=lambda z: np.asarray(z, dtype=float) ** 3, name="cube root")
    closed = {
        "tau0": mania_tau0, "s0": mania_s0, "shift": mania_shift, "y_nu": mania_y_nu,
        "psi_nu": mania_psi_nu, "phi_end": mania_phi_end, "eps": mania_eps,
        "energy_head": mania_energy_head, "energy": mania_energy,
        "w11_head": mania_w11_head, "w11_head_bound": mania_w11_head_bound,
        "w11_tail": mania_w11_tail, "truncation_w11": mania_truncation_w11,
    }
    analytic = Analytic(
        F_y=0.0,
        xi=lambda nu: -5.0 * nu**6,
        upsilon=lambda lam, rho: -5.0 * lam**6,
        closed_forms=closed,
    )
    return ProblemSpec("mania", lag, traj, 0.0, 1.0, analytic, ConditionSConstants(),
                       lambda_bar=2.0,
                       description="Lambda = v^6, Psi = (z^3 - s)^2, y = s^(1/3) on [0, 1]")


# Alberti closed forms along the final-anchored reparametrization.

def alberti_q(z):
    return 1.0 / (2.0 * (1.0 - np.asarray(z, dtype=float)))


def alberti_t_nu(nu):
    return 1.0 - 1.0 / (4.0 * nu * nu)


def alberti_phi_t_nu(nu):
    return 1.0 - 1.0 / (2.0 * nu * nu)


def alberti_y_nu_tail(s, nu):
    return 1.0 + np.asarray(s, dtype=float) * nu - nu


def _alberti_domain(s, z, v):
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float)
    return (z >= 0.0) & (z < 1.0) & (v * 2.0 * (1.0 - z) <= 1.0 + ALBERTI_SLACK + ALBERTI_ULP_SLACK * np.abs(v))


def _alberti_deriv(s):
    with np.errstate(divide="ignore"):
        return 0.5 / np.sqrt(1.0 - np.asarray(s, dtype=float))


def alberti() -> ProblemSpec:
    lag = Lagrangian(
        lam=lambda s, z, v: np.zeros(np.shape(v)),
        psi=lambda s, z: np.ones(np.broadcast_shapes(np.shape(s), np.shape(z))),
        domain=_alberti_domain,
        real_valued=False,
        name="alberti",
    )
    traj = Trajectory(UNIT, lambda s: 1.0 - np.sqrt(1.0 - np.asarray(s, dtype=float)),
                      _alberti_deriv, singular_points=(1.0,), monotone=True,
                      inverse=lambda z: 1.0 - (1.0 - np.asarray(z, dtype=float)) ** 2,
                      name="1 - sqrt(1 - s)")
    closed = {"q": alberti_q, "t_nu": alberti_t_nu, "phi_t_nu": alberti_phi_t_nu,
              "y_nu_tail": alberti_y_nu_tail}
    analytic = Analytic(F_y=0.0, xi=lambda nu: 0.0, upsilon=lambda lam, rho: 0.0,
                        closed_forms=closed)
    return ProblemSpec("alberti", lag, traj, 0.0, 1.0, analytic, ConditionSConstants(),
                       state_set=lambda z: (np.asarray(z) >= 0.0) & (np.asarray(z) <= 1.0),
                       description="Lambda = indicator of {v <= 1/(2(1 - z))}, "
                                   "y = 1 - sqrt(1 - s) on [0, 1]")


def power(q: float = 2.0, a: float = 0.6, lambda_bar: float = 2.0, mu: float = 0.75,
          name: str = "power") -> ProblemSpec:
    """``Lambda = |v|^q`` with ``Psi = 1`` along ``y = s^a`` on ``[0, 1]``."""
    if q < 1.0:
        raise PreconditionError("q >= 1 required for radial convexity")
    if not 0.0 < a <= 1.0:
        raise PreconditionError("a must lie in (0, 1]")
    if (a - 1.0) * q <= -1.0:
        raise PreconditionError("energy of s^a diverges for this q")
    d = 0.0 if q == 1.0 else q ** (-1.0 / (q - 1.0)) * (1.0 - 1.0 / q)
    lag = Lagrangian(
        lam=lambda s, z, v: np.abs(np.asarray(v, dtype=float)) ** q,
        psi=lambda s, z: np.ones(np.broadcast_shapes(np.shape(s), np.shape(z))),
        growth=(1.0, d),
        lam_grad_v=lambda s, z, v: q * np.sign(v) * np.abs(np.asarray(v, dtype=float)) ** (q - 1),
        name=f"|v|^{q:g}",
    )
    singular = (0.0,) if a < 1.0 else ()

    def deriv(s):
        with np.errstate(divide="ignore"):
            return a * np.asarray(s, dtype=float) ** (a - 1.0)

    traj = Trajectory(UNIT, lambda s: np.asarray(s, dtype=float) ** a, deriv,
                      singular_points=singular, sobolev_p=q, monotone=True,
                      inverse=lambda z: np.asarray(z, dtype=float) ** (1.0 / a),
                      name=f"s^{a:g}")

    def sigma(nu):
        return (a / nu) ** (1.0 / (1.0 - a)) if a < 1.0 else (1.0 if nu < a else 0.0)

    def eps(nu):
        sg = min(sigma(nu), 1.0)
        return sg**a / nu - sg

    closed = {"sigma": sigma, "eps": eps}
    analytic = Analytic(
        F_y=a**q / ((a - 1.0) * q + 1.0),
        xi=lambda nu: (1.0 - q) * nu**q,
        upsilon=lambda lam, rho: (1.0 - q) * lam**q,
        closed_forms=closed,
    )
    return ProblemSpec(name, lag, traj, 0.0, 1.0, analytic, ConditionSConstants(),
                       lambda_bar=lambda_bar, mu=mu,
                       description=f"Lambda = |v|^{q:g}, Psi = 1, y = s^{a:g} on [0, 1]",
                       params={"q": q, "a": a})


def baseline() -> ProblemSpec:
    spec = power(2.0, 0.6, name="baseline")
    return ProblemSpec(**{**spec.__dict__, "params": {},
                          "description": "Lambda = v^2, Psi = 1, y = s^0.6 on [0, 1]"})


REGISTRY: Dict[str, Callable[..., ProblemSpec]] = {
    "mania": mania,
    "alberti": alberti,
    "baseline": baseline,
    "power": power,
}

#: Numeric parameters accepted per registry entry.
PARAMETERS: Dict[str, tuple] = {
    "mania": (), "alberti": (), "baseline": (), "power": ("q", "a", "lambda_bar", "mu"),
}


def get_example(name: str, **params) -> ProblemSpec:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise UnknownExampleError(f"unknown example {name!r}; known: {sorted(REGISTRY)}") from None
    unknown = set(params) - set(PARAMETERS[name])
    if unknown:
        raise PreconditionError(f"{name} takes no parameters {sorted(unknown)}")
    return factory(**params)


def list_examples() -> Dict[str, str]:
    return {name: REGISTRY[name]().description for name in REGISTRY}
