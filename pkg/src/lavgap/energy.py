"""Energies, W^{1,p} distances, the a-priori error budget and convergence studies."""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import Trajectory, lp_norm
from .errors import InfeasiblePlanError, PreconditionError
from .lagrangian import Lagrangian, distance_to_complement, eval_density, subgradient_P_batch
from .probes import ConditionSConstants, ProbeSet
from .quadrature import integrate
from .reparam import Anchor, ReparamPlan, build_time_change, make_plan, reparametrize

QUAD_TOL = 1e-12
BUDGET_TOL = 1e-6


@dataclass(frozen=True)
class EnergyValue:
    value: float
    divergent: bool = False
    depth: int = 0
    infinite_cell: Optional[Tuple[float, float]] = None
    error: float = 0.0

    def __post_init__(self):
        if self.divergent and self.value != math.inf:
            raise ValueError("a divergent energy must be +inf")


def _union(*groups):
    return tuple(sorted({float(x) for g in groups for x in g}))


def density_along(lag: Lagrangian, traj: Trajectory):
    """``s -> L(s, y(s), y'(s))``."""
    def f(s):
        with np.errstate(divide="ignore", invalid="ignore"):
            return eval_density(lag, s, traj.value(s), traj.deriv(s))
    return f


def energy(lag: Lagrangian, traj: Trajectory, abs_tol: float = QUAD_TOL,
           rel_tol: float = QUAD_TOL, max_depth: int = 60, max_cells: int = 4000) -> EnergyValue:
    """``F(y) = int_I L(s, y, y')``; divergence is returned as ``+inf``."""
    res = integrate(density_along(lag, traj), traj.t, traj.T, breakpoints=traj.breakpoints,
                    singular=traj.singular_points, abs_tol=abs_tol, rel_tol=rel_tol,
                    max_depth=max_depth, max_cells=max_cells)
    if res.divergent:
        return EnergyValue(math.inf, True, res.depth, res.infinite_cell, math.inf)
    return EnergyValue(res.value, False, res.depth, None, res.error)


def lambda_l1(lag: Lagrangian, traj: Trajectory) -> float:
    """``||Lambda(., y, y')||_1`` (``+inf`` when not integrable)."""
    def f(s):
        with np.errstate(divide="ignore", invalid="ignore"):
            return lag.lam_value(s, traj.value(s), traj.deriv(s))
    res = integrate(f, traj.t, traj.T, breakpoints=traj.breakpoints,
                    singular=traj.singular_points)
    return math.inf if res.divergent else res.value


def lp_distance_deriv(a: Trajectory, b: Trajectory, p: float = 1.0,
                      within: Optional[Tuple[float, float]] = None) -> float:
    """``||a' - b'||_p`` over the shared interval (or a sub-range ``within``)."""
    if a.interval != b.interval or a.dim != b.dim:
        raise PreconditionError("trajectories must share interval and dimension")
    if p < 1:
        raise PreconditionError("p >= 1 required")
    lo, hi = within if within is not None else (a.t, a.T)
    dim = a.dim

    def f(s):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.asarray(a.deriv(s), dtype=float) - np.asarray(b.deriv(s), dtype=float)
        mag = np.abs(d) if dim == 1 else np.linalg.norm(d, axis=-1)
        return np.where(np.isnan(mag), np.inf, mag) ** p

    res = integrate(f, lo, hi, breakpoints=_union(a.breakpoints, b.breakpoints),
                    singular=_union(a.singular_points, b.singular_points))
    return math.inf if res.divergent else res.value ** (1.0 / p)


def lip_rank(traj: Trajectory, extra_points: Sequence[float] = ()) -> float:
    """Estimate of ``ess sup |y'|`` on the trajectory grid and piece interiors."""
    pts = [traj.grid[1:-1]]
    bps = _union((traj.t, traj.T), traj.breakpoints, extra_points)
    for a, b in zip(bps[:-1], bps[1:]):
        pts.append(np.linspace(a, b, 18)[1:-1])
    s = np.concatenate(pts)
    s = s[~np.isin(s, traj.singular_points)]
    return float(np.max(traj.speed(s)))


@dataclass(frozen=True)
class ErrorBudget:
    Xi_plus: float
    Upsilon_minus: float
    Theta: float
    M_psi: float
    eps_nu: float
    bound: float
    analytic: bool = False
    inconclusive: bool = False


def _prod(*xs):
    out = 1.0
    for x in xs:
        if x == 0.0:
            return 0.0
        out *= x
    return out


def theta_constant(lag: Lagrangian, traj: Trajectory, consts: ConditionSConstants) -> float:
    """``2(1 + ||y||_inf)(kappa ||Lambda(., y, y')||_1 + beta ||y'||_p^p + gamma (T - t))``."""
    p = traj.sobolev_p
    lam_term = _prod(consts.kappa, lambda_l1(lag, traj)) if consts.kappa else 0.0
    beta_term = _prod(consts.beta, lp_norm(traj, p) ** p) if consts.beta else 0.0
    gamma_term = consts.gamma_bound * traj.interval.length
    return 2.0 * (1.0 + traj.sup_norm) * (lam_term + beta_term + gamma_term)


def sampled_M_psi(lag: Lagrangian, traj: Trajectory, seed: int = 0, size: int = 10_000) -> float:
    probes = ProbeSet.along(traj, seed, size)
    return float(np.max(lag.psi_value(probes.s, probes.z)))


def sampled_xi(lag: Lagrangian, traj: Trajectory, nu: float, seed: int = 0,
               size: int = 10_000) -> float:
    """Sampled ``sup P`` over in-domain ``|v| >= nu`` along ``y(I)``."""
    rng = np.random.default_rng(seed)
    s = rng.uniform(traj.t, traj.T, size)
    z = np.asarray(traj.value(rng.uniform(traj.t, traj.T, size)), dtype=float)
    v = rng.choice([-1.0, 1.0], size) * nu * np.exp(rng.uniform(0.0, np.log(10.0), size))
    ok = lag.in_domain(s, z, v)
    if not ok.any():
        return -math.inf
    P = subgradient_P_batch(lag, s[ok], z[ok], v[ok])
    P = P[np.isfinite(P)]
    return float(P.max()) if P.size else -math.inf


def sampled_upsilon(lag: Lagrangian, traj: Trajectory, lam: float, rho: float, dist,
                    seed: int = 0, size: int = 10_000) -> Optional[float]:
    """Sampled ``inf P`` over ``|v| < lam`` well inside the domain; ``None`` if no probe qualifies."""
    rng = np.random.default_rng(seed)
    s = rng.uniform(traj.t, traj.T, size)
    z = np.asarray(traj.value(rng.uniform(traj.t, traj.T, size)), dtype=float)
    v = rng.uniform(-lam, lam, size)
    ok = lag.in_domain(s, z, v)
    if not lag.real_valued and ok.any():
        d = np.zeros(size)
        d[ok] = distance_to_complement(lag, dist, s[ok], z[ok], v[ok])
        ok &= d >= rho
    if not ok.any():
        return None
    P = subgradient_P_batch(lag, s[ok], z[ok], v[ok])
    P = P[np.isfinite(P)]
    return float(P.min()) if P.size else None


def error_budget(plan: ReparamPlan, lag: Lagrangian, traj: Trajectory,
                 consts: ConditionSConstants, analytic=None, M_psi: Optional[float] = None,
                 seed: int = 0, theta: Optional[float] = None) -> ErrorBudget:
    """``eps_nu M_Psi (Theta + Xi^+ + Upsilon^-)``.

    With ``analytic`` (an object exposing ``xi(nu)`` and ``upsilon(lam, rho)``)
    the subgradient extremes are exact; otherwise they are sampled and the
    budget is a diagnostic only.  One-endpoint plans have no slow set, so
    their ``Upsilon^-`` term is 0.
    """
    use_exact = analytic is not None and analytic.xi is not None and analytic.upsilon is not None
    if M_psi is None:
        M_psi = sampled_M_psi(lag, traj, seed)
    if theta is None:
        theta = theta_constant(lag, traj, consts)
    xi = analytic.xi(plan.nu) if use_exact else sampled_xi(lag, traj, plan.nu, seed)
    xi_plus = max(xi, 0.0)
    inconclusive = False
    ups_minus = 0.0
    if plan.anchor is Anchor.BOTH:
        if use_exact:
            ups = analytic.upsilon(plan.lambda_bar, plan.rho)
        else:
            ups = sampled_upsilon(lag, traj, plan.lambda_bar, plan.rho, plan.dist, seed)
        if ups is None:
            inconclusive = True
            ups = 0.0
        ups_minus = max(-ups, 0.0)
    bound = _prod(plan.eps_nu, M_psi, theta + xi_plus + ups_minus)
    return ErrorBudget(xi_plus, ups_minus, theta, M_psi, plan.eps_nu, bound, use_exact,
                       inconclusive)


def extended_gap(F_nu: float, F_y: float) -> float:
    """``F(y_nu) - F(y)`` with ``inf - inf := 0``."""
    if math.isinf(F_nu) and math.isinf(F_y):
        return 0.0
    return F_nu - F_y


@dataclass
class StudyRow:
    nu: float
    mu: Optional[float] = None
    eps_nu: Optional[float] = None
    meas_S_nu: Optional[float] = None
    F_y_nu: Optional[EnergyValue] = None
    gap: Optional[float] = None
    w1p_dist: Optional[float] = None
    lip_rank: Optional[float] = None
    budget: Optional[ErrorBudget] = None
    status: str = "ok"
    y_nu_start: Optional[float] = None
    y_nu_end: Optional[float] = None
    message: str = ""


@dataclass
class ConvergenceReport:
    rows: List[StudyRow]
    F_y: EnergyValue
    p: float
    anchor: Anchor
    extras: Dict[str, object] = field(default_factory=dict)


def _slow_domain_ok(plan: ReparamPlan, lag: Lagrangian, traj: Trajectory) -> bool:
    """Whether ``(s, y, y'/mu)`` stays in the domain on sampled points of ``Sigma_nu``."""
    if not plan.Sigma_nu or lag.real_valued:
        return True
    s = np.concatenate([np.linspace(a, b, 34)[1:-1] for a, b in plan.Sigma_nu])
    return bool(np.all(lag.in_domain(s, traj.value(s), traj.deriv(s) / plan.mu)))


def convergence_study(lag: Lagrangian, traj: Trajectory, anchor, nu_schedule: Sequence[float],
                      p: float = 1.0, consts: ConditionSConstants = ConditionSConstants(),
                      analytic=None, F_y: Optional[EnergyValue] = None, seed: int = 0,
                      quad: Optional[dict] = None, **tuning) -> ConvergenceReport:
    """One row per ``nu``: plan, time change, ``y_nu``, energy, distance, budget."""
    anchor = Anchor(anchor)
    nus = [float(n) for n in nu_schedule]
    if not nus:
        raise PreconditionError("empty nu schedule")
    if any(b <= a for a, b in zip(nus[:-1], nus[1:])):
        raise PreconditionError("nu schedule must be increasing")
    quad = quad or {}
    if F_y is None:
        F_y = energy(lag, traj, **quad)
    M_psi = sampled_M_psi(lag, traj, seed)
    theta = theta_constant(lag, traj, consts)
    rows = []
    for nu in nus:
        row = StudyRow(nu)
        try:
            plan = make_plan(traj, lag, anchor, nu, **tuning)
        except InfeasiblePlanError as exc:
            row.status, row.message = "infeasible", str(exc)
            rows.append(row)
            continue
        row.mu = plan.mu
        row.eps_nu = plan.eps_nu
        row.meas_S_nu = plan.S_nu.measure
        tc = build_time_change(plan, traj)
        y_nu = reparametrize(traj, tc)
        F_nu = energy(lag, y_nu, **quad)
        row.F_y_nu = F_nu
        row.gap = extended_gap(F_nu.value, F_y.value)
        row.w1p_dist = lp_distance_deriv(y_nu, traj, p)
        row.lip_rank = lip_rank(y_nu)
        ends = np.asarray(y_nu.value(np.array([traj.t, traj.T])), dtype=float)
        row.y_nu_start, row.y_nu_end = (float(e) for e in np.atleast_1d(ends)[:2]) \
            if traj.dim == 1 else (float(ends[0, 0]), float(ends[1, 0]))
        row.budget = error_budget(plan, lag, traj, consts, analytic, M_psi, seed, theta)
        if not _slow_domain_ok(plan, lag, traj) or row.budget.inconclusive:
            row.status = "inconclusive"
        elif math.isfinite(F_y.value) and row.gap > row.budget.bound + BUDGET_TOL:
            row.status = "over_budget"
        rows.append(row)
    return ConvergenceReport(rows, F_y, p, anchor)
