"""Falsification checkers for the hypotheses behind the no-gap result.

A ``pass`` verdict only means "not falsified on the seeded probes"; a
``falsified`` verdict always carries a witness at which the checked
inequality fails by more than ``VIOLATION_TOL``.
"""

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from .core import Trajectory
from .energy import energy, lambda_l1
from .errors import PreconditionError
from .lagrangian import (DIST_TOL, DistanceKind, Lagrangian, distance_to_complement, ray_exit,
                         structure_check)
from .probes import (DEFAULT_PROBES, VIOLATION_TOL, ConditionSConstants, HypothesisReport,
                     ProbeSet, Verdict, witness)
from .reparam import Anchor

#: Names of the checked hypotheses, in report order.
NAMES = ("S", "Ac", "star", "D", "Bw_yLambda", "Bprime_yLambda", "L_yLambda", "B_yPsi",
         "C_yPsi", "P_yPsi", "G_Lambda")
#: Informational integrability report (not part of any claim's requirements).
INTEGRABILITY = "Lambda_L1"

CLAIM1 = ("S", "Ac", "star", "D", "B_yPsi", "C_yPsi", "Bw_yLambda", "Bprime_yLambda")

E_LATTICE = 8


def _exceeds(lhs, rhs):
    """Mask of ``lhs > rhs`` by more than the violation tolerance."""
    with np.errstate(invalid="ignore"):
        return lhs - rhs > VIOLATION_TOL * np.maximum(1.0, np.abs(rhs))


def _pass(name, statistic=None, detail=""):
    return HypothesisReport(name, Verdict.PASS, statistic=statistic, detail=detail)


def _dist(lag, kind, s, z, v):
    kind = DistanceKind(kind)
    extra = {"lattice": E_LATTICE} if kind is DistanceKind.EUCLIDEAN else {}
    return distance_to_complement(lag, kind, s, z, v, **extra)


def condition_S_probes(traj: Trajectory, consts: ConditionSConstants, seed: int = 0,
                       size: int = DEFAULT_PROBES, v_max: float = 100.0) -> ProbeSet:
    """Probes with ``z`` in the ball ``B_K`` and log-spread speeds."""
    rng = np.random.default_rng(seed)
    s = rng.uniform(traj.t, traj.T, size)
    z = rng.uniform(-consts.K, consts.K, size)
    mag = np.exp(rng.uniform(np.log(1e-3), np.log(v_max), size))
    return ProbeSet(s, z, rng.choice([-1.0, 1.0], size) * mag, seed)


def verify_condition_S(lag: Lagrangian, traj: Trajectory, consts: ConditionSConstants,
                       probes: Optional[ProbeSet] = None, seed: int = 0,
                       size: int = DEFAULT_PROBES) -> HypothesisReport:
    """``|Lambda(s2,z,v) - Lambda(s1,z,v)| <= (kappa Lambda(s,z,v) + beta|v|^p + gamma)|s2 - s1|``.

    ``s1, s2`` are drawn in ``[s - eps*, s + eps*]``; for a quarter of the
    probes ``s1`` sits on the window's left edge so that non-Lipschitz
    behaviour at the ends of ``I`` is reached.
    """
    if probes is None:
        probes = condition_S_probes(traj, consts, seed, size)
    rng = np.random.default_rng(None if probes.seed is None else probes.seed + 1)
    keep = lag.in_domain(probes.s, probes.z, probes.v) & (np.abs(probes.z) <= consts.K)
    p = probes.subset(keep)
    if len(p) == 0:
        return HypothesisReport("S", Verdict.INCONCLUSIVE, detail="no admissible probe")
    lo = np.maximum(p.s - consts.eps_star, traj.t)
    hi = np.minimum(p.s + consts.eps_star, traj.T)
    s1 = rng.uniform(lo, hi)
    s2 = rng.uniform(lo, hi)
    edge = rng.random(len(p)) < 0.25
    s1 = np.where(edge, lo, s1)
    s2 = np.where(edge, lo + (hi - lo) * np.exp(rng.uniform(np.log(1e-12), 0.0, len(p))), s2)
    lhs = np.abs(lag.lam_value(s2, p.z, p.v) - lag.lam_value(s1, p.z, p.v))
    rate = (consts.kappa * lag.lam_value(p.s, p.z, p.v)
            + consts.beta * np.abs(p.v) ** traj.sobolev_p + consts.gamma_bound)
    rhs = rate * np.abs(s2 - s1)
    bad = _exceeds(lhs, rhs)
    if bad.any():
        i = int(np.argmax(np.where(bad, lhs - rhs, -np.inf)))
        return HypothesisReport("S", Verdict.FALSIFIED,
                                witness(s=p.s[i], s1=s1[i], s2=s2[i], z=p.z[i], v=p.v[i],
                                        lhs=lhs[i], rhs=rhs[i]),
                                statistic=float(lhs[i] - rhs[i]))
    return _pass("S", statistic=float(len(p)))


def verify_D(lag: Lagrangian, dist=DistanceKind.U, probes: Optional[ProbeSet] = None,
             traj: Optional[Trajectory] = None, seed: int = 0, size: int = DEFAULT_PROBES,
             v_max: float = 10.0) -> HypothesisReport:
    """Some ``v'`` on the segment ``[0, v]`` is in the domain at positive distance."""
    if lag.real_valued:
        return _pass("D", detail="real valued: empty complement")
    if probes is None:
        if traj is None:
            raise PreconditionError("probes or a trajectory are required")
        probes = ProbeSet.along(traj, seed, size, v_max)
    p = probes.subset(lag.in_domain(probes.s, probes.z, probes.v))
    if len(p) == 0:
        return HypothesisReport("D", Verdict.INCONCLUSIVE, detail="no in-domain probe")
    open_ = np.zeros(len(p), dtype=bool)
    for r in (1.0, 0.5, 0.25, 0.125, 1 / 16, 1 / 64, 1 / 256, 0.0):
        todo = ~open_
        if not todo.any():
            break
        vr = r * p.v[todo]
        ok = lag.in_domain(p.s[todo], p.z[todo], vr)
        d = np.zeros(ok.shape)
        if ok.any():
            d[ok] = _dist(lag, dist, p.s[todo][ok], p.z[todo][ok], vr[ok])
        idx = np.nonzero(todo)[0]
        open_[idx] = ok & (d > 10 * DIST_TOL)
    if not open_.all():
        i = int(np.argmin(open_))
        return HypothesisReport("D", Verdict.FALSIFIED, witness(s=p.s[i], z=p.z[i], v=p.v[i]),
                                detail="no segment point at positive distance")
    return _pass("D", statistic=float(len(p)))


def verify_boundedness(lag: Lagrangian, traj: Trajectory, mode: str = "Bw", nu0: float = 1.0,
                       lambda_bar: Optional[float] = None, rho: float = 1e-3,
                       dist=DistanceKind.U, probes: Optional[ProbeSet] = None, seed: int = 0,
                       size: int = DEFAULT_PROBES) -> HypothesisReport:
    """Sampled ``sup Lambda`` on ``I x y(I) x B_nu0`` (``Bw``) or on the points of
    ``I x y(I) x B_lambda`` at distance ``>= rho`` from the complement (``Bprime``)."""
    if mode == "Bw":
        name, radius = "Bw_yLambda", nu0
    elif mode == "Bprime":
        name = "Bprime_yLambda"
        floor = traj.deriv_l1 / traj.interval.length
        if lambda_bar is None or not lambda_bar > floor:
            raise PreconditionError(f"lambda must exceed ||y'||_1/(T-t) = {floor}")
        radius = lambda_bar
    else:
        raise ValueError(f"unknown boundedness mode {mode!r}")
    if probes is None:
        probes = ProbeSet.along(traj, seed, size, radius)
    keep = (np.abs(probes.v) <= radius) & lag.in_domain(probes.s, probes.z, probes.v)
    if mode == "Bprime" and not lag.real_valued and keep.any():
        d = np.zeros(len(probes))
        d[keep] = _dist(lag, dist, probes.s[keep], probes.z[keep], probes.v[keep])
        keep &= d >= rho
    if not keep.any():
        return HypothesisReport(name, Verdict.INCONCLUSIVE, detail="no admissible probe")
    p = probes.subset(keep)
    vals = lag.lam_value(p.s, p.z, p.v)
    i = int(np.argmax(vals))
    if not math.isfinite(vals[i]):
        return HypothesisReport(name, Verdict.FALSIFIED, witness(s=p.s[i], z=p.z[i], v=p.v[i]),
                                statistic=math.inf)
    return _pass(name, statistic=float(vals[i]))


def near_boundary_probes(lag: Lagrangian, probes: ProbeSet, depths: Sequence[float]):
    """Move in-domain probes along the velocity axis to ``depth`` inside the first exit.

    Returns ``(s, z, v)`` arrays with one entry per probe, direction and depth.
    """
    p = probes.subset(lag.in_domain(probes.s, probes.z, probes.v))
    out = []
    for sign in (1.0, -1.0):
        d = ray_exit(lag, p.s, p.z, p.v, sign)
        ok = np.isfinite(d)
        for depth in depths:
            good = ok & (d > depth)
            out.append((p.s[good], p.z[good], p.v[good] + sign * (d[good] - depth)))
    return tuple(np.concatenate(x) for x in zip(*out))


def verify_limit_L(lag: Lagrangian, traj: Trajectory, dist=DistanceKind.U,
                   r_levels: Iterable[float] = (1.0, 10.0, 100.0, 1e3),
                   probes: Optional[ProbeSet] = None, seed: int = 0,
                   size: int = 2_000, v_max: float = 10.0) -> HypothesisReport:
    """``Lambda -> +inf`` as the distance to the complement tends to 0.

    For each ``r`` the largest ``rho`` on a geometric grid is found such that
    every probe within distance ``rho`` has ``Lambda >= r``.  Falsified when
    probes at distance ``<= 1e-9`` keep ``Lambda`` below ``min(r_levels)``.
    """
    if lag.real_valued:
        return _pass("L_yLambda", detail="vacuous: Lambda is real valued")
    if probes is None:
        probes = ProbeSet.along(traj, seed, size, v_max)
    depths = [2.0**-k for k in range(0, 30)] + [1e-9]
    s, z, v = near_boundary_probes(lag, probes, depths)
    if s.size == 0:
        return HypothesisReport("L_yLambda", Verdict.INCONCLUSIVE,
                                detail="no complement point within the search radius")
    d = _dist(lag, dist, s, z, v)
    vals = lag.lam_value(s, z, v)
    r_levels = sorted(r_levels)
    rho_of = {}
    for r in r_levels:
        below = d[vals < r]
        rho = float(below.min()) if below.size else math.inf
        grid = [2.0**-k for k in range(0, 61) if 2.0**-k < rho]
        rho_of[r] = grid[0] if grid else 0.0
    tiny = d <= 1e-9
    low = tiny & (vals < r_levels[0])
    if low.any():
        i = int(np.argmax(low))
        return HypothesisReport("L_yLambda", Verdict.FALSIFIED,
                                witness(s=s[i], z=z[i], v=v[i], dist=d[i], Lambda=vals[i]),
                                statistic=float(vals[i]),
                                detail="Lambda stays bounded near the complement")
    detail = ", ".join(f"rho({r:g})={rho_of[r]:.3g}" for r in r_levels)
    return _pass("L_yLambda", statistic=rho_of[r_levels[-1]], detail=detail)


@dataclass(frozen=True)
class PsiReport:
    M_psi: float
    m_psi: float
    bounded: HypothesisReport
    continuity: HypothesisReport
    positivity: HypothesisReport


def psi_probes(traj: Trajectory, seed: int = 0, size: int = DEFAULT_PROBES):
    """``(s, z)`` on ``I x y(I)``: random pairs, graph points, and points crowding the ends."""
    rng = np.random.default_rng(seed)
    half = size // 2
    s = rng.uniform(traj.t, traj.T, size)
    z_t = np.concatenate([rng.uniform(traj.t, traj.T, half), s[half:]])
    ends = np.concatenate([traj.t + 10.0 ** -np.arange(1, 300, 7.0),
                           traj.T - 10.0 ** -np.arange(1, 17, 1.0)])
    ends = ends[(ends > traj.t) & (ends < traj.T)]
    s = np.concatenate([s, ends, ends])
    z_t = np.concatenate([z_t, ends, rng.uniform(traj.t, traj.T, ends.size)])
    return s, np.asarray(traj.value(z_t), dtype=float)


PSI_SCAN = 1025
PSI_STATES = 64
JUMP_TOL = 1e-4


def _psi_continuity(lag: Lagrangian, traj: Trajectory, seed: int) -> HypothesisReport:
    """Scan ``s -> Psi(s, z)`` on a grid for a handful of states ``z`` in
    ``y(I)``; bisect every large step down to width 1e-12 and report the
    ones that do not shrink."""
    rng = np.random.default_rng(seed + 1)
    z = np.asarray(traj.value(rng.uniform(traj.t, traj.T, PSI_STATES)), dtype=float)
    grid = np.linspace(traj.t, traj.T, PSI_SCAN)
    vals = lag.psi_value(grid[None, :], z[:, None])
    jump = np.abs(np.diff(vals, axis=1))
    scale = 1.0 + np.minimum(np.abs(vals[:, :-1]), np.abs(vals[:, 1:]))
    with np.errstate(invalid="ignore"):
        rows, cols = np.nonzero(~(jump <= JUMP_TOL * scale))
    worst = float(np.nanmax(jump)) if jump.size else 0.0
    if rows.size == 0:
        return _pass("C_yPsi", statistic=worst)
    zz = z[rows]
    lo, hi = grid[cols], grid[cols + 1]
    f_lo, f_hi = lag.psi_value(lo, zz), lag.psi_value(hi, zz)
    width = 1e-12 * max(1.0, traj.interval.length)
    for _ in range(64):
        if np.all(hi - lo <= width):
            break
        mid = 0.5 * (lo + hi)
        f_mid = lag.psi_value(mid, zz)
        left = np.abs(f_mid - f_lo) >= np.abs(f_hi - f_mid)
        lo, f_lo = np.where(left, lo, mid), np.where(left, f_lo, f_mid)
        hi, f_hi = np.where(left, mid, hi), np.where(left, f_mid, f_hi)
    jump = np.abs(f_hi - f_lo)
    with np.errstate(invalid="ignore"):
        bad = ~(jump <= JUMP_TOL * (1.0 + np.minimum(np.abs(f_lo), np.abs(f_hi))))
    if not bad.any():
        return _pass("C_yPsi", statistic=worst)
    i = int(np.argmax(np.where(bad, np.nan_to_num(jump, nan=np.inf), -np.inf)))
    return HypothesisReport("C_yPsi", Verdict.FALSIFIED,
                            witness(s=lo[i], s_step=hi[i], z=zz[i], jump=jump[i]),
                            statistic=float(jump[i]))


def verify_psi(lag: Lagrangian, traj: Trajectory, seed: int = 0,
               size: int = DEFAULT_PROBES) -> PsiReport:
    s, z = psi_probes(traj, seed, size)
    vals = lag.psi_value(s, z)
    i_max, i_min = int(np.argmax(vals)), int(np.argmin(vals))
    M, m = float(vals[i_max]), float(vals[i_min])
    if math.isfinite(M):
        bounded = _pass("B_yPsi", statistic=M)
    else:
        bounded = HypothesisReport("B_yPsi", Verdict.FALSIFIED, witness(s=s[i_max], z=z[i_max]),
                                   statistic=M)
    if m > VIOLATION_TOL:
        positivity = _pass("P_yPsi", statistic=m)
    else:
        positivity = HypothesisReport("P_yPsi", Verdict.FALSIFIED,
                                      witness(s=s[i_min], z=z[i_min], psi=m), statistic=m)
    continuity = _psi_continuity(lag, traj, seed)
    return PsiReport(M, m, bounded, continuity, positivity)


def verify_growth(lag: Lagrangian, traj: Trajectory, seed: int = 0,
                  size: int = DEFAULT_PROBES) -> HypothesisReport:
    """``Lambda(s, z, v) >= alpha |v| - d`` on probes."""
    if lag.growth is None:
        return HypothesisReport("G_Lambda", Verdict.INCONCLUSIVE, detail="no growth data")
    alpha, d = lag.growth
    p = ProbeSet.along(traj, seed, size, v_max=1e3)
    vals = lag.lam_value(p.s, p.z, p.v)
    rhs = alpha * np.abs(p.v) - d
    bad = _exceeds(rhs, vals)
    if bad.any():
        i = int(np.argmax(bad))
        return HypothesisReport("G_Lambda", Verdict.FALSIFIED,
                                witness(s=p.s[i], z=p.z[i], v=p.v[i], Lambda=vals[i]))
    return _pass("G_Lambda", statistic=float(np.min(vals - rhs)))


def verify_integrability(lag: Lagrangian, traj: Trajectory) -> HypothesisReport:
    """``Lambda(., y, y') in L^1``."""
    val = lambda_l1(lag, traj)
    if math.isfinite(val):
        return _pass(INTEGRABILITY, statistic=val)
    edge = traj.singular_points[0] if traj.singular_points else traj.t
    return HypothesisReport(INTEGRABILITY, Verdict.FALSIFIED,
                            witness(integral=math.inf, near=edge), statistic=math.inf)


@dataclass(frozen=True)
class CorollaryBounds:
    K0: float
    lambda0: float
    X: float
    inf_value: float
    m_psi: float
    alpha: float
    d: float
    length: float


def corollary_bounds(X, inf_value: float, m_psi: float, alpha: float, d: float,
                     length: float) -> CorollaryBounds:
    """``K0 = |X| + c`` and ``lambda0 = c/(T - t)`` with ``c = (inf + m d (T-t))/(m alpha)``."""
    if not (m_psi > 0 and alpha > 0):
        raise PreconditionError("m_psi and alpha must be positive")
    if not length > 0:
        raise PreconditionError("interval length must be positive")
    c = (inf_value + m_psi * d * length) / (m_psi * alpha)
    x_norm = float(np.linalg.norm(np.atleast_1d(X)))
    return CorollaryBounds(x_norm + c, c / length, x_norm, inf_value, m_psi, alpha, d, length)


def l1_lower_bound_check(lag: Lagrangian, traj: Trajectory, m_psi: Optional[float] = None,
                         F: Optional[float] = None, tol: float = 1e-9) -> HypothesisReport:
    """``int |y'| <= (F(y) + m d (T - t))/(m alpha)``."""
    if lag.growth is None:
        raise PreconditionError("linear growth data (alpha, d) required")
    alpha, d = lag.growth
    if m_psi is None:
        m_psi = verify_psi(lag, traj).m_psi
    if not m_psi > 0:
        raise PreconditionError("Psi must be bounded below by a positive constant")
    if F is None:
        F = energy(lag, traj).value
    lhs = traj.deriv_l1
    rhs = (F + m_psi * d * traj.interval.length) / (m_psi * alpha)
    if lhs - rhs > tol * max(1.0, abs(rhs)):
        return HypothesisReport("l1_bound", Verdict.FALSIFIED, witness(l1=lhs, bound=rhs),
                                statistic=lhs - rhs)
    return _pass("l1_bound", statistic=rhs - lhs)


def required_hypotheses(anchor, lag: Lagrangian) -> tuple:
    """Hypotheses needed by the claim that covers ``anchor``."""
    if Anchor(anchor) is not Anchor.BOTH:
        return CLAIM1
    extra = ("P_yPsi",) if lag.real_valued else ("P_yPsi", "L_yLambda")
    return CLAIM1 + extra


def check_all(lag: Lagrangian, traj: Trajectory, consts: ConditionSConstants,
              lambda_bar: float, dist=DistanceKind.U, rho: float = 1e-3, nu0: float = 1.0,
              seed: int = 0, size: int = DEFAULT_PROBES) -> Dict[str, HypothesisReport]:
    """Every checker, keyed by hypothesis name (plus the integrability report)."""
    out = {"S": verify_condition_S(lag, traj, consts, seed=seed, size=size)}
    structure = structure_check(lag, ProbeSet.along(traj, seed, size, max(lambda_bar, 10.0)))
    out["Ac"] = structure.radially_convex
    out["star"] = structure.star_shaped
    out["D"] = verify_D(lag, dist, traj=traj, seed=seed, size=size)
    out["Bw_yLambda"] = verify_boundedness(lag, traj, "Bw", nu0=nu0, seed=seed, size=size)
    out["Bprime_yLambda"] = verify_boundedness(lag, traj, "Bprime", lambda_bar=lambda_bar,
                                               rho=rho, dist=dist, seed=seed, size=size)
    out["L_yLambda"] = verify_limit_L(lag, traj, dist, seed=seed)
    psi = verify_psi(lag, traj, seed, size)
    out["B_yPsi"], out["C_yPsi"], out["P_yPsi"] = psi.bounded, psi.continuity, psi.positivity
    out["G_Lambda"] = verify_growth(lag, traj, seed, size)
    out[INTEGRABILITY] = verify_integrability(lag, traj)
    return out
