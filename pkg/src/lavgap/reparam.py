"""Lipschitz reparametrizations ``y_nu = y o psi_nu``.

The time change ``phi_nu`` runs with slope ``|y'|/nu`` on the fast set
``S_nu = {|y'| > nu}``, with slope ``mu`` on a compensating slow set
``Sigma_nu`` (two-endpoint mode only) and with slope 1 elsewhere.  Its
inverse ``psi_nu`` is ``1/mu``-Lipschitz and ``|y_nu'| <= max(nu, lambda)``.

Pieces are evaluated from one of their ends so that anchored endpoints
are reproduced exactly: all pieces hang from the left end for the
initial anchor, from the right end for the final anchor, and from the
left for the two-endpoint mode except the last piece, which hangs from
``T``.
"""

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from .core import (IntervalSet, Interval, Trajectory, bisect_boundary, predicate_set,
                   superlevel_set, sublevel_set)
from .errors import (ConstructionError, DomainError, InfeasiblePlanError, PreconditionError,
                     StructureError)
from .lagrangian import DistanceKind, Lagrangian, distance_to_complement, structure_check
from .probes import ProbeSet
from .quadrature import gauss_legendre

RHO_GRID = tuple(2.0**-k for k in range(0, 61))
STRUCTURE_PROBES = 1000


class Anchor(str, Enum):
    INITIAL = "initial"
    FINAL = "final"
    BOTH = "both"


UNIT, MU, SCALED = "unit", "mu-slope", "scaled-derivative"


@dataclass(frozen=True)
class ReparamPlan:
    anchor: Anchor
    nu: float
    S_nu: IntervalSet
    eps_nu: float
    mu: Optional[float] = None
    lambda_bar: Optional[float] = None
    rho: Optional[float] = None
    Sigma_nu: IntervalSet = IntervalSet.empty()
    omega: IntervalSet = IntervalSet.empty()
    omega_mu: IntervalSet = IntervalSet.empty()
    dist: DistanceKind = DistanceKind.U

    @property
    def is_identity(self) -> bool:
        return not self.S_nu and not self.Sigma_nu


def fast_set_excess(traj: Trajectory, S: IntervalSet, nu: float) -> float:
    """``int_S (|y'|/nu - 1)``."""
    if not S:
        return 0.0
    total = math.fsum(traj.abs_deriv_integral(a, b) for a, b in S)
    return max(total / nu - S.measure, 0.0)


def default_mu(traj: Trajectory, lambda_bar: float) -> float:
    low = traj.deriv_l1 / (lambda_bar * traj.interval.length)
    return 0.5 * (low + 1.0)


def _omega_builder(traj, lag, mu, lambda_bar, dist):
    """Return ``rho -> Omega(rho)`` sharing one grid evaluation of the distance."""

    def admissible(s, rho):
        s = np.asarray(s, dtype=float)
        speed = traj.speed(s)
        ok = speed / mu < lambda_bar
        out = np.zeros(s.shape, dtype=bool)
        if not ok.any():
            return out
        ss = s[ok]
        w = np.asarray(traj.deriv(ss), dtype=float) / mu
        z = np.asarray(traj.value(ss), dtype=float)
        inside = lag.in_domain(ss, z, w)
        if not lag.real_valued and rho > 0 and inside.any():
            d = np.zeros(ss.shape)
            d[inside] = distance_to_complement(lag, dist, ss[inside], z[inside], w[inside])
            inside &= d >= rho
        out[ok] = inside
        return out

    grid = traj.grid
    base = traj.grid_speed / mu < lambda_bar
    gdist = np.full(grid.shape, np.inf)
    if base.any():
        w = np.asarray(traj.deriv(grid[base]), dtype=float) / mu
        z = np.asarray(traj.value(grid[base]), dtype=float)
        inside = lag.in_domain(grid[base], z, w)
        d = np.full(w.shape, -np.inf)
        if inside.any():
            d[inside] = (np.inf if lag.real_valued else
                         distance_to_complement(lag, dist, grid[base][inside], z[inside],
                                                w[inside]))
        gdist[base] = d
    gdist[~base] = -np.inf

    def build(rho):
        nodes = gdist >= rho
        return predicate_set(lambda s: admissible(s, rho), traj.interval, traj.grid_size,
                             node_values=nodes)

    return build


def make_plan(traj: Trajectory, lag: Lagrangian, anchor, nu: float, mu: Optional[float] = None,
              lambda_bar: Optional[float] = None, rho: Optional[float] = None,
              dist=DistanceKind.U) -> ReparamPlan:
    """Fast set, excess ``eps_nu`` and, for two endpoints, the slow set ``Sigma_nu``."""
    anchor = Anchor(anchor)
    dist = DistanceKind(dist)
    if not nu > 0:
        raise PreconditionError("nu must be positive")
    S = superlevel_set(traj, nu)
    eps = fast_set_excess(traj, S, nu)
    if anchor is not Anchor.BOTH:
        return ReparamPlan(anchor, nu, S, eps, mu=mu, lambda_bar=lambda_bar, rho=rho, dist=dist)

    length = traj.interval.length
    if lambda_bar is None:
        raise PreconditionError("two-endpoint plans need lambda_bar")
    l1 = traj.deriv_l1
    if not lambda_bar > l1 / length:
        raise PreconditionError(
            f"lambda_bar={lambda_bar} must exceed ||y'||_1/(T-t)={l1 / length}")
    low = l1 / (lambda_bar * length)
    if mu is None:
        mu = default_mu(traj, lambda_bar)
    if not low < mu < 1.0:
        raise PreconditionError(f"mu={mu} outside the admissible window ({low}, 1)")
    if not lag.real_valued:
        probes = ProbeSet.along(traj, seed=0, size=STRUCTURE_PROBES, v_max=lambda_bar)
        star = structure_check(lag, probes).star_shaped
        if not star.passed:
            raise StructureError(f"velocity sections are not star-shaped: {star.witness}")

    omega_mu = sublevel_set(traj, mu * lambda_bar)
    need = eps / (1.0 - mu)
    build = _omega_builder(traj, lag, mu, lambda_bar, dist)
    if rho is None:
        chosen, omega = None, IntervalSet.empty()
        for r in RHO_GRID:
            candidate = build(r).difference(S) if S else build(r)
            if candidate.measure >= need:
                chosen, omega = r, candidate
                break
        if chosen is None:
            omega = candidate
            raise InfeasiblePlanError(
                f"slow-down set has measure {omega.measure}, need {need}", need - omega.measure)
        rho = chosen
    else:
        if not rho > 0:
            raise PreconditionError("rho must be positive")
        omega = build(rho).difference(S) if S else build(rho)
        if omega.measure < need:
            raise InfeasiblePlanError(
                f"slow-down set has measure {omega.measure}, need {need}", need - omega.measure)
    sigma = omega.take_leftmost(need)
    return ReparamPlan(anchor, nu, S, eps, mu=mu, lambda_bar=lambda_bar, rho=rho,
                       Sigma_nu=sigma, omega=omega, omega_mu=omega_mu, dist=dist)


@dataclass(frozen=True)
class TimeChange:
    """Piecewise strictly increasing ``phi`` with exact anchored ends.

    ``tau`` and ``phi_at`` hold piece boundaries in the source and target
    times; ``hang`` says from which end ("left" or "right") each piece is
    evaluated.
    """

    tau: Tuple[float, ...]
    phi_at: Tuple[float, ...]
    kinds: Tuple[str, ...]
    hang: Tuple[str, ...]
    anchor: Anchor
    nu: float
    mu: Optional[float]
    traj: Trajectory

    @property
    def domain_interval(self) -> Interval:
        return Interval(self.tau[0], self.tau[-1])

    @property
    def range_interval(self) -> Interval:
        return Interval(self.phi_at[0], self.phi_at[-1])

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return self.phi_at

    @property
    def is_identity(self) -> bool:
        return all(k == UNIT for k in self.kinds) and self.tau == self.phi_at

    def _offset(self, i, a, x):
        """``phi`` increment from ``a`` to ``x`` inside piece ``i`` (``x`` may be below ``a``)."""
        kind = self.kinds[i]
        if kind == UNIT:
            return x - a
        if kind == MU:
            return self.mu * (x - a)
        traj = self.traj
        if traj.monotone and traj.dim == 1:
            ya = float(traj.value(np.array([a]))[0])
            return np.sign(x - a) * np.abs(traj.value(x) - ya) / self.nu
        return gauss_legendre(traj.speed, np.full(np.shape(x), a), x) / self.nu

    def phi(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        flat = np.atleast_1d(tau).ravel()
        if flat.size and (flat.min() < self.tau[0] or flat.max() > self.tau[-1]):
            raise DomainError("tau outside the domain of the time change")
        idx = np.clip(np.searchsorted(self.tau, flat, side="right") - 1, 0, len(self.kinds) - 1)
        out = np.empty(flat.shape)
        for i in np.unique(idx):
            m = idx == i
            x = flat[m]
            if self.hang[i] == "left":
                out[m] = self.phi_at[i] + self._offset(i, self.tau[i], x)
            else:
                out[m] = self.phi_at[i + 1] + self._offset(i, self.tau[i + 1], x)
            out[m] = np.clip(out[m], self.phi_at[i], self.phi_at[i + 1])
        out[flat == self.tau[0]] = self.phi_at[0]
        out[flat == self.tau[-1]] = self.phi_at[-1]
        return out.reshape(np.shape(tau))

    def _locate(self, flat):
        return np.clip(np.searchsorted(self.phi_at, flat, side="right") - 1, 0,
                       len(self.kinds) - 1)

    def psi(self, s) -> np.ndarray:
        """Inverse time change ``psi``: analytic on unit and ``mu`` pieces,
        via ``y``'s inverse or bisection on scaled pieces."""
        s = np.asarray(s, dtype=float)
        flat = np.atleast_1d(s).ravel()
        if flat.size and (flat.min() < self.phi_at[0] or flat.max() > self.phi_at[-1]):
            raise DomainError("s outside the range of the time change")
        idx = self._locate(flat)
        out = np.empty(flat.shape)
        for i in np.unique(idx):
            m = idx == i
            out[m] = self._psi_piece(i, flat[m])
        return out.reshape(np.shape(s))

    def _psi_piece(self, i, x):
        ta, tb = self.tau[i], self.tau[i + 1]
        pa, pb = self.phi_at[i], self.phi_at[i + 1]
        left = self.hang[i] == "left"
        kind = self.kinds[i]
        if kind == UNIT:
            shift = ta - pa if left else tb - pb
            out = x if shift == 0.0 else x + shift
        elif kind == MU:
            out = ta + (x - pa) / self.mu if left else tb - (pb - x) / self.mu
        else:
            traj = self.traj
            if traj.monotone and traj.dim == 1 and traj.inverse is not None:
                target = self._scaled_value(i, x)
                out = np.asarray(traj.inverse(target), dtype=float)
            else:
                lo, hi = bisect_boundary(lambda u: self.phi(u) >= x,
                                         np.full(x.shape, ta), np.full(x.shape, tb))
                out = hi
        out = np.clip(out, ta, tb)
        out = np.where(x == pa, ta, out)
        return np.where(x == pb, tb, out)

    def _scaled_value(self, i, x):
        """``y(psi(x))`` on a scaled piece of a monotone scalar curve (linear in ``x``)."""
        traj = self.traj
        ya, yb = (float(v) for v in traj.value(np.array([self.tau[i], self.tau[i + 1]])))
        sign = 1.0 if yb >= ya else -1.0
        if self.hang[i] == "left":
            val = ya + sign * self.nu * (x - self.phi_at[i])
        else:
            val = yb - sign * self.nu * (self.phi_at[i + 1] - x)
        return np.clip(val, min(ya, yb), max(ya, yb))

    def slope(self, tau) -> np.ndarray:
        """``phi'`` (a.e.)."""
        tau = np.asarray(tau, dtype=float)
        idx = np.clip(np.searchsorted(self.tau, tau, side="right") - 1, 0, len(self.kinds) - 1)
        kinds = np.asarray(self.kinds)[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = self.traj.speed(tau) / self.nu
        mu = self.mu if self.mu is not None else 1.0
        return np.where(kinds == UNIT, 1.0, np.where(kinds == MU, mu, scaled))

    def image(self, sets: IntervalSet) -> IntervalSet:
        """``phi`` of an interval union."""
        if not sets:
            return sets
        ends = np.array(sets.endpoints)
        mapped = self.phi(ends)
        return IntervalSet(zip(mapped[0::2], mapped[1::2]))


def _piece_length(traj, kind, a, b, nu, mu):
    if kind == UNIT:
        return b - a
    if kind == MU:
        return mu * (b - a)
    return traj.abs_deriv_integral(a, b) / nu


def build_time_change(plan: ReparamPlan, traj: Trajectory) -> TimeChange:
    """Assemble ``phi_nu`` from a plan."""
    t, T = traj.t, traj.T
    cuts = {t, T}
    cuts.update(x for x in plan.S_nu.endpoints if t < x < T)
    cuts.update(x for x in plan.Sigma_nu.endpoints if t < x < T)
    tau = sorted(cuts)
    mids = np.array([0.5 * (a + b) for a, b in zip(tau[:-1], tau[1:])])
    in_S = plan.S_nu.contains(mids)
    in_Sigma = plan.Sigma_nu.contains(mids) & ~in_S
    kinds = tuple(SCALED if a else (MU if b else UNIT) for a, b in zip(in_S, in_Sigma))
    if plan.Sigma_nu and plan.mu is None:
        raise ConstructionError("slow pieces need mu")
    lengths = [_piece_length(traj, k, a, b, plan.nu, plan.mu)
               for k, a, b in zip(kinds, tau[:-1], tau[1:])]
    if any(not (L > 0) for L in lengths):
        bad = next(i for i, L in enumerate(lengths) if not L > 0)
        raise ConstructionError(
            f"nonpositive image length on [{tau[bad]}, {tau[bad + 1]}] ({kinds[bad]})")

    k = len(kinds)
    if plan.anchor is Anchor.FINAL:
        phi = [0.0] * (k + 1)
        phi[k] = T
        for i in range(k - 1, -1, -1):
            phi[i] = phi[i + 1] - lengths[i]
        hang = ("right",) * k
    else:
        phi = [t]
        for L in lengths:
            phi.append(phi[-1] + L)
        hang = ("left",) * k
        if plan.anchor is Anchor.BOTH:
            phi[-1] = T
            hang = ("left",) * (k - 1) + ("right",)
    if any(not (b > a) for a, b in zip(phi[:-1], phi[1:])):
        raise ConstructionError("time change is not strictly increasing")
    return TimeChange(tuple(tau), tuple(phi), kinds, hang, plan.anchor, plan.nu, plan.mu, traj)


def invert_time_change(tc: TimeChange, s: float, tol: float = 1e-12) -> float:
    """``psi(s)`` for one point, checked against ``|phi(psi(s)) - s| <= tol``."""
    if not tc.range_interval.contains(s):
        raise DomainError(f"s={s} outside the range {tc.range_interval.as_tuple()}")
    tau = float(tc.psi(np.array([s]))[0])
    resid = abs(float(tc.phi(np.array([tau]))[0]) - s)
    if resid > tol * max(1.0, abs(s)):
        lo, hi = bisect_boundary(lambda u: tc.phi(u) >= s, np.array([tc.tau[0]]),
                                 np.array([tc.tau[-1]]))
        tau = float(hi[0])
    return tau


def reparametrize(traj: Trajectory, tc: TimeChange) -> Trajectory:
    """``y_nu = y o psi`` restricted to ``I``."""
    interval = traj.interval
    if tc.is_identity:
        return traj
    mu = tc.mu

    def value(s):
        s = np.asarray(s, dtype=float)
        flat = np.atleast_1d(s).ravel()
        idx = tc._locate(flat)
        out = np.empty(flat.shape if traj.dim == 1 else flat.shape + (traj.dim,))
        for i in np.unique(idx):
            m = idx == i
            if tc.kinds[i] == SCALED and traj.monotone and traj.dim == 1:
                out[m] = tc._scaled_value(i, flat[m])
            else:
                out[m] = traj.value(tc._psi_piece(i, flat[m]))
        return out.reshape(np.shape(s) + out.shape[1:])

    def deriv(s):
        s = np.asarray(s, dtype=float)
        flat = np.atleast_1d(s).ravel()
        idx = tc._locate(flat)
        tau = tc.psi(flat)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.asarray(traj.deriv(tau), dtype=float)
        kinds = np.asarray(tc.kinds)[idx]
        if traj.dim == 1:
            fast = tc.nu * np.sign(d)
            if traj.monotone:
                ya, yb = traj.value(np.array(tc.tau[:-1])), traj.value(np.array(tc.tau[1:]))
                fast = tc.nu * np.where(yb >= ya, 1.0, -1.0)[idx]
            scale = np.where(kinds == MU, 1.0 / mu if mu else 1.0, 1.0)
            out = np.where(kinds == SCALED, fast, d * scale)
        else:
            norm = np.linalg.norm(d, axis=-1, keepdims=True)
            fast = tc.nu * d / np.where(norm > 0, norm, 1.0)
            scale = np.where(kinds == MU, 1.0 / mu if mu else 1.0, 1.0)[:, None]
            out = np.where((kinds == SCALED)[:, None], fast, d * scale)
        return out.reshape(np.shape(s) + out.shape[1:])

    inner = tuple(x for x in tc.phi_at if interval.t_start < x < interval.t_end)
    inverse = None
    if traj.monotone and traj.inverse is not None:
        inverse = lambda z: tc.phi(traj.inverse(z))  # noqa: E731
    return Trajectory(interval, value, deriv, dim=traj.dim, singular_points=(),
                      breakpoints=inner, sobolev_p=traj.sobolev_p, monotone=traj.monotone,
                      inverse=inverse, name=f"{traj.name} at nu={tc.nu:g}",
                      grid_size=traj.grid_size)


def truncate_head(traj: Trajectory, cut: float) -> Trajectory:
    """Constant ``y(cut)`` on ``[t, cut]``, ``y`` afterwards."""
    if not traj.t < cut < traj.T:
        raise PreconditionError("cut must lie inside the interval")
    def value(s):
        return traj.value(np.maximum(np.asarray(s, dtype=float), cut))

    def deriv(s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.asarray(traj.deriv(np.maximum(s, cut)), dtype=float)
        head = s < cut if traj.dim == 1 else (s < cut)[..., None]
        return np.where(head, 0.0, d)

    singular = tuple(p for p in traj.singular_points if p > cut)
    return replace(traj, value=value, deriv=deriv, singular_points=singular,
                   breakpoints=tuple(sorted(set(traj.breakpoints) | {cut})), inverse=None,
                   name=f"{traj.name} cut at {cut:g}")


def reparametrized(traj: Trajectory, lag: Lagrangian, anchor, nu: float, **tuning):
    """``(plan, time change, y_nu)`` in one call."""
    plan = make_plan(traj, lag, anchor, nu, **tuning)
    tc = build_time_change(plan, traj)
    return plan, tc, reparametrize(traj, tc)
