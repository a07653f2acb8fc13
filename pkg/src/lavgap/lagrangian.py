"""Extended-valued densities ``L = Lambda * Psi`` and their domain geometry.

All evaluators are vectorized: ``s``, ``z`` and ``v`` broadcast against each
other, with a trailing axis of length ``dim`` on ``z`` and ``v`` when
``dim > 1``.  The domain predicate is authoritative: ``Lambda`` is never
called off the domain, and reads as ``+inf`` there.
"""

import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Callable, Optional, Tuple

import numpy as np

from .core import bisect_boundary
from .errors import DegenerateProbeError, DomainError, PreconditionError
from .probes import VIOLATION_TOL, HypothesisReport, ProbeSet, Verdict, witness

DEFAULT_H = 1e-4
DIST_TOL = 1e-10
SEARCH_RADIUS = 1e6
LATTICE = 64


def _full_domain(s, z, v):
    return np.ones(np.broadcast_shapes(np.shape(s), np.shape(z), np.shape(v)), dtype=bool)


@dataclass(frozen=True)
class Lagrangian:
    """Pair ``(Lambda, Psi)`` with the effective domain of ``Lambda``.

    ``lam_grad_v`` is an optional analytic velocity gradient for smooth
    ``Lambda``; ``growth`` holds ``(alpha, d)`` with ``Lambda >= alpha|v| - d``.
    """

    lam: Callable
    psi: Callable
    domain: Callable = _full_domain
    autonomous: bool = True
    real_valued: bool = True
    growth: Optional[Tuple[float, float]] = None
    lam_grad_v: Optional[Callable] = None
    dim: int = 1
    name: str = ""

    def __post_init__(self):
        if self.real_valued and self.domain is not _full_domain:
            raise ValueError("a restricted domain needs real_valued=False")

    def in_domain(self, s, z, v) -> np.ndarray:
        if self.domain is _full_domain:
            return _full_domain(s, z, v) if self.dim == 1 else np.ones(
                np.broadcast_shapes(np.shape(s), np.shape(z)[:-1], np.shape(v)[:-1]), dtype=bool)
        return np.asarray(self.domain(s, z, v), dtype=bool)

    def lam_value(self, s, z, v) -> np.ndarray:
        """``Lambda`` with ``+inf`` off the domain."""
        s, z, v = (np.asarray(x, dtype=float) for x in (s, z, v))
        if self.domain is _full_domain:
            return np.asarray(self.lam(s, z, v), dtype=float)
        inside = self.in_domain(s, z, v)
        shape = inside.shape
        out = np.full(shape, np.inf)
        if inside.any():
            sb = np.broadcast_to(s, shape)
            if self.dim == 1:
                zb, vb = np.broadcast_to(z, shape), np.broadcast_to(v, shape)
            else:
                zb = np.broadcast_to(z, shape + (self.dim,))
                vb = np.broadcast_to(v, shape + (self.dim,))
            with np.errstate(all="ignore"):
                out[inside] = self.lam(sb[inside], zb[inside], vb[inside])
        return out

    def psi_value(self, s, z) -> np.ndarray:
        return np.asarray(self.psi(np.asarray(s, dtype=float), np.asarray(z, dtype=float)),
                          dtype=float)


def extended_product(a, b) -> np.ndarray:
    """``a * b`` for nonnegative extended reals with ``0 * inf = 0``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    zero = (a == 0.0) | (b == 0.0)
    with np.errstate(invalid="ignore"):
        return np.where(zero, 0.0, a * b)


def eval_density(lag: Lagrangian, s, z, v) -> np.ndarray:
    """``L(s, z, v) = Lambda(s, z, v) * Psi(s, z)``."""
    return extended_product(lag.lam_value(s, z, v), lag.psi_value(s, z))


class DistanceKind(str, Enum):
    EUCLIDEAN = "euclidean"
    U = "u_distance"

    @classmethod
    def parse(cls, text: str) -> "DistanceKind":
        aliases = {"e": cls.EUCLIDEAN, "euclidean": cls.EUCLIDEAN,
                   "u": cls.U, "u_distance": cls.U}
        try:
            return aliases[text]
        except KeyError:
            raise ValueError(f"unknown distance kind {text!r}") from None

    def between(self, a, b) -> float:
        """Distance between triples ``(s, z, v)``.

        The u-distance only compares triples sharing ``(s, z)``; other pairs
        are at distance ``+inf``.
        """
        (s1, z1, v1), (s2, z2, v2) = a, b
        dz = np.atleast_1d(np.subtract(z2, z1))
        dv = np.atleast_1d(np.subtract(v2, v1))
        if self is DistanceKind.U:
            if s1 != s2 or np.any(dz != 0):
                return math.inf
            return float(np.linalg.norm(dv))
        return float(math.sqrt((s2 - s1) ** 2 + dz @ dz + dv @ dv))


def _directions(dim: int, v: np.ndarray) -> np.ndarray:
    """Search directions in velocity space, shape ``(m, k, dim)``."""
    if dim == 1:
        return np.broadcast_to(np.array([[1.0], [-1.0]]), (v.shape[0], 2, 1))
    fixed = [np.eye(dim), -np.eye(dim)]
    if dim == 3:
        g = (1 + 5**0.5) / 2
        ico = np.array([[0, 1, g], [0, -1, g], [1, g, 0], [-1, g, 0], [g, 0, 1], [g, 0, -1]])
        ico /= np.linalg.norm(ico, axis=1, keepdims=True)
        fixed += [ico, -ico]
    fixed = np.concatenate(fixed)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    radial = np.where(norm > 0, v / np.where(norm > 0, norm, 1.0), 0.0)
    dirs = np.concatenate([radial[:, None, :], -radial[:, None, :],
                           np.broadcast_to(fixed, (v.shape[0],) + fixed.shape)], axis=1)
    return dirs


def _ray_exit(outside, tol, radius):
    """Distance along rays to the first point failing the domain.

    ``outside(delta)`` takes a length-``m`` array of offsets and tells which
    offset points lie in the complement.  Offsets grow geometrically from
    ``tol`` to ``radius``; the first exit is then bisected to ``tol``.
    """
    steps = tol * 2.0 ** np.arange(int(math.ceil(math.log2(radius / tol))) + 1)
    m = outside.size
    hit = np.zeros((m, steps.size), dtype=bool)
    for k, d in enumerate(steps):
        hit[:, k] = outside.at(np.full(m, d))
    found = hit.any(axis=1)
    first = np.argmax(hit, axis=1)
    result = np.full(m, np.inf)
    if found.any():
        hi = steps[first[found]]
        lo = np.where(first[found] > 0, steps[np.maximum(first[found] - 1, 0)], 0.0)
        pred = lambda d: outside.at(d, found)  # noqa: E731
        _, hi = bisect_boundary(pred, lo, hi, tol=tol)
        result[found] = hi
    return result


class _RayProbe:
    def __init__(self, lag, s, z, v, direction):
        self.lag, self.s, self.z, self.v, self.dir = lag, s, z, v, direction
        self.size = s.shape[0]

    def at(self, delta, mask=None):
        s, z, v, d = self.s, self.z, self.v, self.dir
        if mask is not None:
            s, z, v, d = s[mask], z[mask], v[mask], d[mask]
        if self.lag.dim == 1:
            return ~self.lag.in_domain(s, z, v + delta * d[:, 0])
        return ~self.lag.in_domain(s, z, v + delta[:, None] * d)


def ray_exit(lag: Lagrangian, s, z, v, sign: float, tol=DIST_TOL,
             radius=SEARCH_RADIUS) -> np.ndarray:
    """Distance along ``v + delta * sign`` (``n = 1``) to the first complement point."""
    s, z, v = np.broadcast_arrays(*(np.atleast_1d(np.asarray(x, dtype=float)) for x in (s, z, v)))
    if lag.real_valued:
        return np.full(s.shape, np.inf)
    direction = np.full((s.size, 1), float(sign))
    return _ray_exit(_RayProbe(lag, s, z, v, direction), tol, radius)


def u_distance(lag: Lagrangian, s, z, v, tol=DIST_TOL, radius=SEARCH_RADIUS) -> np.ndarray:
    """Vectorized velocity-only distance to the domain complement.

    Exact up to ``tol`` for ``n = 1`` (both directions of the velocity
    axis); for ``n > 1`` the minimum over a fixed direction set, which is
    an upper bound.  ``+inf`` when no complement point lies within
    ``radius``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float)
    if lag.dim == 1:
        z, v = np.atleast_1d(z), np.atleast_1d(v)
        s, z, v = np.broadcast_arrays(s, z, v)
        vv = v[:, None]
    else:
        z, v = np.atleast_2d(z), np.atleast_2d(v)
        vv = v
    if lag.real_valued:
        return np.full(s.shape, np.inf)
    dirs = _directions(lag.dim, vv)
    best = np.full(s.shape, np.inf)
    for k in range(dirs.shape[1]):
        probe = _RayProbe(lag, s, z, v, dirs[:, k, :])
        best = np.minimum(best, _ray_exit(probe, tol, radius))
    return best


#: Lattice nodes evaluated per chunk in the Euclidean search.
LATTICE_BUDGET = 2_000_000


def euclidean_distance(lag: Lagrangian, s, z, v, tol=DIST_TOL, lattice=LATTICE,
                       radius=SEARCH_RADIUS, refine=8) -> np.ndarray:
    """Euclidean distance to the domain complement in ``(s, z, v)``, ``n = 1``.

    A ``lattice**3`` grid in the cube of half-width ``dist_u`` around each
    point is scanned; the nearest complement nodes are refined by bisection
    along the connecting segment.  The velocity-axis exits are kept as
    candidates, so the result never exceeds the u-distance.
    """
    if lag.dim != 1:
        raise PreconditionError("euclidean lattice search is implemented for n = 1")
    du = u_distance(lag, s, z, v, tol, radius)
    s, z, v = np.broadcast_arrays(*(np.atleast_1d(np.asarray(x, dtype=float)) for x in (s, z, v)))
    base = np.stack([s.ravel(), z.ravel(), v.ravel()], axis=1)
    out = du.ravel().copy()
    unit = np.linspace(-1.0, 1.0, lattice)
    cube = np.stack(np.meshgrid(unit, unit, unit, indexing="ij"), axis=-1).reshape(-1, 3)
    cube_len = np.linalg.norm(cube, axis=1)
    order = np.argsort(cube_len, kind="stable")
    cube, cube_len = cube[order], cube_len[order]
    half = np.where(np.isfinite(out), out, 1.0)
    todo = np.nonzero(half > tol)[0]
    chunk = max(1, LATTICE_BUDGET // cube.shape[0])
    for c0 in range(0, todo.size, chunk):
        ids = todo[c0:c0 + chunk]
        pts = base[ids, None, :] + half[ids, None, None] * cube[None, :, :]
        flat = pts.reshape(-1, 3)
        outside = ~lag.in_domain(flat[:, 0], flat[:, 1], flat[:, 2]).reshape(ids.size, -1)
        # the ``refine`` complement nodes closest to each probe (cube is sorted by radius)
        pick = outside & (np.cumsum(outside, axis=1) <= refine)
        rows, cols = np.nonzero(pick)
        if rows.size == 0:
            continue
        p0, targets = base[ids[rows]], pts[rows, cols]

        def pred(t, p0=p0, targets=targets):
            q = p0 + t[:, None] * (targets - p0)
            return ~lag.in_domain(q[:, 0], q[:, 1], q[:, 2])

        scale = half[ids[rows]]
        _, hi = bisect_boundary(pred, np.zeros(rows.size), np.ones(rows.size),
                                tol=float(tol / scale.max()))
        cand = hi * scale * cube_len[cols]
        best = np.full(ids.size, np.inf)
        np.minimum.at(best, rows, cand)
        out[ids] = np.minimum(out[ids], best)
    return out.reshape(du.shape)


def distance_to_complement(lag: Lagrangian, kind: DistanceKind, s, z, v, tol=DIST_TOL,
                           **kwargs) -> np.ndarray:
    if DistanceKind(kind) is DistanceKind.U:
        return u_distance(lag, s, z, v, tol, **kwargs)
    return euclidean_distance(lag, s, z, v, tol, **kwargs)


def dist_to_complement(lag: Lagrangian, kind: DistanceKind, s: float, z, v,
                       tol: float = DIST_TOL, **kwargs) -> float:
    """Distance from one in-domain triple to ``Dom(Lambda)^c``."""
    if not np.all(lag.in_domain(s, z, v)):
        raise DomainError(f"({s}, {z}, {v}) is not in the effective domain")
    return float(distance_to_complement(lag, kind, s, z, v, tol, **kwargs)[0])


def _radial_quotient(lag, s, z, v, h, mode):
    """Difference quotient of ``mu -> Lambda(s, z, v/mu) mu`` at ``mu = 1``."""
    g1 = lag.lam_value(s, z, v)
    gu = lag.lam_value(s, z, v / (1 + h)) * (1 + h)
    gd = lag.lam_value(s, z, v / (1 - h)) * (1 - h)
    with np.errstate(invalid="ignore"):
        central = (gu - gd) / (2 * h)
        forward = (gu - g1) / h
        backward = (g1 - gd) / h
    return np.select([mode == 0, mode == 1, mode == 2], [central, forward, backward], np.nan)


def subgradient_P_batch(lag: Lagrangian, s, z, v, h: float = DEFAULT_H,
                        richardson: bool = True) -> np.ndarray:
    """Radial subgradient ``P`` at many points; ``nan`` where no side is admissible.

    The quotient is central when both ``mu = 1 +- h`` keep ``v/mu`` in the
    domain and one-sided otherwise.  A second pass at ``h/2`` removes the
    leading error term (Richardson).
    """
    if not 0.0 < h < 0.5:
        raise PreconditionError("h must lie in (0, 0.5)")
    s, z, v = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (s, z, v)))
    up = lag.in_domain(s, z, v / (1 + h))
    down = lag.in_domain(s, z, v / (1 - h))
    mode = np.where(up & down, 0, np.where(up, 1, np.where(down, 2, 3)))
    d1 = _radial_quotient(lag, s, z, v, h, mode)
    if not richardson:
        return d1
    d2 = _radial_quotient(lag, s, z, v, h / 2, mode)
    return np.where(mode == 0, (4 * d2 - d1) / 3, 2 * d2 - d1)


def subgradient_P(lag: Lagrangian, s: float, z, v, h: float = DEFAULT_H) -> float:
    if not np.all(lag.in_domain(s, z, v)):
        raise DomainError(f"({s}, {z}, {v}) is not in the effective domain")
    p = float(subgradient_P_batch(lag, s, z, v, h))
    if math.isnan(p):
        raise DegenerateProbeError(f"both mu = 1 +- {h} leave the domain at v={v}")
    return p


def smooth_P(lag: Lagrangian, s, z, v) -> np.ndarray:
    """``Lambda - v * grad_v Lambda`` from the analytic gradient."""
    if lag.lam_grad_v is None:
        raise PreconditionError("no analytic velocity gradient registered")
    grad = np.asarray(lag.lam_grad_v(s, z, v), dtype=float)
    vg = v * grad if lag.dim == 1 else np.sum(v * grad, axis=-1)
    return lag.lam_value(s, z, v) - vg


@dataclass(frozen=True)
class StructureReport:
    radially_convex: HypothesisReport
    star_shaped: HypothesisReport


STAR_R = np.array([1e-3, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0])
CONVEX_R = 2.0 ** np.arange(-6, 7)


def structure_check(lag: Lagrangian, probes: ProbeSet) -> StructureReport:
    """Midpoint convexity of ``r -> Lambda(s, z, r v)`` and star-shapedness
    of the velocity sections, on the in-domain probes."""
    inside = lag.in_domain(probes.s, probes.z, probes.v)
    p = probes.subset(inside)
    s, z, v = p.s, p.z, p.v

    star = HypothesisReport("star", Verdict.PASS, statistic=float(len(p)))
    for r in STAR_R:
        bad = ~lag.in_domain(s, z, r * v)
        if bad.any():
            i = int(np.argmax(bad))
            star = HypothesisReport("star", Verdict.FALSIFIED,
                                    witness(s=s[i], z=z[i], v=v[i], r=r))
            break

    vals = {r: lag.lam_value(s, z, r * v) for r in CONVEX_R}
    convex = HypothesisReport("Ac", Verdict.PASS, statistic=0.0)
    worst = 0.0
    for r1, r2 in combinations(CONVEX_R, 2):
        rm = 0.5 * (r1 + r2)
        mid = lag.lam_value(s, z, rm * v)
        with np.errstate(invalid="ignore"):
            avg = 0.5 * (vals[r1] + vals[r2])
            excess = mid - avg
        finite = np.isfinite(avg)
        excess = np.where(finite, excess, -np.inf)
        scale = 1.0 + np.where(finite, np.abs(avg), 0.0)
        rel = np.where(np.isfinite(excess), excess / scale, np.where(finite, np.inf, -np.inf))
        i = int(np.argmax(rel))
        if rel[i] > worst:
            worst = float(rel[i])
        if rel[i] > VIOLATION_TOL:
            convex = HypothesisReport("Ac", Verdict.FALSIFIED,
                                      witness(s=s[i], z=z[i], v=v[i], r1=r1, r2=r2),
                                      statistic=float(rel[i]))
            break
    if convex.passed:
        convex = HypothesisReport("Ac", Verdict.PASS, statistic=worst)
    return StructureReport(convex, star)
