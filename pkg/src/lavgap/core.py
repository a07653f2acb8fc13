"""Intervals, finite interval unions, and trajectory representations.

Measurable sets are finite unions of closed intervals.  Superlevel sets of
``|y'|`` are resolved by scanning a uniform grid and bisecting every sign
change of the membership predicate, so components narrower than the grid
spacing can be missed when ``|y'|`` is not piecewise monotone.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, List, Optional, Tuple

import numpy as np

from .errors import DomainError, PreconditionError
from .quadrature import integrate

DEFAULT_GRID = 2**12
BISECT_TOL = 1e-12

#: Derivative value reported at declared singular points.
UNBOUNDED = math.inf


@dataclass(frozen=True)
class Interval:
    t_start: float
    t_end: float

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError(f"empty interval [{self.t_start}, {self.t_end}]")

    @property
    def length(self) -> float:
        return self.t_end - self.t_start

    def contains(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return (s >= self.t_start) & (s <= self.t_end)

    def as_tuple(self) -> Tuple[float, float]:
        return (self.t_start, self.t_end)


class IntervalSet:
    """Sorted union of pairwise-disjoint closed intervals.

    Overlapping or touching components are merged on construction;
    degenerate (zero-length) components are dropped.
    """

    __slots__ = ("_parts",)

    def __init__(self, parts: Iterable[Tuple[float, float]] = ()):
        cleaned = sorted((float(a), float(b)) for a, b in parts if b > a)
        merged = []
        for a, b in cleaned:
            if merged and a <= merged[-1][1]:
                if b > merged[-1][1]:
                    merged[-1] = (merged[-1][0], b)
            else:
                merged.append((a, b))
        self._parts = tuple(merged)

    @classmethod
    def empty(cls):
        return cls(())

    @property
    def parts(self) -> Tuple[Tuple[float, float], ...]:
        return self._parts

    def __iter__(self):
        return iter(self._parts)

    def __len__(self):
        return len(self._parts)

    def __bool__(self):
        return bool(self._parts)

    def __eq__(self, other):
        return isinstance(other, IntervalSet) and self._parts == other._parts

    def __hash__(self):
        return hash(self._parts)

    def __repr__(self):
        inner = ", ".join(f"[{a:.6g}, {b:.6g}]" for a, b in self._parts)
        return f"IntervalSet({inner})"

    @property
    def measure(self) -> float:
        return math.fsum(b - a for a, b in self._parts)

    @property
    def endpoints(self) -> Tuple[float, ...]:
        return tuple(x for part in self._parts for x in part)

    def contains(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape, dtype=bool)
        for a, b in self._parts:
            out |= (s >= a) & (s <= b)
        return out

    def intersection(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        i = j = 0
        A, B = self._parts, other._parts
        while i < len(A) and j < len(B):
            lo = max(A[i][0], B[j][0])
            hi = min(A[i][1], B[j][1])
            if hi > lo:
                out.append((lo, hi))
            if A[i][1] < B[j][1]:
                i += 1
            else:
                j += 1
        return IntervalSet(out)

    def complement(self, within: Interval) -> "IntervalSet":
        out = []
        cursor = within.t_start
        for a, b in self._parts:
            a, b = max(a, within.t_start), min(b, within.t_end)
            if a > cursor:
                out.append((cursor, a))
            cursor = max(cursor, b)
        if cursor < within.t_end:
            out.append((cursor, within.t_end))
        return IntervalSet(out)

    def difference(self, other: "IntervalSet") -> "IntervalSet":
        if not self._parts:
            return self
        hull = Interval(self._parts[0][0], self._parts[-1][1])
        return self.intersection(other.complement(hull))

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self._parts + other._parts)

    def take_leftmost(self, amount: float) -> "IntervalSet":
        """Leftmost subset with measure exactly ``amount`` (last piece split)."""
        if amount <= 0.0:
            return IntervalSet.empty()
        out = []
        remaining = amount
        for a, b in self._parts:
            length = b - a
            if length >= remaining:
                out.append((a, a + remaining))
                remaining = 0.0
                break
            out.append((a, b))
            remaining -= length
        if remaining > 0.0:
            raise ValueError(f"set of measure {self.measure} cannot supply {amount}")
        return IntervalSet(out)


def measure(interval_set: IntervalSet) -> float:
    return interval_set.measure


def _vector_norm(x, dim):
    x = np.asarray(x, dtype=float)
    if dim == 1:
        return np.abs(x)
    return np.linalg.norm(x, axis=-1)


@dataclass(frozen=True)
class Trajectory:
    """Absolutely continuous curve on ``interval``.

    ``value`` and ``deriv`` are vectorized over time: an array of shape
    ``(m,)`` maps to ``(m,)`` when ``dim == 1`` and ``(m, dim)`` otherwise.
    ``monotone`` declares a strictly monotone scalar curve, which lets
    integrals of ``|y'|`` be read off value differences; ``inverse`` maps
    values back to times for such curves.
    """

    interval: Interval
    value: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    dim: int = 1
    singular_points: Tuple[float, ...] = ()
    breakpoints: Tuple[float, ...] = ()
    sobolev_p: float = 1.0
    monotone: bool = False
    inverse: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""
    grid_size: int = field(default=DEFAULT_GRID, compare=False)

    @property
    def t(self) -> float:
        return self.interval.t_start

    @property
    def T(self) -> float:
        return self.interval.t_end

    def speed(self, s) -> np.ndarray:
        """``|y'(s)|`` with ``+inf`` at declared singular points."""
        s = np.asarray(s, dtype=float)
        out = np.empty(s.shape)
        sing = np.zeros(s.shape, dtype=bool)
        for point in self.singular_points:
            sing |= s == point
        out[sing] = np.inf
        if (~sing).any():
            out[~sing] = _vector_norm(self.deriv(s[~sing]), self.dim)
        return out

    @cached_property
    def grid(self) -> np.ndarray:
        return np.linspace(self.t, self.T, self.grid_size + 1)

    @cached_property
    def grid_speed(self) -> np.ndarray:
        return self.speed(self.grid)

    @cached_property
    def deriv_l1(self) -> float:
        """``||y'||_1``."""
        if self.monotone and self.dim == 1:
            return self.abs_deriv_integral(self.t, self.T)
        return lp_norm(self, 1.0, "derivative")

    @cached_property
    def sup_norm(self) -> float:
        """``||y||_inf`` estimated on the grid plus endpoints."""
        v = self.value(self.grid)
        return float(np.max(_vector_norm(v, self.dim)))

    def abs_deriv_integral(self, a: float, b: float) -> float:
        """``int_a^b |y'|``; exact for monotone scalar curves."""
        if b <= a:
            return 0.0
        if self.monotone and self.dim == 1:
            ya, yb = self.value(np.array([a, b]))
            return abs(float(yb) - float(ya))
        res = integrate(lambda s: self.speed(s), a, b,
                        breakpoints=self.breakpoints, singular=self.singular_points)
        return res.value

    @classmethod
    def from_samples(cls, s_grid, values, singular_points=(), name="sampled", sobolev_p=1.0):
        """Piecewise-linear values, central-difference derivatives."""
        s_grid = np.asarray(s_grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if s_grid.ndim != 1 or s_grid.size < 3 or np.any(np.diff(s_grid) <= 0):
            raise ValueError("sample grid must be strictly increasing with >= 3 nodes")
        dim = 1 if values.ndim == 1 else values.shape[1]
        d = np.gradient(values, s_grid, axis=0)

        def interp(table):
            if dim == 1:
                return lambda s: np.interp(s, s_grid, table)
            return lambda s: np.stack(
                [np.interp(s, s_grid, table[:, k]) for k in range(dim)], axis=-1)

        return cls(Interval(s_grid[0], s_grid[-1]), interp(values), interp(d), dim=dim,
                   singular_points=tuple(singular_points), name=name, sobolev_p=sobolev_p)


def sample(traj: Trajectory, s: float):
    """``(y(s), y'(s))`` as length-``dim`` arrays; derivative is ``UNBOUNDED``
    at declared singular points."""
    s = float(s)
    if not traj.interval.contains(s):
        raise DomainError(f"s={s} outside [{traj.t}, {traj.T}]")
    val = np.atleast_1d(np.asarray(traj.value(np.array([s])), dtype=float)[0])
    if s in traj.singular_points:
        return val, UNBOUNDED
    der = np.atleast_1d(np.asarray(traj.deriv(np.array([s])), dtype=float)[0])
    return val, der


def lp_norm(traj: Trajectory, p: float, target: str = "derivative", **quad) -> float:
    """``L^p`` norm of ``y`` or ``y'``; ``+inf`` when the integral diverges."""
    if p < 1:
        raise PreconditionError("p >= 1 required")
    if target == "derivative":
        if p == 1 and traj.monotone and not quad:
            return traj.deriv_l1
        fn = traj.speed
    elif target == "value":
        fn = lambda s: _vector_norm(traj.value(s), traj.dim)  # noqa: E731
    else:
        raise ValueError(f"unknown target {target!r}")
    res = integrate(lambda s: fn(s) ** p, traj.t, traj.T, breakpoints=traj.breakpoints,
                    singular=traj.singular_points, **quad)
    if res.divergent:
        return math.inf
    return res.value ** (1.0 / p)


def bisect_boundary(pred, lo, hi, max_iter=1100, tol=0.0):
    """Vectorized bisection for predicates with ``pred(lo) != pred(hi)``.

    By default runs until the bracket cannot shrink in floating point,
    which is at least as tight as ``BISECT_TOL``; a positive ``tol`` stops
    once every bracket is that narrow.  Returns ``(lo, hi)`` arrays.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    p_lo = np.asarray(pred(lo), dtype=bool)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        active = (mid > np.minimum(lo, hi)) & (mid < np.maximum(lo, hi))
        if tol > 0.0:
            active &= np.abs(hi - lo) > tol
        if not active.any():
            break
        p_mid = np.asarray(pred(mid), dtype=bool)
        same = (p_mid == p_lo) & active
        other = (~same) & active
        lo = np.where(same, mid, lo)
        hi = np.where(other, mid, hi)
    return lo, hi


def predicate_set(pred, interval: Interval, n_nodes: int = DEFAULT_GRID,
                  node_values: Optional[np.ndarray] = None) -> IntervalSet:
    """Set where a vectorized boolean predicate holds, as an interval union."""
    grid = np.linspace(interval.t_start, interval.t_end, n_nodes + 1)
    inside = np.asarray(pred(grid) if node_values is None else node_values, dtype=bool)
    flips = np.nonzero(inside[1:] != inside[:-1])[0]
    if flips.size:
        lo, hi = bisect_boundary(pred, grid[flips], grid[flips + 1])
        # boundary: last point agreeing with the left node, first agreeing with the right
        left_in = inside[flips]
        cut = np.where(left_in, lo, hi)
    else:
        cut = np.array([])
    return _assemble(inside, flips, cut, interval)


def _assemble(inside_row, flips, cuts, interval: Interval) -> IntervalSet:
    parts = []
    start = interval.t_start if inside_row[0] else None
    for idx, cut in zip(flips, cuts):
        if inside_row[idx]:
            parts.append((start, float(cut)))
            start = None
        else:
            start = float(cut)
    if start is not None:
        parts.append((start, interval.t_end))
    return IntervalSet(parts)


def _level_sets(traj: Trajectory, thresholds, above: bool) -> List[IntervalSet]:
    """Level sets of ``|y'|`` for many thresholds with one batched bisection."""
    thr = np.atleast_1d(np.asarray(thresholds, dtype=float))
    grid, speed = traj.grid, traj.grid_speed
    compare = np.greater if above else np.less
    inside = compare(speed[None, :], thr[:, None])
    rows, cols = np.nonzero(inside[:, 1:] != inside[:, :-1])
    if rows.size:
        lo, hi = bisect_boundary(lambda s: compare(traj.speed(s), thr[rows]),
                                 grid[cols], grid[cols + 1])
        cut = np.where(inside[rows, cols], lo, hi)
    else:
        cut = np.array([])
    out = []
    bounds = np.searchsorted(rows, np.arange(thr.size + 1))
    for k in range(thr.size):
        sl = slice(bounds[k], bounds[k + 1])
        out.append(_assemble(inside[k], cols[sl], cut[sl], traj.interval))
    return out


def superlevel_sets(traj: Trajectory, thresholds) -> List[IntervalSet]:
    """``superlevel_set`` for a batch of thresholds on the cached grid."""
    thr = np.atleast_1d(np.asarray(thresholds, dtype=float))
    if not np.all(thr > 0):
        raise PreconditionError("thresholds must be positive")
    return _level_sets(traj, thr, above=True)


def superlevel_set(traj: Trajectory, threshold: float, n_nodes: Optional[int] = None) -> IntervalSet:
    """``{s : |y'(s)| > threshold}``."""
    if not threshold > 0:
        raise PreconditionError("threshold must be positive")
    if n_nodes is None or n_nodes == traj.grid_size:
        return _level_sets(traj, [threshold], above=True)[0]
    return predicate_set(lambda s: traj.speed(s) > threshold, traj.interval, n_nodes)


def sublevel_set(traj: Trajectory, threshold: float) -> IntervalSet:
    """``{s : |y'(s)| < threshold}`` up to a null set."""
    return _level_sets(traj, [threshold], above=False)[0]


def sublevel_sets(traj: Trajectory, thresholds) -> List[IntervalSet]:
    return _level_sets(traj, thresholds, above=False)


def fundamental_theorem_gap(traj: Trajectory, a: float, b: float) -> float:
    """``|y(b) - y(a) - int_a^b y'|``, componentwise max."""
    gaps = []
    vals = np.asarray(traj.value(np.array([a, b])), dtype=float)
    for k in range(traj.dim):
        if traj.dim == 1:
            comp = lambda s: np.asarray(traj.deriv(s), dtype=float)  # noqa: E731
            delta = vals[1] - vals[0]
        else:
            comp = lambda s, k=k: np.asarray(traj.deriv(s), dtype=float)[..., k]  # noqa: E731
            delta = vals[1, k] - vals[0, k]
        res = integrate(comp, a, b, breakpoints=traj.breakpoints,
                        singular=traj.singular_points)
        gaps.append(abs(float(delta) - res.value))
    return max(gaps)
