"""Trade-off curves D -> Disc assembled from independent LP solves.

Two solves that end in the same optimal basis bracket a linear piece: the
basis stays primal feasible on the whole interval between them (feasibility
is convex in the right-hand side) and its reduced costs do not depend on D.
Breakpoints are therefore searched only between neighbours whose bases
differ, then bisected down to ``refine_tol``.  Degenerate programs can change
basis without changing slope, so adjacent runs that are collinear get merged
before breakpoints are reported.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

MONOTONE_TOL = 1e-9
CONVEX_TOL = 1e-7
CHORD_TOL = 1e-7
COLLINEAR_TOL = 1e-9
ZERO_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class CurvePoint:
    D: float
    disc: float
    channel: Any
    basis: tuple
    on_grid: bool = True


@dataclass(frozen=True, eq=False)
class TradeoffCurve:
    side: str
    points: tuple
    breakpoints: tuple
    d_min: float
    d_max: float
    checks: dict = field(default_factory=dict)

    @property
    def D(self) -> np.ndarray:
        return np.array([p.D for p in self.points])

    @property
    def disc(self) -> np.ndarray:
        return np.array([p.disc for p in self.points])

    def grid_points(self) -> list:
        return [p for p in self.points if p.on_grid]


SolveFn = Callable[[float], tuple]


def _evaluate(solve_fn: SolveFn, values: Sequence[float], jobs: int, on_grid: bool) -> list:
    def one(D):
        disc, channel, basis = solve_fn(D)
        return CurvePoint(float(D), float(disc), channel, basis, on_grid)

    if jobs > 1 and len(values) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, values))
    return [one(D) for D in values]


def _refine(solve_fn: SolveFn, lo: CurvePoint, hi: CurvePoint, tol: float) -> list:
    found = []
    stack = [(lo, hi)]
    while stack:
        lo, hi = stack.pop()
        while hi.D - lo.D > tol and lo.basis != hi.basis:
            mid = _evaluate(solve_fn, [0.5 * (lo.D + hi.D)], 1, on_grid=False)[0]
            found.append(mid)
            if mid.basis == lo.basis:
                lo = mid
            elif mid.basis == hi.basis:
                hi = mid
            else:
                stack.append((mid, hi))
                hi = mid
    return found


def _collinear(pts: Sequence[CurvePoint]) -> bool:
    if len(pts) < 3:
        return True
    D = np.array([p.D for p in pts])
    v = np.array([p.disc for p in pts])
    if D[-1] == D[0]:
        return bool(np.ptp(v) <= COLLINEAR_TOL)
    chord = v[0] + (v[-1] - v[0]) * (D - D[0]) / (D[-1] - D[0])
    return bool(np.abs(v - chord).max() <= COLLINEAR_TOL)


def _segments(points: Sequence[CurvePoint]) -> list:
    """Group sorted points into maximal linear pieces."""
    runs: list[list[CurvePoint]] = []
    for p in points:
        if runs and runs[-1][-1].basis == p.basis:
            runs[-1].append(p)
        else:
            runs.append([p])
    merged: list[list[CurvePoint]] = []
    for run in runs:
        if merged and _collinear(merged[-1] + run):
            merged[-1].extend(run)
        else:
            merged.append(list(run))
    return merged


def _kink(left: list, right: list) -> float:
    a, b = left[-1], right[0]
    if len(left) >= 2 and len(right) >= 2:
        s1 = (left[-1].disc - left[0].disc) / (left[-1].D - left[0].D)
        s2 = (right[-1].disc - right[0].disc) / (right[-1].D - right[0].D)
        if s1 != s2:
            x = (right[0].disc - left[-1].disc + s1 * left[-1].D - s2 * right[0].D) / (s1 - s2)
            if a.D <= x <= b.D:
                return float(x)
    return 0.5 * (a.D + b.D)


def curve_checks(points: Sequence[CurvePoint], segments: list, solve_fn: SolveFn | None) -> dict:
    D = np.array([p.D for p in points])
    v = np.array([p.disc for p in points])
    steps = np.diff(v)
    worst_rise = float(steps.max()) if steps.size else 0.0
    worst_convex = 0.0
    for i in range(1, len(points) - 1):
        lam = (D[i + 1] - D[i]) / (D[i + 1] - D[i - 1])
        worst_convex = max(worst_convex, v[i] - (lam * v[i - 1] + (1 - lam) * v[i + 1]))
    chord_err = 0.0
    if solve_fn is not None:
        for seg in segments:
            if len(seg) < 2 or seg[-1].D - seg[0].D <= 0:
                continue
            mid = 0.5 * (seg[0].D + seg[-1].D)
            val = solve_fn(mid)[0]
            chord_err = max(chord_err, abs(val - 0.5 * (seg[0].disc + seg[-1].disc)))
    return {
        "non_increasing": worst_rise <= MONOTONE_TOL,
        "max_rise": worst_rise,
        "convex": worst_convex <= CONVEX_TOL,
        "max_convexity_violation": float(worst_convex),
        "chord_linear": chord_err <= CHORD_TOL,
        "max_chord_error": float(chord_err),
        "zero_at_d_max": bool(v[-1] <= ZERO_EPS) if v.size else True,
    }


def sweep(solve_fn: SolveFn, grid: Sequence[float], *, d_min: float, d_max: float, side: str,
          jobs: int = 1, refine_tol: float = 1e-6) -> TradeoffCurve:
    """Solve on ``grid``, bisect basis changes, and assemble a checked curve.

    ``solve_fn(D)`` must return ``(disc, channel, basis)``.
    """
    values = sorted({float(D) for D in grid})
    points = _evaluate(solve_fn, values, jobs, on_grid=True)
    extra = []
    for lo, hi in zip(points, points[1:]):
        if lo.basis != hi.basis:
            extra.extend(_refine(solve_fn, lo, hi, refine_tol))
    points = sorted(points + extra, key=lambda p: p.D)
    segments = _segments(points)
    breakpoints = tuple(_kink(l, r) for l, r in zip(segments, segments[1:]))
    checks = curve_checks(points, segments, solve_fn)
    checks["zero_at_d_max"] = bool(points[-1].disc <= ZERO_EPS) if points[-1].D >= d_max else None
    return TradeoffCurve(side, tuple(points), breakpoints, float(d_min), float(d_max), checks)


def auto_grid(d_min: float, d_max: float, count: int = 33) -> np.ndarray:
    if count < 1:
        raise ValueError("grid count must be positive")
    if d_max <= d_min or count == 1:
        return np.array([d_min])
    return np.linspace(d_min, d_max, count)
