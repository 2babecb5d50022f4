"""Optimal pre-processing: minimal discrimination under a distortion budget.

The decision variables are the pre-processing channel P(xt | x, a) (or a
single P(xt | x) shared by both groups), the induced prediction law and one
auxiliary ``t`` per absolute-value term of the total-variation objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

from . import lp_solver
from .curve import TradeoffCurve, auto_grid, sweep
from .errors import InfeasibleBudget, InvalidInput
from .lp_solver import LinearProgram
from .prob_core import (
    Channel,
    ChannelLike,
    Criterion,
    DistortionMatrix,
    DistortionMode,
    JointDistribution,
    dp_discrimination,
    expected_distortion,
    induced_prediction_channel,
    induced_prediction_given_a,
    pre_cost_tensor,
    tv_discrimination,
)

ZERO_DISC_EPS = 1e-9
BUDGET_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class PreProblem:
    joint: JointDistribution
    w: Channel
    d: DistortionMatrix
    use_a: bool = True
    criterion: Criterion = Criterion.EQUALIZED_ODDS
    distortion_mode: DistortionMode = DistortionMode.GLOBAL

    def __post_init__(self):
        object.__setattr__(self, "criterion", Criterion(self.criterion))
        object.__setattr__(self, "distortion_mode", DistortionMode(self.distortion_mode))
        nx, ny = self.joint.n_x, self.joint.n_y
        if self.w.k.shape != (nx, ny):
            raise InvalidInput(f"classifier shape {self.w.k.shape} does not match (|X|, |Y|) = ({nx}, {ny})")
        if self.d.n != ny:
            raise InvalidInput(f"distortion matrix size {self.d.n} does not match |Y| = {ny}")
        if self.distortion_mode is DistortionMode.PER_X and np.all(self.joint.p_x == 0):
            raise InvalidInput("no feature value has positive mass")

    @property
    def n_groups(self) -> int:
        return 2 if self.use_a else 1


class DiscResult(NamedTuple):
    value: float
    channel: ChannelLike


class _Layout:
    """Column offsets of the three variable blocks."""

    def __init__(self, prob: PreProblem):
        nx, ny = prob.joint.n_x, prob.joint.n_y
        self.nx, self.ny, self.G = nx, ny, prob.n_groups
        self.eo = prob.criterion is Criterion.EQUALIZED_ODDS
        self.n_t = ny * ny if self.eo else ny
        self.n_pre = self.G * nx * nx
        self.n_ind = 2 * ny * ny if self.eo else 2 * ny
        self.n = self.n_t + self.n_pre + self.n_ind

    def t(self, k: int) -> int:
        return k

    def pre(self, a: int, x: int, xt: int) -> int:
        g = a if self.G == 2 else 0
        return self.n_t + (g * self.nx + x) * self.nx + xt

    def ind(self, a: int, k: int) -> int:
        width = self.ny * self.ny if self.eo else self.ny
        return self.n_t + self.n_pre + a * width + k

    def names(self) -> list[str]:
        ny = self.ny
        out = []
        for k in range(self.n_t):
            out.append(f"t[y={k // ny},yh={k % ny}]" if self.eo else f"t[yh={k}]")
        for g in range(self.G):
            for x in range(self.nx):
                for xt in range(self.nx):
                    out.append(f"pre[a={g},x={x},xt={xt}]" if self.G == 2 else f"pre[x={x},xt={xt}]")
        for a in range(2):
            for k in range(self.n_ind // 2):
                out.append(f"ind[a={a},y={k // ny},yh={k % ny}]" if self.eo else f"ind[a={a},yh={k}]")
        return out


def _distortion_rows(prob: PreProblem, lay: _Layout) -> np.ndarray:
    cost = pre_cost_tensor(prob.w, prob.joint, prob.d)
    nx = lay.nx
    if prob.distortion_mode is DistortionMode.GLOBAL:
        row = np.zeros(lay.n)
        for a in range(2):
            for x in range(nx):
                for xt in range(nx):
                    row[lay.pre(a, x, xt)] += cost[a, x, xt]
        return row[None, :]
    p_x = prob.joint.p_x
    rows = []
    for x in np.flatnonzero(p_x > 0):
        row = np.zeros(lay.n)
        for a in range(2):
            for xt in range(nx):
                row[lay.pre(a, x, xt)] += cost[a, x, xt] / p_x[x]
        rows.append(row)
    return np.array(rows)


def build_pre_lp(prob: PreProblem, D: float) -> LinearProgram:
    """Linear program whose optimum is the minimal discrimination at budget ``D``."""
    if not np.isfinite(D):
        raise InvalidInput("distortion budget must be finite")
    lay = _Layout(prob)
    joint, w = prob.joint, prob.w
    nx, ny, n = lay.nx, lay.ny, lay.n

    c = np.zeros(n)
    if lay.eo:
        for y in range(ny):
            for yh in range(ny):
                c[lay.t(y * ny + yh)] = joint.p_y[y]
    else:
        c[: lay.n_t] = 1.0

    ub = []
    for k in range(lay.n_t):
        for sign in (1.0, -1.0):
            row = np.zeros(n)
            row[lay.ind(0, k)] = sign
            row[lay.ind(1, k)] = -sign
            row[lay.t(k)] = -1.0
            ub.append(row)
    dist = _distortion_rows(prob, lay)
    A_ub = np.vstack([np.array(ub), dist])
    b_ub = np.concatenate([np.zeros(len(ub)), np.full(dist.shape[0], float(D))])

    eq, b_eq = [], []
    if lay.eo:
        p_ya = joint.p_ya
        x_given = joint.x_given_ya(strict=False)
        for a in range(2):
            for y in range(ny):
                if p_ya[a, y] == 0:
                    continue
                for yh in range(ny):
                    row = np.zeros(n)
                    row[lay.ind(a, y * ny + yh)] = 1.0
                    for x in range(nx):
                        for xt in range(nx):
                            row[lay.pre(a, x, xt)] -= w.k[xt, yh] * x_given[a, y, x]
                    eq.append(row)
                    b_eq.append(0.0)
        cells = [(a, [lay.ind(a, y * ny + yh) for yh in range(ny)]) for a in range(2) for y in range(ny)]
    else:
        p_a = joint.p_a
        for a in range(2):
            if p_a[a] == 0:
                continue
            x_given = joint.p_xa[a] / p_a[a]
            for yh in range(ny):
                row = np.zeros(n)
                row[lay.ind(a, yh)] = 1.0
                for x in range(nx):
                    for xt in range(nx):
                        row[lay.pre(a, x, xt)] -= w.k[xt, yh] * x_given[x]
                eq.append(row)
                b_eq.append(0.0)
        cells = [(a, [lay.ind(a, yh) for yh in range(ny)]) for a in range(2)]
    for _, cols in cells:
        row = np.zeros(n)
        row[cols] = 1.0
        eq.append(row)
        b_eq.append(1.0)
    for g in range(lay.G):
        for x in range(nx):
            row = np.zeros(n)
            for xt in range(nx):
                row[lay.pre(g, x, xt)] = 1.0
            eq.append(row)
            b_eq.append(1.0)

    return LinearProgram(c, np.array(eq), np.array(b_eq), A_ub, b_ub, tuple(lay.names()))


def channel_from_solution(prob: PreProblem, z) -> ChannelLike:
    lay = _Layout(prob)
    block = np.asarray(z)[lay.n_t: lay.n_t + lay.n_pre].reshape(lay.G, lay.nx, lay.nx)
    chans = tuple(Channel.from_solver(block[g]) for g in range(lay.G))
    return chans if lay.G == 2 else chans[0]


def discrimination_of(prob: PreProblem, channel: ChannelLike) -> float:
    """Re-evaluate the objective for a given pre-processor through the composition formulas."""
    if prob.criterion is Criterion.EQUALIZED_ODDS:
        cond = induced_prediction_channel(channel, prob.w, prob.joint, strict=False)
        return tv_discrimination(cond, prob.joint.p_y)
    return dp_discrimination(induced_prediction_given_a(channel, prob.w, prob.joint))


def distortion_of(prob: PreProblem, channel: ChannelLike) -> float:
    """Budget actually consumed by ``channel`` (worst feature value in per-x mode)."""
    if prob.distortion_mode is DistortionMode.GLOBAL:
        return expected_distortion(channel, prob.d, w=prob.w, joint=prob.joint)
    lay = _Layout(prob)
    rows = _distortion_rows(prob, lay)
    z = np.zeros(lay.n)
    pair = channel if isinstance(channel, tuple) else (channel,)
    for g, ch in enumerate(pair[: lay.G]):
        for x in range(lay.nx):
            for xt in range(lay.nx):
                z[lay.pre(g, x, xt)] = ch.k[x, xt]
    return float((rows @ z).max())


def _solve(prob: PreProblem, D: float, d_min: float | None = None):
    if d_min is None:
        d_min = d_min_pre(prob).value
    if D < d_min - BUDGET_SLACK:
        raise InfeasibleBudget(D, d_min, "pre")
    sol = lp_solver.solve(build_pre_lp(prob, D))
    if not sol.optimal:
        raise InfeasibleBudget(D, d_min, "pre")
    return max(sol.value, 0.0), channel_from_solution(prob, sol.z), sol


def disc_pre(prob: PreProblem, D: float) -> DiscResult:
    """Minimal discrimination over pre-processors whose distortion stays within ``D``.

    Raises ``InfeasibleBudget`` (carrying the smallest feasible budget) when
    ``D`` is below it.
    """
    value, channel, _ = _solve(prob, D)
    return DiscResult(value, channel)


def d_min_pre(prob: PreProblem) -> DiscResult:
    """Smallest feasible budget and the deterministic feature map attaining it.

    Each (x, a) cell (or each x, when the pre-processor cannot see A) is sent
    to the lowest-index xt minimising its contribution to the expected cost.
    """
    cost = pre_cost_tensor(prob.w, prob.joint, prob.d)
    nx = prob.joint.n_x
    if prob.use_a:
        maps = cost.argmin(axis=2)
        chans = tuple(Channel.deterministic(maps[a], nx) for a in range(2))
        channel: ChannelLike = chans
        per_x = np.take_along_axis(cost, maps[:, :, None], axis=2)[:, :, 0].sum(axis=0)
    else:
        shared = cost.sum(axis=0)
        mapping = shared.argmin(axis=1)
        channel = Channel.deterministic(mapping, nx)
        per_x = shared[np.arange(nx), mapping]
    if prob.distortion_mode is DistortionMode.GLOBAL:
        value = float(per_x.sum())
    else:
        p_x = prob.joint.p_x
        live = p_x > 0
        value = float((per_x[live] / p_x[live]).max())
    return DiscResult(value, channel)


def d_max_bound_pre(prob: PreProblem) -> float:
    """Distortion of the uniform pre-processor, an upper bound on the zero-discrimination budget."""
    joint, w, d = prob.joint, prob.w, prob.d
    per_xt = w.k @ d.d.T  # [xt, y] = sum_yhat W(yhat|xt) d(y, yhat)
    if prob.distortion_mode is DistortionMode.GLOBAL:
        return float(per_xt.sum(axis=0) @ joint.p_y / joint.n_x)
    y_given_x = joint.y_given_x()
    live = joint.p_x > 0
    return float((y_given_x[live] @ per_xt.sum(axis=0)).max() / joint.n_x)


def zero_crossing(disc_at, lo: float, hi: float, eps: float, tol: float) -> float:
    """Smallest D in [lo, hi] with ``disc_at(D) <= eps`` for a non-increasing ``disc_at``."""
    if disc_at(lo) <= eps:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if disc_at(mid) <= eps:
            hi = mid
        else:
            lo = mid
    return hi


def d_max_exact(prob: PreProblem, eps: float = ZERO_DISC_EPS, tol: float = 1e-9) -> float:
    """Smallest budget whose optimal discrimination is at most ``eps`` (bisection)."""
    lo = d_min_pre(prob).value
    hi = max(d_max_bound_pre(prob), lo)
    return zero_crossing(lambda D: _solve(prob, D, lo)[0], lo, hi, eps, tol)


def tradeoff_curve(prob: PreProblem, grid: Union[int, Sequence[float]] = 33, jobs: int = 1) -> TradeoffCurve:
    """Disc as a function of D, with basis breakpoints located to within 1e-6.

    ``grid`` is either a point count spread uniformly over [d_min, d_max_bound]
    or an explicit list of budgets.
    """
    d_min = d_min_pre(prob).value
    d_max = max(d_max_bound_pre(prob), d_min)
    values = auto_grid(d_min, d_max, grid) if isinstance(grid, (int, np.integer)) else list(grid)
    for D in values:
        if D < d_min - BUDGET_SLACK:
            raise InfeasibleBudget(D, d_min, "pre")

    def solve_at(D):
        value, channel, sol = _solve(prob, D, d_min)
        return value, channel, sol.basis

    return sweep(solve_at, values, d_min=d_min, d_max=d_max, side="pre", jobs=jobs)
