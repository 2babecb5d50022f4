"""Optimal post-processing of a classifier's output, relaxed and exact variants."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import lp_solver
from .curve import TradeoffCurve, auto_grid, sweep
from .errors import InfeasibleBudget, InvalidInput, NumericalFailure
from .fair_pre import BUDGET_SLACK, ZERO_DISC_EPS, DiscResult, zero_crossing
from .lp_solver import LinearProgram
from .prob_core import (
    Channel,
    ChannelLike,
    Criterion,
    DistortionMatrix,
    JointDistribution,
    PredictionJoint,
    dp_discrimination,
    expected_distortion,
    post_cost_tensor,
    post_induced_channel,
    tv_discrimination,
)


@dataclass(frozen=True, eq=False)
class PostProblem:
    pred_joint: PredictionJoint
    d: DistortionMatrix
    criterion: Criterion = Criterion.EQUALIZED_ODDS

    def __post_init__(self):
        object.__setattr__(self, "criterion", Criterion(self.criterion))
        if self.d.n != self.pred_joint.n_y:
            raise InvalidInput(f"distortion matrix size {self.d.n} does not match |Y| = {self.pred_joint.n_y}")


def derive_pred_joint(w: Channel, joint: JointDistribution) -> PredictionJoint:
    """q(yhat, y, a) = sum_x W(yhat|x) P(a, x, y)."""
    if w.k.shape != (joint.n_x, joint.n_y):
        raise InvalidInput(f"classifier shape {w.k.shape} does not match (|X|, |Y|) = ({joint.n_x}, {joint.n_y})")
    return PredictionJoint(np.einsum("xh,axy->hya", w.k, joint.p))


class _Layout:
    def __init__(self, prob: PostProblem):
        ny = prob.pred_joint.n_y
        self.ny = ny
        self.eo = prob.criterion is Criterion.EQUALIZED_ODDS
        self.width = ny * ny if self.eo else ny
        self.n_t = self.width
        self.n_post = 2 * ny * ny
        self.n_ind = 2 * self.width
        self.n = self.n_t + self.n_post + self.n_ind

    def post(self, a: int, yo: int, yp: int) -> int:
        return self.n_t + (a * self.ny + yo) * self.ny + yp

    def ind(self, a: int, k: int) -> int:
        return self.n_t + self.n_post + a * self.width + k

    def names(self) -> list[str]:
        ny = self.ny
        t = [f"t[y={k // ny},yp={k % ny}]" if self.eo else f"t[yp={k}]" for k in range(self.n_t)]
        post = [f"post[a={a},yo={yo},yp={yp}]" for a in range(2) for yo in range(ny) for yp in range(ny)]
        ind = [f"ind[a={a},y={k // ny},yp={k % ny}]" if self.eo else f"ind[a={a},yp={k}]"
               for a in range(2) for k in range(self.width)]
        return t + post + ind


def _composition_rows(prob: PostProblem, lay: _Layout):
    """Equalities tying the induced law to the post-processor, plus both simplex blocks."""
    q = prob.pred_joint
    ny, n = lay.ny, lay.n
    eq, b = [], []
    if lay.eo:
        p_ya = q.p_ya
        cond = q.conditional()
        for a in range(2):
            for y in range(ny):
                if p_ya[a, y] == 0:
                    continue
                for yp in range(ny):
                    row = np.zeros(n)
                    row[lay.ind(a, y * ny + yp)] = 1.0
                    for yo in range(ny):
                        row[lay.post(a, yo, yp)] -= cond[a, y, yo]
                    eq.append(row)
                    b.append(0.0)
    else:
        p_a = q.q.sum(axis=(0, 1))
        for a in range(2):
            if p_a[a] == 0:
                continue
            pred_given_a = q.q[:, :, a].sum(axis=1) / p_a[a]
            for yp in range(ny):
                row = np.zeros(n)
                row[lay.ind(a, yp)] = 1.0
                for yo in range(ny):
                    row[lay.post(a, yo, yp)] -= pred_given_a[yo]
                eq.append(row)
                b.append(0.0)
    per_cell = ny if lay.eo else 1
    for a in range(2):
        for cell in range(per_cell):
            row = np.zeros(n)
            for yp in range(ny):
                row[lay.ind(a, cell * ny + yp if lay.eo else yp)] = 1.0
            eq.append(row)
            b.append(1.0)
    for a in range(2):
        for yo in range(ny):
            row = np.zeros(n)
            for yp in range(ny):
                row[lay.post(a, yo, yp)] = 1.0
            eq.append(row)
            b.append(1.0)
    return eq, b


def _distortion_row(prob: PostProblem, lay: _Layout) -> np.ndarray:
    cost = post_cost_tensor(prob.pred_joint, prob.d)
    row = np.zeros(lay.n)
    for a in range(2):
        for yo in range(lay.ny):
            for yp in range(lay.ny):
                row[lay.post(a, yo, yp)] = cost[a, yo, yp]
    return row


def build_post_lp(prob: PostProblem, D: float) -> LinearProgram:
    """Linear program whose optimum is the minimal post-processing discrimination at budget ``D``."""
    if not np.isfinite(D):
        raise InvalidInput("distortion budget must be finite")
    lay = _Layout(prob)
    ny, n = lay.ny, lay.n
    c = np.zeros(n)
    if lay.eo:
        p_y = prob.pred_joint.p_y
        for k in range(lay.n_t):
            c[k] = p_y[k // ny]
    else:
        c[: lay.n_t] = 1.0
    ub = []
    for k in range(lay.n_t):
        for sign in (1.0, -1.0):
            row = np.zeros(n)
            row[lay.ind(0, k)] = sign
            row[lay.ind(1, k)] = -sign
            row[k] = -1.0
            ub.append(row)
    ub.append(_distortion_row(prob, lay))
    b_ub = np.zeros(len(ub))
    b_ub[-1] = float(D)
    eq, b_eq = _composition_rows(prob, lay)
    return LinearProgram(c, np.array(eq), np.array(b_eq), np.array(ub), b_ub, tuple(lay.names()))


def channel_from_solution(prob: PostProblem, z) -> tuple:
    lay = _Layout(prob)
    block = np.asarray(z)[lay.n_t: lay.n_t + lay.n_post].reshape(2, lay.ny, lay.ny)
    return tuple(Channel.from_solver(block[a]) for a in range(2))


def discrimination_of(prob: PostProblem, channel: ChannelLike) -> float:
    if prob.criterion is Criterion.EQUALIZED_ODDS:
        return tv_discrimination(post_induced_channel(channel, prob.pred_joint), prob.pred_joint.p_y)
    q = prob.pred_joint.q
    pair = channel if isinstance(channel, tuple) else (channel, channel)
    pred_given_a = np.stack([(q[:, :, a].sum(axis=1) / q[:, :, a].sum()) @ pair[a].k for a in range(2)])
    return dp_discrimination(pred_given_a)


def distortion_of(prob: PostProblem, channel: ChannelLike) -> float:
    return expected_distortion(channel, prob.d, pred_joint=prob.pred_joint)


def d_min_post(prob: PostProblem) -> DiscResult:
    """Smallest feasible budget; each (yhat_O, a) goes to its cheapest relabelling."""
    cost = post_cost_tensor(prob.pred_joint, prob.d)
    maps = cost.argmin(axis=2)
    chans = tuple(Channel.deterministic(maps[a], prob.pred_joint.n_y) for a in range(2))
    value = float(np.take_along_axis(cost, maps[:, :, None], axis=2).sum())
    return DiscResult(value, chans)


def d_max_bound_post(prob: PostProblem) -> float:
    """Distortion of the uniform post-processor, which removes all discrimination."""
    d = prob.d.d
    return float(prob.pred_joint.p_y @ d.sum(axis=1) / prob.pred_joint.n_y)


def _solve(prob: PostProblem, D: float, d_min: float | None = None):
    if d_min is None:
        d_min = d_min_post(prob).value
    if D < d_min - BUDGET_SLACK:
        raise InfeasibleBudget(D, d_min, "post")
    sol = lp_solver.solve(build_post_lp(prob, D))
    if not sol.optimal:
        raise InfeasibleBudget(D, d_min, "post")
    return max(sol.value, 0.0), channel_from_solution(prob, sol.z), sol


def disc_post(prob: PostProblem, D: float) -> DiscResult:
    """Minimal discrimination over post-processors with distortion at most ``D``."""
    value, channel, _ = _solve(prob, D)
    return DiscResult(value, channel)


def d_max_exact_post(prob: PostProblem, eps: float = ZERO_DISC_EPS, tol: float = 1e-9) -> float:
    lo = d_min_post(prob).value
    hi = max(d_max_bound_post(prob), lo)
    return zero_crossing(lambda D: _solve(prob, D, lo)[0], lo, hi, eps, tol)


def exact_eo_post(prob: PostProblem) -> tuple[float, tuple]:
    """Cheapest post-processor whose output satisfies the fairness criterion exactly.

    Returns ``(distortion, channel)``.  Constant predictors are always
    admissible, so the program is never infeasible.
    """
    lay = _Layout(prob)
    ny, n = lay.ny, lay.n
    eq, b_eq = _composition_rows(prob, lay)
    if lay.eo:
        p_ya = prob.pred_joint.p_ya
        labels = [y for y in range(ny) if p_ya[0, y] > 0 and p_ya[1, y] > 0]
        keys = [y * ny + yp for y in labels for yp in range(ny)]
    else:
        keys = list(range(ny))
    for k in keys:
        row = np.zeros(n)
        row[lay.ind(0, k)] = 1.0
        row[lay.ind(1, k)] = -1.0
        eq.append(row)
        b_eq.append(0.0)
    lp = LinearProgram(_distortion_row(prob, lay), np.array(eq), np.array(b_eq), names=tuple(lay.names()))
    sol = lp_solver.solve(lp)
    if not sol.optimal:
        raise NumericalFailure(f"exact fairness program reported {sol.status.value}")
    return max(sol.value, 0.0), channel_from_solution(prob, sol.z)


def tradeoff_curve_post(prob: PostProblem, grid: Union[int, Sequence[float]] = 33, jobs: int = 1) -> TradeoffCurve:
    d_min = d_min_post(prob).value
    d_max = max(d_max_bound_post(prob), d_min)
    values = auto_grid(d_min, d_max, grid) if isinstance(grid, (int, np.integer)) else list(grid)
    for D in values:
        if D < d_min - BUDGET_SLACK:
            raise InfeasibleBudget(D, d_min, "post")

    def solve_at(D):
        value, channel, sol = _solve(prob, D, d_min)
        return value, channel, sol.basis

    return sweep(solve_at, values, d_min=d_min, d_max=d_max, side="post", jobs=jobs)
