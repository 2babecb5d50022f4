"""Pre- versus post-processing comparisons and independent brute-force checks."""

from __future__ import annotations

import enum
import itertools
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import fair_post, fair_pre
from .errors import ConventionViolated, SubstitutionUnavailable, TooLarge, UnsupportedShape
from .fair_post import PostProblem, derive_pred_joint
from .fair_pre import PreProblem
from .prob_core import (
    Channel,
    Criterion,
    DistortionMatrix,
    DistortionMode,
    JointDistribution,
    PredictionJoint,
    group_channels,
    mutual_info_discrimination,
    post_cost_tensor,
    pre_cost_tensor,
    tv_discrimination,
)

STRICT_MARGIN = 1e-9


class OperatingPoint(NamedTuple):
    false_alarm: float
    detection: float


def _require_binary(n: int, what: str) -> None:
    if n != 2:
        raise UnsupportedShape(f"{what} must be binary, got alphabet size {n}")


def operating_points(cond) -> tuple[OperatingPoint, OperatingPoint]:
    """(false alarm, detection) of each group from ``cond[a, y, yhat]``."""
    cond = np.asarray(cond, dtype=float)
    if cond.shape != (2, 2, 2):
        raise UnsupportedShape(f"operating points need binary labels and predictions, got {cond.shape}")
    return tuple(OperatingPoint(float(cond[a, 0, 1]), float(cond[a, 1, 1])) for a in range(2))


def check_substitution(w: Channel, tol: float = 1e-9) -> Optional[tuple[int, int]]:
    """Lowest-index features the classifier maps deterministically to 0 and to 1."""
    _require_binary(w.n_out, "classifier output")
    p1 = w.k[:, 1]
    zeros = np.flatnonzero(np.abs(p1) <= tol)
    ones = np.flatnonzero(np.abs(1.0 - p1) <= tol)
    if zeros.size == 0 or ones.size == 0:
        return None
    return int(zeros[0]), int(ones[0])


def substitute_post_with_pre(post_channel, w: Channel, joint: JointDistribution,
                             x0: int, x1: int) -> tuple[Channel, Channel]:
    """Pre-processor reproducing a post-processor's induced prediction law.

    Each (x, a) is randomised between the two witness features ``x0`` and
    ``x1`` so that the classifier outputs 1 with exactly the probability the
    post-processed pipeline would.
    """
    _require_binary(w.n_out, "classifier output")
    if w.n_in != joint.n_x:
        raise UnsupportedShape("classifier and joint disagree on |X|")
    if abs(w.k[x0, 1]) > 1e-9 or abs(1.0 - w.k[x1, 1]) > 1e-9:
        raise SubstitutionUnavailable(f"features {x0}, {x1} are not deterministic witnesses")
    pair = group_channels(post_channel)
    out = []
    for a in range(2):
        tau = w.k @ pair[a].k[:, 1]  # P(Yhat_P = 1 | x, a)
        tau = np.clip(tau, 0.0, 1.0)
        k = np.zeros((joint.n_x, joint.n_x))
        k[:, x0] += 1.0 - tau
        k[:, x1] += tau
        out.append(Channel(k))
    return tuple(out)


def is_proper(pred_joint: PredictionJoint) -> bool:
    """Both correct-classification cells beat both error cells, in each group."""
    _require_binary(pred_joint.n_y, "labels")
    q = pred_joint.q
    for a in range(2):
        worst_error = max(q[0, 1, a], q[1, 0, a])
        if not (q[1, 1, a] > worst_error and q[0, 0, a] > worst_error):
            return False
    return True


class Prop4Witness(NamedTuple):
    side: str  # "minority_x_i" or "majority_x_j"
    x: int


def _check_convention(cond: np.ndarray) -> None:
    if not (cond[0, 0, 1] > cond[1, 0, 1] and cond[0, 1, 1] > cond[1, 1, 1]):
        raise ConventionViolated(
            "expected the majority group (A=0) to have both higher false alarm and higher detection"
        )


def prop4_condition(joint: JointDistribution, w: Channel) -> Optional[Prop4Witness]:
    """Find a feature that lets pre-processing beat post-processing.

    Either a minority feature ``x_i`` other than the classifier's most
    positive feature whose members are more likely qualified than not, or a
    majority feature ``x_j`` other than the most negative one whose members
    are more likely unqualified.
    """
    _require_binary(joint.n_y, "labels")
    pred = derive_pred_joint(w, joint)
    _check_convention(pred.conditional())
    w1 = w.k[:, 1]
    x_min, x_max = int(np.argmin(w1)), int(np.argmax(w1))
    p = joint.p  # [a, x, y]
    for x in range(joint.n_x):
        if x != x_max and p[1, x, 0] < p[1, x, 1]:
            return Prop4Witness("minority_x_i", x)
    for x in range(joint.n_x):
        if x != x_min and p[0, x, 1] < p[0, x, 0]:
            return Prop4Witness("majority_x_j", x)
    return None


def witness_pre_channel(w: Channel, joint: JointDistribution, witness: Prop4Witness,
                        alpha: float) -> tuple[Channel, Channel]:
    """Identity pre-processor with the witness row partly redirected.

    A minority witness is moved toward the classifier's most positive feature,
    a majority witness toward its most negative one, each with weight ``alpha``.
    """
    nx = joint.n_x
    w1 = w.k[:, 1]
    ks = [np.eye(nx), np.eye(nx)]
    if witness.side == "minority_x_i":
        a, target = 1, int(np.argmax(w1))
    else:
        a, target = 0, int(np.argmin(w1))
    row = np.zeros(nx)
    row[witness.x] = 1.0 - alpha
    row[target] += alpha
    ks[a][witness.x] = row
    return Channel(ks[0]), Channel(ks[1])


class Verdict(str, enum.Enum):
    PRE_DOMINATES = "PreDominates"
    PRE_WEAKLY_DOMINATES = "PreWeaklyDominates"
    TIE = "Tie"
    POST_DOMINATES = "PostDominates"
    MIXED = "Mixed"


def _verdict(d_pre: float, d_post: float, disc_pre: float, disc_post: float) -> Verdict:
    def cmp(u, v):
        if u < v - STRICT_MARGIN:
            return -1
        if u > v + STRICT_MARGIN:
            return 1
        return 0

    signs = {cmp(d_pre, d_post), cmp(disc_pre, disc_post)}
    if signs == {0}:
        return Verdict.TIE
    if signs == {-1}:
        return Verdict.PRE_DOMINATES
    if signs <= {-1, 0}:
        return Verdict.PRE_WEAKLY_DOMINATES
    if signs <= {1, 0}:
        return Verdict.POST_DOMINATES
    return Verdict.MIXED


@dataclass
class ComparisonReport:
    d_min_pre_a: float
    d_min_post: float
    disc_at_dmin_pre: float
    disc_at_dmin_post: float
    disc_pre_at_dmin_post: float
    original_disc: float
    original_distortion: float
    substitution_witness: Optional[tuple]
    proper: bool
    prop4_applicable: bool
    prop4_note: str
    prop4_witness: Optional[tuple]
    prop4_holds: Optional[bool]
    construction: Optional[dict]
    dominance_verdict: Verdict
    construction_sweep: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["dominance_verdict"] = self.dominance_verdict.value
        return out


def compare_pre_post(joint: JointDistribution, w: Channel, d: DistortionMatrix,
                     alphas: Sequence[float] = tuple(np.round(np.arange(1, 11) / 10, 1))) -> ComparisonReport:
    """Compare A-aware pre-processing with post-processing at their minimal budgets."""
    _require_binary(joint.n_y, "labels")
    pred = derive_pred_joint(w, joint)
    pre = PreProblem(joint, w, d, use_a=True)
    post = PostProblem(pred, d)
    d_pre = fair_pre.d_min_pre(pre).value
    d_post = fair_post.d_min_post(post).value
    disc_pre = fair_pre.disc_pre(pre, d_pre).value
    disc_post = fair_post.disc_post(post, d_post).value
    disc_pre_same_budget = fair_pre.disc_pre(pre, max(d_post, d_pre)).value
    identity = Channel.identity(joint.n_x)
    original_disc = fair_pre.discrimination_of(pre, identity)
    original_distortion = fair_pre.distortion_of(pre, identity)

    proper = is_proper(pred)
    witness = None
    applicable = False
    note = ""
    if not proper:
        note = "classifier is not proper"
    else:
        try:
            witness = prop4_condition(joint, w)
        except ConventionViolated as exc:
            note = str(exc)
        else:
            applicable = witness is not None
            note = "" if applicable else "no witness feature"

    holds = None
    construction = None
    sweep = []
    if applicable:
        holds = d_pre < d_post - STRICT_MARGIN and disc_pre < disc_post - STRICT_MARGIN
        for alpha in alphas:
            ch = witness_pre_channel(w, joint, witness, float(alpha))
            entry = {
                "alpha": float(alpha),
                "distortion": fair_pre.distortion_of(pre, ch),
                "disc": fair_pre.discrimination_of(pre, ch),
            }
            sweep.append(entry)
            if (construction is None and entry["distortion"] < d_post - STRICT_MARGIN
                    and entry["disc"] < disc_post - STRICT_MARGIN):
                construction = entry

    return ComparisonReport(
        d_min_pre_a=d_pre,
        d_min_post=d_post,
        disc_at_dmin_pre=disc_pre,
        disc_at_dmin_post=disc_post,
        disc_pre_at_dmin_post=disc_pre_same_budget,
        original_disc=original_disc,
        original_distortion=original_distortion,
        substitution_witness=check_substitution(w),
        proper=proper,
        prop4_applicable=applicable,
        prop4_note=note,
        prop4_witness=tuple(witness) if witness else None,
        prop4_holds=holds,
        construction=construction,
        dominance_verdict=_verdict(d_pre, d_post, disc_pre, disc_post),
        construction_sweep=sweep,
    )


def sample_prediction_joint(rng: np.random.Generator, n_y: int = 2) -> PredictionJoint:
    """Uniform draw from the simplex over (yhat, y, a) via normalised exponential spacings."""
    e = rng.exponential(size=n_y * n_y * 2)
    return PredictionJoint((e / e.sum()).reshape(n_y, n_y, 2))


def tv_mi_scatter(n: int, seed: int = 0) -> list[tuple[float, float]]:
    """(TV discrimination, I(A; Yhat | Y)) for ``n`` uniformly sampled prediction joints."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        q = sample_prediction_joint(rng)
        tv = tv_discrimination(q.conditional(), q.p_y)
        out.append((tv, mutual_info_discrimination(q)))
    return out


class BruteForceResult(NamedTuple):
    value: float
    lipschitz: float
    evaluated: int


MAX_FREE_PARAMS = 4


def _simplex_grid(m: int, step: float) -> np.ndarray:
    """All rows of length ``m`` whose first m-1 coordinates are multiples of ``step``."""
    k = int(np.floor(1.0 / step + 1e-9))
    pts = []
    for head in itertools.product(range(k + 1), repeat=m - 1):
        s = sum(head) * step
        if s <= 1.0 + 1e-12:
            pts.append([h * step for h in head] + [max(1.0 - s, 0.0)])
    return np.array(pts)


def _row_models(prob):
    """Per channel row: (group or None for shared, output size, linear map to features).

    Feature vector layout: [group-0 prediction law | group-1 prediction law | distortion rows].
    """
    if isinstance(prob, PreProblem):
        joint, w = prob.joint, prob.w
        nx, ny = joint.n_x, joint.n_y
        eo = prob.criterion is Criterion.EQUALIZED_ODDS
        K = ny * ny if eo else ny
        cost = pre_cost_tensor(w, joint, prob.d)
        per_x = prob.distortion_mode is DistortionMode.PER_X
        live_x = np.flatnonzero(joint.p_x > 0)
        n_dist = live_x.size if per_x else 1
        if eo:
            law = np.nan_to_num(joint.x_given_ya(strict=False))  # [a, y, x]
        else:
            with np.errstate(invalid="ignore", divide="ignore"):
                law = np.nan_to_num(joint.p_xa / joint.p_a[:, None])  # [a, x]
        rows = []
        for g in range(prob.n_groups):
            groups = [g] if prob.use_a else [0, 1]
            for x in range(nx):
                M = np.zeros((nx, 2 * K + n_dist))
                for a in groups:
                    if eo:
                        block = w.k[:, None, :] * law[a, :, x][None, :, None]  # [xt, y, yhat]
                        M[:, a * K:(a + 1) * K] += block.reshape(nx, K)
                    else:
                        M[:, a * K:(a + 1) * K] += w.k * law[a, x]
                    if per_x:
                        if x in live_x:
                            M[:, 2 * K + int(np.searchsorted(live_x, x))] += cost[a, x] / joint.p_x[x]
                    else:
                        M[:, 2 * K] += cost[a, x]
                rows.append((g if prob.use_a else None, nx, M))
        p_ya = joint.p_ya
        weights = _objective_weights(eo, ny, joint.p_y, p_ya)
        return rows, K, n_dist, weights
    pred = prob.pred_joint
    ny = pred.n_y
    eo = prob.criterion is Criterion.EQUALIZED_ODDS
    K = ny * ny if eo else ny
    cost = post_cost_tensor(pred, prob.d)
    cond = np.nan_to_num(pred.conditional())  # [a, y, yo]
    p_a = pred.q.sum(axis=(0, 1))
    rows = []
    for a in range(2):
        for yo in range(ny):
            M = np.zeros((ny, 2 * K + 1))
            if eo:
                # contribution to law[a, y, yp] is r[yp] * P(yo | y, a)
                for y in range(ny):
                    for yp in range(ny):
                        M[yp, a * K + y * ny + yp] = cond[a, y, yo]
            else:
                share = pred.q[yo, :, a].sum() / p_a[a] if p_a[a] > 0 else 0.0
                for yp in range(ny):
                    M[yp, a * K + yp] = share
            M[:, 2 * K] = cost[a, yo]
            rows.append((a, ny, M))
    weights = _objective_weights(eo, ny, pred.p_y, pred.p_ya)
    return rows, K, 1, weights


def _objective_weights(eo: bool, ny: int, p_y: np.ndarray, p_ya: np.ndarray) -> np.ndarray:
    if not eo:
        return np.ones(ny)
    defined = (p_ya[0] > 0) & (p_ya[1] > 0)
    return np.repeat(np.where(defined, p_y, 0.0), ny)


def _table(rows, step: float) -> np.ndarray:
    table = None
    for _, m, M in rows:
        contrib = _simplex_grid(m, step) @ M
        table = contrib if table is None else (table[:, None, :] + contrib[None, :, :]).reshape(-1, M.shape[1])
    return table


def brute_force_disc(prob, D: float, step: float = 0.02, chunk: int = 512) -> BruteForceResult:
    """Grid-search minimum of the discrimination over channels with distortion at most ``D``.

    Every channel row is restricted to the lattice with spacing ``step``; at
    most four free channel parameters are supported.  Returns the minimum,
    a Lipschitz constant of the objective in the channel parameters
    (sup-norm), and the number of grid channels evaluated.  The minimum is
    ``inf`` when no grid channel meets the budget.
    """
    if not 0 < step <= 0.1:
        raise ValueError("step must lie in (0, 0.1]")
    rows, K, n_dist, weights = _row_models(prob)
    free = sum(m - 1 for _, m, _ in rows)
    if free > MAX_FREE_PARAMS:
        raise TooLarge(f"{free} free channel parameters exceed the supported {MAX_FREE_PARAMS}")

    lipschitz = 0.0
    for _, m, M in rows:
        for j in range(m - 1):
            delta = M[j, :2 * K] - M[m - 1, :2 * K]
            lipschitz += float(weights @ (np.abs(delta[:K]) + np.abs(delta[K:])))

    limit = float(D) + 1e-12
    separable = all(g is not None for g, _, _ in rows)
    if not separable:
        table = _table(rows, step)
        law = table[:, :2 * K]
        disc = np.abs(law[:, :K] - law[:, K:]) @ weights
        ok = np.all(table[:, 2 * K:] <= limit, axis=1)
        best = disc[ok].min() if ok.any() else np.inf
        return BruteForceResult(float(best), lipschitz, int(table.shape[0]))

    t0 = _table([r for r in rows if r[0] == 0], step)
    t1 = _table([r for r in rows if r[0] == 1], step)
    cols = np.flatnonzero(weights > 0)
    col_w = weights[cols]
    if K % 2 == 0 and rows[0][1] == 2:
        # Binary outputs: every lattice row sums to one, so |delta| is equal on both outputs.
        cols = cols[cols % 2 == 1]
        col_w = 2.0 * weights[cols]
    law0, dist0 = t0[:, cols], t0[:, 2 * K:]
    law1, dist1 = t1[:, K + cols], t1[:, 2 * K:]
    best = np.inf
    for start in range(0, t0.shape[0], chunk):
        sl = slice(start, start + chunk)
        disc = np.zeros((law0[sl].shape[0], law1.shape[0]))
        for j, wj in enumerate(col_w):
            disc += wj * np.abs(law0[sl, j, None] - law1[None, :, j])
        if n_dist == 1:
            ok = dist0[sl, 0, None] + dist1[None, :, 0] <= limit
        else:
            ok = np.all(dist0[sl, None, :] + dist1[None, :, :] <= limit, axis=2)
        if ok.any():
            best = min(best, float(disc[ok].min()))
    return BruteForceResult(float(best), lipschitz, int(t0.shape[0] * t1.shape[0]))
