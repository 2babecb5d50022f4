"""Finite-alphabet probability objects, channel composition and discrimination metrics.

Array conventions used throughout the package:

* joint tensor ``p[a, x, y]`` with ``a in {0, 1}``;
* channel matrix ``k[i, j]`` = probability of output ``j`` given input ``i``;
* conditional prediction ``cond[a, y, yhat]`` = P(Yhat = yhat | Y = y, A = a);
* prediction joint ``q[yhat, y, a]``.

Rows of a conditional prediction that condition on a zero-mass ``(y, a)`` cell
are undefined and carried as NaN; every discrimination metric skips the
corresponding label ``y``.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import rel_entr

from .errors import DegenerateConditioning, DegenerateMarginal, EmptyData, InvalidInput

PROB_TOL = 1e-12
LP_PROB_TOL = 1e-7  # matches the row-sum check; degenerate bases drift to ~1e-8


class Criterion(str, enum.Enum):
    EQUALIZED_ODDS = "eo"
    DEMOGRAPHIC_PARITY = "dp"


class DistortionMode(str, enum.Enum):
    GLOBAL = "global"
    PER_X = "per_x"


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Auditing distribution over (A, X, Y), stored as ``p[a, x, y]``."""

    p: np.ndarray

    def __post_init__(self):
        p = _frozen(self.p)
        if p.ndim != 3 or p.shape[0] != 2:
            raise InvalidInput(f"joint tensor must have shape (2, |X|, |Y|), got {p.shape}")
        if p.shape[1] < 2 or p.shape[2] < 2:
            raise InvalidInput(f"|X| and |Y| must be at least 2, got {p.shape[1:]}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidInput("joint tensor entries must be finite and non-negative")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise InvalidInput(f"joint tensor sums to {p.sum()!r}, expected 1")
        object.__setattr__(self, "p", p)
        if np.any(self.p_y == 0):
            zero = [int(y) for y in np.flatnonzero(self.p_y == 0)]
            warnings.warn(f"labels {zero} have zero marginal probability", DegenerateMarginal, stacklevel=3)

    @property
    def n_x(self) -> int:
        return self.p.shape[1]

    @property
    def n_y(self) -> int:
        return self.p.shape[2]

    @property
    def p_y(self) -> np.ndarray:
        return self.p.sum(axis=(0, 1))

    @property
    def p_x(self) -> np.ndarray:
        return self.p.sum(axis=(0, 2))

    @property
    def p_a(self) -> np.ndarray:
        return self.p.sum(axis=(1, 2))

    @property
    def p_ya(self) -> np.ndarray:
        """P(Y = y, A = a) indexed ``[a, y]``."""
        return self.p.sum(axis=1)

    @property
    def p_xa(self) -> np.ndarray:
        """P(X = x, A = a) indexed ``[a, x]``."""
        return self.p.sum(axis=2)

    def x_given_ya(self, strict: bool = True) -> np.ndarray:
        """P(X = x | Y = y, A = a) indexed ``[a, y, x]``; NaN on zero-mass cells."""
        p_ya = self.p_ya
        if strict and np.any(p_ya == 0):
            a, y = np.argwhere(p_ya == 0)[0]
            raise DegenerateConditioning(f"P(Y={y}, A={a}) = 0")
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.transpose(self.p, (0, 2, 1)) / p_ya[:, :, None]
        out[p_ya == 0] = np.nan
        return out

    def x_given_a(self) -> np.ndarray:
        """P(X = x | A = a) indexed ``[a, x]``."""
        p_a = self.p_a
        if np.any(p_a == 0):
            raise DegenerateConditioning("one protected group has zero mass")
        return self.p_xa / p_a[:, None]

    def y_given_x(self) -> np.ndarray:
        """P(Y = y | X = x) indexed ``[x, y]``; rows with P(X = x) = 0 are NaN."""
        p_xy = self.p.sum(axis=0)
        p_x = p_xy.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = p_xy / p_x[:, None]
        out[p_x == 0] = np.nan
        return out


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic matrix ``k[i, j]`` = P(output j | input i)."""

    k: np.ndarray

    def __post_init__(self):
        k = _frozen(self.k)
        if k.ndim != 2 or k.shape[0] < 1 or k.shape[1] < 1:
            raise InvalidInput(f"channel matrix must be 2-D and non-empty, got shape {k.shape}")
        if not np.all(np.isfinite(k)) or np.any(k < 0):
            raise InvalidInput("channel entries must be finite and non-negative")
        if np.any(np.abs(k.sum(axis=1) - 1.0) > PROB_TOL):
            raise InvalidInput("channel rows must sum to 1")
        object.__setattr__(self, "k", k)

    @property
    def n_in(self) -> int:
        return self.k.shape[0]

    @property
    def n_out(self) -> int:
        return self.k.shape[1]

    @classmethod
    def identity(cls, n: int) -> "Channel":
        return cls(np.eye(n))

    @classmethod
    def uniform(cls, n_in: int, n_out: int | None = None) -> "Channel":
        n_out = n_in if n_out is None else n_out
        return cls(np.full((n_in, n_out), 1.0 / n_out))

    @classmethod
    def deterministic(cls, mapping: Sequence[int], n_out: int) -> "Channel":
        k = np.zeros((len(mapping), n_out))
        k[np.arange(len(mapping)), np.asarray(mapping, dtype=int)] = 1.0
        return cls(k)

    @classmethod
    def from_solver(cls, k) -> "Channel":
        """Clean solver output (residuals up to ~1e-8) into an exact stochastic matrix."""
        k = np.array(k, dtype=float)
        if np.any(k < -LP_PROB_TOL) or np.any(np.abs(k.sum(axis=1) - 1.0) > LP_PROB_TOL):
            raise InvalidInput("solver output is not a stochastic matrix")
        k = np.clip(k, 0.0, None)
        return cls(k / k.sum(axis=1, keepdims=True))

    def is_deterministic(self) -> bool:
        return bool(np.all((self.k == 0) | (self.k == 1)))


ChannelLike = Union[Channel, Sequence[Channel]]


def group_channels(pre: ChannelLike) -> tuple[Channel, Channel]:
    """Expand a shared channel or a per-group pair into one channel per value of A."""
    if isinstance(pre, Channel):
        return pre, pre
    pair = tuple(pre)
    if len(pair) != 2 or not all(isinstance(c, Channel) for c in pair):
        raise InvalidInput("A-conditioned channels must be a pair of Channel objects")
    return pair


@dataclass(frozen=True, eq=False)
class DistortionMatrix:
    """Cost ``d[y, yhat]`` of predicting ``yhat`` when the label is ``y``."""

    d: np.ndarray

    def __post_init__(self):
        d = _frozen(self.d)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InvalidInput(f"distortion matrix must be square, got shape {d.shape}")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise InvalidInput("distortion entries must be finite and non-negative")
        if np.any(np.diag(d) != 0):
            raise InvalidInput("distortion matrix must have a zero diagonal")
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @classmethod
    def zero_one(cls, n: int) -> "DistortionMatrix":
        return cls(1.0 - np.eye(n))


@dataclass(frozen=True, eq=False)
class PredictionJoint:
    """Joint law of (original prediction, label, group) stored as ``q[yhat, y, a]``."""

    q: np.ndarray

    def __post_init__(self):
        q = _frozen(self.q)
        if q.ndim != 3 or q.shape[2] != 2 or q.shape[0] != q.shape[1]:
            raise InvalidInput(f"prediction joint must have shape (|Y|, |Y|, 2), got {q.shape}")
        if not np.all(np.isfinite(q)) or np.any(q < 0):
            raise InvalidInput("prediction joint entries must be finite and non-negative")
        if abs(q.sum() - 1.0) > PROB_TOL:
            raise InvalidInput(f"prediction joint sums to {q.sum()!r}, expected 1")
        object.__setattr__(self, "q", q)

    @property
    def n_y(self) -> int:
        return self.q.shape[1]

    @property
    def p_ya(self) -> np.ndarray:
        """P(Y = y, A = a) indexed ``[a, y]``."""
        return self.q.sum(axis=0).T

    @property
    def p_y(self) -> np.ndarray:
        return self.q.sum(axis=(0, 2))

    def conditional(self, strict: bool = False) -> np.ndarray:
        """P(Yhat_O = yhat | Y = y, A = a) indexed ``[a, y, yhat]``."""
        p_ya = self.p_ya
        if strict and np.any(p_ya == 0):
            a, y = np.argwhere(p_ya == 0)[0]
            raise DegenerateConditioning(f"P(Y={y}, A={a}) = 0")
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.transpose(self.q, (2, 1, 0)) / p_ya[:, :, None]
        out[p_ya == 0] = np.nan
        return out


def normalize_counts(counts) -> JointDistribution:
    """Plug-in estimate of the joint law from a count tensor indexed ``[a, x, y]``."""
    counts = np.asarray(counts)
    if counts.ndim != 3:
        raise InvalidInput(f"count tensor must be 3-D, got shape {counts.shape}")
    if np.any(counts < 0):
        raise InvalidInput("counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise EmptyData("count tensor is empty")
    return JointDistribution(counts / total)


def _check_pre_shapes(pre: ChannelLike, w: Channel, joint: JointDistribution) -> tuple[Channel, Channel]:
    pair = group_channels(pre)
    for c in pair:
        if c.k.shape != (joint.n_x, w.n_in):
            raise InvalidInput(f"pre-channel shape {c.k.shape} does not match |X| = {joint.n_x}")
    if w.n_in != joint.n_x or w.n_out != joint.n_y:
        raise InvalidInput(f"classifier shape {w.k.shape} does not match joint (|X|, |Y|) = ({joint.n_x}, {joint.n_y})")
    return pair


def induced_prediction_channel(pre: ChannelLike, w: Channel, joint: JointDistribution,
                               strict: bool = True) -> np.ndarray:
    """Conditional law of the prediction after pre-processing and classification.

    Computes ``cond[a, y, yhat] = sum_{x, xt} W(yhat|xt) P(xt|x, a) P(x|y, a)``.

    Parameters
    ----------
    pre : Channel or pair of Channel
        Pre-processor, shared across groups or one per value of A.
    w : Channel
        Classifier mapping features to labels.
    joint : JointDistribution
    strict : bool
        Raise ``DegenerateConditioning`` on zero-mass ``(y, a)`` cells instead
        of returning NaN rows for them.
    """
    pair = _check_pre_shapes(pre, w, joint)
    x_given = joint.x_given_ya(strict=strict)
    out = np.empty((2, joint.n_y, joint.n_y))
    for a in range(2):
        out[a] = x_given[a] @ (pair[a].k @ w.k)
    return out


def induced_prediction_given_a(pre: ChannelLike, w: Channel, joint: JointDistribution) -> np.ndarray:
    """P(Yhat = yhat | A = a) indexed ``[a, yhat]`` for the demographic-parity variant."""
    pair = _check_pre_shapes(pre, w, joint)
    x_given = joint.x_given_a()
    return np.stack([x_given[a] @ (pair[a].k @ w.k) for a in range(2)])


def post_induced_channel(post: ChannelLike, pred_joint: PredictionJoint) -> np.ndarray:
    """P(Yhat_P = yhat | Y = y, A = a) for a post-processor applied to ``pred_joint``."""
    pair = group_channels(post)
    n = pred_joint.n_y
    for c in pair:
        if c.k.shape != (n, n):
            raise InvalidInput(f"post-channel shape {c.k.shape} does not match |Y| = {n}")
    cond = pred_joint.conditional()
    return np.stack([cond[a] @ pair[a].k for a in range(2)])


def _check_cond(cond, p_y) -> tuple[np.ndarray, np.ndarray]:
    cond = np.asarray(cond, dtype=float)
    p_y = np.asarray(p_y, dtype=float)
    if cond.ndim != 3 or cond.shape[0] != 2 or cond.shape[1] != p_y.shape[0]:
        raise InvalidInput(f"conditional prediction shape {cond.shape} does not match |Y| = {p_y.shape[0]}")
    return cond, p_y


def _defined_labels(cond: np.ndarray) -> np.ndarray:
    return ~np.any(np.isnan(cond), axis=(0, 2))


def tv_discrimination(cond, p_y) -> float:
    """Equalized-odds violation ``sum_y P_Y(y) sum_yhat |P(yhat|y,0) - P(yhat|y,1)|``.

    This is the linear-program objective; it ranges over [0, 2].
    """
    cond, p_y = _check_cond(cond, p_y)
    ok = _defined_labels(cond)
    gap = np.abs(cond[0, ok] - cond[1, ok]).sum(axis=1)
    return float(p_y[ok] @ gap)


def dp_discrimination(pred_given_a) -> float:
    """Demographic-parity violation ``sum_yhat |P(yhat|A=0) - P(yhat|A=1)|``."""
    pred_given_a = np.asarray(pred_given_a, dtype=float)
    if pred_given_a.ndim != 2 or pred_given_a.shape[0] != 2:
        raise InvalidInput(f"expected shape (2, |Y|), got {pred_given_a.shape}")
    return float(np.abs(pred_given_a[0] - pred_given_a[1]).sum())


def f_divergence_discrimination(cond, p_y, kind: str = "tv") -> float:
    """P_Y-weighted f-divergence between the two groups' prediction conditionals.

    ``kind`` is one of ``"tv"`` (half of :func:`tv_discrimination`), ``"kl"``
    for KL(group 0 || group 1) or ``"reverse_kl"``.  KL values are ``inf``
    when absolute continuity fails on a label with positive weight.
    """
    cond, p_y = _check_cond(cond, p_y)
    ok = _defined_labels(cond)
    p0, p1 = cond[0, ok], cond[1, ok]
    if kind == "tv":
        per_y = 0.5 * np.abs(p0 - p1).sum(axis=1)
    elif kind == "kl":
        per_y = rel_entr(p0, p1).sum(axis=1)
    elif kind == "reverse_kl":
        per_y = rel_entr(p1, p0).sum(axis=1)
    else:
        raise InvalidInput(f"unknown divergence kind {kind!r}")
    w = p_y[ok]
    live = w > 0
    return float(w[live] @ per_y[live])


def mutual_info_discrimination(pred_joint: PredictionJoint) -> float:
    """Conditional mutual information I(A; Yhat | Y) in nats.

    Evaluated through the decomposition into per-group KL divergences from the
    label-conditional prediction law, each weighted by P(A = a | Y = y).
    """
    q = pred_joint.q
    p_y = pred_joint.p_y
    total = 0.0
    for y in range(pred_joint.n_y):
        if p_y[y] == 0:
            continue
        slab = q[:, y, :]  # [yhat, a]
        pred_given_y = slab.sum(axis=1) / p_y[y]
        for a in range(2):
            p_ay = slab[:, a].sum()
            if p_ay == 0:
                continue
            total += p_y[y] * (p_ay / p_y[y]) * rel_entr(slab[:, a] / p_ay, pred_given_y).sum()
    return float(total)


def dbar_matrix(w: Channel, joint: JointDistribution, d: DistortionMatrix) -> np.ndarray:
    """Feature-level cost ``dbar[xt, x]``; columns with P_X(x) = 0 are NaN."""
    if w.k.shape != (joint.n_x, joint.n_y) or d.n != joint.n_y:
        raise InvalidInput("classifier, joint and distortion alphabets disagree")
    y_given_x = joint.y_given_x()
    return (w.k @ d.d.T) @ y_given_x.T


def dbar(xt: int, x: int, w: Channel, joint: JointDistribution, d: DistortionMatrix) -> float:
    """Expected cost of feeding ``xt`` to the classifier when the true feature is ``x``."""
    if joint.p_x[x] == 0:
        raise DegenerateConditioning(f"P(X={x}) = 0")
    return float(dbar_matrix(w, joint, d)[xt, x])


def pre_cost_tensor(w: Channel, joint: JointDistribution, d: DistortionMatrix) -> np.ndarray:
    """``cost[a, x, xt] = sum_{y, yhat} W(yhat|xt) P(x, y, a) d(y, yhat)``."""
    return joint.p @ (d.d @ w.k.T)


def post_cost_tensor(pred_joint: PredictionJoint, d: DistortionMatrix) -> np.ndarray:
    """``cost[a, yo, yp] = sum_y q(yo, y, a) d(y, yp)``."""
    return np.stack([pred_joint.q[:, :, a] @ d.d for a in range(2)])


def distortion_of_conditional(cond, p_ya, d: DistortionMatrix) -> float:
    """E[d(Y, Yhat)] from the conditional prediction law and P(Y, A) indexed ``[a, y]``."""
    cond = np.nan_to_num(np.asarray(cond, dtype=float))
    p_ya = np.asarray(p_ya, dtype=float)
    return float(np.einsum("ay,ayh,yh->", p_ya, cond, d.d))


def expected_distortion(channel: ChannelLike, d: DistortionMatrix, *, w: Channel | None = None,
                        joint: JointDistribution | None = None,
                        pred_joint: PredictionJoint | None = None) -> float:
    """Expected prediction cost after pre- or post-processing.

    Pass ``w`` and ``joint`` for a pre-processor, or ``pred_joint`` for a
    post-processor acting on the classifier output.
    """
    if pred_joint is not None:
        if d.n != pred_joint.n_y:
            raise InvalidInput("distortion and prediction joint alphabets disagree")
        pair = group_channels(channel)
        cost = post_cost_tensor(pred_joint, d)
        for c in pair:
            if c.k.shape != cost.shape[1:]:
                raise InvalidInput(f"post-channel shape {c.k.shape} does not match |Y| = {pred_joint.n_y}")
        return float(sum((pair[a].k * cost[a]).sum() for a in range(2)))
    if w is None or joint is None:
        raise InvalidInput("pre-processing distortion needs both the classifier and the joint")
    if d.n != joint.n_y:
        raise InvalidInput("distortion and joint alphabets disagree")
    pair = _check_pre_shapes(channel, w, joint)
    cost = pre_cost_tensor(w, joint, d)
    return float(sum((pair[a].k * cost[a]).sum() for a in range(2)))


def conditional_expected_distortion(pre: ChannelLike, w: Channel, joint: JointDistribution,
                                    d: DistortionMatrix) -> np.ndarray:
    """E[d(Y, Yhat) | X = x] for every feature value ``x``."""
    pair = _check_pre_shapes(pre, w, joint)
    p_x = joint.p_x
    if np.any(p_x == 0):
        raise DegenerateConditioning(f"P(X={int(np.flatnonzero(p_x == 0)[0])}) = 0")
    cost = pre_cost_tensor(w, joint, d)
    per_x = sum((pair[a].k * cost[a]).sum(axis=1) for a in range(2))
    return per_x / p_x
