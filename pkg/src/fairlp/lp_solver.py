"""Dense two-phase primal simplex with Bland's anti-cycling rule.

Problems are stated as::

    minimize    c @ z
    subject to  A_eq @ z == b_eq
                A_ub @ z <= b_ub
                z >= 0

Every inequality row receives a slack column, so column indices in a reported
basis refer to ``[z | slacks]``: ``0 .. n-1`` are the decision variables and
``n + i`` is the slack of inequality row ``i``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidProgram, NumericalFailure

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
HARRIS_TOL = 1e-11  # ratio-test relaxation; must stay well below FEAS_TOL since it accumulates per pivot
DRIVE_OUT_TOL = 1e-8
MAX_ITER = 50_000


class LPStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


def _matrix(a, n: int, label: str) -> np.ndarray:
    if a is None:
        return np.zeros((0, n))
    a = np.array(a, dtype=float)
    if a.ndim == 1 and a.size == 0:
        a = a.reshape(0, n)
    if a.ndim != 2 or a.shape[1] != n:
        raise InvalidProgram(f"{label} must have {n} columns, got shape {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class LinearProgram:
    c: np.ndarray
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    A_ub: np.ndarray = None
    b_ub: np.ndarray = None
    names: tuple = field(default=())

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        if c.ndim != 1:
            raise InvalidProgram("objective must be a vector")
        n = c.size
        A_eq = _matrix(self.A_eq, n, "A_eq")
        A_ub = _matrix(self.A_ub, n, "A_ub")
        b_eq = np.zeros(0) if self.b_eq is None else np.array(self.b_eq, dtype=float).ravel()
        b_ub = np.zeros(0) if self.b_ub is None else np.array(self.b_ub, dtype=float).ravel()
        if b_eq.size != A_eq.shape[0] or b_ub.size != A_ub.shape[0]:
            raise InvalidProgram("right-hand sides do not match the number of constraint rows")
        for arr in (c, A_eq, b_eq, A_ub, b_ub):
            if not np.all(np.isfinite(arr)):
                raise InvalidProgram("linear program data must be finite")
            arr.setflags(write=False)
        names = tuple(self.names) if self.names else tuple(f"z{i}" for i in range(n))
        if len(names) != n:
            raise InvalidProgram(f"expected {n} variable names, got {len(names)}")
        for key, val in dict(c=c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub, names=names).items():
            object.__setattr__(self, key, val)

    @property
    def n(self) -> int:
        return self.c.size

    def with_rhs(self, b_ub=None, b_eq=None) -> "LinearProgram":
        return LinearProgram(self.c, self.A_eq, self.b_eq if b_eq is None else b_eq,
                             self.A_ub, self.b_ub if b_ub is None else b_ub, self.names)

    def to_dict(self) -> dict:
        return {
            "sense": "minimize",
            "bounds": "z >= 0",
            "names": list(self.names),
            "objective": self.c.tolist(),
            "A_eq": self.A_eq.tolist(),
            "b_eq": self.b_eq.tolist(),
            "A_ub": self.A_ub.tolist(),
            "b_ub": self.b_ub.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LinearProgram":
        n = len(data["objective"])
        return cls(
            c=data["objective"],
            A_eq=np.array(data["A_eq"], dtype=float).reshape(-1, n),
            b_eq=data["b_eq"],
            A_ub=np.array(data["A_ub"], dtype=float).reshape(-1, n),
            b_ub=data["b_ub"],
            names=tuple(data.get("names", ())),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


@dataclass(frozen=True, eq=False)
class LPSolution:
    status: LPStatus
    value: float = float("nan")
    z: np.ndarray | None = None
    basis: tuple = ()
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL


class _Tableau:
    """Dense simplex tableau; the last row holds reduced costs and minus the objective."""

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int]):
        m, n = A.shape
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = A
        self.T[:m, n] = b
        self.basis = list(basis)
        self.iterations = 0

    @property
    def m(self) -> int:
        return self.T.shape[0] - 1

    def set_objective(self, cost: np.ndarray) -> None:
        m = self.m
        self.T[m, :] = 0.0
        self.T[m, :-1] = cost
        for i, j in enumerate(self.basis):
            if cost[j] != 0.0:
                self.T[m] -= cost[j] * self.T[i]

    def pivot(self, i: int, j: int) -> None:
        T = self.T
        T[i] /= T[i, j]
        col = T[:, j].copy()
        col[i] = 0.0
        T -= np.outer(col, T[i])
        T[:, j] = 0.0
        T[i, j] = 1.0
        self.basis[i] = j
        self.iterations += 1

    def run(self, allowed: np.ndarray) -> LPStatus:
        """Iterate Bland's rule over the columns flagged in ``allowed``."""
        T, m = self.T, self.m
        while True:
            if self.iterations > MAX_ITER:
                raise NumericalFailure("simplex iteration guard exhausted")
            reduced = T[m, :-1]
            candidates = np.flatnonzero(allowed & (reduced < -PIVOT_TOL))
            if candidates.size == 0:
                return LPStatus.OPTIMAL
            j = int(candidates[0])
            column = T[:m, j]
            rows = np.flatnonzero(column > PIVOT_TOL)
            if rows.size == 0:
                return LPStatus.UNBOUNDED
            # Harris two-pass ratio test: bound the step with the rhs relaxed by
            # HARRIS_TOL, then take the largest pivot among rows within that bound.
            # Tiny pivots otherwise leave basic values negative by ~1e-4.
            rhs = np.maximum(T[rows, -1], 0.0)
            limit = ((rhs + HARRIS_TOL) / column[rows]).min()
            ratios = rhs / column[rows]
            eligible = rows[ratios <= limit]
            size = column[eligible]
            tied = eligible[size >= size.max() * (1.0 - 1e-12)]
            i = int(min(tied, key=lambda r: self.basis[r]))
            self.pivot(i, j)


def _standard_form(lp: LinearProgram):
    n, m_ub, m_eq = lp.n, lp.A_ub.shape[0], lp.A_eq.shape[0]
    A = np.zeros((m_ub + m_eq, n + m_ub))
    A[:m_ub, :n] = lp.A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = lp.A_eq
    b = np.concatenate([lp.b_ub, lp.b_eq])
    cost = np.concatenate([lp.c, np.zeros(m_ub)])
    return A, b, cost


def _phase_one(A: np.ndarray, b: np.ndarray, n_struct: int):
    """Find a feasible basis; returns (tableau, feasible) with artificial columns removed."""
    m, N = A.shape
    A = A.copy()
    b = b.copy()
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0

    basis = [-1] * m
    m_ub = N - n_struct
    for i in range(min(m, m_ub)):
        if not flip[i]:
            basis[i] = n_struct + i
    need = [i for i in range(m) if basis[i] < 0]
    art = np.zeros((m, len(need)))
    for k, i in enumerate(need):
        art[i, k] = 1.0
        basis[i] = N + k
    tab = _Tableau(np.hstack([A, art]), b, basis)
    if not need:
        return tab, True

    cost = np.zeros(N + len(need))
    cost[N:] = 1.0
    tab.set_objective(cost)
    allowed = np.ones(N + len(need), dtype=bool)
    tab.run(allowed)
    infeasibility = -tab.T[-1, -1]
    if infeasibility > FEAS_TOL:
        return tab, False

    # Drive artificials out of the basis; rows where that is impossible are redundant.
    redundant = []
    for i in range(tab.m):
        if tab.basis[i] >= N:
            row = np.abs(tab.T[i, :N])
            j = int(row.argmax())
            # a near-zero pivot here corrupts the whole tableau
            if row[j] > DRIVE_OUT_TOL:
                tab.pivot(i, j)
            else:
                redundant.append(i)
    keep = [i for i in range(tab.m) if i not in redundant]
    T = tab.T
    new_T = np.vstack([T[keep][:, list(range(N)) + [T.shape[1] - 1]], np.zeros((1, N + 1))])
    reduced = _Tableau(np.zeros((0, N)), np.zeros(0), [])
    reduced.T = new_T
    reduced.basis = [tab.basis[i] for i in keep]
    reduced.iterations = tab.iterations
    return reduced, True


def _check(lp: LinearProgram) -> None:
    if not isinstance(lp, LinearProgram):
        raise InvalidProgram("expected a LinearProgram")


def feasible(lp: LinearProgram) -> bool:
    """True iff the constraint set is non-empty within the feasibility tolerance."""
    _check(lp)
    A, b, _ = _standard_form(lp)
    _, ok = _phase_one(A, b, lp.n)
    return ok


def solve(lp: LinearProgram) -> LPSolution:
    """Solve ``lp`` to optimality, infeasibility or unboundedness.

    The pivot sequence is fully determined by the input, so repeated solves of
    the same program return the same basis.
    """
    _check(lp)
    A, b, cost = _standard_form(lp)
    N = A.shape[1]
    tab, ok = _phase_one(A, b, lp.n)
    if not ok:
        return LPSolution(LPStatus.INFEASIBLE, iterations=tab.iterations)
    tab.set_objective(cost)
    status = tab.run(np.ones(N, dtype=bool))
    if status is LPStatus.UNBOUNDED:
        return LPSolution(LPStatus.UNBOUNDED, value=-np.inf, iterations=tab.iterations)

    basis = list(tab.basis)
    x = np.zeros(N)
    x[basis] = tab.T[:-1, -1]
    # Recompute basic values from the original data to shed accumulated pivot error.
    if basis:
        refined, *_ = np.linalg.lstsq(A[:, basis], b, rcond=None)
        if (refined.min(initial=0.0) >= -PIVOT_TOL
                and np.abs(A[:, basis] @ refined - b).max() <= np.abs(A @ x - b).max()):
            x[basis] = refined
    x[(x < 0) & (x > -PIVOT_TOL)] = 0.0
    z = x[: lp.n]
    z.setflags(write=False)
    return LPSolution(
        LPStatus.OPTIMAL,
        value=float(lp.c @ z),
        z=z,
        basis=tuple(sorted(basis)),
        iterations=tab.iterations,
    )


def residuals(lp: LinearProgram, z) -> dict:
    """Primal feasibility residuals of ``z`` (all zero for an exactly feasible point)."""
    z = np.asarray(z, dtype=float)
    eq = np.abs(lp.A_eq @ z - lp.b_eq).max(initial=0.0)
    ub = np.maximum(lp.A_ub @ z - lp.b_ub, 0.0).max(initial=0.0)
    neg = np.maximum(-z, 0.0).max(initial=0.0)
    return {"eq": float(eq), "ub": float(ub), "neg": float(neg)}
