"""A small dense linear-program representation and two-phase simplex solver.

Sized for the obedience LPs this package builds: hundreds to a few
thousand dense variables.  Equality constraints are handled natively,
pricing is Dantzig's rule with a permanent switch to Bland's rule after
a degenerate stall (which guarantees termination), and the iteration cap
is 50 * (variables + constraints).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import InputError, SolverError

FEAS_TOL = 1e-8    # feasibility tolerance (phase-1 optimum, violation checks)
OPT_TOL = 1e-9     # reduced-cost (optimality) tolerance
PIVOT_TOL = 1e-9   # smallest pivot element accepted in the ratio test

LESS = "<="
GREATER = ">="
EQUAL = "="
_RELATIONS = (LESS, GREATER, EQUAL)


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple[float, ...]
    relation: str
    rhs: float

    def __post_init__(self):
        if self.relation not in _RELATIONS:
            raise InputError(f"unknown relation {self.relation!r}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "rhs", float(self.rhs))


@dataclass(frozen=True)
class LinearProgram:
    """maximize objective . x subject to constraints and variable bounds."""

    n_vars: int
    objective: tuple[float, ...]
    constraints: tuple[Constraint, ...]
    bounds: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "objective", tuple(float(c) for c in self.objective))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.bounds is None:
            object.__setattr__(self, "bounds", ((0.0, math.inf),) * self.n_vars)
        else:
            object.__setattr__(
                self, "bounds", tuple((float(lo), float(hi)) for lo, hi in self.bounds)
            )

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    x: tuple[float, ...]
    objective_value: float
    max_violation: float


def _check_shapes(lp: LinearProgram) -> None:
    if lp.n_vars < 1:
        raise InputError("a linear program needs at least one variable")
    if len(lp.objective) != lp.n_vars:
        raise InputError(
            f"objective has {len(lp.objective)} coefficients for {lp.n_vars} variables"
        )
    if len(lp.bounds) != lp.n_vars:
        raise InputError(f"bounds list has {len(lp.bounds)} entries for {lp.n_vars} variables")
    for i, con in enumerate(lp.constraints):
        if len(con.coeffs) != lp.n_vars:
            raise InputError(
                f"constraint {i} has {len(con.coeffs)} coefficients for {lp.n_vars} variables"
            )
    for j, (lo, hi) in enumerate(lp.bounds):
        if lo > hi:
            raise InputError(f"variable {j} has lower bound {lo} above upper bound {hi}")


def violation_at(lp: LinearProgram, x: np.ndarray) -> float:
    """Largest constraint or bound breach at the point x."""
    worst = 0.0
    x = np.asarray(x, dtype=float)
    for con in lp.constraints:
        lhs = float(np.dot(con.coeffs, x))
        if con.relation == LESS:
            worst = max(worst, lhs - con.rhs)
        elif con.relation == GREATER:
            worst = max(worst, con.rhs - lhs)
        else:
            worst = max(worst, abs(lhs - con.rhs))
    for j, (lo, hi) in enumerate(lp.bounds):
        if math.isfinite(lo):
            worst = max(worst, lo - x[j])
        if math.isfinite(hi):
            worst = max(worst, x[j] - hi)
    return worst


class _Tableau:
    """Dense simplex tableau; last row holds reduced costs, last column rhs.

    The bottom-right cell carries the negated objective so a single pivot
    routine updates everything.
    """

    def __init__(self, body: np.ndarray, basis: np.ndarray, cap: int):
        self.T = body
        self.basis = basis
        self.cap = cap
        self.iterations = 0
        self.bland = False
        self._best = -math.inf
        self._stall = 0
        # Degenerate pivots beyond this switch pricing to Bland's rule.
        self._stall_limit = 10 * (body.shape[0] + 25)

    @property
    def num_cols(self) -> int:
        return self.T.shape[1] - 1

    @property
    def num_rows(self) -> int:
        return self.T.shape[0] - 1

    def objective(self) -> float:
        return -float(self.T[-1, -1])

    def set_costs(self, costs: np.ndarray) -> None:
        """Recompute the reduced-cost row for the current basis."""
        m = self.num_rows
        cb = costs[self.basis]
        self.T[-1, : self.num_cols] = costs - cb @ self.T[:m, : self.num_cols]
        self.T[-1, -1] = -float(cb @ self.T[:m, -1])

    def _pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] /= T[row, col]
        factors = T[:, col].copy()
        factors[row] = 0.0
        T -= np.outer(factors, T[row])
        T[:, col] = 0.0
        T[row, col] = 1.0
        self.basis[row] = col

    def run(self) -> LpStatus:
        T = self.T
        m = self.num_rows
        n = self.num_cols
        while True:
            costs = T[-1, :n]
            if self.bland:
                eligible = np.nonzero(costs > OPT_TOL)[0]
                if eligible.size == 0:
                    return LpStatus.OPTIMAL
                col = int(eligible[0])
            else:
                col = int(np.argmax(costs))
                if costs[col] <= OPT_TOL:
                    return LpStatus.OPTIMAL
            column = T[:m, col]
            positive = column > PIVOT_TOL
            if not positive.any():
                return LpStatus.UNBOUNDED
            ratios = np.full(m, math.inf)
            ratios[positive] = T[:m, -1][positive] / column[positive]
            best = float(ratios.min())
            tied = np.nonzero(ratios <= best + 1e-9 * (1.0 + abs(best)))[0]
            row = int(tied[np.argmin(self.basis[tied])])
            self._pivot(row, col)
            self.iterations += 1
            if self.iterations > self.cap:
                raise SolverError(
                    f"simplex exceeded the iteration cap of {self.cap} pivots"
                )
            obj = self.objective()
            if obj > self._best + 1e-12:
                self._best = obj
                self._stall = 0
            else:
                self._stall += 1
                if self._stall > self._stall_limit:
                    self.bland = True


def solve(lp: LinearProgram, *, _iteration_cap: int | None = None) -> LpSolution:
    """Solve the LP; statuses other than OPTIMAL are reported faithfully.

    Raises InputError on shape mismatches and SolverError if the pivot
    limit is exceeded.
    """
    _check_shapes(lp)
    cap = _iteration_cap
    if cap is None:
        cap = 50 * (lp.n_vars + lp.n_constraints)

    # Shift every variable to y >= 0.  x = offset + sign * y, with free
    # variables split into a positive and a negative part.
    col_of: list[list[tuple[int, float]]] = []
    offsets = np.zeros(lp.n_vars)
    upper_rows: list[tuple[int, float]] = []  # (y column, upper bound on y)
    num_y = 0
    for j, (lo, hi) in enumerate(lp.bounds):
        if math.isinf(lo) and math.isinf(hi):
            col_of.append([(num_y, 1.0), (num_y + 1, -1.0)])
            num_y += 2
        elif math.isinf(lo):
            offsets[j] = hi
            col_of.append([(num_y, -1.0)])
            num_y += 1
        else:
            offsets[j] = lo
            col_of.append([(num_y, 1.0)])
            if math.isfinite(hi):
                upper_rows.append((num_y, hi - lo))
            num_y += 1

    def to_y_row(coeffs: np.ndarray) -> np.ndarray:
        row = np.zeros(num_y)
        for j, entries in enumerate(col_of):
            for col, sign in entries:
                row[col] += sign * coeffs[j]
        return row

    rows = []
    rels = []
    rhs = []
    for con in lp.constraints:
        coeffs = np.asarray(con.coeffs)
        rows.append(to_y_row(coeffs))
        rels.append(con.relation)
        rhs.append(con.rhs - float(np.dot(coeffs, offsets)))
    for col, ub in upper_rows:
        row = np.zeros(num_y)
        row[col] = 1.0
        rows.append(row)
        rels.append(LESS)
        rhs.append(ub)

    m = len(rows)
    A = np.array(rows) if rows else np.zeros((0, num_y))
    b = np.array(rhs)
    relations = list(rels)

    # Normalize to b >= 0; >= rows with zero rhs become <= rows for free.
    for i in range(m):
        if b[i] < 0.0:
            A[i] = -A[i]
            b[i] = -b[i]
            if relations[i] == LESS:
                relations[i] = GREATER
            elif relations[i] == GREATER:
                relations[i] = LESS
        if relations[i] == GREATER and b[i] == 0.0:
            A[i] = -A[i]
            relations[i] = LESS

    num_slack = sum(1 for r in relations if r != EQUAL)
    num_art = sum(1 for r in relations if r != LESS)
    total = num_y + num_slack + num_art
    body = np.zeros((m + 1, total + 1))
    body[:m, :num_y] = A
    body[:m, -1] = b
    basis = np.zeros(m, dtype=int)
    art_start = num_y + num_slack
    slack_at = num_y
    art_at = art_start
    for i, rel in enumerate(relations):
        if rel == LESS:
            body[i, slack_at] = 1.0
            basis[i] = slack_at
            slack_at += 1
        elif rel == GREATER:
            body[i, slack_at] = -1.0
            slack_at += 1
            body[i, art_at] = 1.0
            basis[i] = art_at
            art_at += 1
        else:
            body[i, art_at] = 1.0
            basis[i] = art_at
            art_at += 1

    tableau = _Tableau(body, basis, cap)

    if num_art:
        phase1 = np.zeros(total)
        phase1[art_start:] = -1.0
        tableau.set_costs(phase1)
        status = tableau.run()
        if status is LpStatus.UNBOUNDED:
            raise SolverError("phase-1 objective reported unbounded")
        if tableau.objective() < -FEAS_TOL:
            return LpSolution(LpStatus.INFEASIBLE, (math.nan,) * lp.n_vars, math.nan, math.nan)
        # Pivot artificials out of the basis; rows that cannot pivot are
        # redundant and dropped.
        keep_rows = np.ones(m, dtype=bool)
        for i in range(m):
            if tableau.basis[i] >= art_start:
                row = tableau.T[i, :art_start]
                candidates = np.nonzero(np.abs(row) > PIVOT_TOL)[0]
                if candidates.size:
                    tableau._pivot(i, int(candidates[0]))
                else:
                    keep_rows[i] = False
        kept = tableau.T[np.append(keep_rows, True)]
        body = np.hstack([kept[:, :art_start], kept[:, -1:]])
        done = tableau.iterations
        tableau = _Tableau(body, tableau.basis[keep_rows], cap)
        tableau.iterations = done

    phase2 = np.zeros(tableau.num_cols)
    for j, entries in enumerate(col_of):
        for col, sign in entries:
            phase2[col] += sign * lp.objective[j]
    tableau.set_costs(phase2)
    status = tableau.run()
    if status is LpStatus.UNBOUNDED:
        return LpSolution(LpStatus.UNBOUNDED, (math.nan,) * lp.n_vars, math.inf, math.nan)

    y = np.zeros(tableau.num_cols)
    y[tableau.basis] = tableau.T[: tableau.num_rows, -1]
    x = offsets.copy()
    for j, entries in enumerate(col_of):
        for col, sign in entries:
            x[j] += sign * y[col]
    objective = float(np.dot(lp.objective, x))
    worst = violation_at(lp, x)
    if worst > FEAS_TOL:
        raise SolverError(
            f"simplex returned an optimal basis with violation {worst:.3g} "
            f"above the {FEAS_TOL} feasibility tolerance"
        )
    return LpSolution(LpStatus.OPTIMAL, tuple(float(v) for v in x), objective, worst)
