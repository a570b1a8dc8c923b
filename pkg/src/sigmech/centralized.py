"""Optimal centralized signaling via the direct obedient-recommendation LP.

Signals are action recommendations 0..K (0 = leave).  The LP maximizes
the recommended join mass subject to obedience: following is at least as
good as any deviation, joining a recommended location beats leaving, and
leaving when told to is a best response.
"""

from __future__ import annotations

import numpy as np

from . import oracle
from .lp import EQUAL, GREATER, LESS, Constraint, LinearProgram, LpStatus, solve
from .model import (
    CentralizedMechanism,
    CustomerStrategy,
    EvaluationReport,
    SolverError,
    SystemModel,
    require_valid,
)


def build_centralized_lp(system: SystemModel, weighted: bool = False) -> LinearProgram:
    """Obedience LP with one variable per (state tuple, recommendation).

    Variable layout: index(state w, action a) = w * (K + 1) + a, states
    in the canonical mixed-radix order.  The constraint order is the
    K*K deviation rows (including the trivially tight a = b rows), the K
    join-beats-leaving rows, the K leave rows, then one row-sum equality
    per state.  With ``weighted`` the objective weighs location k's
    recommendation mass by its payoff instead of 1.
    """
    require_valid(system)
    num_locs = system.num_locations
    num_states = system.state_count
    num_actions = num_locs + 1
    n_vars = num_states * num_actions
    mu = system.joint_vector
    util = system.utility_matrix  # (states, K)

    def var(state: int, action: int) -> int:
        return state * num_actions + action

    objective = np.zeros(n_vars)
    weights = system.payoffs if weighted else (1.0,) * num_locs
    for k in range(num_locs):
        objective[np.arange(num_states) * num_actions + (k + 1)] = mu * weights[k]

    constraints = []
    for k in range(num_locs):
        for other in range(num_locs):
            row = np.zeros(n_vars)
            row[np.arange(num_states) * num_actions + (k + 1)] = mu * (
                util[:, k] - util[:, other]
            )
            constraints.append(Constraint(tuple(row), GREATER, 0.0))
    for k in range(num_locs):
        row = np.zeros(n_vars)
        row[np.arange(num_states) * num_actions + (k + 1)] = mu * util[:, k]
        constraints.append(Constraint(tuple(row), GREATER, 0.0))
    for k in range(num_locs):
        row = np.zeros(n_vars)
        row[np.arange(num_states) * num_actions] = mu * util[:, k]
        constraints.append(Constraint(tuple(row), LESS, 0.0))
    for state in range(num_states):
        row = np.zeros(n_vars)
        row[state * num_actions : (state + 1) * num_actions] = 1.0
        constraints.append(Constraint(tuple(row), EQUAL, 1.0))

    return LinearProgram(n_vars, tuple(objective), tuple(constraints))


def obedient_strategy(num_locations: int) -> CustomerStrategy:
    """Follow every recommendation: f(a|a) = 1 over signals 0..K."""
    return CustomerStrategy(
        tuple(range(num_locations + 1)), np.eye(num_locations + 1)
    )


def solve_centralized(
    system: SystemModel, weighted: bool = False
) -> tuple[CentralizedMechanism, EvaluationReport]:
    """Optimal direct mechanism and its evaluation under obedience.

    The report's throughput (unweighted) or value (weighted) matches the
    LP optimum; infeasible or unbounded statuses indicate a bug because
    always-recommending 0 is feasible and the objective is bounded.
    """
    lp = build_centralized_lp(system, weighted)
    solution = solve(lp)
    if solution.status is not LpStatus.OPTIMAL:
        raise SolverError(
            f"centralized LP reported {solution.status.value}; it must be "
            "feasible (always send 0) and bounded"
        )
    num_actions = system.num_locations + 1
    table = np.asarray(solution.x).reshape(system.state_count, num_actions)
    mech = CentralizedMechanism(tuple(range(num_actions)), table)
    report = oracle.evaluate(system, mech, obedient_strategy(system.num_locations))
    return mech, report
