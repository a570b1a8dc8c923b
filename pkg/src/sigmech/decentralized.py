"""Optimal decentralized signaling for independent systems, the obedience
characterization for binary signals, the payoff-weighted composition, and
the single-location fallback for correlated systems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import oracle
from .lp import GREATER, Constraint, LinearProgram, LpStatus, solve
from .model import (
    PROB_TOL,
    ZERO_MASS,
    CentralizedMechanism,
    CustomerStrategy,
    DecentralizedMechanism,
    EvaluationReport,
    InputError,
    LocationModel,
    LocationSignaling,
    PreconditionError,
    SolverError,
    SystemModel,
    require_valid,
)

CONDITION_I = "condition_i"
CONDITION_II = "condition_ii"
NEITHER = "neither"


@dataclass(frozen=True, eq=False)
class IsolatedSolution:
    """Optimal single-location persuasion: binary mechanism and its throughput."""

    location: int
    mechanism: LocationSignaling
    th_iso: float


@dataclass(frozen=True)
class ObedienceVerdict:
    """Outcome of the binary-signal obedience check.

    ``kind`` is ``condition_i`` (some location always signals 1 and is
    always worth joining), ``condition_ii`` (every location's signals
    are individually obedient), or ``neither``.  ``location`` names the
    witness for condition (I).
    """

    kind: str
    location: int | None = None

    @property
    def holds(self) -> bool:
        return self.kind != NEITHER


def solve_isolated(location: LocationModel, index: int = 0) -> IsolatedSolution:
    """Maximize the join probability of one location in isolation.

    Variables are sigma(1|state); signal 1 must have nonnegative
    posterior utility and signal 0 nonpositive.
    """
    prior = location.prior_array()
    util = location.utility_array()
    n = location.num_states
    weighted = tuple(prior * util)
    constraints = (
        Constraint(weighted, GREATER, 0.0),
        Constraint(weighted, GREATER, float(np.dot(prior, util))),
    )
    lp = LinearProgram(n, tuple(prior), constraints, ((0.0, 1.0),) * n)
    solution = solve(lp)
    if solution.status is not LpStatus.OPTIMAL:
        raise SolverError(
            f"isolated LP for location {index} reported {solution.status.value}; "
            "never signaling 1 is always feasible"
        )
    ones = np.asarray(solution.x)
    part = LocationSignaling((0, 1), np.column_stack([1.0 - ones, ones]))
    return IsolatedSolution(index, part, float(solution.objective_value))


def _signal_one_posteriors(system: SystemModel, mech: DecentralizedMechanism) -> np.ndarray:
    """Posterior utility of each location given its own signal 1 (-inf if unsent)."""
    out = np.full(system.num_locations, -math.inf)
    for k, (loc, part) in enumerate(zip(system.locations, mech.parts)):
        mass = float(np.dot(loc.prior_array(), part.table[:, 1]))
        if mass > ZERO_MASS:
            out[k] = float(
                np.dot(loc.prior_array() * loc.utility_array(), part.table[:, 1]) / mass
            )
    return out


def _join_on_one_strategy(
    system: SystemModel,
    mech: DecentralizedMechanism,
    priority: list[int] | None = None,
) -> CustomerStrategy:
    """Deterministic join-on-1 strategy over the binary joint signal space.

    On each nonzero signal vector the customer joins, among locations
    signaling 1, one maximizing the signal-1 posterior utility (smallest
    index on ties); an explicit ``priority`` order overrides that
    selection.  The all-zero vector maps to leaving.
    """
    num_locs = system.num_locations
    posteriors = None if priority is not None else _signal_one_posteriors(system, mech)
    labels = mech.joint_signals()
    rows = np.zeros((len(labels), num_locs + 1))
    for row, u in enumerate(labels):
        candidates = [k for k in range(num_locs) if u[k] == 1]
        if not candidates:
            rows[row, 0] = 1.0
            continue
        if priority is not None:
            pick = next(k for k in priority if u[k] == 1)
        else:
            best = max(posteriors[k] for k in candidates)
            if math.isinf(best):
                pick = candidates[0]
            else:
                pick = next(k for k in candidates if posteriors[k] >= best)
        rows[row, pick + 1] = 1.0
    return CustomerStrategy(tuple(labels), rows, class_fd=True)


def compose_optimal(
    system: SystemModel,
) -> tuple[DecentralizedMechanism, CustomerStrategy, EvaluationReport]:
    """Optimal decentralized mechanism for an independent system.

    Solves each location in isolation and takes the product mechanism;
    the throughput is 1 - prod_k (1 - th_iso_k).
    """
    require_valid(system)
    if system.prior_mode != "independent":
        raise PreconditionError(
            "compose_optimal needs independent priors; use correlated_fallback "
            "for systems with a joint prior"
        )
    solutions = [solve_isolated(loc, k) for k, loc in enumerate(system.locations)]
    mech = DecentralizedMechanism(tuple(sol.mechanism for sol in solutions))
    strategy = _join_on_one_strategy(system, mech)
    report = oracle.evaluate(system, mech, strategy)
    return mech, strategy, report


def check_obedience(system: SystemModel, mech: DecentralizedMechanism) -> ObedienceVerdict:
    """Decide whether a binary-signal mechanism admits an optimal join-on-1 strategy.

    Condition (I): some location never sends 0 (on positive-prior
    states), has nonnegative prior-mean utility, and beats every other
    location's signal-0 utility mass.  Condition (II): every location's
    signal-1 utility mass is nonnegative and signal-0 mass nonpositive.
    """
    require_valid(system)
    if system.prior_mode != "independent":
        raise PreconditionError("the obedience conditions apply to independent priors")
    if mech.num_locations != system.num_locations or not mech.is_binary:
        raise InputError("check_obedience needs binary signals (0, 1) per location")

    num_locs = system.num_locations
    priors = [loc.prior_array() for loc in system.locations]
    utils = [loc.utility_array() for loc in system.locations]
    zero_mass = [float(np.dot(priors[k], mech.parts[k].table[:, 0])) for k in range(num_locs)]
    zero_util = [
        float(np.dot(priors[k] * utils[k], mech.parts[k].table[:, 0]))
        for k in range(num_locs)
    ]
    one_util = [
        float(np.dot(priors[k] * utils[k], mech.parts[k].table[:, 1]))
        for k in range(num_locs)
    ]
    mean_util = [float(np.dot(priors[k], utils[k])) for k in range(num_locs)]

    for k in range(num_locs):
        never_zero = float(np.max(priors[k] * mech.parts[k].table[:, 0])) <= ZERO_MASS
        if not never_zero or mean_util[k] < -PROB_TOL:
            continue
        if all(
            zero_mass[l] * mean_util[k] >= zero_util[l] - PROB_TOL
            for l in range(num_locs)
            if l != k
        ):
            return ObedienceVerdict(CONDITION_I, k)

    if all(
        one_util[k] >= -PROB_TOL and zero_util[k] <= PROB_TOL for k in range(num_locs)
    ):
        return ObedienceVerdict(CONDITION_II)
    return ObedienceVerdict(NEITHER)


def heterogeneous_compose(
    system: SystemModel,
) -> tuple[DecentralizedMechanism, CustomerStrategy, float]:
    """Payoff-weighted composition for independent systems.

    Locations with nonpositive payoff, or with negative utility on every
    positive-prior state, always signal 0.  The rest must have negative
    prior-mean utility (checked), are sorted by payoff descending, and
    each runs its isolated mechanism; the customer joins the
    highest-payoff location among those signaling 1.  Returns the
    closed-form telescoped value.
    """
    require_valid(system)
    if system.prior_mode != "independent":
        raise PreconditionError("heterogeneous_compose needs independent priors")

    num_locs = system.num_locations
    retained = []
    for k, loc in enumerate(system.locations):
        persuadable = any(
            p > 0.0 and h >= 0.0 for p, h in zip(loc.prior, loc.utility)
        )
        if loc.payoff <= 0.0 or not persuadable:
            continue
        if loc.expected_utility() >= 0.0:
            raise PreconditionError(
                f"location {k} ({loc.name!r}) has nonnegative prior-mean utility "
                f"{loc.expected_utility():.6g}; the payoff-weighted guarantee "
                "requires it to be negative"
            )
        retained.append(k)

    order = sorted(retained, key=lambda k: (-system.locations[k].payoff, k))
    solutions = {k: solve_isolated(system.locations[k], k) for k in order}

    parts: list[LocationSignaling] = []
    for k, loc in enumerate(system.locations):
        if k in solutions:
            parts.append(solutions[k].mechanism)
        else:
            table = np.column_stack([np.ones(loc.num_states), np.zeros(loc.num_states)])
            parts.append(LocationSignaling((0, 1), table))
    mech = DecentralizedMechanism(tuple(parts))

    priority = order + [k for k in range(num_locs) if k not in solutions]
    strategy = _join_on_one_strategy(system, mech, priority=priority)

    value = 0.0
    miss = 1.0
    for pos, k in enumerate(order):
        miss *= 1.0 - solutions[k].th_iso
        pay = system.locations[k].payoff
        next_pay = system.locations[order[pos + 1]].payoff if pos + 1 < len(order) else 0.0
        value += (pay - next_pay) * (1.0 - miss)
    return mech, strategy, value


def correlated_fallback(
    system: SystemModel, central: CentralizedMechanism
) -> DecentralizedMechanism:
    """Single-location simulation of an obedient centralized mechanism.

    The location with the largest recommended mass signals 1 with the
    probability that the centralized mechanism would have recommended
    it, conditional on that location's own state; everyone else signals
    0.  A best response then achieves at least 1/K of the centralized
    throughput.
    """
    require_valid(system)
    num_locs = system.num_locations
    if central.signals != tuple(range(num_locs + 1)):
        raise InputError("the centralized mechanism must use signals 0..K")
    if central.table.shape[0] != system.state_count:
        raise InputError("mechanism table does not match the system's state space")

    mu = system.joint_vector
    recommended = mu[:, None] * central.table[:, 1:]  # (states, K)
    totals = recommended.sum(axis=0)
    pick = int(np.argmax(totals))

    idx = system.state_index_matrix[:, pick]
    n = system.locations[pick].num_states
    numer = np.zeros(n)
    denom = np.zeros(n)
    np.add.at(numer, idx, recommended[:, pick])
    np.add.at(denom, idx, mu)
    ones = np.zeros(n)
    positive = denom > 0.0
    ones[positive] = np.clip(numer[positive] / denom[positive], 0.0, 1.0)

    parts = []
    for k, loc in enumerate(system.locations):
        if k == pick:
            parts.append(
                LocationSignaling((0, 1), np.column_stack([1.0 - ones, ones]))
            )
        else:
            table = np.column_stack([np.ones(loc.num_states), np.zeros(loc.num_states)])
            parts.append(LocationSignaling((0, 1), table))
    return DecentralizedMechanism(tuple(parts))
