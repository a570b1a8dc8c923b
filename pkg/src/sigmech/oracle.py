"""Brute-force machinery: exact best response, full-enumeration evaluation,
baseline mechanisms, and grid search over binary decentralized mechanisms.

Everything here enumerates the full (state, signal, action) space, so it
is the ground truth the solvers are tested against.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .model import (
    PROB_TOL,
    ZERO_MASS,
    CentralizedMechanism,
    CustomerStrategy,
    DecentralizedMechanism,
    EvaluationReport,
    InputError,
    LocationSignaling,
    SignalStat,
    SystemModel,
    binary_mechanism,
    require_valid,
)

# Absolute tolerance for customer-utility ties; utilities in play are O(1)-O(K).
TIE_TOL = 1e-9
# Parameter-count guard for the grid search.
GRID_PARAM_LIMIT = 8
_BATCH = 1 << 17

Mechanism = CentralizedMechanism | DecentralizedMechanism


def _signal_view(system: SystemModel, mech: Mechanism) -> tuple[list, np.ndarray]:
    """Mechanism as (joint signal labels, table over joint states x signals)."""
    if isinstance(mech, DecentralizedMechanism):
        if mech.num_locations != system.num_locations:
            raise InputError(
                f"mechanism covers {mech.num_locations} locations, system has "
                f"{system.num_locations}"
            )
        for k, (part, size) in enumerate(zip(mech.parts, system.state_sizes)):
            if part.table.shape[0] != size:
                raise InputError(f"location {k} table has wrong state count")
        return mech.joint_signals(), mech.joint_table()
    if mech.table.shape != (system.state_count, mech.num_signals):
        raise InputError(
            f"mechanism table shape {mech.table.shape} does not match "
            f"{system.state_count} states x {mech.num_signals} signals"
        )
    return list(mech.signals), mech.table


def _action_priority(payoffs: Sequence[float]) -> list[int]:
    """Actions ordered by system preference: payoff descending, index ascending.

    Action 0 (leave) is worth zero to the system.
    """
    values = [0.0] + [float(v) for v in payoffs]
    return sorted(range(len(values)), key=lambda a: (-values[a], a))


def best_response(system: SystemModel, mech: Mechanism) -> CustomerStrategy:
    """Pure optimal customer strategy, ties broken in favor of the system.

    For each signal with positive probability the strategy plays one
    action maximizing the posterior expected utility (leaving is worth
    exactly zero); among maximizers within 1e-9 the action with the
    largest payoff wins, then the smallest index.  Zero-probability
    signals map to action 0.
    """
    labels, table = _signal_view(system, mech)
    mu = system.joint_vector
    mass = mu[:, None] * table
    probs = mass.sum(axis=0)
    wins = system.utility_matrix.T @ mass  # (K, S) unnormalized posteriors
    num_actions = system.num_locations + 1
    priority = _action_priority(system.payoffs)
    rows = np.zeros((len(labels), num_actions))
    for s in range(len(labels)):
        if probs[s] <= ZERO_MASS:
            rows[s, 0] = 1.0
            continue
        utilities = np.concatenate([[0.0], wins[:, s] / probs[s]])
        eligible = utilities >= utilities.max() - TIE_TOL
        for action in priority:
            if eligible[action]:
                rows[s, action] = 1.0
                break
    return CustomerStrategy(tuple(labels), rows)


def evaluate(system: SystemModel, mech: Mechanism, strategy: CustomerStrategy) -> EvaluationReport:
    """Exact enumeration of throughput, value, and per-signal diagnostics."""
    labels, table = _signal_view(system, mech)
    num_actions = system.num_locations + 1
    if strategy.table.shape != (len(labels), num_actions):
        raise InputError(
            f"strategy table shape {strategy.table.shape} does not match "
            f"{len(labels)} signals x {num_actions} actions"
        )
    if tuple(strategy.signals) != tuple(labels):
        raise InputError("strategy signal labels do not match the mechanism")

    mu = system.joint_vector
    mass = mu[:, None] * table
    probs = mass.sum(axis=0)
    wins = system.utility_matrix.T @ mass
    action_mass = probs @ strategy.table
    per_location = action_mass[1:]
    throughput = float(per_location.sum())
    value = float(np.dot(per_location, system.payoffs))

    worst = 0.0
    stats = []
    for s in range(len(labels)):
        if probs[s] <= ZERO_MASS:
            continue
        best_mass = max(0.0, float(wins[:, s].max()))
        for action in range(num_actions):
            if strategy.table[s, action] <= ZERO_MASS:
                continue
            got = 0.0 if action == 0 else float(wins[action - 1, s])
            worst = min(worst, got - best_mass)
        stats.append(
            SignalStat(
                signal=labels[s],
                probability=float(probs[s]),
                posterior_utilities=tuple(wins[:, s] / probs[s]),
                chosen_action=int(np.argmax(strategy.table[s])),
            )
        )
    return EvaluationReport(
        throughput=throughput,
        value=value,
        per_location_throughput=tuple(float(v) for v in per_location),
        signal_stats=tuple(stats),
        strategy_optimal=worst >= -1e-7,
        worst_slack=worst,
    )


def full_information(system: SystemModel) -> DecentralizedMechanism:
    """Each location truthfully reports its own state (signals = states)."""
    parts = [
        LocationSignaling(tuple(loc.states), np.eye(loc.num_states))
        for loc in system.locations
    ]
    return DecentralizedMechanism(tuple(parts))


def no_information(system: SystemModel) -> DecentralizedMechanism:
    """Each location sends one constant signal."""
    parts = [
        LocationSignaling((0,), np.ones((loc.num_states, 1)))
        for loc in system.locations
    ]
    return DecentralizedMechanism(tuple(parts))


def _grid_values(resolution: float) -> np.ndarray:
    if not 0.0 < resolution < 1.0:
        raise InputError(f"resolution must lie in (0, 1), got {resolution}")
    steps = 1.0 / resolution
    if abs(steps - round(steps)) < 1e-9:
        return np.linspace(0.0, 1.0, int(round(steps)) + 1)
    vals = np.arange(0.0, 1.0 + 1e-12, resolution)
    if vals[-1] < 1.0 - 1e-12:
        vals = np.append(vals, 1.0)
    return np.clip(vals, 0.0, 1.0)


def _location_combos(values: np.ndarray, num_states: int) -> np.ndarray:
    grids = np.meshgrid(*([values] * num_states), indexing="ij")
    return np.stack(grids, axis=-1).reshape(-1, num_states)


def grid_search_decentralized(
    system: SystemModel,
    resolution: float,
    *,
    obedient_only: bool = False,
) -> tuple[DecentralizedMechanism, float]:
    """Enumerate binary-signal decentralized mechanisms on a parameter grid.

    Every sigma_k(1|w_k) ranges over {0, resolution, ..., 1}.  By default
    each candidate is scored by best response plus exact evaluation, so
    the result is a lower bound on the optimal decentralized throughput.
    With ``obedient_only`` (independent priors only) candidates are
    filtered to those admitting an optimal join-on-1 strategy and scored
    by the closed-form product throughput.
    """
    require_valid(system)
    sizes = system.state_sizes
    if sum(sizes) > GRID_PARAM_LIMIT:
        raise InputError(
            f"grid search needs at most {GRID_PARAM_LIMIT} parameters, "
            f"instance has {sum(sizes)}"
        )
    independent = system.prior_mode == "independent"
    if obedient_only and not independent:
        raise InputError("the obedience filter applies to independent priors only")

    values = _grid_values(resolution)
    num_locs = system.num_locations
    combos = [_location_combos(values, n) for n in sizes]
    counts = [c.shape[0] for c in combos]
    total = math.prod(counts)

    priors = [loc.prior_array() for loc in system.locations]
    utils = [loc.utility_array() for loc in system.locations]
    # Per-combo aggregates: column u is the signal-u mass (and utility mass).
    agg_p = []
    agg_w = []
    for k in range(num_locs):
        x = combos[k]
        agg_p.append(np.column_stack([(1.0 - x) @ priors[k], x @ priors[k]]))
        agg_w.append(
            np.column_stack(
                [(1.0 - x) @ (priors[k] * utils[k]), x @ (priors[k] * utils[k])]
            )
        )

    signals = list(np.ndindex(*([2] * num_locs)))  # u tuples, last index fastest
    priority = _action_priority(system.payoffs)

    obedient_masks = None
    cond_i_masks = None
    if obedient_only:
        obedient_masks = [
            (agg_w[k][:, 1] >= -PROB_TOL) & (agg_w[k][:, 0] <= PROB_TOL)
            for k in range(num_locs)
        ]
        cond_i_masks = []
        for k in range(num_locs):
            never_zero = np.max(priors[k][None, :] * (1.0 - combos[k]), axis=1) <= ZERO_MASS
            mean_util = float(np.dot(priors[k], utils[k]))
            if mean_util < -PROB_TOL:
                cond_i_masks.append(None)
                continue
            cross = [
                agg_p[l][:, 0] * mean_util >= agg_w[l][:, 0] - PROB_TOL
                for l in range(num_locs)
                if l != k
            ]
            cond_i_masks.append((never_zero, cross))

    if not independent:
        mu = system.joint_vector
        util_cols = [mu * system.utility_matrix[:, k] for k in range(num_locs)]
        state_cols = [system.state_index_matrix[:, k] for k in range(num_locs)]

    always_join_on_tie = min(system.payoffs) > 0.0
    best_value = -math.inf
    best_flat = 0
    for start in range(0, total, _BATCH):
        ids = np.arange(start, min(start + _BATCH, total))
        rows = []
        rem = ids
        for k in range(num_locs):
            rows.append(rem % counts[k])
            rem = rem // counts[k]

        if obedient_only:
            cond_ii = np.ones(ids.size, dtype=bool)
            for k in range(num_locs):
                cond_ii &= obedient_masks[k][rows[k]]
            allowed = cond_ii
            for k in range(num_locs):
                if cond_i_masks[k] is None:
                    continue
                never_zero, cross = cond_i_masks[k]
                mask = never_zero[rows[k]].copy()
                others = [l for l in range(num_locs) if l != k]
                for cross_mask, l in zip(cross, others):
                    mask &= cross_mask[rows[l]]
                allowed |= mask
            miss = np.ones(ids.size)
            for k in range(num_locs):
                miss *= agg_p[k][rows[k], 0]
            scores = np.where(allowed, 1.0 - miss, -math.inf)
        else:
            if independent:
                got_p = [agg_p[k][rows[k]] for k in range(num_locs)]
                got_w = [agg_w[k][rows[k]] for k in range(num_locs)]
            else:
                state_probs = [
                    combos[k][rows[k]][:, state_cols[k]] for k in range(num_locs)
                ]
            scores = np.zeros(ids.size)
            for u in signals:
                if independent:
                    factors = [got_p[k][:, u[k]] for k in range(num_locs)]
                    prob = factors[0].copy()
                    for f in factors[1:]:
                        prob = prob * f
                    wins = []
                    for a in range(num_locs):
                        w = got_w[a][:, u[a]].copy()
                        for k in range(num_locs):
                            if k != a:
                                w *= factors[k]
                        wins.append(w)
                else:
                    sig = np.ones((ids.size, system.state_count))
                    for k in range(num_locs):
                        col = state_probs[k]
                        sig *= col if u[k] == 1 else 1.0 - col
                    prob = sig @ mu
                    wins = [sig @ util_cols[a] for a in range(num_locs)]
                valid = prob > ZERO_MASS
                if always_join_on_tie:
                    # With every payoff positive, the system-favoring best
                    # response joins exactly when some location's posterior
                    # clears the tie tolerance.
                    top = wins[0].copy()
                    for w in wins[1:]:
                        np.maximum(top, w, out=top)
                    joins = top >= -TIE_TOL * prob
                else:
                    safe = np.where(valid, prob, 1.0)
                    utilities = np.column_stack(
                        [np.zeros(ids.size)] + [w / safe for w in wins]
                    )
                    eligible = (
                        utilities >= utilities.max(axis=1, keepdims=True) - TIE_TOL
                    )
                    chosen = np.zeros(ids.size, dtype=int)
                    for action in reversed(priority):
                        chosen[eligible[:, action]] = action
                    joins = chosen != 0
                scores += np.where(valid & joins, prob, 0.0)

        arg = int(np.argmax(scores))
        if scores[arg] > best_value:
            best_value = float(scores[arg])
            best_flat = start + arg

    rem = best_flat
    chosen_probs = []
    for k in range(num_locs):
        chosen_probs.append(combos[k][rem % counts[k]])
        rem //= counts[k]
    return binary_mechanism(chosen_probs), best_value
