"""Centralized LP construction and solution tests."""

import numpy as np
import pytest

from sigmech.bounds import make_correlated_instance, make_tightness_instance
from sigmech.centralized import build_centralized_lp, obedient_strategy, solve_centralized
from sigmech.decentralized import compose_optimal
from sigmech.instances import random_independent_system
from sigmech.lp import EQUAL, GREATER, LESS
from sigmech.model import LocationModel, SystemModel
from sigmech.oracle import best_response, evaluate, full_information, no_information


def single_location(p=0.2):
    return SystemModel(
        (LocationModel("a", ("bad", "good"), (1.0 - p, p), (-1.0, 1.0)),)
    )


def _constraint_counts(lp):
    kinds = {LESS: 0, GREATER: 0, EQUAL: 0}
    for con in lp.constraints:
        kinds[con.relation] += 1
    return kinds


def test_lp_dimensions_single_location():
    lp = build_centralized_lp(single_location())
    assert lp.n_vars == 4  # 2 states x 2 actions
    kinds = _constraint_counts(lp)
    assert kinds[GREATER] == 2  # k=l deviation row (trivial) + join row
    assert kinds[LESS] == 1
    assert kinds[EQUAL] == 2


def test_lp_dimensions_two_binary_locations():
    lp = build_centralized_lp(make_tightness_instance(2, 3.0).system)
    assert lp.n_vars == 12  # 4 states x 3 actions
    kinds = _constraint_counts(lp)
    assert kinds[GREATER] == 4 + 2
    assert kinds[LESS] == 2
    assert kinds[EQUAL] == 4


def test_lp_dimensions_correlated_pair():
    lp = build_centralized_lp(make_correlated_instance(2, 10.0))
    assert lp.n_vars == 27  # 9 states x 3 actions


def test_single_location_throughput():
    mech, report = solve_centralized(single_location())
    assert report.throughput == pytest.approx(0.4, abs=1e-9)
    # good state always recommended, bad state a quarter of the time
    table = mech.table.reshape(2, 2)
    assert table[1, 1] == pytest.approx(1.0, abs=1e-9)
    assert table[0, 1] == pytest.approx(0.25, abs=1e-9)


def test_critical_prior_reaches_full_throughput():
    inst = make_tightness_instance(2, 3.0)
    _, report = solve_centralized(inst.system)
    assert report.throughput == pytest.approx(1.0, abs=1e-7)


def test_all_nonnegative_utilities_join_always():
    system = SystemModel(
        (LocationModel("a", ("s0", "s1"), (0.5, 0.5), (0.5, 2.0)),)
    )
    _, report = solve_centralized(system)
    assert report.throughput == pytest.approx(1.0, abs=1e-9)


def test_weighted_objective_uses_payoffs():
    locs = (
        LocationModel("a", ("bad", "good"), (0.8, 0.2), (-1.0, 1.0), payoff=2.0),
        LocationModel("b", ("bad", "good"), (0.8, 0.2), (-1.0, 1.0), payoff=1.0),
    )
    system = SystemModel(locs)
    _, weighted = solve_centralized(system, weighted=True)
    _, unweighted = solve_centralized(system)
    assert weighted.value >= unweighted.value - 1e-9
    assert weighted.value >= weighted.throughput - 1e-9


def test_weighted_mode_allows_nonpositive_payoffs():
    locs = (
        LocationModel("good", ("bad", "good"), (0.8, 0.2), (-1.0, 1.0), payoff=1.0),
        LocationModel("toxic", ("bad", "good"), (0.8, 0.2), (-1.0, 1.0), payoff=-1.0),
    )
    system = SystemModel(locs)
    _, report = solve_centralized(system, weighted=True)
    assert report.value >= 0.4 - 1e-7  # at least the single-location optimum
    assert report.per_location_throughput[1] <= 1e-7  # never pays to send there


def test_obedience_feasibility_of_returned_mechanism():
    rng = np.random.default_rng(21)
    for _ in range(25):
        system = random_independent_system(rng, (1, 3), (2, 3))
        mech, report = solve_centralized(system)
        assert report.worst_slack >= -1e-7
        assert report.strategy_optimal
        mu = system.joint_vector
        util = system.utility_matrix
        k = system.num_locations
        for a in range(1, k + 1):
            mass = mu * mech.table[:, a]
            own = float(mass @ util[:, a - 1])
            assert own >= -1e-7
            for other in range(k):
                assert own >= float(mass @ util[:, other]) - 1e-7
            leave_mass = mu * mech.table[:, 0]
            assert float(leave_mass @ util[:, a - 1]) <= 1e-7


def test_reported_throughput_matches_reevaluation_and_baselines():
    rng = np.random.default_rng(22)
    for _ in range(25):
        system = random_independent_system(rng, (1, 3), (2, 3))
        mech, report = solve_centralized(system)
        again = evaluate(system, mech, obedient_strategy(system.num_locations))
        assert abs(report.throughput - again.throughput) <= 1e-12
        for baseline in (full_information(system), no_information(system)):
            base = evaluate(system, baseline, best_response(system, baseline))
            assert report.throughput >= base.throughput - 1e-7


def test_utility_scaling_leaves_throughput_unchanged():
    rng = np.random.default_rng(23)
    for _ in range(10):
        system = random_independent_system(rng, (1, 3), (2, 3))
        scale = float(rng.uniform(0.1, 50.0))
        scaled = SystemModel(
            tuple(
                LocationModel(
                    loc.name,
                    loc.states,
                    loc.prior,
                    tuple(scale * h for h in loc.utility),
                    loc.payoff,
                )
                for loc in system.locations
            )
        )
        _, base = solve_centralized(system)
        _, other = solve_centralized(scaled)
        assert abs(base.throughput - other.throughput) <= 1e-7


def test_centralized_dominates_decentralized_on_independent_instances():
    rng = np.random.default_rng(24)
    for _ in range(15):
        system = random_independent_system(rng, (1, 4), (2, 3))
        _, central = solve_centralized(system)
        _, _, dec = compose_optimal(system)
        assert central.throughput >= dec.throughput - 1e-7


def test_lp_optimum_matches_vertex_enumeration_on_tiny_systems():
    from test_lp import enumerate_vertices

    rng = np.random.default_rng(25)
    for _ in range(15):
        system = random_independent_system(rng, 1, (2, 3))
        lp = build_centralized_lp(system)
        oracle_value, _ = enumerate_vertices(lp)
        _, report = solve_centralized(system)
        assert oracle_value is not None
        assert abs(report.throughput - oracle_value) <= 1e-7
