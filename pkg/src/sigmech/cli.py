"""Command-line front end: solve instances, compare mechanism families,
verify the guarantee suites on random instances, and sweep the bound
constants to CSV.

Exit codes: 0 success, 1 verify-suite failure, 2 parse/validation error,
3 precondition error (e.g. payoff-weighted mode without negative
prior-mean utilities, or decentralized mode on a joint-prior instance
without --fallback).
"""

from __future__ import annotations

import csv
import io
import sys

import click
import numpy as np

from . import bounds, centralized, decentralized, oracle
from .instances import (
    ParseError,
    format_instance,
    random_independent_system,
    random_joint_system,
    read_instance,
)
from .model import (
    CentralizedMechanism,
    CustomerStrategy,
    DecentralizedMechanism,
    InputError,
    PreconditionError,
    SystemModel,
    binary_mechanism,
    require_valid,
)

# Largest K for which sweep/compare run the centralized LP on the
# correlated generator (3^K states gets expensive quickly).
LP_SIZE_CAP = 4


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load(path: str) -> SystemModel:
    try:
        system = read_instance(path)
        require_valid(system)
        return system
    except ParseError as err:
        _fail(str(err), 2)
    except PreconditionError as err:
        _fail(str(err), 3)
    except InputError as err:
        _fail(str(err), 2)


def _deliver(ctx: click.Context, text: str) -> None:
    output = ctx.obj.get("output")
    if output:
        with open(output, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        click.echo(text, nl=False)


def _parse_range(text: str) -> tuple[int, int]:
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo), int(hi)
        else:
            lo = hi = int(text)
    except ValueError:
        raise InputError(f"bad range {text!r}; expected forms like 3 or 2..5") from None
    if lo < 1 or hi < lo:
        raise InputError(f"bad range {text!r}")
    return lo, hi


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise InputError(f"bad number list {text!r}") from None


def _fmt(value: float) -> str:
    return format(value, ".9g")


def _centralized_lines(system: SystemModel, mech: CentralizedMechanism) -> list[str]:
    lines = ["mechanism (rows are state tuples, columns signals "
             f"{' '.join(str(s) for s in mech.signals)}):"]
    for flat in range(system.state_count):
        labels = tuple(
            loc.states[i]
            for loc, i in zip(system.locations, system.state_index_matrix[flat])
        )
        row = " ".join(f"{v:.6f}" for v in mech.table[flat])
        lines.append(f"  {'/'.join(labels)}: {row}")
    return lines


def _decentralized_lines(system: SystemModel, mech: DecentralizedMechanism) -> list[str]:
    lines = []
    for loc, part in zip(system.locations, mech.parts):
        lines.append(
            f"location {loc.name} (signals {' '.join(str(s) for s in part.signals)}):"
        )
        for i, state in enumerate(loc.states):
            row = " ".join(f"{v:.6f}" for v in part.table[i])
            lines.append(f"  {state}: {row}")
    return lines


@click.group()
@click.option("--tolerance", type=float, default=1e-7, show_default=True,
              help="Slack tolerance for guarantee checks.")
@click.option("--summary", is_flag=True, help="Suppress mechanism tables.")
@click.option("--output", type=click.Path(dir_okay=False), default=None,
              help="Write the report or CSV to this file instead of stdout.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for randomized suites.")
@click.pass_context
def main(ctx, tolerance, summary, output, seed):
    """Optimal centralized and decentralized signaling for multi-location systems."""
    ctx.obj = {
        "tolerance": tolerance,
        "summary": summary,
        "output": output,
        "seed": seed,
    }


@main.command()
@click.argument("instance", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(
    ["centralized", "decentralized", "heterogeneous", "full-info", "no-info"]),
    default="centralized", show_default=True)
@click.option("--fallback", is_flag=True,
              help="On joint-prior instances, run the guaranteed-fraction "
                   "fallback instead of refusing decentralized mode.")
@click.option("--summary", "summary_here", is_flag=True,
              help="Suppress mechanism tables (same as the global flag).")
@click.pass_context
def solve(ctx, instance, mode, fallback, summary_here):
    """Solve one instance and print throughput/value and the mechanism."""
    system = _load(instance)
    summary = ctx.obj["summary"] or summary_here
    lines = [f"mode: {mode}"]
    try:
        if mode == "centralized":
            mech, report = centralized.solve_centralized(system)
            lines.append(f"Th = {report.throughput:.6f}")
            lines.append(
                "T_k = " + " ".join(f"{v:.6f}" for v in report.per_location_throughput)
            )
            if not summary:
                lines += _centralized_lines(system, mech)
        elif mode == "decentralized":
            if system.prior_mode == "joint":
                if not fallback:
                    raise PreconditionError(
                        "decentralized mode on a joint-prior instance is only a "
                        "guaranteed-fraction construction; pass --fallback to run it"
                    )
                central, report = centralized.solve_centralized(system)
                mech = decentralized.correlated_fallback(system, central)
                strategy = oracle.best_response(system, mech)
                fb = oracle.evaluate(system, mech, strategy)
                lines.append(f"Th_fallback = {fb.throughput:.6f}")
                lines.append(f"Th_centralized = {report.throughput:.6f}")
                lines.append(f"guarantee = Th_centralized/K = "
                             f"{report.throughput / system.num_locations:.6f}")
                if not summary:
                    lines += _decentralized_lines(system, mech)
            else:
                mech, _, report = decentralized.compose_optimal(system)
                iso = [
                    decentralized.solve_isolated(loc, k).th_iso
                    for k, loc in enumerate(system.locations)
                ]
                lines.append(f"Th_D = {report.throughput:.6f}")
                lines.append("Th_iso = " + " ".join(f"{v:.6f}" for v in iso))
                lines.append(
                    "T_k = "
                    + " ".join(f"{v:.6f}" for v in report.per_location_throughput)
                )
                if not summary:
                    lines += _decentralized_lines(system, mech)
        elif mode == "heterogeneous":
            if system.prior_mode == "joint":
                raise PreconditionError(
                    "heterogeneous mode needs an independent-prior instance"
                )
            mech, strategy, value = decentralized.heterogeneous_compose(system)
            report = oracle.evaluate(system, mech, strategy)
            lines.append(f"Val = {value:.6f}")
            lines.append(f"Th = {report.throughput:.6f}")
            lines.append(
                "T_k = " + " ".join(f"{v:.6f}" for v in report.per_location_throughput)
            )
            if not summary:
                lines += _decentralized_lines(system, mech)
        else:
            mech = (
                oracle.full_information(system)
                if mode == "full-info"
                else oracle.no_information(system)
            )
            strategy = oracle.best_response(system, mech)
            report = oracle.evaluate(system, mech, strategy)
            lines.append(f"Th = {report.throughput:.6f}")
            lines.append(
                "T_k = " + " ".join(f"{v:.6f}" for v in report.per_location_throughput)
            )
    except PreconditionError as err:
        _fail(str(err), 3)
    _deliver(ctx, "\n".join(lines) + "\n")


@main.command()
@click.argument("instance", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def compare(ctx, instance):
    """CSV comparison of mechanism families on one instance."""
    system = _load(instance)
    k = system.num_locations
    central_mech, report = centralized.solve_centralized(system)
    central_th = report.throughput

    def ratio(th: float) -> float:
        if central_th > 0.0:
            return th / central_th
        return 1.0 if th <= 0.0 else float("inf")

    rows = [("centralized", central_th, ratio(central_th), "")]
    if system.prior_mode == "independent":
        _, _, dec = decentralized.compose_optimal(system)
        rows.append(
            (
                "decentralized",
                dec.throughput,
                ratio(dec.throughput),
                _fmt(bounds.independence_guarantee(k)),
            )
        )
    else:
        fb_mech = decentralized.correlated_fallback(system, central_mech)
        fb = oracle.evaluate(system, fb_mech, oracle.best_response(system, fb_mech))
        rows.append(("fallback", fb.throughput, ratio(fb.throughput), _fmt(1.0 / k)))
    for name, mech in (
        ("full-info", oracle.full_information(system)),
        ("no-info", oracle.no_information(system)),
    ):
        rep = oracle.evaluate(system, mech, oracle.best_response(system, mech))
        rows.append((name, rep.throughput, ratio(rep.throughput), ""))

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["name", "throughput", "ratio_to_centralized", "guarantee"])
    for name, th, rat, guarantee in rows:
        writer.writerow([name, _fmt(th), _fmt(rat), guarantee])
    _deliver(ctx, buffer.getvalue())


@main.command()
@click.argument("suite", type=click.Choice(
    ["independent-bound", "tightness", "correlated-bound", "lemmas"]))
@click.option("--K", "k_range", default="2..4", show_default=True,
              help="Location-count range, e.g. 3 or 2..5.")
@click.option("--X", "x_list", default="2,3,10", show_default=True,
              help="Utility scale list for the tightness suite.")
@click.option("--trials", type=int, default=100, show_default=True)
@click.option("--seed", "seed_override", type=int, default=None,
              help="Override the global --seed.")
@click.pass_context
def verify(ctx, suite, k_range, x_list, trials, seed_override):
    """Run a property suite on seeded random instances; exit 1 on failure."""
    tol = ctx.obj["tolerance"]
    seed = ctx.obj["seed"] if seed_override is None else seed_override
    try:
        k_lo, k_hi = _parse_range(k_range)
        xs = _parse_floats(x_list)
    except InputError as err:
        _fail(str(err), 2)

    lines: list[str] = []
    failures: list[str] = []
    suite_ok = True
    if suite == "tightness" and k_lo < 2:
        _fail("the tightness suite needs at least two locations (--K 2..)", 2)
    if suite == "correlated-bound" and k_lo < 2:
        _fail("the correlated-bound suite needs at least two locations (--K 2..)", 2)

    def record(name: str, results: list[tuple[bool, float]]) -> None:
        nonlocal suite_ok
        passed = sum(1 for ok, _ in results if ok)
        suite_ok = suite_ok and passed == len(results)
        lines.append(f"{name}: {passed}/{len(results)} pass")
        if results:
            worst = min(slack for _, slack in results) + 0.0  # normalize -0.0
            lines.append(f"worst slack: {format(worst, '.9e')}")

    if suite == "independent-bound":
        lines.append(
            f"suite independent-bound seed={seed} trials={trials} "
            f"K={k_range} tolerance={tol:.0e}"
        )
        results = []
        for t in range(trials):
            rng = np.random.default_rng([seed, 1, t])
            system = random_independent_system(rng, (k_lo, k_hi), (2, 3))
            _, central = centralized.solve_centralized(system)
            _, _, dec = decentralized.compose_optimal(system)
            slack = dec.throughput - bounds.independence_guarantee(
                system.num_locations
            ) * central.throughput
            results.append((slack >= -tol, slack))
            if slack < -tol and not failures:
                failures.append(format_instance(system))
        record("decentralized >= guarantee * centralized", results)
    elif suite == "tightness":
        lines.append(
            f"suite tightness K={k_range} X={x_list} tolerance={tol:.0e}"
        )
        central_results = []
        closed_results = []
        for k in range(k_lo, k_hi + 1):
            for x in xs:
                inst = bounds.make_tightness_instance(k, x)
                _, central = centralized.solve_centralized(inst.system)
                gap = -abs(central.throughput - inst.predicted_throughput)
                central_results.append((gap >= -tol, gap))
                _, _, dec = decentralized.compose_optimal(inst.system)
                closed = -abs(dec.throughput - inst.predicted_decentralized)
                closed_results.append((closed >= -1e-6, closed))
                if (gap < -tol or closed < -1e-6) and not failures:
                    failures.append(format_instance(inst.system))
        record("centralized throughput = 1", central_results)
        record("closed-form decentralized match (1e-06)", closed_results)
    elif suite == "correlated-bound":
        lines.append(
            f"suite correlated-bound seed={seed} trials={trials} "
            f"K={k_range} tolerance={tol:.0e}"
        )
        results = []
        for t in range(trials):
            rng = np.random.default_rng([seed, 2, t])
            k = int(rng.integers(k_lo, k_hi + 1))
            system = random_joint_system(rng, k, 2)
            central_mech, central = centralized.solve_centralized(system)
            fb_mech = decentralized.correlated_fallback(system, central_mech)
            fb = oracle.evaluate(
                system, fb_mech, oracle.best_response(system, fb_mech)
            )
            slack = fb.throughput - central.throughput / k
            results.append((slack >= -tol, slack))
            if slack < -tol and not failures:
                failures.append(format_instance(system))
        record("fallback >= centralized / K", results)
    else:  # lemmas
        lines.append(f"suite lemmas seed={seed} trials={trials}")
        product_trials = min(500, trials)
        product_results = []
        for t in range(product_trials):
            rng = np.random.default_rng([seed, 3, t])
            system = random_independent_system(rng, (2, 4), (2, 3))
            probs = [
                rng.uniform(0.0, 1.0, loc.num_states) for loc in system.locations
            ]
            mech = binary_mechanism(probs)
            strategy = _random_join_on_one(rng, system, mech)
            report = oracle.evaluate(system, mech, strategy)
            closed = 1.0
            for loc, p in zip(system.locations, probs):
                closed *= 1.0 - float(np.dot(loc.prior_array(), p))
            gap = -abs(report.throughput - (1.0 - closed))
            product_results.append((gap >= -1e-9, gap))
        record("product throughput formula (1e-09)", product_results)

        gap_results = []
        for t in range(trials):
            rng = np.random.default_rng([seed, 4, t])
            k = int(rng.integers(2, 7))
            raw = rng.uniform(0.0, 1.0, k)
            shares = raw / raw.sum() * rng.uniform(0.0, 1.0)
            gap = bounds.union_guarantee_gap(tuple(shares))
            gap_results.append((gap >= -1e-12, gap))
        record("union guarantee gap >= -1e-12", gap_results)

        envelope_results = []
        for k in range(2, 33):
            _, value = bounds.max_join_bound(k, mode="symmetric")
            gap = -abs(value - k * bounds.solve_balanced_share(k))
            envelope_results.append((gap >= -1e-9, gap))
        record("symmetric envelope (1e-09)", envelope_results)

    if failures:
        lines.append("offending instance:")
        lines.append(failures[0])
    lines.append("RESULT " + ("PASS" if suite_ok else "FAIL"))
    _deliver(ctx, "\n".join(lines) + "\n")
    if not suite_ok:
        sys.exit(1)


def _random_join_on_one(rng, system, mech) -> CustomerStrategy:
    """Random strategy that joins a uniformly drawn location among those
    signaling 1 and leaves only on the all-zero vector."""
    labels = mech.joint_signals()
    rows = np.zeros((len(labels), system.num_locations + 1))
    for row, u in enumerate(labels):
        ones = [k for k, bit in enumerate(u) if bit == 1]
        if not ones:
            rows[row, 0] = 1.0
        else:
            rows[row, int(rng.choice(ones)) + 1] = 1.0
    return CustomerStrategy(tuple(labels), rows, class_fd=True)


@main.command()
@click.argument("generator", type=click.Choice(["tightness", "correlated"]))
@click.option("--K", "k_range", default="2..4", show_default=True)
@click.option("--X", "x_list", default="1000", show_default=True,
              help="Utility scale (tightness) or penalty (correlated).")
@click.pass_context
def sweep(ctx, generator, k_range, x_list):
    """CSV sweep of computed throughputs against the bound constants."""
    try:
        k_lo, k_hi = _parse_range(k_range)
        xs = _parse_floats(x_list)
    except InputError as err:
        _fail(str(err), 2)
    if k_lo < 2:
        _fail("sweeps need at least two locations (--K 2..)", 2)
    if generator == "tightness" and any(x <= 1.0 for x in xs):
        _fail("tightness sweeps need utility scales above 1 (--X)", 2)

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        ["K", "X", "Th", "Th_D", "ratio", "independence_guarantee",
         "one_over_K", "correlated_upper_bound"]
    )
    for k in range(k_lo, k_hi + 1):
        consts = [
            _fmt(bounds.independence_guarantee(k)),
            _fmt(1.0 / k),
            _fmt(bounds.correlated_upper_bound(k)) if k >= 2 else "",
        ]
        if generator == "tightness":
            for x in xs:
                inst = bounds.make_tightness_instance(k, x)
                _, central = centralized.solve_centralized(inst.system)
                _, _, dec = decentralized.compose_optimal(inst.system)
                th, th_d = central.throughput, dec.throughput
                rat = th_d / th if th > 0 else 1.0
                writer.writerow([k, _fmt(x), _fmt(th), _fmt(th_d), _fmt(rat)] + consts)
        else:
            usable = [x for x in xs if x > k]
            if k <= LP_SIZE_CAP and usable:
                x = usable[0]
                system = bounds.make_correlated_instance(k, x)
                central_mech, central = centralized.solve_centralized(system)
                fb_mech = decentralized.correlated_fallback(system, central_mech)
                fb = oracle.evaluate(
                    system, fb_mech, oracle.best_response(system, fb_mech)
                )
                th, th_d = central.throughput, fb.throughput
                rat = th_d / th if th > 0 else 1.0
                writer.writerow([k, _fmt(x), _fmt(th), _fmt(th_d), _fmt(rat)] + consts)
            else:
                writer.writerow([k, "", "", "", ""] + consts)
    _deliver(ctx, buffer.getvalue())


if __name__ == "__main__":
    main()
