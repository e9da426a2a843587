"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python3 tests/test_acceptance.py``.
"""

import time

import numpy as np
import pytest

from cpekit.bench import FlopModel, crossover_threshold, flop_costs
from cpekit.control import build_behavioral_basis, represent_trajectory, synthesize_gain
from cpekit.design import DesignRequest, design_signals, minimal_lengths, verify_design
from cpekit.experiments import (
    MODES,
    designed_records,
    distributed_scenario,
    feedback_only_identifier,
    ls_error,
    ls_noise_sweep,
    mode_for,
    mpc_scenario,
    random_stabilization_case,
    weighting_comparison,
)
from cpekit.hankel import CompositionMode, hankel_matrix
from cpekit.identification import (
    DistributedState,
    IdentifierState,
    check_convergence_conditions,
    fit_log_linear,
    run_adaptive,
    run_distributed,
)
from cpekit.informativity import check_pe, stacked_state_input, verify_transformations
from cpekit.linalg import numeric_rank
from cpekit.trajectories import (
    GraphTopology,
    TrajectoryBundle,
    builtin_system,
    default_topology,
    make_rng,
    simulate_lti,
)


@pytest.fixture
def report(capsys):
    def emit(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        assert ok, detail

    return emit


# --- 1: design soundness ---------------------------------------------------

def _random_valid_request(rng, index):
    mode_name = MODES[index % 3]
    m = int(rng.integers(1, 4))
    L = int(rng.integers(2, 7))
    p = int(rng.integers(2, 9))
    Tc = (m + 1) * L - 1
    if mode_name == "cumulative":
        T0 = Tc + int(rng.integers(0, 4))
        return DesignRequest(m, L, (T0,) * p, CompositionMode.cumulative(), rng_seed=index)
    if mode_name == "mosaic":
        mode = CompositionMode.mosaic()
        bound = minimal_lengths("mosaic", m, L, p)
        lengths = list(rng.integers(L, Tc, size=p))
    else:
        p_bar = int(rng.integers(1, p + 1))
        mode = CompositionMode.hybrid(p_bar)
        bound = minimal_lengths("hybrid", m, L, p, p_bar)
        top = Tc + 3 if p_bar >= 2 else Tc
        T0 = int(rng.integers(L, top))
        lengths = [T0] * p_bar + list(rng.integers(L, Tc, size=p - p_bar))
    # grow members one sample at a time until the bound holds
    order = rng.permutation(p)
    k = 0
    while not bound.satisfied(lengths):
        i = int(order[k % p])
        k += 1
        if mode.variant == "hybrid" and i < mode.shared_prefix:
            if lengths[0] + 1 >= Tc and mode.shared_prefix < 2:
                continue
            lengths[: mode.shared_prefix] = [lengths[0] + 1] * mode.shared_prefix
        elif lengths[i] + 1 < Tc:
            lengths[i] += 1
    weights = tuple(rng.choice([-1, 1]) * rng.uniform(0.5, 2.0, p))
    return DesignRequest(m, L, tuple(int(T) for T in lengths), mode, weights, rng_seed=index)


def test_criterion_1_design_soundness(report):
    rng = make_rng(2024)
    t0 = time.perf_counter()
    failures = []
    for i in range(500):
        req = _random_valid_request(rng, i)
        bundle, _ = design_signals(req)
        ok, _ = verify_design(bundle, req)
        if not ok:
            failures.append(req)
    elapsed = time.perf_counter() - t0
    report(1, not failures and elapsed < 60, f"{500 - len(failures)}/500 designs verified in {elapsed:.1f} s")


# --- 2: worked complexity example -------------------------------------------

def test_criterion_2_worked_example(report):
    req = DesignRequest(2, 5, (7, 7, 6, 6, 5), CompositionMode.mosaic(), rng_seed=0)
    bundle, _ = design_signals(req)
    ok, rep = verify_design(bundle, req)
    C = sum(T - 5 + 1 for T in req.lengths)
    model = FlopModel.from_lengths(2, 5, [14], req.lengths)
    kth = crossover_threshold(C, 10)
    good = ok and C == 11 and rep.rank_report.numeric_rank == 10 and kth == 2
    good = good and model.total_mosaic_columns == 11 and flop_costs(model)["mcpe"] == 1100
    report(2, good, f"C = {C}, rank {rep.rank_report.numeric_rank}, K_th = {kth}")


# --- 3: implications between the notions -----------------------------------

def _random_equal_bundle(rng):
    m = int(rng.integers(1, 4))
    L = int(rng.integers(2, 6))
    p = int(rng.integers(2, 6))
    kind = rng.integers(0, 3)
    if kind == 0:
        # just around the column count where excitation becomes possible
        T = max(L, int(np.ceil(m * L / p)) + L - 1 + int(rng.integers(-1, 3)))
        members = [rng.standard_normal((T, m)) for _ in range(p)]
    elif kind == 1:
        # sums of few sinusoids: excitation often deficient
        T = (m + 1) * L - 1 + int(rng.integers(0, 4))
        t = np.arange(T)[:, None]
        members = []
        for _ in range(p):
            w = rng.uniform(0, np.pi, (1, m))
            members.append(np.cos(w * t + rng.uniform(0, 2 * np.pi, (1, m))))
    else:
        T = (m + 1) * L - 1
        req = DesignRequest.cumulative(m, L, p, T, seed=int(rng.integers(1 << 30)))
        members = [z.samples for z in design_signals(req)[0].members]
    weights = rng.choice([-1, 1], p) * rng.uniform(0.5, 2.0, p)
    p_bar = int(rng.integers(1, p + 1))
    return TrajectoryBundle(tuple(members), tuple(weights), p_bar), L


def test_criterion_3_implications(report):
    rng = make_rng(7)
    t0 = time.perf_counter()
    counter = 0
    held = {"ccpe": 0, "hcpe": 0}
    for _ in range(1000):
        bundle, L = _random_equal_bundle(rng)
        rep = verify_transformations(bundle, L)
        imp = rep.implications()
        counter += sum(imp[k] is False for k in ("ccpe=>mcpe", "ccpe=>hcpe", "hcpe=>mcpe"))
        held["ccpe"] += bool(rep.ccpe_holds)
        held["hcpe"] += bool(rep.hcpe_holds)
    elapsed = time.perf_counter() - t0
    good = counter == 0 and elapsed < 120 and held["ccpe"] > 0 and held["hcpe"] > 0
    report(3, good, f"{counter} counterexamples in 1000 bundles ({held} hypotheses held), {elapsed:.1f} s")


# --- 4: stacked state/input rank ------------------------------------------

def test_criterion_4_rank_lemma(report):
    sys = builtin_system("batch_reactor")
    n, m = sys.n, sys.m
    worst, misses = np.inf, 0
    for L in (1, 3, 5):
        for name in MODES:
            for seed in range(50):
                recs, bundle, _ = designed_records(sys, name, seed, order=L + n)
                M = stacked_state_input(recs, L, mode_for(name), bundle.weights)
                s = numeric_rank(M).singular_values
                k = n + m * L
                ratio = s[k - 1] / s[0] if len(s) >= k else 0.0
                worst = min(worst, ratio)
                misses += numeric_rank(M).numeric_rank != k or not ratio > 1e-9
    report(4, misses == 0, f"{450 - misses}/450 exact rank n+mL, worst sigma ratio {worst:.2e}")


# --- 5: trajectory representation ------------------------------------------

def test_criterion_5_representation(report):
    sys = builtin_system("batch_reactor")
    rng = make_rng(55)
    worst, trials, fails = 0.0, 0, 0
    for name in MODES:
        for seed in range(4):
            L = 3 + seed
            recs, bundle, _ = designed_records(sys, name, seed, order=L + sys.n)
            basis = build_behavioral_basis(recs, L, mode_for(name), bundle.weights, sys=sys)
            for _ in range(17):
                rec = simulate_lti(sys, rng.standard_normal(sys.n), rng.standard_normal((L, sys.m)))
                rep = represent_trajectory(basis, rec.x[:L], rec.u)
                worst = max(worst, rep.residual)
                fails += rep.residual > 1e-8
                trials += 1
    report(5, fails == 0 and trials >= 200, f"{trials} trials, worst residual {worst:.2e}")


# --- 6: least squares identification ---------------------------------------

def test_criterion_6_least_squares(report):
    sys = builtin_system("batch_reactor")
    exact = {name: max(ls_error(sys, name, s) for s in range(10)) for name in MODES}
    sigmas = [0.0, 0.02, 0.04, 0.06, 0.08, 0.1]
    sweep = ls_noise_sweep(sigmas, range(100))
    means = {name: sweep[name].mean(axis=1) for name in MODES}
    monotone = all(np.all(np.diff(v) >= 0) for v in means.values())
    good = all(e <= 1e-8 for e in exact.values()) and monotone
    detail = ", ".join(f"{k}: exact {exact[k]:.1e}, means {np.round(means[k], 4).tolist()}" for k in MODES)
    report(6, good, detail)


# --- 7: weighting -----------------------------------------------------------

def test_criterion_7_weighting(report):
    pairs = np.array([weighting_comparison(s) for s in range(100)])
    wins = int(np.sum(pairs[:, 1] <= pairs[:, 0]))
    report(7, wins >= 90, f"compensating weights no worse on {wins}/100 seeds")


# --- 8: gain synthesis ------------------------------------------------------

def test_criterion_8_gain_synthesis(report):
    sys = builtin_system("batch_reactor")
    radii = []
    for name in MODES:
        for seed in range(50):
            recs, bundle, _ = designed_records(sys, name, seed)
            res = synthesize_gain(recs, mode_for(name), bundle.weights, sys=sys)
            radii.append(res.closed_loop_radius if res.success else np.inf)
    reactor_ok = all(r < 1 for r in radii)
    informative, stabilized = 0, 0
    for seed in range(100):
        _, verdict, res = random_stabilization_case(seed, MODES[seed % 3])
        if verdict:
            informative += 1
            stabilized += res.success and res.closed_loop_radius < 1
    good = reactor_ok and informative > 0 and stabilized == informative
    report(8, good, f"reactor worst radius {max(radii):.3f} over 150 runs; random {stabilized}/{informative} informative stabilized")


# --- 9: receding horizon ----------------------------------------------------

def test_criterion_9_mpc(report):
    decay, worst_solve, medians = {}, 0.0, {}
    for name in MODES:
        run = mpc_scenario(name, 0)
        norms = run.state_norms
        decay[name] = float(norms.min() / norms[0])
        worst_solve = max(worst_solve, float(run.solve_seconds.max()))
        medians[name] = float(np.median(run.solve_seconds))
    below = all(v < 1e-2 for v in decay.values())
    ordering = medians["cumulative"] < medians["hybrid"] < medians["mosaic"]
    detail = (
        f"decay {', '.join(f'{k} {v:.1e}' for k, v in decay.items())}; max solve {worst_solve * 1e3:.2f} ms; "
        f"median ms {', '.join(f'{k} {v * 1e3:.3f}' for k, v in medians.items())}"
    )
    report(9, below and worst_solve < 1.0 and ordering, detail)


# --- 10: distributed identification ---------------------------------------

def test_criterion_10_distributed(report):
    topo = default_topology()
    seeds = range(3)
    worst_ratio, worst_slope, worst_r2, worst_final = 0.0, -np.inf, 1.0, 0.0
    excitation_ok = True
    for seed in seeds:
        sc = distributed_scenario(seed, 5000, alpha_gain=1.0, gamma_gain=0.25, xi=2.0, topology=topo)
        errs = sc.trace.errors
        worst_ratio = max(worst_ratio, float(np.max(errs[-1] / errs[0])))
        worst_final = max(worst_final, float(np.max(errs[-1])))
        slope, r2 = fit_log_linear(errs.max(axis=1))
        worst_slope, worst_r2 = max(worst_slope, slope), min(worst_r2, r2)
        cond = check_convergence_conditions(
            1.0, 2.0, gamma_gain=0.25, topology=topo, inputs=sc.input_bundle, order=3, window_l=500
        )
        members_non_pe = not any(check_pe(r.input_traj, 3) for r in sc.records)
        excitation_ok &= cond.all_ok and members_non_pe
    plateau = min(float(feedback_only_identifier(s, 5000).errors[-1]) for s in seeds)
    good = (
        worst_ratio < 1e-2 and worst_slope < 0 and worst_r2 > 0.9 and excitation_ok and plateau > 10 * worst_final
    )
    report(
        10,
        good,
        f"worst agent ratio {worst_ratio:.1e}, slope {worst_slope:.2e}, R^2 {worst_r2:.3f}, "
        f"excitation ok {excitation_ok}, feedback-only plateau {plateau:.3f} vs converged {worst_final:.1e}",
    )


# --- 11: non-expansiveness ---------------------------------------------------

def _increase(norms):
    return float(np.max(np.diff(norms))) if len(norms) > 1 else 0.0


def test_criterion_11_non_expansive(report):
    reactor = builtin_system("batch_reactor")
    converter = builtin_system("voltage_converter")
    ring = default_topology()
    worst, violations = -np.inf, 0
    for seed in range(50):
        rng = make_rng([seed, 11])
        # single identifier, any admissible step size
        for sys in (reactor, converter):
            alpha = float(rng.uniform(1e-3, 2.0)) if seed else 2.0
            d = sys.n * (sys.n + sys.m)
            state0 = IdentifierState(rng.standard_normal(d), alpha, float(rng.uniform(0.1, 5.0)))
            trace = run_adaptive(sys, rng.uniform(-5, 5, (300, sys.m)), state0, x0=rng.uniform(-5, 5, sys.n))
            inc = _increase(trace.errors)
            worst = max(worst, inc)
            violations += inc > 1e-12
        # distributed identifier at the scenario gains: stacked and worst-agent norms
        sc = distributed_scenario(seed, 400, alpha_gain=1.0, gamma_gain=0.25, xi=2.0, topology=ring)
        for norms in (sc.trace.stacked_errors, sc.trace.errors.max(axis=1)):
            inc = _increase(norms)
            worst = max(worst, inc)
            violations += inc > 1e-12
        # distributed identifier, random admissible gains, random graph size
        topo = GraphTopology.complete(int(rng.integers(2, 6))) if seed % 2 else GraphTopology.ring(int(rng.integers(3, 7)))
        d = converter.n * (converter.n + converter.m)
        state0 = DistributedState(
            rng.standard_normal((topo.node_count, d)),
            float(rng.uniform(1e-3, 1.0)),
            float(rng.uniform(1e-3, 0.999)) / topo.lambda_max,
            float(rng.uniform(0.1, 5.0)),
            topo,
        )
        inputs = [rng.uniform(-5, 5, (300, 1)) for _ in range(topo.node_count)]
        trace = run_distributed(converter, state0, inputs, 300, x0s=rng.uniform(-5, 5, (topo.node_count, 2)))
        inc = _increase(trace.stacked_errors)
        worst = max(worst, inc)
        violations += inc > 1e-12
    report(11, violations == 0, f"{violations} violations over 50 seeds, largest one-step increase {worst:.2e}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
