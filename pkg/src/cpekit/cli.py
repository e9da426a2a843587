"""Command-line front end.

Every subcommand writes ``result.json`` and ``result.txt`` into its output
directory. Exit codes: 0 success, 1 computational failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import experiments as ex
from .bench import BenchScenario, FlopModel, crossover_threshold, flop_costs, timed_rank_bench
from .control import (
    MpcProblem,
    build_behavioral_basis,
    mpc_run,
    synthesize_gain,
    warm_up,
)
from .design import DesignRequest, design_signals, verify_design
from .errors import ComputationError, CpeKitError, InputError, ParseError
from .hankel import CompositionMode
from .identification import (
    IdentifierState,
    fit_log_linear,
    ls_identify,
    run_adaptive,
    write_error_trace,
)
from .informativity import AlphaPolicy, check_cpe
from .trajectories import (
    GraphTopology,
    LtiSystem,
    atomic_write_text,
    builtin_system,
    load_bundle,
    load_records,
    make_rng,
    read_trajectory_csv,
    save_bundle,
    save_records,
    simulate_lti,
    write_record_csv,
)

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


class CommandFailed(Exception):
    """A computation finished without the requested result."""

    def __init__(self, message: str, payload: dict):
        super().__init__(message)
        self.payload = payload


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _default_seed() -> int:
    raw = os.environ.get("CPEKIT_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"CPEKIT_SEED must be an integer, got {raw!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _mode(text: str, p_bar: int | None = None) -> CompositionMode:
    return CompositionMode.parse(text, p_bar)


def _system(args) -> LtiSystem:
    if getattr(args, "matrices", None):
        path = Path(args.matrices)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
            return LtiSystem(np.array(data["A"], dtype=float), np.array(data["B"], dtype=float), path.stem)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"{path}: expected JSON with 'A' and 'B' matrices ({exc})") from None
    return builtin_system(args.system)


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _emit(out: Path, payload: dict, text: str) -> None:
    atomic_write_text(out / "result.json", json.dumps(_to_jsonable(payload), indent=2) + "\n")
    atomic_write_text(out / "result.txt", text.rstrip() + "\n")
    print(text.rstrip())


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_design(args) -> tuple[dict, str]:
    mode = _mode(args.mode, args.p_bar)
    req = DesignRequest(args.m, args.L, tuple(args.lengths), mode, args.weights, args.seed)
    bundle, ledger = design_signals(req)
    ok, report = verify_design(bundle, req, args.rel_tol)
    manifest = save_bundle(bundle, args.out)
    atomic_write_text(args.out / "design_ledger.json", ledger.to_json() + "\n")
    payload = {"manifest": str(manifest), "verified": ok, "report": report.to_dict(), "ledger": ledger.to_dict()}
    text = (
        f"designed {bundle.p} trajectories ({mode}, m={args.m}, L={args.L}, lengths={list(bundle.lengths)})\n"
        f"composite rank {report.rank_report.numeric_rank}/{report.target_rank}, "
        f"members PE: {list(report.per_member_pe)}, verified: {ok}\n"
        f"manifest: {manifest}"
    )
    if not ok:
        raise CommandFailed("design verification failed", payload)
    return payload, text


def cmd_check(args) -> tuple[dict, str]:
    bundle = load_bundle(args.bundle)
    p_bar = args.p_bar or (bundle.shared_prefix_count or None)
    mode = _mode(args.mode, p_bar)
    policy = AlphaPolicy.randomized(args.randomized, args.seed) if args.randomized else AlphaPolicy.fixed(args.weights)
    report = check_cpe(bundle, args.L, mode, policy, args.rel_tol)
    atomic_write_text(args.out / "cpe_report.json", report.to_json() + "\n")
    text = (
        f"{mode} excitation of order {args.L}: {'holds' if report.verdict else 'fails'} "
        f"(rank {report.rank_report.numeric_rank}/{report.target_rank}, "
        f"sigma ratio {report.conditioning:.3e})"
    )
    return report.to_dict(), text


def cmd_simulate(args) -> tuple[dict, str]:
    sys_ = _system(args)
    bundle = load_bundle(args.bundle)
    rng = make_rng(args.seed)
    records = []
    for member in bundle.members:
        x0 = rng.uniform(-args.x0_scale, args.x0_scale, sys_.n)
        records.append(simulate_lti(sys_, x0, member, args.noise, rng=rng))
    manifest = save_records(records, args.out, bundle.weights, bundle.shared_prefix_count)
    payload = {"manifest": str(manifest), "n": sys_.n, "m": sys_.m, "count": len(records)}
    return payload, f"simulated {len(records)} records on {sys_.name}; manifest: {manifest}"


def cmd_identify_ls(args) -> tuple[dict, str]:
    records, weights, p_bar = load_records(args.records)
    mode = _mode(args.mode, args.p_bar or (p_bar or None))
    w = args.weights or weights
    res = ls_identify(records, mode, w, args.rel_tol)
    payload = {
        "A_hat": res.a_hat,
        "B_hat": res.b_hat,
        "unique": res.unique,
        "residual": res.residual,
        "rank": res.rank_report.to_dict(),
    }
    text = f"LS estimate ({mode}): unique={res.unique}, residual={res.residual:.3e}"
    if args.system or args.matrices:
        err = res.error(_system(args))
        payload["error"] = err
        text += f", error={err:.3e}"
    return payload, text


def cmd_identify_adaptive(args) -> tuple[dict, str]:
    sys_ = _system(args)
    rng = make_rng(args.seed)
    if args.inputs:
        inputs = read_trajectory_csv(args.inputs)
        steps = inputs.length
    else:
        steps = args.steps
        inputs = rng.uniform(-args.amplitude, args.amplitude, (steps, sys_.m))
    state0 = IdentifierState(np.zeros(sys_.n * (sys_.n + sys_.m)), args.alpha, args.xi)
    x0 = rng.uniform(-1.0, 1.0, sys_.n)
    trace = run_adaptive(sys_, inputs, state0, args.noise, steps, x0=x0, rng_seed=args.seed)
    write_error_trace(trace.errors, args.out / "errors.csv")
    slope, r2 = fit_log_linear(trace.errors)
    payload = {
        "final_error": float(trace.errors[-1]),
        "initial_error": float(trace.errors[0]),
        "log_slope": slope,
        "r_squared": r2,
        "theta_hat": trace.final.theta,
    }
    return payload, f"adaptive identifier: error {trace.errors[0]:.3e} -> {trace.errors[-1]:.3e} in {steps} steps"


def _topology(name: str, count: int) -> GraphTopology:
    builders = {"ring": GraphTopology.ring, "path": GraphTopology.path, "complete": GraphTopology.complete}
    if name not in builders:
        raise InputError(f"unknown topology {name!r}; choose from {sorted(builders)}")
    return builders[name](count)


def cmd_identify_distributed(args) -> tuple[dict, str]:
    topo = _topology(args.topology, len(ex.AGENT_ROTATIONS))
    sc = ex.distributed_scenario(
        args.seed, args.steps, alpha_gain=args.alpha, gamma_gain=args.gamma, xi=args.xi, topology=topo
    )
    errs = sc.trace.errors
    write_error_trace(errs, args.out / "errors.csv")
    slope, r2 = fit_log_linear(errs.max(axis=1))
    ratios = errs[-1] / errs[0]
    payload = {
        "final_ratio_per_agent": ratios,
        "log_slope": slope,
        "r_squared": r2,
        "gains": [K for K in sc.gains],
        "topology": args.topology,
    }
    return payload, (
        f"distributed identifier ({len(ratios)} agents, {args.steps} steps): "
        f"worst error ratio {ratios.max():.3e}, log slope {slope:.3e}, R^2 {r2:.3f}"
    )


def cmd_gain(args) -> tuple[dict, str]:
    records, weights, p_bar = load_records(args.records)
    mode = _mode(args.mode, args.p_bar or (p_bar or None))
    sys_ = _system(args) if (args.system or args.matrices) else None
    res = synthesize_gain(records, mode, args.weights or weights, args.rel_tol, sys=sys_)
    payload = res.to_dict()
    if not res.success:
        raise CommandFailed(f"LMI {res.certificate.status}; no gain produced", payload)
    text = f"gain ({mode}): K = {np.array2string(res.K, precision=4)}"
    if res.closed_loop_radius is not None:
        text += f"\nclosed-loop spectral radius {res.closed_loop_radius:.4f}"
    return payload, text


def _warmup_inputs(source: str, n: int, m: int) -> np.ndarray:
    if source == "zeros":
        return np.zeros((n, m))
    traj = read_trajectory_csv(source)
    if traj.length != n or traj.dim_m != m:
        raise InputError(f"warm-up file must hold exactly {n} inputs of dimension {m}")
    return traj.samples


def cmd_mpc(args) -> tuple[dict, str]:
    sys_ = _system(args)
    records, weights, p_bar = load_records(args.records)
    mode = _mode(args.mode, args.p_bar or (p_bar or None))
    n, m = sys_.n, sys_.m
    basis = build_behavioral_basis(records, args.horizon + n, mode, args.weights or weights, sys=sys_)
    x0 = np.ones(n) if args.x0 is None else np.asarray(args.x0, dtype=float)
    if x0.size != n:
        raise InputError(f"x0 must have {n} entries")
    u_hist, x_hist = warm_up(sys_, x0, _warmup_inputs(args.warmup, n, m))
    problem = MpcProblem(
        basis, args.horizon, args.q * np.eye(n), args.r * np.eye(m), np.zeros(n), u_hist, x_hist,
        args.u_min, args.u_max,
    )
    run = mpc_run(sys_, problem, args.steps)
    write_record_csv(run.record, args.out / "closed_loop.csv")
    norms = run.state_norms
    payload = {
        "state_norms": norms,
        "median_solve_seconds": float(np.median(run.solve_seconds)),
        "max_solve_seconds": float(np.max(run.solve_seconds)),
        "basis_shape": list(basis.matrix.shape),
    }
    return payload, (
        f"MPC ({mode}, N={args.horizon}): |x| {norms[0]:.3e} -> {norms[-1]:.3e}, "
        f"median solve {np.median(run.solve_seconds) * 1e3:.3f} ms"
    )


def cmd_bench(args) -> tuple[dict, str]:
    scenarios = [
        BenchScenario(name, ex.mpc_prior_basis(name, args.seed, horizon=args.horizon).matrix) for name in ex.MODES
    ]
    report = timed_rank_bench(scenarios, args.repeats, args.warmups)
    report.write_csv(args.out / "bench.csv")
    payload = {"timing": report.to_dict()}
    text = [report.to_csv().rstrip(), f"ordering {' < '.join(report.ordering)} (conclusive: {report.conclusive})"]
    if args.mosaic_lengths:
        trials = args.trial_lengths or args.mosaic_lengths
        model = FlopModel.from_lengths(args.flop_m, args.flop_L, trials, args.mosaic_lengths)
        costs = flop_costs(model)
        c_bar = max(1, int(round(model.mean_columns)))
        kth = crossover_threshold(model.total_mosaic_columns, c_bar)
        payload["flops"] = {**costs, "C": model.total_mosaic_columns, "c_bar": c_bar, "K_th": kth}
        text.append(f"flops: {costs}, C={model.total_mosaic_columns}, K_th={kth}")
    return payload, "\n".join(text)


# ---------------------------------------------------------------------------
# reproduction scripts
# ---------------------------------------------------------------------------


def _repro_design_example(args) -> tuple[dict, str]:
    req = DesignRequest(2, 5, (7, 7, 6, 6, 5), CompositionMode.mosaic(), rng_seed=args.seed)
    bundle, ledger = design_signals(req)
    ok, report = verify_design(bundle, req)
    save_bundle(bundle, args.out)
    C = sum(T - 5 + 1 for T in req.lengths)
    kth = crossover_threshold(C, 10)
    payload = {"columns": C, "rank": report.rank_report.numeric_rank, "verified": ok, "K_th": kth}
    return payload, f"columns C={C}, rank {report.rank_report.numeric_rank}, K_th={kth}, verified {ok}"


def _repro_ls(args) -> tuple[dict, str]:
    sigmas = np.linspace(0.0, args.noise, 6)
    seeds = list(range(args.seeds))
    rows = ["mode,sigma,mean_error"]
    payload = {}
    lines = []
    for name in ex.MODES:
        errs = np.array(_map(partial(_ls_row, name=name, sigmas=tuple(sigmas)), seeds, args.jobs)).T
        means = errs.mean(axis=1)
        payload[name] = {"sigmas": sigmas, "mean_error": means}
        rows += [f"{name},{s!r},{e!r}" for s, e in zip(sigmas, means)]
        lines.append(f"{name}: " + ", ".join(f"{e:.3e}" for e in means))
    atomic_write_text(args.out / "ls_noise.csv", "\n".join(rows) + "\n")
    return payload, "mean LS error per noise level\n" + "\n".join(lines)


def _ls_row(seed: int, name: str, sigmas: tuple) -> list[float]:
    sys_ = builtin_system("batch_reactor")
    return [ex.ls_error(sys_, name, seed, s) for s in sigmas]


def _repro_weighting(args) -> tuple[dict, str]:
    res = np.array(_map(ex.weighting_comparison, list(range(args.seeds)), args.jobs))
    wins = float(np.mean(res[:, 1] <= res[:, 0]))
    rows = ["seed,error_unit_weights,error_compensated"] + [
        f"{i},{a!r},{b!r}" for i, (a, b) in enumerate(res)
    ]
    atomic_write_text(args.out / "weighting.csv", "\n".join(rows) + "\n")
    return {"win_rate": wins, "median": np.median(res, axis=0)}, f"compensated weights win in {wins:.0%} of seeds"


def _gain_row(seed: int) -> list:
    sys_ = builtin_system("batch_reactor")
    out = []
    for name in ex.MODES:
        recs, bundle, _ = ex.designed_records(sys_, name, seed)
        res = synthesize_gain(recs, ex.mode_for(name), bundle.weights, sys=sys_)
        out.append(res.closed_loop_radius if res.success else float("nan"))
    return out


def _repro_gain(args) -> tuple[dict, str]:
    radii = np.array(_map(_gain_row, list(range(args.seeds)), args.jobs))
    rows = ["seed," + ",".join(ex.MODES)] + [f"{i}," + ",".join(repr(float(v)) for v in r) for i, r in enumerate(radii)]
    atomic_write_text(args.out / "gain_radii.csv", "\n".join(rows) + "\n")
    stable = np.nan_to_num(radii, nan=np.inf) < 1
    payload = {name: {"stable_fraction": float(stable[:, j].mean()), "max_radius": float(np.nanmax(radii[:, j]))}
               for j, name in enumerate(ex.MODES)}
    text = "\n".join(f"{k}: stable {v['stable_fraction']:.0%}, max radius {v['max_radius']:.4f}" for k, v in payload.items())
    return payload, text


def _repro_mpc(args) -> tuple[dict, str]:
    payload, lines = {}, []
    for name in ex.MODES:
        run = ex.mpc_scenario(name, args.seed, args.steps)
        write_record_csv(run.record, args.out / f"mpc_{name}.csv")
        norms = run.state_norms
        payload[name] = {"state_norms": norms, "median_solve_seconds": float(np.median(run.solve_seconds))}
        lines.append(f"{name}: |x| {norms[0]:.3e} -> {norms[-1]:.3e}, median solve {np.median(run.solve_seconds) * 1e3:.3f} ms")
    return payload, "\n".join(lines)


def _repro_distributed(args) -> tuple[dict, str]:
    sc = ex.distributed_scenario(args.seed, args.steps)
    single = ex.feedback_only_identifier(args.seed, args.steps)
    write_error_trace(sc.trace.errors, args.out / "distributed_errors.csv")
    write_error_trace(single.errors, args.out / "single_errors.csv")
    ratios = sc.trace.errors[-1] / sc.trace.errors[0]
    payload = {"distributed_final_ratio": ratios, "single_final_ratio": single.errors[-1] / single.errors[0]}
    return payload, (
        f"distributed worst ratio {ratios.max():.3e}; single feedback-only ratio "
        f"{single.errors[-1] / single.errors[0]:.3e}"
    )


REPRO = {
    "design-example": _repro_design_example,
    "ls-batch-reactor": _repro_ls,
    "weighting": _repro_weighting,
    "gain-batch-reactor": _repro_gain,
    "mpc-batch-reactor": _repro_mpc,
    "distributed-converter": _repro_distributed,
}


def cmd_repro(args) -> tuple[dict, str]:
    return REPRO[args.name](args)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, *, system: bool = False) -> None:
    p.add_argument("-o", "--out", type=Path, default=Path("cpekit_out"), help="output directory")
    p.add_argument("--seed", type=int, default=None, help="random seed (default: $CPEKIT_SEED or 0)")
    p.add_argument("--rel-tol", type=float, default=None, help="relative rank tolerance")
    if system:
        p.add_argument("--system", default=None, help="builtin system: batch_reactor or voltage_converter")
        p.add_argument("--matrices", default=None, help="JSON file with 'A' and 'B'")


def _add_mode(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", required=True, help="mosaic, cumulative, hybrid or hybrid:P")
    p.add_argument("--p-bar", type=int, default=None, help="hybrid shared prefix count")
    p.add_argument("--weights", type=_float_list, default=None, help="comma-separated weights")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpekit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="design collectively exciting inputs")
    _add_common(p)
    _add_mode(p)
    p.add_argument("-m", type=int, required=True, help="signal dimension")
    p.add_argument("-L", type=int, required=True, help="excitation order")
    p.add_argument("--lengths", type=_int_list, required=True, help="comma-separated lengths")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("check", help="check collective excitation of a bundle")
    _add_common(p)
    _add_mode(p)
    p.add_argument("-L", type=int, required=True, help="excitation order")
    p.add_argument("--bundle", required=True, help="bundle manifest JSON")
    p.add_argument("--randomized", type=int, default=0, help="check N random weight draws")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="apply a bundle of inputs to a system")
    _add_common(p, system=True)
    p.add_argument("--bundle", required=True, help="input bundle manifest JSON")
    p.add_argument("--x0-scale", type=float, default=1.0, help="initial states uniform in [-s, s]")
    p.add_argument("--noise", type=float, default=0.0, help="process noise standard deviation")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("identify", help="identify [A B] from data")
    isub = p.add_subparsers(dest="method", required=True)
    q = isub.add_parser("ls", help="least squares from recorded data")
    _add_common(q, system=True)
    _add_mode(q)
    q.add_argument("--records", required=True, help="records manifest JSON")
    q.set_defaults(func=cmd_identify_ls)
    q = isub.add_parser("adaptive", help="online normalized-gradient identifier")
    _add_common(q, system=True)
    q.add_argument("--inputs", default=None, help="input trajectory CSV (default: uniform noise)")
    q.add_argument("--steps", type=int, default=2000)
    q.add_argument("--amplitude", type=float, default=1.0)
    q.add_argument("--alpha", type=float, default=1.0)
    q.add_argument("--xi", type=float, default=2.0)
    q.add_argument("--noise", type=float, default=0.0)
    q.set_defaults(func=cmd_identify_adaptive)
    q = isub.add_parser("distributed", help="five-agent converter identification under feedback")
    _add_common(q)
    q.add_argument("--steps", type=int, default=5000)
    q.add_argument("--alpha", type=float, default=1.0)
    q.add_argument("--gamma", type=float, default=0.25)
    q.add_argument("--xi", type=float, default=2.0)
    q.add_argument("--topology", default="ring", help="ring, path or complete")
    q.set_defaults(func=cmd_identify_distributed)

    p = sub.add_parser("gain", help="stabilizing state feedback from data")
    _add_common(p, system=True)
    _add_mode(p)
    p.add_argument("--records", required=True, help="records manifest JSON")
    p.set_defaults(func=cmd_gain)

    p = sub.add_parser("mpc", help="receding-horizon control from a data basis")
    _add_common(p, system=True)
    _add_mode(p)
    p.add_argument("--records", required=True, help="records manifest JSON")
    p.add_argument("--warmup", required=True, help="'zeros' or a CSV with n warm-up inputs")
    p.add_argument("--horizon", type=int, default=5)
    p.add_argument("--steps", type=int, default=40)
    p.add_argument("--q", type=float, default=3.0, help="state weight (times identity)")
    p.add_argument("--r", type=float, default=1e-2, help="input weight (times identity)")
    p.add_argument("--x0", type=_float_list, default=None, help="initial state (default ones)")
    p.add_argument("--u-min", type=float, default=None)
    p.add_argument("--u-max", type=float, default=None)
    p.set_defaults(func=cmd_mpc)

    p = sub.add_parser("bench", help="rank timings and flop accounting")
    _add_common(p)
    p.add_argument("--horizon", type=int, default=5, help="MPC horizon setting the basis depth")
    p.add_argument("--repeats", type=int, default=7)
    p.add_argument("--warmups", type=int, default=2)
    p.add_argument("--flop-m", type=int, default=2)
    p.add_argument("--flop-L", type=int, default=5)
    p.add_argument("--mosaic-lengths", type=_int_list, default=None)
    p.add_argument("--trial-lengths", type=_int_list, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("repro", help="regenerate a benchmark experiment")
    _add_common(p)
    p.add_argument("name", choices=sorted(REPRO))
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.1, help="largest noise level")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_repro)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.seed is None:
            args.seed = _default_seed()
        if getattr(args, "steps", 0) is None:
            args.steps = 5000 if args.name == "distributed-converter" else 40
        if hasattr(args, "system") and args.system is None and not args.matrices:
            if args.func in (cmd_simulate, cmd_identify_adaptive, cmd_mpc):
                args.system = "batch_reactor"
        args.out.mkdir(parents=True, exist_ok=True)
        payload, text = args.func(args)
    except CommandFailed as exc:
        _emit(args.out, {"ok": False, "error": str(exc), **exc.payload}, f"error: {exc}")
        return EXIT_FAIL
    except (InputError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ComputationError, CpeKitError, np.linalg.LinAlgError) as exc:
        _emit(args.out, {"ok": False, "error": str(exc)}, f"error: {exc}")
        return EXIT_FAIL
    _emit(args.out, {"ok": True, **payload}, text)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
