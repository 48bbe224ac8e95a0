"""Command-line surface: gen, simulate, optimum, experiment, verify.

Exit codes: 0 success/converged, 2 round limit hit, 3 cycle detected,
4 instance validation failure, 5 verification-suite failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .analysis import OptimizerConfig, global_optimum
from .dynamics import (
    Converged,
    CycleDetected,
    DynamicsConfig,
    Given,
    MaxRoundsExceeded,
    RandomFeasible,
    RandomSeeded,
    RoundRobin,
    Zero,
    classify_equilibrium,
    init_profile,
    run_sequential,
    run_simultaneous,
)
from .experiment import (
    ExperimentConfig,
    run_batch_experiment,
    write_histogram_csv,
    write_runs_jsonl,
    write_summary_json,
    write_trace_jsonl,
)
from .game import social_welfare, validate_game
from .instances import (
    InstanceDocument,
    gen_k5_cycle_instance,
    gen_poa_grid_instance,
    gen_random_instance,
    gen_torus_grid,
)
from .utility import UtilitySpec
from .verify import verify_reference_suite

EXIT_OK = 0
EXIT_MAX_ROUNDS = 2
EXIT_CYCLE = 3
EXIT_INVALID = 4
EXIT_VERIFY_FAILED = 5


def _utility_from_name(name: str, param: float | None) -> UtilitySpec:
    if name == "power":
        if param is None:
            raise SystemExit("--utility power needs --utility-param")
        return UtilitySpec.power(param)
    if name == "capped_quadratic":
        if param is None:
            raise SystemExit("--utility capped_quadratic needs --utility-param")
        return UtilitySpec.capped_quadratic(param)
    return UtilitySpec(name)


def _cmd_gen(args: argparse.Namespace) -> int:
    if args.kind == "torus":
        doc = gen_torus_grid(
            width=args.width,
            height=args.height,
            beta=args.beta,
            eta=args.eta,
            weight_seed=args.seed,
            utility=_utility_from_name(args.utility, args.utility_param),
            behavior=args.behavior,
        )
    elif args.kind == "k5":
        doc = gen_k5_cycle_instance(args.eps)
    elif args.kind == "poa-grid":
        doc, _, _ = gen_poa_grid_instance(
            args.width, args.height, args.eps, args.beta
        )
    else:
        doc = gen_random_instance(
            n=args.n,
            edge_prob=args.edge_prob,
            seed=args.seed,
            beta=args.beta,
            budget_units=args.budget_units,
            behavior=args.behavior if args.behavior != "mixed" else None,
        )
    doc.save(args.out)
    print(f"wrote {args.out} (n={doc.n}, edges={len(doc.edges)})")
    return EXIT_OK


def _load_valid_instance(path: str) -> InstanceDocument | None:
    doc = InstanceDocument.load(path)
    report = validate_game(doc.to_game_spec())
    if not report.ok:
        for v in report.violations:
            print(f"validation: {v}", file=sys.stderr)
        return None
    return doc


def _cmd_simulate(args: argparse.Namespace) -> int:
    doc = _load_valid_instance(args.instance)
    if doc is None:
        return EXIT_INVALID
    spec = doc.to_game_spec(behavior_override=args.behavior)

    if args.init == "zero":
        policy = Zero()
    elif args.init == "random":
        policy = RandomFeasible(args.seed)
    else:
        suggested = doc.init_profile()
        policy = Given(suggested) if suggested is not None else Zero()
    start = init_profile(spec, policy)

    order = RoundRobin() if args.order == "rr" else RandomSeeded(args.seed)
    mode = "sequential" if args.mode == "seq" else "simultaneous"
    cfg = DynamicsConfig(
        mode=mode, order=order, max_rounds=args.max_rounds, tol=args.tol
    )
    runner = run_sequential if mode == "sequential" else run_simultaneous
    final, trace, status = runner(spec, start, cfg, ranking=doc.ranking_system())

    if args.trace_out:
        write_trace_jsonl(trace, args.trace_out, profiles=args.trace_profiles)

    sw = social_welfare(spec, final)
    slack = trace.records[-1].total_slack
    if isinstance(status, Converged):
        kind = type(classify_equilibrium(spec, final)).__name__
        print(
            f"converged at round {status.t}: welfare={sw!r} "
            f"total_slack={slack} units class={kind}"
        )
        return EXIT_OK
    if isinstance(status, CycleDetected):
        print(
            f"cycle detected: start={status.start} period={status.period} "
            f"welfare={sw!r}"
        )
        return EXIT_CYCLE
    assert isinstance(status, MaxRoundsExceeded)
    print(f"round limit {status.rounds} exceeded: welfare={sw!r}")
    return EXIT_MAX_ROUNDS


def _cmd_optimum(args: argparse.Namespace) -> int:
    doc = _load_valid_instance(args.instance)
    if doc is None:
        return EXIT_INVALID
    spec = doc.to_game_spec()
    cfg = OptimizerConfig(
        step_size=args.step_size,
        max_iters=args.max_iters,
        grad_tol=args.grad_tol,
        projection_iters=args.projection_iters,
    )
    result = global_optimum(spec, cfg)
    print(
        f"optimum welfare={result.welfare!r} certified={result.certified} "
        f"iterations={result.iterations}"
    )
    if args.out:
        payload = {
            "welfare": result.welfare,
            "certified": result.certified,
            "iterations": result.iterations,
            "amounts": [
                [i, j, x] for (i, j), x in sorted(result.profile.amounts.items())
            ],
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def _cmd_experiment(args: argparse.Namespace) -> int:
    doc = _load_valid_instance(args.instance)
    if doc is None:
        return EXIT_INVALID
    overrides: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            overrides = json.load(fh)
    cfg = ExperimentConfig(
        runs=overrides.get("runs", args.runs),
        seed=overrides.get("seed", args.seed),
        behavior=overrides.get("behavior", args.behavior),
        dynamics=DynamicsConfig(
            mode="sequential",
            max_rounds=overrides.get("max_rounds", args.max_rounds),
            tol=overrides.get("tol", args.tol),
        ),
        bins=overrides.get("bins", args.bins),
        n_jobs=overrides.get("n_jobs", args.n_jobs),
    )
    report = run_batch_experiment(doc, cfg)
    prefix = args.out_prefix
    write_histogram_csv(report, f"{prefix}.histogram.csv")
    write_summary_json(report, f"{prefix}.summary.json")
    write_runs_jsonl(report, f"{prefix}.runs.jsonl")
    print(
        f"runs={len(report.runs)} mean={report.mean:.6f} std={report.std:.6f} "
        f"mode_count={report.mode_count} non_converged={report.non_converged}"
    )
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace) -> int:
    results = verify_reference_suite()
    failed = 0
    for r in results:
        tag = "PASS" if r.passed else "FAIL"
        print(f"[{tag}] {r.name}: {r.details}")
        if not r.passed:
            failed += 1
    if failed:
        print(f"{failed} check(s) failed", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netalloc",
        description="Budgeted resource-allocation games on networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an instance file")
    gen.add_argument(
        "kind", choices=["torus", "k5", "poa-grid", "random"]
    )
    gen.add_argument("--out", required=True)
    gen.add_argument("--width", type=int, default=10)
    gen.add_argument("--height", type=int, default=10)
    gen.add_argument("--beta", type=float, default=1000.0)
    gen.add_argument("--eta", type=float, default=1.0)
    gen.add_argument("--eps", type=float, default=0.05)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--n", type=int, default=10)
    gen.add_argument("--edge-prob", type=float, default=0.4)
    gen.add_argument("--budget-units", type=int, default=100)
    gen.add_argument(
        "--utility",
        choices=["linear", "sqrt", "log1p", "power", "capped_quadratic"],
        default="sqrt",
    )
    gen.add_argument("--utility-param", type=float, default=None)
    gen.add_argument(
        "--behavior",
        choices=["pessimistic", "optimistic", "mixed"],
        default="pessimistic",
    )
    gen.set_defaults(func=_cmd_gen)

    sim = sub.add_parser("simulate", help="run one dynamics trajectory")
    sim.add_argument("--instance", required=True)
    sim.add_argument(
        "--init", choices=["zero", "random", "suggested"], default="suggested"
    )
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--mode", choices=["seq", "sim"], default="seq")
    sim.add_argument("--order", choices=["rr", "random"], default="rr")
    sim.add_argument("--max-rounds", type=int, default=1_000_000)
    sim.add_argument("--tol", type=float, default=1e-9)
    sim.add_argument("--behavior", choices=["pessimistic", "optimistic"])
    sim.add_argument("--trace-out")
    sim.add_argument(
        "--trace-profiles", choices=["full", "hash"], default="full"
    )
    sim.set_defaults(func=_cmd_simulate)

    opt = sub.add_parser("optimum", help="solve for the welfare optimum")
    opt.add_argument("--instance", required=True)
    opt.add_argument("--step-size", type=float, default=1.0)
    opt.add_argument("--max-iters", type=int, default=4000)
    opt.add_argument("--grad-tol", type=float, default=1e-9)
    opt.add_argument("--projection-iters", type=int, default=25)
    opt.add_argument("--out")
    opt.set_defaults(func=_cmd_optimum)

    exp = sub.add_parser("experiment", help="seeded batch of dynamics runs")
    exp.add_argument("--instance", required=True)
    exp.add_argument("--runs", type=int, default=100)
    exp.add_argument("--seed", type=int, default=0)
    exp.add_argument(
        "--behavior", choices=["pessimistic", "optimistic"], default=None
    )
    exp.add_argument("--bins", type=int, default=40)
    exp.add_argument("--max-rounds", type=int, default=1_000_000)
    exp.add_argument("--tol", type=float, default=1e-9)
    exp.add_argument("--n-jobs", type=int, default=1)
    exp.add_argument("--config", help="JSON file overriding the flags")
    exp.add_argument("--out-prefix", required=True)
    exp.set_defaults(func=_cmd_experiment)

    ver = sub.add_parser("verify", help="run the reference-results suite")
    ver.set_defaults(func=_cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
