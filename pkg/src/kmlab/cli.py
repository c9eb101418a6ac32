"""Command-line interface.

Subcommands: simulate, constants, hierarchy, verify-lemmas, ml-eval, recipe.
Exit codes: 0 success, 1 validation error, 2 runtime error, 3 lemma
violation.  Errors go to stderr with the machine-parsable prefix `KM-ERR:`;
warnings use `KM-WARN:`.  Environment: KM_SEED overrides the config seed,
KM_THREADS caps worker parallelism (the engine is single-threaded, so any
cap is honored trivially; the value is still validated and recorded).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time

import numpy as np

from . import __version__, dsmc, hierarchy, io_cli, kernels, lemma_lab, moments
from .errors import ConfigError, KMError
from .special_fn import MLSpec, mittag_leffler

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_VIOLATION = 3


class _ArgumentError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; the CLI contract wants 1
    def error(self, message):
        raise _ArgumentError(message)


def _warn(msg: str) -> None:
    print(f"KM-WARN: {msg}", file=sys.stderr)


def _env_seed() -> int | None:
    raw = os.environ.get("KM_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"KM_SEED must be an integer, got {raw!r}") from None


def _env_threads() -> int:
    raw = os.environ.get("KM_THREADS")
    if raw is None:
        return 1
    try:
        val = int(raw)
    except ValueError:
        raise ConfigError(f"KM_THREADS must be an integer, got {raw!r}") from None
    if val < 1:
        raise ConfigError(f"KM_THREADS must be >= 1, got {val}")
    return val


def _load_config(path: str) -> io_cli.ParsedConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    parsed = io_cli.parse_config(text)
    for w in parsed.warnings:
        _warn(w)
    seed = _env_seed()
    if seed is not None:
        parsed.scenario = _replace_seed(parsed.scenario, seed)
    return parsed


def _replace_seed(scenario: dsmc.ScenarioConfig, seed: int) -> dsmc.ScenarioConfig:
    from dataclasses import replace

    return replace(scenario, seed=seed)


def _apply_overrides(args, parsed: io_cli.ParsedConfig) -> io_cli.ParsedConfig:
    from dataclasses import replace

    sc = parsed.scenario
    if getattr(args, "t_end", None) is not None:
        sc = replace(sc, t_end=args.t_end)
    if getattr(args, "seed", None) is not None:
        sc = replace(sc, seed=args.seed)
    if getattr(args, "n", None) is not None:
        sc = replace(sc, n_particles=args.n)
    parsed.scenario = sc
    return parsed


def _cmd_simulate(args) -> int:
    parsed = _apply_overrides(args, _load_config(args.config))
    sc = parsed.scenario
    started = time.time()
    ensemble = None
    if args.resume:
        ensemble = io_cli.read_snapshot(args.resume)
        if ensemble.d != sc.d:
            raise ConfigError(
                f"snapshot dimension {ensemble.d} does not match scenario dimension {sc.d}"
            )
    table, ensemble = dsmc.run(sc, ensemble=ensemble, record_initial=not args.resume)
    outputs = []
    out = args.out or "moments.csv"
    io_cli.write_moment_csv(table, out)
    outputs.append(out)
    if args.snapshot_out:
        io_cli.write_snapshot(ensemble, args.snapshot_out)
        outputs.append(args.snapshot_out)
    manifest = io_cli.new_manifest(parsed.config_hash, sc.seed, started, outputs)
    manifest_path = out + ".manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write(manifest.to_json() + "\n")
    print(f"simulated t = {ensemble.time:.6g}, N = {ensemble.n}, wrote {', '.join(outputs)}")
    return EXIT_OK


def _cmd_constants(args) -> int:
    parsed = _load_config(args.config)
    kernel = parsed.scenario.kernel
    xi = kernels.classify_singularity(kernel)
    c_const = kernels.angular_constant(kernel)
    rate = None
    try:
        rate = kernels.total_rate(kernel)
    except ConfigError:
        pass  # untruncated singular kernels have no finite rate
    print(f"kernel: family={kernel.family} d={kernel.d} profile={kernel.profile} "
          f"nu={kernel.nu} level={kernel.level} theta_min={kernel.theta_min}")
    print(f"singularity index xi = {xi:.6g}")
    print(f"angular constant     = {c_const:.12g}")
    print(f"total rate           = {'inf' if rate is None else f'{rate:.12g}'}")
    rows = kernels.decay_rate_table(kernel, args.q_max)
    out = args.out
    lines = ["q,eps_q,eps_q_weighted"]
    for q, eps, weighted in rows:
        lines.append(f"{q},{eps:.17g},{weighted:.17g}")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {len(rows)} cancellation rows to {out}")
    else:
        print("\n".join(lines))
    return EXIT_OK


def _cmd_hierarchy(args) -> int:
    parsed = _apply_overrides(args, _load_config(args.config))
    sc = parsed.scenario
    q_cap = max(max(sc.orders, default=4) // 2, 2)
    ens = dsmc.init_ensemble(sc)
    m0 = np.array(
        [moments.poly_moment(ens.velocities, 2 * q).value for q in range(q_cap + 1)]
    )
    state = hierarchy.state_from_kernel(sc.kernel, m0)
    times = np.linspace(0.0, sc.t_end, args.samples)
    traj = hierarchy.integrate_hierarchy(state, sc.t_end, times)
    bounds = hierarchy.uniform_bounds(m0, state.c_const, eps=state.eps,
                                      use_eps=args.eps_variant)
    table = moments.MomentTable(columns=[moments.poly_label(2 * q) for q in range(q_cap + 1)])
    for i, t in enumerate(traj.times):
        ests = [
            moments.MomentEstimate(traj.m[i, q], 0.0,
                                   math.log(traj.m[i, q]) if traj.m[i, q] > 0 else -math.inf,
                                   moments.FLAG_OK)
            for q in range(q_cap + 1)
        ]
        table.add_row(float(t), ests)
    out = args.out or "hierarchy.csv"
    io_cli.write_moment_csv(table, out)
    print(f"integrated moment hierarchy to t = {sc.t_end:.6g} (orders <= {2 * q_cap})")
    print("order,initial,final,uniform_bound")
    for q in range(q_cap + 1):
        print(f"{2*q},{m0[q]:.6g},{traj.m[-1, q]:.6g},{bounds[q]:.6g}")
    print(f"wrote trajectory to {out}")
    violated = [q for q in range(q_cap + 1) if traj.m[:, q].max() > bounds[q] * (1 + 1e-6)]
    if violated:
        _warn(f"uniform bound exceeded at orders {[2*q for q in violated]}")
        return EXIT_VIOLATION
    return EXIT_OK


def _cmd_verify_lemmas(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.sweep == "full":
        reports = lemma_lab.default_reports(rng, angular_trials=10_000,
                                            product_trials=100_000, q_max=20)
    else:
        reports = lemma_lab.default_reports(rng)
    failures = 0
    for rep in reports:
        print(rep.summary())
        if not rep.passed:
            failures += 1
    if args.out:
        import json

        payload = [
            {
                "lemma": r.lemma,
                "trials": r.trials,
                "violations": r.violations,
                "worst_margin": r.worst_margin,
                "tolerance": r.tolerance,
                "ranges": r.ranges,
                "passed": r.passed,
            }
            for r in reports
        ]
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
        print(f"wrote machine-readable summary to {args.out}")
    return EXIT_VIOLATION if failures else EXIT_OK


def _cmd_ml_eval(args) -> int:
    try:
        lo, hi, count = args.x_grid.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise ConfigError(f"--x-grid must be lo:hi:count, got {args.x_grid!r}") from None
    if count < 1 or hi < lo:
        raise ConfigError("--x-grid needs hi >= lo and count >= 1")
    print("x,value,log_value,log_scaled")
    for x in np.linspace(lo, hi, count):
        val = mittag_leffler(args.a, float(x))
        print(f"{x:.17g},{val.value:.17g},{val.log:.17g},{int(val.log_scaled)}")
    return EXIT_OK


def _cmd_recipe(args) -> int:
    parsed = _load_config(args.config)
    sc = parsed.scenario
    recipe_cfg = parsed.recipe
    if not recipe_cfg:
        raise ConfigError("config has no [recipe] section (key s is required)")
    s = recipe_cfg["s"]
    alpha0 = recipe_cfg["alpha0"]
    q0_max = recipe_cfg["q0_max"]
    spec0 = MLSpec.from_alpha(alpha0, s)
    if "m0_bound" in recipe_cfg:
        m0_bound = recipe_cfg["m0_bound"]
    else:
        m0_bound = dsmc.initial_stretched_moment(sc.initial, spec0, sc.d)
    result = hierarchy.rate_recipe(
        sc.kernel, s, alpha0, m0_bound,
        lambda q_max: dsmc.initial_log_moment_bounds(sc.initial, q_max, sc.d),
        q0_max=q0_max, use_eps_variant=args.eps_variant,
    )
    print(f"exponential order s        = {s:.12g}")
    print(f"initial bound M0           = {m0_bound:.12g}")
    print(f"cutoff index q0            = {result.q0}")
    print(f"certified rate alpha       = {result.alpha:.6g}")
    print(f"log certified rate         = {result.log_alpha:.12g}")
    for key, val in sorted(result.details.items()):
        print(f"  {key} = {val:.6g}" if isinstance(val, float) else f"  {key} = {val}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="kmlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"kmlab {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("simulate", help="run a particle simulation scenario")
    p.add_argument("config")
    p.add_argument("--out", help="moment table CSV path (default moments.csv)")
    p.add_argument("--snapshot-out", help="write the final ensemble snapshot here")
    p.add_argument("--resume", help="resume from an ensemble snapshot")
    p.add_argument("--t-end", type=float, help="override t_end")
    p.add_argument("--seed", type=int, help="override the seed")
    p.add_argument("--n", type=int, help="override the particle count")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("constants", help="tabulate kernel constants and cancellation decay")
    p.add_argument("config")
    p.add_argument("--q-max", type=int, default=50)
    p.add_argument("--out", help="write the table as CSV instead of stdout")
    p.set_defaults(func=_cmd_constants)

    p = sub.add_parser("hierarchy", help="integrate the moment ODE hierarchy")
    p.add_argument("config")
    p.add_argument("--out", help="trajectory CSV path (default hierarchy.csv)")
    p.add_argument("--t-end", type=float, help="override t_end")
    p.add_argument("--samples", type=int, default=101)
    p.add_argument("--eps-variant", action="store_true",
                   help="use the cancellation-weighted bound constants")
    p.set_defaults(func=_cmd_hierarchy)

    p = sub.add_parser("verify-lemmas", help="run the inequality verification battery")
    p.add_argument("--sweep", choices=("quick", "full"), default="quick")
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--out", help="write a machine-readable JSON summary")
    p.set_defaults(func=_cmd_verify_lemmas)

    p = sub.add_parser("ml-eval", help="tabulate the Mittag-Leffler function")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--x-grid", required=True, help="lo:hi:count")
    p.set_defaults(func=_cmd_ml_eval)

    p = sub.add_parser("recipe", help="compute the certified exponential rate")
    p.add_argument("config")
    p.add_argument("--eps-variant", action="store_true")
    p.set_defaults(func=_cmd_recipe)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        _env_threads()  # validate even though the engine is single-threaded
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            print("KM-ERR: a subcommand is required", file=sys.stderr)
            return EXIT_VALIDATION
        return args.func(args)
    except _ArgumentError as exc:
        parser.print_usage(sys.stderr)
        print(f"KM-ERR: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConfigError as exc:
        print(f"KM-ERR: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except KMError as exc:
        print(f"KM-ERR: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(f"KM-ERR: unexpected failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
