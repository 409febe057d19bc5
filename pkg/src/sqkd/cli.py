"""``sqkd`` command line: simulate, attack-eval, robustness-sweep, calibrate.

Exit codes: 0 success, 2 configuration error, 3 failed assertion.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace

from .adversary import attack_outcome, robustness_sweep, verify_no_error_constraints
from .config import ConfigError, ScenarioConfig, dump_config, load_config, parse_epsilons
from .metrics import stability_report
from .report import build_report, key_rate_note, render_intervals, render_text, write_outputs
from .session import (
    UnreachableTarget,
    abort_check,
    calibrate_visibility,
    expected_metrics,
    run_session,
    sample_check_bits,
)

EXIT_OK, EXIT_CONFIG, EXIT_ASSERT = 0, 2, 3
ROBUST_INFO_TOL = 1e-6


class AssertionFailure(Exception):
    pass


def _scenario(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out_dir(args, cfg) -> str:
    return args.out if args.out is not None else cfg.out_dir


def _session(cfg: ScenarioConfig, workers: int):
    if cfg.n_rounds < 1:
        raise ConfigError("n_rounds must be >= 1 for a simulated session")
    return run_session(
        cfg.n_rounds,
        cfg.round_config(),
        cfg.physics(),
        cfg.seed,
        attack=cfg.attack_model(),
        workers=workers,
        interval_rounds=cfg.resolved_interval_rounds(),
    )


def _session_sections(cfg: ScenarioConfig, result) -> dict:
    check_qber, n_check, key_left, _ = sample_check_bits(result, cfg.check_fraction, cfg.seed)
    decision = abort_check(result, cfg.threshold_ctrl_x, cfg.threshold_sift_z, cfg.check_fraction, cfg.seed)
    return {
        "session": result.summary(),
        "expected": expected_metrics(cfg.round_config(), cfg.physics(), cfg.attack_model()),
        "stability": stability_report(result.time_series).as_dict(),
        "abort_check": {
            "decision": decision.value,
            "check_bits": n_check,
            "check_qber_sift_z": check_qber,
            "threshold_ctrl_x": cfg.threshold_ctrl_x,
            "threshold_sift_z": cfg.threshold_sift_z,
            "remaining_key_length": int(key_left.size),
        },
        "notes": [key_rate_note(result.raw_key_rate_bps, result.response_rate)],
    }


def _attack_section(attack) -> dict:
    out = attack_outcome(attack)
    rep = verify_no_error_constraints(attack)
    return {
        "name": attack.name,
        "ancilla_dim": attack.ancilla_dim,
        "e_ctrl_x": out.e_ctrl_x,
        "e_sift_z": out.e_sift_z,
        "eve_trace_distance": out.eve_trace_distance,
        "eve_holevo_bits": out.eve_holevo_bits,
        "ctrl_x_residual": rep.ctrl_x_residual,
        "sift0_residual": rep.sift0_residual,
        "sift1_residual": rep.sift1_residual,
        "trace_distance_bound": rep.trace_distance_bound,
        "implication_holds": rep.implication_holds,
    }


def cmd_simulate(args) -> int:
    cfg = _scenario(args)
    result = _session(cfg, args.workers)
    sections = _session_sections(cfg, result)
    if cfg.attack_model() is not None:
        sections["attack"] = _attack_section(cfg.attack_model())
    report = build_report("simulate", cfg.as_dict(), sections)
    write_outputs(
        _out_dir(args, cfg),
        report,
        {"intervals.csv": render_intervals(result.time_series), "raw_key.txt": result.raw_key + "\n"},
    )
    sys.stdout.write(render_text(report))
    return EXIT_OK


def _band_check(name, observed, expected, n) -> dict:
    """Observed rate against the exact expectation with a 3-sigma binomial band."""
    if n == 0 or math.isnan(expected):
        return {"metric": name, "observed": observed, "expected": expected, "n": n, "sigma": None, "ok": True}
    sigma = math.sqrt(max(expected * (1 - expected), 0.0) / n)
    ok = abs(observed - expected) <= 3 * sigma + 1e-12
    return {"metric": name, "observed": observed, "expected": expected, "n": n, "sigma": sigma, "ok": ok}


def cmd_attack_eval(args) -> int:
    cfg = _scenario(args)
    attack = cfg.attack_model()
    if attack is None:
        raise ConfigError("attack-eval needs an attack (attack = <name> or generator)")
    sections = {"attack": _attack_section(attack)}
    ok = True
    if cfg.n_rounds > 0:
        result = _session(cfg, args.workers)
        exp = expected_metrics(cfg.round_config(), cfg.physics(), attack)
        checks = [
            _band_check("qber_ctrl_x", result.qber_ctrl_x, exp["qber_ctrl_x"], result.ctrl_x_conclusive),
            _band_check("qber_sift_z", result.qber_sift_z, exp["qber_sift_z"], result.sift_z_conclusive),
        ]
        ok = all(c["ok"] for c in checks)
        sections["monte_carlo"] = checks
        sections["session"] = result.summary()
    report = build_report("attack-eval", cfg.as_dict(), sections)
    write_outputs(_out_dir(args, cfg), report)
    sys.stdout.write(render_text(report))
    if not ok:
        raise AssertionFailure("Monte-Carlo QBER disagrees with the exact attack rates beyond 3 sigma")
    return EXIT_OK


def cmd_robustness_sweep(args) -> int:
    cfg = _scenario(args)
    eps = parse_epsilons(args.epsilons) if args.epsilons else cfg.epsilon_list()
    try:
        results = robustness_sweep(eps, cfg.ancilla_dim, cfg.optimizer())
    except (FloatingPointError, RuntimeError) as exc:
        raise AssertionFailure(f"optimizer failure: {exc}") from None
    rows = [
        {
            "epsilon": r.epsilon,
            "best_info_trace_distance": r.trace_distance,
            "best_info_holevo": r.holevo_bits,
            "e_ctrl_x": r.e_ctrl_x,
            "e_sift_z": r.e_sift_z,
            "starts": r.starts,
            "iterations": r.iterations,
            "feasible_starts": r.feasible_starts,
        }
        for r in results
    ]
    table = ",".join(rows[0]) + "\n" + "".join(",".join(repr(v) for v in row.values()) + "\n" for row in rows)
    failures = [
        f"info {r.trace_distance:.3e} > {ROBUST_INFO_TOL} at epsilon 0"
        for r in results
        if r.epsilon == 0.0 and r.trace_distance > ROBUST_INFO_TOL
    ]
    failures += [
        f"best info decreases between epsilon {a.epsilon} and {b.epsilon}"
        for a, b in zip(results, results[1:])
        if b.trace_distance < a.trace_distance
    ]
    report = build_report("robustness-sweep", cfg.as_dict(), {"sweep": rows, "failures": failures})
    write_outputs(_out_dir(args, cfg), report, {"sweep.csv": table})
    sys.stdout.write(table)
    if failures:
        raise AssertionFailure("; ".join(failures))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _scenario(args)
    target = args.target_contrast if args.target_contrast is not None else cfg.target_contrast
    try:
        v = calibrate_visibility(target, cfg.round_config(), cfg.physics())
    except UnreachableTarget as exc:
        raise ConfigError(str(exc)) from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    calibrated = replace(cfg, visibility=v, target_contrast=target)
    exp = expected_metrics(calibrated.round_config(), calibrated.physics())
    report = build_report(
        "calibrate",
        calibrated.as_dict(),
        {"calibration": {"target_contrast": target, "visibility": v, "expected": exp}},
    )
    write_outputs(_out_dir(args, cfg), report, {"calibrated.cfg": dump_config(calibrated)})
    sys.stdout.write(f"visibility = {v!r}\ncontrast_overall = {exp['contrast_overall']!r}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file, or a bundled name such as paper.cfg")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output directory (default: config out_dir)")
    common.add_argument("--workers", type=int, default=1, help="round shards run in parallel")

    parser = argparse.ArgumentParser(prog="sqkd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run a Monte-Carlo session").set_defaults(
        func=cmd_simulate
    )
    sub.add_parser("attack-eval", parents=[common], help="exact attack rates plus Monte-Carlo check").set_defaults(
        func=cmd_attack_eval
    )
    p = sub.add_parser("robustness-sweep", parents=[common], help="best Eve information per error budget")
    p.add_argument("--epsilons", help="comma-separated error budgets in [0, 0.5]")
    p.set_defaults(func=cmd_robustness_sweep)
    p = sub.add_parser("calibrate", parents=[common], help="fit visibility to a target contrast")
    p.add_argument("--target-contrast", type=float)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssertionFailure as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
