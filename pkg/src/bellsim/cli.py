"""Command-line entry point.

Subcommands: chsh, lhv-scan, optimize, counterfactual, bomb, landscape.
Artifacts carry {"schema_version", "config", "results"}; wall-clock runtime
goes to stderr so identical configurations produce byte-identical files.
Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from typing import Callable, Optional, Sequence

from .config import (
    ConfigError,
    ExperimentConfig,
    parse_angles,
    parse_config_file,
    resolve_model,
    resolve_seed,
    sign_pattern_from_string,
    sign_pattern_to_string,
)
from .counterfactual import classify_definiteness, ledger_text, record_run
from .experiment import model_exact_correlations, run_chsh_experiment
from .interferometer import InterferometerSpec, OUTCOMES, port_probabilities, run_bomb_trials
from .optimize import optimize_angles, s_landscape
from .polytope import enumerate_deterministic_strategies, strategy_correlation
from .quantum import BELL_KINDS, PRODUCT_KINDS, make_named_state
from .stats import DEFAULT_SIGN_PATTERN, PAIR_ORDER, SIGN_PATTERNS, classify_bound

_STATE_CHOICES = BELL_KINDS + PRODUCT_KINDS


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellsim")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, model_flags: bool = True) -> None:
        p.add_argument("--config", help="flat key = JSON config file")
        if model_flags:
            p.add_argument("--model", help="catalog name, 'quantum', 'nonlocal', or JSON")
            p.add_argument("--state", choices=_STATE_CHOICES)
            p.add_argument("--angles", help="four radians: a,a',b,b'")
            p.add_argument("--trials", type=int)
            p.add_argument("--seed", type=int)
            p.add_argument("--threads", type=int)
        p.add_argument("--pattern", help="sign pattern such as +-++")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"))

    p_chsh = sub.add_parser("chsh", help="run trials for the four setting pairs and estimate S")
    add_common(p_chsh)
    p_chsh.add_argument(
        "--exact",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="skip sampling; compute S from exact expectation values",
    )

    p_scan = sub.add_parser("lhv-scan", help="enumerate all 16 deterministic strategies")
    add_common(p_scan, model_flags=False)

    p_opt = sub.add_parser("optimize", help="maximize |S| over the four angles")
    p_opt.add_argument("--config", help="flat key = JSON config file")
    p_opt.add_argument("--state", choices=_STATE_CHOICES)
    p_opt.add_argument("--pattern")
    p_opt.add_argument("--grid", type=int, help="grid points per angle (>= 8)")
    p_opt.add_argument("--tolerance", type=float)
    p_opt.add_argument("--out")
    p_opt.add_argument("--format", choices=("json", "csv"))

    p_cf = sub.add_parser("counterfactual", help="record a run, replay it, classify the model")
    add_common(p_cf)
    p_cf.add_argument("--stats-trials", type=int, dest="stats_trials")
    p_cf.add_argument("--ledger", help="path for the JSON-lines trial ledger")

    p_bomb = sub.add_parser("bomb", help="interferometer with an optional absorber")
    p_bomb.add_argument("--config", help="flat key = JSON config file")
    p_bomb.add_argument("--reflectivity", type=float)
    p_bomb.add_argument("--bomb", action=argparse.BooleanOptionalAction, default=None)
    p_bomb.add_argument("--phase", type=float)
    p_bomb.add_argument("--trials", type=int)
    p_bomb.add_argument("--seed", type=int)
    p_bomb.add_argument(
        "--exact",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="skip sampling; report exact probabilities only",
    )
    p_bomb.add_argument("--out")
    p_bomb.add_argument("--format", choices=("json", "csv"))

    p_land = sub.add_parser("landscape", help="S on a 2-D angle slice, CSV grid")
    p_land.add_argument("--config", help="flat key = JSON config file")
    p_land.add_argument("--state", choices=_STATE_CHOICES)
    p_land.add_argument("--pattern")
    p_land.add_argument("--fixed", help="two fixed angles, e.g. \"a=0,a'=1.5707963\"")
    p_land.add_argument("--resolution", type=int)
    p_land.add_argument("--out")
    p_land.add_argument("--format", choices=("json", "csv"))
    return parser


def _merged(args: argparse.Namespace, file_values: dict, key: str, default=None):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in file_values:
        return file_values[key]
    return default


def _document(config: dict, results: dict) -> str:
    return json.dumps({"schema_version": 1, "config": config, "results": results}, indent=2) + "\n"


def _kv_csv(rows: Sequence[tuple[str, object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["key", "value"])
    for key, value in rows:
        writer.writerow([key, value if isinstance(value, str) else repr(value)])
    return buffer.getvalue()


def _write_artifacts(artifacts: Sequence[tuple[Optional[str], str]]) -> None:
    staged = []
    try:
        for path, text in artifacts:
            if path is None:
                continue
            tmp = path + ".tmp"
            with open(tmp, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    except OSError:
        for tmp, _ in staged:
            try:
                os.unlink(tmp)
            except OSError:
                pass
        raise
    for path, text in artifacts:
        if path is None:
            sys.stdout.write(text)


def _experiment_config(args: argparse.Namespace, file_values: dict) -> ExperimentConfig:
    angles_raw = _merged(args, file_values, "angles")
    angles = parse_angles(angles_raw) if angles_raw is not None else None
    model = resolve_model(
        _merged(args, file_values, "model", "quantum"),
        state=_merged(args, file_values, "state"),
        angles=angles,
    )
    pattern_raw = _merged(args, file_values, "pattern")
    pattern = (
        sign_pattern_from_string(pattern_raw) if pattern_raw else DEFAULT_SIGN_PATTERN
    )
    return ExperimentConfig(
        model=model,
        trials_per_pair=int(_merged(args, file_values, "trials", 100_000)),
        seed=resolve_seed(getattr(args, "seed", None), file_values.get("seed")),
        sign_pattern=pattern,
        out_path=_merged(args, file_values, "out"),
        out_format=_merged(args, file_values, "format", "json"),
        threads=int(_merged(args, file_values, "threads", 1)),
        exact=bool(_merged(args, file_values, "exact", False)),
    )


def _cmd_chsh(args: argparse.Namespace, file_values: dict) -> int:
    cfg = _experiment_config(args, file_values)
    config_echo = {
        "command": "chsh",
        "model": cfg.model.to_dict(),
        "trials_per_pair": cfg.trials_per_pair,
        "seed": cfg.seed,
        "sign_pattern": sign_pattern_to_string(cfg.sign_pattern),
        "exact": cfg.exact,
        "format": cfg.out_format,
    }
    if cfg.exact:
        vector = model_exact_correlations(cfg.model)
        values = dict(zip(PAIR_ORDER, vector.as_tuple()))
        s_value = sum(s * values[pair] for s, pair in zip(cfg.sign_pattern, PAIR_ORDER))
        results = {
            "exact": True,
            "pairs": [
                {"left": x, "right": y, "value": values[(x, y)]} for x, y in PAIR_ORDER
            ],
            "s_value": s_value,
            "s_std_error": 0.0,
            "bound_class": classify_bound(abs(s_value), 0.0),
        }
    else:
        outcome = run_chsh_experiment(
            cfg.model, cfg.trials_per_pair, cfg.seed, cfg.sign_pattern, cfg.threads
        )
        pairs = []
        for x, y in PAIR_ORDER:
            counts = outcome.counts[(x, y)]
            estimate = outcome.result.correlations[(x, y)]
            pairs.append(
                {
                    "left": x,
                    "right": y,
                    "counts": {
                        "n_pp": counts.n_pp,
                        "n_pm": counts.n_pm,
                        "n_mp": counts.n_mp,
                        "n_mm": counts.n_mm,
                    },
                    "value": estimate.value,
                    "std_error": estimate.std_error,
                }
            )
        results = {
            "exact": False,
            "trials_per_pair": cfg.trials_per_pair,
            "pairs": pairs,
            "s_value": outcome.result.s_value,
            "s_std_error": outcome.result.s_std_error,
            "bound_class": outcome.result.bound_class,
        }
    if cfg.out_format == "csv":
        text = _chsh_csv(results)
    else:
        text = _document(config_echo, results)
    _write_artifacts([(cfg.out_path, text)])
    return 0


def _chsh_csv(results: dict) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        ["section", "left", "right", "n_pp", "n_pm", "n_mp", "n_mm", "value", "std_error", "bound_class"]
    )
    for pair in results["pairs"]:
        counts = pair.get("counts", {})
        writer.writerow(
            [
                "correlation",
                pair["left"],
                pair["right"],
                counts.get("n_pp", ""),
                counts.get("n_pm", ""),
                counts.get("n_mp", ""),
                counts.get("n_mm", ""),
                repr(pair["value"]),
                repr(pair.get("std_error", 0.0)),
                "",
            ]
        )
    writer.writerow(
        [
            "s_statistic",
            "",
            "",
            "",
            "",
            "",
            "",
            repr(results["s_value"]),
            repr(results["s_std_error"]),
            results["bound_class"],
        ]
    )
    return buffer.getvalue()


def _cmd_lhv_scan(args: argparse.Namespace, file_values: dict) -> int:
    out_path = _merged(args, file_values, "out")
    out_format = _merged(args, file_values, "format", "json")
    strategies = []
    best_overall = 0.0
    for strategy in enumerate_deterministic_strategies():
        vector = strategy_correlation(strategy).as_tuple()
        best = max(
            abs(sum(s * e for s, e in zip(pattern, vector))) for pattern in SIGN_PATTERNS
        )
        best_overall = max(best_overall, best)
        strategies.append(
            {
                "index": strategy.index,
                "responses": {**strategy.response_left, **strategy.response_right},
                "correlations": list(vector),
                "best_abs_s": best,
            }
        )
    results = {"strategies": strategies, "max_abs_s": best_overall}
    config_echo = {"command": "lhv-scan", "format": out_format}
    if out_format == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(
            ["index", "r_a", "r_a'", "r_b", "r_b'", "e_ab", "e_ab'", "e_a'b", "e_a'b'", "best_abs_s"]
        )
        for row in strategies:
            resp = row["responses"]
            writer.writerow(
                [row["index"], resp["a"], resp["a'"], resp["b"], resp["b'"]]
                + [repr(float(e)) for e in row["correlations"]]
                + [repr(float(row["best_abs_s"]))]
            )
        writer.writerow(["max", "", "", "", "", "", "", "", "", repr(float(best_overall))])
        text = buffer.getvalue()
    else:
        text = _document(config_echo, results)
    _write_artifacts([(out_path, text)])
    return 0


def _cmd_optimize(args: argparse.Namespace, file_values: dict) -> int:
    state_kind = _merged(args, file_values, "state", "psi_minus")
    pattern_raw = _merged(args, file_values, "pattern")
    pattern = sign_pattern_from_string(pattern_raw) if pattern_raw else DEFAULT_SIGN_PATTERN
    grid = int(_merged(args, file_values, "grid", 16))
    tolerance = float(_merged(args, file_values, "tolerance", 1e-8))
    out_path = _merged(args, file_values, "out")
    out_format = _merged(args, file_values, "format", "json")
    try:
        state = make_named_state(state_kind)
        result = optimize_angles(state, pattern, grid_resolution=grid, tolerance=tolerance)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    config_echo = {
        "command": "optimize",
        "state": state_kind,
        "sign_pattern": sign_pattern_to_string(pattern),
        "grid_resolution": grid,
        "tolerance": tolerance,
    }
    results = {
        "angles": list(result.angles),
        "s_value": result.s_value,
        "abs_s": abs(result.s_value),
        "iterations": result.iterations,
        "converged": result.converged,
    }
    if out_format == "csv":
        rows = [("state", state_kind)] + [
            (key, value) for key, value in results.items() if key != "angles"
        ]
        rows[1:1] = [(f"angle_{label}", angle) for label, angle in zip(("a", "a'", "b", "b'"), result.angles)]
        text = _kv_csv(rows)
    else:
        text = _document(config_echo, results)
    _write_artifacts([(out_path, text)])
    return 0


def _cmd_counterfactual(args: argparse.Namespace, file_values: dict) -> int:
    cfg = _experiment_config(args, file_values)
    stats_trials = int(_merged(args, file_values, "stats_trials", 100_000))
    if stats_trials < 1:
        raise ConfigError(f"stats-trials must be at least 1, got {stats_trials}")
    ledger_path = _merged(args, file_values, "ledger")
    schedule = [PAIR_ORDER[i % 4] for i in range(cfg.trials_per_pair)]
    ledger = record_run(cfg.model, schedule, cfg.seed)
    verdict = classify_definiteness(ledger, trials_for_stats=stats_trials, threads=cfg.threads)
    evidence = verdict.evidence
    feasibility = {
        "feasible": evidence.feasibility.feasible,
        "weights": None
        if evidence.feasibility.weights is None
        else [float(w) for w in evidence.feasibility.weights],
        "violated_facet": None
        if evidence.feasibility.violated_facet is None
        else {
            "sign_pattern": sign_pattern_to_string(evidence.feasibility.violated_facet.sign_pattern),
            "margin": evidence.feasibility.violated_facet.margin,
        },
    }
    config_echo = {
        "command": "counterfactual",
        "model": cfg.model.to_dict(),
        "trials": cfg.trials_per_pair,
        "stats_trials": stats_trials,
        "seed": cfg.seed,
    }
    results = {
        "classification": verdict.classification,
        "correlations": list(evidence.correlation_vector.as_tuple()),
        "feasibility": feasibility,
        "feasibility_tolerance": evidence.feasibility_tolerance,
        "cell_kinds": evidence.cell_kinds,
        "trials_examined": evidence.trials_examined,
        "factual_replays_matched": evidence.factual_replays_matched,
    }
    if cfg.out_format == "csv":
        rows = [
            ("classification", verdict.classification),
            ("feasible", evidence.feasibility.feasible),
            ("feasibility_tolerance", evidence.feasibility_tolerance),
            ("trials_examined", evidence.trials_examined),
            ("factual_replays_matched", evidence.factual_replays_matched),
        ]
        for pair, value in zip(PAIR_ORDER, evidence.correlation_vector.as_tuple()):
            rows.append((f"e_{pair[0]}{pair[1]}", value))
        for kind, count in evidence.cell_kinds.items():
            rows.append((f"cells_{kind}", count))
        text = _kv_csv(rows)
    else:
        text = _document(config_echo, results)
    artifacts: list[tuple[Optional[str], str]] = [(cfg.out_path, text)]
    if ledger_path is not None:
        artifacts.append((ledger_path, ledger_text(ledger)))
    _write_artifacts(artifacts)
    return 0


def _cmd_bomb(args: argparse.Namespace, file_values: dict) -> int:
    reflectivity = float(_merged(args, file_values, "reflectivity", 0.5))
    bomb_present = bool(_merged(args, file_values, "bomb", True))
    phase = float(_merged(args, file_values, "phase", 0.0))
    trials = int(_merged(args, file_values, "trials", 100_000))
    exact = bool(_merged(args, file_values, "exact", False))
    seed = resolve_seed(getattr(args, "seed", None), file_values.get("seed"))
    out_path = _merged(args, file_values, "out")
    out_format = _merged(args, file_values, "format", "json")
    try:
        spec = InterferometerSpec(reflectivity=reflectivity, bomb_present=bomb_present, phase=phase)
        probabilities = port_probabilities(spec)
        frequencies = None if exact else run_bomb_trials(spec, trials, seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    config_echo = {
        "command": "bomb",
        "reflectivity": reflectivity,
        "bomb_present": bomb_present,
        "phase": phase,
        "trials": 0 if exact else trials,
        "seed": seed,
        "exact": exact,
    }
    results = {"interferometry": {"probabilities": probabilities, "frequencies": frequencies}}
    if out_format == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["outcome", "probability", "frequency"])
        for name in OUTCOMES:
            frequency = "" if frequencies is None else repr(frequencies[name])
            writer.writerow([name, repr(probabilities[name]), frequency])
        text = buffer.getvalue()
    else:
        text = _document(config_echo, results)
    _write_artifacts([(out_path, text)])
    return 0


def _parse_fixed(raw: object) -> dict[str, float]:
    if isinstance(raw, dict):
        items = list(raw.items())
    elif isinstance(raw, str):
        items = []
        for segment in raw.split(","):
            if "=" not in segment:
                raise ConfigError(f"--fixed segments must look like a=0.5, got {segment!r}")
            label, _, value = segment.partition("=")
            items.append((label.strip(), value.strip()))
    else:
        raise ConfigError(f"cannot interpret fixed angles {raw!r}")
    try:
        return {label: float(value) for label, value in items}
    except ValueError as exc:
        raise ConfigError(f"fixed angles must be numbers: {raw!r}") from exc


def _cmd_landscape(args: argparse.Namespace, file_values: dict) -> int:
    state_kind = _merged(args, file_values, "state", "psi_minus")
    pattern_raw = _merged(args, file_values, "pattern")
    pattern = sign_pattern_from_string(pattern_raw) if pattern_raw else DEFAULT_SIGN_PATTERN
    fixed_raw = _merged(args, file_values, "fixed", "a=0.0,a'=1.5707963267948966")
    resolution = int(_merged(args, file_values, "resolution", 32))
    out_path = _merged(args, file_values, "out")
    out_format = _merged(args, file_values, "format", "csv")
    fixed = _parse_fixed(fixed_raw)
    try:
        grid = s_landscape(make_named_state(state_kind), fixed, resolution, pattern)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if out_format == "csv":
        text = grid.to_csv()
    else:
        config_echo = {
            "command": "landscape",
            "state": state_kind,
            "sign_pattern": sign_pattern_to_string(pattern),
            "fixed": fixed,
            "resolution": resolution,
        }
        results = {
            "row_label": grid.row_label,
            "col_label": grid.col_label,
            "row_angles": [float(t) for t in grid.row_angles],
            "col_angles": [float(t) for t in grid.col_angles],
            "values": [[float(v) for v in row] for row in grid.values],
        }
        text = _document(config_echo, results)
    _write_artifacts([(out_path, text)])
    return 0


_COMMANDS: dict[str, Callable[[argparse.Namespace, dict], int]] = {
    "chsh": _cmd_chsh,
    "lhv-scan": _cmd_lhv_scan,
    "optimize": _cmd_optimize,
    "counterfactual": _cmd_counterfactual,
    "bomb": _cmd_bomb,
    "landscape": _cmd_landscape,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        file_values = parse_config_file(args.config) if getattr(args, "config", None) else {}
        code = _COMMANDS[args.command](args, file_values)
    except ConfigError as exc:
        print(f"bellsim: configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"bellsim: I/O error: {exc}", file=sys.stderr)
        return 3
    runtime_ms = int(round((time.perf_counter() - started) * 1000.0))
    print(f"runtime_ms={runtime_ms}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
