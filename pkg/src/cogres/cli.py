"""Command-line front end: ingest, profile, simulate, fit, evaluate, report, odds.

Every run resolves its options from three layers (command line over config
file over defaults), hashes its inputs, and writes a manifest next to its
outputs.  Two runs with identical manifests produce byte-identical CSVs:
all randomness flows from the seed recorded there, and worker threads only
parallelize read-only queries.

Exit codes: 0 success, 2 input error, 3 data-quality error, 4 precondition
failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import math
import os
import sys

import numpy as np

from . import __version__, fitting, infotheory, metrics, profiles, synth
from .ingest import (
    DEFAULT_BREAK_SECONDS,
    DEFAULT_MIN_ATTEMPTS,
    DataQualityError,
    IngestError,
    Timeline,
    ingest_csv,
    read_attempts,
    write_attempts,
)
from .kinetics import (
    FITTED_ONE,
    FITTED_TWO,
    ModelKind,
    NumericsError,
    read_trajectories,
    write_trajectories,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DATA_QUALITY = 3
EXIT_PRECONDITION = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _sha256(path) -> str:
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                digest.update(chunk)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_INPUT) from exc
    return digest.hexdigest()


def _read_config(path) -> dict[str, str]:
    out: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, sep, value = line.partition("=")
                if not sep:
                    raise CliError(
                        f"{path}:{lineno}: expected key=value, got {line!r}",
                        EXIT_INPUT,
                    )
                out[key.strip()] = value.strip()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}", EXIT_INPUT) from exc
    return out


def _resolve(args: argparse.Namespace, defaults: dict[str, object]) -> dict[str, object]:
    """Layer CLI values over config-file values over defaults."""
    config = _read_config(args.config) if getattr(args, "config", None) else {}
    unknown = set(config) - set(defaults)
    if unknown:
        raise CliError(
            f"config contains unknown keys: {sorted(unknown)}", EXIT_INPUT
        )
    resolved: dict[str, object] = {}
    for key, default in defaults.items():
        value = default
        if key in config:
            caster = type(default) if default is not None else str
            if caster is bool:
                value = config[key].lower() in ("1", "true", "yes")
            else:
                try:
                    value = caster(config[key])
                except ValueError as exc:
                    raise CliError(
                        f"config key {key}: cannot parse {config[key]!r}",
                        EXIT_INPUT,
                    ) from exc
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            value = cli_value
        resolved[key] = value
    return resolved


def _write_manifest(path, command: str, options: dict[str, object], inputs: dict[str, str]) -> None:
    lines = {"command": command, "version": __version__}
    for key, value in options.items():
        lines[f"opt_{key}"] = "" if value is None else str(value)
    for name, in_path in inputs.items():
        lines[f"input_{name}"] = str(in_path)
        lines[f"sha256_{name}"] = _sha256(in_path)
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(lines):
            fh.write(f"{key}={lines[key]}\n")


def _load_attempts(path, break_seconds: int) -> list[Timeline]:
    if not os.path.exists(path):
        raise CliError(f"attempt table {path} does not exist", EXIT_INPUT)
    return read_attempts(path, break_threshold_seconds=break_seconds)


def _stats_csv(path, header: list[str], rows: list[list[object]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmtv(x: float) -> str:
    return "" if (isinstance(x, float) and math.isnan(x)) else f"{x:.10g}"


# ---------------------------------------------------------------------------
# ingest


def cmd_ingest(args: argparse.Namespace) -> int:
    opts = _resolve(args, {
        "break_seconds": DEFAULT_BREAK_SECONDS,
        "min_attempts": DEFAULT_MIN_ATTEMPTS,
    })
    try:
        timelines, stats = ingest_csv(
            args.input,
            min_attempts=opts["min_attempts"],
            break_threshold_seconds=opts["break_seconds"],
        )
    except IngestError as exc:
        raise CliError(str(exc), EXIT_INPUT) from exc
    except DataQualityError as exc:
        raise CliError(str(exc), EXIT_DATA_QUALITY) from exc
    write_attempts(timelines, args.out)
    _write_manifest(
        str(args.out) + ".manifest", "ingest", opts, {"raw": args.input}
    )
    n_attempts = sum(len(tl) for tl in timelines)
    questions = {a.question_id for tl in timelines for a in tl.attempts}
    print(f"users={len(timelines)} attempts={n_attempts} questions={len(questions)}")
    print(
        f"rows_total={stats.rows_total} malformed={stats.rows_malformed} "
        f"duplicates={stats.duplicates_dropped} "
        f"users_below_min={stats.users_below_min}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# profile


def cmd_profile(args: argparse.Namespace) -> int:
    opts = _resolve(args, {
        "break_seconds": DEFAULT_BREAK_SECONDS,
        "rho": 0.03,
        "min_percentile_users": profiles.MIN_USERS_FOR_PERCENTILES,
    })
    timelines = _load_attempts(args.input, opts["break_seconds"])
    corpus = profiles.build_corpus_stats(
        timelines, min_users_for_percentiles=opts["min_percentile_users"]
    )
    profs = profiles.build_profiles(timelines, corpus)
    profiles.write_profiles(profs, args.out, rho=opts["rho"])
    _write_manifest(
        str(args.out) + ".manifest", "profile", opts, {"attempts": args.input}
    )
    print(f"profiled_users={len(profs)} of {len(timelines)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

# Link coefficients per preset: the depleting cohort pairs the slow-reservoir
# dynamics with a steep link so outcome probability tracks depletion; the
# frozen preset holds every rate at zero, leaving accuracy constant at the
# intercept.
_PRESETS = {
    "depleting": (synth.DEPLETING_PARAMS, -2.2, 7.0),
    "frozen": (synth.FROZEN_PARAMS, 0.85, 7.0),
}


def cmd_simulate(args: argparse.Namespace) -> int:
    opts = _resolve(args, {
        "users": 200,
        "questions": 60,
        "seed": 0,
        "user_prefix": "synth",
    })
    params, beta0, beta1 = _PRESETS[args.preset]
    config = synth.SynthConfig(
        n_users=opts["users"],
        questions_per_user=opts["questions"],
        params=params,
        beta0=beta0,
        beta1=beta1,
        user_prefix=opts["user_prefix"],
        seed=opts["seed"],
    )
    cohort = synth.generate_cohort(config)
    truth_path = args.truth if args.truth else str(args.out) + ".truth.csv"
    synth.write_cohort(cohort, args.out, truth_path)
    _write_manifest(
        str(args.out) + ".manifest",
        "simulate",
        {**opts, "preset": args.preset, "beta0": beta0, "beta1": beta1},
        {},
    )
    print(
        f"preset={args.preset} users={config.n_users} "
        f"records={len(cohort.records)} truth={truth_path}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit / evaluate share option plumbing


_FIT_DEFAULTS: dict[str, object] = {
    "break_seconds": DEFAULT_BREAK_SECONDS,
    "seed": 0,
    "threads": -1,
    "max_evals": 500,
    "tol": 1e-4,
    "rhobeg": 0.1,
    "bound_lower": 0.0001,
    "bound_upper": 2.0,
    "min_train_attempts": 500,
    "max_train_users": 250,
    "min_train_users": 10,
    "min_test_attempts": 25,
    "min_test_accuracy": 0.2,
    "grid_size": metrics.GRID_SIZE,
    "min_percentile_users": profiles.MIN_USERS_FOR_PERCENTILES,
    "a_max": 1.0,
    "k_a": 0.858,
    "k_b_sat": 0.1,
}


def _model_kind(name: str) -> ModelKind:
    return ModelKind.ONE_RESOURCE if name == "one" else ModelKind.TWO_RESOURCE


def _fit_setup(args: argparse.Namespace):
    opts = _resolve(args, _FIT_DEFAULTS)
    timelines = _load_attempts(args.input, opts["break_seconds"])
    corpus = profiles.build_corpus_stats(
        timelines, min_users_for_percentiles=opts["min_percentile_users"]
    )
    profs = profiles.build_profiles(timelines, corpus)
    spec = fitting.SplitSpec(
        min_train_attempts=opts["min_train_attempts"],
        max_train_users=opts["max_train_users"],
        min_train_users=opts["min_train_users"],
        min_test_attempts=opts["min_test_attempts"],
        min_test_accuracy=opts["min_test_accuracy"],
    )
    try:
        train, test = fitting.split_train_test(timelines, spec)
    except fitting.SplitError as exc:
        raise CliError(str(exc), EXIT_PRECONDITION) from exc
    table = metrics.build_expected_accuracy(
        [a for tl in train for a in tl.attempts], grid_size=opts["grid_size"]
    )
    cfg = fitting.FitConfig(
        kind=_model_kind(args.model),
        lower=opts["bound_lower"],
        upper=opts["bound_upper"],
        max_evals=opts["max_evals"],
        tol=opts["tol"],
        rhobeg=opts["rhobeg"],
        seed=opts["seed"],
        workers=opts["threads"],
        a_max=opts["a_max"],
        k_a=opts["k_a"],
        k_b_sat=opts["k_b_sat"],
    )
    return opts, timelines, profs, spec, train, test, table, cfg


def _write_reports(out_dir, prefix, params, test, profs, table, cfg):
    trajectories = fitting.compute_trajectories(test, params, profs)
    try:
        eval_rows = fitting.evaluate(
            params, test, profs, table, cfg, trajectories=trajectories
        )
        cmi_rows = fitting.cmi_report(
            params, test, profs, table, cfg, trajectories=trajectories
        )
    except fitting.SplitError as exc:
        raise CliError(str(exc), EXIT_PRECONDITION) from exc
    fitting.write_eval_report(eval_rows, os.path.join(out_dir, f"{prefix}_table1.csv"))
    fitting.write_cmi_report(cmi_rows, os.path.join(out_dir, f"{prefix}_table2.csv"))
    by_user = {tl.user_id: tl for tl in test}
    write_trajectories(
        trajectories.values(), by_user, os.path.join(out_dir, f"{prefix}_trajectories.csv")
    )
    return eval_rows


def _print_eval(rows) -> None:
    for r in rows:
        pct = r.pct_of_entropy * 100.0
        print(
            f"{r.name}: mi={r.mi.value:.4f} bits control={r.control.value:.4f} "
            f"entropy={r.entropy_bits:.4f} explained={pct:.1f}% n={r.n}"
        )


def cmd_fit(args: argparse.Namespace) -> int:
    opts, _, profs, spec, train, test, table, cfg = _fit_setup(args)
    os.makedirs(args.out_dir, exist_ok=True)
    digest = fitting.split_hash(train, test)
    try:
        result = fitting.fit(cfg, train, profs, spec=spec, split_digest=digest)
    except (fitting.SplitError, NumericsError) as exc:
        raise CliError(str(exc), EXIT_PRECONDITION) from exc
    prefix = f"fit_{args.model}"
    fitting.write_fit_result(result, os.path.join(args.out_dir, f"{prefix}_params.txt"))
    _stats_csv(
        os.path.join(args.out_dir, f"{prefix}_trace.csv"),
        ["eval_index", "best_mi_bits"],
        [[i, f"{mi:.10g}"] for i, mi in result.trace],
    )
    eval_rows = _write_reports(args.out_dir, prefix, result.params, test, profs, table, cfg)
    _write_manifest(
        os.path.join(args.out_dir, f"{prefix}_manifest.txt"),
        "fit",
        {**opts, "model": args.model},
        {"attempts": args.input},
    )
    print(
        f"model={args.model} train_mi={result.train_mi:.4f} bits "
        f"n_evals={result.n_evals} budget_exhausted={int(result.budget_exhausted)}"
    )
    if result.budget_exhausted and result.n_evals <= 1:
        print("warning: evaluation budget spent at the starting point")
    _print_eval(eval_rows)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    opts, _, profs, spec, train, test, table, cfg = _fit_setup(args)
    os.makedirs(args.out_dir, exist_ok=True)
    if args.params:
        if not os.path.exists(args.params):
            raise CliError(f"params file {args.params} does not exist", EXIT_INPUT)
        params, meta = fitting.read_fit_result(args.params)
        if ModelKind(meta["model"]) is not cfg.kind:
            raise CliError(
                f"params file is for model {meta['model']!r}, not {args.model!r}",
                EXIT_INPUT,
            )
    else:
        params = FITTED_ONE if cfg.kind is ModelKind.ONE_RESOURCE else FITTED_TWO
    prefix = f"eval_{args.model}"
    eval_rows = _write_reports(args.out_dir, prefix, params, test, profs, table, cfg)
    inputs = {"attempts": args.input}
    if args.params:
        inputs["params"] = args.params
    _write_manifest(
        os.path.join(args.out_dir, f"{prefix}_manifest.txt"),
        "evaluate",
        {**opts, "model": args.model},
        inputs,
    )
    print(f"model={args.model} test_users={len(test)}")
    _print_eval(eval_rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def _suppress(positions, mean, sem, n, min_samples):
    rows = []
    for i, pos in enumerate(positions):
        if n[i] < min_samples or not math.isfinite(mean[i]):
            continue
        rows.append([int(pos), _fmtv(float(mean[i])), _fmtv(float(sem[i])), int(n[i])])
    return rows


def _binned_rows(stats_obj, min_samples):
    rows = []
    for i in range(stats_obj.centers.size):
        if stats_obj.n[i] < min_samples or not math.isfinite(stats_obj.mean[i]):
            continue
        rows.append([
            _fmtv(float(stats_obj.centers[i])),
            _fmtv(float(stats_obj.mean[i])),
            _fmtv(float(stats_obj.sem[i])),
            int(stats_obj.n[i]),
        ])
    return rows


def _quantile_edges(values: np.ndarray, n_bins: int) -> np.ndarray | None:
    values = values[np.isfinite(values)]
    if values.size < 2:
        return None
    edges = np.unique(np.quantile(values, np.linspace(0.0, 1.0, n_bins + 1)))
    if edges.size < 2:
        return None
    return edges


def cmd_report(args: argparse.Namespace) -> int:
    opts = _resolve(args, {
        "break_seconds": DEFAULT_BREAK_SECONDS,
        "max_positions": 20,
        "min_bin_samples": 30,
        "resource_bins": 20,
        "gap_bins": 12,
        "grid_size": metrics.GRID_SIZE,
    })
    timelines = _load_attempts(args.input, opts["break_seconds"])
    if not os.path.exists(args.trajectories):
        raise CliError(
            f"trajectory file {args.trajectories} does not exist", EXIT_INPUT
        )
    trajectories = read_trajectories(args.trajectories)
    os.makedirs(args.out_dir, exist_ok=True)
    min_n = opts["min_bin_samples"]

    all_attempts = [a for tl in timelines for a in tl.attempts]
    table = metrics.build_expected_accuracy(all_attempts, grid_size=opts["grid_size"])
    corpus = profiles.build_corpus_stats(timelines)

    # Break-aligned panels: performance, speed, learning by position.
    series = metrics.align_to_break(
        timelines, table, corpus, max_positions=opts["max_positions"]
    )
    header = ["questions_before_break", "mean", "sem", "n"]
    _stats_csv(
        os.path.join(args.out_dir, "fig1a_performance_vs_break.csv"),
        header,
        _suppress(series.positions, series.perf_mean, series.perf_sem, series.perf_n, min_n),
    )
    _stats_csv(
        os.path.join(args.out_dir, "fig1b_speed_vs_break.csv"),
        header,
        _suppress(series.positions, series.speed_mean, series.speed_sem, series.speed_n, min_n),
    )
    _stats_csv(
        os.path.join(args.out_dir, "fig1c_learning_vs_break.csv"),
        header,
        _suppress(series.positions, series.learned_mean, series.learned_sem, series.learned_n, min_n),
    )

    gaps, deltas = metrics.performance_change_vs_gap(timelines, table)
    pos = gaps > 0
    rows = []
    if pos.any():
        lo = max(1.0, float(gaps[pos].min()))
        hi = float(gaps[pos].max())
        if hi > lo:
            edges = np.logspace(np.log10(lo), np.log10(hi), opts["gap_bins"] + 1)
            rows = _binned_rows(metrics.binned_stats(gaps[pos], deltas[pos], edges), min_n)
    _stats_csv(
        os.path.join(args.out_dir, "fig1d_perf_change_vs_gap.csv"),
        ["gap_seconds_bin_center", "mean_delta_performance", "sem", "n"],
        rows,
    )

    # Resource-binned panels from the trajectory join.
    rel_dur_x_a, rel_dur_x_b, rel_dur_y = [], [], []
    perf_x_a, perf_x_b, perf_y = [], [], []
    learn_x_a, learn_x_b, learn_y = [], [], []
    diff_x_a, diff_y = [], []
    joined_users = 0
    for tl in timelines:
        tr = trajectories.get(tl.user_id)
        if tr is None or len(tr) != len(tl.attempts):
            continue
        joined_users += 1
        two = tr.b_start is not None
        learned_at = {s.first_index: s.learned for s in metrics.learning_outcomes(tl)}
        for i, att in enumerate(tl.attempts):
            a_s, a_e = float(tr.a_start[i]), float(tr.a_end[i])
            if not (math.isfinite(a_s) and math.isfinite(a_e)):
                continue
            b_s = float(tr.b_start[i]) if two else math.nan
            b_e = float(tr.b_end[i]) if two else math.nan
            mean_t = corpus.mean_correct_time(att.question_id)
            if mean_t is not None and mean_t > 0 and att.duration > 0:
                rel_dur_x_a.append(a_s)
                rel_dur_x_b.append(b_s)
                rel_dur_y.append(att.duration / mean_t)
            perf_x_a.append(a_e)
            perf_x_b.append(b_e)
            perf_y.append(metrics.performance(att, table))
            q_val = table.question_value.get(att.question_id)
            if q_val is not None:
                diff_x_a.append(a_s)
                diff_y.append(q_val)
            if i in learned_at:
                learn_x_a.append(a_e)
                learn_x_b.append(b_e)
                learn_y.append(float(learned_at[i]))

    def binned_panel(fname, xs, ys, x_label, y_label):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        rows = []
        keep = np.isfinite(xs) & np.isfinite(ys)
        edges = _quantile_edges(xs[keep], opts["resource_bins"])
        if edges is not None:
            rows = _binned_rows(
                metrics.binned_stats(xs[keep], ys[keep], edges), min_n
            )
        _stats_csv(
            os.path.join(args.out_dir, fname), [x_label, y_label, "sem", "n"], rows
        )

    binned_panel("fig2a_duration_vs_primary.csv", rel_dur_x_a, rel_dur_y,
                 "a_start_bin_center", "mean_relative_duration")
    binned_panel("fig2b_duration_vs_secondary.csv", rel_dur_x_b, rel_dur_y,
                 "b_start_bin_center", "mean_relative_duration")
    binned_panel("fig2c_learning_vs_primary.csv", learn_x_a, learn_y,
                 "a_end_bin_center", "learning_rate")
    binned_panel("fig2d_learning_vs_secondary.csv", learn_x_b, learn_y,
                 "b_end_bin_center", "learning_rate")
    binned_panel("fig2e_performance_vs_primary.csv", perf_x_a, perf_y,
                 "a_end_bin_center", "mean_performance")
    binned_panel("fig2f_performance_vs_secondary.csv", perf_x_b, perf_y,
                 "b_end_bin_center", "mean_performance")
    binned_panel("fig2g_difficulty_vs_primary.csv", diff_x_a, diff_y,
                 "a_start_bin_center", "mean_question_pct_correct")

    _write_manifest(
        os.path.join(args.out_dir, "report_manifest.txt"),
        "report",
        opts,
        {"attempts": args.input, "trajectories": args.trajectories},
    )
    print(f"joined_users={joined_users} panels=11 out_dir={args.out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# odds


def cmd_odds(args: argparse.Namespace) -> int:
    bits = args.bits
    if not (0.0 <= bits <= 1.0):
        raise CliError(
            f"remaining entropy must be within [0, 1] bits, got {bits}", EXIT_INPUT
        )
    p_star = infotheory.invert_binary_entropy(bits)
    pct = round(p_star * 100.0)
    print(f"p_star={p_star:.6f}")
    print(f"odds={pct}:{100 - pct}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_common(parser: argparse.ArgumentParser, *names: str) -> None:
    if "config" in names:
        parser.add_argument("--config", help="key=value overrides, one per line")
    if "seed" in names:
        parser.add_argument("--seed", type=int, help="RNG seed (default 0)")
    if "threads" in names:
        parser.add_argument(
            "--threads", type=int,
            help="worker threads for neighbor queries; -1 uses all cores",
        )
    if "break" in names:
        parser.add_argument(
            "--break-seconds", dest="break_seconds", type=int,
            help=f"inactivity gap that splits sessions (default {DEFAULT_BREAK_SECONDS})",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cogres",
        description="Resource-depletion models of question answering: "
        "pipeline from raw event logs to model fits and figure data.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="clean a raw event CSV into an attempt table")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--min-attempts", dest="min_attempts", type=int)
    _add_common(p, "break", "config")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("profile", help="per-user time-scale profiles from an attempt table")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--rho", type=float, help="memory exponent used for the f0 column")
    p.add_argument("--min-percentile-users", dest="min_percentile_users", type=int)
    _add_common(p, "break", "config")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("simulate", help="generate a synthetic cohort with known dynamics")
    p.add_argument("--preset", choices=sorted(_PRESETS), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="hidden ground-truth sidecar (default <out>.truth.csv)")
    p.add_argument("--users", type=int)
    p.add_argument("--questions", type=int)
    p.add_argument("--user-prefix", dest="user_prefix")
    _add_common(p, "seed", "config")
    p.set_defaults(func=cmd_simulate)

    for name, help_text, func in (
        ("fit", "fit model parameters by maximizing training MI", cmd_fit),
        ("evaluate", "score fitted or published parameters on the test split", cmd_evaluate),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("input")
        p.add_argument("--model", choices=("one", "two"), required=True)
        p.add_argument("--out-dir", dest="out_dir", required=True)
        if name == "fit":
            p.add_argument("--max-evals", dest="max_evals", type=int)
            p.add_argument("--tol", type=float)
            p.add_argument("--rhobeg", type=float)
        else:
            p.add_argument("--params", help="fit output file; omit for published values")
        p.add_argument("--bound-lower", dest="bound_lower", type=float)
        p.add_argument("--bound-upper", dest="bound_upper", type=float)
        p.add_argument("--min-train-attempts", dest="min_train_attempts", type=int)
        p.add_argument("--max-train-users", dest="max_train_users", type=int)
        p.add_argument("--min-train-users", dest="min_train_users", type=int)
        p.add_argument("--min-test-attempts", dest="min_test_attempts", type=int)
        p.add_argument("--min-test-accuracy", dest="min_test_accuracy", type=float)
        p.add_argument("--grid-size", dest="grid_size", type=int)
        _add_common(p, "seed", "threads", "break", "config")
        p.set_defaults(func=func)

    p = sub.add_parser("report", help="emit figure-panel CSVs from attempts + trajectories")
    p.add_argument("input")
    p.add_argument("--trajectories", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--max-positions", dest="max_positions", type=int)
    p.add_argument("--min-bin-samples", dest="min_bin_samples", type=int)
    p.add_argument("--resource-bins", dest="resource_bins", type=int)
    p.add_argument("--gap-bins", dest="gap_bins", type=int)
    p.add_argument("--grid-size", dest="grid_size", type=int)
    _add_common(p, "break", "config")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("odds", help="turn remaining outcome entropy into betting odds")
    p.add_argument("bits", type=float)
    p.set_defaults(func=cmd_odds)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except IngestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DataQualityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA_QUALITY


if __name__ == "__main__":
    sys.exit(main())
