"""Command-line front end: experiments to CSV/JSON/SVG files.

Subcommands: sweep (error curves over a split grid), theory (closed-form
predictions), scatter (randomized-parameter trials), clean (clean a
user-supplied data matrix), wick-check (two-sided identity check).
Global flags: --seed, --workers, --config, --out, --svg.  A config file
holds `key = value` lines mirroring the flag names; explicit flags
override file values, and unknown keys are an error.

Exit codes: 0 on success, 2 on usage errors, 1 on runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .ensembles import (
    SeededRng,
    estimate_p_from_sample,
    sample_covariance,
    spec_from_np,
)
from .estimators import (
    default_eta,
    holdout_estimator,
    kfold_cv_estimator,
    ledoit_peche_eigenvalues,
    linear_shrinkage,
    make_split,
)
from .harness import (
    KNOWN_ESTIMATORS,
    ExperimentConfig,
    ScatterConfig,
    WickConfig,
    run_experiment,
    run_scatter,
    wick_identity_experiment,
)
from .linalg import eigh_ascending, recompose
from .theory import (
    holdout_error_closed_form,
    k_opt_asymptotic,
    k_opt_exact,
    lam_split_diagnostic,
    oracle_error,
    sample_error,
)
from . import _svg

__all__ = ["UsageError", "CliConfig", "main"]

SWEEP_CSV_HEADER = (
    "estimator,k,t_out,mc_error_mean,mc_error_stderr,theory_error,n,p,q,reps,seed"
)
SCATTER_CSV_HEADER = "trial,n,p,q,k,mc_error,theory_error,p_over_n,flag_biased"


class UsageError(Exception):
    """Invalid command line or config file; maps to exit code 2."""


@dataclass(frozen=True)
class CliConfig:
    """Resolved invocation: subcommand plus fully merged option values."""

    command: str
    values: dict


def _conv_int(text: str) -> int:
    return int(text)


def _conv_float(text: str) -> float:
    return float(text)


def _conv_str(text: str) -> str:
    return text


def _conv_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _conv_int_list(text: str) -> tuple[int, ...]:
    parts = [part.strip() for part in text.split(",") if part.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(int(part) for part in parts)


def _conv_str_list(text: str) -> tuple[str, ...]:
    parts = [part.strip() for part in text.split(",") if part.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(parts)


@dataclass(frozen=True)
class _Option:
    key: str
    conv: object
    default: object = None
    required: bool = False
    is_flag: bool = False
    help: str = ""

    @property
    def flag(self) -> str:
        return "--" + self.key.replace("_", "-")


_GLOBAL_OPTIONS = (
    _Option("seed", _conv_int, default=0, help="master seed for all randomness"),
    _Option("workers", _conv_int, default=1, help="worker process count"),
    _Option("out", _conv_str, default=".", help="output directory"),
    _Option("svg", _conv_bool, default=False, is_flag=True, help="also write an SVG plot"),
)

_COMMAND_OPTIONS: dict[str, tuple[_Option, ...]] = {
    "sweep": (
        _Option("n", _conv_int, required=True, help="matrix dimension"),
        _Option("p", _conv_float, required=True, help="population shape parameter"),
        _Option("q", _conv_float, help="aspect ratio n/t"),
        _Option("t", _conv_int, help="observation count (alternative to --q)"),
        _Option("reps", _conv_int, default=100, help="replication count"),
        _Option(
            "estimators",
            _conv_str_list,
            default=("holdout", "kfold"),
            help="comma-separated estimator names",
        ),
        _Option("k", _conv_int_list, help="train-test ratios; must divide t"),
        _Option("t_out", _conv_int_list, help="test-set sizes (alternative to --k)"),
        _Option("eta", _conv_float, help="smoothing bandwidth for the lp estimator"),
        _Option("shuffle", _conv_bool, default=False, is_flag=True, help="shuffled splits"),
    ),
    "theory": (
        _Option("n", _conv_int, required=True),
        _Option("p", _conv_float, required=True),
        _Option("q", _conv_float, help="aspect ratio n/t"),
        _Option("t", _conv_int, help="observation count (alternative to --q)"),
        _Option("k_points", _conv_int, default=200, help="size of the k grid"),
    ),
    "scatter": (
        _Option("trials", _conv_int, default=50, help="number of randomized trials"),
        _Option("reps", _conv_int, default=100, help="replications per trial"),
        _Option("n_min", _conv_int, default=100),
        _Option("n_max", _conv_int, default=1000),
        _Option("p_min", _conv_float, default=0.1),
        _Option("p_max", _conv_float, default=9.0),
        _Option("q_min", _conv_float, default=0.1),
        _Option("q_max", _conv_float, default=0.9),
        _Option("min_p_over_n", _conv_float, help="redraw parameters until p/n exceeds this"),
        _Option("t_out_choices", _conv_int_list, help="draw t_out from this list"),
    ),
    "clean": (
        _Option("input", _conv_str, required=True, help="CSV of observations"),
        _Option(
            "method",
            _conv_str,
            default="holdout",
            help="sample, linear, lp, holdout, or kfold",
        ),
        _Option(
            "features_in_rows",
            _conv_bool,
            default=False,
            is_flag=True,
            help="input rows are features, not observations",
        ),
        _Option(
            "demean",
            _conv_bool,
            default=False,
            is_flag=True,
            help="subtract column means; divisor becomes t-1",
        ),
        _Option("k", _conv_int, help="train-test ratio override"),
        _Option("t_out", _conv_int, help="test-set size override"),
        _Option("eta", _conv_float, help="smoothing bandwidth for method=lp"),
        _Option("shuffle", _conv_bool, default=False, is_flag=True),
    ),
    "wick-check": (
        _Option("n", _conv_int, required=True),
        _Option("p", _conv_float, required=True),
        _Option("q", _conv_float),
        _Option("t", _conv_int),
        _Option("t_out", _conv_int, required=True),
        _Option("reps", _conv_int, default=500),
        _Option("identity", _conv_bool, default=False, is_flag=True,
                help="use the identity population instead of sampling"),
        _Option("shuffle", _conv_bool, default=False, is_flag=True),
    ),
}

_CLEAN_METHODS = ("sample", "linear", "lp", "holdout", "kfold")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covsplit",
        description="Covariance cleaning by optimal train-test splitting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, options in _COMMAND_OPTIONS.items():
        cmd_parser = sub.add_parser(command)
        cmd_parser.add_argument("--config", dest="config", default=None,
                                help="key = value file mirroring the flags")
        for option in _GLOBAL_OPTIONS + options:
            if option.is_flag:
                cmd_parser.add_argument(
                    option.flag, dest=option.key, action="store_const", const="true",
                    default=None, help=option.help,
                )
            else:
                cmd_parser.add_argument(
                    option.flag, dest=option.key, default=None, metavar="V",
                    help=option.help,
                )
    return parser


def _load_config_file(path: str) -> dict[str, str]:
    try:
        with open(path, encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    values: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve(command: str, args: argparse.Namespace) -> CliConfig:
    options = _GLOBAL_OPTIONS + _COMMAND_OPTIONS[command]
    known = {option.key: option for option in options}
    file_values: dict[str, str] = {}
    if args.config is not None:
        file_values = _load_config_file(args.config)
        for key in file_values:
            if key not in known:
                raise UsageError(f"unknown config key {key!r} for command {command}")
    resolved: dict[str, object] = {}
    for option in options:
        raw = getattr(args, option.key)
        if raw is None:
            raw = file_values.get(option.key)
        if raw is None:
            if option.required:
                raise UsageError(f"{option.flag} is required")
            resolved[option.key] = option.default
            continue
        try:
            resolved[option.key] = option.conv(raw)
        except ValueError as exc:
            raise UsageError(f"invalid value for {option.flag}: {raw!r} ({exc})") from exc
    return CliConfig(command=command, values=resolved)


def _format_cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: str, header: str, rows: list[list[object]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(header + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        for row in rows:
            writer.writerow([_format_cell(cell) for cell in row])


def _ensure_out_dir(out: str) -> None:
    os.makedirs(out, exist_ok=True)


def _build_ensemble(values: dict) -> tuple:
    """EnsembleSpec plus the requested (p, q) from --n/--p/--q/--t values."""
    n, p = values["n"], values["p"]
    q, t = values.get("q"), values.get("t")
    try:
        spec = spec_from_np(n, p, q=q, t=t)
    except ValueError as exc:
        raise UsageError(f"invalid --n/--p/--q/--t combination: {exc}") from exc
    q_requested = q if q is not None else spec.n / spec.t
    return spec, float(p), float(q_requested)


def _divisors_in(t: int, lo: int, hi: int) -> list[int]:
    return [d for d in range(lo, hi + 1) if t % d == 0]


def _default_sweep_grid(t: int, estimators: tuple[str, ...]) -> tuple[int, ...]:
    """Split grid in ascending-k order (descending t_out).

    With a k-fold estimator present, k runs over the divisors of t in
    [2, t]; otherwise up to 64 log-spaced test-set sizes in [1, t-1].
    """
    if any(name in ("kfold", "rie_kfold") for name in estimators):
        return tuple(t // k for k in _divisors_in(t, 2, t))
    points = np.unique(np.rint(np.geomspace(1, t - 1, 64)).astype(int))
    return tuple(int(v) for v in points[::-1])


def _cmd_sweep(cfg: CliConfig) -> int:
    values = cfg.values
    spec, p_req, q_req = _build_ensemble(values)
    estimators = values["estimators"]
    if values["k"] is not None and values["t_out"] is not None:
        raise UsageError("pass at most one of --k and --t-out")
    if values["k"] is not None:
        bad = [k for k in values["k"] if k < 2 or spec.t % k != 0]
        if bad:
            raise UsageError(
                f"invalid value for --k: {bad[0]} does not divide t={spec.t}"
            )
        grid = tuple(spec.t // k for k in values["k"])
    elif values["t_out"] is not None:
        grid = values["t_out"]
    else:
        grid = _default_sweep_grid(spec.t, estimators)
    try:
        config = ExperimentConfig(
            ensemble=spec,
            estimators=estimators,
            t_out_grid=grid,
            replications=values["reps"],
            master_seed=values["seed"],
            shuffle=values["shuffle"],
            eta=values["eta"],
            p_nominal=p_req,
            q_nominal=q_req,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    summary = run_experiment(config, workers=values["workers"])
    rows = []
    for row in summary.rows:
        theory = row.theory.predicted_error if row.theory is not None else None
        rows.append(
            [
                row.estimator,
                row.k,
                row.t_out,
                row.mc_error_mean,
                row.mc_error_stderr,
                theory,
                spec.n,
                p_req,
                q_req,
                row.replications,
                values["seed"],
            ]
        )
    _ensure_out_dir(values["out"])
    _write_csv(os.path.join(values["out"], "sweep.csv"), SWEEP_CSV_HEADER, rows)
    if values["svg"]:
        series = []
        for name in estimators:
            pts = [(r.k, r.mc_error_mean) for r in summary.rows if r.estimator == name]
            if pts and pts[0][0] is not None:
                series.append((name, [c[0] for c in pts], [c[1] for c in pts]))
        theory_pts = [
            (r.k, r.theory.predicted_error) for r in summary.rows if r.theory is not None
        ]
        if theory_pts:
            series.append(
                ("holdout theory", [c[0] for c in theory_pts], [c[1] for c in theory_pts])
            )
        if series:
            svg = _svg.line_plot(
                series,
                title=f"error vs train-test ratio (n={spec.n}, p={p_req}, q={q_req})",
                x_label="k = t / t_out",
                y_label="normalized squared error",
            )
            _write_text(os.path.join(values["out"], "sweep.svg"), svg)
    return 0


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


def _cmd_theory(cfg: CliConfig) -> int:
    values = cfg.values
    n, p_req = values["n"], values["p"]
    q, t_given = values.get("q"), values.get("t")
    if (q is None) == (t_given is None):
        raise UsageError("pass exactly one of --q and --t")
    t = t_given if t_given is not None else round(n / q)
    if n < 4 or t < 2:
        raise UsageError(f"need n >= 4 and t >= 2, got n={n}, t={t}")
    q_req = float(q) if q is not None else n / t
    if p_req < 0 or q_req <= 0:
        raise UsageError(f"need p >= 0 and q > 0, got p={p_req}, q={q_req}")
    k_points = values["k_points"]
    if k_points < 2:
        raise UsageError(f"invalid value for --k-points: {k_points} (need >= 2)")
    ks = np.geomspace(1.05, t, k_points)
    try:
        errs = [holdout_error_closed_form(n, p_req, q_req, float(k)) for k in ks]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(f"n={n} p={p_req} q={q_req} t={t}")
    print(f"oracle_error={oracle_error(p_req, q_req)!r}")
    print(f"sample_error={sample_error(q_req)!r}")
    if p_req > 0:
        k_exact = k_opt_exact(n, p_req, q_req)
        k_asym = k_opt_asymptotic(n, p_req, q_req)
        err_opt = holdout_error_closed_form(n, p_req, q_req, k_exact)
        diag = lam_split_diagnostic(n, max(1.0, t / k_exact))
        print(f"k_opt_exact={k_exact!r}")
        print(f"k_opt_asymptotic={k_asym!r}")
        print(f"error_at_k_opt={err_opt!r}")
        print(f"regime_p_over_n_large={str(p_req / n > 1e-2).lower()}")
        print(
            f"split_growth_sufficient={str(diag.sufficient).lower()}"
            f" series_summable={str(diag.series_summable).lower()}"
            f" t_out_over_sqrt_n={diag.sqrt_ratio!r}"
        )
    else:
        print("error is monotone in k at p=0; no interior k_opt")
    _ensure_out_dir(values["out"])
    _write_csv(
        os.path.join(values["out"], "theory.csv"),
        "k,predicted_error",
        [[float(k), e] for k, e in zip(ks, errs)],
    )
    if values["svg"]:
        svg = _svg.line_plot(
            [("closed form", [float(k) for k in ks], errs)],
            title=f"predicted error vs k (n={n}, p={p_req}, q={q_req})",
            x_label="k = t / t_out",
            y_label="predicted error",
        )
        _write_text(os.path.join(values["out"], "theory.svg"), svg)
    return 0


def _cmd_scatter(cfg: CliConfig) -> int:
    values = cfg.values
    try:
        config = ScatterConfig(
            trials=values["trials"],
            replications=values["reps"],
            master_seed=values["seed"],
            n_range=(values["n_min"], values["n_max"]),
            p_range=(values["p_min"], values["p_max"]),
            q_range=(values["q_min"], values["q_max"]),
            min_p_over_n=values["min_p_over_n"],
            t_out_choices=values["t_out_choices"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = run_scatter(config, workers=values["workers"])
    table = [
        [
            row.trial,
            row.n,
            row.p,
            row.q,
            row.k,
            row.mc_error,
            row.theory_error,
            row.p_over_n,
            row.flag_biased,
        ]
        for row in rows
    ]
    _ensure_out_dir(values["out"])
    _write_csv(os.path.join(values["out"], "scatter.csv"), SCATTER_CSV_HEADER, table)
    if values["svg"]:
        svg = _svg.scatter_plot(
            [row.theory_error for row in rows],
            [row.mc_error for row in rows],
            [row.flag_biased for row in rows],
            title="measured vs predicted holdout error",
            x_label="predicted error",
            y_label="measured error",
            highlight_label="p/n > 0.01",
        )
        _write_text(os.path.join(values["out"], "scatter.svg"), svg)
    return 0


def _parse_matrix(path: str) -> np.ndarray:
    try:
        with open(path, encoding="utf-8") as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read input {path}: {exc}") from exc
    rows: list[list[float]] = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise UsageError(
                f"{path}: row {lineno} has {len(cells)} columns, expected {width}"
            )
        parsed = []
        for col, cell in enumerate(cells, start=1):
            try:
                parsed.append(float(cell))
            except ValueError as exc:
                raise UsageError(
                    f"{path}: non-numeric value {cell.strip()!r} at row {lineno},"
                    f" column {col}"
                ) from exc
        rows.append(parsed)
    if not rows:
        raise UsageError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def _clean_target_t_out(method: str, t: int, n: int, q: float, p_hat: float,
                        values: dict) -> tuple[int | None, bool]:
    """Resolve the test-set size for split methods; returns (t_out, fallback)."""
    if method not in ("holdout", "kfold"):
        return None, False
    if values["t_out"] is not None:
        t_out = values["t_out"]
        if not 1 <= t_out <= t - 1 or (method == "kfold" and t % t_out != 0):
            raise UsageError(f"invalid value for --t-out: {t_out} with t={t}")
        return t_out, False
    fallback = False
    if values["k"] is not None:
        k_target = float(values["k"])
        if k_target < 2 or k_target > t:
            raise UsageError(f"invalid value for --k: {values['k']} with t={t}")
    elif p_hat > 0:
        k_target = float(round(k_opt_exact(n, max(p_hat, 1e-6), q)))
        k_target = min(max(k_target, 2.0), float(t))
    else:
        k_target = 10.0
        fallback = True
    if method == "kfold":
        divisors = _divisors_in(t, 2, t)
        k_used = min(divisors, key=lambda d: (abs(d - k_target), d))
        return t // k_used, fallback
    t_out = int(min(max(round(t / k_target), 1), t - 1))
    return t_out, fallback


def _cmd_clean(cfg: CliConfig) -> int:
    values = cfg.values
    method = values["method"]
    if method not in _CLEAN_METHODS:
        raise UsageError(
            f"invalid value for --method: {method!r}; choose from "
            + ", ".join(_CLEAN_METHODS)
        )
    data = _parse_matrix(values["input"])
    x = data if values["features_in_rows"] else data.T
    n, t = x.shape
    if t < 2:
        raise UsageError(f"need at least 2 observations, got t={t}")
    if values["demean"]:
        x = x - x.mean(axis=1, keepdims=True)
        x = x * math.sqrt(t / (t - 1.0))
    q = n / t
    e_full = sample_covariance(x)
    p_hat = estimate_p_from_sample(e_full, q)
    eta_used: float | None = None
    floored = 0
    t_out, degenerate = _clean_target_t_out(method, t, n, q, p_hat, values)
    shuffle_rng = SeededRng(values["seed"], 0) if values["shuffle"] else None
    if method == "sample":
        cleaned = e_full
    elif method == "linear":
        cleaned = linear_shrinkage(e_full, max(p_hat, 0.0), q)
    elif method == "lp":
        eta_used = values["eta"] if values["eta"] is not None else default_eta(n)
        if eta_used <= 0:
            raise UsageError(f"invalid value for --eta: {eta_used}")
        spectrum = eigh_ascending(e_full)
        xi, floored = ledoit_peche_eigenvalues(spectrum, q, eta_used)
        cleaned = recompose(spectrum.eigenvectors, xi)
    else:
        assert t_out is not None
        plan = make_split(t, t_out, method if method == "kfold" else "holdout",
                          values["shuffle"], shuffle_rng)
        if method == "holdout":
            cleaned = holdout_estimator(x, plan)
        else:
            cleaned = kfold_cv_estimator(x, plan)
    _ensure_out_dir(values["out"])
    matrix_rows = [[float(v) for v in row] for row in cleaned]
    _csv_path = os.path.join(values["out"], "cleaned.csv")
    with open(_csv_path, "w", encoding="utf-8", newline="") as handle:
        for row in matrix_rows:
            handle.write(",".join(repr(v) for v in row) + "\n")
    sidecar = {
        "method": method,
        "n": n,
        "t": t,
        "q": q,
        "p_hat": p_hat,
        "r": max(p_hat, 0.0) / (max(p_hat, 0.0) + q),
        "k_used": None if t_out is None else t / t_out,
        "t_out": t_out,
        "eta": eta_used,
        "floored_eigenvalues": floored,
        "seed": values["seed"],
    }
    if degenerate:
        sidecar["degenerate_p_hat"] = True
    with open(os.path.join(values["out"], "cleaned.json"), "w", encoding="utf-8") as handle:
        json.dump(sidecar, handle, indent=2)
        handle.write("\n")
    return 0


def _cmd_wick_check(cfg: CliConfig) -> int:
    values = cfg.values
    spec, p_req, q_req = _build_ensemble(values)
    try:
        config = WickConfig(
            ensemble=spec,
            t_out=values["t_out"],
            replications=values["reps"],
            master_seed=values["seed"],
            shuffle=values["shuffle"],
            identity_population=values["identity"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report = wick_identity_experiment(config, workers=values["workers"])
    gap = abs(report.lhs_mean - report.rhs_value)
    print(f"n={spec.n} p={p_req} q={q_req} t={spec.t} t_out={report.t_out}"
          f" reps={report.replications}")
    print(f"lhs_mean={report.lhs_mean!r} lhs_stderr={report.lhs_stderr!r}")
    print(f"rhs_value={report.rhs_value!r} rhs_stderr={report.rhs_stderr!r}")
    print(f"diag_oracle_sq_mean={report.diag_oracle_sq_mean!r}"
          f" sigma_sq_mean={report.sigma_sq_mean!r}")
    print(f"abs_gap={gap!r} combined_stderr={report.combined_stderr!r}"
          f" gap_over_stderr="
          + (repr(gap / report.combined_stderr) if report.combined_stderr > 0 else "nan"))
    return 0


_COMMANDS = {
    "sweep": _cmd_sweep,
    "theory": _cmd_theory,
    "scatter": _cmd_scatter,
    "clean": _cmd_clean,
    "wick-check": _cmd_wick_check,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        cfg = _resolve(args.command, args)
        return _COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, OSError, ValueError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
