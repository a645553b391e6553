"""Seeded, parallel Monte Carlo experiment runner.

Every replication owns a disjoint RNG substream derived from the master
seed, a trial index, a replication index, and a role (population draw,
data draw, split shuffle, parameter draw), so results are bit-identical
for any worker count: replications are computed independently and
aggregated sequentially in index order with compensated summation.
Within a replication all estimators and all split sizes consume the same
population matrix and the same data matrix, so estimator comparisons are
paired.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .ensembles import (
    EnsembleSpec,
    SeededRng,
    sample_covariance,
    sample_gaussian_data,
    sample_white_inverse_wishart,
    spec_from_np,
)
from .estimators import (
    holdout_eigenvalues,
    iter_fold_holdout,
    ledoit_peche_eigenvalues,
    linear_shrinkage,
    make_split,
    recompose,
)
from .linalg import diag_quadratic, eigh_ascending, frobenius_error
from .theory import TheoryPoint, holdout_error_closed_form, theory_point

__all__ = [
    "KNOWN_ESTIMATORS",
    "SPLIT_ESTIMATORS",
    "ExperimentConfig",
    "SummaryRow",
    "ErrorSummary",
    "run_replication",
    "run_experiment",
    "ScatterConfig",
    "ScatterRow",
    "run_scatter",
    "WickConfig",
    "WickReport",
    "wick_identity_experiment",
]

KNOWN_ESTIMATORS = (
    "sample",
    "oracle",
    "linear",
    "lp",
    "holdout",
    "rie_holdout",
    "kfold",
    "rie_kfold",
)
SPLIT_ESTIMATORS = frozenset({"holdout", "rie_holdout", "kfold", "rie_kfold"})
_KFOLD_ESTIMATORS = frozenset({"kfold", "rie_kfold"})
_NEED_FULL_SPECTRUM = frozenset({"oracle", "lp", "rie_holdout", "rie_kfold"})

_ROLE_POPULATION = 0
_ROLE_DATA = 1
_ROLE_SHUFFLE = 2
_ROLE_PARAMS = 3
_MAX_REPS = 1 << 20


def _stream_id(trial: int, rep: int, role: int) -> int:
    return ((trial << 20) + rep) * 8 + role


@dataclass(frozen=True)
class ExperimentConfig:
    """Fixed-population Monte Carlo experiment description.

    The split grid is given as test-set sizes; the train-test ratio of a
    grid entry is k = t/t_out.  p_nominal and q_nominal, when set, are the
    requested population parameters used for reporting and theory
    predictions; they default to the ensemble's effective values.
    """

    ensemble: EnsembleSpec
    estimators: tuple[str, ...]
    t_out_grid: tuple[int, ...] = ()
    replications: int = 100
    master_seed: int = 0
    shuffle: bool = False
    eta: float | None = None
    p_nominal: float | None = None
    q_nominal: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "estimators", tuple(str(e) for e in self.estimators))
        object.__setattr__(self, "t_out_grid", tuple(int(v) for v in self.t_out_grid))
        if not self.estimators:
            raise ValueError("at least one estimator is required")
        for name in self.estimators:
            if name not in KNOWN_ESTIMATORS:
                raise ValueError(
                    f"unknown estimator {name!r}; known: {', '.join(KNOWN_ESTIMATORS)}"
                )
        if len(set(self.estimators)) != len(self.estimators):
            raise ValueError("duplicate estimator names")
        if not 1 <= self.replications < _MAX_REPS:
            raise ValueError(
                f"replications must be in [1, {_MAX_REPS - 1}], got {self.replications}"
            )
        t = self.ensemble.t
        needs_grid = any(e in SPLIT_ESTIMATORS for e in self.estimators)
        if needs_grid and not self.t_out_grid:
            raise ValueError("split estimators require a non-empty t_out grid")
        if len(set(self.t_out_grid)) != len(self.t_out_grid):
            raise ValueError("duplicate t_out values in grid")
        for t_out in self.t_out_grid:
            if not 1 <= t_out <= t - 1:
                raise ValueError(
                    f"t_out must satisfy 1 <= t_out <= t-1, got t_out={t_out}, t={t}"
                )
            if any(e in _KFOLD_ESTIMATORS for e in self.estimators) and t % t_out != 0:
                raise ValueError(
                    f"k-fold estimators require t_out to divide t, got t={t}, t_out={t_out}"
                )
        if self.eta is not None and self.eta <= 0:
            raise ValueError(f"eta must be positive, got {self.eta}")

    @property
    def p_report(self) -> float:
        return self.ensemble.p if self.p_nominal is None else self.p_nominal

    @property
    def q_report(self) -> float:
        return self.ensemble.q if self.q_nominal is None else self.q_nominal

    def row_keys(self) -> tuple[tuple[str, int | None], ...]:
        """Canonical (estimator, t_out) row order of the result table."""
        keys: list[tuple[str, int | None]] = []
        for name in self.estimators:
            if name in SPLIT_ESTIMATORS:
                keys.extend((name, t_out) for t_out in self.t_out_grid)
            else:
                keys.append((name, None))
        return tuple(keys)


@dataclass(frozen=True)
class SummaryRow:
    """Aggregated Monte Carlo result for one (estimator, split) cell."""

    estimator: str
    t_out: int | None
    k: float | None
    mc_error_mean: float
    mc_error_stderr: float
    replications: int
    theory: TheoryPoint | None


@dataclass(frozen=True)
class ErrorSummary:
    """Result table of a fixed-population experiment."""

    config: ExperimentConfig
    rows: tuple[SummaryRow, ...]


def _rie_error(sigma_sq: float, d: np.ndarray, m: np.ndarray, n: int) -> float:
    """Error of a rank-paired eigenvalue substitution without forming the matrix.

    For an estimator V Diag(d) V' and m_i = v_i' Sigma v_i, the normalized
    squared Frobenius distance to Sigma equals
    tau(Sigma^2) + (sum d^2 - 2 sum d*m)/n.
    """
    return sigma_sq + (float(np.sum(d * d)) - 2.0 * float(np.sum(d * m))) / n


def _draw_population_and_data(
    ensemble: EnsembleSpec,
    master_seed: int,
    trial: int,
    rep: int,
    identity_population: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    if identity_population:
        sigma = np.eye(ensemble.n)
    else:
        sigma = sample_white_inverse_wishart(
            ensemble, SeededRng(master_seed, _stream_id(trial, rep, _ROLE_POPULATION))
        )
    x = sample_gaussian_data(
        sigma, ensemble.t, SeededRng(master_seed, _stream_id(trial, rep, _ROLE_DATA))
    )
    return sigma, x


def _replication_errors(
    config: ExperimentConfig, rep: int, trial: int = 0
) -> dict[tuple[str, int | None], float]:
    ensemble = config.ensemble
    n, t = ensemble.n, ensemble.t
    wanted = set(config.estimators)
    sigma, x = _draw_population_and_data(ensemble, config.master_seed, trial, rep)
    sigma_sq = float(np.sum(sigma * sigma)) / n
    e = sample_covariance(x)

    m_full: np.ndarray | None = None
    spectrum_full = None
    if wanted & _NEED_FULL_SPECTRUM:
        spectrum_full = eigh_ascending(e)
        m_full = diag_quadratic(spectrum_full.eigenvectors, sigma)

    errors: dict[tuple[str, int | None], float] = {}
    if "sample" in wanted:
        errors[("sample", None)] = frobenius_error(e, sigma)
    if "oracle" in wanted:
        assert m_full is not None
        errors[("oracle", None)] = _rie_error(sigma_sq, m_full, m_full, n)
    if "linear" in wanted:
        shrunk = linear_shrinkage(e, ensemble.p, ensemble.q)
        errors[("linear", None)] = frobenius_error(shrunk, sigma)
    if "lp" in wanted:
        assert spectrum_full is not None and m_full is not None
        xi, _ = ledoit_peche_eigenvalues(spectrum_full, ensemble.q, config.eta)
        errors[("lp", None)] = _rie_error(sigma_sq, xi, m_full, n)

    shuffle_rng = (
        SeededRng(config.master_seed, _stream_id(trial, rep, _ROLE_SHUFFLE))
        if config.shuffle
        else None
    )
    for t_out in config.t_out_grid:
        if wanted & {"holdout", "rie_holdout"}:
            plan = make_split(t, t_out, "holdout", config.shuffle, shuffle_rng)
            spectrum_in, d = holdout_eigenvalues(x, plan)
            if "holdout" in wanted:
                m_in = diag_quadratic(spectrum_in.eigenvectors, sigma)
                errors[("holdout", t_out)] = _rie_error(sigma_sq, d, m_in, n)
            if "rie_holdout" in wanted:
                assert m_full is not None
                errors[("rie_holdout", t_out)] = _rie_error(sigma_sq, d, m_full, n)
        if wanted & _KFOLD_ESTIMATORS:
            plan = make_split(t, t_out, "kfold", config.shuffle, shuffle_rng)
            want_matrix = "kfold" in wanted
            acc: np.ndarray | None = None
            d_total: np.ndarray | None = None
            folds = 0
            for spectrum_in, d in iter_fold_holdout(x, plan):
                if want_matrix:
                    part = recompose(spectrum_in.eigenvectors, d)
                    acc = part if acc is None else acc + part
                d_total = d.copy() if d_total is None else d_total + d
                folds += 1
            assert d_total is not None and folds == len(plan.folds)
            if want_matrix:
                assert acc is not None
                errors[("kfold", t_out)] = frobenius_error(acc / folds, sigma)
            if "rie_kfold" in wanted:
                assert m_full is not None
                errors[("rie_kfold", t_out)] = _rie_error(
                    sigma_sq, d_total / folds, m_full, n
                )
    return {key: errors[key] for key in config.row_keys()}


def run_replication(
    config: ExperimentConfig, rep_index: int
) -> dict[tuple[str, int | None], float]:
    """Evaluate all configured estimators on one shared draw.

    Returns a mapping from (estimator, t_out) to the normalized squared
    Frobenius error against the drawn population matrix; t_out is None for
    estimators that do not split.  Deterministic given
    (config.master_seed, rep_index).
    """
    if not 0 <= rep_index < _MAX_REPS:
        raise ValueError(f"rep_index must be in [0, {_MAX_REPS - 1}], got {rep_index}")
    try:
        with threadpool_limits(limits=1):
            return _replication_errors(config, rep_index)
    except ValueError as exc:
        raise RuntimeError(f"replication {rep_index} failed: {exc}") from exc


def _experiment_chunk(
    args: tuple[ExperimentConfig, int, int],
) -> list[dict[tuple[str, int | None], float]]:
    config, lo, hi = args
    return [run_replication(config, rep) for rep in range(lo, hi)]


def _chunk_bounds(total: int, workers: int) -> list[tuple[int, int]]:
    size = math.ceil(total / workers)
    return [(lo, min(lo + size, total)) for lo in range(0, total, size)]


def _run_chunked(worker_fn, config, total: int, workers: int) -> list:
    """Map a chunk worker over [0, total) and concatenate in index order."""
    if total == 0:
        return []
    if workers <= 1:
        return worker_fn((config, 0, total))
    results: list = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(worker_fn, (config, lo, hi))
            for lo, hi in _chunk_bounds(total, workers)
        ]
        for future in futures:
            results.extend(future.result())
    return results


def _mean_stderr(values: list[float]) -> tuple[float, float]:
    count = len(values)
    mean = math.fsum(values) / count
    if count == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (count - 1)
    return mean, math.sqrt(var / count)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ErrorSummary:
    """Run all replications and aggregate per (estimator, split) cell.

    Replications are distributed over `workers` processes in contiguous
    index chunks and always aggregated sequentially in replication order,
    so the output is bit-identical for any worker count.  Theory
    predictions are attached to rows of the plain holdout estimator, using
    the nominal (requested) population parameters.
    """
    per_rep = _run_chunked(_experiment_chunk, config, config.replications, workers)
    t = config.ensemble.t
    rows = []
    for estimator, t_out in config.row_keys():
        values = [rep_errors[(estimator, t_out)] for rep_errors in per_rep]
        mean, stderr = _mean_stderr(values)
        k = None if t_out is None else t / t_out
        theory: TheoryPoint | None = None
        if estimator == "holdout" and t_out is not None:
            try:
                theory = theory_point(
                    config.ensemble.n, config.p_report, config.q_report, k
                )
            except ValueError:
                theory = None
        rows.append(
            SummaryRow(
                estimator=estimator,
                t_out=t_out,
                k=k,
                mc_error_mean=mean,
                mc_error_stderr=stderr,
                replications=config.replications,
                theory=theory,
            )
        )
    return ErrorSummary(config=config, rows=tuple(rows))


@dataclass(frozen=True)
class ScatterConfig:
    """Randomized-parameter experiment: one holdout point per trial.

    Each trial draws (n, p, q) uniformly from the given ranges and a
    train-test ratio k uniformly among the divisors of t = round(n/q) in
    [2, t].  With t_out_choices set, the test-set size is drawn from that
    tuple instead and t is rounded to the nearest multiple of it.  With
    min_p_over_n set, parameter triples are redrawn until p/n exceeds it.
    """

    trials: int
    replications: int
    master_seed: int = 0
    n_range: tuple[int, int] = (100, 1000)
    p_range: tuple[float, float] = (0.1, 9.0)
    q_range: tuple[float, float] = (0.1, 0.9)
    min_p_over_n: float | None = None
    t_out_choices: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.trials < 0:
            raise ValueError(f"trials must be >= 0, got {self.trials}")
        if not 1 <= self.replications < _MAX_REPS:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        n_lo, n_hi = self.n_range
        p_lo, p_hi = self.p_range
        q_lo, q_hi = self.q_range
        if not (4 <= n_lo <= n_hi):
            raise ValueError(f"invalid n_range {self.n_range}")
        if not (0 < p_lo <= p_hi):
            raise ValueError(f"invalid p_range {self.p_range}")
        if not (0 < q_lo <= q_hi < 1):
            raise ValueError(f"invalid q_range {self.q_range}")
        if p_hi >= n_lo / 3:
            raise ValueError(
                f"p_range upper bound {p_hi} too large for n_range lower bound {n_lo}"
            )
        if self.min_p_over_n is not None and self.min_p_over_n <= 0:
            raise ValueError(f"min_p_over_n must be positive, got {self.min_p_over_n}")
        if self.t_out_choices is not None:
            object.__setattr__(
                self, "t_out_choices", tuple(int(v) for v in self.t_out_choices)
            )
            if not self.t_out_choices or any(v < 1 for v in self.t_out_choices):
                raise ValueError(f"invalid t_out_choices {self.t_out_choices}")


@dataclass(frozen=True)
class ScatterRow:
    """One randomized trial: measured vs predicted holdout error.

    p and q are the effective population parameters of the trial's
    ensemble (after integer rounding of the sampler's internal sizes), and
    theory_error is evaluated at those effective values, so each row is
    exactly reproducible from its own fields.
    """

    trial: int
    n: int
    p: float
    q: float
    k: float
    mc_error: float
    theory_error: float
    p_over_n: float
    flag_biased: bool


_MAX_PARAM_ATTEMPTS = 10_000


def _draw_scatter_trial(config: ScatterConfig, trial: int) -> tuple[EnsembleSpec, int]:
    gen = SeededRng(
        config.master_seed, _stream_id(trial, 0, _ROLE_PARAMS)
    ).generator()
    n_lo, n_hi = config.n_range
    for _ in range(_MAX_PARAM_ATTEMPTS):
        n = int(gen.integers(n_lo, n_hi + 1))
        p = float(gen.uniform(*config.p_range))
        q = float(gen.uniform(*config.q_range))
        if config.min_p_over_n is None or p / n > config.min_p_over_n:
            break
    else:
        raise RuntimeError(
            f"trial {trial}: no parameter draw satisfied p/n > {config.min_p_over_n} "
            f"after {_MAX_PARAM_ATTEMPTS} attempts"
        )
    t_nominal = round(n / q)
    if config.t_out_choices is not None:
        t_out = int(config.t_out_choices[gen.integers(len(config.t_out_choices))])
        t = t_out * max(2, round(t_nominal / t_out))
    else:
        divisors = [d for d in range(2, t_nominal + 1) if t_nominal % d == 0]
        k = int(divisors[gen.integers(len(divisors))])
        t, t_out = t_nominal, t_nominal // k
    return spec_from_np(n, p, t=t), t_out


def _scatter_trial_row(config: ScatterConfig, trial: int) -> ScatterRow:
    ensemble, t_out = _draw_scatter_trial(config, trial)
    n, t = ensemble.n, ensemble.t
    plan = make_split(t, t_out, "holdout")
    errs = []
    for rep in range(config.replications):
        sigma, x = _draw_population_and_data(ensemble, config.master_seed, trial, rep)
        sigma_sq = float(np.sum(sigma * sigma)) / n
        spectrum_in, d = holdout_eigenvalues(x, plan)
        m_in = diag_quadratic(spectrum_in.eigenvectors, sigma)
        errs.append(_rie_error(sigma_sq, d, m_in, n))
    mc_error = math.fsum(errs) / config.replications
    k = t / t_out
    theory_error = holdout_error_closed_form(n, ensemble.p, ensemble.q, k)
    p_over_n = ensemble.p / n
    return ScatterRow(
        trial=trial,
        n=n,
        p=ensemble.p,
        q=ensemble.q,
        k=k,
        mc_error=mc_error,
        theory_error=theory_error,
        p_over_n=p_over_n,
        flag_biased=bool(p_over_n > 1e-2),
    )


def _scatter_chunk(args: tuple[ScatterConfig, int, int]) -> list[ScatterRow]:
    config, lo, hi = args
    rows = []
    with threadpool_limits(limits=1):
        for trial in range(lo, hi):
            try:
                rows.append(_scatter_trial_row(config, trial))
            except ValueError as exc:
                raise RuntimeError(f"scatter trial {trial} failed: {exc}") from exc
    return rows


def run_scatter(config: ScatterConfig, workers: int = 1) -> tuple[ScatterRow, ...]:
    """Run randomized trials; one (measured, predicted) holdout point each.

    Deterministic given the master seed for any worker count; zero trials
    yield an empty table.
    """
    return tuple(_run_chunked(_scatter_chunk, config, config.trials, workers))


@dataclass(frozen=True)
class WickConfig:
    """Setup for the two-sided check of the exact holdout-error identity."""

    ensemble: EnsembleSpec
    t_out: int
    replications: int
    master_seed: int = 0
    shuffle: bool = False
    identity_population: bool = False

    def __post_init__(self) -> None:
        if not 1 <= self.t_out <= self.ensemble.t - 1:
            raise ValueError(
                f"t_out must satisfy 1 <= t_out <= t-1, got t_out={self.t_out}, "
                f"t={self.ensemble.t}"
            )
        if not 1 <= self.replications < _MAX_REPS:
            raise ValueError(f"replications must be >= 1, got {self.replications}")


@dataclass(frozen=True)
class WickReport:
    """Monte Carlo comparison of the measured holdout error with its moment form.

    lhs is the direct error mean; rhs evaluates
    (2/t_out - 1) * diag_oracle_sq_mean + sigma_sq_mean from the measured
    moments.  combined_stderr treats the two sides as independent, which
    is conservative because they share draws.
    """

    t_out: int
    replications: int
    lhs_mean: float
    lhs_stderr: float
    rhs_value: float
    rhs_stderr: float
    combined_stderr: float
    diag_oracle_sq_mean: float
    sigma_sq_mean: float


def _wick_chunk(
    args: tuple[WickConfig, int, int],
) -> list[tuple[float, float, float]]:
    config, lo, hi = args
    ensemble = config.ensemble
    n, t = ensemble.n, ensemble.t
    out = []
    with threadpool_limits(limits=1):
        for rep in range(lo, hi):
            try:
                sigma, x = _draw_population_and_data(
                    ensemble,
                    config.master_seed,
                    0,
                    rep,
                    identity_population=config.identity_population,
                )
                shuffle_rng = (
                    SeededRng(config.master_seed, _stream_id(0, rep, _ROLE_SHUFFLE))
                    if config.shuffle
                    else None
                )
                plan = make_split(t, config.t_out, "holdout", config.shuffle, shuffle_rng)
                sigma_sq = float(np.sum(sigma * sigma)) / n
                spectrum_in, d = holdout_eigenvalues(x, plan)
                m_in = diag_quadratic(spectrum_in.eigenvectors, sigma)
                lhs = _rie_error(sigma_sq, d, m_in, n)
                diag_sq = float(np.sum(m_in * m_in)) / n
                out.append((lhs, diag_sq, sigma_sq))
            except ValueError as exc:
                raise RuntimeError(f"replication {rep} failed: {exc}") from exc
    return out


def wick_identity_experiment(config: WickConfig, workers: int = 1) -> WickReport:
    """Measure both sides of the exact holdout-error identity.

    The left side is the direct Monte Carlo error of the holdout
    estimator; the right side plugs the measured moments
    E[tau(Diag(V_in' Sigma V_in)^2)] and E[tau(Sigma^2)] into the
    closed-form coefficient in t_out.
    """
    from .theory import wick_identity_rhs

    samples = _run_chunked(_wick_chunk, config, config.replications, workers)
    lhs_values = [s[0] for s in samples]
    diag_values = [s[1] for s in samples]
    sigma_values = [s[2] for s in samples]
    lhs_mean, lhs_stderr = _mean_stderr(lhs_values)
    diag_mean, _ = _mean_stderr(diag_values)
    sigma_mean, _ = _mean_stderr(sigma_values)
    coeff = 2.0 / config.t_out - 1.0
    rhs_per_rep = [coeff * d + s for d, s in zip(diag_values, sigma_values)]
    rhs_value = wick_identity_rhs(diag_mean, sigma_mean, config.t_out)
    _, rhs_stderr = _mean_stderr(rhs_per_rep)
    return WickReport(
        t_out=config.t_out,
        replications=config.replications,
        lhs_mean=lhs_mean,
        lhs_stderr=lhs_stderr,
        rhs_value=rhs_value,
        rhs_stderr=rhs_stderr,
        combined_stderr=math.hypot(lhs_stderr, rhs_stderr),
        diag_oracle_sq_mean=diag_mean,
        sigma_sq_mean=sigma_mean,
    )
