"""Closed-form error predictions for split-based covariance cleaning.

For a white inverse Wishart population with shape parameter p, observed
through t = n/q Gaussian samples and cleaned by a holdout split with
train-test ratio k = t/t_out, the expected squared Frobenius error per
dimension has an explicit finite-size expression.  This module evaluates
that expression, its minimizer in k, the asymptotic scaling of the
minimizer, the limiting errors of the oracle and raw sample estimators,
and two exact identities used to cross-check Monte Carlo runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "holdout_error_closed_form",
    "k_opt_exact",
    "k_opt_asymptotic",
    "oracle_error",
    "sample_error",
    "wick_identity_rhs",
    "variance_decomposition_error",
    "LamDiagnostic",
    "lam_split_diagnostic",
    "RegimeFlags",
    "TheoryPoint",
    "theory_point",
]


def _validate_npq(n: float, p: float, q: float) -> None:
    if n < 4:
        raise ValueError(f"n must be >= 4, got {n}")
    if p < 0:
        raise ValueError(f"p must be >= 0, got {p}")
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")


def holdout_error_closed_form(n: float, p: float, q: float, k: float) -> float:
    """Expected per-dimension squared Frobenius error of the holdout estimator.

    Evaluates

        (2k/t - 1) * (p**2 / (p + q_in) + 1) + 1 + p,

    with t = n/q and q_in = q*k/(k-1) the effective aspect ratio of the
    train set.  k is a real train-test ratio; no integrality is imposed.

    Raises
    ------
    ValueError
        If k <= 1 or k > t, or the population parameters are out of domain.
    """
    _validate_npq(n, p, q)
    t = n / q
    if t < 2:
        raise ValueError(f"need t = n/q >= 2, got t={t}")
    if k <= 1 or k > t * (1.0 + 1e-9):
        raise ValueError(f"k must satisfy 1 < k <= t, got k={k} with t={t}")
    q_in = q * k / (k - 1.0)
    c = p * p / (p + q_in) + 1.0
    return (2.0 * k / t - 1.0) * c + 1.0 + p


def k_opt_exact(n: float, p: float, q: float) -> float:
    """Train-test ratio minimizing the closed-form holdout error.

    Closed-form expression in (n, p, q); the output is a real ratio, not
    rounded to any feasible integer split.

    Raises
    ------
    ValueError
        If p <= 0 (the error curve has no interior minimum) or other
        parameters are out of domain.
    """
    if p <= 0:
        raise ValueError(f"p must be positive for an interior minimum, got {p}")
    _validate_npq(n, p, q)
    a = p + q
    b = p + p * p + q
    disc = p * p * q * q + 2.0 * n * a * b
    return p * (2.0 * q + p * (2.0 + 2.0 * p + q) + math.sqrt(disc)) / (2.0 * a * b)


def k_opt_asymptotic(n: float, p: float, q: float) -> float:
    """Leading large-n behavior of :func:`k_opt_exact`: p*sqrt(n/(2(p+q)(p+p^2+q)))."""
    if p <= 0:
        raise ValueError(f"p must be positive for an interior minimum, got {p}")
    _validate_npq(n, p, q)
    a = p + q
    b = p + p * p + q
    return p * math.sqrt(n) / math.sqrt(2.0 * a * b)


def oracle_error(p: float, q: float) -> float:
    """Limiting error of the oracle eigenvalue substitution: p*q/(p+q)."""
    if p < 0:
        raise ValueError(f"p must be >= 0, got {p}")
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")
    return p * q / (p + q)


def sample_error(q: float) -> float:
    """Limiting error of the raw sample covariance: q."""
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")
    return q


def wick_identity_rhs(
    diag_oracle_sq_mean: float, sigma_sq_mean: float, t_out: int
) -> float:
    """Predicted holdout error from oracle-diagonal and population moments.

    Evaluates (2/t_out - 1) * diag_oracle_sq_mean + sigma_sq_mean, where the
    first argument is the Monte Carlo mean of the squared-diagonal trace of
    the population matrix in the train eigenbasis and the second is the mean
    of the population's squared trace.  Used to compare an exact expectation
    identity against the directly measured holdout error.
    """
    if t_out < 1:
        raise ValueError(f"t_out must be >= 1, got {t_out}")
    if diag_oracle_sq_mean < 0 or sigma_sq_mean < 0:
        raise ValueError("moment means must be >= 0")
    return (2.0 / t_out - 1.0) * diag_oracle_sq_mean + sigma_sq_mean


def variance_decomposition_error(
    var_true: float, var_oracle: float, mean_true: float, t_out: int
) -> float:
    """Holdout error written through eigenvalue variances.

    Evaluates var_true - var_oracle + 2*(mean_true**2 + var_oracle)/t_out.
    The oracle eigenvalues are a conditional-expectation shrinkage of the
    true ones, so their variance can never exceed var_true.

    Raises
    ------
    ValueError
        If var_oracle > var_true or either variance is negative.
    """
    if t_out < 1:
        raise ValueError(f"t_out must be >= 1, got {t_out}")
    if var_oracle < 0:
        raise ValueError(f"var_oracle must be >= 0, got {var_oracle}")
    if var_oracle > var_true:
        raise ValueError(
            f"var_oracle must not exceed var_true, got {var_oracle} > {var_true}"
        )
    return var_true - var_oracle + 2.0 * (mean_true * mean_true + var_oracle) / t_out


@dataclass(frozen=True)
class LamDiagnostic:
    """Growth-rate report for a test-set size.

    Attributes
    ----------
    n : int
        Matrix dimension.
    t_out : float
        Test-set size (real-valued ratios allowed).
    sufficient : bool
        True when t_out >= n**0.3, the rate sufficient for the spectral
        consistency of the holdout eigenvalue estimates.
    series_summable : bool
        True when t_out >= n**0.4, the stronger rate under which the
        n/t_out**5 series over a growing problem sequence stays finite.
    sqrt_ratio : float
        t_out / sqrt(n), for comparison against square-root scaling.
    """

    n: int
    t_out: float
    sufficient: bool
    series_summable: bool
    sqrt_ratio: float


def lam_split_diagnostic(n: int, t_out: float) -> LamDiagnostic:
    """Diagnose whether a test set grows fast enough with the dimension."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if t_out < 1:
        raise ValueError(f"t_out must be >= 1, got {t_out}")
    return LamDiagnostic(
        n=int(n),
        t_out=float(t_out),
        sufficient=bool(t_out >= n ** 0.3),
        series_summable=bool(t_out >= n ** 0.4),
        sqrt_ratio=float(t_out / math.sqrt(n)),
    )


@dataclass(frozen=True)
class RegimeFlags:
    """Applicability flags for a closed-form prediction.

    p_over_n_large marks configurations with p/n > 1e-2, where the
    prediction is known to sit below the measured error; lam_condition_ok
    carries the test-set growth diagnostic.
    """

    p_over_n_large: bool
    lam_condition_ok: bool


@dataclass(frozen=True)
class TheoryPoint:
    """Closed-form prediction bundle for one (n, p, q, k) configuration."""

    n: int
    p: float
    q: float
    t: float
    k: float
    predicted_error: float
    k_opt: float
    regime_flags: RegimeFlags


def theory_point(n: int, p: float, q: float, k: float) -> TheoryPoint:
    """Evaluate the error prediction, optimal ratio, and regime flags at one point."""
    t = n / q
    predicted = holdout_error_closed_form(n, p, q, k)
    k_opt = k_opt_exact(n, p, q)
    flags = RegimeFlags(
        p_over_n_large=bool(p / n > 1e-2),
        lam_condition_ok=lam_split_diagnostic(n, t / k).sufficient,
    )
    return TheoryPoint(
        n=int(n),
        p=float(p),
        q=float(q),
        t=float(t),
        k=float(k),
        predicted_error=float(predicted),
        k_opt=float(k_opt),
        regime_flags=flags,
    )
