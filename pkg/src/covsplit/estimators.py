"""Covariance estimators built from spectral surgery on the sample covariance.

All estimators here are rotational invariant: they keep a set of sample
eigenvectors and replace the eigenvalues.  The oracle uses the population
matrix itself; the holdout and k-fold variants replace it with the sample
covariance of held-out observations; linear shrinkage and the nonlinear
shrinkage evaluator work from observable quantities only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from numpy.typing import NDArray

from .ensembles import SeededRng, sample_covariance
from .linalg import Spectrum, diag_quadratic, eigh_ascending, recompose, symmetrize

__all__ = [
    "SplitPlan",
    "make_split",
    "oracle_estimator",
    "holdout_eigenvalues",
    "holdout_estimator",
    "holdout_rie_estimator",
    "iter_fold_holdout",
    "kfold_cv_estimator",
    "kfold_cv_eigenvalues",
    "kfold_cv_rie_estimator",
    "linear_shrinkage",
    "ledoit_peche_eigenvalues",
    "default_eta",
]


@dataclass(frozen=True)
class SplitPlan:
    """Partition of observation indices into train/test sets.

    Attributes
    ----------
    t : int
        Total number of observations.
    t_out : int
        Test-set size, 1 <= t_out <= t - 1.
    folds : tuple of ndarray
        Disjoint test index sets; length 1 for holdout, k = t / t_out for
        k-fold (the sets then cover all indices).
    mode : str
        Either ``"holdout"`` or ``"kfold"``.
    """

    t: int
    t_out: int
    folds: tuple[NDArray[np.intp], ...]
    mode: str

    @property
    def k(self) -> float:
        return self.t / self.t_out


def make_split(
    t: int,
    t_out: int,
    mode: str = "holdout",
    shuffle: bool = False,
    rng: SeededRng | None = None,
) -> SplitPlan:
    """Build a train/test split plan over observation indices 0..t-1.

    By default the assignment is contiguous: the holdout test set is the
    trailing block (respecting time order), and k-fold test blocks are listed
    from the trailing block backwards.  With ``shuffle=True`` the indices are
    randomly permuted first, which requires ``rng``.

    Raises
    ------
    ValueError
        If t_out is out of range, or (k-fold) t_out does not divide t.
    """
    if mode not in ("holdout", "kfold"):
        raise ValueError(f"mode must be 'holdout' or 'kfold', got {mode!r}")
    if not 1 <= t_out <= t - 1:
        raise ValueError(f"t_out must satisfy 1 <= t_out <= t-1, got t_out={t_out}, t={t}")
    if mode == "kfold" and t % t_out != 0:
        raise ValueError(f"k-fold requires t_out to divide t, got t={t}, t_out={t_out}")
    if shuffle:
        if rng is None:
            raise ValueError("shuffle=True requires an rng")
        order = rng.generator().permutation(t)
    else:
        order = np.arange(t)
    if mode == "holdout":
        folds = (order[t - t_out:],)
    else:
        k = t // t_out
        folds = tuple(
            order[t - (l + 1) * t_out: t - l * t_out] for l in range(k)
        )
    return SplitPlan(t=t, t_out=t_out, folds=folds, mode=mode)


def _train_indices(plan: SplitPlan, fold: NDArray[np.intp]) -> NDArray[np.intp]:
    mask = np.ones(plan.t, dtype=bool)
    mask[fold] = False
    return np.nonzero(mask)[0]


def oracle_estimator(
    e: NDArray[np.float64], sigma: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Best rotational invariant estimator given the population matrix.

    Keeps the eigenvectors V of ``e`` and replaces the eigenvalues by the
    quadratic forms v_i' sigma v_i, which minimizes the normalized Frobenius
    error among all matrices sharing those eigenvectors.  The trace of the
    output equals trace(sigma) up to round-off.
    """
    e = symmetrize(e, "e")
    sigma = symmetrize(sigma, "sigma")
    if e.shape != sigma.shape:
        raise ValueError(f"dimension mismatch: {e.shape} vs {sigma.shape}")
    spectrum = eigh_ascending(e)
    d = diag_quadratic(spectrum.eigenvectors, sigma)
    return recompose(spectrum.eigenvectors, d)


def holdout_eigenvalues(
    x: NDArray[np.float64], plan: SplitPlan
) -> tuple[Spectrum, NDArray[np.float64]]:
    """Train-set spectrum and test-set eigenvalue estimates for one split.

    Computes E_in on the train columns and E_out on the test columns, and
    returns the ascending spectrum of E_in together with
    d_i = v_i' E_out v_i in the same rank order (the d values themselves are
    not sorted; their order is the train-eigenvalue rank).
    """
    if plan.mode != "holdout":
        raise ValueError(f"expected a holdout plan, got mode {plan.mode!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != plan.t:
        raise ValueError(f"data has t={x.shape[1]} columns but plan expects {plan.t}")
    test = plan.folds[0]
    train = _train_indices(plan, test)
    if train.size == 0 or test.size == 0:
        raise ValueError("both train and test sets must be non-empty")
    e_in = sample_covariance(x[:, train])
    e_out = sample_covariance(x[:, test])
    spectrum_in = eigh_ascending(e_in)
    d = diag_quadratic(spectrum_in.eigenvectors, e_out)
    return spectrum_in, d


def holdout_estimator(
    x: NDArray[np.float64], plan: SplitPlan
) -> NDArray[np.float64]:
    """Holdout estimator: train eigenvectors, test-set eigenvalues.

    Returns V_in Diag(V_in' E_out V_in) V_in' where V_in comes from the
    sample covariance of the train columns and E_out is the sample
    covariance of the test columns.  The output trace equals trace(E_out)
    up to round-off.
    """
    spectrum_in, d = holdout_eigenvalues(x, plan)
    return recompose(spectrum_in.eigenvectors, d)


def holdout_rie_estimator(
    x: NDArray[np.float64], plan: SplitPlan
) -> NDArray[np.float64]:
    """Holdout eigenvalues recombined with the full-sample eigenvectors.

    The d values from :func:`holdout_eigenvalues` are paired rank-by-rank
    (both bases ordered by ascending eigenvalue) with the eigenvectors of
    the sample covariance over all observations.
    """
    _, d = holdout_eigenvalues(x, plan)
    spectrum_full = eigh_ascending(sample_covariance(np.asarray(x, dtype=np.float64)))
    return recompose(spectrum_full.eigenvectors, d)


def iter_fold_holdout(
    x: NDArray[np.float64], plan: SplitPlan
) -> Iterator[tuple[Spectrum, NDArray[np.float64]]]:
    """Yield (train spectrum, test eigenvalue estimates) for each fold in order."""
    if plan.mode != "kfold":
        raise ValueError(f"expected a kfold plan, got mode {plan.mode!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != plan.t:
        raise ValueError(f"data has t={x.shape[1]} columns but plan expects {plan.t}")
    for fold in plan.folds:
        train = _train_indices(plan, fold)
        e_in = sample_covariance(x[:, train])
        e_out = sample_covariance(x[:, fold])
        spectrum_in = eigh_ascending(e_in)
        yield spectrum_in, diag_quadratic(spectrum_in.eigenvectors, e_out)


def kfold_cv_estimator(
    x: NDArray[np.float64], plan: SplitPlan
) -> NDArray[np.float64]:
    """Average of the per-fold holdout estimators over a disjoint partition.

    Each fold serves once as the test set with the remaining observations as
    the train set; the k resulting holdout estimators are averaged entrywise.
    Folds are combined in the plan's fixed order, so the result does not
    depend on evaluation scheduling.
    """
    acc: NDArray[np.float64] | None = None
    count = 0
    for spectrum_in, d in iter_fold_holdout(x, plan):
        contribution = recompose(spectrum_in.eigenvectors, d)
        acc = contribution if acc is None else acc + contribution
        count += 1
    assert acc is not None and count == len(plan.folds)
    return symmetrize(acc / count)


def kfold_cv_eigenvalues(
    x: NDArray[np.float64], plan: SplitPlan
) -> NDArray[np.float64]:
    """Rank-wise mean of the per-fold holdout eigenvalue estimates."""
    total: NDArray[np.float64] | None = None
    count = 0
    for _, d in iter_fold_holdout(x, plan):
        total = d if total is None else total + d
        count += 1
    assert total is not None
    return total / count


def kfold_cv_rie_estimator(
    x: NDArray[np.float64], plan: SplitPlan
) -> NDArray[np.float64]:
    """Fold-averaged eigenvalues recombined with the full-sample eigenvectors.

    The per-fold test eigenvalue estimates are averaged rank-by-rank and
    paired with the ascending eigenvectors of the sample covariance over all
    observations.
    """
    lam_cv = kfold_cv_eigenvalues(x, plan)
    spectrum_full = eigh_ascending(sample_covariance(np.asarray(x, dtype=np.float64)))
    return recompose(spectrum_full.eigenvectors, lam_cv)


def linear_shrinkage(
    e: NDArray[np.float64], p: float, q: float
) -> NDArray[np.float64]:
    """Shrink the sample covariance linearly toward the identity.

    Returns r E + (1 - r) I with r = p / (p + q), the weight that is optimal
    for a white inverse Wishart population with shape p observed at aspect
    ratio q.
    """
    if p < 0:
        raise ValueError(f"p must be >= 0, got {p}")
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")
    e = symmetrize(e, "e")
    r = p / (p + q)
    return r * e + (1.0 - r) * np.eye(e.shape[0])


def default_eta(n: int) -> float:
    """Default spectral smoothing bandwidth, n**(-1/2)."""
    return 1.0 / np.sqrt(n)


def ledoit_peche_eigenvalues(
    spectrum: Spectrum, q: float, eta: float | None = None
) -> tuple[NDArray[np.float64], int]:
    """Nonlinear shrinkage of sample eigenvalues from observable data only.

    Evaluates, at z_i = lambda_i + i eta,

        xi_i = lambda_i / |1 - q + q z_i g(z_i)|**2,

    where g(z) = (1/n) sum_j 1/(z - lambda_j) is the resolvent trace of the
    sample spectrum.  The bandwidth eta keeps z off the real axis; it
    defaults to n**(-1/2) and should shrink as the dimension grows.  Any
    negative corrected value is floored at zero to preserve positive
    semidefiniteness.

    Parameters
    ----------
    spectrum : Spectrum
        Sample covariance spectrum.
    q : float
        Aspect ratio n/t, > 0.
    eta : float, optional
        Smoothing bandwidth, > 0.

    Returns
    -------
    values : ndarray
        Corrected eigenvalues in the spectrum's rank order, all >= 0.
    floored_count : int
        How many entries were clipped up to zero.
    """
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")
    lam = np.asarray(spectrum.eigenvalues, dtype=np.float64)
    n = lam.shape[0]
    if eta is None:
        eta = default_eta(n)
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    z = lam + 1j * eta
    g = np.mean(1.0 / (z[:, None] - lam[None, :]), axis=1)
    xi = lam / np.abs(1.0 - q + q * z * g) ** 2
    floored = int(np.count_nonzero(xi < 0.0))
    return np.clip(xi, 0.0, None), floored
