"""Population and sample covariance ensembles.

The population model is the white inverse Wishart: Sigma = W^{-1} with
W ~ (1/(t* - n - 1)) G G', G an n x t* standard normal matrix, so that
E[Sigma] is the identity.  The shape parameter p relates to the degrees of
freedom via t* = n (1 + p) / p; because sampling needs an integer t*, the
requested p is rounded through t* and the effective value p = n / (t* - n)
is what EnsembleSpec stores and what every moment formula should consume.

Data matrices are zero-mean Gaussian, X = Sigma^{1/2} Y, and the sample
covariance is E = (1/t) X X' with no mean subtraction (the model is centered
by construction; demeaning of user data is a CLI concern).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from .linalg import symmetrize

__all__ = [
    "EnsembleSpec",
    "SeededRng",
    "spec_from_np",
    "sample_white_inverse_wishart",
    "sample_gaussian_data",
    "sample_covariance",
    "estimate_p_from_sample",
]

# Condition-number ceiling above which a sampled Wishart is treated as
# numerically singular and redrawn once from the next substream.
_COND_LIMIT = 1e14


@dataclass(frozen=True)
class SeededRng:
    """Deterministic random stream addressed by (master_seed, stream_id).

    Identical field values reproduce identical draws bit-for-bit across runs
    and across worker counts: every generator is derived from a fresh
    ``SeedSequence`` keyed only by the fields and the call-site subkeys,
    never from mutable state.
    """

    master_seed: int
    stream_id: int = 0

    def generator(self, *subkeys: int) -> np.random.Generator:
        """A fresh PCG64 generator for this stream and subkey path."""
        seq = np.random.SeedSequence(
            self.master_seed, spawn_key=(self.stream_id, *subkeys)
        )
        return np.random.default_rng(seq)


@dataclass(frozen=True)
class EnsembleSpec:
    """White inverse Wishart population plus the observation design.

    Attributes
    ----------
    n : int
        Matrix dimension.
    p : float
        Effective shape, p = n / (t_star - n); this is the value all moment
        formulas should use.
    t_star : int
        Integer inverse-Wishart degrees of freedom, > n + 1.
    t : int
        Number of observations per sample covariance.
    q : float
        Aspect ratio n / t.
    """

    n: int
    p: float
    t_star: int
    t: int
    q: float

    def __post_init__(self):
        if self.n < 4:
            raise ValueError(f"n must be >= 4, got {self.n}")
        if self.t_star <= self.n + 1:
            raise ValueError(
                f"t_star must exceed n + 1 for the mean to exist, got "
                f"t_star={self.t_star}, n={self.n}"
            )
        if not self.p < self.n / 3:
            raise ValueError(
                f"p={self.p:g} >= n/3={self.n / 3:g}: element variance of the "
                "population is not finite"
            )
        if self.t < 1:
            raise ValueError(f"t must be >= 1, got {self.t}")
        expected_p = self.n / (self.t_star - self.n)
        if abs(self.p - expected_p) > 1e-12 * max(1.0, expected_p):
            raise ValueError(
                f"inconsistent shape: p={self.p!r} but n/(t_star-n)={expected_p!r}"
            )
        if abs(self.q - self.n / self.t) > 1e-12:
            raise ValueError(f"inconsistent aspect ratio: q={self.q!r}, n/t={self.n / self.t!r}")


def spec_from_np(
    n: int,
    p_requested: float,
    *,
    q: float | None = None,
    t: int | None = None,
) -> EnsembleSpec:
    """Build an :class:`EnsembleSpec` from a requested shape parameter.

    Parameters
    ----------
    n : int
        Dimension, >= 4.
    p_requested : float
        Desired shape, 0 < p < n/3.  Degrees of freedom are rounded to
        t_star = round(n (1 + p) / p) and the stored p is the effective
        value n / (t_star - n).
    q, t : optional
        Observation design; give exactly one.  ``t`` wins when both would
        describe the same design, ``q`` is converted via t = round(n / q).

    Returns
    -------
    EnsembleSpec
    """
    if n < 4:
        raise ValueError(f"n must be >= 4, got {n}")
    if p_requested <= 0:
        raise ValueError(f"p must be positive, got {p_requested}")
    if not p_requested < n / 3:
        raise ValueError(
            f"p={p_requested:g} >= n/3={n / 3:g}: element variance of the "
            "population is not finite"
        )
    if (q is None) == (t is None):
        raise ValueError("give exactly one of q or t")
    if t is None:
        if q <= 0:
            raise ValueError(f"q must be positive, got {q}")
        t = int(round(n / q))
    t = int(t)
    t_star = int(round(n * (1.0 + p_requested) / p_requested))
    if t_star <= n + 1:
        raise ValueError(
            f"rounded degrees of freedom t_star={t_star} do not exceed n+1={n + 1}"
        )
    p_eff = n / (t_star - n)
    return EnsembleSpec(n=n, p=p_eff, t_star=t_star, t=t, q=n / t)


def sample_white_inverse_wishart(
    spec: EnsembleSpec, rng: SeededRng
) -> NDArray[np.float64]:
    """Draw a population covariance Sigma from the white inverse Wishart.

    Sigma = W^{-1} with W = (1/(t* - n - 1)) G G' and G an n x t* standard
    normal matrix, which makes E[Sigma] the identity.  The inverse is taken
    with a Cholesky solve.  If W is numerically singular (condition estimate
    above 1e14) the draw is retried once on the next substream; a second
    failure raises.

    Returns
    -------
    ndarray
        Symmetric positive definite n x n matrix.  Repeated calls with the
        same ``rng`` return the identical matrix.
    """
    n, t_star = spec.n, spec.t_star
    last_cond = np.inf
    for attempt in (0, 1):
        g = rng.generator(attempt).standard_normal((n, t_star))
        w = (g @ g.T) / (t_star - n - 1)
        # 2-norm condition estimate; w is symmetric PSD by construction.
        cond = float(np.linalg.cond(w))
        if np.isfinite(cond) and cond <= _COND_LIMIT:
            identity = np.eye(n)
            cf = sla.cho_factor(w, lower=True, check_finite=False)
            sigma = sla.cho_solve(cf, identity, check_finite=False)
            return symmetrize(sigma)
        last_cond = cond
    raise ValueError(
        f"sampled Wishart is numerically singular twice in a row "
        f"(condition estimate {last_cond:.3g} > {_COND_LIMIT:g})"
    )


def sample_gaussian_data(
    sigma: NDArray[np.float64], t: int, rng: SeededRng
) -> NDArray[np.float64]:
    """Draw t i.i.d. zero-mean Gaussian observations with covariance sigma.

    Returns an n x t matrix X = sigma^{1/2} Y where Y is standard normal and
    the square root comes from the symmetric eigendecomposition.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    sigma = symmetrize(sigma, "sigma")
    eigenvalues, eigenvectors = np.linalg.eigh(sigma)
    if eigenvalues[0] < -1e-10:
        raise ValueError(
            f"sigma is not positive definite: min eigenvalue {eigenvalues[0]:g}"
        )
    root = (eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ eigenvectors.T
    y = rng.generator().standard_normal((sigma.shape[0], t))
    return root @ y


def sample_covariance(x: NDArray[np.float64]) -> NDArray[np.float64]:
    """Sample covariance E = (1/t) X X' of an n x t data matrix.

    No mean is subtracted: the generating model is zero-mean.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError(f"expected n x t data matrix with t >= 1, got shape {x.shape}")
    return symmetrize(x @ x.T / x.shape[1])


def estimate_p_from_sample(e: NDArray[np.float64], q: float) -> float:
    """Estimate the population shape from a sample covariance.

    Uses the moment identity E[tau(E^2)] = E[tau(Sigma^2)] + q together with
    the large-n limit tau(Sigma^2) -> 1 + p, giving p_hat = tau(E^2) - 1 - q.
    The estimate may be negative for near-identity populations; it is
    returned as-is and the caller decides whether to floor it.
    """
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")
    e = np.asarray(e, dtype=np.float64)
    tau_e2 = float(np.sum(e * e) / e.shape[0])
    return tau_e2 - 1.0 - q
