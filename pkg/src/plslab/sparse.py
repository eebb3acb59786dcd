"""Soft-threshold variants of the one-component estimator.

Both estimators shrink the empirical covariance entrywise at level ``mu``
before forming the component.  They differ only in the intensity numerator:
the first rescales by the inner product with the raw covariance, the second
by the shrunk vector's own squared norm (which removes the need for a
minimal-signal condition at the price of a restricted-eigenvalue one).
Support recovery happens automatically: coordinates at or below ``mu`` in
absolute value are exactly zero after shrinking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .linalg import as_vector, gram
from .single import tail_factor

# Bound on how far the estimated intensity ratio can exceed the population
# one when the signal-strength condition holds.
RATIO_BOUND_SPARSE = 112.0
# Multiplier in the reporting form of the signal-strength factor.
SIGNAL_ASSEMBLY_CONSTANT = 384.0
# Relative floor (times |sigma_tilde|^2 trace(S)) for the Gram quadratic form.
DEGENERATE_REL_TOL = 1e-12


def soft_threshold(s, mu: float) -> np.ndarray:
    """Entrywise sign(s_j) * max(|s_j| - mu, 0), with sign(0) = 0."""
    s = as_vector(s, "vector")
    if mu < 0:
        raise InvalidInputError(f"threshold level must be nonnegative, got {mu}")
    return np.sign(s) * np.maximum(np.abs(s) - mu, 0.0)


def mu_level(tau: float, n: int, p: int, delta: float, variant: str = "spls") -> float:
    """Threshold level 2 tau sqrt((2/n) ln(2p/delta)) (or ln(p/delta) for 'alt')."""
    if tau <= 0.0:
        raise InvalidInputError(f"tau must be positive, got {tau}")
    if n < 1:
        raise InvalidInputError(f"n must be at least 1, got {n}")
    if p < 1:
        raise InvalidInputError(f"p must be at least 1, got {p}")
    if not 0.0 < delta < 1.0:
        raise InvalidInputError(f"delta must lie in (0, 1), got {delta}")
    if variant == "spls":
        arg = 2.0 * p / delta
    elif variant == "alt":
        arg = p / delta
    else:
        raise InvalidInputError(f"unknown variant {variant!r}, expected 'spls' or 'alt'")
    if arg <= 1.0:
        raise InvalidInputError(f"log argument must exceed 1 for a positive level, got {arg}")
    return 2.0 * tau * math.sqrt(2.0 * math.log(arg) / n)


def spls_weight(sigma_hat, mu: float) -> np.ndarray:
    """Unit-norm shrunk covariance direction; zero vector if everything shrinks away.

    This is the closed form of the L1-penalized covariance-maximization
    problem on the unit sphere, so it can be cross-checked against a direct
    optimizer.
    """
    shrunk = soft_threshold(sigma_hat, mu)
    norm = float(np.linalg.norm(shrunk))
    if norm == 0.0:
        return np.zeros_like(shrunk)
    return shrunk / norm


def support_sets(sigma, mu: float) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
    """Nested population supports (nonzero, above mu/2, above 2 mu).

    All comparisons are strict, so coordinates sitting exactly on a boundary
    fall in the looser set only.
    """
    sigma = as_vector(sigma, "sigma")
    if mu <= 0.0:
        raise InvalidInputError(f"threshold level must be positive, got {mu}")
    mags = np.abs(sigma)
    j0 = tuple(int(j) for j in np.nonzero(sigma)[0])
    j01 = tuple(int(j) for j in np.nonzero(mags > mu / 2.0)[0])
    j02 = tuple(int(j) for j in np.nonzero(mags > 2.0 * mu)[0])
    return j0, j01, j02


@dataclass(frozen=True)
class SparseFit:
    """Result of a soft-threshold fit.

    ``lambda_ratio`` is the estimated intensity denominator over numerator
    (the quantity whose population analogue is bounded by
    :data:`RATIO_BOUND_SPARSE` under the signal-strength condition); it is
    +inf when the numerator vanishes.  ``support_hat`` lists coordinates with
    ``|sigma_hat_j| > mu``, which is exactly the nonzero set of
    ``sigma_tilde``.
    """

    sigma_tilde: np.ndarray
    w_tilde: np.ndarray
    beta: np.ndarray
    variant: str
    lambda_ratio: float
    support_hat: tuple[int, ...]
    mu: float
    degenerate: bool


def spls_estimator(x, y, tau: float, delta: float, mu: float | None = None) -> SparseFit:
    """Soft-threshold estimator rescaled against the raw covariance."""
    return _threshold_fit(x, y, tau, delta, mu, variant="spls")


def alt_estimator(x, y, tau: float, delta: float, mu: float | None = None) -> SparseFit:
    """Soft-threshold estimator rescaled by the shrunk vector's own norm."""
    return _threshold_fit(x, y, tau, delta, mu, variant="alt")


def _threshold_fit(x, y, tau, delta, mu, variant: str) -> SparseFit:
    x = np.asarray(x, dtype=float)
    y = as_vector(y, "Y")
    sig = gram(x)
    n, p = x.shape
    if y.shape[0] != n:
        raise InvalidInputError(f"X has {n} rows but Y has {y.shape[0]} entries")
    if not 0.0 < delta < 0.5:
        raise InvalidInputError(f"delta must lie in (0, 1/2), got {delta}")
    if mu is None:
        mu = mu_level(tau, n, p, delta, variant)
    elif mu <= 0.0:
        raise InvalidInputError(f"threshold level must be positive, got {mu}")
    if tau <= 0.0:
        raise InvalidInputError(f"tau must be positive, got {tau}")

    sigma_hat = x.T @ y / n
    sigma_tilde = soft_threshold(sigma_hat, mu)
    support_hat = tuple(int(j) for j in np.nonzero(sigma_tilde)[0])
    sq_norm = float(sigma_tilde @ sigma_tilde)
    quad = float(sigma_tilde @ (sig @ sigma_tilde))
    degenerate = sq_norm == 0.0 or quad <= DEGENERATE_REL_TOL * sq_norm * float(np.trace(sig))

    if variant == "spls":
        numerator = float(sigma_tilde @ sigma_hat)
    else:
        numerator = sq_norm
    if degenerate:
        beta = np.zeros(p)
    else:
        beta = (numerator / quad) * sigma_tilde
    lambda_ratio = quad / numerator if numerator != 0.0 else math.inf
    w_tilde = sigma_tilde / math.sqrt(sq_norm) if sq_norm > 0.0 else np.zeros(p)
    return SparseFit(
        sigma_tilde=sigma_tilde,
        w_tilde=w_tilde,
        beta=beta,
        variant=variant,
        lambda_ratio=lambda_ratio,
        support_hat=support_hat,
        mu=mu,
        degenerate=degenerate,
    )


@dataclass(frozen=True)
class SparseConstants:
    """Scalar constants of the sparse prediction bound at level ``delta``.

    ``signal_factor`` is the multiplier d on ``(tau^2/n) rho(S_J0) tr(S_J0)``
    in the signal-strength condition: the reporting ('theorem') form is
    ``SIGNAL_ASSEMBLY_CONSTANT * (ln(10/delta) + ln(p/delta))`` and the
    proof-chain form is ``4 * tail_factor(ln(10/delta)) + 192 ln(2p/delta)``.
    """

    delta: float
    p: int
    mu: float
    log_level: float
    signal_factor: float
    mode: str
    ratio_bound: float = RATIO_BOUND_SPARSE
    assembly_constant: float = SIGNAL_ASSEMBLY_CONSTANT


def signal_factor(delta: float, p: int, mode: str = "theorem") -> float:
    """Multiplier d in the signal-strength condition, in either form."""
    if not 0.0 < delta < 0.5:
        raise InvalidInputError(f"delta must lie in (0, 1/2), got {delta}")
    if p < 1:
        raise InvalidInputError(f"p must be at least 1, got {p}")
    if mode == "theorem":
        return SIGNAL_ASSEMBLY_CONSTANT * (math.log(10.0 / delta) + math.log(p / delta))
    if mode == "proof":
        return 4.0 * tail_factor(math.log(10.0 / delta)) + 192.0 * math.log(2.0 * p / delta)
    raise InvalidInputError(f"unknown mode {mode!r}, expected 'theorem' or 'proof'")


def sparse_constants(tau: float, n: int, p: int, delta: float, mode: str = "theorem") -> SparseConstants:
    """Constants of the sparse bound for a given problem size."""
    d = signal_factor(delta, p, mode)
    mu = mu_level(tau, n, p, delta, "spls")
    return SparseConstants(
        delta=delta, p=p, mu=mu, log_level=math.log(10.0 / delta), signal_factor=d, mode=mode
    )
