"""One-component estimator, its signal-strength test, and the test constants.

The one-component coefficient vector is the empirical covariance direction
scaled by the ratio of its squared norm to its Gram quadratic form.  The
thresholded variant keeps that estimator only when the quadratic form clears a
noise floor proportional to ``rho(S) * trace(S) * tau^2 / n``; otherwise it
returns zero.  All scalar constants entering the test and the matching
prediction bound are collected in :class:`ThresholdConstants`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .linalg import as_sym_matrix, as_vector, gram, spectral_radius

# Quadratic forms at or below this absolute level are treated as exactly zero;
# only protects against division by denormal garbage.
DEGENERATE_QUAD_TOL = 1e-300


def tail_factor(x: float) -> float:
    """Quadratic-form tail multiplier 1 + 2x + 2 sqrt(x).

    A chi-square-type quadratic form stays below ``tail_factor(x)`` times its
    mean except with probability exp(-x); this factor is the building block of
    every deviation threshold in :mod:`plslab.bounds`.
    """
    if x < 0:
        raise InvalidInputError(f"tail level must be nonnegative, got {x}")
    return 1.0 + 2.0 * x + 2.0 * math.sqrt(x)


@dataclass(frozen=True)
class ThresholdConstants:
    """Scalar constants for the signal-strength test at level ``delta``.

    Attributes
    ----------
    delta, r : float
        Confidence level and the free trade-off parameter in (0, 1).
    log_level : float
        ln(5 / delta), the exponent shared by the five deviation events.
    tail_factor : float
        ``tail_factor(log_level)``.
    test_factor : float
        Multiplier on ``noise_floor`` in the decision rule.
    strong_factor : float
        Signal level (in ``noise_floor`` units) above which the test is
        guaranteed to fire on the high-probability event.
    ratio_bound : float
        High-probability bound on the estimated-to-population intensity ratio.
    noise_floor : float
        ``(tau^2 / n) * rho(S) * trace(S)``.
    """

    delta: float
    r: float
    log_level: float
    tail_factor: float
    test_factor: float
    strong_factor: float
    ratio_bound: float
    noise_floor: float


def threshold_scalars(delta: float, r: float = 0.5) -> tuple[float, float, float, float, float]:
    """Design-free part of :func:`threshold_constants`.

    Returns ``(log_level, tail, test_factor, strong_factor, ratio_bound)``.
    """
    if not 0.0 < delta < 1.0:
        raise InvalidInputError(f"delta must lie in (0, 1), got {delta}")
    if not 0.0 < r < 1.0:
        raise InvalidInputError(f"r must lie in (0, 1), got {r}")
    x = math.log(5.0 / delta)
    g = tail_factor(x)
    t = 2.0 * g / r + g + 2.0 * x
    h = 2.0 * (t + g + 4.0 * x)
    denom = 1.0 + r - ((1.0 + r) / 2.0 + 2.0 * r / (1.0 + r))
    if denom <= 0.0:
        # (1-r)^2 / (2(1+r)) is positive on (0, 1); guarded regardless.
        raise InvalidInputError(f"ratio-bound denominator is not positive at r={r}")
    c = (1.0 + r + 2.0 * math.sqrt(2.0 * r * x / g)) / denom
    return x, g, t, h, c


def threshold_constants(delta: float, r: float, tau: float, n: int, sig) -> ThresholdConstants:
    """All constants of the signal-strength test for a given design Gram."""
    if tau <= 0.0:
        raise InvalidInputError(f"tau must be positive, got {tau}")
    if n < 1:
        raise InvalidInputError(f"n must be at least 1, got {n}")
    sig = as_sym_matrix(sig, "gram matrix")
    x, g, t, h, c = threshold_scalars(delta, r)
    floor = (tau * tau / n) * spectral_radius(sig) * float(np.trace(sig))
    return ThresholdConstants(
        delta=delta,
        r=r,
        log_level=x,
        tail_factor=g,
        test_factor=t,
        strong_factor=h,
        ratio_bound=c,
        noise_floor=floor,
    )


@dataclass(frozen=True)
class SingleFitDiagnostics:
    """Per-fit audit record for the thresholded one-component estimator."""

    sigma_hat: np.ndarray
    quad_form: float
    intensity: float
    test_threshold: float
    test_passed: bool


def single_component_estimator(sigma_hat, sig) -> np.ndarray:
    """One-component coefficient vector (sigma_hat' sigma_hat / sigma_hat' S sigma_hat) * sigma_hat.

    Returns the zero vector when the Gram quadratic form is numerically zero,
    which covers sigma_hat = 0.
    """
    sigma_hat = as_vector(sigma_hat, "sigma_hat")
    sig = as_sym_matrix(sig, "gram matrix")
    if sigma_hat.shape[0] != sig.shape[0]:
        raise InvalidInputError(
            f"sigma_hat has length {sigma_hat.shape[0]}, gram matrix is {sig.shape[0]}x{sig.shape[0]}"
        )
    quad = float(sigma_hat @ (sig @ sigma_hat))
    if quad <= DEGENERATE_QUAD_TOL:
        return np.zeros_like(sigma_hat)
    return (float(sigma_hat @ sigma_hat) / quad) * sigma_hat


def thresholded_estimator(
    x, y, tau: float, delta: float, r: float = 0.5
) -> tuple[np.ndarray, SingleFitDiagnostics]:
    """One-component estimator gated by the signal-strength test.

    The estimator is returned unchanged when the Gram quadratic form of the
    empirical covariance exceeds ``test_factor * noise_floor`` and replaced by
    the zero vector otherwise.  Diagnostics record the quadratic form, the
    intensity ratio (0 when degenerate), the threshold, and the decision.
    """
    x = np.asarray(x, dtype=float)
    y = as_vector(y, "Y")
    n = x.shape[0] if x.ndim == 2 else 0
    sig = gram(x)
    if y.shape[0] != n:
        raise InvalidInputError(f"X has {n} rows but Y has {y.shape[0]} entries")
    sigma_hat = x.T @ y / n
    consts = threshold_constants(delta, r, tau, n, sig)
    quad = float(sigma_hat @ (sig @ sigma_hat))
    threshold = consts.test_factor * consts.noise_floor
    passed = quad > threshold
    if passed:
        beta = single_component_estimator(sigma_hat, sig)
    else:
        beta = np.zeros(x.shape[1])
    intensity = float(sigma_hat @ sigma_hat) / quad if quad > DEGENERATE_QUAD_TOL else 0.0
    diag = SingleFitDiagnostics(
        sigma_hat=sigma_hat,
        quad_form=quad,
        intensity=intensity,
        test_threshold=threshold,
        test_passed=passed,
    )
    return beta, diag
