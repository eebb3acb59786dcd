"""Evaluation of the finite-sample prediction bounds and their event system.

Everything here is deterministic arithmetic on a :class:`PopulationContext`
(the true coefficient vector, design Gram, noise level, and sample size).
The right-hand sides decompose as ``bias + constant * variance-shape``; the
constant either comes from the explicit proof chain (``mode='proof'``) or is
supplied by the caller (``mode='calibrated'``), typically from
:func:`plslab.simulate.calibrate_constant`.

Bound tags
----------
T31
    Thresholded one-component estimator; variance shape
    ``(tau^2/n) max(tr/lam, rho tr/lam^2)``.
T41
    Soft-threshold estimator under the signal-strength condition; variance
    shape ``(tau^2 s/n) max(rho0/lam^2, 1/lam) ln(p/delta)``.
C41
    Same estimator with the restricted-eigenvalue surrogate ``phi`` replacing
    the population intensity: ``max(phi^2 rho0, phi)``.
T42
    Alternative soft-threshold estimator (own-norm rescaling, ``mu`` from
    ``ln(p/delta)``); same shape as C41.

Degenerate populations (``sigma = 0``) make every right-hand side +inf with a
flag, so zero-signal scenarios are covered vacuously rather than erroring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import InvalidInputError
from .linalg import (
    as_matrix,
    as_sym_matrix,
    as_vector,
    min_eig_on_support,
    spectral_radius,
)
from .single import tail_factor, threshold_scalars
from .sparse import RATIO_BOUND_SPARSE, SIGNAL_ASSEMBLY_CONSTANT

BOUND_TAGS = ("T31", "T41", "C41", "T42")


@dataclass(frozen=True)
class PopulationContext:
    """Fixed-design population quantities shared by all bound evaluations.

    ``sigma`` is the population covariance vector ``S beta``; ``lam`` is its
    intensity ``sigma' S sigma / sigma' sigma`` (0.0 sentinel when sigma = 0);
    ``support`` and ``s`` describe the nonzero set of ``sigma``.
    """

    beta: np.ndarray
    sig: np.ndarray
    tau: float
    n: int
    sigma: np.ndarray
    lam: float
    support: tuple[int, ...]
    s: int


def population_context(beta, sig, tau: float, n: int) -> PopulationContext:
    beta = as_vector(beta, "beta")
    sig = as_sym_matrix(sig, "gram matrix")
    if beta.shape[0] != sig.shape[0]:
        raise InvalidInputError(
            f"beta has length {beta.shape[0]}, gram matrix is {sig.shape[0]}x{sig.shape[0]}"
        )
    if tau < 0.0:
        raise InvalidInputError(f"tau must be nonnegative, got {tau}")
    if n < 1:
        raise InvalidInputError(f"n must be at least 1, got {n}")
    sigma = sig @ beta
    sq = float(sigma @ sigma)
    lam = float(sigma @ (sig @ sigma)) / sq if sq > 0.0 else 0.0
    support = tuple(int(j) for j in np.nonzero(sigma)[0])
    return PopulationContext(
        beta=beta,
        sig=sig,
        tau=tau,
        n=n,
        sigma=sigma,
        lam=lam,
        support=support,
        s=len(support),
    )


def restricted_gram(ctx: PopulationContext) -> np.ndarray | None:
    """Principal submatrix of the Gram on the support of sigma (None if empty)."""
    if ctx.s == 0:
        return None
    idx = np.asarray(ctx.support, dtype=int)
    return ctx.sig[np.ix_(idx, idx)]


def bias_term(ctx: PopulationContext, x) -> float:
    """Twice the in-sample approximation error of the best multiple of sigma.

    Returns ``(2/n) min_c ||X (beta - c sigma)||^2``; the minimizer is
    ``c = sigma'sigma / sigma'S sigma``, and the span of the zero vector is
    just the origin, so a zero sigma yields ``(2/n) ||X beta||^2``.
    """
    x = as_matrix(x, "X")
    if x.shape != (ctx.n, ctx.beta.shape[0]):
        raise InvalidInputError(
            f"X has shape {x.shape}, expected ({ctx.n}, {ctx.beta.shape[0]})"
        )
    sq = float(ctx.sigma @ ctx.sigma)
    if sq > 0.0:
        scale = sq / float(ctx.sigma @ (ctx.sig @ ctx.sigma))
        diff = ctx.beta - scale * ctx.sigma
    else:
        diff = ctx.beta
    resid = x @ diff
    return 2.0 * float(resid @ resid) / ctx.n


def deviation_terms(x_level: float, ctx: PopulationContext) -> tuple[float, float, float]:
    """Deviation thresholds (t1, t2, t3) for the three dense covariance events.

    t1 bounds ``|sigma_hat'sigma_hat - sigma'sigma|``, t2 bounds
    ``|sigma_hat'S sigma_hat - sigma'S sigma|``, t3 bounds the Gram quadratic
    form of the error ``sigma_hat - sigma``; each fails with probability at
    most ``exp(-x_level)`` (t1, t2 cost two tails each, t3 one).
    """
    if x_level < 0.0:
        raise InvalidInputError(f"x_level must be nonnegative, got {x_level}")
    g = tail_factor(x_level)
    noise = ctx.tau * ctx.tau / ctx.n
    tr = float(np.trace(ctx.sig))
    tr2 = float((ctx.sig * ctx.sig).sum())
    rho = spectral_radius(ctx.sig)
    norm_sigma = float(np.linalg.norm(ctx.sigma))
    root_quad = math.sqrt(max(float(ctx.sigma @ (ctx.sig @ ctx.sigma)), 0.0))
    root = 2.0 * math.sqrt(2.0) * math.sqrt(noise) * math.sqrt(x_level)
    t1 = g * noise * tr + root * math.sqrt(rho) * norm_sigma
    t2 = g * noise * tr2 + root * rho * root_quad
    t3 = g * noise * tr2
    return t1, t2, t3


def sparse_deviation_terms(x_level: float, ctx: PopulationContext) -> tuple[float, float, float]:
    """Deviation thresholds (t01, t02, t03) for the support-restricted events.

    Same roles as :func:`deviation_terms` but with the covariance restricted
    to the support of sigma: t01 bounds the squared-norm deviation, t02 the
    squared error norm, t03 the Gram quadratic form of the error.  An empty
    support makes all three zero.
    """
    if x_level < 0.0:
        raise InvalidInputError(f"x_level must be nonnegative, got {x_level}")
    sub = restricted_gram(ctx)
    if sub is None:
        return 0.0, 0.0, 0.0
    g = tail_factor(x_level)
    noise = ctx.tau * ctx.tau / ctx.n
    tr0 = float(np.trace(sub))
    tr0_sq = float((sub * sub).sum())
    rho0 = spectral_radius(sub)
    norm_sigma = float(np.linalg.norm(ctx.sigma))
    t01 = g * noise * tr0 + 2.0 * math.sqrt(2.0) * math.sqrt(noise) * math.sqrt(rho0) * math.sqrt(x_level) * norm_sigma
    t02 = g * noise * tr0
    t03 = g * noise * tr0_sq
    return t01, t02, t03


def quad_form_deviation_thresholds(a, m, t: float, s: int, x: float) -> tuple[float, float]:
    """Two-sided tail thresholds for ``U' A^s U`` with ``U ~ N(m, t A)``.

    Returns ``(upper, lower)`` such that each one-sided exceedance has
    probability at most ``exp(-x)``.  Only powers ``s`` in {0, 1} are
    supported; both reduce to the classical chi-square deviation bound when
    ``m = 0`` and ``A = I``.
    """
    a = as_sym_matrix(a, "A")
    m = as_vector(m, "m")
    if m.shape[0] != a.shape[0]:
        raise InvalidInputError(f"m has length {m.shape[0]}, A is {a.shape[0]}x{a.shape[0]}")
    if t < 0.0:
        raise InvalidInputError(f"t must be nonnegative, got {t}")
    if x < 0.0:
        raise InvalidInputError(f"x must be nonnegative, got {x}")
    if s not in (0, 1):
        raise InvalidInputError(f"only powers 0 and 1 are supported, got {s}")
    rho = spectral_radius(a)
    if s == 0:
        mean = float(m @ m) + t * float(np.trace(a))
        theta = t * t * float((a * a).sum()) + 2.0 * t * rho * float(m @ m)
        top = rho
    else:
        am = a @ m
        quad = float(m @ am)
        a2 = a @ a
        mean = quad + t * float((a * a).sum())
        theta = t * t * float((a2 * a2).sum()) + 2.0 * t * rho * rho * quad
        top = rho * rho
    spread = 2.0 * math.sqrt(theta * x)
    upper = mean + spread + 2.0 * t * top * x
    lower = mean - spread
    return upper, lower


def dense_proof_constant(delta: float, r: float = 0.5) -> float:
    """Explicit constant multiplying the T31 variance shape.

    Assembled from the same chain that proves the bound; about 2.3e4 at
    ``delta = 0.1``, ``r = 1/2``, so proof-mode coverage checks are loose by
    construction.
    """
    x, g, _, h, c = threshold_scalars(delta, r)
    m = max(1.0, g / (r * h))
    return (
        2.0 * g / r
        + 4.0 * c * c
        + 16.0 * c * r * g * m
        + 128.0 * c * x
        + 16.0 * r * g * m
        + 128.0 * x
    )


def sparse_proof_constant(delta: float, p: int) -> float:
    """Explicit constant multiplying the sparse variance shape.

    The three error groups of the underlying decomposition enter with weights
    ``4 F^2``, ``8 F^2`` and ``8`` (``F`` = :data:`RATIO_BOUND_SPARSE`); each
    group is normalized by ``ln(p/delta)`` so the reported shape carries that
    log factor exactly once.  Order 1e8 at practical sizes, hence only useful
    for vacuous-but-honest proof-mode checks.
    """
    if not 0.0 < delta < 0.5:
        raise InvalidInputError(f"delta must lie in (0, 1/2), got {delta}")
    if p < 1:
        raise InvalidInputError(f"p must be at least 1, got {p}")
    x0 = math.log(10.0 / delta)
    g = tail_factor(x0)
    log_p = math.log(p / delta)
    log_2p = math.log(2.0 * p / delta)
    d = 4.0 * g + 192.0 * log_2p
    group_one = 8.0 * g + 184.0 * log_2p
    group_two = 2.0 * (128.0 * g * g + 2.0 * 224.0**2) * log_2p**2 / d + 8.0 * group_one
    group_three = (
        33.0 * g * g / d
        + 2.0 * 36.0**2 * log_2p**2 / d
        + 20.0 * g
        + 144.0 * log_2p
    )
    f2 = RATIO_BOUND_SPARSE * RATIO_BOUND_SPARSE
    return (4.0 * f2 * group_one + 8.0 * f2 * group_two + 8.0 * group_three) / log_p


@dataclass(frozen=True)
class BoundReport:
    """One evaluated right-hand side: ``rhs = bias + variance`` as assembled."""

    bias: float
    variance: float
    rhs: float
    theorem: str
    mode: str
    constant: float
    degenerate: bool
    mu_variant: str | None = None
    event_flags: Mapping[str, bool] | None = None


def _resolve_constant(mode: str, c: float | None, proof_value: float, residual: float) -> float:
    if residual <= 0.0:
        raise InvalidInputError(f"residual multiplier must be positive, got {residual}")
    if mode == "proof":
        return proof_value * residual
    if mode == "calibrated":
        if c is None or not c > 0.0:
            raise InvalidInputError("calibrated mode needs a positive constant c")
        return c
    raise InvalidInputError(f"unknown constant mode {mode!r}, expected 'proof' or 'calibrated'")


def bound_thresholded(
    ctx: PopulationContext,
    x,
    delta: float,
    mode: str = "proof",
    c: float | None = None,
    r: float = 0.5,
    residual: float = 1.0,
) -> BoundReport:
    """Right-hand side for the thresholded one-component estimator (tag T31)."""
    if not 0.0 < delta < 1.0:
        raise InvalidInputError(f"delta must lie in (0, 1), got {delta}")
    constant = _resolve_constant(mode, c, dense_proof_constant(delta, r), residual)
    bias = bias_term(ctx, x)
    if ctx.lam <= 0.0:
        return BoundReport(bias, math.inf, math.inf, "T31", mode, constant, True)
    noise = ctx.tau * ctx.tau / ctx.n
    tr = float(np.trace(ctx.sig))
    rho = spectral_radius(ctx.sig)
    shape = max(tr / ctx.lam, rho * tr / (ctx.lam * ctx.lam))
    variance = constant * noise * shape
    return BoundReport(bias, variance, bias + variance, "T31", mode, constant, False)


def _sparse_variance(ctx: PopulationContext, delta: float, constant: float, shape: float) -> float:
    log_p = math.log(ctx.sig.shape[0] / delta)
    return constant * (ctx.tau * ctx.tau * ctx.s / ctx.n) * shape * log_p


def bound_sparse(
    ctx: PopulationContext,
    x,
    delta: float,
    mode: str = "proof",
    c: float | None = None,
    residual: float = 1.0,
) -> BoundReport:
    """Right-hand side for the soft-threshold estimator (tag T41).

    Valid under the signal-strength condition, which is the caller's to check
    (see :func:`signal_condition_holds`); the report only reflects the
    arithmetic.
    """
    if not 0.0 < delta < 0.5:
        raise InvalidInputError(f"delta must lie in (0, 1/2), got {delta}")
    p = ctx.sig.shape[0]
    constant = _resolve_constant(mode, c, sparse_proof_constant(delta, p), residual)
    bias = bias_term(ctx, x)
    if ctx.s == 0 or ctx.lam <= 0.0:
        return BoundReport(bias, math.inf, math.inf, "T41", mode, constant, True, "spls")
    rho0 = spectral_radius(restricted_gram(ctx))
    shape = max(rho0 / (ctx.lam * ctx.lam), 1.0 / ctx.lam)
    variance = _sparse_variance(ctx, delta, constant, shape)
    return BoundReport(bias, variance, bias + variance, "T41", mode, constant, False, "spls")


def bound_sparse_re(
    ctx: PopulationContext,
    x,
    delta: float,
    phi: float,
    mode: str = "proof",
    c: float | None = None,
    residual: float = 1.0,
) -> BoundReport:
    """T41 shape with the restricted-eigenvalue surrogate phi (tag C41)."""
    return _re_shape_bound(ctx, x, delta, phi, mode, c, residual, "C41", "spls")


def bound_alt(
    ctx: PopulationContext,
    x,
    delta: float,
    phi: float,
    mode: str = "proof",
    c: float | None = None,
    residual: float = 1.0,
) -> BoundReport:
    """Alternative soft-threshold estimator bound (tag T42, 'alt' mu-variant)."""
    return _re_shape_bound(ctx, x, delta, phi, mode, c, residual, "T42", "alt")


def _re_shape_bound(ctx, x, delta, phi, mode, c, residual, tag, mu_variant) -> BoundReport:
    if not 0.0 < delta < 0.5:
        raise InvalidInputError(f"delta must lie in (0, 1/2), got {delta}")
    if not phi > 0.0:
        raise InvalidInputError(f"phi must be positive, got {phi}")
    p = ctx.sig.shape[0]
    constant = _resolve_constant(mode, c, sparse_proof_constant(delta, p), residual)
    bias = bias_term(ctx, x)
    if ctx.s == 0:
        return BoundReport(bias, math.inf, math.inf, tag, mode, constant, True, mu_variant)
    rho0 = spectral_radius(restricted_gram(ctx))
    shape = max(phi * phi * rho0, phi)
    variance = _sparse_variance(ctx, delta, constant, shape)
    return BoundReport(bias, variance, bias + variance, tag, mode, constant, False, mu_variant)


def bound_for(
    tag: str,
    ctx: PopulationContext,
    x,
    delta: float,
    mode: str = "proof",
    c: float | None = None,
    r: float = 0.5,
    phi: float | None = None,
    residual: float = 1.0,
) -> BoundReport:
    """Dispatch on a bound tag; C41/T42 derive phi from the support when omitted."""
    if tag == "T31":
        return bound_thresholded(ctx, x, delta, mode, c, r, residual)
    if tag == "T41":
        return bound_sparse(ctx, x, delta, mode, c, residual)
    if tag in ("C41", "T42"):
        if phi is None:
            phi = restricted_eig_surrogate(ctx)
        if tag == "C41":
            return bound_sparse_re(ctx, x, delta, phi, mode, c, residual)
        return bound_alt(ctx, x, delta, phi, mode, c, residual)
    raise InvalidInputError(f"unknown bound tag {tag!r}, expected one of {BOUND_TAGS}")


def signal_condition_holds(ctx: PopulationContext, delta: float, mode: str = "theorem") -> bool:
    """Direct check of the sparse signal-strength condition on the population.

    True when ``sigma' S sigma > d * (tau^2/n) rho(S_J0) tr(S_J0)`` with the
    factor d from :func:`plslab.sparse.signal_factor` in the given mode.
    """
    from .sparse import signal_factor

    if ctx.s == 0:
        return False
    sub = restricted_gram(ctx)
    d = signal_factor(delta, ctx.sig.shape[0], mode)
    level = d * (ctx.tau * ctx.tau / ctx.n) * spectral_radius(sub) * float(np.trace(sub))
    return float(ctx.sigma @ (ctx.sig @ ctx.sigma)) > level


def restricted_eig_surrogate(ctx: PopulationContext) -> float:
    """Reciprocal of the smallest support-restricted Gram eigenvalue.

    Stands in for the cone-restricted constant: the population intensity is
    at least the smallest restricted eigenvalue, so ``lam >= 1/phi`` holds by
    construction.  Degenerate (singular restricted Gram or empty support)
    raises, since no finite surrogate exists.
    """
    if ctx.s == 0:
        raise InvalidInputError("sigma has empty support, no restricted-eigenvalue surrogate")
    smallest = min_eig_on_support(ctx.sig, ctx.support)
    if smallest <= 0.0:
        raise InvalidInputError("restricted Gram is singular, no restricted-eigenvalue surrogate")
    return 1.0 / smallest


@dataclass(frozen=True)
class LambdaQuantities:
    """The four intensity ratios with +inf sentinels on zero denominators."""

    lam: float
    lambda_hat_inv: float
    lambda_tilde_inv: float
    lambda_tilde_star_inv: float
    flags: Mapping[str, bool] = field(default_factory=dict)


def lambda_quantities(sigma_hat, sigma_tilde, sig, ctx: PopulationContext) -> LambdaQuantities:
    """Population and empirical intensity ratios for one replicate.

    ``lam`` is ``sigma'S sigma / sigma'sigma``; the three inverses divide by
    the Gram quadratic form of the hatted or shrunk vector.  Zero denominators
    yield +inf and set the matching flag.
    """
    sigma_hat = as_vector(sigma_hat, "sigma_hat")
    sigma_tilde = as_vector(sigma_tilde, "sigma_tilde")
    sig = as_sym_matrix(sig, "gram matrix")

    flags: dict[str, bool] = {}

    def ratio(num: float, den: float, name: str) -> float:
        if den == 0.0:
            flags[name] = True
            return math.inf
        flags[name] = False
        return num / den

    pop_sq = float(ctx.sigma @ ctx.sigma)
    lam = ratio(float(ctx.sigma @ (ctx.sig @ ctx.sigma)), pop_sq, "lam")
    hat_quad = float(sigma_hat @ (sig @ sigma_hat))
    lam_hat_inv = ratio(float(sigma_hat @ sigma_hat), hat_quad, "lambda_hat_inv")
    tilde_quad = float(sigma_tilde @ (sig @ sigma_tilde))
    lam_tilde_inv = ratio(float(sigma_tilde @ sigma_hat), tilde_quad, "lambda_tilde_inv")
    lam_tilde_star_inv = ratio(float(sigma_tilde @ sigma_tilde), tilde_quad, "lambda_tilde_star_inv")
    return LambdaQuantities(
        lam=lam,
        lambda_hat_inv=lam_hat_inv,
        lambda_tilde_inv=lam_tilde_inv,
        lambda_tilde_star_inv=lam_tilde_star_inv,
        flags=flags,
    )


EVENT_NAMES = ("A1", "A2", "A3", "M", "B1", "B2", "B3")


@dataclass(frozen=True)
class EventThresholds:
    """Precomputed deviation thresholds shared by every replicate of a run."""

    dense: tuple[float, float, float]
    sparse: tuple[float, float, float]
    dense_level: float
    sparse_level: float
    mu: float
    pop_sq: float
    pop_quad: float


def event_thresholds(ctx: PopulationContext, delta: float, mu: float) -> EventThresholds:
    """Thresholds for the seven audit events at confidence level delta.

    The dense events use exponent ``ln(5/delta)``, the support-restricted ones
    ``ln(10/delta)``; ``mu`` is the coordinatewise threshold whose halved value
    drives the support-localization event M.
    """
    if not 0.0 < delta < 1.0:
        raise InvalidInputError(f"delta must lie in (0, 1), got {delta}")
    if mu < 0.0:
        raise InvalidInputError(f"mu must be nonnegative, got {mu}")
    dense_level = math.log(5.0 / delta)
    sparse_level = math.log(10.0 / delta)
    return EventThresholds(
        dense=deviation_terms(dense_level, ctx),
        sparse=sparse_deviation_terms(sparse_level, ctx),
        dense_level=dense_level,
        sparse_level=sparse_level,
        mu=mu,
        pop_sq=float(ctx.sigma @ ctx.sigma),
        pop_quad=float(ctx.sigma @ (ctx.sig @ ctx.sigma)),
    )


def replicate_event_flags(sigma_hat: np.ndarray, ctx: PopulationContext, thr: EventThresholds) -> dict[str, bool]:
    """Evaluate the seven audit events for one draw of the covariance vector."""
    t1, t2, t3 = thr.dense
    hat_sq = float(sigma_hat @ sigma_hat)
    hat_quad = float(sigma_hat @ (ctx.sig @ sigma_hat))
    err = sigma_hat - ctx.sigma
    err_quad = float(err @ (ctx.sig @ err))
    flags = {
        "A1": abs(hat_sq - thr.pop_sq) <= t1,
        "A2": abs(hat_quad - thr.pop_quad) <= t2,
        "A3": err_quad <= t3,
        "M": float(np.abs(err).max()) <= thr.mu / 2.0 if err.size else True,
    }
    t01, t02, t03 = thr.sparse
    if ctx.s == 0:
        flags.update({"B1": True, "B2": True, "B3": True})
    else:
        idx = np.asarray(ctx.support, dtype=int)
        hat_restricted = sigma_hat[idx]
        pop_restricted = ctx.sigma[idx]
        sub = ctx.sig[np.ix_(idx, idx)]
        diff = hat_restricted - pop_restricted
        flags["B1"] = abs(float(hat_restricted @ hat_restricted) - thr.pop_sq) <= t01
        flags["B2"] = float(diff @ diff) <= t02
        flags["B3"] = float(diff @ (sub @ diff)) <= t03
    return flags
