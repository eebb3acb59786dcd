"""Monte Carlo harness: exact-Gram designs, replicate streams, coverage audits.

Designs are built as ``X = sqrt(n) Q root(S)`` where Q has exactly orthonormal
columns (a seeded signed selection of distinct coordinate rows), so the sample
Gram reproduces the target to round-off and, for diagonal targets with square
``n``, exactly.  Replicates draw from counter-split child streams of the
master seed and are folded in index order, which makes every summary
bit-identical regardless of how many worker threads run the bodies.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from . import bounds
from .errors import InvalidInputError
from .linalg import as_sym_matrix, as_vector, gram, psd_tolerance
from .pls import fit_pls
from .single import single_component_estimator, thresholded_estimator
from .sparse import alt_estimator, mu_level, spls_estimator

DESIGN_KINDS = ("identity", "rank_one", "ar1", "diagonal", "custom")
ESTIMATORS = ("pls_k", "single", "thresholded", "spls", "alt")
BETA_KINDS = ("explicit", "zero", "in_span_sigma", "sparse")
THEOREM_TAGS = ("none",) + bounds.BOUND_TAGS
DEFAULT_THEOREM = {
    "pls_k": "none",
    "single": "T31",
    "thresholded": "T31",
    "spls": "T41",
    "alt": "T42",
}
THREADS_ENV_VAR = "PLSLAB_THREADS"


@dataclass(frozen=True)
class DesignSpec:
    """Prescription for a fixed design with target Gram matrix.

    ``rho`` is the ar1 correlation, ``eigenvalue`` the single nonzero
    eigenvalue of the rank_one kind, ``values`` the diagonal entries, and
    ``matrix`` the full custom target.  ``normalize_columns`` rescales the
    target to unit diagonal before factorization.
    """

    kind: str
    n: int
    p: int
    rho: float | None = None
    eigenvalue: float | None = None
    values: tuple[float, ...] | None = None
    matrix: np.ndarray | None = None
    normalize_columns: bool = False


@dataclass(frozen=True)
class BetaSpec:
    """Coefficient vector, given explicitly or by generator kind.

    ``zero`` is the null vector; ``in_span_sigma`` takes ``magnitude`` times
    the leading Gram eigenvector (so the population covariance is parallel to
    beta and the bias term vanishes); ``sparse`` places ``magnitude`` on ``s``
    support points drawn without replacement from the beta seed stream.
    """

    kind: str
    vector: tuple[float, ...] | None = None
    magnitude: float = 1.0
    s: int | None = None


@dataclass(frozen=True)
class SimConfig:
    """Complete description of one simulation run.

    ``theorem`` of None resolves to the estimator's default tag; ``mu``
    overrides the level of the sparse estimators (and of the support event).
    ``constant_mode`` is 'proof' (with optional ``residual`` multiplier) or
    'calibrated' (requires ``constant_c``).
    """

    design: DesignSpec
    beta: BetaSpec
    tau: float
    delta: float
    estimator: str
    replicates: int
    seed: int
    k: int = 1
    r: float = 0.5
    mu: float | None = None
    theorem: str | None = None
    constant_mode: str = "proof"
    constant_c: float | None = None
    residual: float = 1.0
    phi: float | None = None


@dataclass(frozen=True)
class ReplicateRecord:
    rep: int
    loss: float
    rhs: float
    covered: bool
    flags: Mapping[str, bool]
    error: str | None = None


@dataclass(frozen=True)
class SimSummary:
    """Aggregate of one run; ``records`` keep the per-replicate audit trail.

    ``coverage`` is exactly ``covered_count / replicates``; losses of failed
    replicates are NaN and excluded from the mean/median.  ``rhs``, ``bias``
    and ``variance`` describe the (replicate-independent) bound;
    ``signal_condition`` reports the population signal-strength check for the
    sparse tags and is None otherwise.
    """

    records: tuple[ReplicateRecord, ...]
    coverage: float
    covered_count: int
    replicates: int
    mean_loss: float
    median_loss: float
    deviation_event_rates: Mapping[str, float]
    rhs: float
    bias: float
    variance: float
    theorem: str
    constant_mode: str
    constant: float
    signal_condition: bool | None
    error_count: int


@dataclass(frozen=True)
class Scenario:
    """Frozen per-run data shared (read-only) by all replicates."""

    x: np.ndarray
    sig: np.ndarray
    beta: np.ndarray
    ctx: bounds.PopulationContext


@dataclass(frozen=True)
class CalibrationResult:
    """Smallest bound multiplier reaching nominal coverage, if one exists."""

    constant: float
    coverage: float
    succeeded: bool


def _target_gram(spec: DesignSpec, rng: np.random.Generator) -> np.ndarray:
    p = spec.p
    if spec.kind == "identity":
        target = np.eye(p)
    elif spec.kind == "ar1":
        if spec.rho is None or not 0.0 < spec.rho < 1.0:
            raise InvalidInputError(f"ar1 needs rho in (0, 1), got {spec.rho}")
        idx = np.arange(p)
        target = spec.rho ** np.abs(idx[:, None] - idx[None, :])
    elif spec.kind == "diagonal":
        if spec.values is None or len(spec.values) != p:
            raise InvalidInputError("diagonal needs exactly p values")
        vals = np.asarray(spec.values, dtype=float)
        if not np.all(np.isfinite(vals)) or np.any(vals < 0.0):
            raise InvalidInputError("diagonal values must be finite and nonnegative")
        target = np.diag(vals)
    elif spec.kind == "rank_one":
        if spec.eigenvalue is None or not spec.eigenvalue > 0.0:
            raise InvalidInputError(f"rank_one needs a positive eigenvalue, got {spec.eigenvalue}")
        u = rng.standard_normal(p)
        u /= float(np.linalg.norm(u))
        target = spec.eigenvalue * np.outer(u, u)
        target = (target + target.T) / 2.0
    elif spec.kind == "custom":
        if spec.matrix is None:
            raise InvalidInputError("custom design needs a target matrix")
        target = as_sym_matrix(spec.matrix, "target gram")
        if target.shape[0] != p:
            raise InvalidInputError(f"target gram is {target.shape[0]}x{target.shape[0]}, expected p={p}")
    else:
        raise InvalidInputError(f"unknown design kind {spec.kind!r}, expected one of {DESIGN_KINDS}")

    if spec.normalize_columns:
        diag = np.diag(target).copy()
        if np.any(diag <= 0.0):
            raise InvalidInputError("cannot normalize columns: target has a nonpositive diagonal entry")
        target = target / np.sqrt(np.outer(diag, diag))
        target = (target + target.T) / 2.0
    return target


def _orthonormal_columns(n: int, r: int, rng: np.random.Generator) -> np.ndarray:
    """Exactly orthonormal n x r matrix: signed distinct coordinate columns."""
    q = np.zeros((n, r))
    rows = rng.permutation(n)[:r]
    signs = rng.integers(0, 2, size=r) * 2 - 1
    q[rows, np.arange(r)] = signs
    return q


def build_design(spec: DesignSpec, seed=0) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix with sample Gram equal to the target within 1e-10.

    Factorizes the target as ``root root'`` on its numerical rank ``r`` and
    returns ``sqrt(n) Q root'`` with Q exactly orthonormal, so the Gram is
    reproduced to round-off (exactly, for diagonal targets when n is a perfect
    square).  Full-rank targets therefore require ``n >= p``; rank-deficient
    ones (rank_one, suitable custom/diagonal) only need ``n >= r``.
    """
    if spec.kind not in DESIGN_KINDS:
        raise InvalidInputError(f"unknown design kind {spec.kind!r}, expected one of {DESIGN_KINDS}")
    if spec.n < 1 or spec.p < 1:
        raise InvalidInputError(f"need n >= 1 and p >= 1, got n={spec.n}, p={spec.p}")
    rng = np.random.default_rng(seed)
    target = _target_gram(spec, rng)

    w, v = np.linalg.eigh(target)
    if float(w[0]) < -psd_tolerance(target):
        raise InvalidInputError("target gram is not positive semidefinite")
    rank_tol = 1e-10 * max(float(w[-1]), 0.0)
    keep = w > rank_tol
    r = int(np.count_nonzero(keep))
    if r > spec.n:
        raise InvalidInputError(
            f"exact Gram construction X = sqrt(n) Q root(S) needs n >= rank(S); "
            f"got n={spec.n} < rank={r} (kind {spec.kind!r})"
        )
    root = v[:, keep] * np.sqrt(w[keep])
    q = _orthonormal_columns(spec.n, r, rng)
    x = math.sqrt(spec.n) * (q @ root.T)
    return x, target


def sample_response(x, beta, tau: float, rng: np.random.Generator) -> np.ndarray:
    """One draw of ``X beta + tau z`` with z standard normal from ``rng``.

    The noise vector is drawn even when tau is zero so a replicate consumes
    the same amount of stream state regardless of the noise level.
    """
    x = np.asarray(x, dtype=float)
    beta = as_vector(beta, "beta")
    if tau < 0.0:
        raise InvalidInputError(f"tau must be nonnegative, got {tau}")
    if x.ndim != 2 or x.shape[1] != beta.shape[0]:
        raise InvalidInputError(f"X shape {x.shape} incompatible with beta length {beta.shape[0]}")
    z = rng.standard_normal(x.shape[0])
    return x @ beta + tau * z


def resolve_beta(spec: BetaSpec, target: np.ndarray, seed) -> np.ndarray:
    """Materialize a BetaSpec against a target Gram (see :class:`BetaSpec`)."""
    p = target.shape[0]
    if spec.kind == "explicit":
        if spec.vector is None:
            raise InvalidInputError("explicit beta needs a vector")
        beta = as_vector(np.asarray(spec.vector, dtype=float), "beta")
        if beta.shape[0] != p:
            raise InvalidInputError(f"beta has length {beta.shape[0]}, expected p={p}")
        return beta
    if spec.kind == "zero":
        return np.zeros(p)
    if spec.kind == "in_span_sigma":
        _, v = np.linalg.eigh(target)
        lead = v[:, -1]
        nonzero = np.nonzero(lead)[0]
        if nonzero.size and lead[nonzero[0]] < 0.0:
            lead = -lead
        return spec.magnitude * lead
    if spec.kind == "sparse":
        if spec.s is None or not 1 <= spec.s <= p:
            raise InvalidInputError(f"sparse beta needs 1 <= s <= p={p}, got {spec.s}")
        rng = np.random.default_rng(seed)
        support = rng.choice(p, size=spec.s, replace=False)
        beta = np.zeros(p)
        beta[support] = spec.magnitude
        return beta
    raise InvalidInputError(f"unknown beta kind {spec.kind!r}, expected one of {BETA_KINDS}")


def resolved_theorem(cfg: SimConfig) -> str:
    tag = cfg.theorem if cfg.theorem is not None else DEFAULT_THEOREM[cfg.estimator]
    if tag not in THEOREM_TAGS:
        raise InvalidInputError(f"unknown theorem tag {tag!r}, expected one of {THEOREM_TAGS}")
    return tag


def validate_config(cfg: SimConfig) -> None:
    """Reject configurations any module operation would reject later."""
    if cfg.estimator not in ESTIMATORS:
        raise InvalidInputError(f"unknown estimator {cfg.estimator!r}, expected one of {ESTIMATORS}")
    if cfg.replicates < 1:
        raise InvalidInputError(f"replicates must be at least 1, got {cfg.replicates}")
    if not 0.0 < cfg.delta < 1.0:
        raise InvalidInputError(f"delta must lie in (0, 1), got {cfg.delta}")
    if cfg.estimator in ("spls", "alt") and not cfg.delta < 0.5:
        raise InvalidInputError(f"sparse estimators need delta in (0, 1/2), got {cfg.delta}")
    if cfg.tau < 0.0:
        raise InvalidInputError(f"tau must be nonnegative, got {cfg.tau}")
    if cfg.estimator in ("thresholded", "spls", "alt") and cfg.tau == 0.0:
        raise InvalidInputError(f"estimator {cfg.estimator!r} needs tau > 0")
    if cfg.estimator == "pls_k" and cfg.k < 1:
        raise InvalidInputError(f"pls_k needs K >= 1, got {cfg.k}")
    if cfg.mu is not None and cfg.mu <= 0.0:
        raise InvalidInputError(f"mu override must be positive, got {cfg.mu}")
    if not 0.0 < cfg.r < 1.0:
        raise InvalidInputError(f"r must lie in (0, 1), got {cfg.r}")
    if cfg.phi is not None and cfg.phi <= 0.0:
        raise InvalidInputError(f"phi must be positive, got {cfg.phi}")
    if cfg.constant_mode not in ("proof", "calibrated"):
        raise InvalidInputError(f"unknown constant mode {cfg.constant_mode!r}")
    if cfg.constant_mode == "calibrated" and (cfg.constant_c is None or cfg.constant_c <= 0.0):
        raise InvalidInputError("calibrated mode needs a positive constant_c")
    if cfg.residual <= 0.0:
        raise InvalidInputError(f"residual multiplier must be positive, got {cfg.residual}")
    tag = resolved_theorem(cfg)
    if cfg.estimator == "pls_k" and tag != "none":
        raise InvalidInputError("no finite-sample bound covers pls_k fits; use theorem = none")
    if tag in ("T41", "C41", "T42") and not cfg.delta < 0.5:
        raise InvalidInputError(f"tag {tag} needs delta in (0, 1/2), got {cfg.delta}")


def build_scenario(cfg: SimConfig) -> Scenario:
    """Design, coefficient vector and population context for a config."""
    design_seed, beta_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    x, target = build_design(cfg.design, design_seed)
    beta = resolve_beta(cfg.beta, target, beta_seed)
    ctx = bounds.population_context(beta, target, cfg.tau, cfg.design.n)
    return Scenario(x=x, sig=target, beta=beta, ctx=ctx)


def _resolve_threads() -> int:
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None:
        return os.cpu_count() or 1
    try:
        threads = int(raw)
    except ValueError:
        raise InvalidInputError(f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}") from None
    if threads < 1:
        raise InvalidInputError(f"{THREADS_ENV_VAR} must be a positive integer, got {threads}")
    return threads


def _event_mu(cfg: SimConfig, p: int) -> float:
    if cfg.mu is not None:
        return cfg.mu
    if cfg.tau == 0.0:
        return 0.0
    variant = "alt" if cfg.estimator == "alt" else "spls"
    return mu_level(cfg.tau, cfg.design.n, p, cfg.delta, variant)


def _estimate(cfg: SimConfig, scenario: Scenario, y: np.ndarray, sig_emp: np.ndarray) -> np.ndarray:
    x = scenario.x
    if cfg.estimator == "single":
        sigma_hat = x.T @ y / cfg.design.n
        return single_component_estimator(sigma_hat, sig_emp)
    if cfg.estimator == "pls_k":
        return fit_pls(x, y, cfg.k).beta
    if cfg.estimator == "thresholded":
        return thresholded_estimator(x, y, cfg.tau, cfg.delta, cfg.r)[0]
    if cfg.estimator == "spls":
        return spls_estimator(x, y, cfg.tau, cfg.delta, cfg.mu).beta
    return alt_estimator(x, y, cfg.tau, cfg.delta, cfg.mu).beta


def run_replicates(cfg: SimConfig) -> SimSummary:
    """Sample, fit and audit ``cfg.replicates`` independent response draws.

    Each replicate records the in-sample loss ``||X(beta_hat - beta)||^2 / n``,
    whether it is covered by the configured bound (vacuously true for tag
    'none', where the rhs is NaN), and the seven deviation-event flags.
    Estimator exceptions are recorded per replicate (NaN loss, not covered)
    without aborting the batch.
    """
    validate_config(cfg)
    scenario = build_scenario(cfg)
    ctx = scenario.ctx
    n = cfg.design.n
    tag = resolved_theorem(cfg)

    if tag == "none":
        report = None
        rhs = bias = variance = math.nan
        constant = math.nan
        signal = None
    else:
        report = bounds.bound_for(
            tag,
            ctx,
            scenario.x,
            cfg.delta,
            mode=cfg.constant_mode,
            c=cfg.constant_c,
            r=cfg.r,
            phi=cfg.phi,
            residual=cfg.residual,
        )
        rhs, bias, variance = report.rhs, report.bias, report.variance
        constant = report.constant
        signal = (
            bounds.signal_condition_holds(ctx, cfg.delta)
            if tag in ("T41", "C41", "T42")
            else None
        )

    thresholds = bounds.event_thresholds(ctx, cfg.delta, _event_mu(cfg, cfg.design.p))
    sig_emp = gram(scenario.x)
    child_seeds = np.random.SeedSequence(cfg.seed).spawn(2 + cfg.replicates)[2:]

    def body(i: int) -> ReplicateRecord:
        rng = np.random.default_rng(child_seeds[i])
        y = sample_response(scenario.x, scenario.beta, cfg.tau, rng)
        sigma_hat = scenario.x.T @ y / n
        flags = bounds.replicate_event_flags(sigma_hat, ctx, thresholds)
        error = None
        try:
            beta_hat = _estimate(cfg, scenario, y, sig_emp)
            resid = scenario.x @ (beta_hat - scenario.beta)
            loss = float(resid @ resid) / n
        except Exception as exc:  # recorded, never fatal for the batch
            error = f"{type(exc).__name__}: {exc}"
            loss = math.nan
        if error is not None:
            covered = False
        elif math.isnan(rhs):
            covered = True
        else:
            covered = loss <= rhs
        return ReplicateRecord(rep=i, loss=loss, rhs=rhs, covered=covered, flags=flags, error=error)

    threads = _resolve_threads()
    if threads > 1 and cfg.replicates > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = tuple(pool.map(body, range(cfg.replicates)))
    else:
        records = tuple(body(i) for i in range(cfg.replicates))

    losses = np.array([rec.loss for rec in records])
    finite = losses[~np.isnan(losses)]
    covered_count = sum(1 for rec in records if rec.covered)
    rates = {
        name: sum(1 for rec in records if rec.flags[name]) / cfg.replicates
        for name in bounds.EVENT_NAMES
    }
    return SimSummary(
        records=records,
        coverage=covered_count / cfg.replicates,
        covered_count=covered_count,
        replicates=cfg.replicates,
        mean_loss=float(np.mean(finite)) if finite.size else math.nan,
        median_loss=float(np.median(finite)) if finite.size else math.nan,
        deviation_event_rates=rates,
        rhs=rhs,
        bias=bias,
        variance=variance,
        theorem=tag,
        constant_mode=cfg.constant_mode if tag != "none" else "none",
        constant=constant,
        signal_condition=signal,
        error_count=sum(1 for rec in records if rec.error is not None),
    )


def empirical_sigma_moments(cfg: SimConfig, draws: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and covariance of the empirical covariance vector.

    Uses the same design/beta streams as :func:`run_replicates` and a
    dedicated child stream for the draws; two passes over regenerated noise
    keep memory flat (the covariance is the centered ddof=1 estimate).
    """
    if draws < 100:
        raise InvalidInputError(f"need at least 100 draws, got {draws}")
    validate_config(replace(cfg, replicates=max(cfg.replicates, 1)))
    scenario = build_scenario(cfg)
    x = scenario.x
    n = cfg.design.n
    p = cfg.design.p
    base = x.T @ (x @ scenario.beta) / n
    moment_seed = np.random.SeedSequence(cfg.seed).spawn(3)[2]
    chunk = 20_000

    def draw_chunks():
        rng = np.random.default_rng(moment_seed)
        remaining = draws
        while remaining > 0:
            m = min(chunk, remaining)
            z = rng.standard_normal((n, m))
            yield base[:, None] + cfg.tau * (x.T @ z) / n
            remaining -= m

    total = np.zeros(p)
    for block in draw_chunks():
        total += block.sum(axis=1)
    mean = total / draws

    accum = np.zeros((p, p))
    for block in draw_chunks():
        dev = block - mean[:, None]
        accum += dev @ dev.T
    cov = accum / (draws - 1)
    return mean, (cov + cov.T) / 2.0


def calibrate_constant(cfg: SimConfig, theorem: str | None = None) -> CalibrationResult:
    """Smallest multiplier c making calibrated coverage reach 1 - delta.

    Runs the replicate set once at c = 1 to record losses and the unit
    variance term, then bisects c over [1e-3, 1e6] (40 iterations) against
    the monotone empirical coverage.  A degenerate bound (infinite rhs)
    is covered by any c, so the lower bracket comes back; failure to reach
    nominal coverage even at the upper bracket is flagged, not raised.
    """
    if cfg.replicates < 500:
        raise InvalidInputError(f"calibration needs at least 500 replicates, got {cfg.replicates}")
    tag = theorem if theorem is not None else resolved_theorem(cfg)
    if tag == "none":
        raise InvalidInputError("cannot calibrate without a bound tag")
    base = replace(cfg, theorem=tag, constant_mode="calibrated", constant_c=1.0)
    summary = run_replicates(base)
    losses = np.array([rec.loss for rec in summary.records])
    losses = np.where(np.isnan(losses), math.inf, losses)  # failed replicates never covered
    target = 1.0 - cfg.delta

    if not math.isfinite(summary.variance) or not math.isfinite(summary.bias):
        return CalibrationResult(constant=1e-3, coverage=1.0, succeeded=True)

    def coverage(c: float) -> float:
        return float(np.mean(losses <= summary.bias + c * summary.variance))

    lo, hi = 1e-3, 1e6
    if coverage(lo) >= target:
        return CalibrationResult(constant=lo, coverage=coverage(lo), succeeded=True)
    if coverage(hi) < target:
        return CalibrationResult(constant=hi, coverage=coverage(hi), succeeded=False)
    for _ in range(40):
        mid = (lo + hi) / 2.0
        if coverage(mid) >= target:
            hi = mid
        else:
            lo = mid
    return CalibrationResult(constant=hi, coverage=coverage(hi), succeeded=True)
