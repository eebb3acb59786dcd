"""Iterative component regression with deflation, plus a Krylov cross-check.

``fit_pls`` follows the classic single-response recipe.  At each step the
weight is the current (deflated) covariance direction, the component is its
image under the deflated design, and the design is deflated by the projection
onto that component.  The coefficient vector then solves the least-squares
problem restricted to the span of the fitted weights, which coincides with
the Krylov space spanned by the covariance vector under repeated application
of the Gram matrix; ``krylov_basis`` builds an orthonormal basis of that space
so the equivalence can be checked directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .linalg import as_matrix, as_sym_matrix, as_vector, gram

# Relative floor under which a deflated covariance counts as exhausted.
STOP_TOL_REL = 1e-12
# Weight-space normal blocks with a smaller relative eigenvalue are dropped.
BLOCK_EIG_REL = 1e-12
# Numerical-rank floor for the Krylov block, relative to its largest column.
RANK_TOL_REL = 1e-10


@dataclass(frozen=True)
class PlsFit:
    """Result of the deflation algorithm.

    Attributes
    ----------
    weights : ndarray, shape (p, k_effective)
        Unit-norm weight vectors, one column per fitted component.
    components : ndarray, shape (n, k_effective)
        Score vectors; pairwise orthogonal by construction.
    beta : ndarray, shape (p,)
        Coefficients of the least-squares fit restricted to the weight span.
    k_requested, k_effective : int
        Components asked for and actually fitted.
    early_stopped : bool
        The deflated covariance vanished before reaching ``k_requested``.
    degenerate : bool
        No usable component at all; ``beta`` is the zero vector.
    truncated : bool
        Trailing components were excluded from the coefficient solve because
        the weight-space normal matrix was numerically singular.
    """

    weights: np.ndarray
    components: np.ndarray
    beta: np.ndarray
    k_requested: int
    k_effective: int
    early_stopped: bool
    degenerate: bool
    truncated: bool


@dataclass(frozen=True)
class KrylovBasis:
    """Orthonormal basis of span{s, A s, ..., A^(K-1) s}, cut at numerical rank."""

    basis: np.ndarray
    k_requested: int

    @property
    def k_effective(self) -> int:
        return int(self.basis.shape[1])


def fit_pls(x, y, k: int) -> PlsFit:
    """Fit up to ``k`` components by covariance-direction deflation.

    Stops early (with a flag) once the deflated covariance norm falls under
    ``STOP_TOL_REL * ||X'Y|| / n``; a stop before the first component yields
    the zero coefficient vector with the degenerate flag set.
    """
    x = as_matrix(x, "X")
    y = as_vector(y, "Y")
    n, p = x.shape
    if y.shape[0] != n:
        raise InvalidInputError(f"X has {n} rows but Y has {y.shape[0]} entries")
    if not 1 <= k <= p:
        raise InvalidInputError(f"component count must satisfy 1 <= K <= p={p}, got {k}")
    if not x.any():
        raise InvalidInputError("design matrix is identically zero")

    xty = x.T @ y
    stop_tol = STOP_TOL_REL * float(np.linalg.norm(xty)) / n
    sigma_hat = xty / n
    sig = gram(x)

    xk = x
    weights: list[np.ndarray] = []
    comps: list[np.ndarray] = []
    early_stopped = False
    for step in range(k):
        cov = xk.T @ y
        cov_norm = float(np.linalg.norm(cov))
        if cov_norm <= stop_tol:
            early_stopped = True
            break
        w = cov / cov_norm
        t = xk @ w
        tt = float(t @ t)
        if tt == 0.0:
            early_stopped = True
            break
        weights.append(w)
        comps.append(t)
        if step + 1 < k:
            xk = xk - np.outer(t, (t @ xk) / tt)

    k_eff = len(weights)
    if k_eff == 0:
        return PlsFit(
            weights=np.zeros((p, 0)),
            components=np.zeros((n, 0)),
            beta=np.zeros(p),
            k_requested=k,
            k_effective=0,
            early_stopped=True,
            degenerate=True,
            truncated=False,
        )

    w_mat = np.column_stack(weights)
    t_mat = np.column_stack(comps)
    beta, truncated = _span_restricted_beta(w_mat, sig, sigma_hat)
    return PlsFit(
        weights=w_mat,
        components=t_mat,
        beta=beta,
        k_requested=k,
        k_effective=k_eff,
        early_stopped=early_stopped,
        degenerate=False,
        truncated=truncated,
    )


def _span_restricted_beta(w_mat: np.ndarray, sig: np.ndarray, sigma_hat: np.ndarray):
    """Solve the weight-space normal equations, dropping degenerate trailing blocks.

    Returns ``W (W' S W)^{-1} W' sigma_hat`` computed on the largest leading
    block of components whose normal matrix is numerically nonsingular.
    """
    m = w_mat.T @ sig @ w_mat
    m = (m + m.T) / 2.0
    kk = m.shape[0]
    while kk > 0:
        block = m[:kk, :kk]
        floor = BLOCK_EIG_REL * max(float(np.trace(block)), np.finfo(float).tiny)
        if float(np.linalg.eigvalsh(block)[0]) > floor:
            break
        kk -= 1
    if kk == 0:
        return np.zeros(w_mat.shape[0]), True
    coef = np.linalg.solve(m[:kk, :kk], w_mat[:, :kk].T @ sigma_hat)
    return w_mat[:, :kk] @ coef, kk < m.shape[0]


def krylov_basis(sig, s, k: int) -> KrylovBasis:
    """Orthonormal basis for the order-``k`` Krylov space of ``sig`` at ``s``.

    Columns are built by modified Gram-Schmidt with one re-orthogonalization
    pass; columns whose residual falls under ``RANK_TOL_REL`` times the
    largest raw column norm are treated as dependent and skipped, so the
    returned basis has the numerical rank of the Krylov block.
    """
    sig = as_sym_matrix(sig, "gram matrix")
    s = as_vector(s, "seed vector")
    p = sig.shape[0]
    if s.shape[0] != p:
        raise InvalidInputError(f"seed vector has length {s.shape[0]}, expected {p}")
    if k < 1:
        raise InvalidInputError(f"order must be at least 1, got {k}")

    cols = [s]
    for _ in range(k - 1):
        cols.append(sig @ cols[-1])
    block = np.column_stack(cols)
    largest = float(np.linalg.norm(block, axis=0).max())
    tol = RANK_TOL_REL * largest

    basis_cols: list[np.ndarray] = []
    for j in range(k):
        v = block[:, j].copy()
        for _ in range(2):
            for q in basis_cols:
                v -= (q @ v) * q
        nv = float(np.linalg.norm(v))
        if nv > tol:
            basis_cols.append(v / nv)
    basis = np.column_stack(basis_cols) if basis_cols else np.zeros((p, 0))
    return KrylovBasis(basis=basis, k_requested=k)


def predict(x, beta) -> np.ndarray:
    """In-sample prediction X @ beta."""
    x = as_matrix(x, "X")
    beta = as_vector(beta, "beta")
    if x.shape[1] != beta.shape[0]:
        raise InvalidInputError(
            f"X has {x.shape[1]} columns but beta has {beta.shape[0]} entries"
        )
    return x @ beta
