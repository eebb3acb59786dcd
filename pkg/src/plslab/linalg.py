"""Dense symmetric matrix and vector kernels used across the package.

Everything works on plain float64 numpy arrays and is pure: inputs are never
mutated, so arrays can be shared freely between threads.  Validation rejects
non-finite entries up front because every downstream formula assumes finite
data.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, InvalidInputError

# Below this dimension a full symmetric eigensolve beats iterating.
EIG_FALLBACK_DIM = 64


def as_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def as_sym_matrix(a, name: str = "matrix", asym_tol: float = 1e-8) -> np.ndarray:
    """Validate a square symmetric matrix and return an exactly symmetric copy.

    Asymmetry up to ``asym_tol`` (relative to the largest entry) is attributed
    to round-off and folded away by averaging with the transpose; anything
    larger raises.
    """
    arr = as_matrix(a, name)
    if arr.shape[0] != arr.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise InvalidInputError(f"{name} must have positive dimension")
    scale = float(np.abs(arr).max())
    if float(np.abs(arr - arr.T).max()) > asym_tol * max(scale, 1.0):
        raise InvalidInputError(f"{name} is not symmetric")
    return (arr + arr.T) / 2.0


def psd_tolerance(a: np.ndarray) -> float:
    """Eigenvalue slack absorbing round-off in Gram-style constructions."""
    return 1e-10 * max(float(np.trace(a)), 0.0)


def gram(x, n: int | None = None) -> np.ndarray:
    """Average cross-product matrix of the rows of ``x``: X'X / n.

    ``n`` defaults to the number of rows and must match it when given.  The
    result is exactly symmetric.
    """
    x = as_matrix(x, "design matrix")
    rows = x.shape[0]
    if rows < 1:
        raise InvalidInputError("design matrix needs at least one row")
    if x.shape[1] < 1:
        raise InvalidInputError("design matrix needs at least one column")
    if n is None:
        n = rows
    if n != rows:
        raise InvalidInputError(f"row count mismatch: design has {rows} rows, n={n}")
    s = x.T @ x / float(n)
    return (s + s.T) / 2.0


def trace(a) -> float:
    """Trace of a symmetric matrix."""
    return float(np.trace(as_sym_matrix(a)))


def spectral_radius(a, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Largest eigenvalue of a symmetric positive semidefinite matrix.

    Dimensions up to :data:`EIG_FALLBACK_DIM` go through a full symmetric
    eigensolve.  Larger matrices use power iteration from the deterministic
    all-ones start (restarting from the dominant-diagonal basis vector if the
    start happens to sit in the null space), converging when the Rayleigh
    quotient is stable to relative ``tol``.  The zero matrix maps to 0.

    Raises
    ------
    ConvergenceError
        If the iteration budget runs out; carries the last estimate.
    """
    a = as_sym_matrix(a)
    if tol <= 0.0:
        raise InvalidInputError("tol must be positive")
    if max_iter < 1:
        raise InvalidInputError("max_iter must be at least 1")
    if not a.any():
        return 0.0
    dim = a.shape[0]
    if dim <= EIG_FALLBACK_DIM:
        return float(max(np.linalg.eigvalsh(a)[-1], 0.0))

    starts = [np.ones(dim) / np.sqrt(dim)]
    # A PSD matrix with some nonzero entry has a strictly positive diagonal
    # maximum, and that basis vector cannot lie in the null space.
    starts.append(np.eye(dim)[int(np.argmax(np.diag(a)))])
    estimate = 0.0
    for v in starts:
        previous = np.inf
        for _ in range(max_iter):
            w = a @ v
            norm_w = float(np.linalg.norm(w))
            if norm_w == 0.0:
                break  # start vector annihilated, try the next one
            v = w / norm_w
            estimate = float(v @ (a @ v))
            if abs(estimate - previous) <= tol * max(abs(estimate), np.finfo(float).tiny):
                return max(estimate, 0.0)
            previous = estimate
        else:
            raise ConvergenceError(
                f"power iteration did not stabilize to tol={tol} within {max_iter} iterations",
                last_iterate=estimate,
            )
    raise ConvergenceError("power iteration found no usable start vector", last_iterate=estimate)


def sym_sqrt(a) -> np.ndarray:
    """Symmetric PSD square root S with S @ S == a up to round-off.

    Eigenvalues in [-psd_tolerance(a), 0) are clamped to zero; anything more
    negative means the input is not PSD and raises.
    """
    a = as_sym_matrix(a)
    w, v = np.linalg.eigh(a)
    slack = psd_tolerance(a)
    if float(w[0]) < -slack:
        raise InvalidInputError(
            f"matrix is not positive semidefinite: eigenvalue {w[0]:.6e} below -{slack:.6e}"
        )
    w = np.clip(w, 0.0, None)
    s = (v * np.sqrt(w)) @ v.T
    return (s + s.T) / 2.0


def min_eig_on_support(a, support) -> float:
    """Smallest eigenvalue of the principal submatrix indexed by ``support``.

    This is the surrogate used when a cone-restricted minimum (restricted
    eigenvalue) has to be reported for a design limited to an active set.
    """
    a = as_sym_matrix(a)
    idx = np.asarray(sorted(support), dtype=int)
    if idx.size == 0:
        raise InvalidInputError("support must be nonempty")
    if np.unique(idx).size != idx.size:
        raise InvalidInputError("support indices must be unique")
    if int(idx.min()) < 0 or int(idx.max()) >= a.shape[0]:
        raise InvalidInputError(
            f"support index out of range for dimension {a.shape[0]}: {idx.tolist()}"
        )
    sub = a[np.ix_(idx, idx)]
    return float(np.linalg.eigvalsh(sub)[0])


def project_residual(target, direction) -> np.ndarray:
    """Component of ``target`` orthogonal to ``direction``.

    The zero direction projects onto nothing, so the target comes back
    unchanged (as a copy).
    """
    t = as_vector(target, "target")
    d = as_vector(direction, "direction")
    if t.shape != d.shape:
        raise InvalidInputError(f"dimension mismatch: target {t.shape}, direction {d.shape}")
    dd = float(d @ d)
    if dd == 0.0:
        return t.copy()
    return t - (float(t @ d) / dd) * d
