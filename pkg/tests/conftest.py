"""Shared helpers: random problem builders and independent span/Gram oracles."""

import numpy as np


def random_spd(rng, dim, lo=0.5, hi=3.0):
    """Well-conditioned SPD matrix with eigenvalues spread over [lo, hi]."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    w = np.linspace(lo, hi, dim)
    a = (q * w) @ q.T
    return (a + a.T) / 2.0


def triple_loop_gram(x):
    """Brute-force X'X/n, one scalar at a time."""
    n, p = x.shape
    out = np.zeros((p, p))
    for j in range(p):
        for k in range(p):
            acc = 0.0
            for i in range(n):
                acc += x[i, j] * x[i, k]
            out[j, k] = acc / n
    return out


def max_principal_angle(a, b):
    """Largest principal angle (radians) between the column spans of a and b.

    Uses the Bjorck-Golub sine formula (largest singular value of the
    projection residual), which stays accurate for tiny angles where the
    arccos-of-cosine route loses half the digits.  Spans of different
    dimension are maximally apart by convention.
    """
    qa, _ = np.linalg.qr(np.atleast_2d(a))
    qb, _ = np.linalg.qr(np.atleast_2d(b))
    if qa.shape[1] != qb.shape[1]:
        return np.pi / 2.0
    resid = qb - qa @ (qa.T @ qb)
    svals = np.linalg.svd(resid, compute_uv=False)
    return float(np.arcsin(np.clip(svals.max(), 0.0, 1.0)))
