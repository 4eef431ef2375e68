"""Minimum-norm interpolation and Gram-deviation diagnostics.

These are the reference objects everything else is compared against: the
least-norm interpolator X^T (X X^T)^-1 t, the all-points-support condition
on (X X^T)^-1 y, and the deviation of the Gram matrix from a multiple of
the identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, SingularGramError

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class GramSummary:
    """Deviation of G = X X^T from alpha * I."""

    G: np.ndarray
    alpha: float
    eps: float            # operator norm of G - alpha I
    ratio: float          # eps / alpha
    lambda_min: float
    condition: float


@dataclass(frozen=True)
class SvpReport:
    """Signed-product check on beta = G^-1 y (or per-class G^-1 c_k)."""

    beta: np.ndarray      # (n,) or (K, n)
    holds: bool
    margin: float         # min over entries of the signed product


def spd_solve(G: np.ndarray, b: np.ndarray, refine: int = 2):
    """Solve G x = b for symmetric positive definite G via Cholesky with a
    couple of iterative-refinement sweeps; returns (x, condition_number)."""
    G = np.asarray(G, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    evals = np.linalg.eigvalsh(G)
    if evals[0] <= 0:
        raise SingularGramError(f"Gram matrix not positive definite (lambda_min = {evals[0]:.3e})")
    cond = float(evals[-1] / evals[0])
    if cond > _COND_LIMIT:
        raise SingularGramError(f"Gram matrix condition number {cond:.3e} exceeds {_COND_LIMIT:.0e}")
    L = np.linalg.cholesky(G)
    def solve(rhs):
        return np.linalg.solve(L.T, np.linalg.solve(L, rhs))
    x = solve(b)
    for _ in range(refine):
        r = b - G @ x
        x = x + solve(r)
    return x, cond


def mni(X: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Least-norm interpolator X^T (X X^T)^-1 targets.

    Raises SingularGramError for singular or near-singular Grams; the fitted
    residual is verified to be at the level of the solve tolerance.
    """
    X = np.asarray(X, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    G = X @ X.T
    coef, _ = spd_solve(G, targets)
    w = X.T @ coef
    resid = np.max(np.abs(X @ w - targets))
    if resid > 1e-8 * max(np.max(np.abs(targets)), 1e-300):
        raise SingularGramError(f"interpolation residual {resid:.3e} too large")
    return w


def svp_check(G: np.ndarray, targets: np.ndarray) -> SvpReport:
    """All-points-support condition: every entry of targets * G^-1 targets
    positive (per class when targets is a (K, n) matrix)."""
    G = np.asarray(G, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    single = t.ndim == 1
    T = t[None, :] if single else t
    betas = np.empty_like(T)
    for k, row in enumerate(T):
        betas[k], _ = spd_solve(G, row)
    signed = T * betas
    report_beta = betas[0] if single else betas
    return SvpReport(beta=report_beta, holds=bool(np.all(signed > 0)),
                     margin=float(signed.min()))


def gram_summary(X: np.ndarray, alpha: Optional[float] = None) -> GramSummary:
    """Deviation summary of the Gram matrix; alpha defaults to tr(G)/n."""
    X = np.asarray(X, dtype=np.float64)
    G = X @ X.T
    n = G.shape[0]
    if alpha is None:
        alpha = float(np.trace(G) / n)
    evals = np.linalg.eigvalsh(G)
    dev = np.linalg.eigvalsh(G - alpha * np.eye(n))
    eps = float(max(abs(dev[0]), abs(dev[-1])))
    cond = float(evals[-1] / evals[0]) if evals[0] > 0 else np.inf
    return GramSummary(G=G, alpha=float(alpha), eps=eps, ratio=eps / alpha,
                       lambda_min=float(evals[0]), condition=cond)


def eps_alpha(G: np.ndarray, alpha: float, v: np.ndarray) -> float:
    """||G v - alpha v|| / ||v|| (the caller divides by alpha for the ratio)."""
    v = np.asarray(v, dtype=np.float64)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise DomainError("eps_alpha needs a nonzero vector")
    return float(np.linalg.norm(G @ v - alpha * v) / nv)


def direction_distance(w1: np.ndarray, w2: np.ndarray) -> float:
    """Euclidean distance between unit normalizations; lies in [0, 2]."""
    w1 = np.asarray(w1, dtype=np.float64).ravel()
    w2 = np.asarray(w2, dtype=np.float64).ravel()
    n1, n2 = np.linalg.norm(w1), np.linalg.norm(w2)
    if n1 == 0 or n2 == 0:
        raise DomainError("direction distance needs nonzero vectors")
    return float(np.linalg.norm(w1 / n1 - w2 / n2))


def unit(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise DomainError("cannot normalize the zero vector")
    return v / nv
