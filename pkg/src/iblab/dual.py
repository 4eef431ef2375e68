"""Solvers for the dual convex program behind the limiting direction of
gradient descent on separable data.

The interior optimum is characterized by the nonlinear system

    diag(y) G diag(y) q = mu * h(q),   mu > 0,   sum_i g^-1(q_i) = 1,

solved here by a damped Newton iteration in the log parametrization
q = exp(u) (which keeps q positive without projections).  Identity and
diagonal Grams admit closed forms.  For identity-tail losses (g(d) = d) the
optimum can sit on the boundary q_i = 0 when some entry of (G^-1 y) has the
wrong sign; a log-barrier fallback with an active-set polish handles that
case and flags it, since the characteristic equations above are necessary
only at interior optima.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import (
    DegenerateDataError,
    DomainViolationError,
    InvalidConfigurationError,
    InvalidParameterError,
    NotApplicableError,
    SolverFailureError,
)
from .interpolation import svp_check, unit
from .losses import (EQUAL_ASSIGNMENT, EXP, LOGISTIC, SIMPLEX, LossSpec,
                     MulticlassEncoding, make_loss)

NEWTON = "newton"
IDENTITY_CLOSED_FORM = "identity"
DIAGONAL_CLOSED_FORM = "diagonal"
BARRIER_FALLBACK = "barrier"
CE_CANDIDATE = "ce_candidate"

_FEAS_TOL = 1e-10
_KKT_REL_TOL = 1e-8


@dataclass(frozen=True)
class DualSolution:
    """Solution of the dual program for one label vector.

    Interior solutions have every q_i in (0, 1], lam identically zero,
    kkt_residual <= 1e-8 * mu and feasibility_gap <= 1e-10.  Boundary
    solutions (method == "barrier") carry exact zeros in q and positive
    entries of lam on the active set; for those, stationarity_residual
    (which accounts for lam) is the meaningful optimality measure.
    """

    q: np.ndarray
    mu: float
    lam: np.ndarray
    kkt_residual: float          # max-norm of diag(y) G diag(y) q - mu h(q)
    feasibility_gap: float       # |1 - sum_i g^-1(q_i)|
    iterations: int
    method: str
    stationarity_residual: float

    def to_dict(self) -> dict:
        return {
            "q": self.q.tolist(),
            "mu": self.mu,
            "kkt_residual": self.kkt_residual,
            "feasibility_gap": self.feasibility_gap,
            "iterations": self.iterations,
            "method": self.method,
        }


@dataclass(frozen=True)
class AdjustedLabels:
    """Per-example targets interpolated on a diagonal Gram."""

    tilde_y: np.ndarray
    mu: float


@dataclass(frozen=True)
class CEDualSolution:
    """Closed-form cross-entropy dual candidate with its global checks."""

    per_class: List[DualSolution]
    mu: float
    balance_residual: float   # max_i |sum_k q_ki / c_ki|
    mass_gap: float           # |1 - sum_k 1^T q_k|


def _signed_gram(G: np.ndarray, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    return (y[:, None] * y[None, :]) * np.asarray(G, dtype=np.float64)


def _residuals(A, q, mu, loss):
    kkt = float(np.max(np.abs(A @ q - mu * loss.h(q))))
    feas = float(abs(loss.g_inv(q).sum() - 1.0))
    return kkt, feas


def solve_identity(n: int, alpha: float, loss: LossSpec) -> DualSolution:
    """Closed form for G = alpha I: q = g(1/n) 1, mu = alpha g(1/n)/h(g(1/n))."""
    if n < 1 or not alpha > 0:
        raise InvalidParameterError("need n >= 1 and alpha > 0")
    qval = float(loss.g(1.0 / n))
    q = np.full(n, qval)
    mu = float(alpha * qval / loss.h(qval))
    A = alpha * np.eye(n)
    kkt, feas = _residuals(A, q, mu, loss)
    return DualSolution(q=q, mu=mu, lam=np.zeros(n), kkt_residual=kkt,
                        feasibility_gap=feas, iterations=0,
                        method=IDENTITY_CLOSED_FORM, stationarity_residual=kkt)


def solve_diagonal(dvec, loss: LossSpec, max_doublings: int = 200) -> DualSolution:
    """Closed form for G = diag(dvec): scalar bisection for mu, then
    q_i = f^-1(d_i / mu).

    The mass H(mu) = sum_i g^-1(f^-1(d_i/mu)) is continuous and increasing
    with H(0+) = 0, so the bracket is grown geometrically until H >= 1 and
    then bisected.
    """
    dvec = np.asarray(dvec, dtype=np.float64)
    if np.any(dvec <= 0):
        raise InvalidParameterError("diagonal Gram entries must be positive")

    def excess(mu):
        return float(loss.g_inv(loss.f_inv(dvec / mu)).sum()) - 1.0

    hi = float(np.max(dvec))
    doublings = 0
    while excess(hi) < 0:
        hi *= 2.0
        doublings += 1
        if doublings > max_doublings:
            raise SolverFailureError("no bracket for the diagonal mass equation")
    lo = 0.0
    it = doublings
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0:
            lo = mid
        else:
            hi = mid
        it += 1
        if hi - lo <= 1e-16 * hi:
            break
    mu = 0.5 * (lo + hi)
    q = loss.f_inv(dvec / mu)
    A = np.diag(dvec)
    kkt, feas = _residuals(A, q, mu, loss)
    return DualSolution(q=q, mu=mu, lam=np.zeros(dvec.size), kkt_residual=kkt,
                        feasibility_gap=feas, iterations=it,
                        method=DIAGONAL_CLOSED_FORM, stationarity_residual=kkt)


# ---------------------------------------------------------------------------
# general Newton solver
# ---------------------------------------------------------------------------


def _newton(A: np.ndarray, loss: LossSpec, q0: np.ndarray, tol: float,
            max_iter: int):
    """Damped Newton for A q = mu h(q), sum g^-1(q) = 1, parametrized as
    q = exp(u), mu = exp(nu).

    The stationarity block is solved in the scale-free form
    (A q) / (mu h(q)) - 1 = 0: the raw residual spans many orders of
    magnitude once h is large (small q under a strongly convex tail map),
    which would make the Jacobian hopelessly ill-conditioned.  Returns
    (q, mu, iterations) or None on stagnation.
    """
    n = A.shape[0]
    q = np.clip(np.asarray(q0, dtype=np.float64), 1e-300, None)
    u = np.log(q)
    mu = float(q @ (A @ q) / (q @ loss.h(q)))  # positive since A is PD
    nu = math.log(mu)

    def residual(q, mu):
        w = (A @ q) / (mu * loss.h(q))
        return np.concatenate([w - 1.0, [loss.g_inv(q).sum() - 1.0]]), w

    def converged(q, mu, F):
        kkt = np.max(np.abs(F[:-1]) * loss.h(q)) * mu
        return kkt <= tol * mu and abs(F[-1]) <= _FEAS_TOL

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        F, w = residual(q, mu)
        for it in range(max_iter):
            if converged(q, mu, F):
                return q, mu, it
            hq = loss.h(q)
            J = np.empty((n + 1, n + 1))
            J[:n, :n] = (A * q[None, :]) / (mu * hq)[:, None]
            J[:n, :n][np.diag_indices(n)] -= w * loss.h_prime(q) * q / hq
            J[:n, n] = -w
            J[n, :n] = hq * q
            J[n, n] = 0.0
            try:
                step = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                return None
            norm_F = np.linalg.norm(F)
            t = 1.0
            while t > 1e-14:
                u_new = u + t * step[:n]
                nu_new = nu + t * step[n]
                q_new = np.exp(u_new)
                mu_new = math.exp(nu_new)
                F_new, w_new = residual(q_new, mu_new)
                if np.linalg.norm(F_new) < (1.0 - 1e-4 * t) * norm_F:
                    u, q, nu, mu, F, w = u_new, q_new, nu_new, mu_new, F_new, w_new
                    break
                t *= 0.5
            else:
                return None
        if converged(q, mu, F):
            return q, mu, max_iter
    return None


def _renormalize(q: np.ndarray, loss: LossSpec) -> np.ndarray:
    """Scale q onto the mass-one manifold sum g^-1(s q) = 1."""
    if loss.kind in (EXP, LOGISTIC):
        return q / q.sum()
    lo, hi = 1e-12, 1e12
    for _ in range(200):
        s = np.sqrt(lo * hi)
        if loss.g_inv(s * q).sum() < 1.0:
            lo = s
        else:
            hi = s
    return np.sqrt(lo * hi) * q


def _barrier_polish(A, loss, q, tol):
    """Active-set polish: exact interior solve on the inactive coordinates.

    The barrier leaves boundary coordinates at roughly tau/lambda_i, so the
    classification cut is swept over a ladder; each attempt validates itself
    (positive inactive block, nonnegative multipliers on the active set)."""
    n = A.shape[0]
    scale = max(1.0, float(q.max()))
    for cut in (1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2):
        inactive = q > cut * scale
        for _ in range(n):
            if not inactive.any():
                break
            idx = np.nonzero(inactive)[0]
            sub = _newton(A[np.ix_(idx, idx)], loss, q[idx], tol, 100)
            if sub is None:
                break
            q_sub, mu, _ = sub
            if np.any(q_sub <= 0):
                break
            q_full = np.zeros(n)
            q_full[idx] = q_sub
            lam = A @ q_full - mu * loss.h(q_full)
            lam[idx] = 0.0
            neg = lam < -1e-9 * max(1.0, mu)
            if not neg.any():
                return q_full, mu, np.maximum(lam, 0.0)
            inactive = inactive | neg  # wrongly dropped coordinates re-enter
    return None


def _barrier_solve(A: np.ndarray, loss: LossSpec, q0: np.ndarray, tol: float,
                   tau_hi: float = 1e-2, tau_lo: float = 1e-8):
    """Annealed log-barrier with projected gradient steps on the mass-one
    manifold, followed by an active-set polish.  Handles boundary optima."""
    q = _renormalize(np.clip(q0, 1e-10, None), loss)
    evals = 0
    tau = tau_hi
    while tau >= tau_lo * 0.999:
        step = None
        prev_q = None
        prev_g = None
        for _ in range(400):
            grad = A @ q - tau / q
            c = loss.h(q)
            gp = grad - (c @ grad) / (c @ c) * c
            gn = np.linalg.norm(gp)
            if gn <= max(1e-4 * tau, 1e-13):
                break
            if prev_q is not None:
                dq = q - prev_q
                dg = gp - prev_g
                denom = dq @ dg
                step = abs(dq @ dq / denom) if denom != 0 else None
            if step is None or not np.isfinite(step):
                step = 1.0 / (np.linalg.norm(A, 2) + tau / q.min() ** 2)
            prev_q, prev_g = q, gp
            phi0 = 0.5 * q @ A @ q - tau * np.log(q).sum()
            t = 1.0
            while t > 1e-16:
                q_new = q - t * step * gp
                if q_new.min() > 0:
                    q_new = _renormalize(q_new, loss)
                    phi = 0.5 * q_new @ A @ q_new - tau * np.log(q_new).sum()
                    if phi < phi0 - 1e-6 * t * step * gn * gn:
                        q = q_new
                        break
                t *= 0.5
            else:
                break
            evals += 1
        tau /= 10.0
    polished = _barrier_polish(A, loss, q, tol)
    if polished is None:
        hq = loss.h(q)
        mu = float(hq @ (A @ q) / (hq @ hq))
        lam = np.maximum(A @ q - mu * loss.h(q), 0.0)
        return q, mu, lam, evals
    q, mu, lam = polished
    return q, mu, lam, evals


def solve_relaxed(G: np.ndarray, y: np.ndarray, loss: LossSpec,
                  init: Optional[np.ndarray] = None, tol: float = _KKT_REL_TOL,
                  max_iter: int = 200) -> DualSolution:
    """General dual solve for a positive definite Gram and +-1 labels.

    Newton from q = g(1/n) 1; on stagnation, retries from the exponential
    loss solution; if the optimum sits on the boundary (possible only for
    identity-tail losses), falls back to the barrier path and flags it.
    """
    G = np.asarray(G, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    if not np.all(np.abs(np.abs(y) - 1.0) < 1e-12):
        raise InvalidParameterError("labels must be +-1")
    A = _signed_gram(G, y)
    q0 = np.full(n, float(loss.g(1.0 / n))) if init is None else np.asarray(init, float)

    identity_g = loss.kind in (EXP, LOGISTIC)
    out = _newton(A, loss, q0, tol, max_iter)
    if out is None and not identity_g:
        # strictly convex g: retry from the exponential-loss solution
        try:
            exp_sol = solve_relaxed(G, y, make_loss("exp"), tol=tol, max_iter=max_iter)
            alphas = np.clip(exp_sol.q / exp_sol.q.sum(), 1e-10, None)
            out = _newton(A, loss, loss.g(alphas), tol, max_iter)
        except SolverFailureError:
            out = None
    if out is not None:
        q, mu, it = out
        if np.any(q > 1.0 + 1e-8):
            raise DomainViolationError(f"dual entry {q.max():.6f} exceeds one")
        kkt, feas = _residuals(A, q, mu, loss)
        return DualSolution(q=q, mu=mu, lam=np.zeros(n), kkt_residual=kkt,
                            feasibility_gap=feas, iterations=it, method=NEWTON,
                            stationarity_residual=kkt)

    if not identity_g:
        raise SolverFailureError(
            "Newton stagnated on a strictly-convex-tail loss; interior optimum "
            "was expected (check conditioning of the Gram matrix)")
    q, mu, lam, evals = _barrier_solve(A, loss, q0, tol)
    if np.any(q > 1.0 + 1e-8):
        raise DomainViolationError(f"dual entry {q.max():.6f} exceeds one")
    kkt, feas = _residuals(A, q, mu, loss)
    stat = float(np.max(np.abs(A @ q - lam - mu * loss.h(q))))
    return DualSolution(q=q, mu=mu, lam=lam, kkt_residual=kkt,
                        feasibility_gap=feas, iterations=evals,
                        method=BARRIER_FALLBACK, stationarity_residual=stat)


def primal_from_dual(X: np.ndarray, y: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Unit-norm weight direction X^T diag(y) q."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if np.any(q < 0):
        raise InvalidParameterError("dual vector must be nonnegative")
    w = X.T @ (y * q)
    if np.linalg.norm(w) == 0:
        raise DegenerateDataError("X^T diag(y) q vanished")
    return unit(w)


def adjusted_labels(dvec, y, loss: LossSpec) -> AdjustedLabels:
    """Targets tilde_y_i = y_i d_i f^-1(d_i/mu) interpolated on diag(dvec)."""
    dvec = np.asarray(dvec, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    sol = solve_diagonal(dvec, loss)
    return AdjustedLabels(tilde_y=y * dvec * sol.q, mu=sol.mu)


# ---------------------------------------------------------------------------
# multiclass
# ---------------------------------------------------------------------------


def solve_multiclass_general(G: np.ndarray, encoding: MulticlassEncoding,
                             loss: LossSpec, tol: float = _KKT_REL_TOL,
                             max_iter: int = 200) -> List[DualSolution]:
    """Independent per-class solves with the signed vectors c_k as labels."""
    if encoding.scheme != EQUAL_ASSIGNMENT:
        raise InvalidConfigurationError("per-class solves need the equal-assignment encoding")
    out = []
    for k in range(encoding.K):
        try:
            out.append(solve_relaxed(G, encoding.c[k], loss, tol=tol, max_iter=max_iter))
        except (SolverFailureError, DomainViolationError) as exc:
            raise SolverFailureError(f"class {k + 1}: {exc}") from exc
    return out


def ce_candidate(G: np.ndarray, encoding: MulticlassEncoding) -> CEDualSolution:
    """Closed-form cross-entropy dual q_k = diag(c_k) G^-1 c_k / sum_j c_j^T G^-1 c_j.

    Valid exactly when every signed product c_{k,i} (G^-1 c_k)_i is positive;
    otherwise raises naming the first failing (class, example) pair.
    """
    if encoding.scheme != SIMPLEX:
        raise InvalidConfigurationError("the cross-entropy candidate needs the simplex encoding")
    G = np.asarray(G, dtype=np.float64)
    C = encoding.c
    K, n = C.shape
    report = svp_check(G, C)
    if not report.holds:
        signed = C * report.beta
        k_bad, i_bad = np.unravel_index(np.argmin(signed), signed.shape)
        raise NotApplicableError(
            f"sign condition fails at class {k_bad + 1}, example {i_bad + 1} "
            f"(signed product {signed[k_bad, i_bad]:.3e})",
            witness=(int(k_bad) + 1, int(i_bad) + 1))
    betas = report.beta
    denom = float(np.sum(C * betas))
    mu = 1.0 / denom
    Q = C * betas / denom
    balance = float(np.max(np.abs((Q / C).sum(axis=0))))
    mass_gap = float(abs(1.0 - Q.sum()))
    if balance > _FEAS_TOL or mass_gap > _FEAS_TOL:
        raise SolverFailureError(
            f"candidate failed its own checks (balance {balance:.2e}, mass gap {mass_gap:.2e})")
    loss = make_loss("logistic")
    per_class = []
    cinv = encoding.c_inv()
    for k in range(K):
        Ak = (cinv[k][:, None] * G * cinv[k][None, :])
        stat = float(np.max(np.abs(Ak @ Q[k] - mu)))
        per_class.append(DualSolution(
            q=Q[k], mu=mu, lam=np.zeros(n), kkt_residual=stat,
            feasibility_gap=mass_gap, iterations=0, method=CE_CANDIDATE,
            stationarity_residual=stat))
    return CEDualSolution(per_class=per_class, mu=mu,
                          balance_residual=balance, mass_gap=mass_gap)
