"""Gradient descent on the unregularized empirical risk, with mirror-descent
primal/dual tracking and direction metrics against the interpolation and
dual-solver references.

Steps are adaptive: the raw rate eta_t = n * eta_hat / ell'(psi(p_t)) keeps
the normalized step eta_hat constant at its cap 1/beta (constant, hence
nonincreasing, with divergent sum), which is what the convergence guarantees
are parameterized by.  Convergence is declared on the risk, not on the
direction; directions are additionally recorded at the risk thresholds
1e-4 .. 1e-10 to expose their slow drift toward the limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import kernels
from .data import Dataset
from .errors import (
    InvalidConfigurationError,
    InvalidParameterError,
    TrainingOverflowError,
)
from .interpolation import direction_distance, mni, unit
from .losses import (
    ADABOOST,
    CROSS_ENTROPY,
    EQUAL_ASSIGNMENT,
    EXP,
    LOGISTIC,
    POLY,
    SIMPLEX,
    Binary,
    LossSpec,
    MulticlassCE,
    MulticlassEncoding,
    MulticlassGeneral,
    dual_map,
    multiclass_dual_map,
    smoothness_bound,
)

RISK_BELOW_THRESHOLD = "risk_below_threshold"
MAX_ITERATIONS = "max_iterations"
NON_SEPARABLE = "non_separable"

_LADDER = (1e-4, 1e-6, 1e-8, 1e-10)

_KIND_CODE = {EXP: kernels.KIND_EXP, LOGISTIC: kernels.KIND_LOGISTIC, POLY: kernels.KIND_POLY}


@dataclass(frozen=True)
class StepSchedule:
    """Normalized-step target; None means the smoothness cap 1/beta."""

    eta_hat: Optional[float] = None


@dataclass(frozen=True)
class StopRule:
    risk_threshold: float = 1e-10
    max_iters: int = 2_000_000
    stall_limit: int = 10_000


@dataclass(frozen=True)
class IWConfig:
    """Importance weighting: multiply losses of the index set S by Q > 1."""

    S: np.ndarray
    Q: float
    m: float


@dataclass(frozen=True)
class TrajectoryPoint:
    t: int
    risk: float
    log_risk: float
    eta_hat: float
    dist_mni: float
    dist_dual: float
    q_min: float
    q_max: float
    dual_objective: float


@dataclass
class Trajectory:
    snapshots: List[TrajectoryPoint]
    termination: str
    iterations: int
    final_w: np.ndarray           # unit direction (d,) or (K, d) per class
    final_q: np.ndarray           # (n,) or (K, n)
    final_risk: float
    final_log_risk: float
    eta_hat: float
    threshold_crossings: dict = field(default_factory=dict)
    per_class_dist_mni: Optional[np.ndarray] = None

    def to_csv_rows(self) -> List[List]:
        rows = [["t", "risk", "eta_hat", "dist_mni", "dist_dual", "q_min", "q_max"]]
        for pt in self.snapshots:
            rows.append([pt.t, repr(pt.risk), repr(pt.eta_hat), repr(pt.dist_mni),
                         repr(pt.dist_dual), repr(pt.q_min), repr(pt.q_max)])
        return rows


@dataclass(frozen=True)
class MarginReport:
    margins: np.ndarray
    ratio: float                 # median margin on S over median off S
    expected_ratio: float        # Q^{1/(m+2)}


# ---------------------------------------------------------------------------
# plain-numpy risk and gradient (reference path for derivative checks)
# ---------------------------------------------------------------------------


def binary_risk(X, y, w, loss: LossSpec, weights=None) -> float:
    p = -np.asarray(y, float) * (np.asarray(X, float) @ np.asarray(w, float))
    vals = loss.ell(p)
    if weights is not None:
        vals = vals * weights
    return float(vals.sum() / y.size)


def binary_risk_grad(X, y, w, loss: LossSpec, weights=None) -> np.ndarray:
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    p = -y * (X @ np.asarray(w, float))
    lp = loss.ell_prime(p)
    if weights is not None:
        lp = lp * weights
    return -(X.T @ (y * lp)) / y.size


def multiclass_risk(X, encoding: MulticlassEncoding, W, loss: LossSpec,
                    formulation: str) -> float:
    Xi = _margins(X, encoding, W)
    if formulation == ADABOOST:
        return float(loss.ell(Xi.sum(axis=0)).sum() / encoding.n)
    if formulation != CROSS_ENTROPY:
        raise InvalidConfigurationError(f"unknown formulation {formulation!r}")
    return math.exp(_ce_log_total(encoding, Xi)) / encoding.n


def multiclass_risk_grad(X, encoding: MulticlassEncoding, W, loss: LossSpec,
                         formulation: str) -> np.ndarray:
    """Gradient with respect to the stacked per-class weights (K, d)."""
    X = np.asarray(X, float)
    Xi = _margins(X, encoding, W)
    cinv = encoding.c_inv()
    if formulation == ADABOOST:
        lp = loss.ell_prime(Xi.sum(axis=0))
        return np.stack([-(X.T @ (cinv[k] * lp)) / encoding.n for k in range(encoding.K)])
    if formulation != CROSS_ENTROPY:
        raise InvalidConfigurationError(f"unknown formulation {formulation!r}")
    from .losses import _ce_log_losses, _softplus  # internal reuse

    a, b = _ce_log_losses(encoding, Xi)
    li = _softplus(b)
    y0 = encoding.labels - 1
    n = encoding.n
    D = -encoding.c * np.exp(a - li[None, :])          # dL_i / dxi_(k,i), k != y_i
    D[y0, np.arange(n)] = encoding.c[y0, np.arange(n)] * (-np.expm1(-li))
    return np.stack([-(X.T @ (cinv[k] * D[k])) / n for k in range(encoding.K)])


def _margins(X, encoding: MulticlassEncoding, W) -> np.ndarray:
    """xi_{k,i} = -c_{k,i}^-1 <w_k, x_i> as a (K, n) matrix."""
    X = np.asarray(X, float)
    W = np.asarray(W, float)
    return -(encoding.c_inv()) * (W @ X.T)


def _ce_log_total(encoding, Xi) -> float:
    from .losses import _ce_log_losses, _softplus

    _, b = _ce_log_losses(encoding, Xi)
    return float(np.log(_softplus(b).sum()))


# ---------------------------------------------------------------------------
# trainers
# ---------------------------------------------------------------------------


def _snapshot_times(max_iters: int):
    yield 0
    t = 1
    while t < max_iters:
        yield t
        t *= 2
    yield max_iters


def _termination(status: int, reached_max: bool) -> str:
    if status == kernels.STATUS_RISK:
        return RISK_BELOW_THRESHOLD
    if status == kernels.STATUS_STALLED:
        return NON_SEPARABLE
    if status == kernels.STATUS_OVERFLOW:
        raise TrainingOverflowError("non-finite training loss")
    return MAX_ITERATIONS if reached_max else RISK_BELOW_THRESHOLD


def train_binary(dataset: Dataset, loss: LossSpec,
                 schedule: Optional[StepSchedule] = None,
                 stop: Optional[StopRule] = None,
                 w0: Optional[np.ndarray] = None,
                 dual_reference: Optional[np.ndarray] = None,
                 weights: Optional[np.ndarray] = None) -> Trajectory:
    """Gradient descent for binary labels; tracks the dual trace and the
    distances to the interpolation direction and to an optional dual-solver
    primal reference."""
    X = dataset.X
    y = np.asarray(dataset.labels, dtype=np.float64)
    n = y.size
    stop = stop or StopRule()
    schedule = schedule or StepSchedule()
    if weights is not None and loss.kind != POLY:
        raise InvalidConfigurationError("per-example weights are supported for "
                                        "polynomial losses only")
    if schedule.eta_hat is not None:
        eta_hat = float(schedule.eta_hat)
    elif weights is not None:
        # per-example curvature cap: sum_i c_i with c_i = (m+1) w_i^{1/m}
        eta_hat = 1.0 / float((loss.m + 1.0) * np.sum(weights ** (1.0 / loss.m)))
    else:
        eta_hat = 1.0 / smoothness_bound(loss, Binary(n))

    A = (y[:, None] * y[None, :]) * (X @ X.T)
    p = np.zeros(n) if w0 is None else -y * (X @ np.asarray(w0, float))
    s = np.zeros(n)
    q = np.zeros(n)
    lnw = np.zeros(n) if weights is None else np.log(np.asarray(weights, float))

    w_mni_dir = None
    try:
        w_mni_dir = unit(mni(X, y))
    except Exception:
        pass  # singular Gram: no interpolation reference
    dual_dir = None if dual_reference is None else unit(np.asarray(dual_reference, float))

    def w_of(s_vec):
        w = X.T @ (y * s_vec)
        if w0 is not None:
            w = w + w0
        return w

    def point(t, logL, q_now, s_now):
        w = w_of(s_now)
        wn = np.linalg.norm(w)
        d_mni = direction_distance(w, w_mni_dir) if (w_mni_dir is not None and wn > 0) else float("nan")
        d_dual = direction_distance(w, dual_dir) if (dual_dir is not None and wn > 0) else float("nan")
        risk = math.exp(logL) / n if logL < 700 else float("inf")
        qv = q_now[q_now > 0]
        return TrajectoryPoint(t=t, risk=risk, log_risk=logL - math.log(n),
                               eta_hat=eta_hat, dist_mni=d_mni, dist_dual=d_dual,
                               q_min=float(qv.min()) if qv.size else 0.0,
                               q_max=float(q_now.max()),
                               dual_objective=0.5 * float(np.sum((X.T @ (y * q_now)) ** 2)))

    log_target = math.log(stop.risk_threshold * n) if stop.risk_threshold > 0 else -math.inf
    state = np.array([np.inf, 0.0])
    kind = _KIND_CODE[loss.kind]
    m = float(loss.m or 1.0)

    logL0 = _log_total_binary(loss, p, lnw)
    q[:] = np.exp(loss.log_ell_prime(p) + lnw
                  - loss.log_ell_prime_from_log_loss(logL0))
    snapshots = [point(0, logL0, q, s)]
    crossings = {}
    t = 0
    status = kernels.STATUS_RUNNING
    for t_next in _snapshot_times(stop.max_iters):
        if t_next <= t:
            continue
        done, logL, status = kernels.binary_chunk(
            A, lnw, p, s, q, kind, m, eta_hat, t_next - t,
            log_target, stop.stall_limit, state)
        t += done
        pt = point(t, logL, q, s)
        snapshots.append(pt)
        for thr in _LADDER:
            if pt.risk <= thr and thr not in crossings:
                crossings[thr] = pt
        if status != kernels.STATUS_RUNNING:
            break
        if t >= stop.max_iters:
            break
    termination = _termination(status, t >= stop.max_iters)
    return Trajectory(snapshots=snapshots, termination=termination, iterations=t,
                      final_w=unit(w_of(s)) if np.linalg.norm(w_of(s)) > 0 else w_of(s),
                      final_q=q.copy(), final_risk=snapshots[-1].risk,
                      final_log_risk=snapshots[-1].log_risk, eta_hat=eta_hat,
                      threshold_crossings=crossings)


def _log_total_binary(loss, p, lnw) -> float:
    logs = loss.log_ell(p) + lnw
    mx = float(np.max(logs))
    return mx + math.log(float(np.exp(logs - mx).sum()))


def train_multiclass(dataset: Dataset, encoding: MulticlassEncoding, loss: LossSpec,
                     formulation: str, schedule: Optional[StepSchedule] = None,
                     stop: Optional[StopRule] = None) -> Trajectory:
    """Joint gradient descent over the stacked per-class weights.

    The trajectory's final_w holds per-class unit directions (K, d) and
    per_class_dist_mni their distances to the per-class interpolators."""
    if encoding.K < 2:
        raise InvalidConfigurationError("multiclass training needs K >= 2")
    if formulation == ADABOOST and encoding.scheme != EQUAL_ASSIGNMENT:
        raise InvalidConfigurationError("adaboost formulation needs equal-assignment encoding")
    if formulation == CROSS_ENTROPY and (encoding.scheme != SIMPLEX or loss.kind != LOGISTIC):
        raise InvalidConfigurationError("cross-entropy needs simplex encoding and logistic loss")
    X = dataset.X
    G = X @ X.T
    K, n = encoding.K, encoding.n
    stop = stop or StopRule()
    schedule = schedule or StepSchedule()
    if schedule.eta_hat is not None:
        eta_hat = float(schedule.eta_hat)
    elif formulation == CROSS_ENTROPY:
        eta_hat = 1.0 / smoothness_bound(loss, MulticlassCE(K))
    else:
        eta_hat = 1.0 / smoothness_bound(loss, MulticlassGeneral(n, K))

    cinv = encoding.c_inv()
    mni_dirs = []
    try:
        mni_dirs = [unit(mni(X, encoding.c[k])) for k in range(K)]
    except Exception:
        mni_dirs = None

    def per_class_dirs(S):
        return np.stack([X.T @ (cinv[k] * S[k]) for k in range(K)])

    def point_and_dists(t, logL, Q, S):
        W = per_class_dirs(S)
        dists = np.full(K, np.nan)
        if mni_dirs is not None:
            for k in range(K):
                if np.linalg.norm(W[k]) > 0:
                    dists[k] = direction_distance(W[k], mni_dirs[k])
        risk = math.exp(logL) / n if logL < 700 else float("inf")
        qv = Q[Q > 0]
        have_dist = mni_dirs is not None and np.any(np.isfinite(dists))
        pt = TrajectoryPoint(t=t, risk=risk, log_risk=logL - math.log(n),
                             eta_hat=eta_hat,
                             dist_mni=float(np.nanmax(dists)) if have_dist else float("nan"),
                             dist_dual=float("nan"),
                             q_min=float(qv.min()) if qv.size else 0.0,
                             q_max=float(Q.max()),
                             dual_objective=0.5 * float(np.sum(per_class_dirs(Q) ** 2)))
        return pt, dists

    log_target = math.log(stop.risk_threshold * n) if stop.risk_threshold > 0 else -math.inf
    state = np.array([np.inf, 0.0])
    P = np.zeros((K, n))
    S = np.zeros((K, n))
    Q = np.zeros((K, n))
    crossings = {}
    snapshots = []
    t = 0
    status = kernels.STATUS_RUNNING

    if formulation == CROSS_ENTROPY:
        Acls = np.stack([(cinv[k][:, None] * G * cinv[k][None, :]) for k in range(K)])
        y0 = (encoding.labels - 1).astype(np.int64)
        Q[:] = multiclass_dual_map(loss, encoding, P, formulation)
        pt, dists = point_and_dists(0, _log_total_ce(encoding, P), Q, S)
        snapshots.append(pt)
        for t_next in _snapshot_times(stop.max_iters):
            if t_next <= t:
                continue
            done, logL, status = kernels.ce_chunk(
                Acls, encoding.c, y0, P, S, Q, eta_hat, t_next - t,
                log_target, stop.stall_limit, state)
            t += done
            pt, dists = point_and_dists(t, logL, Q, S)
            snapshots.append(pt)
            for thr in _LADDER:
                if pt.risk <= thr and thr not in crossings:
                    crossings[thr] = pt
            if status != kernels.STATUS_RUNNING or t >= stop.max_iters:
                break
    else:
        # equal-assignment: c^-1 = c and the dual rows coincide across
        # classes, so the joint dynamics reduce to a single margin recursion
        # on r = sum_k xi_k with A_eff = sum_k diag(c_k) G diag(c_k)
        A_eff = np.zeros((n, n))
        for k in range(K):
            A_eff += (encoding.c[k][:, None] * G * encoding.c[k][None, :])
        r = np.zeros(n)
        s_row = np.zeros(n)
        q_row = np.zeros(n)
        lnw = np.zeros(n)
        kind = _KIND_CODE[loss.kind]
        m = float(loss.m or 1.0)
        q_row[:] = dual_map(loss, r)
        S = np.tile(s_row, (K, 1))
        Q = np.tile(q_row, (K, 1))
        pt, dists = point_and_dists(0, _log_total_binary(loss, r, lnw), Q, S)
        snapshots.append(pt)
        for t_next in _snapshot_times(stop.max_iters):
            if t_next <= t:
                continue
            done, logL, status = kernels.binary_chunk(
                A_eff, lnw, r, s_row, q_row, kind, m, eta_hat, t_next - t,
                log_target, stop.stall_limit, state)
            t += done
            S = np.tile(s_row, (K, 1))
            Q = np.tile(q_row, (K, 1))
            pt, dists = point_and_dists(t, logL, Q, S)
            snapshots.append(pt)
            for thr in _LADDER:
                if pt.risk <= thr and thr not in crossings:
                    crossings[thr] = pt
            if status != kernels.STATUS_RUNNING or t >= stop.max_iters:
                break

    termination = _termination(status, t >= stop.max_iters)
    W = np.stack([X.T @ (cinv[k] * S[k]) for k in range(K)])
    W_unit = np.stack([unit(W[k]) if np.linalg.norm(W[k]) > 0 else W[k] for k in range(K)])
    return Trajectory(snapshots=snapshots, termination=termination, iterations=t,
                      final_w=W_unit, final_q=Q.copy(),
                      final_risk=snapshots[-1].risk,
                      final_log_risk=snapshots[-1].log_risk, eta_hat=eta_hat,
                      threshold_crossings=crossings,
                      per_class_dist_mni=dists)


def _log_total_ce(encoding, Xi) -> float:
    return _ce_log_total(encoding, Xi)


def train_importance_weighted(dataset: Dataset, iw: IWConfig,
                              schedule: Optional[StepSchedule] = None,
                              stop: Optional[StopRule] = None):
    """Minimize the importance-weighted polynomial risk and report margins.

    Returns (trajectory, margin_report); the ratio of median margins on and
    off the up-weighted set converges to Q^{1/(m+2)}."""
    if not iw.Q > 1:
        raise InvalidParameterError(f"importance weight must exceed one, got {iw.Q}")
    if not iw.m > 0:
        raise InvalidParameterError(f"polynomial degree must be positive, got {iw.m}")
    from .losses import make_loss

    n = dataset.n
    S_idx = np.asarray(iw.S, dtype=np.int64)
    weights = np.ones(n)
    weights[S_idx] = iw.Q
    loss = make_loss("poly", iw.m)
    stop = stop or StopRule(risk_threshold=0.0, max_iters=4_000_000)
    traj = train_binary(dataset, loss, schedule=schedule, stop=stop, weights=weights)
    y = np.asarray(dataset.labels, dtype=np.float64)
    margins = y * (dataset.X @ traj.final_w)
    mask = np.zeros(n, dtype=bool)
    mask[S_idx] = True
    ratio = float(np.median(margins[mask]) / np.median(margins[~mask]))
    return traj, MarginReport(margins=margins, ratio=ratio,
                              expected_ratio=float(iw.Q ** (1.0 / (iw.m + 2.0))))
