"""Convex classification losses and their tail maps.

Three families are supported: exponential, logistic, and polynomially-tailed
losses of degree m > 0.  Each loss carries, besides the usual evaluators
(ell, ell', ell'', inverses), the tail map g with its inverse, the derived
maps h := (g^-1)' and f(d) := h(d)/d, and a generalized sum

    psi(xi) = ell^-1( sum_i ell(xi_i) )

whose gradient supplies the mirror-descent dual variables

    q_i = ell'(xi_i) / ell'(psi(xi)).

All exponentials are accumulated in the log domain so that strongly
separable data (margins of order 1e4 and beyond) never overflow.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import (
    DomainError,
    InvalidConfigurationError,
    InvalidDatasetError,
    InvalidParameterError,
    LossOverflowError,
)

EXP = "exp"
LOGISTIC = "logistic"
POLY = "poly"

EQUAL_ASSIGNMENT = "equal_assignment"
SIMPLEX = "simplex"

ADABOOST = "adaboost"
CROSS_ENTROPY = "cross_entropy"

# h(q) diverges at q -> 0+ for polynomial losses; solver iterates can graze zero.
_H_CLAMP = 1e-12

# Curvature-ratio estimation grid for ell'' <= c * ell'.
_C_GRID_LO, _C_GRID_HI, _C_GRID_POINTS = -50.0, 5.0, 100_000


def _softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + exp(x)), stable on both tails."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, x + np.log1p(np.exp(-np.abs(x))), np.log1p(np.exp(np.minimum(x, 0.0))))


def _expit(x: np.ndarray) -> np.ndarray:
    """1 / (1 + exp(-x)) without overflow."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    return -_softplus(-np.asarray(x, dtype=np.float64))


def _logsumexp(a: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    mx = np.max(a)
    if not np.isfinite(mx):
        return float(mx)
    return float(mx + np.log(np.exp(a - mx).sum()))


@dataclass(frozen=True)
class LossSpec:
    """One loss family instance; immutable and safe to share across workers.

    ``m`` is only meaningful for the polynomial kind.
    """

    kind: str
    m: Optional[float] = None

    # -- pointwise evaluators ------------------------------------------------

    def ell(self, z):
        z = np.asarray(z, dtype=np.float64)
        if self.kind == EXP:
            return np.exp(z)
        if self.kind == LOGISTIC:
            return _softplus(z)
        m = self.m
        zn = np.minimum(z, 0.0)
        zp = np.maximum(z, 0.0)
        return np.where(z <= 0, (1.0 - zn) ** (-m), 2.0 * m * zp + (1.0 + zp) ** (-m))

    def ell_prime(self, z):
        z = np.asarray(z, dtype=np.float64)
        if self.kind == EXP:
            return np.exp(z)
        if self.kind == LOGISTIC:
            return _expit(z)
        m = self.m
        zn = np.minimum(z, 0.0)
        zp = np.maximum(z, 0.0)
        return np.where(z <= 0, m * (1.0 - zn) ** (-(m + 1.0)),
                        2.0 * m - m * (1.0 + zp) ** (-(m + 1.0)))

    def ell_double_prime(self, z):
        z = np.asarray(z, dtype=np.float64)
        if self.kind == EXP:
            return np.exp(z)
        if self.kind == LOGISTIC:
            s = _expit(z)
            return s * (1.0 - s)
        m = self.m
        return m * (m + 1.0) * (1.0 + np.abs(z)) ** (-(m + 2.0))

    def log_ell(self, z):
        """log(ell(z)); exact on the separable tail z -> -inf."""
        z = np.asarray(z, dtype=np.float64)
        if self.kind == EXP:
            return z
        if self.kind == LOGISTIC:
            # ln softplus(z): below -37 softplus(z) == e^z to double precision
            sp = _softplus(z)
            return np.where(z < -37.0, z, np.log(np.maximum(sp, np.finfo(float).tiny)))
        m = self.m
        zn = np.minimum(z, 0.0)
        pos = self.ell(np.maximum(z, 0.0))
        return np.where(z <= 0, -m * np.log1p(-zn), np.log(pos))

    def log_ell_prime(self, z):
        z = np.asarray(z, dtype=np.float64)
        if self.kind == EXP:
            return z
        if self.kind == LOGISTIC:
            return _log_sigmoid(z)
        m = self.m
        zn = np.minimum(z, 0.0)
        zp = np.maximum(z, 0.0)
        return np.where(z <= 0, math.log(m) - (m + 1.0) * np.log1p(-zn),
                        np.log(2.0 * m - m * (1.0 + zp) ** (-(m + 1.0))))

    # -- inverses ------------------------------------------------------------

    def ell_inv(self, s: float) -> float:
        """Inverse of ell on s > 0 (scalar)."""
        s = float(s)
        if not s > 0:
            raise DomainError(f"ell_inv needs s > 0, got {s}")
        if self.kind == EXP:
            return math.log(s)
        if self.kind == LOGISTIC:
            if s > 30.0:
                return s + math.log1p(-math.exp(-s))
            return math.log(math.expm1(s))
        m = self.m
        if s <= 1.0:
            return 1.0 - s ** (-1.0 / m)
        return self._poly_inv_pos(s)

    def _poly_inv_pos(self, s: float) -> float:
        # guarded bisection on the increasing branch 2mz + (1+z)^-m, z > 0
        m = self.m
        lo, hi = 0.0, s / (2.0 * m) + 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if 2.0 * m * mid + (1.0 + mid) ** (-m) < s:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * max(1.0, hi):
                break
        return 0.5 * (lo + hi)

    def ell_inv_from_log(self, log_s: float) -> float:
        """ell^-1(exp(log_s)) without forming exp(log_s) when it would lose accuracy."""
        log_s = float(log_s)
        if self.kind == EXP:
            return log_s
        if self.kind == LOGISTIC:
            if log_s < -37.0:
                return log_s  # ln(e^s - 1) ~= ln(s) for tiny s ... s = e^log_s
            return self.ell_inv(math.exp(log_s))
        m = self.m
        if log_s <= 0.0:
            return 1.0 - math.exp(-log_s / m)
        return self._poly_inv_pos(math.exp(log_s))

    def ell_prime_inv(self, s: float) -> float:
        """Inverse of ell' (scalar)."""
        s = float(s)
        if self.kind == EXP:
            if not s > 0:
                raise DomainError(f"ell' inverse needs s > 0, got {s}")
            return math.log(s)
        if self.kind == LOGISTIC:
            if not 0 < s < 1:
                raise DomainError(f"ell' inverse needs s in (0,1), got {s}")
            return math.log(s) - math.log1p(-s)
        m = self.m
        if not 0 < s < 2.0 * m:
            raise DomainError(f"ell' inverse needs s in (0, 2m), got {s}")
        if s <= m:
            return 1.0 - (m / s) ** (1.0 / (m + 1.0))
        return ((2.0 * m - s) / m) ** (-1.0 / (m + 1.0)) - 1.0

    def log_ell_prime_from_log_loss(self, log_s: float) -> float:
        """log ell'(ell^-1(s)) as a function of log_s = log(s)."""
        log_s = float(log_s)
        if self.kind == EXP:
            return log_s
        if self.kind == LOGISTIC:
            # ell'(ell^-1(s)) = 1 - e^-s
            if log_s < -37.0:
                return log_s
            s = math.exp(min(log_s, 700.0))
            return math.log(-math.expm1(-s)) if s < 700.0 else 0.0
        m = self.m
        if log_s <= 0.0:
            # ell'(ell^-1(s)) = m s^{(m+1)/m}
            return math.log(m) + (m + 1.0) / m * log_s
        psi = self._poly_inv_pos(math.exp(log_s))
        return math.log(2.0 * m - m * (1.0 + psi) ** (-(m + 1.0)))

    # -- tail maps -----------------------------------------------------------

    def g(self, d):
        d = np.asarray(d, dtype=np.float64)
        if self.kind in (EXP, LOGISTIC):
            return d
        return d ** ((self.m + 1.0) / self.m)

    def g_inv(self, z):
        z = np.asarray(z, dtype=np.float64)
        if self.kind in (EXP, LOGISTIC):
            return z
        return z ** (self.m / (self.m + 1.0))

    def h(self, q):
        """(g^-1)'(q); clamps q below 1e-12 because h blows up at 0+."""
        q = np.maximum(np.asarray(q, dtype=np.float64), _H_CLAMP)
        if self.kind in (EXP, LOGISTIC):
            return np.ones_like(q)
        m = self.m
        return (m / (m + 1.0)) * q ** (-1.0 / (m + 1.0))

    def h_prime(self, q):
        q = np.maximum(np.asarray(q, dtype=np.float64), _H_CLAMP)
        if self.kind in (EXP, LOGISTIC):
            return np.zeros_like(q)
        m = self.m
        return -(m / (m + 1.0) ** 2) * q ** (-(m + 2.0) / (m + 1.0))

    def f(self, d):
        d = np.asarray(d, dtype=np.float64)
        if np.any(d <= 0) or np.any(d > 1.0):
            raise DomainError("f is defined on (0, 1]")
        return self.h(d) / d

    def f_inv(self, u):
        u = np.asarray(u, dtype=np.float64)
        if np.any(u <= 0):
            raise DomainError("f^-1 is defined on (0, inf)")
        if self.kind in (EXP, LOGISTIC):
            return 1.0 / u
        m = self.m
        return ((m + 1.0) * u / m) ** (-(m + 1.0) / (m + 2.0))

    # -- misc ----------------------------------------------------------------

    def curvature_ratio_bound(self) -> float:
        """Estimate of sup ell''/ell' over z in [-50, 5] (exact value for exp)."""
        if self.kind == EXP:
            return 1.0
        grid = np.union1d(np.linspace(_C_GRID_LO, _C_GRID_HI, _C_GRID_POINTS), [0.0])
        ratio = self.ell_double_prime(grid) / self.ell_prime(grid)
        return float(np.max(ratio))

    def smoothness_beta(self, setting) -> float:
        return smoothness_bound(self, setting)

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "m": self.m})

    @staticmethod
    def from_json(text: str) -> "LossSpec":
        obj = json.loads(text)
        return make_loss(obj["kind"], obj.get("m"))


def make_loss(kind: str, m: Optional[float] = None) -> LossSpec:
    """Build a LossSpec; polynomial losses need a positive degree m."""
    aliases = {"exp": EXP, "exponential": EXP, "logistic": LOGISTIC, "log": LOGISTIC,
               "poly": POLY, "polynomial": POLY}
    if kind not in aliases:
        raise InvalidParameterError(f"unknown loss kind {kind!r}")
    kind = aliases[kind]
    if kind == POLY:
        if m is None or not float(m) > 0:
            raise InvalidParameterError(f"polynomial loss needs m > 0, got {m}")
        return LossSpec(POLY, float(m))
    return LossSpec(kind, None)


def h_map(loss: LossSpec, q) -> np.ndarray:
    """(g^-1)'(q) on (0, 1]; identically one for exponential-tail losses."""
    q = np.asarray(q, dtype=np.float64)
    if np.any(q <= 0) or np.any(q > 1.0 + 1e-15):
        raise DomainError("h is defined on (0, 1]")
    return loss.h(q)


def _check_finite_losses(log_ell_values: np.ndarray):
    bad = np.nonzero(~np.isfinite(log_ell_values) & (log_ell_values > 0))[0]
    if bad.size:
        raise LossOverflowError(f"loss overflow at index {bad[0]}", int(bad[0]))


def generalized_sum(loss: LossSpec, xi) -> float:
    """ell^-1 of the total loss, accumulated in the log domain."""
    xi = np.asarray(xi, dtype=np.float64)
    if xi.size < 1:
        raise InvalidParameterError("generalized_sum needs at least one entry")
    logs = loss.log_ell(xi)
    _check_finite_losses(logs)
    return loss.ell_inv_from_log(_logsumexp(logs))


def dual_map(loss: LossSpec, p) -> np.ndarray:
    """Gradient of the generalized sum; every entry lies in (0, 1]."""
    p = np.asarray(p, dtype=np.float64)
    logs = loss.log_ell(p)
    _check_finite_losses(logs)
    log_total = _logsumexp(logs)
    log_lp_psi = loss.log_ell_prime_from_log_loss(log_total)
    return np.exp(loss.log_ell_prime(p) - log_lp_psi)


# ---------------------------------------------------------------------------
# multiclass encodings and generalized sums
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MulticlassEncoding:
    """Per-class signed label vectors c_k for labels in {1, ..., K}.

    ``equal_assignment`` uses entries +-1; ``simplex`` uses (K-1)/K for the
    true class and -1/K otherwise, so the K vectors sum to zero per example.
    """

    K: int
    scheme: str
    labels: np.ndarray  # shape (n,), values in 1..K
    c: np.ndarray       # shape (K, n)

    @property
    def n(self) -> int:
        return int(self.labels.size)

    def c_inv(self) -> np.ndarray:
        return 1.0 / self.c

    @property
    def alpha_coeff(self) -> float:
        return 1.0 if self.scheme == EQUAL_ASSIGNMENT else (self.K - 1.0) / self.K


def build_encoding(labels, scheme: str, K: int) -> MulticlassEncoding:
    """Encode labels (values in 1..K) under the scheme.

    Purely structural; dataset-level validation (every class present) lives
    with the data generators.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if K < 2:
        raise InvalidConfigurationError(f"multiclass needs K >= 2, got {K}")
    if scheme not in (EQUAL_ASSIGNMENT, SIMPLEX):
        raise InvalidParameterError(f"unknown encoding scheme {scheme!r}")
    if labels.min(initial=K) < 1 or labels.max(initial=1) > K:
        raise InvalidDatasetError("labels must lie in {1, ..., K}")
    if scheme == EQUAL_ASSIGNMENT:
        a, b = 1.0, 1.0
    else:
        a, b = (K - 1.0) / K, 1.0 / K
    ks = np.arange(1, K + 1)[:, None]
    c = np.where(ks == labels[None, :], a, -b)
    return MulticlassEncoding(K=K, scheme=scheme, labels=labels, c=c)


def _ce_log_losses(encoding: MulticlassEncoding, Xi: np.ndarray):
    """Per-example b_i = ln(sum_{k != y_i} exp(a_ki)) for the cross-entropy sum.

    a_ki = c_{y_i,i} xi_{y_i,i} - c_{k,i} xi_{k,i}; the per-example loss is
    ln(1 + e^{b_i}) = softplus(b_i).
    """
    K, n = encoding.K, encoding.n
    y0 = encoding.labels - 1
    cx = encoding.c * Xi
    base = cx[y0, np.arange(n)]
    a = base[None, :] - cx
    a[y0, np.arange(n)] = -np.inf  # exclude the true class
    mx = a.max(axis=0)
    b = mx + np.log(np.exp(a - mx[None, :]).sum(axis=0))
    return a, b


def multiclass_generalized_sum(loss: LossSpec, encoding: MulticlassEncoding,
                               Xi, formulation: str) -> float:
    """Generalized sum for the joint multiclass margin matrix Xi (K x n)."""
    Xi = np.asarray(Xi, dtype=np.float64)
    if Xi.shape != (encoding.K, encoding.n):
        raise InvalidParameterError(f"Xi must be (K, n) = {(encoding.K, encoding.n)}")
    if formulation == ADABOOST:
        if encoding.scheme != EQUAL_ASSIGNMENT:
            raise InvalidConfigurationError("adaboost formulation needs equal-assignment encoding")
        return generalized_sum(loss, Xi.sum(axis=0))
    if formulation == CROSS_ENTROPY:
        if encoding.scheme != SIMPLEX or loss.kind != LOGISTIC:
            raise InvalidConfigurationError("cross-entropy needs simplex encoding and logistic loss")
        _, b = _ce_log_losses(encoding, Xi)
        per_example = _softplus(b)
        _check_finite_losses(per_example)
        # log of the total, switching to e^b for deeply negative b
        log_li = np.where(b < -37.0, b, np.log(np.maximum(per_example, np.finfo(float).tiny)))
        return loss.ell_inv_from_log(_logsumexp(log_li))
    raise InvalidConfigurationError(f"unknown formulation {formulation!r}")


def multiclass_dual_map(loss: LossSpec, encoding: MulticlassEncoding,
                        Xi, formulation: str) -> np.ndarray:
    """Gradient of the multiclass generalized sum, as a (K, n) matrix."""
    Xi = np.asarray(Xi, dtype=np.float64)
    K, n = encoding.K, encoding.n
    if formulation == ADABOOST:
        if encoding.scheme != EQUAL_ASSIGNMENT:
            raise InvalidConfigurationError("adaboost formulation needs equal-assignment encoding")
        row = dual_map(loss, Xi.sum(axis=0))
        return np.tile(row, (K, 1))
    if formulation != CROSS_ENTROPY:
        raise InvalidConfigurationError(f"unknown formulation {formulation!r}")
    if encoding.scheme != SIMPLEX or loss.kind != LOGISTIC:
        raise InvalidConfigurationError("cross-entropy needs simplex encoding and logistic loss")
    y0 = encoding.labels - 1
    a, b = _ce_log_losses(encoding, Xi)
    li = _softplus(b)
    log_li = np.where(b < -37.0, b, np.log(np.maximum(li, np.finfo(float).tiny)))
    log_total = _logsumexp(log_li)
    log_lp_psi = loss.log_ell_prime_from_log_loss(log_total)
    # off-class entries: -c_ki * exp(a_ki - L_i) / ell'(psi)
    Q = -encoding.c * np.exp(a - li[None, :] - log_lp_psi)
    # true-class entries: c_yi * (1 - e^{-L_i}) / ell'(psi)
    log_num = np.where(b < -37.0, b, np.log(np.maximum(-np.expm1(-li), np.finfo(float).tiny)))
    Q[y0, np.arange(n)] = encoding.c[y0, np.arange(n)] * np.exp(log_num - log_lp_psi)
    return Q


# ---------------------------------------------------------------------------
# smoothness of the generalized sum (step-size caps)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Binary:
    n: int


@dataclass(frozen=True)
class MulticlassGeneral:
    n: int
    K: int


@dataclass(frozen=True)
class MulticlassCE:
    K: int


SmoothnessSetting = Union[Binary, MulticlassGeneral, MulticlassCE]


def smoothness_bound(loss: LossSpec, setting: SmoothnessSetting) -> float:
    """Smoothness constant of the generalized sum w.r.t. the max norm.

    Exponential losses admit the closed value K^2 (1 in the binary case) and
    cross-entropy 2K^2; other losses fall back to c*n*K^2 with c the grid
    estimate of sup ell''/ell'.
    """
    if isinstance(setting, MulticlassCE):
        if loss.kind != LOGISTIC:
            raise InvalidConfigurationError("the cross-entropy bound applies to the logistic loss")
        return 2.0 * setting.K ** 2
    if isinstance(setting, Binary):
        n, K = setting.n, 1
    elif isinstance(setting, MulticlassGeneral):
        n, K = setting.n, setting.K
    else:
        raise InvalidParameterError(f"unknown smoothness setting {setting!r}")
    if loss.kind == EXP:
        return float(K ** 2)
    return loss.curvature_ratio_bound() * n * K ** 2


def smoothness_is_estimated(loss: LossSpec, setting: SmoothnessSetting) -> bool:
    """True when the bound comes from the numeric curvature-ratio estimate."""
    if isinstance(setting, MulticlassCE):
        return False
    return loss.kind != EXP
