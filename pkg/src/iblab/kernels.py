"""Jitted inner loops for gradient descent in margin space.

With zero (or folded-in) initialization, gradient descent on the weights is
equivalent to the margin-space recursion

    q_t = dual(p_t),   s_{t+1} = s_t + eta_hat q_t,   p_{t+1} = p_t - eta_hat A q_t,

where A is the label-signed Gram matrix; the weights are recovered as
w_t = w_0 + X^T diag(y) s_t.  Everything loss-related is evaluated in the
log domain so margins of any magnitude stay finite.

Chunk status codes: 0 = chunk exhausted, 1 = risk target reached,
2 = stalled (no total-loss decrease for `stall_limit` steps), 3 = overflow.
"""

import numpy as np
from numba import njit

KIND_EXP = 0
KIND_LOGISTIC = 1
KIND_POLY = 2

STATUS_RUNNING = 0
STATUS_RISK = 1
STATUS_STALLED = 2
STATUS_OVERFLOW = 3


@njit(cache=True)
def _poly_psi_pos(L, m):
    """Root of 2 m z + (1+z)^-m = L on z > 0 (bisection)."""
    lo = 0.0
    hi = L / (2.0 * m) + 1.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if 2.0 * m * mid + (1.0 + mid) ** (-m) < L:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@njit(cache=True)
def binary_chunk(A, lnw, p, s, q, kind, m, eta_hat, steps,
                 log_risk_target, stall_limit, state):
    """Run up to `steps` iterations in place; state = [logL_prev, stall].

    Returns (steps_done, logL, status)."""
    n = p.shape[0]
    logL_prev = state[0]
    stall = state[1]
    logL = logL_prev
    done = 0
    status = STATUS_RUNNING
    lli = np.empty(n)
    for _ in range(steps):
        # per-example log losses
        mx = -1.0e308
        for i in range(n):
            z = p[i]
            if kind == KIND_EXP:
                v = z
            elif kind == KIND_LOGISTIC:
                if z < -37.0:
                    v = z
                elif z > 37.0:
                    v = np.log(z)
                else:
                    v = np.log(np.log1p(np.exp(z)))
            else:
                if z <= 0.0:
                    v = -m * np.log1p(-z)
                else:
                    v = np.log(2.0 * m * z + (1.0 + z) ** (-m))
            v += lnw[i]
            lli[i] = v
            if v > mx:
                mx = v
        if not np.isfinite(mx):
            status = STATUS_OVERFLOW
            break
        acc = 0.0
        for i in range(n):
            acc += np.exp(lli[i] - mx)
        logL = mx + np.log(acc)
        if logL <= log_risk_target:
            status = STATUS_RISK
            break
        if logL >= logL_prev:
            stall += 1
            if stall >= stall_limit:
                status = STATUS_STALLED
                break
        else:
            stall = 0
        logL_prev = logL
        # log ell'(psi)
        if kind == KIND_EXP:
            log_lp_psi = logL
        elif kind == KIND_LOGISTIC:
            if logL < -37.0:
                log_lp_psi = logL
            elif logL > 6.0:   # 1 - e^-L indistinguishable from 1 beyond ~e^6
                log_lp_psi = 0.0
            else:
                log_lp_psi = np.log(-np.expm1(-np.exp(logL)))
        else:
            if logL <= 0.0:
                log_lp_psi = np.log(m) + (m + 1.0) / m * logL
            else:
                psi = _poly_psi_pos(np.exp(logL), m)
                log_lp_psi = np.log(2.0 * m - m * (1.0 + psi) ** (-(m + 1.0)))
        # dual and update
        for i in range(n):
            z = p[i]
            if kind == KIND_EXP:
                lpz = z
            elif kind == KIND_LOGISTIC:
                lpz = -np.log1p(np.exp(-z)) if z > -37.0 else z
            else:
                if z <= 0.0:
                    lpz = np.log(m) - (m + 1.0) * np.log1p(-z)
                else:
                    lpz = np.log(2.0 * m - m * (1.0 + z) ** (-(m + 1.0)))
            q[i] = np.exp(lpz + lnw[i] - log_lp_psi)
        for i in range(n):
            s[i] += eta_hat * q[i]
        pa = A @ q
        for i in range(n):
            p[i] -= eta_hat * pa[i]
        done += 1
    state[0] = logL_prev
    state[1] = stall
    return done, logL, status


@njit(cache=True)
def ce_chunk(Acls, c, y0, P, S, Q, eta_hat, steps,
             log_risk_target, stall_limit, state):
    """Cross-entropy multiclass chunk; P, S, Q are (K, n), y0 is 0-based.

    Acls[k] = diag(1/c_k) G diag(1/c_k).  Returns (steps_done, logL, status).
    """
    K, n = P.shape
    logL_prev = state[0]
    stall = state[1]
    logL = logL_prev
    done = 0
    status = STATUS_RUNNING
    b = np.empty(n)
    lli = np.empty(n)
    for _ in range(steps):
        for i in range(n):
            yi = y0[i]
            base = c[yi, i] * P[yi, i]
            mx = -1.0e308
            for k in range(K):
                if k != yi:
                    a = base - c[k, i] * P[k, i]
                    if a > mx:
                        mx = a
            acc = 0.0
            for k in range(K):
                if k != yi:
                    acc += np.exp(base - c[k, i] * P[k, i] - mx)
            b[i] = mx + np.log(acc)
            if b[i] < -37.0:
                lli[i] = b[i]
            elif b[i] > 37.0:
                lli[i] = np.log(b[i])
            else:
                lli[i] = np.log(np.log1p(np.exp(b[i])))
        mxL = -1.0e308
        for i in range(n):
            if lli[i] > mxL:
                mxL = lli[i]
        if not np.isfinite(mxL):
            status = STATUS_OVERFLOW
            break
        acc = 0.0
        for i in range(n):
            acc += np.exp(lli[i] - mxL)
        logL = mxL + np.log(acc)
        if logL <= log_risk_target:
            status = STATUS_RISK
            break
        if logL >= logL_prev:
            stall += 1
            if stall >= stall_limit:
                status = STATUS_STALLED
                break
        else:
            stall = 0
        logL_prev = logL
        if logL < -37.0:
            log_lp_psi = logL
        elif logL > 6.0:
            log_lp_psi = 0.0
        else:
            log_lp_psi = np.log(-np.expm1(-np.exp(logL)))
        for i in range(n):
            yi = y0[i]
            Li = np.exp(lli[i]) if lli[i] > -707.0 else 0.0
            if lli[i] < -37.0:
                Q[yi, i] = c[yi, i] * np.exp(lli[i] - log_lp_psi)
            else:
                Q[yi, i] = c[yi, i] * (-np.expm1(-Li)) * np.exp(-log_lp_psi)
            base = c[yi, i] * P[yi, i]
            for k in range(K):
                if k != yi:
                    a = base - c[k, i] * P[k, i]
                    Q[k, i] = -c[k, i] * np.exp(a - Li - log_lp_psi)
        for k in range(K):
            Sk = S[k]
            Qk = Q[k]
            for i in range(n):
                Sk[i] += eta_hat * Qk[i]
            pa = Acls[k] @ Qk
            Pk = P[k]
            for i in range(n):
                Pk[i] -= eta_hat * pa[i]
        done += 1
    state[0] = logL_prev
    state[1] = stall
    return done, logL, status
