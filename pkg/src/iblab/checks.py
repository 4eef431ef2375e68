"""Invariant verification suite.

Every check is a named, seeded, self-contained function returning a
CheckResult; the CLI `verify` subcommand runs a suite and fails the process
when any check fails.  The acceptance tests reuse these functions directly,
so the suite is the single source of truth for the package's invariants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from .data import (
    effective_dims,
    encode_multiclass,
    gen_diagonal_gram,
    gen_orthogonal,
    gen_subgaussian,
)
from .dual import primal_from_dual, solve_relaxed
from .errors import IblabError
from .interpolation import (
    direction_distance,
    eps_alpha,
    gram_summary,
    mni,
    svp_check,
    unit,
)
from .losses import (
    ADABOOST,
    CROSS_ENTROPY,
    EQUAL_ASSIGNMENT,
    SIMPLEX,
    Binary,
    MulticlassCE,
    MulticlassGeneral,
    build_encoding,
    dual_map,
    generalized_sum,
    h_map,
    make_loss,
    multiclass_generalized_sum,
    smoothness_bound,
)
from .train import (
    StopRule,
    binary_risk,
    binary_risk_grad,
    multiclass_risk,
    multiclass_risk_grad,
    train_binary,
)

LOSSES = [make_loss("exp"), make_loss("logistic"), make_loss("poly", 0.5),
          make_loss("poly", 1.0), make_loss("poly", 2.0)]


@dataclass(frozen=True)
class CheckResult:
    name: str
    module: str
    passed: bool
    detail: str


_REGISTRY: Dict[str, List] = {}


def check(module: str, name: str):
    def deco(fn: Callable[[], tuple]):
        _REGISTRY.setdefault(module, []).append((name, fn))
        return fn
    return deco


def run_suite(suite: str = "all") -> List[CheckResult]:
    modules = list(_REGISTRY) if suite == "all" else [suite]
    results = []
    for module in modules:
        if module not in _REGISTRY:
            raise KeyError(f"unknown suite {module!r}; choose from {sorted(_REGISTRY)} or 'all'")
        for name, fn in _REGISTRY[module]:
            try:
                passed, detail = fn()
            except IblabError as exc:
                passed, detail = False, f"raised {type(exc).__name__}: {exc}"
            results.append(CheckResult(name=name, module=module, passed=bool(passed),
                                       detail=detail))
    return results


def _loss_name(loss):
    return loss.kind if loss.m is None else f"{loss.kind}(m={loss.m:g})"


# ---------------------------------------------------------------------------
# loss_kernel
# ---------------------------------------------------------------------------


@check("loss_kernel", "positivity-and-left-tail")
def _check_positivity():
    rng = np.random.default_rng(0)
    z = rng.uniform(-40, 3, size=200)
    for loss in LOSSES:
        if not (np.all(loss.ell(z) > 0) and np.all(loss.ell_prime(z) > 0)
                and np.all(loss.ell_double_prime(z) > 0)):
            return False, f"non-positive derivative for {_loss_name(loss)}"
        # vanishing left tail; z = -50 suffices for exponential-family tails,
        # a polynomial tail of degree m needs depth ~ 10^(6.5/m) to cross 1e-6
        depth = -50.0 if loss.kind != "poly" else 1.0 - 10.0 ** (6.5 / loss.m)
        tail = float(loss.ell(np.array([depth]))[0])
        if tail >= 1e-6:
            return False, f"{_loss_name(loss)}: ell({depth:.3g}) = {tail:.2e}"
    return True, "positivity on 200 points; left tail below 1e-6 for all kinds"


@check("loss_kernel", "g-shape")
def _check_g_shape():
    rng = np.random.default_rng(1)
    for loss in LOSSES:
        if abs(float(loss.g(0.0))) > 0 or abs(float(loss.g(1.0)) - 1.0) > 0:
            return False, f"{_loss_name(loss)}: g endpoint values off"
        d = np.sort(rng.uniform(0, 1, size=(500, 2)), axis=1)
        d1, d2 = d[:, 0], d[:, 1] + 1e-9
        if not np.all(loss.g(d2) - loss.g(d1) > 0):
            return False, f"{_loss_name(loss)}: g not strictly increasing"
        mid = loss.g(0.5 * (d1 + d2))
        if not np.all(mid <= 0.5 * (loss.g(d1) + loss.g(d2)) + 1e-15):
            return False, f"{_loss_name(loss)}: midpoint convexity fails"
    return True, "g(0)=0, g(1)=1, increasing, midpoint convex (all kinds)"


@check("loss_kernel", "map-round-trips")
def _check_round_trips():
    rng = np.random.default_rng(2)
    worst = 0.0
    for loss in LOSSES:
        d = rng.uniform(1e-3, 1.0, size=300)
        rt = np.abs(loss.g_inv(loss.g(d)) / d - 1.0)
        u = loss.f(d)
        rt2 = np.abs(loss.f_inv(u) / d - 1.0)
        worst = max(worst, float(rt.max()), float(rt2.max()))
        dd = np.sort(rng.uniform(1e-3, 1.0, size=(200, 2)), axis=1)
        if not np.all(loss.f(dd[:, 0]) >= loss.f(dd[:, 1] + 1e-9)):
            return False, f"{_loss_name(loss)}: f not decreasing"
    return worst <= 1e-10, f"worst relative round-trip error {worst:.2e}"


@check("loss_kernel", "h-finite-difference")
def _check_h_fd():
    qs = np.linspace(0.05, 0.95, 37)
    eps = 1e-6
    worst = 0.0
    for loss in LOSSES:
        fd = (loss.g_inv(qs + eps) - loss.g_inv(qs - eps)) / (2 * eps)
        worst = max(worst, float(np.max(np.abs(h_map(loss, qs) - fd))))
    return worst <= 1e-6, f"worst |h - fd(g_inv')| = {worst:.2e}"


@check("loss_kernel", "dual-range")
def _check_dual_range():
    rng = np.random.default_rng(3)
    for loss in LOSSES:
        for _ in range(50):
            p = rng.uniform(-30, 2, size=rng.integers(1, 12))
            q = dual_map(loss, p)
            if not (np.all(q > 0) and np.all(q <= 1.0 + 1e-12)):
                return False, f"{_loss_name(loss)}: dual entry outside (0,1] for p={p}"
    return True, "dual entries in (0, 1] on 250 random points"


@check("loss_kernel", "dual-limit")
def _check_dual_limit():
    rng = np.random.default_rng(4)
    worst = 0.0
    for loss in LOSSES:
        for _ in range(20):
            alpha = rng.dirichlet(np.ones(rng.integers(2, 8)))
            alpha = np.clip(alpha, 1e-3, None)
            alpha /= alpha.sum()
            p = np.array([loss.ell_inv(1e-8 * a) for a in alpha])
            err = float(np.max(np.abs(dual_map(loss, p) - loss.g(alpha))))
            worst = max(worst, err)
    return worst <= 1e-4, f"worst |dual - g(alpha)| = {worst:.2e} at loss scale 1e-8"


@check("loss_kernel", "sigma-superadditive")
def _check_sigma():
    rng = np.random.default_rng(5)
    for loss in LOSSES:
        ell0 = float(loss.ell(np.array([0.0]))[0])
        a = rng.uniform(0, ell0, size=10_000)
        b = rng.uniform(0, ell0 - a)
        a, b = np.clip(a, 1e-12, None), np.clip(b, 1e-12, None)

        def sigma(s):
            return np.array([np.exp(loss.log_ell_prime_from_log_loss(np.log(v)))
                             * loss.ell_inv(v) for v in s])

        lhs = sigma(a) + sigma(b)
        rhs = sigma(a + b)
        if not np.all(lhs <= rhs + 1e-10 * np.maximum(1.0, np.abs(rhs))):
            bad = np.argmax(lhs - rhs)
            return False, f"{_loss_name(loss)}: sigma({a[bad]:.3g})+sigma({b[bad]:.3g}) > sigma(sum)"
    return True, "sigma(a)+sigma(b) <= sigma(a+b) on 1e4 pairs per loss"


def _second_difference(fn, x, v, h):
    return (fn(x + h * v) - 2.0 * fn(x) + fn(x - h * v)) / h ** 2


@check("loss_kernel", "psi-line-convexity")
def _check_psi_convex():
    rng = np.random.default_rng(6)
    n, K = 6, 3
    enc = build_encoding(rng.integers(1, K + 1, size=n), EQUAL_ASSIGNMENT, K)
    enc_s = build_encoding(enc.labels, SIMPLEX, K)
    for loss in LOSSES:
        for _ in range(1000 // len(LOSSES)):
            xi = rng.uniform(-8, 1, size=n)
            v = rng.standard_normal(n)
            sd = _second_difference(lambda x: generalized_sum(loss, x), xi, v, 1e-4)
            if sd < -1e-8:
                return False, f"{_loss_name(loss)}: binary curvature {sd:.2e} < 0"
            Xi = rng.uniform(-4, 0.5, size=(K, n))
            V = rng.standard_normal((K, n))
            sd = _second_difference(
                lambda M: multiclass_generalized_sum(loss, enc, M, ADABOOST), Xi, V, 1e-4)
            if sd < -1e-8:
                return False, f"{_loss_name(loss)}: joint curvature {sd:.2e} < 0"
    logistic = make_loss("logistic")
    for _ in range(200):
        Xi = rng.uniform(-4, 0.5, size=(K, n))
        k = rng.integers(0, K)
        V = np.zeros((K, n))
        V[k] = rng.standard_normal(n)
        sd = _second_difference(
            lambda M: multiclass_generalized_sum(logistic, enc_s, M, CROSS_ENTROPY), Xi, V, 1e-4)
        if sd < -1e-8:
            return False, f"cross-entropy per-class curvature {sd:.2e} < 0"
    return True, "second differences >= -1e-8 (binary, joint, per-class)"


@check("loss_kernel", "psi-smoothness")
def _check_psi_smooth():
    rng = np.random.default_rng(7)
    n, K = 5, 3
    enc = build_encoding(rng.integers(1, K + 1, size=n), EQUAL_ASSIGNMENT, K)
    enc_s = build_encoding(enc.labels, SIMPLEX, K)
    worst = 0.0
    for loss in LOSSES:
        beta_b = smoothness_bound(loss, Binary(n))
        beta_m = smoothness_bound(loss, MulticlassGeneral(n, K))
        for _ in range(1000 // len(LOSSES)):
            xi = rng.uniform(-6, 0.5, size=n)
            v = rng.standard_normal(n)
            sd = _second_difference(lambda x: generalized_sum(loss, x), xi, v, 1e-4)
            ratio = sd / (beta_b * np.max(np.abs(v)) ** 2)
            worst = max(worst, ratio)
            Xi = rng.uniform(-4, 0.5, size=(K, n))
            V = rng.standard_normal((K, n))
            sd = _second_difference(
                lambda M: multiclass_generalized_sum(loss, enc, M, ADABOOST), Xi, V, 1e-4)
            worst = max(worst, sd / (beta_m * np.max(np.abs(V)) ** 2))
    logistic = make_loss("logistic")
    beta_ce = smoothness_bound(logistic, MulticlassCE(K))
    for _ in range(200):
        Xi = rng.uniform(-4, 0.5, size=(K, n))
        V = rng.standard_normal((K, n))
        sd = _second_difference(
            lambda M: multiclass_generalized_sum(logistic, enc_s, M, CROSS_ENTROPY), Xi, V, 1e-4)
        worst = max(worst, sd / (beta_ce * np.max(np.abs(V)) ** 2))
    return worst <= 1.01, f"max curvature / bound = {worst:.4f} (limit 1.01)"


@check("loss_kernel", "g-limit-consistency")
def _check_g_limit():
    worst = 0.0
    a = 1e-8
    for loss in LOSSES:
        for b in (1.0, 2.0, 10.0):
            num = np.exp(loss.log_ell_prime_from_log_loss(np.log(a)))
            den = np.exp(loss.log_ell_prime_from_log_loss(np.log(a * b)))
            worst = max(worst, abs(num / den - float(loss.g(1.0 / b))))
    return worst <= 1e-4, f"worst |ratio - g(1/b)| = {worst:.2e}"


# ---------------------------------------------------------------------------
# data_forge
# ---------------------------------------------------------------------------


@check("data_forge", "determinism")
def _check_determinism():
    a = gen_subgaussian(8, 32, 1.0, seed=123)
    b = gen_subgaussian(8, 32, 1.0, seed=123)
    same = np.array_equal(a.X, b.X) and np.array_equal(a.labels, b.labels)
    c = gen_orthogonal(5, 9, 0.5, seed=7)
    d = gen_orthogonal(5, 9, 0.5, seed=7)
    same = same and np.array_equal(c.X, d.X)
    return same, "identical params+seed give bit-identical datasets"


@check("data_forge", "gram-construction-tolerance")
def _check_gram_tol():
    rng = np.random.default_rng(8)
    worst = 0.0
    for trial in range(100):
        n = int(rng.integers(1, 12))
        d = n + int(rng.integers(0, 12))
        if rng.random() < 0.5:
            alpha = float(rng.uniform(0.05, 1.0))
            ds = gen_orthogonal(n, d, alpha, seed=trial)
            dev = np.max(np.abs(ds.gram() - alpha * np.eye(n))) / alpha
        else:
            dvec = rng.uniform(0.05, 1.0, size=n)
            ds = gen_diagonal_gram(n, d, dvec, seed=trial)
            dev = np.max(np.abs(ds.gram() - np.diag(dvec))) / dvec.max()
        worst = max(worst, float(dev))
    return worst <= 1e-10, f"worst relative Gram deviation {worst:.2e} over 100 draws"


@check("data_forge", "subgaussian-concentration")
def _check_concentration():
    n = 50
    hits = {16: 0, 64: 0}
    for mult in hits:
        for seed in range(20):
            ds = gen_subgaussian(n, mult * n, 1.0, seed=seed)
            if gram_summary(ds.X).ratio <= 1.0 / 3.0:
                hits[mult] += 1
    return hits[64] >= 19, (f"1/3-deviation fraction: {hits[16]}/20 at d=16n, "
                            f"{hits[64]}/20 at d=64n (>= 0.95 required at 64n)")


@check("data_forge", "effective-dims")
def _check_eff_dims():
    rng = np.random.default_rng(9)
    ed = effective_dims(np.ones(16))
    if not (ed.d2 == 16 and ed.d_inf == 16):
        return False, "flat spectrum should give (d, d)"
    for _ in range(200):
        d = int(rng.integers(1, 40))
        lam = rng.uniform(0, 1, size=d)
        lam[rng.integers(0, d)] = 1.0
        ed = effective_dims(lam)
        if not (1.0 - 1e-12 <= ed.d2 <= d + 1e-9 and 1.0 - 1e-12 <= ed.d_inf <= d + 1e-9):
            return False, f"effective dims out of [1, d] for lam={lam}"
        if ed.d2 > ed.d_inf ** 2 + 1e-9:
            return False, "d2 exceeded d_inf^2"
    return True, "bounds 1 <= d2 <= d, 1 <= d_inf <= d, d2 <= d_inf^2 hold"


# ---------------------------------------------------------------------------
# interpolators
# ---------------------------------------------------------------------------


@check("interpolators", "mni-optimality")
def _check_mni_opt():
    rng = np.random.default_rng(10)
    for _ in range(50):
        n, d = int(rng.integers(2, 8)), int(rng.integers(8, 16))
        X = rng.standard_normal((n, d)) / np.sqrt(d)
        y = np.sign(rng.standard_normal(n))
        y[y == 0] = 1.0
        w = mni(X, y)
        # any null-space move keeps interpolation but cannot shrink the norm
        z = rng.standard_normal(d)
        null = z - X.T @ np.linalg.solve(X @ X.T, X @ z)
        if np.linalg.norm(w) > np.linalg.norm(w + 0.1 * null) + 1e-10:
            return False, "null-space perturbation reduced the norm"
    return True, "least-norm property against 50 random feasible perturbations"


@check("interpolators", "eps-alpha-dominated")
def _check_eps_dom():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(2, 10))
        M = rng.standard_normal((n, n))
        G = M @ M.T / n
        summ = gram_summary(np.linalg.cholesky(G + 1e-9 * np.eye(n)))
        v = rng.standard_normal(n)
        if eps_alpha(summ.G, summ.alpha, v) > summ.eps + 1e-9:
            return False, "eps_alpha exceeded the operator norm"
    return True, "eps_alpha(G, alpha, v) <= ||G - alpha I|| on 100 draws"


# ---------------------------------------------------------------------------
# dual_solver
# ---------------------------------------------------------------------------


@check("dual_solver", "chebyshev-sum")
def _check_chebyshev():
    rng = np.random.default_rng(12)
    for loss in LOSSES:
        q = rng.uniform(1e-6, 1.0, size=(10_000, 8))
        hq = loss.h(q)
        lhs = np.sqrt(q.shape[1]) * np.sum(hq * q, axis=1)
        rhs = q.sum(axis=1) * np.linalg.norm(hq, axis=1)
        if not np.all(lhs <= rhs * (1 + 1e-12)):
            return False, f"{_loss_name(loss)}: Chebyshev-sum inequality fails"
    return True, "sqrt(n) sum h(q) q <= (sum q) ||h(q)|| on 1e4 draws per loss"


def _random_rate_instances(seed, count, n, dmul, losses):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        ds = gen_subgaussian(n, dmul * n, 1.0, seed=int(rng.integers(2 ** 31)))
        loss = losses[i % len(losses)]
        out.append((ds, loss))
    return out


@check("dual_solver", "directional-sandwich")
def _check_sandwich():
    worst = -1.0
    for ds, loss in _random_rate_instances(13, 12, 16, 16, LOSSES):
        y = np.asarray(ds.labels, float)
        sol = solve_relaxed(ds.gram(), y, loss)
        n = y.size
        lhs = np.linalg.norm(unit(sol.q) - np.full(n, n ** -0.5))
        rhs = np.linalg.norm(unit(loss.h(sol.q)) - unit(sol.q))
        worst = max(worst, lhs - rhs)
    return worst <= 1e-8, f"max (dist(q,1) - dist(h(q),q)) = {worst:.2e}"


@check("dual_solver", "dual-and-primal-rate")
def _check_rates():
    for ds, loss in _random_rate_instances(14, 12, 20, 48, LOSSES):
        y = np.asarray(ds.labels, float)
        summ = gram_summary(ds.X)
        if summ.ratio > 1.0 / 3.0:
            continue
        sol = solve_relaxed(summ.G, y, loss)
        n = y.size
        eps_y = eps_alpha(summ.G, summ.alpha, y) / summ.alpha
        dual = np.linalg.norm(unit(sol.q) - np.full(n, n ** -0.5))
        if dual > 2.0 / (1.0 - 2.0 * summ.ratio) * eps_y:
            return False, f"dual rate violated ({_loss_name(loss)})"
        primal = direction_distance(primal_from_dual(ds.X, y, sol.q), mni(ds.X, y))
        if primal > 4.0 * dual + 12.0 * eps_y:
            return False, f"primal rate violated ({_loss_name(loss)})"
    return True, "dual <= 2/(1-2r) eps_a(y)/a and primal <= 4 dual + 12 eps_a(y)/a"


@check("dual_solver", "converse-spread")
def _check_converse():
    rng = np.random.default_rng(15)
    loss = make_loss("poly", 1.0)
    spreads = []
    for _ in range(10):
        n = 6
        ds = gen_subgaussian(n, 8 * n, 1.0, seed=int(rng.integers(2 ** 31)))
        y = np.asarray(ds.labels, float)
        summ = gram_summary(ds.X)
        best_alpha = float(y @ summ.G @ y / (y @ y))
        if eps_alpha(summ.G, best_alpha, y) <= 1e-3 * best_alpha:
            continue  # label vector is (nearly) an eigenvector; skip
        sol = solve_relaxed(summ.G, y, loss)
        spreads.append(float(sol.q.max() - sol.q.min()))
    ok = all(s > 1e-6 for s in spreads) and spreads
    return bool(ok), f"min dual spread {min(spreads):.2e} over {len(spreads)} non-eigenvector draws"


@check("dual_solver", "svp-exponential-reduction")
def _check_svp_reduction():
    rng = np.random.default_rng(16)
    loss = make_loss("exp")
    worst = 0.0
    count = 0
    while count < 20:
        n = int(rng.integers(4, 12))
        ds = gen_subgaussian(n, 6 * n, 1.0, seed=int(rng.integers(2 ** 31)))
        y = np.asarray(ds.labels, float)
        G = ds.gram()
        rep = svp_check(G, y)
        if not rep.holds:
            continue
        sol = solve_relaxed(G, y, loss)
        worst = max(worst, direction_distance(sol.q, y * rep.beta))
        count += 1
    return worst <= 1e-6, f"worst dual direction error vs diag(y) G^-1 y: {worst:.2e}"


# ---------------------------------------------------------------------------
# gd_lab
# ---------------------------------------------------------------------------


@check("gd_lab", "gradient-finite-difference")
def _check_gradients():
    rng = np.random.default_rng(17)
    n, d, K = 5, 7, 3
    X = rng.standard_normal((n, d)) / np.sqrt(d)
    y = np.sign(rng.standard_normal(n))
    y[y == 0] = 1.0
    worst = 0.0
    for loss in LOSSES:
        for _ in range(5):
            w = rng.standard_normal(d) * 0.5
            g = binary_risk_grad(X, y, w, loss)
            fd = np.empty(d)
            for j in range(d):
                e = np.zeros(d)
                e[j] = 1e-6
                fd[j] = (binary_risk(X, y, w + e, loss) - binary_risk(X, y, w - e, loss)) / 2e-6
            worst = max(worst, float(np.max(np.abs(g - fd)) / max(1e-12, np.max(np.abs(g)))))
    labels = rng.integers(1, K + 1, size=n)
    labels[:K] = np.arange(1, K + 1)
    for scheme, formulation, loss in ((EQUAL_ASSIGNMENT, ADABOOST, make_loss("exp")),
                                      (EQUAL_ASSIGNMENT, ADABOOST, make_loss("poly", 1.0)),
                                      (SIMPLEX, CROSS_ENTROPY, make_loss("logistic"))):
        enc = encode_multiclass(labels, scheme, K)
        for _ in range(3):
            W = rng.standard_normal((K, d)) * 0.3
            g = multiclass_risk_grad(X, enc, W, loss, formulation)
            fd = np.empty_like(g)
            for k in range(K):
                for j in range(d):
                    E = np.zeros((K, d))
                    E[k, j] = 1e-6
                    fd[k, j] = (multiclass_risk(X, enc, W + E, loss, formulation)
                                - multiclass_risk(X, enc, W - E, loss, formulation)) / 2e-6
            worst = max(worst, float(np.max(np.abs(g - fd)) / max(1e-12, np.max(np.abs(g)))))
    return worst <= 1e-6, f"worst relative gradient error {worst:.2e}"


@check("gd_lab", "dual-objective-monotone")
def _check_dual_monotone():
    for kind, m in (("exp", None), ("logistic", None), ("poly", 1.0)):
        loss = make_loss(kind, m)
        ds = gen_subgaussian(10, 40, 1.0, seed=21)
        traj = train_binary(ds, loss, stop=StopRule(risk_threshold=1e-8, max_iters=200_000))
        vals = [pt.dual_objective for pt in traj.snapshots]
        if any(b > a * (1 + 1e-12) + 1e-15 for a, b in zip(vals, vals[1:])):
            return False, f"{kind}: dual objective increased across snapshots"
    return True, "dual objective nonincreasing across snapshots (3 losses)"


@check("gd_lab", "risk-monotone")
def _check_risk_monotone():
    for kind, m in (("exp", None), ("logistic", None), ("poly", 1.0)):
        loss = make_loss(kind, m)
        ds = gen_subgaussian(8, 48, 1.0, seed=22)
        traj = train_binary(ds, loss, stop=StopRule(risk_threshold=1e-9, max_iters=100_000))
        lr = [pt.log_risk for pt in traj.snapshots]
        if any(b > a for a, b in zip(lr, lr[1:])):
            return False, f"{kind}: risk increased between snapshots"
        if traj.snapshots[-1].risk > traj.snapshots[0].risk:
            return False, f"{kind}: final risk above initial"
    return True, "risk nonincreasing under the capped normalized step"


@check("gd_lab", "gd-agreement-small")
def _check_gd_agreement():
    # identity Gram: solver and interpolation agree with training for every loss
    ds = gen_orthogonal(8, 24, 1.0, seed=23)
    y = np.asarray(ds.labels, float)
    worst_mni, worst_dual = 0.0, 0.0
    for loss in (make_loss("exp"), make_loss("logistic"), make_loss("poly", 1.0)):
        sol = solve_relaxed(ds.gram(), y, loss)
        ref = primal_from_dual(ds.X, y, sol.q)
        iters = 400_000 if loss.kind == "poly" else 100_000
        traj = train_binary(ds, loss, stop=StopRule(risk_threshold=1e-10, max_iters=iters),
                            dual_reference=ref)
        worst_dual = max(worst_dual, direction_distance(traj.final_q, sol.q),
                         traj.snapshots[-1].dist_dual)
        worst_mni = max(worst_mni, traj.snapshots[-1].dist_mni)
    ok = worst_mni <= 1e-3 and worst_dual <= 1e-2
    return ok, f"identity Gram: dist to interpolation {worst_mni:.1e}, to dual ref {worst_dual:.1e}"


@check("gd_lab", "gd-mni-agreement-all-support")
def _check_gd_mni_svp():
    # exponential loss on an all-points-support design trains to the interpolator
    rng = np.random.default_rng(24)
    loss = make_loss("exp")
    worst = 0.0
    found = 0
    while found < 3:
        n = int(rng.integers(6, 14))
        ds = gen_subgaussian(n, 64 * n, 1.0, seed=int(rng.integers(2 ** 31)))
        y = np.asarray(ds.labels, float)
        if not svp_check(ds.gram(), y).holds:
            continue
        traj = train_binary(ds, loss, stop=StopRule(risk_threshold=0.0,
                                                    max_iters=150_000))
        worst = max(worst, traj.snapshots[-1].dist_mni)
        found += 1
    return worst <= 1e-3, f"worst trained distance to the interpolator {worst:.1e}"


def suites() -> List[str]:
    return sorted(_REGISTRY)
