"""Diagnostic moments, the deviation bound lambda_n(c), and inequality audits.

``B1n(c)`` and ``B2n(c)`` are suprema of third absolute and fourth projected
moments of ``V = J^{-1}(U - E_theta U)`` over unit directions and over the
ball ``||J(theta - theta0)||^2 <= c d / n``. For finite-support families the
expectations are exact sums over the atoms, which makes the lemma audits
conclusive: a reported violation is a bug, not sampling noise.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionTooLarge, PreconditionViolated, UnsupportedMethod
from .linalg import operator_norm, sym_sqrt
from .local import log_Z_tilde

AUDIT_SLACK = 1e-10
MC_DRAWS = 100_000


@dataclass(frozen=True)
class MomentBounds:
    c: float
    b1n_at_0: float
    b2n_at_c: float
    method: str
    direction_budget: int
    shell_budget: int


# ---------------------------------------------------------------------------
# direction suprema


def _unit_rows(rng, m, d):
    A = rng.standard_normal((m, d))
    return A / np.linalg.norm(A, axis=1, keepdims=True)


def _ascend(V, probs, k, a, iters=500):
    # a <- grad f(a) / ||grad f(a)|| never decreases a convex k-homogeneous f on the sphere
    best = -np.inf
    for _ in range(iters):
        t = V @ a
        val = float(probs @ np.abs(t) ** k)
        g = V.T @ (probs * np.abs(t) ** (k - 1) * np.sign(t))
        gn = np.linalg.norm(g)
        if gn == 0 or val <= best * (1 + 1e-13):
            best = max(best, val)
            break
        best = val
        a = g / gn
    return best, a


def _direction_values(V, probs, k, A):
    return (np.abs(V @ A.T) ** k).T @ probs


def sup_direction_moment(V, probs, k, restarts=32, rng=None, polish=8):
    """``sup_{||a||=1} sum_j probs_j |<a, V_j>|^k``.

    Candidate directions (``restarts`` random ones, the principal axes of
    the weighted second moment, and a half-degree grid when ``d == 2``) are
    scored, and normalised gradient ascent runs from the ``polish`` best.
    """
    V = np.atleast_2d(V)
    d = V.shape[1]
    if d == 1:
        return float(probs @ np.abs(V[:, 0]) ** k)
    rng = np.random.default_rng(0) if rng is None else rng
    C = (V * probs[:, None]).T @ V
    starts = [_unit_rows(rng, restarts, d), np.linalg.eigh(C)[1].T]
    if d == 2:
        ang = np.linspace(0.0, np.pi, 361)[:-1]
        starts.append(np.column_stack([np.cos(ang), np.sin(ang)]))
    A = np.vstack(starts)
    vals = _direction_values(V, probs, k, A)
    top = np.argsort(vals)[::-1][:polish]
    return max(float(vals.max()), max(_ascend(V, probs, k, A[i])[0] for i in top))


def _random_search_moment(V, k, n_directions, rng, screen=20_000, keep=16):
    # every direction is scored on a subsample; the best few are rescored on all draws
    d = V.shape[1]
    if d == 1:
        return float(np.mean(np.abs(V[:, 0]) ** k))
    A = _unit_rows(rng, n_directions, d)
    sub = V[:screen]
    scores = np.concatenate([
        (np.abs(sub @ A[lo:lo + 256].T) ** k).mean(axis=0) for lo in range(0, n_directions, 256)
    ])
    best = A[np.argsort(scores)[::-1][:keep]]
    return float((np.abs(V @ best.T) ** k).mean(axis=0).max())


# ---------------------------------------------------------------------------
# theta-ball suprema


def _whitened_atoms(model, frame, theta):
    pts, probs = model.atoms(theta)
    mean = probs @ pts
    return (pts - mean) @ frame.J_inv.T, probs


def _moment_at(model, frame, theta, k, method, direction_budget, rng):
    if method == "exact-enumeration":
        V, probs = _whitened_atoms(model, frame, theta)
        return sup_direction_moment(V, probs, k, direction_budget, rng)
    X = model.sample(theta, MC_DRAWS, rng.integers(2**63))
    V = (X - model.grad(theta)) @ frame.J_inv.T
    return _random_search_moment(V, k, direction_budget, rng)


def _resolve_method(model, method):
    if method == "auto":
        return "exact-enumeration" if model.finite_support else "monte-carlo"
    if method == "exact-enumeration" and not model.finite_support:
        raise UnsupportedMethod("exact enumeration needs a finite-support model")
    if method not in ("exact-enumeration", "monte-carlo"):
        raise UnsupportedMethod(f"unknown method {method!r}")
    return method


def ball_sup_moment(model, frame, n, c, k, method="auto", direction_budget=None,
                    shell_budget=16, seed=0):
    """``sup E_theta |<a, V>|^k`` over unit ``a`` and ``||J(theta-theta0)||^2 <= c d / n``.

    The theta-ball is searched at ``theta0``, at ``shell_budget`` boundary
    points along random directions (plus interior points when ``d <= 2``),
    and the best candidate is polished by a shrinking random local search.
    """
    method = _resolve_method(model, method)
    if direction_budget is None:
        direction_budget = 32 if method == "exact-enumeration" else 4096
    rng = np.random.default_rng(seed)
    d = frame.dim

    def value(v):
        theta = frame.theta0 + frame.J_inv @ v / math.sqrt(n)
        if not model.in_domain(theta):
            return -np.inf
        return _moment_at(model, frame, theta, k, method, direction_budget, rng)

    best_v, best = np.zeros(d), value(np.zeros(d))
    radius = math.sqrt(c * d)
    if radius == 0:
        return best
    if method == "monte-carlo":
        shell_budget = min(shell_budget, 4)
    dirs = _unit_rows(rng, shell_budget, d)
    if d == 1:
        dirs = np.array([[1.0], [-1.0]])
    cands = [radius * u for u in dirs]
    if d <= 2 and method == "exact-enumeration":
        cands += [f * radius * u for u in dirs for f in (0.25, 0.5, 0.75)]
    for v in cands:
        val = value(v)
        if val > best:
            best, best_v = val, v
    if method == "exact-enumeration":
        step = 0.25 * radius
        while step > 1e-4 * radius:
            improved = False
            for u in _unit_rows(rng, 2 * d + 2, d):
                v = best_v + step * u
                nv = np.linalg.norm(v)
                if nv > radius:
                    v *= radius / nv
                val = value(v)
                if val > best:
                    best, best_v, improved = val, v, True
            if not improved:
                step *= 0.5
    return float(best)


def b1n(model, frame, n, c=0.0, method="auto", direction_budget=None, shell_budget=16, seed=0):
    """Third absolute projected moment supremum ``B1n(c)``."""
    return ball_sup_moment(model, frame, n, c, 3, method, direction_budget, shell_budget, seed)


def b2n(model, frame, n, c=0.0, method="auto", direction_budget=None, shell_budget=16, seed=0):
    """Fourth projected moment supremum ``B2n(c)``."""
    return ball_sup_moment(model, frame, n, c, 4, method, direction_budget, shell_budget, seed)


def moment_bounds(model, frame, n, c, method="auto", direction_budget=None, shell_budget=16, seed=0):
    method = _resolve_method(model, method)
    b1 = b1n(model, frame, n, 0.0, method, direction_budget, shell_budget, seed)
    b2 = b2n(model, frame, n, c, method, direction_budget, shell_budget, seed)
    budget = direction_budget or (32 if method == "exact-enumeration" else 4096)
    return MomentBounds(float(c), b1, b2, method, budget, shell_budget)


def lambda_n(b1_at_0, b2_at_c, c, d, n):
    """``(sqrt(c d / n) B1n(0) + (c d / n) B2n(c)) / 6``."""
    r = c * d / n
    return (math.sqrt(r) * b1_at_0 + r * b2_at_c) / 6.0


# ---------------------------------------------------------------------------
# lambda curve and a_n


@dataclass(frozen=True)
class LambdaCurve:
    c_grid: np.ndarray
    lambda_values: np.ndarray
    a_n: float
    d: int
    n: int
    b1n_at_0: float = 0.0
    b2n_values: np.ndarray = field(default=None)


def lambda_curve(model, frame, n, c_grid, c_max=None, method="auto", seed=0, **budgets):
    """``lambda_n`` over an increasing grid of ``c``; ``B2n`` is made monotone.

    Balls are nested in ``c``, so the running maximum of the ``B2n`` estimates
    is still a valid lower estimate of each supremum.
    """
    c_grid = np.asarray(sorted(c_grid), dtype=float)
    b1 = b1n(model, frame, n, 0.0, method, seed=seed, **budgets)
    b2 = np.maximum.accumulate([b2n(model, frame, n, c, method, seed=seed, **budgets) for c in c_grid])
    lam = np.array([lambda_n(b1, b, c, frame.dim, n) for c, b in zip(c_grid, b2)])
    c_max = c_grid[-1] if c_max is None else c_max
    a = a_n_bisect(model, frame, n, c_max, method=method, seed=seed, b1_at_0=b1, **budgets)
    return LambdaCurve(c_grid, lam, a, frame.dim, n, b1, b2)


def a_n_bisect(model, frame, n, c_max, threshold=1 / 16, tol=1e-6, method="auto", seed=0,
               b1_at_0=None, **budgets):
    """Largest ``c <= c_max`` with ``lambda_n(c) <= threshold``; ``inf`` if unconstrained."""
    if c_max <= 0:
        raise ValueError("c_max must be positive")
    d = frame.dim
    b1 = b1n(model, frame, n, 0.0, method, seed=seed, **budgets) if b1_at_0 is None else b1_at_0

    def lam(c):
        return lambda_n(b1, b2n(model, frame, n, c, method, seed=seed, **budgets), c, d, n)

    if lam(c_max) <= threshold:
        return math.inf
    lo, hi = 0.0, float(c_max)
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if lam(mid) <= threshold:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# log-concave moment inequalities


def _rel_se(x):
    m = x.mean()
    return float(x.std(ddof=1) / (math.sqrt(x.size) * m)) if m > 0 else 0.0


def lv_reverse_moment_check(samples, k):
    """Reverse Hoelder check ``E[||X||^k]^{1/k} <= 2k E[||X||^2]^{1/2}``.

    Returns ``(lhs, rhs, holds)``; ``holds`` allows three relative Monte
    Carlo standard errors of slack.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    X = np.asarray(samples, dtype=float)
    r = np.linalg.norm(X.reshape(X.shape[0], -1), axis=1)
    rk, r2 = r**k, r**2
    lhs = float(rk.mean() ** (1.0 / k))
    rhs = float(2 * k * math.sqrt(r2.mean()))
    rel = _rel_se(rk) / k + _rel_se(r2) / 2
    return lhs, rhs, lhs <= rhs * (1 + 3 * rel)


def matrix_map_moment_check(samples, M, k, n_directions=2048, seed=0):
    """``sup_a E|<a, M X>|^k <= ||M||^k sup_a E|<a, X>|^k`` on a sample.

    The inequality holds exactly for the empirical measure. The maximiser
    for the left side is mapped through ``M'`` and seeds the right-side
    search, so the comparison is not undermined by search error.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != X.shape[1]:
        raise ValueError(f"M has {M.shape[1]} columns, samples have {X.shape[1]}")
    rng = np.random.default_rng(seed)
    probs = np.full(X.shape[0], 1.0 / X.shape[0])
    MX = X @ M.T
    count = n_directions // 64 or 1
    left = [_ascend(MX, probs, k, a) for a in _unit_rows(rng, count, M.shape[0])]
    lhs, a_bar = max(left, key=lambda t: t[0])
    b = M.T @ a_bar
    right_starts = list(_unit_rows(rng, count, X.shape[1]))
    right_starts += [b / np.linalg.norm(b)] if np.linalg.norm(b) > 0 else []
    sup_x = max(_ascend(X, probs, k, a)[0] for a in right_starts)
    rhs = operator_norm(M) ** k * sup_x
    return lhs, rhs, lhs <= rhs * (1 + 1e-10)


def h_theta_proximity(model, frame, theta):
    """``||I - H_theta^{-1} J||`` with ``H_theta = hessian(theta)^{1/2}``."""
    theta = model._check(theta)
    H = sym_sqrt(model.hessian(theta))
    return operator_norm(np.eye(frame.dim) - np.linalg.solve(H, frame.J))


# ---------------------------------------------------------------------------
# lemma audits


def _exact_bounds(posterior, c, seed):
    model = posterior.frame.model
    if not model.finite_support:
        raise UnsupportedMethod("lemma audits need exact moments (finite-support model)")
    return moment_bounds(model, posterior.frame, posterior.n, c, "exact-enumeration", seed=seed)


def _lambda_for(posterior, c, bounds, seed):
    bounds = _exact_bounds(posterior, c, seed) if bounds is None else bounds
    return bounds, lambda_n(bounds.b1n_at_0, bounds.b2n_at_c, c, posterior.dim, posterior.n)


@dataclass(frozen=True)
class Lemma1Report:
    c: float
    lambda_n: float
    n_points: int
    max_slack: float
    violations: int
    max_slack_upper: float
    violations_upper: int
    bounds: MomentBounds

    @property
    def holds(self):
        return self.violations == 0 and self.violations_upper == 0


def uniform_ball(rng, m, d, radius):
    u = _unit_rows(rng, m, d)
    return u * (radius * rng.random(m) ** (1.0 / d))[:, None]


def lemma1_audit(posterior, c, u_budget=10_000, seed=0, bounds=None):
    """Pointwise check of ``|ln Z - ln Z~| <= lambda_n(c) ||u||^2`` on ``||u|| <= sqrt(c d)``.

    Also checks ``ln Z(u) <= <Delta_n, u> - ||u||^2 (1 - 2 lambda_n(c)) / 2``.
    Violations are counted with slack ``1e-10``.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    bounds, lam = _lambda_for(posterior, c, bounds, seed)
    d = posterior.dim
    rng = np.random.default_rng(seed)
    U = np.vstack([np.zeros((1, d)), uniform_ball(rng, u_budget, d, math.sqrt(c * d))])
    lz = posterior.log_Z(U)
    lzt = log_Z_tilde(posterior.summary, U)
    uu = np.einsum("ij,ij->i", U, U)
    slack = np.abs(lz - lzt) - lam * uu
    upper = lz - (U @ posterior.summary.delta_n - 0.5 * uu * (1 - 2 * lam))
    return Lemma1Report(
        float(c), lam, U.shape[0],
        float(slack.max()), int(np.sum(slack > AUDIT_SLACK)),
        float(upper.max()), int(np.sum(upper > AUDIT_SLACK)),
        bounds,
    )


@dataclass(frozen=True)
class AuditResult:
    lhs: float
    rhs: float
    holds: bool
    error: float
    lambda_n: float


def _box_integral(fn, d, half_width, nodes, center=None):
    center = np.zeros(d) if center is None else center
    out = []
    for m in (nodes, nodes // 2):
        h = 2.0 * half_width / m
        axis = -half_width + h * (np.arange(m) + 0.5)
        mesh = np.meshgrid(*([axis] * d), indexing="ij")
        U = center + np.column_stack([g.ravel() for g in mesh])
        out.append(float(np.sum(fn(U)) * h**d))
    return out[0], abs(out[0] - out[1])


def _ratio_to_gaussian(posterior, U):
    # Z(u) / int Z~  =  phi(u; Delta, I) exp(ln Z - ln Z~)
    d = posterior.dim
    delta = posterior.summary.delta_n
    diff = posterior.log_Z(U) - log_Z_tilde(posterior.summary, U)
    r = U - delta
    log_phi = -0.5 * np.einsum("ij,ij->i", r, r) - 0.5 * d * math.log(2 * math.pi)
    return log_phi, diff


def lemma3_audit(posterior, c, nodes=None, seed=0, bounds=None):
    """``(int Z~)^{-1} int_{||u|| <= sqrt(cd)} |Z - Z~| <= c d lambda e^{c d lambda}``."""
    d = posterior.dim
    if d > 2:
        raise DimensionTooLarge("lemma 3 audit supports d <= 2")
    _, lam = _lambda_for(posterior, c, bounds, seed)
    r = math.sqrt(c * d)
    nodes = nodes or (4096 if d == 1 else 512)

    def integrand(U):
        log_phi, diff = _ratio_to_gaussian(posterior, U)
        inside = np.einsum("ij,ij->i", U, U) <= r * r
        return np.where(inside, np.exp(log_phi) * np.abs(np.expm1(diff)), 0.0)

    lhs, err = _box_integral(integrand, d, r, nodes)
    rhs = c * d * lam * math.exp(c * d * lam)
    return AuditResult(lhs, rhs, lhs <= rhs + err, err, lam)


def lemma4_audit(posterior, c, k, C1, nodes=None, seed=0, bounds=None):
    """Tail bound outside ``||u|| >= k sqrt(c d)`` relative to ``int Z~``.

    Compares ``(int Z~)^{-1} int_{||u|| >= k sqrt(cd)} pi Z`` with
    ``sup(pi) e^{c d lambda} e^{-k c d / 8}``, priors measured relative to
    ``pi(theta0)``.

    Raises
    ------
    PreconditionViolated
        Lists every hypothesis that fails.
    """
    d = posterior.dim
    if d > 2:
        raise DimensionTooLarge("lemma 4 audit supports d <= 2")
    _, lam = _lambda_for(posterior, c, bounds, seed)
    delta = posterior.summary.delta_n
    failed = []
    if not float(delta @ delta) < C1 * d:
        failed.append(f"||Delta_n||^2 = {float(delta @ delta):.4g} >= C1 d = {C1 * d:.4g}")
    if not lam < 1 / 16:
        failed.append(f"lambda_n(c) = {lam:.4g} >= 1/16")
    elif not c > 16 * max(4 * C1, 1 / (1 - 2 * lam)):
        failed.append(f"c = {c:.4g} <= 16 max(4 C1, 1/(1 - 2 lambda)) = {16 * max(4 * C1, 1 / (1 - 2 * lam)):.4g}")
    if k < 1:
        failed.append(f"k = {k} < 1")
    if failed:
        raise PreconditionViolated(failed)

    prior = posterior.prior
    sup_ratio = 0.0 if prior.is_flat else float(prior.sup_log_ratio_bound)
    log_prior0 = 0.0 if prior.is_flat else float(prior(posterior.frame.theta0)[0])
    r = k * math.sqrt(c * d)
    half = r + float(np.linalg.norm(delta)) + 15.0
    nodes = nodes or (8192 if d == 1 else 600)

    def integrand(U):
        log_phi, diff = _ratio_to_gaussian(posterior, U)
        outside = np.einsum("ij,ij->i", U, U) >= r * r
        lp = 0.0 if prior.is_flat else posterior.prior(posterior.theta_of_u(U)) - log_prior0
        with np.errstate(invalid="ignore"):
            val = np.exp(log_phi + diff + lp)
        return np.where(outside & np.isfinite(val), val, 0.0)

    lhs, err = _box_integral(integrand, d, half, nodes)
    rhs = math.exp(sup_ratio + c * d * lam - k * c * d / 8)
    return AuditResult(lhs, rhs, lhs <= rhs + err, err, lam)


def minimal_admissible_c(posterior, C1, seed=0, margin=1e-6, max_iter=100):
    """Smallest ``c`` with ``c > 16 max(4 C1, 1 / (1 - 2 lambda_n(c)))`` by fixed-point iteration."""
    c = 16 * max(4 * C1, 1.0) * (1 + margin)
    for _ in range(max_iter):
        _, lam = _lambda_for(posterior, c, None, seed)
        if lam >= 0.5:
            raise PreconditionViolated([f"lambda_n({c:.4g}) = {lam:.4g} >= 1/2"])
        nxt = 16 * max(4 * C1, 1 / (1 - 2 * lam)) * (1 + margin)
        if nxt <= c:
            return c
        c = nxt
    raise PreconditionViolated(["fixed-point iteration for c did not settle"])


# ---------------------------------------------------------------------------
# growth conditions


@dataclass(frozen=True)
class GrowthReport:
    regime_name: str
    ratios: list
    verdicts: dict


def _conditions(family, alpha, delta):
    if family in ("multinomial", "identity-embed"):
        conds = [("d^4/n", lambda c: c["d"] ** 4 / c["n"])]
        if alpha is not None:
            e = 4 + alpha + (delta or 0.0)
            conds.append((f"d^{e:g}/n", lambda c, e=e: c["d"] ** e / c["n"]))
        return conds
    if family in ("el-mean", "moment-restricted"):
        return [("d^4.5/n", lambda c: c["d"] ** 4.5 / c["n"])]
    if family in ("mv-linear", "sur-toy", "ssem-toy"):
        return [
            ("d_r^5/n", lambda c: c["d_r"] ** 5 / c["n"]),
            ("d_r*d_c^3/n", lambda c: c["d_r"] * c["d_c"] ** 3 / c["n"]),
        ]
    return [("d^4/n", lambda c: c["d"] ** 4 / c["n"])]


def _trend(values):
    diffs = np.diff(values)
    if np.all(diffs < 0):
        return "decreasing"
    if np.all(diffs > 0):
        return "increasing"
    return "non-monotone"


def growth_check(regime, params=None):
    """Evaluate the dimension-growth ratios of a sweep and their trend.

    Parameters
    ----------
    regime : dict
        ``{"name": str, "family": str, "cells": [{"d": .., "n": ..}, ...]}``;
        linear-model families use ``d_r`` and ``d_c`` instead of ``d``.
    params : dict, optional
        ``{"alpha": float, "delta": float}`` adds the higher-moment condition.
    """
    params = params or {}
    cells = regime["cells"]
    if len(cells) < 2:
        raise ValueError("a growth sweep needs at least two cells")
    conds = _conditions(regime.get("family", "multinomial"), params.get("alpha"), params.get("delta"))
    ratios, verdicts = [], {}
    for label, fn in conds:
        vals = [float(fn(c)) for c in cells]
        if not all(np.isfinite(v) and v >= 0 for v in vals):
            raise ValueError(f"ratio {label} is not finite and nonnegative")
        ratios.append((label, vals))
        verdicts[label] = _trend(vals)
    return GrowthReport(regime.get("name", "sweep"), ratios, verdicts)
