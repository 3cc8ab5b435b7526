"""Multinomial model with moment restrictions.

For a finite support ``x_0..x_d`` and a moment function ``m(x, eta)`` the
profile ``q(eta)`` maximises ``sum_j w_j log q_j`` subject to
``sum_j q_j m(x_j, eta) = 0`` and ``sum_j q_j = 1``. The solution is
``q_j = w_j / (1 + t'm_j)`` where ``t`` maximises the concave dual
``sum_j w_j log(1 + t'm_j)``. ``theta_j(eta) = log(q_j / q_0)`` is the
induced curved map into the multinomial natural parameters.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .exceptions import BoundaryDegenerate, Infeasible, SolverStalled

GRAD_TOL = 1e-10
HULL_MARGIN = 1e-10
Q_FLOOR = 1e-12
DIVERGENCE_NORM = 1e12
# value changes below this relative size are indistinguishable from rounding
ROUNDOFF = 1e-13
SIMPLEX_TOL = 1e-10


# builtin moment functions: (support, eta, params) -> array (d + 1, M)
def mean_restriction(X, eta, params=None):
    """``m(x, eta) = x - eta``."""
    return X - np.asarray(eta, dtype=float)[None, :]


def variance_restriction(X, eta, params=None):
    """Scalar support: ``(x - eta_0, (x - eta_0)^2 - eta_1)``."""
    x = X[:, 0]
    return np.column_stack([x - eta[0], (x - eta[0]) ** 2 - eta[1]])


def linear_iv_restriction(X, eta, params):
    """Support rows ``(y, w_1..w_p, z_1..z_M)``: ``m = z (y - w'eta)``."""
    p = int(params["n_regressors"])
    y, W, Z = X[:, 0], X[:, 1 : 1 + p], X[:, 1 + p :]
    return Z * (y - W @ np.asarray(eta, dtype=float))[:, None]


MOMENT_FUNCTIONS = {
    "mean": mean_restriction,
    "variance": variance_restriction,
    "linear-iv": linear_iv_restriction,
}


@dataclass
class MomentModel:
    """Finite-support moment model.

    Parameters
    ----------
    support : array of shape (d + 1, p)
    moment_fn : callable ``(support, eta) -> (d + 1, M)``, or a builtin name
    d1 : dimension of ``eta``
    lower, upper : box bounds describing the parameter set
    weights : nonnegative weights over the support (default uniform)
    params : extra parameters for named moment functions
    """

    support: np.ndarray
    moment_fn: object
    d1: int
    lower: np.ndarray = None
    upper: np.ndarray = None
    weights: np.ndarray = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        S = np.asarray(self.support, dtype=float)
        self.support = S[:, None] if S.ndim == 1 else S
        if isinstance(self.moment_fn, str):
            fn = MOMENT_FUNCTIONS[self.moment_fn]
            params = self.params
            self.moment_fn = lambda X, eta, _fn=fn: _fn(X, np.atleast_1d(eta), params)
        k = self.support.shape[0]
        self.weights = np.full(k, 1.0 / k) if self.weights is None else np.asarray(self.weights, dtype=float)
        if self.lower is not None:
            self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.d1,)).copy()
            self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.d1,)).copy()

    @property
    def d(self):
        return self.support.shape[0] - 1

    def moments(self, eta):
        return np.atleast_2d(np.asarray(self.moment_fn(self.support, np.atleast_1d(eta)), dtype=float).reshape(self.d + 1, -1))

    @property
    def M(self):
        lo = self.lower if self.lower is not None else np.zeros(self.d1)
        hi = self.upper if self.upper is not None else lo
        return self.moments(0.5 * (lo + hi)).shape[1]

    def contains(self, eta):
        eta = np.atleast_1d(eta)
        if self.lower is None:
            return True
        return bool(np.all(eta >= self.lower) and np.all(eta <= self.upper))

    def check_dimensions(self):
        M = self.M
        if not (self.d1 <= M <= self.d):
            raise ValueError(f"need d1 <= M <= d, got d1={self.d1}, M={M}, d={self.d}")
        return self


@dataclass(frozen=True)
class ELSolution:
    q: np.ndarray
    multiplier: np.ndarray
    objective: float
    status: str
    iterations: int = 0
    dual_gradient_norm: float = 0.0
    kkt: dict = field(default_factory=dict)


def hull_margin(Mmat):
    """Largest ``s`` with ``0 = sum_j l_j m_j``, ``sum l_j = 1``, ``l_j >= s``.

    A positive value means 0 lies in the relative interior of the convex hull
    of the rows.
    """
    k, M = Mmat.shape
    # variables (l_1..l_k, s); maximise s
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_eq = np.zeros((M + 1, k + 1))
    A_eq[:M, :k] = Mmat.T
    A_eq[M, :k] = 1.0
    b_eq = np.zeros(M + 1)
    b_eq[M] = 1.0
    A_ub = np.hstack([-np.eye(k), np.ones((k, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(k), A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, None)] * k + [(None, 1.0)], method="highs")
    return -res.fun if res.status == 0 else -np.inf


def _dual_value(t, Mmat, w):
    z = 1.0 + Mmat @ t
    if np.any(z <= 0):
        return -np.inf
    return float(w @ np.log(z))


def _grad_norm(t, Mmat, w):
    return float(np.linalg.norm(Mmat.T @ (w / (1.0 + Mmat @ t))))


def _newton_dual(Mmat, w, max_iter=200):
    """Damped Newton ascent on ``sum_j w_j log(1 + t'm_j)``.

    Returns ``(t, gradient_norm, iterations)``. Backtracking keeps every
    ``1 + t'm_j`` positive and the dual value nondecreasing.
    """
    t = np.zeros(Mmat.shape[1])
    value = _dual_value(t, Mmat, w)
    gnorm, it, stalls, polished = np.inf, 0, 0, False
    for it in range(1, max_iter + 1):
        z = 1.0 + Mmat @ t
        grad = Mmat.T @ (w / z)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= GRAD_TOL and (polished or gnorm == 0.0):
            break
        polished = gnorm <= GRAD_TOL
        if np.linalg.norm(t) > DIVERGENCE_NORM:
            break
        hess = (Mmat * (w / z**2)[:, None]).T @ Mmat
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = grad
        alpha = 1.0
        slack = ROUNDOFF * (1.0 + abs(value))
        while alpha > 1e-12:
            cand = t + alpha * step
            cv = _dual_value(cand, Mmat, w)
            if cv >= value or (cv >= value - slack and _grad_norm(cand, Mmat, w) < gnorm):
                break
            alpha *= 0.5
        else:
            if polished:
                break
            stalls += 1
            # fallback: plain gradient ascent
            for _ in range(50):
                cand = t + 1e-2 * grad
                cv = _dual_value(cand, Mmat, w)
                if cv < value:
                    break
                t, value = cand, cv
            if stalls > 3:
                break
            continue
        t, value = cand, cv
    z = 1.0 + Mmat @ t
    gnorm = float(np.linalg.norm(Mmat.T @ (w / z))) if np.all(z > 0) else np.inf
    return t, gnorm, it


def _converged(Mmat, w, t, gnorm):
    # a diverging multiplier also drives the gradient to zero; q must stay a
    # probability vector
    if not gnorm <= GRAD_TOL:
        return False
    z = 1.0 + Mmat @ t
    return bool(np.all(z > 0) and abs(np.sum(w / z) - 1.0) <= SIMPLEX_TOL)


def _check_weights(model, weights):
    w = model.weights if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (model.d + 1,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
        raise ValueError("weights must be a nonnegative vector over the support summing to 1")
    return w


def _finish(Mmat, w, t, gnorm, it):
    z = 1.0 + Mmat @ t
    q = w / z
    if np.min(q) < Q_FLOOR:
        raise BoundaryDegenerate(f"min q_j = {np.min(q):.2e} at the optimum")
    nu = float(np.mean(w / q - Mmat @ t))
    kkt = {
        "stationarity": float(np.max(np.abs(w / q - nu - Mmat @ t))),
        "moment": float(np.max(np.abs(q @ Mmat))),
        "simplex": float(abs(q.sum() - 1.0)),
        "positivity": float(max(0.0, -np.min(q))),
    }
    return ELSolution(q, t, float(w @ np.log(q)), "converged", it, gnorm, kkt)


def profile_q(model, eta, weights=None, max_iter=200):
    """Solve the moment-restricted multinomial maximisation at ``eta``.

    Returns
    -------
    ELSolution
        ``status`` is ``"converged"``: the dual gradient norm is at most
        ``1e-10`` and every ``1 + t'm_j`` is positive.

    Raises
    ------
    Infeasible
        If 0 is not interior to the hull of the moment vectors (checked by a
        linear program whenever the dual iteration fails to converge).
    BoundaryDegenerate
        If some ``q_j`` falls below ``1e-12`` at the optimum, including
        zero weights.
    SolverStalled
        If the problem is feasible but the dual iteration did not converge.
    """
    w = _check_weights(model, weights)
    if np.any(w == 0):
        raise BoundaryDegenerate("zero weight on a support point forces q_j = 0")
    Mmat = model.moments(eta)
    t, gnorm, it = _newton_dual(Mmat, w, max_iter)
    if not _converged(Mmat, w, t, gnorm):
        if hull_margin(Mmat) <= HULL_MARGIN:
            raise Infeasible(f"0 is not interior to the moment hull at eta={np.atleast_1d(eta)}")
        raise SolverStalled(f"dual Newton stalled with gradient norm {gnorm:.2e}")
    return _finish(Mmat, w, t, gnorm, it)


def profile_q_batch(model, etas, weights=None, max_iter=100):
    """Vectorised ``profile_q`` over the rows of ``etas``.

    Returns an array of shape ``(B, d + 1)``. Rows whose batched iteration
    does not converge are re-solved one at a time, so infeasible rows raise
    exactly as in ``profile_q``.
    """
    w = _check_weights(model, weights)
    if np.any(w == 0):
        raise BoundaryDegenerate("zero weight on a support point forces q_j = 0")
    etas = np.atleast_2d(np.asarray(etas, dtype=float))
    Ms = np.stack([model.moments(e) for e in etas])
    B, k, M = Ms.shape
    t = np.zeros((B, M))
    done = np.zeros(B, dtype=bool)
    polished = np.zeros(B, dtype=bool)

    def values(tt, rows):
        z = 1.0 + np.einsum("bkm,bm->bk", Ms[rows], tt)
        with np.errstate(invalid="ignore", divide="ignore"):
            v = np.where(np.all(z > 0, axis=1), np.log(np.where(z > 0, z, 1.0)) @ w, -np.inf)
        return v

    for _ in range(max_iter):
        rows = np.flatnonzero(~done)
        if rows.size == 0:
            break
        Mr, tr = Ms[rows], t[rows]
        z = 1.0 + np.einsum("bkm,bm->bk", Mr, tr)
        grad = np.einsum("bkm,bk->bm", Mr, w / z)
        gn = np.linalg.norm(grad, axis=1)
        small = gn <= GRAD_TOL
        finished = small & (polished[rows] | (gn == 0.0))
        done[rows[finished]] = True
        polished[rows[small]] = True
        keep = ~finished
        rows, Mr, tr, z, grad = rows[keep], Mr[keep], tr[keep], z[keep], grad[keep]
        if rows.size == 0:
            break
        hess = np.einsum("bkm,bk,bkl->bml", Mr, w / z**2, Mr)
        step = np.linalg.solve(hess, grad[..., None])[..., 0]
        base = values(tr, rows)
        slack = ROUNDOFF * (1.0 + np.abs(base))
        gn = gn[keep]

        def accept(cc):
            v = values(cc, rows)
            zc = 1.0 + np.einsum("bkm,bm->bk", Mr, cc)
            with np.errstate(divide="ignore", invalid="ignore"):
                gc = np.linalg.norm(np.einsum("bkm,bk->bm", Mr, w / zc), axis=1)
            return (v >= base) | ((v >= base - slack) & (gc < gn))

        alpha = np.ones(rows.size)
        cand = tr + step
        for _ in range(40):
            bad = ~accept(cand)
            if not bad.any():
                break
            alpha[bad] *= 0.5
            cand[bad] = tr[bad] + alpha[bad, None] * step[bad]
        t[rows] = np.where(accept(cand)[:, None], cand, tr)
        # rows that cannot move are handed to the scalar solver
        stuck = alpha < 1e-11
        done[rows[stuck]] = True
    out = np.empty((B, k))
    z = 1.0 + np.einsum("bkm,bm->bk", Ms, t)
    for b in range(B):
        if np.all(z[b] > 0):
            gn = np.linalg.norm(Ms[b].T @ (w / z[b]))
            q = w / z[b]
            if _converged(Ms[b], w, t[b], gn) and np.min(q) >= Q_FLOOR:
                out[b] = q
                continue
        out[b] = profile_q(model, etas[b], w).q
    return out


def theta_of_eta(model, eta, weights=None):
    """``theta_j(eta) = log(q_j(eta) / q_0(eta))`` for ``j = 1..d``."""
    q = profile_q(model, eta, weights).q
    return np.log(q[1:]) - np.log(q[0])


def theta_of_eta_batch(model, etas, weights=None):
    Q = profile_q_batch(model, etas, weights)
    return np.log(Q[:, 1:]) - np.log(Q[:, :1])


@dataclass(frozen=True)
class SmoothnessReport:
    jacobian_fd: np.ndarray
    max_secant_deviation: float


def el_smoothness_probe(model, eta0, radius, samples=64, seed=0, step=1e-6):
    """Finite-difference Jacobian of ``theta(.)`` at ``eta0`` and the largest
    deviation of ``theta`` from its first-order expansion on the ball."""
    eta0 = np.atleast_1d(np.asarray(eta0, dtype=float))
    return _smoothness(lambda e: theta_of_eta(model, e), eta0, radius, samples, seed, step)


def _smoothness(fn, eta0, radius, samples, seed, step):
    d1 = eta0.size
    cols = []
    for i in range(d1):
        e = np.zeros(d1)
        e[i] = step
        cols.append((fn(eta0 + e) - fn(eta0 - e)) / (2 * step))
    jac = np.column_stack(cols)
    base = fn(eta0)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((samples, d1))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = radius * rng.random(samples) ** (1.0 / d1)
    radii[: min(samples, 2 * d1)] = radius
    pts = dirs * radii[:, None]
    if d1 == 1:
        pts = np.vstack([pts, [[radius]], [[-radius]]])
    dev = max(float(np.linalg.norm(fn(eta0 + p) - base - jac @ p)) for p in pts)
    return SmoothnessReport(jac, dev)
