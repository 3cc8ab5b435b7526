"""Estimator-style wrappers around the functional API.

The wrappers follow the scikit-learn conventions: constructor arguments are
stored unchanged, ``fit`` validates its input and sets attributes with a
trailing underscore, and ``get_params``/``set_params`` come from
``BaseEstimator``.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .curved import build_curved, curved_local_posterior, curved_mle, curved_tv
from .empirical_likelihood import MomentModel, profile_q_batch
from .families import build_multinomial
from .local import FLAT, alpha_moment_distance, make_frame, make_summary, LocalPosterior


def _model_from(model, probs):
    if model is not None:
        return model
    if probs is None:
        raise ValueError("pass either a model or multinomial probabilities")
    return build_multinomial(np.asarray(probs, dtype=float))


class LocalPosteriorApproximation(BaseEstimator):
    """Gaussian approximation of the posterior in local coordinates.

    Parameters
    ----------
    model : ExpFamily, optional
        Family centred at its true parameter. Ignored when ``probs`` is used.
    probs : array-like, optional
        Multinomial cell probabilities, a shortcut for ``model``.
    alpha : float, default=0
        Moment weight of the distance; 0 gives total variation.
    method : {"auto", "quadrature", "importance"}
    nodes : int, optional
        Quadrature nodes per axis.
    budget : int, default=100000
        Importance-sampling draws.
    random_state : int, default=0

    Attributes
    ----------
    posterior_ : LocalPosterior
    delta_n_ : ndarray
        Centre of the approximating Gaussian.
    distance_ : float
    distance_error_ : float
    """

    def __init__(self, model=None, probs=None, alpha=0.0, method="auto", nodes=None,
                 budget=100_000, random_state=0):
        self.model = model
        self.probs = probs
        self.alpha = alpha
        self.method = method
        self.nodes = nodes
        self.budget = budget
        self.random_state = random_state

    def fit(self, X, y=None):
        model = _model_from(self.model, self.probs)
        X = check_array(X, dtype=float)
        frame = make_frame(model)
        self.posterior_ = LocalPosterior(frame, make_summary(frame, X), FLAT)
        self.delta_n_ = self.posterior_.reference_mean
        est = alpha_moment_distance(self.posterior_, self.alpha, self.method, self.nodes,
                                    budget=self.budget, seed=self.random_state)
        self.distance_, self.distance_error_ = est
        self.n_features_in_ = X.shape[1]
        return self

    def score_samples(self, U):
        """Unnormalised log posterior at local points ``U``."""
        check_is_fitted(self, "posterior_")
        U = check_array(U, dtype=float)
        return self.posterior_.log_unnormalized(U)


class CurvedPosteriorApproximation(BaseEstimator):
    """Gaussian approximation ``N(s, (G'G)^{-1})`` of a curved posterior.

    Parameters
    ----------
    instance : str, default="el-mean"
        Name of a curved instance.
    instance_params : dict, optional
    method, nodes, budget, random_state
        As in :class:`LocalPosteriorApproximation`.
    """

    def __init__(self, instance="el-mean", instance_params=None, method="auto", nodes=None,
                 budget=100_000, random_state=0):
        self.instance = instance
        self.instance_params = instance_params
        self.method = method
        self.nodes = nodes
        self.budget = budget
        self.random_state = random_state

    def fit(self, X, y=None):
        cmap = build_curved(self.instance, **(self.instance_params or {}))
        X = check_array(X, dtype=float)
        self.map_ = cmap
        self.posterior_ = curved_local_posterior(cmap, data=X)
        self.s_ = self.posterior_.s
        self.tv_, self.tv_error_ = curved_tv(self.posterior_, self.method, self.nodes,
                                             budget=self.budget, seed=self.random_state)
        self.n_features_in_ = X.shape[1]
        return self

    def score_samples(self, Gam):
        check_is_fitted(self, "posterior_")
        return self.posterior_.log_unnormalized(check_array(Gam, dtype=float))


class CurvedMLE(BaseEstimator):
    """Multi-start maximum likelihood over a curved parameter set.

    Attributes
    ----------
    eta_ : ndarray
    norm_error_ : float
        Distance to the instance's true parameter.
    """

    def __init__(self, instance="el-mean", instance_params=None, starts=10, random_state=0):
        self.instance = instance
        self.instance_params = instance_params
        self.starts = starts
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.map_ = build_curved(self.instance, **(self.instance_params or {}))
        self.eta_, self.norm_error_ = curved_mle(self.map_, data=X, starts=self.starts,
                                                 seed=self.random_state)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X=None):
        """Mean of the sufficient statistic at the fitted parameter."""
        check_is_fitted(self, "eta_")
        theta = self.map_.evaluate(self.eta_)[0]
        return self.map_.base_model.grad(theta)


class EmpiricalLikelihoodProfile(TransformerMixin, BaseEstimator):
    """Maps ``eta`` to the natural parameter ``theta(eta)`` of the restricted multinomial.

    Parameters
    ----------
    support : array-like
        Support points, one per row.
    moment : str or callable, default="mean"
    d1 : int, default=1
    weights : {"uniform", "empirical"}, default="uniform"
        ``"empirical"`` uses the support frequencies of the data passed to
        ``fit``.
    moment_params : dict, optional

    Attributes
    ----------
    model_ : MomentModel
    weights_ : ndarray
    """

    def __init__(self, support=(0.0, 1.0), moment="mean", d1=1, weights="uniform", moment_params=None):
        self.support = support
        self.moment = moment
        self.d1 = d1
        self.weights = weights
        self.moment_params = moment_params

    def fit(self, X=None, y=None):
        S = np.asarray(self.support, dtype=float)
        S = S[:, None] if S.ndim == 1 else S
        if self.weights == "uniform":
            w = np.full(S.shape[0], 1.0 / S.shape[0])
        elif self.weights == "empirical":
            if X is None:
                raise ValueError("empirical weights need data")
            X = check_array(X, dtype=float)
            if X.shape[1] != S.shape[1]:
                raise ValueError("data and support have different widths")
            hits = np.all(np.isclose(X[:, None, :], S[None, :, :]), axis=2)
            if not np.all(hits.any(axis=1)):
                raise ValueError("data contains points outside the support")
            w = hits.sum(axis=0) / X.shape[0]
        else:
            raise ValueError(f"unknown weights option {self.weights!r}")
        self.weights_ = w
        self.model_ = MomentModel(S, self.moment, self.d1, weights=w, params=dict(self.moment_params or {}))
        self.n_features_in_ = S.shape[1]
        return self

    def transform(self, etas):
        """Rows ``theta(eta)``."""
        check_is_fitted(self, "model_")
        E = check_array(etas, dtype=float)
        Q = profile_q_batch(self.model_, E)
        return np.log(Q[:, 1:]) - np.log(Q[:, :1])

    def profile(self, etas):
        """Rows ``q(eta)``."""
        check_is_fitted(self, "model_")
        return profile_q_batch(self.model_, check_array(etas, dtype=float))
