"""Bayesian logistic regression, fitted as the posterior mode (MAP).

The prior is an isotropic Gaussian N(0, prior_variance * I) on the feature
weights; the intercept is left unpenalized.  Features are standardized with
training statistics, and the penalized log-likelihood is maximized by Newton
steps (IRLS) halved until the objective does not decrease.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class FitError(ValueError):
    """Training data cannot define a model."""


def logistic(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def penalized_loglik(beta, A, y, prior_variance) -> float:
    """Log-likelihood of design ``A`` (first column = intercept) minus the
    Gaussian penalty on every coefficient but the first."""
    return _objective(beta, A @ beta, y, prior_variance)


def _objective(beta, eta, y, prior_variance) -> float:
    ll = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    return ll - float(beta[1:] @ beta[1:]) / (2.0 * prior_variance)


def penalized_gradient(beta, A, y, prior_variance) -> np.ndarray:
    return _gradient(beta, A, y, logistic(A @ beta), prior_variance)


def _gradient(beta, A, y, mu, prior_variance):
    g = A.T @ (y - mu)
    g[1:] -= beta[1:] / prior_variance
    return g


def _hessian(beta, A, prior_variance, mu=None):
    if mu is None:
        mu = logistic(A @ beta)
    B = A * np.sqrt(mu * (1.0 - mu))[:, None]
    H = B.T @ B
    H[np.diag_indices_from(H)] += np.r_[0.0, np.full(len(beta) - 1, 1.0 / prior_variance)]
    # keeps the solve well posed when the intercept curvature vanishes
    H[0, 0] += 1e-12
    return H


@dataclass
class BlrModel:
    weights: np.ndarray
    intercept: float
    prior_variance: float
    means: np.ndarray
    stds: np.ndarray
    feature_names: list[str]
    converged: bool
    iterations: int
    pinned: np.ndarray = field(default=None)
    history: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.stds = np.asarray(self.stds, dtype=np.float64)
        if self.pinned is None:
            self.pinned = np.zeros(len(self.weights), bool)
        self.pinned = np.asarray(self.pinned, dtype=bool)

    @property
    def n_free(self) -> int:
        return int((~self.pinned).sum())

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.weights):
            raise ValueError(f"expected {len(self.weights)} features, got {X.shape[1]}")
        if not np.isfinite(X).all():
            raise ValueError("inputs must be finite")
        return self.intercept + ((X - self.means) / self.stds) @ self.weights

    def predict_proba(self, X) -> np.ndarray:
        return logistic(self.decision_function(X))

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        """1 where the diffusion probability reaches ``threshold`` (ties go to 1)."""
        return (self.predict_proba(X) >= threshold).astype(int)

    def to_json(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "prior_variance": self.prior_variance,
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "feature_names": list(self.feature_names),
            "converged": self.converged,
            "iterations": self.iterations,
            "pinned": self.pinned.astype(int).tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BlrModel":
        return cls(
            weights=np.array(obj["weights"], dtype=np.float64),
            intercept=float(obj["intercept"]),
            prior_variance=float(obj["prior_variance"]),
            means=np.array(obj["means"], dtype=np.float64),
            stds=np.array(obj["stds"], dtype=np.float64),
            feature_names=list(obj["feature_names"]),
            converged=bool(obj["converged"]),
            iterations=int(obj["iterations"]),
            pinned=np.array(obj.get("pinned", [0] * len(obj["weights"])), dtype=bool),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "BlrModel":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def fit(
    X,
    y,
    prior_variance: float = 10.0,
    tol: float = 1e-8,
    max_iter: int = 100,
    feature_names: list[str] | None = None,
    columns=None,
) -> BlrModel:
    """MAP fit of a logistic model.

    ``columns`` restricts the fit to a subset of feature indexes; every other
    weight is pinned at zero.  Constant columns are pinned as well.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise FitError("X must be 2-D with one row per label")
    n, p = X.shape
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(p)]
    if n < 2:
        raise FitError("need at least 2 samples")
    if not np.isin(y, (0.0, 1.0)).all():
        raise FitError("labels must be 0/1")
    if y.min() == y.max():
        raise FitError("both classes must be present in the training data")
    finite = np.isfinite(X).all(axis=0)
    if not finite.all():
        raise FitError(f"non-finite value in feature {names[int(np.flatnonzero(~finite)[0])]!r}")
    if prior_variance <= 0:
        raise FitError("prior_variance must be positive")

    means = X.mean(axis=0)
    stds = X.std(axis=0)
    pinned = stds <= 1e-12 * np.maximum(1.0, np.abs(means))
    if columns is not None:
        keep = np.zeros(p, bool)
        keep[np.asarray(columns, dtype=int)] = True
        pinned |= ~keep
    means = np.where(pinned, 0.0, means)
    stds = np.where(pinned, 1.0, stds)
    free = np.flatnonzero(~pinned)
    A = np.column_stack([np.ones(n), (X[:, free] - means[free]) / stds[free]])

    beta = np.zeros(A.shape[1])
    prior = np.mean(y)
    beta[0] = np.log(prior / (1.0 - prior))
    eta = A @ beta
    obj = _objective(beta, eta, y, prior_variance)
    history = [obj]
    iterations = 0
    while True:
        mu = logistic(eta)
        g = _gradient(beta, A, y, mu, prior_variance)
        if np.max(np.abs(g)) < tol or iterations >= max_iter:
            break
        H = _hessian(beta, A, prior_variance, mu)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        t = 1.0
        # near the optimum the objective only moves by rounding noise
        slack = 1e-12 * (1.0 + abs(obj))
        for _ in range(60):
            cand = beta + t * step
            cand_eta = A @ cand
            new_obj = _objective(cand, cand_eta, y, prior_variance)
            if new_obj >= obj - slack:
                break
            t *= 0.5
        else:
            log.debug("line search stalled after %d iterations", iterations)
            break
        beta, eta, obj = cand, cand_eta, new_obj
        history.append(obj)
        iterations += 1
    converged = bool(np.max(np.abs(penalized_gradient(beta, A, y, prior_variance))) < tol)

    weights = np.zeros(p)
    weights[free] = beta[1:]
    if not converged:
        log.warning("BLR fit did not reach tol=%g within %d iterations", tol, max_iter)
    return BlrModel(
        weights=weights,
        intercept=float(beta[0]),
        prior_variance=float(prior_variance),
        means=means,
        stds=stds,
        feature_names=names,
        converged=converged,
        iterations=iterations,
        pinned=pinned,
        history=history,
    )


def predict_proba(model: BlrModel, X) -> np.ndarray:
    return model.predict_proba(X)


def predict(model: BlrModel, X, threshold: float = 0.5) -> np.ndarray:
    return model.predict(X, threshold)


@dataclass
class BlrLearner:
    """Adapter for the evaluation harness."""

    prior_variance: float = 10.0
    tol: float = 1e-8
    max_iter: int = 100
    feature_names: list[str] | None = None
    columns: list[int] | None = None

    def fit(self, X, y) -> BlrModel:
        return fit(X, y, self.prior_variance, self.tol, self.max_iter, self.feature_names, self.columns)
