"""The DPI classifier: z-score normalization plus two-feature logistic regression."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .enums import Group
from .errors import NonConvergence, SingleClass, TooFewSamples

DECISION_THRESHOLD = 0.5


@dataclass(frozen=True)
class ZScoreNormalizer:
    means: np.ndarray
    stds: np.ndarray
    guarded: tuple = ()

    def to_dict(self) -> dict:
        return {
            "means": [float(v) for v in self.means],
            "stds": [float(v) for v in self.stds],
            "guarded": [bool(v) for v in self.guarded],
        }


def identity_normalizer(dim: int = 2) -> ZScoreNormalizer:
    return ZScoreNormalizer(np.zeros(dim), np.ones(dim), (False,) * dim)


def fit_normalizer(train) -> ZScoreNormalizer:
    """Per-feature mean and n-1 std, estimated from training rows only.

    A zero std is replaced by 1 and flagged in ``guarded``.
    """
    x = np.atleast_2d(np.asarray(train, dtype=float))
    if x.shape[0] < 2:
        raise TooFewSamples("normalizer needs at least two training rows")
    means = x.mean(axis=0)
    stds = x.std(axis=0, ddof=1)
    guarded = stds == 0
    stds = np.where(guarded, 1.0, stds)
    return ZScoreNormalizer(means, stds, tuple(bool(g) for g in guarded))


def apply_normalizer(norm: ZScoreNormalizer, x) -> np.ndarray:
    return (np.asarray(x, dtype=float) - norm.means) / norm.stds


@dataclass(frozen=True)
class DpiModel:
    weights: np.ndarray
    bias: float
    normalizer: ZScoreNormalizer
    l2_lambda: float
    iterations: int
    final_gradient_norm: float
    converged: bool
    objective_trace: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "bias": float(self.bias),
            "normalizer": self.normalizer.to_dict(),
            "meta": {
                "l2_lambda": self.l2_lambda,
                "iterations": self.iterations,
                "final_gradient_norm": self.final_gradient_norm,
                "converged": self.converged,
            },
        }


def penalized_loglik(theta: np.ndarray, X1: np.ndarray, y: np.ndarray, l2_lambda: float) -> float:
    """Mean log-likelihood minus ``l2_lambda/2 * |w|^2``; the bias (last entry) is not penalized."""
    z = X1 @ theta
    ll = np.mean(y * z - np.logaddexp(0.0, z))
    w = theta[:-1]
    return float(ll - 0.5 * l2_lambda * (w @ w))


def penalized_gradient(theta: np.ndarray, X1: np.ndarray, y: np.ndarray, l2_lambda: float) -> np.ndarray:
    g = X1.T @ (y - expit(X1 @ theta)) / len(y)
    g[:-1] -= l2_lambda * theta[:-1]
    return g


def train_logistic(
    X,
    y,
    l2_lambda: float = 1e-4,
    tol: float = 1e-8,
    max_iter: int = 500,
    normalizer: ZScoreNormalizer = None,
) -> DpiModel:
    """Maximize the ridge-penalized mean log-likelihood by damped Newton steps.

    ``X`` must already be normalized; pass the fitted ``normalizer`` so the
    model can score raw feature vectors later. Starts from zero weights, so
    identical inputs give identical models.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(np.unique(y)) < 2:
        raise SingleClass("training data contains a single class")
    n, dim = X.shape
    X1 = np.hstack([X, np.ones((n, 1))])
    ridge = np.full(dim + 1, l2_lambda)
    ridge[-1] = 0.0

    theta = np.zeros(dim + 1)
    obj = penalized_loglik(theta, X1, y, l2_lambda)
    trace = [obj]
    grad = penalized_gradient(theta, X1, y, l2_lambda)
    gnorm = float(np.linalg.norm(grad))
    it = 0
    while gnorm > tol and it < max_iter:
        p = expit(X1 @ theta)
        hess = (X1.T * (p * (1.0 - p))) @ X1 / n + np.diag(ridge)  # negated Hessian
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = grad
        t = 1.0
        while True:
            cand = theta + t * step
            cand_obj = penalized_loglik(cand, X1, y, l2_lambda)
            if cand_obj >= obj or t < 1e-12:
                break
            t *= 0.5
        if cand_obj < obj:
            break
        theta, obj = cand, cand_obj
        trace.append(obj)
        grad = penalized_gradient(theta, X1, y, l2_lambda)
        gnorm = float(np.linalg.norm(grad))
        it += 1

    converged = gnorm <= tol
    if not converged:
        warnings.warn(
            f"logistic fit stopped after {it} iterations with |grad|={gnorm:.3g}", NonConvergence
        )
    return DpiModel(
        weights=theta[:-1].copy(),
        bias=float(theta[-1]),
        normalizer=normalizer if normalizer is not None else identity_normalizer(dim),
        l2_lambda=l2_lambda,
        iterations=it,
        final_gradient_norm=gnorm,
        converged=converged,
        objective_trace=tuple(trace),
    )


def fit_dpi(X_raw, y, **kwargs) -> DpiModel:
    """Fit the normalizer on ``X_raw`` and train the logistic model on the normalized rows."""
    norm = fit_normalizer(X_raw)
    return train_logistic(apply_normalizer(norm, X_raw), y, normalizer=norm, **kwargs)


def dpi_score(model: DpiModel, x_raw):
    """Probability of PVH. Accepts one feature vector or a matrix of rows."""
    z = apply_normalizer(model.normalizer, x_raw) @ model.weights + model.bias
    return expit(z)


def classify(model: DpiModel, x_raw):
    """PVH iff the score is at least 0.5 (ties go to PVH)."""
    score = dpi_score(model, x_raw)
    if np.ndim(score) == 0:
        return Group.PVH if score >= DECISION_THRESHOLD else Group.CONTROL
    return [Group.PVH if s >= DECISION_THRESHOLD else Group.CONTROL for s in score]
