"""Squared-exponential Gaussian process regression.

Hyperparameters are fitted by maximizing the log marginal likelihood with a
multi-start bounded quasi-Newton search in log space. Targets are
standardized before fitting and predictions are returned in target units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .errors import DataError, NumericalError
from .sampling import lhs

__all__ = [
    "Kernel",
    "GpModel",
    "fit",
    "predict",
    "log_marginal_likelihood",
    "LENGTHSCALE_BOUNDS",
    "SIGNAL_VARIANCE_BOUNDS",
    "NOISE_VARIANCE_BOUNDS",
    "DEFAULT_HYPERPARAMETERS",
]

LENGTHSCALE_BOUNDS = (0.01, 10.0)
SIGNAL_VARIANCE_BOUNDS = (1e-4, 1e4)
NOISE_VARIANCE_BOUNDS = (1e-8, 1e-1)
# untuned starting point; MLE should beat it
DEFAULT_HYPERPARAMETERS = {"signal_variance": 1.0, "lengthscale": 1.0, "noise_variance": 1e-6}

JITTER_START = 1e-10
JITTER_MAX = 1e-4
N_RESTARTS = 10

_LOG_2PI = math.log(2 * math.pi)


def _sqdist(A, B):
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    d2 = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * A @ B.T
    )
    return np.maximum(d2, 0.0)


@dataclass(frozen=True)
class Kernel:
    """k(x, x') = signal_variance * exp(-|x - x'|^2 / (2 lengthscale^2))"""

    signal_variance: float
    lengthscale: float

    def __post_init__(self):
        if not (self.signal_variance > 0 and self.lengthscale > 0):
            raise ValueError("signal_variance and lengthscale must be positive")

    def __call__(self, A, B=None):
        B = A if B is None else B
        return self.from_sqdist(_sqdist(A, B))

    def from_sqdist(self, d2):
        return self.signal_variance * np.exp(-0.5 * d2 / self.lengthscale**2)


def _factorize(K, noise_variance, jitter=JITTER_START):
    """Cholesky of K + (noise + jitter) I, escalating jitter tenfold on failure."""
    n = K.shape[0]
    eye = np.eye(n)
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            L = cholesky(K + (noise_variance + jitter) * eye, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            jitter *= 10.0
            continue
        if np.all(np.isfinite(L)):
            return L, jitter
        jitter *= 10.0
    cond = np.linalg.cond(K + noise_variance * eye)
    raise NumericalError(
        f"Cholesky failed up to jitter {JITTER_MAX:g} (condition number ~ {cond:.3e})"
    )


@dataclass(frozen=True, eq=False)
class GpModel:
    kernel: Kernel
    noise_variance: float
    X: np.ndarray
    y: np.ndarray  # standardized
    factor: np.ndarray
    alpha: np.ndarray
    target_mean: float
    target_sd: float
    jitter: float
    log_likelihood: float

    @property
    def hyperparameters(self) -> dict:
        return {
            "signal_variance": float(self.kernel.signal_variance),
            "lengthscale": float(self.kernel.lengthscale),
            "noise_variance": float(self.noise_variance),
            "jitter": float(self.jitter),
        }

    def mean(self, Xs) -> np.ndarray:
        """Posterior mean at the rows of ``Xs`` in target units."""
        Ks = self.kernel(np.atleast_2d(Xs), self.X)
        return self.target_mean + self.target_sd * (Ks @ self.alpha)

    def mean_std(self, Xs) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation at the rows of ``Xs``."""
        Xs = np.atleast_2d(Xs)
        Ks = self.kernel(Xs, self.X)
        mu = Ks @ self.alpha
        v = solve_triangular(self.factor, Ks.T, lower=True, check_finite=False)
        var = self.kernel.signal_variance - np.sum(v * v, axis=0)
        sigma = np.sqrt(np.maximum(var, 0.0))
        return self.target_mean + self.target_sd * mu, self.target_sd * sigma


def condition(X, y, signal_variance, lengthscale, noise_variance, target_mean=0.0, target_sd=1.0):
    """Build a model from fixed hyperparameters; ``y`` is already standardized."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    kernel = Kernel(float(signal_variance), float(lengthscale))
    K = kernel(X)
    L, jitter = _factorize(K, float(noise_variance))
    alpha = cho_solve((L, True), y, check_finite=False)
    ll = -0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * y.size * _LOG_2PI
    return GpModel(
        kernel=kernel,
        noise_variance=float(noise_variance),
        X=X,
        y=y,
        factor=L,
        alpha=alpha,
        target_mean=float(target_mean),
        target_sd=float(target_sd),
        jitter=jitter,
        log_likelihood=float(ll),
    )


def log_marginal_likelihood(signal_variance, lengthscale, noise_variance, X, y) -> float:
    """log p(y | X) under the SE kernel, with ``y`` taken as given (no standardization)."""
    return condition(X, y, signal_variance, lengthscale, noise_variance).log_likelihood


def _neg_lml_and_grad(theta, D2, y, fixed_noise):
    """Negative LML and its gradient in log-parameters.

    ``theta`` is (log sf2, log ell[, log noise]).
    """
    sf2 = math.exp(theta[0])
    ell2 = math.exp(2 * theta[1])
    noise = fixed_noise if fixed_noise is not None else math.exp(theta[2])
    n = y.size
    E = np.exp(-0.5 * D2 / ell2)
    K = sf2 * E
    try:
        L, jitter = _factorize(K, noise)
    except NumericalError:
        return 1e25, np.zeros_like(theta)
    alpha = cho_solve((L, True), y, check_finite=False)
    nll = 0.5 * y @ alpha + np.sum(np.log(np.diag(L))) + 0.5 * n * _LOG_2PI
    Kinv = cho_solve((L, True), np.eye(n), check_finite=False)
    W = np.outer(alpha, alpha) - Kinv
    grad = np.empty_like(theta)
    grad[0] = -0.5 * np.sum(W * K)
    grad[1] = -0.5 * np.sum(W * (K * D2 / ell2))
    if fixed_noise is None:
        grad[2] = -0.5 * noise * np.trace(W)
    return nll, grad


def fit(
    X,
    y,
    rng: np.random.Generator,
    noise_variance: float | None = None,
    n_restarts: int = N_RESTARTS,
) -> GpModel:
    """Fit hyperparameters by maximum marginal likelihood.

    ``noise_variance=None`` fits it within ``NOISE_VARIANCE_BOUNDS``; a number
    pins it (0 gives a noise-free interpolating model, jitter aside).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.size:
        raise DataError(f"X has {X.shape[0]} rows but y has {y.size} entries")
    if y.size < 2:
        raise DataError("need at least two observations to fit")
    if not np.all(np.isfinite(y)):
        raise DataError(f"non-finite targets at indices {np.flatnonzero(~np.isfinite(y)).tolist()}")

    mean = float(np.mean(y))
    sd = float(np.std(y))
    if not sd > 0:
        sd = 1.0
    ys = (y - mean) / sd

    D2 = _sqdist(X, X)
    bounds = [np.log(SIGNAL_VARIANCE_BOUNDS), np.log(LENGTHSCALE_BOUNDS)]
    if noise_variance is None:
        bounds.append(np.log(NOISE_VARIANCE_BOUNDS))
    bounds = np.array(bounds)
    starts = bounds[:, 0] + lhs(n_restarts, len(bounds), rng) * (bounds[:, 1] - bounds[:, 0])

    best_theta, best_val = None, np.inf
    for theta0 in starts:
        res = minimize(
            _neg_lml_and_grad,
            theta0,
            args=(D2, ys, noise_variance),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
        )
        if np.isfinite(res.fun) and res.fun < best_val:
            best_theta, best_val = np.clip(res.x, bounds[:, 0], bounds[:, 1]), res.fun
    if best_theta is None:
        best_theta = starts[0]

    noise = noise_variance if noise_variance is not None else math.exp(best_theta[2])
    return condition(
        X, ys, math.exp(best_theta[0]), math.exp(best_theta[1]), noise, mean, sd
    )


def predict(model: GpModel, x) -> tuple[float, float]:
    """Posterior ``(mu, sigma)`` at one point in target units."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite prediction input")
    mu, sigma = model.mean_std(x)
    return float(mu[0]), float(sigma[0])
