"""Gaussian-process regression onto one-hot class targets.

Classification is treated as regression to a 1-of-C encoding with
Gaussian noise, which keeps the marginal likelihood in closed form and
lets kernel parameters be learned by maximizing it.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.utils.validation import check_is_fitted

from ..exceptions import GrowthWarning, NumericalError, SeqKernelError
from ..gram import GramMatrix, cross_gram, gram_with_gradients
from ..kernels import parameter_names, parameter_values, with_parameters
from .._validation import check_symmetric

_JITTER_ATTEMPTS = 3
# parameters live in [exp(lo), exp(hi)] during fitting
_LOG_BOUNDS = (math.log(1e-5), math.log(1e3))


def one_hot(labels, classes=None):
    """Targets of shape ``(n, n_classes)`` with a single 1 per row."""
    labels = np.asarray(labels)
    if classes is None:
        classes = np.unique(labels)
    Y = (labels[:, None] == np.asarray(classes)[None, :]).astype(np.float64)
    return Y, np.asarray(classes)


def _factor(K, noise):
    """Lower Cholesky factor of ``K + noise*I`` with escalating jitter.

    Returns the factor and the jitter that was needed.
    """
    n = K.shape[0]
    A = K + noise * np.eye(n)
    try:
        return cholesky(A, lower=True), 0.0
    except (LinAlgError, ValueError):
        pass
    jitter = 1e-6 * max(np.trace(K) / max(n, 1), 1e-300)
    for _ in range(_JITTER_ATTEMPTS):
        try:
            return cholesky(A + jitter * np.eye(n), lower=True), jitter
        except (LinAlgError, ValueError):
            jitter *= 10
    raise NumericalError("K + noise*I is not positive definite after jitter")


@dataclass
class GpModel:
    factor: np.ndarray
    weights: np.ndarray
    Y: np.ndarray
    classes: np.ndarray
    noise: float
    jitter: float = 0.0
    config: object = None


def _gram_values(G):
    return check_symmetric(G.values if isinstance(G, GramMatrix) else G)


def gp_fit(G, labels, noise=0.1, classes=None):
    """Condition a GP on one-hot targets built from ``labels``."""
    if not noise > 0:
        raise ValueError(f"noise variance must be > 0, got {noise}")
    K = _gram_values(G)
    Y, classes = one_hot(labels, classes)
    if Y.shape[0] != K.shape[0]:
        raise ValueError(f"{Y.shape[0]} labels for a {K.shape[0]}-point Gram")
    L, jitter = _factor(K, noise)
    weights = cho_solve((L, True), Y)
    return GpModel(L, weights, Y, classes, noise, jitter,
                   getattr(G, "config", None))


def gp_predict(model, Gcross, Gtestdiag=None):
    """Posterior mean per class, and the latent variance when ``Gtestdiag`` is given.

    Parameters
    ----------
    model : GpModel
    Gcross : ndarray of shape (n_train, n_test)
    Gtestdiag : ndarray of shape (n_test,), optional
        Prior variances ``k(x, x)`` of the test points.

    Returns
    -------
    mean : ndarray of shape (n_test, n_classes)
    var : ndarray of shape (n_test,) or None
    """
    Gcross = np.asarray(Gcross, dtype=np.float64)
    if Gcross.ndim != 2 or Gcross.shape[0] != model.factor.shape[0]:
        raise ValueError(f"cross-Gram must have {model.factor.shape[0]} rows, "
                         f"got shape {Gcross.shape}")
    mean = Gcross.T @ model.weights
    if Gtestdiag is None:
        return mean, None
    V = solve_triangular(model.factor, Gcross, lower=True)
    var = np.asarray(Gtestdiag, dtype=np.float64) - np.sum(V * V, axis=0)
    return mean, var


def gp_predict_labels(model, Gcross):
    mean, _ = gp_predict(model, Gcross)
    if mean.shape[0] == 0:
        return model.classes[:0]
    return model.classes[np.argmax(mean, axis=1)]


def log_marginal_likelihood(G, Y, noise):
    """Sum over target columns of the GP log evidence.

    ``sum_c [-0.5 y_c^T A^{-1} y_c - 0.5 log det A - n/2 log(2 pi)]`` with
    ``A = K + noise*I``.
    """
    K = _gram_values(G)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    L, _ = _factor(K, noise)
    return _lml_from_factor(L, Y)


def _lml_from_factor(L, Y):
    n, c = Y.shape
    W = cho_solve((L, True), Y)
    return float(-0.5 * np.sum(Y * W) - c * np.sum(np.log(np.diag(L)))
                 - 0.5 * c * n * math.log(2 * math.pi))


def lml_gradient(data, cfg, Y, noise):
    """Log marginal likelihood and its gradient.

    The gradient runs over :func:`~seqkernels.kernels.parameter_names`
    of ``cfg`` followed by the noise variance.

    Returns
    -------
    lml : float
    grad : ndarray of shape (n_params + 1,)
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    K, dK = gram_with_gradients(data, cfg)
    L, _ = _factor(K, noise)
    n, c = Y.shape
    W = cho_solve((L, True), Y)
    Ainv = cho_solve((L, True), np.eye(n))
    # dL/dtheta = 0.5 tr((W W^T - c A^{-1}) dA/dtheta)
    inner = W @ W.T - c * Ainv
    grad = [0.5 * np.sum(inner * d) for d in dK]
    grad.append(0.5 * np.trace(inner))
    return _lml_from_factor(L, Y), np.array(grad)


@dataclass
class FitResult:
    """Outcome of marginal-likelihood hyperparameter fitting.

    ``status`` is one of ``"converged"``, ``"stalled"`` (no step improved
    the objective) or ``"budget_exhausted"``.
    """

    config: object
    noise: float
    lml: float
    status: str
    n_iter: int
    trace: list = field(default_factory=list)
    history: list = field(default_factory=list)
    parameter_names: list = field(default_factory=list)


def fit_hyperparameters(data, labels, cfg0, budget=50, noise=0.1, fixed=(),
                        gtol=1e-6, max_step=2.0):
    """Maximize the GP marginal likelihood over kernel parameters and noise.

    Gradient ascent on log-parameters with a backtracking line search.
    Accepted steps never decrease the objective, and the best configuration
    seen is returned.

    Parameters
    ----------
    data : list of sequences
    labels : array-like
        Class labels, one-hot encoded internally.
    cfg0 : KernelConfig
        Starting configuration; must be differentiable.
    budget : int
        Maximum number of gradient iterations.
    noise : float
        Starting noise variance.
    fixed : iterable of str
        Parameter names (including ``"noise"``) held at their start value.
    gtol : float
        Stop when the norm of the free log-gradient falls below this.
    max_step : float
        Largest step length in log-parameter space.
    """
    names = parameter_names(cfg0) + ["noise"]
    unknown = set(fixed) - set(names)
    if unknown:
        raise ValueError(f"unknown parameters {sorted(unknown)}")
    free = np.array([n not in fixed for n in names])
    Y, _ = one_hot(labels)
    x = np.log(np.array(parameter_values(cfg0) + [noise], dtype=np.float64))

    def unpack(x):
        theta = np.exp(x)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GrowthWarning)
            return with_parameters(cfg0, theta[:-1]), float(theta[-1])

    def evaluate(x):
        cfg, nz = unpack(x)
        try:
            with np.errstate(all="ignore"):
                val, g = lml_gradient(data, cfg, Y, nz)
        except (SeqKernelError, LinAlgError, ValueError):
            return -np.inf, None
        if not np.isfinite(val) or not np.all(np.isfinite(g)):
            return -np.inf, None
        g = g * np.exp(x) * free  # chain rule into log space
        # drop components pushing against an active bound
        g[(x <= _LOG_BOUNDS[0]) & (g < 0)] = 0.0
        g[(x >= _LOG_BOUNDS[1]) & (g > 0)] = 0.0
        return val, g

    val, g = evaluate(x)
    if g is None:
        raise NumericalError("marginal likelihood is not finite at the start")
    trace, history = [val], [np.exp(x).tolist()]
    step = max_step / 4
    status = "budget_exhausted"
    it = 0
    for it in range(budget):
        gnorm = float(np.linalg.norm(g))
        if gnorm < gtol:
            status = "converged"
            break
        direction = g / gnorm
        eta = step
        accepted = False
        for _ in range(40):
            x_new = np.where(free, np.clip(x + eta * direction, *_LOG_BOUNDS), x)
            new_val, new_g = evaluate(x_new)
            if new_g is not None and new_val >= val + 1e-4 * eta * gnorm:
                accepted = True
                break
            eta *= 0.5
            if eta < 1e-10:
                break
        if not accepted:
            status = "converged" if gnorm < 1e-3 * max(1.0, abs(val)) \
                else "stalled"
            break
        x, val, g = x_new, new_val, new_g
        trace.append(val)
        history.append(np.exp(x).tolist())
        step = min(2 * eta, max_step)
    else:
        it = budget
    if len(trace) == 1:
        # no accepted step: hand back the start point untouched by exp/log
        return FitResult(cfg0, noise, val, status, it, trace, history, names)
    cfg, nz = unpack(x)
    return FitResult(cfg, nz, val, status, it, trace, history, names)


class SequenceGPClassifier(BaseEstimator, ClassifierMixin):
    """GP regression onto one-hot targets, predicting the argmax class.

    Parameters
    ----------
    noise : float
        Gaussian noise variance.
    kernel : SequenceKernel or "precomputed"
        With ``"precomputed"``, ``fit`` takes a Gram matrix and ``predict``
        a cross-Gram of shape ``(n_train, n_test)``.
    """

    def __init__(self, noise=0.1, kernel="precomputed"):
        self.noise = noise
        self.kernel = kernel

    def fit(self, X, y):
        if isinstance(self.kernel, str):
            K = np.asarray(X, dtype=np.float64)
        else:
            self.kernel_ = clone(self.kernel).fit(X)
            K = self.kernel_.gram_
        self.model_ = gp_fit(K, y, self.noise)
        self.classes_ = self.model_.classes
        self.log_marginal_likelihood_ = _lml_from_factor(self.model_.factor,
                                                         self.model_.Y)
        return self

    def _cross(self, X):
        check_is_fitted(self, "model_")
        if isinstance(self.kernel, str):
            return np.asarray(X, dtype=np.float64)
        return cross_gram(self.kernel_.X_fit_, X, self.kernel_.config)

    def decision_function(self, X):
        return gp_predict(self.model_, self._cross(X))[0]

    def predict(self, X):
        return gp_predict_labels(self.model_, self._cross(X))
