"""Kernel SVM trained by sequential minimal optimization on a precomputed Gram.

Multiclass problems are split one-vs-rest. Cross-Gram matrices passed to
prediction have shape ``(n_train, n_test)``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ConvergenceWarning
from ..gram import GramMatrix, cross_gram, make_psd
from .._validation import check_symmetric

_TAU = 1e-12


@dataclass
class BinarySolution:
    alpha: np.ndarray
    rho: float
    n_iter: int
    violation: float
    objective: float
    trace: list = field(default_factory=list)


def dual_objective(K, y, alpha):
    """``sum(alpha) - 0.5 * (alpha*y)^T K (alpha*y)``."""
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


@njit(cache=True)
def _smo_core(K, y, C, tol, max_iter, record):
    n = y.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a^T Q a - sum(a)
    trace = np.empty(max_iter + 1 if record else 1)
    trace[0] = 0.0
    it = 0
    violation = np.inf
    while it < max_iter:
        i = -1
        j = -1
        best_up = -np.inf
        best_low = np.inf
        for t in range(n):
            score = -y[t] * grad[t]
            if y[t] > 0:
                in_up = alpha[t] < C
                in_low = alpha[t] > 0
            else:
                in_up = alpha[t] > 0
                in_low = alpha[t] < C
            # strict comparisons keep the lowest index on ties
            if in_up and score > best_up:
                best_up = score
                i = t
            if in_low and score < best_low:
                best_low = score
                j = t
        if i < 0 or j < 0:
            violation = 0.0
            break
        violation = best_up - best_low
        if violation <= tol:
            break
        # direction u = y_i e_i - y_j e_j keeps y^T a fixed
        curv = max(K[i, i] + K[j, j] - 2.0 * K[i, j], _TAU)
        step = violation / curv
        step = min(step, C - alpha[i] if y[i] > 0 else alpha[i])
        step = min(step, alpha[j] if y[j] > 0 else C - alpha[j])
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        for t in range(n):
            grad[t] += step * y[t] * (K[t, i] - K[t, j])
        it += 1
        if record:
            # dual objective = -0.5 * sum(a * (grad - 1))
            obj = 0.0
            for t in range(n):
                obj -= 0.5 * alpha[t] * (grad[t] - 1.0)
            trace[it] = obj
    return alpha, grad, it, violation, trace[:it + 1]


def smo(K, y, C, tol=1e-5, max_iter=100_000, record=False):
    """Solve the binary soft-margin SVM dual.

    Maximizes ``sum(a) - 0.5 a^T Q a`` with ``Q = (y y^T) * K`` subject to
    ``0 <= a <= C`` and ``y^T a = 0``. Each step picks the maximal violating
    pair (lowest index on ties) and moves along it with an exact line search
    clipped to the box.

    Parameters
    ----------
    K : ndarray of shape (n, n)
    y : ndarray of shape (n,), entries in {-1, +1}
    C : float
    tol : float
        Stop once the maximal KKT violation drops to ``tol``.
    record : bool
        Keep the dual objective after every step in ``trace``.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    alpha, grad, it, violation, trace = _smo_core(
        K, y, float(C), float(tol), int(max_iter), bool(record))
    if it >= max_iter and violation > tol:
        warnings.warn(f"SMO stopped after {max_iter} iterations with KKT "
                      f"violation {violation:.3g}", ConvergenceWarning,
                      stacklevel=2)
    np.clip(alpha, 0.0, C, out=alpha)
    pos = y > 0
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(yg[free].mean())
    else:
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        ub = yg[up].min() if up.any() else np.inf
        lb = yg[low].max() if low.any() else -np.inf
        rho = float((ub + lb) / 2) if np.isfinite(ub + lb) else 0.0
    return BinarySolution(alpha, rho, int(it), float(max(violation, 0.0)),
                          dual_objective(K, y, alpha), trace.tolist())


@dataclass
class SvmModel:
    """One-vs-rest SVM state.

    ``dual_coef[c]`` holds ``alpha * y`` for the binary problem of class
    ``classes[c]`` over all training points; ``support`` lists training
    indices with a nonzero coefficient in any class.
    """

    classes: np.ndarray
    dual_coef: np.ndarray
    bias: np.ndarray
    support: np.ndarray
    C: float
    tol: float
    jitter: float = 0.0
    n_iter: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    config: object = None


def svm_train(G, labels, C=1.0, tol=1e-5, max_iter=100_000, check=True):
    """Train a one-vs-rest SVM on a precomputed Gram matrix.

    A Gram matrix that fails the PSD check gets diagonal jitter and a
    :class:`~seqkernels.exceptions.JitterWarning`. ``check=False`` skips
    validation for callers that already checked a parent matrix.
    """
    K = G.values if isinstance(G, GramMatrix) else G
    if check:
        K = check_symmetric(K)
    labels = np.asarray(labels)
    if labels.shape != (K.shape[0],):
        raise ValueError(f"{len(labels)} labels for a {K.shape[0]}-point Gram")
    if not C > 0:
        raise ValueError(f"C must be > 0, got {C}")
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    jitter = 0.0
    if check:
        K, jitter = make_psd(K)
    coefs, biases, iters, viols = [], [], [], []
    for c in classes:
        y = np.where(labels == c, 1.0, -1.0)
        sol = smo(K, y, C, tol, max_iter)
        coefs.append(sol.alpha * y)
        biases.append(-sol.rho)
        iters.append(sol.n_iter)
        viols.append(sol.violation)
    coef = np.array(coefs)
    support = np.flatnonzero(np.any(coef != 0, axis=0))
    return SvmModel(classes, coef, np.array(biases), support, C, tol, jitter,
                    iters, viols,
                    getattr(G, "config", None))


def svm_decision_function(model, Gcross):
    """Per-class decision values, shape ``(n_test, n_classes)``."""
    Gcross = np.asarray(Gcross, dtype=np.float64)
    n_train = model.dual_coef.shape[1]
    if Gcross.ndim != 2 or Gcross.shape[0] != n_train:
        raise ValueError(f"cross-Gram must have {n_train} rows, "
                         f"got shape {Gcross.shape}")
    return Gcross.T @ model.dual_coef.T + model.bias[None, :]


def svm_predict(model, Gcross):
    """Class with the largest decision value; ties go to the lowest class index."""
    scores = svm_decision_function(model, Gcross)
    if scores.shape[0] == 0:
        return model.classes[:0]
    return model.classes[np.argmax(scores, axis=1)]


class SequenceSVC(BaseEstimator, ClassifierMixin):
    """One-vs-rest SVM over sequences.

    Parameters
    ----------
    C : float
        Box constraint.
    kernel : SequenceKernel or "precomputed"
        With ``"precomputed"``, ``fit`` takes a Gram matrix and ``predict``
        a cross-Gram of shape ``(n_train, n_test)``.
    tol : float
        KKT tolerance of the SMO solver.
    max_iter : int
    """

    def __init__(self, C=1.0, kernel="precomputed", tol=1e-5, max_iter=100_000):
        self.C = C
        self.kernel = kernel
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        if isinstance(self.kernel, str):
            K = np.asarray(X, dtype=np.float64)
        else:
            self.kernel_ = clone(self.kernel).fit(X)
            K = self.kernel_.gram_
        self.model_ = svm_train(K, y, self.C, self.tol, self.max_iter)
        self.classes_ = self.model_.classes
        return self

    def _cross(self, X):
        check_is_fitted(self, "model_")
        if isinstance(self.kernel, str):
            return np.asarray(X, dtype=np.float64)
        return cross_gram(self.kernel_.X_fit_, X, self.kernel_.config)

    def decision_function(self, X):
        return svm_decision_function(self.model_, self._cross(X))

    def predict(self, X):
        return svm_predict(self.model_, self._cross(X))
