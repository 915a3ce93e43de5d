"""Kernel principal component analysis on precomputed Gram matrices."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin, clone
from sklearn.utils.validation import check_is_fitted

from ..exceptions import DomainError
from ..gram import GramMatrix, cross_gram
from .._validation import check_symmetric


@dataclass
class EmbeddingResult:
    coordinates: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = None


def center_gram(K):
    """Double-center ``K``: ``H K H`` with ``H = I - 11^T / n``."""
    row = K.mean(axis=0)
    return K - row[None, :] - K.mean(axis=1)[:, None] + row.mean()


def kernel_pca(G, p=2):
    """Top-``p`` kernel principal components of a Gram matrix.

    Scores are the eigenvectors of the centered Gram scaled by the square
    root of their eigenvalue. Eigenvalues come back nonincreasing; tiny
    negative ones from rounding give zero scores.
    """
    K = check_symmetric(G.values if isinstance(G, GramMatrix) else G)
    n = K.shape[0]
    if int(p) != p or p < 1 or p > n:
        raise DomainError(f"number of components must be in [1, {n}], got {p}")
    Kc = center_gram(K)
    Kc = 0.5 * (Kc + Kc.T)
    w, V = np.linalg.eigh(Kc)
    order = np.argsort(w, kind="stable")[::-1][:p]
    w, V = w[order], V[:, order]
    # fix the sign of each eigenvector for reproducible output
    flip = np.sign(V[np.argmax(np.abs(V), axis=0), np.arange(p)])
    V = V * np.where(flip == 0, 1.0, flip)
    coords = V * np.sqrt(np.clip(w, 0.0, None))
    coords -= coords.mean(axis=0)
    return EmbeddingResult(coords, w, V)


class SequenceKernelPCA(BaseEstimator, TransformerMixin):
    """Kernel PCA with a sequence kernel.

    Parameters
    ----------
    n_components : int
    kernel : SequenceKernel or "precomputed"
        With ``"precomputed"``, ``fit`` takes a Gram matrix and
        ``transform`` a cross-Gram of shape ``(n_train, n_test)``.
    """

    def __init__(self, n_components=2, kernel="precomputed"):
        self.n_components = n_components
        self.kernel = kernel

    def _gram(self, X):
        if isinstance(self.kernel, str):
            return np.asarray(X, dtype=np.float64)
        self.kernel_ = clone(self.kernel).fit(X)
        return self.kernel_.gram_

    def fit(self, X, y=None):
        K = self._gram(X)
        res = kernel_pca(K, self.n_components)
        self.eigenvalues_ = res.eigenvalues
        self.embedding_ = res.coordinates
        self._fit_col_means = K.mean(axis=0)
        self._fit_mean = K.mean()
        pos = res.eigenvalues > 0
        self.alphas_ = np.zeros_like(res.eigenvectors)
        self.alphas_[:, pos] = res.eigenvectors[:, pos] / np.sqrt(
            res.eigenvalues[pos])
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_

    def transform(self, X):
        check_is_fitted(self, "alphas_")
        if isinstance(self.kernel, str):
            Kx = np.asarray(X, dtype=np.float64).T
        else:
            Kx = cross_gram(X, self.kernel_.X_fit_, self.kernel_.config)
        Kc = (Kx - Kx.mean(axis=1)[:, None] - self._fit_col_means[None, :]
              + self._fit_mean)
        return Kc @ self.alphas_
