"""Sequence kernel as a scikit-learn transformer."""

import warnings

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_sequences
from .exceptions import GrowthWarning
from .gram import build_gram, cross_gram
from .kernels import (
    GlobalAlignmentConfig,
    KernelConfig,
    StructureKernelParams,
    SymbolKernelParams,
)


class SequenceKernel(BaseEstimator, TransformerMixin):
    """Map sequences to their kernel values against a fitted reference set.

    ``fit(X)`` stores the sequences and their Gram matrix in ``gram_``;
    ``transform(X)`` returns the ``(len(X), n_fit)`` cross-Gram, so the
    output can feed any estimator that accepts precomputed kernels.

    Parameters
    ----------
    structure : {"path", "exponential", "polynomial", "factorial", "ga"}
        Structure kernel; ``"ga"`` selects the Global Alignment baseline,
        which uses ``sigma`` and ignores the other parameters.
    symbol : {"rbf", "linear", "delta"}
    sigma, alpha, c, degree, d_fact, c_hv, c_d : float
        Kernel parameters, see :class:`~seqkernels.kernels.StructureKernelParams`.
    normalize : bool
        Divide by ``sqrt(k(s, s) k(t, t))``.
    n_jobs : int
        Threads used for pairwise evaluations.
    """

    def __init__(self, structure="path", symbol="rbf", sigma=1.0, alpha=1.0,
                 c=1.0, degree=2, d_fact=0, c_hv=0.3, c_d=0.3, normalize=True,
                 n_jobs=1):
        self.structure = structure
        self.symbol = symbol
        self.sigma = sigma
        self.alpha = alpha
        self.c = c
        self.degree = degree
        self.d_fact = d_fact
        self.c_hv = c_hv
        self.c_d = c_d
        self.normalize = normalize
        self.n_jobs = n_jobs

    @property
    def config(self):
        if self.structure == "ga":
            return GlobalAlignmentConfig(self.sigma, self.normalize)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GrowthWarning)
            structure = StructureKernelParams(
                self.structure, alpha=self.alpha, c=self.c, degree=self.degree,
                d_fact=self.d_fact, c_hv=self.c_hv, c_d=self.c_d)
        return KernelConfig(SymbolKernelParams(self.symbol, self.sigma),
                            structure, self.normalize)

    def fit(self, X, y=None):
        self.X_fit_, self.dim_ = check_sequences(X)
        self.gram_ = build_gram(self.X_fit_, self.config,
                                n_jobs=self.n_jobs).values
        return self

    def transform(self, X):
        check_is_fitted(self, "X_fit_")
        seqs, _ = check_sequences(X, dim=self.dim_)
        return cross_gram(seqs, self.X_fit_, self.config, n_jobs=self.n_jobs)

    def fit_transform(self, X, y=None):
        return self.fit(X).gram_.copy()
