"""Decomposable sequence kernels and kernel learners for variable-length sequences."""

__version__ = "0.1.0"

from .data import Dataset, gen_sine_cosine, gen_sine_square_spike, parse_dataset, write_dataset
from .estimator import SequenceKernel
from .exceptions import (
    ConvergenceWarning,
    DimensionError,
    DomainError,
    FormatError,
    GrowthWarning,
    JitterWarning,
    NormalizationError,
    NumericalError,
    ProvenanceWarning,
    SeqKernelError,
    StratificationError,
    UnsupportedError,
)
from .gram import (
    GramMatrix,
    PsdReport,
    build_gram,
    check_psd,
    cross_gram,
    export_csv,
    gram_with_gradients,
    load_gram,
    save_gram,
)
from .kernels import (
    GlobalAlignmentConfig,
    KernelConfig,
    StructureKernelParams,
    StructureMatrix,
    SymbolKernelParams,
    global_alignment_kernel,
    kernel_gradients,
    path_kernel_recursive,
    path_structure_closed_form,
    path_structure_matrix,
    sequence_kernel,
    structure_kernel,
    structure_matrix,
    symbol_kernel,
)
from .learn import (
    SequenceGPClassifier,
    SequenceKernelPCA,
    SequenceSVC,
    fit_hyperparameters,
    gp_fit,
    gp_predict,
    kernel_pca,
    log_marginal_likelihood,
    lml_gradient,
    svm_predict,
    svm_train,
)
from .model_selection import CvReport, nested_cv
