from .gp import (
    FitResult,
    GpModel,
    SequenceGPClassifier,
    fit_hyperparameters,
    gp_fit,
    gp_predict,
    gp_predict_labels,
    lml_gradient,
    log_marginal_likelihood,
    one_hot,
)
from .pca import EmbeddingResult, SequenceKernelPCA, center_gram, kernel_pca
from .svm import SequenceSVC, SvmModel, smo, svm_decision_function, svm_predict, svm_train
