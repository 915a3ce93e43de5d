import dataclasses
import math
import warnings

import numpy as np
import pytest

from seqkernels import SequenceKernel
from seqkernels.data import gen_sine_cosine
from seqkernels.exceptions import DomainError, GrowthWarning, JitterWarning, NumericalError
from seqkernels.gram import build_gram
from seqkernels.kernels import with_parameters
from seqkernels.learn import (
    SequenceGPClassifier,
    SequenceKernelPCA,
    SequenceSVC,
    center_gram,
    fit_hyperparameters,
    gp_fit,
    gp_predict,
    kernel_pca,
    lml_gradient,
    log_marginal_likelihood,
    one_hot,
    smo,
    svm_decision_function,
    svm_predict,
    svm_train,
)
from seqkernels.learn.svm import dual_objective

from conftest import path_config, random_sequences


@pytest.fixture(scope="module")
def toy():
    ds = gen_sine_cosine(20, (20, 40), 0.1, seed=3)
    G = build_gram(ds.sequences, path_config(0.3, 0.3, normalize=True)).values
    return ds, G, np.array(ds.labels)


# ---------------------------------------------------------------- kernel PCA

def test_pca_identity():
    res = kernel_pca(np.eye(3), 2)
    assert np.allclose(res.eigenvalues, [1.0, 1.0])
    assert np.allclose(res.coordinates.mean(axis=0), 0, atol=1e-10)


def test_pca_duplicates_coincide(rng):
    data = random_sequences(rng, 6, dim=1)
    data.append(data[2].copy())
    G = build_gram(data, path_config(normalize=True))
    X = kernel_pca(G, 3).coordinates
    assert np.linalg.norm(X[2] - X[6]) < 1e-10


def test_pca_reconstruction_bound(toy):
    _, G, _ = toy
    Kc = center_gram(G)
    lam = np.sort(np.linalg.eigvalsh(Kc))[::-1]
    for p in (1, 2, 5):
        X = kernel_pca(G, p).coordinates
        err = np.linalg.norm(Kc - X @ X.T)
        assert err <= math.sqrt(np.sum(lam[p:] ** 2)) + 1e-8


def test_pca_eigenvalues_nonincreasing(toy):
    res = kernel_pca(toy[1], 6)
    assert np.all(np.diff(res.eigenvalues) <= 1e-12)
    assert res.eigenvalues.min() >= -1e-8 * res.eigenvalues.max()


def test_pca_component_count():
    with pytest.raises(DomainError):
        kernel_pca(np.eye(3), 4)
    with pytest.raises(DomainError):
        kernel_pca(np.eye(3), 0)


def test_pca_estimator_transform_matches_training_scores(toy):
    ds, G, _ = toy
    est = SequenceKernelPCA(2, SequenceKernel(c_hv=0.3, c_d=0.3))
    X = est.fit_transform(ds.sequences)
    assert np.allclose(X, kernel_pca(G, 2).coordinates, atol=1e-9)
    assert np.allclose(est.transform(ds.sequences[:5]), X[:5], atol=1e-8)


# ---------------------------------------------------------------- SMO

def project_box_hyperplane(z, y, C):
    """Euclidean projection onto {0 <= a <= C, y^T a = 0} by bisection."""
    lo, hi = -np.abs(z).max() - C - 1, np.abs(z).max() + C + 1
    for _ in range(60):
        nu = 0.5 * (lo + hi)
        if y @ np.clip(z - nu * y, 0, C) > 0:
            lo = nu
        else:
            hi = nu
    return np.clip(z - 0.5 * (lo + hi) * y, 0, C)


def reference_dual(K, y, C, iters=20000):
    """Accelerated projected gradient ascent on the SVM dual."""
    Q = np.outer(y, y) * K
    step = 1.0 / np.linalg.eigvalsh(Q)[-1]
    a = b = np.zeros(len(y))
    t = 1.0
    for _ in range(iters):
        a_new = project_box_hyperplane(b + step * (1 - Q @ b), y, C)
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        b = a_new + (t - 1) / t_new * (a_new - a)
        done = np.max(np.abs(a_new - a)) < 1e-14
        a, t = a_new, t_new
        if done:
            break
    return dual_objective(K, y, a)


@pytest.mark.parametrize("C", [0.5, 10.0])
def test_smo_matches_reference_qp(toy, C):
    _, G, labels = toy
    y = np.where(labels == labels[0], 1.0, -1.0)
    sol = smo(G, y, C, tol=1e-9)
    ref = reference_dual(G, y, C)
    assert abs(sol.objective - ref) <= 1e-6 * max(1.0, abs(ref))
    assert np.all((sol.alpha >= 0) & (sol.alpha <= C))
    assert abs(y @ sol.alpha) < 1e-10


def test_smo_objective_nondecreasing_and_kkt(toy):
    _, G, labels = toy
    y = np.where(labels == labels[0], 1.0, -1.0)
    sol = smo(G, y, 5.0, tol=1e-6, record=True)
    trace = np.array(sol.trace)
    assert len(trace) == sol.n_iter + 1
    assert np.all(np.diff(trace) >= -1e-12)
    assert sol.violation <= 1e-6
    assert trace[-1] == pytest.approx(sol.objective, rel=1e-10)


def test_separable_linear_toy():
    seqs = [[1.0], [2.0], [-1.0], [-2.0]]
    labels = ["a", "a", "b", "b"]
    cfg = path_config(symbol="linear")
    G = build_gram(seqs, cfg).values
    model = svm_train(G, labels, C=10.0)
    assert list(svm_predict(model, G)) == labels


def test_indistinguishable_classes():
    G = np.ones((6, 6))
    labels = np.array([0, 0, 0, 1, 1, 1])
    model = svm_train(G, labels, C=1.0)
    scores = svm_decision_function(model, G)
    assert np.allclose(scores[:, 0], -scores[:, 1])
    assert np.mean(svm_predict(model, G) == labels) == 0.5


def test_empty_test_set(toy):
    _, G, labels = toy
    model = svm_train(G, labels)
    assert svm_predict(model, np.zeros((len(labels), 0))).shape == (0,)


def test_predict_invariant_to_common_bias_shift(toy):
    _, G, labels = toy
    model = svm_train(G, labels, C=1.0)
    shifted = dataclasses.replace(model, bias=model.bias + 3.7)
    assert np.array_equal(svm_predict(model, G), svm_predict(shifted, G))


def test_relabeling_permutes_decision_columns(rng):
    data = random_sequences(rng, 12, dim=1)
    G = build_gram(data, path_config(normalize=True)).values
    labels = np.array([0, 1, 2] * 4)
    renamed = np.array(["z", "y", "x"])[labels]
    a = svm_decision_function(svm_train(G, labels), G)
    b = svm_decision_function(svm_train(G, renamed), G)
    # classes sort as x, y, z, i.e. 2, 1, 0
    assert np.allclose(a, b[:, ::-1])


def test_training_is_deterministic(toy):
    _, G, labels = toy
    a, b = svm_train(G, labels, C=3.0), svm_train(G, labels, C=3.0)
    assert a.dual_coef.tobytes() == b.dual_coef.tobytes()
    assert a.bias.tobytes() == b.bias.tobytes()


def test_non_psd_gram_gets_jitter():
    G = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.warns(JitterWarning):
        model = svm_train(G, [0, 1])
    assert model.jitter > 0


def test_svm_validation():
    with pytest.raises(ValueError):
        svm_train(np.eye(3), [0, 0, 0])
    with pytest.raises(ValueError):
        svm_train(np.eye(3), [0, 1, 0], C=0)
    model = svm_train(np.eye(2), [0, 1])
    with pytest.raises(ValueError):
        svm_predict(model, np.eye(3))


def test_svc_estimator(toy):
    ds, G, labels = toy
    clf = SequenceSVC(C=1.0, kernel=SequenceKernel()).fit(ds.sequences, labels)
    assert np.mean(clf.predict(ds.sequences) == labels) == 1.0
    pre = SequenceSVC(C=1.0).fit(G, labels)
    assert np.array_equal(pre.predict(G), clf.predict(ds.sequences))


# ---------------------------------------------------------------- GP

def test_one_hot():
    Y, classes = one_hot(["b", "a", "b"])
    assert list(classes) == ["a", "b"]
    assert np.array_equal(Y, [[0, 1], [1, 0], [0, 1]])


def test_gp_large_noise_predicts_majority(toy):
    _, G, labels = toy
    idx = np.r_[np.flatnonzero(labels == "sine")[:15], np.flatnonzero(labels == "cosine")[:5]]
    K = G[np.ix_(idx, idx)]
    model = gp_fit(K, labels[idx], noise=1e8)
    mean, _ = gp_predict(model, G[idx])
    assert np.all(model.classes[np.argmax(mean, axis=1)] == "sine")


def test_gp_interpolates_training_points(toy):
    _, G, labels = toy
    model = gp_fit(G, labels, noise=1e-9)
    mean, var = gp_predict(model, G, np.diag(G))
    assert np.allclose(mean, model.Y, atol=1e-3)
    assert np.all(var < 1e-3)


def test_gp_single_training_point():
    model = gp_fit(np.array([[2.0]]), ["a"], noise=0.5, classes=np.array(["a", "b"]))
    mean, _ = gp_predict(model, np.array([[0.7, 1.3]]))
    assert np.allclose(mean, np.outer([0.7, 1.3], [1.0, 0.0]) / 2.5)


def test_gp_argmax_invariant_to_target_scaling(toy):
    _, G, labels = toy
    model = gp_fit(G, labels)
    scaled = dataclasses.replace(model, weights=model.weights * 4.2)
    a, _ = gp_predict(model, G)
    b, _ = gp_predict(scaled, G)
    assert np.array_equal(np.argmax(a, axis=1), np.argmax(b, axis=1))


def test_gp_factorization_failure():
    with pytest.raises(NumericalError):
        gp_fit(-10 * np.eye(3), [0, 1, 0], noise=0.1)


def test_gp_rejects_nonpositive_noise():
    with pytest.raises(ValueError):
        gp_fit(np.eye(2), [0, 1], noise=0.0)


def test_lml_identity_example():
    n = 5
    Y = np.zeros((n, 1))
    Y[2] = 1
    L = log_marginal_likelihood(np.eye(n), Y, 1e-12)
    assert L == pytest.approx(-0.5 - n / 2 * math.log(2 * math.pi), abs=1e-9)


def test_lml_permutation_invariant(toy):
    _, G, labels = toy
    Y, _ = one_hot(labels)
    perm = np.random.default_rng(1).permutation(len(labels))
    a = log_marginal_likelihood(G, Y, 0.1)
    b = log_marginal_likelihood(G[np.ix_(perm, perm)], Y[perm], 0.1)
    assert a == pytest.approx(b, rel=1e-12)


def lml_central_difference(data, cfg, Y, noise, h=1e-5):
    x = np.array([*[getattr(cfg.symbol if n == "sigma" else cfg.structure, n)
                    for n in ("sigma", "c_hv", "c_d")], noise])
    out = []
    for k in range(len(x)):
        vals = []
        for sign in (1, -1):
            z = x.copy()
            z[k] += sign * h
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", GrowthWarning)
                c = with_parameters(cfg, z[:-1])
            G = build_gram(data, c).values
            vals.append(log_marginal_likelihood(G, Y, z[-1]))
        out.append((vals[0] - vals[1]) / (2 * h))
    return np.array(out)


@pytest.mark.parametrize("normalize", [False, True])
def test_lml_gradient_finite_differences(rng, normalize):
    data = random_sequences(rng, 8, max_len=8, dim=1)
    labels = np.array([0, 1] * 4)
    Y, _ = one_hot(labels)
    cfg = path_config(0.2, 0.3, sigma=1.1, normalize=normalize)
    val, grad = lml_gradient(data, cfg, Y, 0.2)
    assert val == pytest.approx(log_marginal_likelihood(
        build_gram(data, cfg).values, Y, 0.2), rel=1e-12)
    num = lml_central_difference(data, cfg, Y, 0.2)
    assert np.max(np.abs(grad - num) / np.maximum(np.abs(num), 1e-6)) < 1e-4


def test_gp_classifier_estimator(toy):
    ds, G, labels = toy
    clf = SequenceGPClassifier(noise=0.1).fit(G, labels)
    assert np.mean(clf.predict(G) == labels) == 1.0
    assert np.isfinite(clf.log_marginal_likelihood_)


# ---------------------------------------------------------------- hyperparameter fitting

@pytest.fixture(scope="module")
def small_toy():
    return gen_sine_cosine(5, (15, 25), 0.1, seed=7)


def test_fit_trace_is_monotone(small_toy):
    res = fit_hyperparameters(small_toy.sequences, small_toy.labels,
                              path_config(normalize=True), budget=15)
    assert np.all(np.diff(res.trace) >= 0)
    assert res.lml == res.trace[-1]
    assert res.lml > res.trace[0]


def test_fit_zero_budget_returns_start(small_toy):
    cfg0 = path_config(normalize=True)
    res = fit_hyperparameters(small_toy.sequences, small_toy.labels, cfg0, budget=0)
    assert res.config is cfg0 and res.noise == 0.1
    assert res.status == "budget_exhausted"


def test_fit_is_deterministic(small_toy):
    cfg0 = path_config(normalize=True)
    a = fit_hyperparameters(small_toy.sequences, small_toy.labels, cfg0, budget=5)
    b = fit_hyperparameters(small_toy.sequences, small_toy.labels, cfg0, budget=5)
    assert a.config == b.config and a.trace == b.trace


def test_fit_from_optimum_does_not_move(small_toy):
    data, labels = small_toy.sequences, small_toy.labels
    fixed = ("sigma", "c_d", "noise")
    cfg0 = path_config(0.3, 0.2, normalize=True)
    first = fit_hyperparameters(data, labels, cfg0, budget=200, fixed=fixed, gtol=1e-9)
    assert first.status == "converged"
    second = fit_hyperparameters(data, labels, first.config, budget=50,
                                 fixed=fixed, noise=first.noise)
    assert second.config.structure.c_hv == pytest.approx(
        first.config.structure.c_hv, rel=1e-4)
    assert second.lml == pytest.approx(first.lml, rel=1e-10)
    assert second.config.structure.c_d == 0.2


def test_fit_stops_at_parameter_bound(small_toy):
    res = fit_hyperparameters(small_toy.sequences, small_toy.labels,
                              path_config(0.3, 0.2, normalize=True), budget=200,
                              fixed=("sigma", "c_hv", "noise"))
    assert res.status == "converged"
    assert res.config.structure.c_d == pytest.approx(1e-5)


def test_fit_rejects_unknown_fixed(small_toy):
    with pytest.raises(ValueError):
        fit_hyperparameters(small_toy.sequences, small_toy.labels,
                            path_config(), fixed=("gamma",))
