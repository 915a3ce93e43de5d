"""Nested cross-validation over precomputed Gram matrices."""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.model_selection import RepeatedStratifiedKFold

from .exceptions import StratificationError
from .gram import make_psd
from .learn.svm import svm_predict, svm_train

C_GRID = (0.1, 1.0, 10.0, 100.0)
SIGMA_SCALES = (0.25, 0.5, 1.0, 2.0, 4.0)
PATH_GRID = (0.25, 0.3, 0.35, 0.4)
ALPHA_GRID = (1.0, 4.0, 16.0, 64.0)


def median_symbol_distance(sequences, max_symbols=2000, seed=0):
    """Median Euclidean distance between distinct symbols of a dataset."""
    X = np.concatenate([s for s in sequences if len(s)], axis=0)
    if len(X) > max_symbols:
        rng = np.random.default_rng(seed)
        X = X[np.sort(rng.choice(len(X), max_symbols, replace=False))]
    sq = np.sum(X * X, axis=1)
    D = np.sqrt(np.clip(sq[:, None] + sq[None, :] - 2 * X @ X.T, 0, None))
    d = D[np.triu_indices(len(X), 1)]
    d = d[d > 0]
    return float(np.median(d)) if d.size else 1.0


def kernel_grid(structure, symbol="rbf", sequences=None, fixed=None):
    """Candidate kernel parameter dicts for :class:`SequenceKernel`.

    Parameters given in ``fixed`` are not searched. The bandwidth grid is
    scaled by the median symbol distance of ``sequences``.
    """
    fixed = dict(fixed or {})
    axes = {}
    uses_sigma = structure == "ga" or symbol == "rbf"
    if uses_sigma and "sigma" not in fixed:
        scale = median_symbol_distance(sequences) if sequences is not None else 1.0
        axes["sigma"] = [f * scale for f in SIGMA_SCALES]
    if structure == "path":
        if "c_hv" not in fixed:
            axes["c_hv"] = list(PATH_GRID)
        if "c_d" not in fixed:
            axes["c_d"] = list(PATH_GRID)
    elif structure == "exponential" and "alpha" not in fixed:
        axes["alpha"] = list(ALPHA_GRID)
    grid = [dict(fixed)]
    for name, values in axes.items():
        grid = [{**g, name: v} for g in grid for v in values]
    return grid


@dataclass
class CvReport:
    """Outcome of nested cross-validation.

    ``fold_accuracies`` has one entry per outer fold and repetition, in
    split order; ``chosen`` the selected hyperparameters for each.
    """

    fold_accuracies: list
    mean: float
    sd: float
    chosen: list
    times: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    def to_dict(self, include_timings=False):
        d = {"fold_accuracies": self.fold_accuracies, "mean": self.mean,
             "sd": self.sd, "chosen": self.chosen, "settings": self.settings}
        if include_timings:
            d["times"] = self.times
        return d

    def table(self):
        rows = [("fold", "accuracy", "chosen")]
        for k, (acc, ch) in enumerate(zip(self.fold_accuracies, self.chosen)):
            params = " ".join(f"{n}={v:.4g}" if isinstance(v, float)
                              else f"{n}={v}" for n, v in sorted(ch.items()))
            rows.append((str(k), f"{100 * acc:.2f}%", params))
        w0 = max(len(r[0]) for r in rows)
        w1 = max(len(r[1]) for r in rows)
        lines = [f"{a:>{w0}}  {b:>{w1}}  {c}" for a, b, c in rows]
        lines.append(f"accuracy: {100 * self.mean:.2f} +- {100 * self.sd:.2f}%")
        return "\n".join(lines)


def _check_strata(labels, n_splits):
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise StratificationError("need at least two classes")
    if counts.min() < n_splits:
        small = classes[np.argmin(counts)]
        raise StratificationError(
            f"class {small!r} has {counts.min()} members, fewer than "
            f"{n_splits} folds")


def _accuracy(K, labels, train, test, C, tol):
    model = svm_train(K[np.ix_(train, train)], labels[train], C, tol,
                      check=False)
    pred = svm_predict(model, K[np.ix_(train, test)])
    return float(np.mean(pred == labels[test]))


def _select(grams, params, labels, train, C_grid, n_splits, n_repeats, seed,
            tol):
    sub = labels[train]
    _check_strata(sub, n_splits)
    inner = list(RepeatedStratifiedKFold(
        n_splits=n_splits, n_repeats=n_repeats,
        random_state=seed).split(np.zeros(len(sub)), sub))
    best = None
    for g, (K, p) in enumerate(zip(grams, params)):
        for C in C_grid:
            accs = [_accuracy(K, labels, train[tr], train[te], C, tol)
                    for tr, te in inner]
            score = round(float(np.mean(accs)), 12)
            # higher accuracy, then smaller C, then larger sigma, then grid order
            key = (-score, C, -p.get("sigma", 0.0), g)
            if best is None or key < best[0]:
                best = (key, g, C)
    return best[1], best[2]


def nested_cv(grams, params, labels, C_grid=C_GRID, n_splits=3, r_out=3,
              r_in=20, seed=0, tol=1e-3, n_jobs=1):
    """Nested cross-validated SVM accuracy.

    Parameters
    ----------
    grams : list of ndarray
        Gram matrix over the whole dataset for each kernel candidate.
    params : list of dict
        Kernel parameters matching ``grams``; reported for chosen folds.
    labels : array-like
    C_grid : sequence of float
        SVM box constraints searched in the inner loop.
    n_splits : int
        Folds of both the outer and the inner loop.
    r_out, r_in : int
        Repetitions of the outer and inner loop.
    seed : int
    tol : float
        SMO tolerance.
    n_jobs : int
        Threads over outer folds; results do not depend on it.
    """
    labels = np.asarray(labels)
    _check_strata(labels, n_splits)
    # principal submatrices of a PSD matrix are PSD: check each Gram once
    grams = [make_psd(np.asarray(K, dtype=np.float64))[0] for K in grams]
    rng = np.random.default_rng(seed)
    outer_seed, *inner_seeds = rng.integers(0, 2**31 - 1, size=1 + n_splits * r_out)
    outer = list(RepeatedStratifiedKFold(
        n_splits=n_splits, n_repeats=r_out,
        random_state=int(outer_seed)).split(np.zeros(len(labels)), labels))

    def run(k):
        start = time.perf_counter()
        train, test = outer[k]
        g, C = _select(grams, params, labels, train, C_grid, n_splits, r_in,
                       int(inner_seeds[k]), tol)
        acc = _accuracy(grams[g], labels, train, test, C, tol)
        return acc, {**params[g], "C": C}, time.perf_counter() - start

    if n_jobs == 1:
        results = [run(k) for k in range(len(outer))]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(run, range(len(outer))))
    accs = [r[0] for r in results]
    return CvReport(
        accs, float(np.mean(accs)),
        float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0,
        [r[1] for r in results], [r[2] for r in results],
        {"n_splits": n_splits, "r_out": r_out, "r_in": r_in, "seed": seed,
         "C_grid": list(C_grid), "tol": tol})
