"""Decomposable sequence kernels.

A sequence kernel in this family compares every symbol of one sequence
with every symbol of the other and weights each comparison by a kernel on
the two positions::

    k(s, t) = sum_ij  k_sym(s_i, t_j) * k_pos(i, j)

Positions are 1-based throughout this module.
"""

import math
import threading
import warnings
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np
from numba import njit
from scipy.signal import lfilter
from scipy.special import gammaln

from ._validation import check_pair
from .exceptions import (
    DimensionError,
    DomainError,
    GrowthWarning,
    NormalizationError,
    UnsupportedError,
)

SYMBOL_KINDS = ("rbf", "linear", "delta")
STRUCTURE_KINDS = ("exponential", "polynomial", "factorial", "path")

# n! fits in a signed 64-bit integer up to n = 20
_EXACT_FACTORIAL_MAX = 20


class _EvalCounter:
    """Thread-safe count of structure-kernel evaluations."""

    def __init__(self):
        self._lock = threading.Lock()
        self.count = 0

    def add(self, n):
        with self._lock:
            self.count += n

    def reset(self):
        with self._lock:
            self.count = 0


structure_evaluations = _EvalCounter()


def _check_path_params(c_hv, c_d):
    if not (math.isfinite(c_hv) and math.isfinite(c_d)):
        raise DomainError("path weights must be finite")
    if c_hv < 0 or c_d < 0:
        raise DomainError(
            f"path weights must be >= 0, got c_hv={c_hv}, c_d={c_d}")


@dataclass(frozen=True)
class SymbolKernelParams:
    """Kernel on individual symbols.

    ``rbf`` is ``exp(-|a-b|^2 / (2 sigma^2))``, ``linear`` the inner
    product, ``delta`` the indicator of equality.
    """

    kind: str = "rbf"
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in SYMBOL_KINDS:
            raise DomainError(f"unknown symbol kernel {self.kind!r}")
        if self.kind == "rbf" and not (
                math.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"rbf bandwidth must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class StructureKernelParams:
    """Kernel on pairs of positions.

    Only the fields belonging to ``kind`` are used:

    * ``exponential``: ``alpha``, value ``exp(-(i-j)^2 / alpha)``
    * ``polynomial``: ``c`` and ``degree``, value ``(i*j + c)^degree``
    * ``factorial``: ``d_fact``, value ``(i + j - d_fact)!``
    * ``path``: ``c_hv`` and ``c_d``, weights of horizontal/vertical and
      diagonal moves through the alignment lattice
    """

    kind: str = "path"
    alpha: float = 1.0
    c: float = 1.0
    degree: int = 2
    d_fact: int = 0
    c_hv: float = 0.3
    c_d: float = 0.3

    def __post_init__(self):
        if self.kind not in STRUCTURE_KINDS:
            raise DomainError(f"unknown structure kernel {self.kind!r}")
        if self.kind == "exponential":
            if not (math.isfinite(self.alpha) and self.alpha > 0):
                raise DomainError(f"alpha must be > 0, got {self.alpha}")
        elif self.kind == "polynomial":
            if not (math.isfinite(self.c) and self.c >= 0):
                raise DomainError(f"c must be >= 0, got {self.c}")
            if int(self.degree) != self.degree or self.degree < 0:
                raise DomainError(
                    f"degree must be a non-negative integer, got {self.degree}")
        elif self.kind == "factorial":
            if int(self.d_fact) != self.d_fact:
                raise DomainError(f"d_fact must be an integer, got {self.d_fact}")
        elif self.kind == "path":
            _check_path_params(self.c_hv, self.c_d)
            if 2 * self.c_hv + self.c_d > 1:
                warnings.warn(
                    f"2*c_hv + c_d = {2 * self.c_hv + self.c_d:g} > 1: path "
                    "weights grow geometrically with sequence length",
                    GrowthWarning, stacklevel=3)


@dataclass(frozen=True)
class KernelConfig:
    symbol: SymbolKernelParams = SymbolKernelParams()
    structure: StructureKernelParams = StructureKernelParams()
    normalize: bool = False


@dataclass(frozen=True)
class GlobalAlignmentConfig:
    """Global Alignment kernel over all monotone alignments (baseline)."""

    sigma: float = 1.0
    normalize: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"bandwidth must be > 0, got {self.sigma}")


def config_to_dict(cfg):
    if isinstance(cfg, GlobalAlignmentConfig):
        return {"kernel": "global_alignment", **asdict(cfg)}
    return {"kernel": "decomposable", "symbol": asdict(cfg.symbol),
            "structure": asdict(cfg.structure), "normalize": cfg.normalize}


def config_from_dict(d):
    if d.get("kernel") == "global_alignment":
        return GlobalAlignmentConfig(sigma=d["sigma"], normalize=d["normalize"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GrowthWarning)
        return KernelConfig(
            symbol=SymbolKernelParams(**d["symbol"]),
            structure=StructureKernelParams(**d["structure"]),
            normalize=d["normalize"])


# --------------------------------------------------------------------------
# symbol kernels
# --------------------------------------------------------------------------

def _sq_dists(S, T):
    diff = S[:, None, :] - T[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def symbol_gram(S, T, params):
    """Matrix of symbol-kernel values between all symbols of ``S`` and ``T``."""
    if S.shape[1] != T.shape[1]:
        raise DimensionError(
            f"symbol dimensions differ: {S.shape[1]} vs {T.shape[1]}")
    if params.kind == "rbf":
        return np.exp(-_sq_dists(S, T) / (2.0 * params.sigma ** 2))
    if params.kind == "linear":
        return S @ T.T
    return np.all(S[:, None, :] == T[None, :, :], axis=-1).astype(np.float64)


def _symbol_gram_grads(S, T, params):
    """Symbol Gram and its derivatives w.r.t. the symbol-kernel parameters."""
    if params.kind == "rbf":
        D = _sq_dists(S, T)
        K = np.exp(-D / (2.0 * params.sigma ** 2))
        return K, [K * D / params.sigma ** 3]
    return symbol_gram(S, T, params), []


def symbol_kernel(a, b, params):
    """Kernel value between two symbols given as vectors."""
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError(f"symbol shapes differ: {a.shape} vs {b.shape}")
    return float(symbol_gram(a[None, :], b[None, :], params)[0, 0])


# --------------------------------------------------------------------------
# structure kernels
# --------------------------------------------------------------------------

def factorial_value(n):
    """``n!`` as an exact int for ``n <= 20``, as a float beyond."""
    if n <= _EXACT_FACTORIAL_MAX:
        return math.factorial(n)
    return math.exp(gammaln(n + 1))


def structure_kernel(i, j, params):
    """Structure-kernel value for the 1-based positions ``i`` and ``j``."""
    if int(i) != i or int(j) != j or i < 1 or j < 1:
        raise DomainError(f"positions must be integers >= 1, got ({i}, {j})")
    i, j = int(i), int(j)
    kind = params.kind
    if kind == "exponential":
        structure_evaluations.add(1)
        return math.exp(-(i - j) ** 2 / params.alpha)
    if kind == "polynomial":
        structure_evaluations.add(1)
        return float((i * j + params.c) ** int(params.degree))
    if kind == "factorial":
        d = int(params.d_fact)
        if 2 * i < d or 2 * j < d:
            raise DomainError(
                f"factorial kernel with d={d} needs positions >= {d / 2}")
        structure_evaluations.add(1)
        return factorial_value(i + j - d)
    return float(path_structure_matrix(max(i, j), params.c_hv,
                                       params.c_d).values[i - 1, j - 1])


@dataclass(frozen=True, eq=False)
class StructureMatrix:
    """Structure-kernel values for all position pairs up to ``L_max``.

    ``values[i-1, j-1]`` holds ``k_pos(i, j)``. ``gradients`` optionally
    holds the derivative tables w.r.t. the differentiable structure
    parameters, in the order of :func:`parameter_names`.
    """

    values: np.ndarray
    params: StructureKernelParams
    L_max: int
    gradients: tuple = ()

    def block(self, n, m):
        return self.values[:n, :m]


def _lattice_sweep(source, c_hv, c_d):
    """Solve the weighted lattice recurrence for a given source table.

    Returns ``T`` with ``T[i, j] = source[i, j] + c_hv*(T[i-1, j] +
    T[i, j-1]) + c_d*T[i-1, j-1]`` and zero boundary. Each row is a
    first-order linear recurrence along ``j``, solved with a linear filter.
    """
    L = source.shape[0]
    T = np.zeros((L + 1, L + 1))
    for i in range(1, L + 1):
        rhs = source[i - 1] + c_hv * T[i - 1, 1:] + c_d * T[i - 1, :-1]
        T[i, 1:] = lfilter([1.0], [1.0, -c_hv], rhs)
    return T


def _mirror_upper(A):
    return np.triu(A) + np.triu(A, 1).T


def _path_exact(L_max, c_hv, c_d):
    c_hv, c_d = Fraction(c_hv), Fraction(c_d)
    T = [[Fraction(0)] * (L_max + 1) for _ in range(L_max + 1)]
    for i in range(1, L_max + 1):
        prev, row = T[i - 1], T[i]
        for j in range(1, L_max + 1):
            seed = 1 if i == 1 and j == 1 else 0
            row[j] = seed + c_hv * (prev[j] + row[j - 1]) + c_d * prev[j - 1]
    return np.array([r[1:] for r in T[1:]], dtype=object)


def path_structure_matrix(L_max, c_hv, c_d, exact=False, gradients=False,
                          params=None):
    """Path structure matrix built by the weighted-lattice recurrence.

    Entry ``(i, j)`` is the total weight of all monotone lattice paths from
    cell ``(1, 1)`` to cell ``(i, j)``, where horizontal and vertical moves
    weigh ``c_hv`` and diagonal moves weigh ``c_d``.

    Parameters
    ----------
    L_max : int
        Largest sequence length covered.
    c_hv, c_d : float or Fraction
        Move weights, both >= 0.
    exact : bool
        Compute with :class:`fractions.Fraction` entries (object array).
    gradients : bool
        Also compute the derivative tables w.r.t. ``c_hv`` and ``c_d``.

    Returns
    -------
    StructureMatrix
    """
    if int(L_max) != L_max or L_max < 1:
        raise DomainError(f"L_max must be a positive integer, got {L_max}")
    L_max = int(L_max)
    _check_path_params(float(c_hv), float(c_d))
    if params is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GrowthWarning)
            params = StructureKernelParams(kind="path", c_hv=float(c_hv),
                                           c_d=float(c_d))
    structure_evaluations.add(L_max * L_max)
    if exact:
        if gradients:
            raise UnsupportedError("gradients are computed in floating point")
        return StructureMatrix(_path_exact(L_max, c_hv, c_d), params, L_max)

    c_hv, c_d = float(c_hv), float(c_d)
    seed = np.zeros((L_max, L_max))
    seed[0, 0] = 1.0
    with np.errstate(over="ignore"):
        T = _lattice_sweep(seed, c_hv, c_d)
    values = _mirror_upper(T[1:, 1:])
    grads = ()
    if gradients:
        # differentiate the recurrence: same lattice, new source terms
        src_hv = T[:-1, 1:] + T[1:, :-1]
        src_d = T[:-1, :-1]
        grads = tuple(_mirror_upper(_lattice_sweep(src, c_hv, c_d)[1:, 1:])
                      for src in (src_hv, src_d))
    values.setflags(write=False)
    return StructureMatrix(values, params, L_max, grads)


def path_structure_closed_form(i, j, c_hv, c_d):
    """Path structure value from the explicit factorial sum, in exact arithmetic.

    ``sum_{d=0}^{min(i,j)-1} c_hv^(i+j-2-2d) c_d^d (i+j-2-d)! /
    ((i-1-d)! (j-1-d)! d!)``. Float weights are converted to their exact
    binary value.
    """
    if int(i) != i or int(j) != j or i < 1 or j < 1:
        raise DomainError(f"positions must be integers >= 1, got ({i}, {j})")
    i, j = int(i), int(j)
    c_hv, c_d = Fraction(c_hv), Fraction(c_d)
    total = Fraction(0)
    for d in range(min(i, j)):
        coef = math.factorial(i + j - 2 - d) // (
            math.factorial(i - 1 - d) * math.factorial(j - 1 - d)
            * math.factorial(d))
        total += coef * c_hv ** (i + j - 2 - 2 * d) * c_d ** d
    return total


def structure_matrix(params, L_max, gradients=False):
    """Precompute the structure kernel for all positions ``1..L_max``."""
    if int(L_max) != L_max or L_max < 1:
        raise DomainError(f"L_max must be a positive integer, got {L_max}")
    L_max = int(L_max)
    if params.kind == "path":
        return path_structure_matrix(L_max, params.c_hv, params.c_d,
                                     gradients=gradients, params=params)
    idx = np.arange(1, L_max + 1, dtype=np.float64)
    I, J = np.meshgrid(idx, idx, indexing="ij")
    grads = ()
    if params.kind == "exponential":
        sq = (I - J) ** 2
        values = np.exp(-sq / params.alpha)
        if gradients:
            grads = (values * sq / params.alpha ** 2,)
    elif params.kind == "polynomial":
        if gradients:
            raise UnsupportedError("polynomial structure kernel has no gradients")
        values = (I * J + params.c) ** int(params.degree)
    else:
        if gradients:
            raise UnsupportedError("factorial structure kernel has no gradients")
        d = int(params.d_fact)
        if 2 * 1 < d:
            raise DomainError(
                f"factorial kernel with d={d} is undefined at position 1")
        n = (I + J - d).astype(np.int64)
        values = np.vectorize(lambda k: float(factorial_value(int(k))),
                              otypes=[np.float64])(n)
    structure_evaluations.add(L_max * L_max)
    values.setflags(write=False)
    return StructureMatrix(values, params, L_max, grads)


# --------------------------------------------------------------------------
# sequence kernels
# --------------------------------------------------------------------------

def _ensure_structure(M, params, length, gradients=False):
    if M is not None and M.params != params:
        raise ValueError("structure matrix was built for different parameters")
    if M is None or M.L_max < length or (gradients and not M.gradients):
        return structure_matrix(params, max(length, 1), gradients=gradients)
    return M


_SYMBOL_CODES = {"rbf": 0, "linear": 1, "delta": 2}


@njit(cache=True, nogil=True)
def _weighted_sum(S, T, W, kind, gamma):
    # row-major sum of k_sym(S_i, T_j) * W_ij without n*m temporaries
    n, m, d = S.shape[0], T.shape[0], S.shape[1]
    total = 0.0
    for i in range(n):
        row = 0.0
        for j in range(m):
            if kind == 0:
                acc = 0.0
                for k in range(d):
                    diff = S[i, k] - T[j, k]
                    acc += diff * diff
                v = np.exp(-gamma * acc)
            elif kind == 1:
                v = 0.0
                for k in range(d):
                    v += S[i, k] * T[j, k]
            else:
                v = 1.0
                for k in range(d):
                    if S[i, k] != T[j, k]:
                        v = 0.0
                        break
            row += v * W[i, j]
        total += row
    return total


def _raw_kernel(s, t, symbol, M):
    n, m = len(s), len(t)
    if n == 0 or m == 0:
        return 0.0
    if s.shape[1] != t.shape[1]:
        raise DimensionError(
            f"symbol dimensions differ: {s.shape[1]} vs {t.shape[1]}")
    gamma = 0.5 / symbol.sigma ** 2 if symbol.kind == "rbf" else 0.0
    return float(_weighted_sum(np.ascontiguousarray(s), np.ascontiguousarray(t),
                               M.values, _SYMBOL_CODES[symbol.kind], gamma))


def sequence_kernel(s, t, cfg, M=None):
    """Decomposable sequence kernel between two sequences.

    Parameters
    ----------
    s, t : array-like of shape (length, dim) or (length,)
        The sequences. Empty sequences give 0.
    cfg : KernelConfig
    M : StructureMatrix, optional
        Precomputed structure values; built on the fly when missing or
        too small.
    """
    s, t = check_pair(s, t)
    n, m = len(s), len(t)
    if n == 0 or m == 0:
        if cfg.normalize:
            raise NormalizationError("cannot normalize an empty sequence")
        return 0.0
    M = _ensure_structure(M, cfg.structure, max(n, m))
    k = _raw_kernel(s, t, cfg.symbol, M)
    if cfg.normalize:
        kss = _raw_kernel(s, s, cfg.symbol, M)
        ktt = _raw_kernel(t, t, cfg.symbol, M)
        return _normalize(k, kss, ktt)
    return k


def _normalize(k, kss, ktt):
    denom = math.sqrt(kss * ktt)
    if not denom > 0:
        raise NormalizationError("self-similarity is zero, cannot normalize")
    return k / denom


def path_kernel_recursive(s, t, cfg):
    """Path kernel from its suffix recursion.

    ``k(s, t) = k_sym(s_1, t_1) + c_hv k(s[2:], t) + c_hv k(s, t[2:]) +
    c_d k(s[2:], t[2:])``, zero when either sequence is empty. Evaluated
    bottom-up over a table of suffix pairs.
    """
    p = cfg.structure
    if p.kind != "path":
        raise UnsupportedError("recursive evaluation needs the path structure")
    s, t = check_pair(s, t)
    if cfg.normalize:
        if len(s) == 0 or len(t) == 0:
            raise NormalizationError("cannot normalize an empty sequence")
        return _normalize(_path_suffix_table(s, t, cfg.symbol, p),
                          _path_suffix_table(s, s, cfg.symbol, p),
                          _path_suffix_table(t, t, cfg.symbol, p))
    return _path_suffix_table(s, t, cfg.symbol, p)


def _path_suffix_table(s, t, symbol, p):
    n, m = len(s), len(t)
    if n == 0 or m == 0:
        return 0.0
    K = symbol_gram(s, t, symbol).tolist()
    c_hv, c_d = p.c_hv, p.c_d
    nxt = [0.0] * (m + 1)  # row i+1 of the suffix table
    for i in range(n - 1, -1, -1):
        cur = [0.0] * (m + 1)
        Ki = K[i]
        for j in range(m - 1, -1, -1):
            cur[j] = (Ki[j] + c_hv * nxt[j] + c_hv * cur[j + 1]
                      + c_d * nxt[j + 1])
        nxt = cur
    return nxt[0]


def _ga_log_local(s, t, sigma):
    z = _sq_dists(s, t) / (2.0 * sigma ** 2)
    return -z - np.log(2.0 - np.exp(-z))


def _ga_log_value(s, t, sigma):
    """Log of the Global Alignment kernel via anti-diagonal sweeps."""
    n, m = len(s), len(t)
    logk = _ga_log_local(s, t, sigma)
    G = np.full((n + 1, m + 1), -np.inf)
    G[0, 0] = 0.0
    for diag in range(2, n + m + 1):
        i = np.arange(max(1, diag - m), min(n, diag - 1) + 1)
        j = diag - i
        acc = np.logaddexp(np.logaddexp(G[i - 1, j], G[i, j - 1]),
                           G[i - 1, j - 1])
        G[i, j] = logk[i - 1, j - 1] + acc
    return float(G[n, m])


def global_alignment_kernel(s, t, sigma=1.0, log=False, normalize=False):
    """Global Alignment kernel summing local similarities over all alignments.

    The local kernel is ``kappa / (2 - kappa)`` with ``kappa`` a Gaussian
    of bandwidth ``sigma``; accumulation happens in the log domain.
    """
    if not (math.isfinite(sigma) and sigma > 0):
        raise DomainError(f"bandwidth must be > 0, got {sigma}")
    s, t = check_pair(s, t)
    if len(s) == 0 or len(t) == 0:
        raise DomainError("global alignment kernel needs nonempty sequences")
    v = _ga_log_value(s, t, sigma)
    if normalize:
        v -= 0.5 * (_ga_log_value(s, s, sigma) + _ga_log_value(t, t, sigma))
    return v if log else math.exp(v)


def kernel_value(s, t, cfg, M=None):
    """Evaluate either a decomposable kernel or the Global Alignment baseline."""
    if isinstance(cfg, GlobalAlignmentConfig):
        return global_alignment_kernel(s, t, cfg.sigma, normalize=cfg.normalize)
    return sequence_kernel(s, t, cfg, M)


# --------------------------------------------------------------------------
# gradients
# --------------------------------------------------------------------------

def parameter_names(cfg):
    """Names of the differentiable parameters of ``cfg``, in gradient order."""
    if isinstance(cfg, GlobalAlignmentConfig):
        raise UnsupportedError("global alignment kernel has no gradients")
    names = ["sigma"] if cfg.symbol.kind == "rbf" else []
    kind = cfg.structure.kind
    if kind == "exponential":
        names.append("alpha")
    elif kind == "path":
        names += ["c_hv", "c_d"]
    else:
        raise UnsupportedError(f"{kind} structure kernel has no gradients")
    return names


def parameter_values(cfg):
    return [getattr(cfg.symbol if n == "sigma" else cfg.structure, n)
            for n in parameter_names(cfg)]


def with_parameters(cfg, values):
    """Copy of ``cfg`` with its differentiable parameters replaced."""
    names = parameter_names(cfg)
    sym = {k: v for k, v in zip(names, values) if k == "sigma"}
    struct = {k: float(v) for k, v in zip(names, values) if k != "sigma"}
    symbol = SymbolKernelParams(cfg.symbol.kind,
                                float(sym.get("sigma", cfg.symbol.sigma)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GrowthWarning)
        structure = StructureKernelParams(**{**asdict(cfg.structure), **struct})
    return KernelConfig(symbol, structure, cfg.normalize)


def _raw_with_grads(s, t, symbol, M):
    n, m = len(s), len(t)
    if n == 0 or m == 0:
        return 0.0, np.zeros(len(M.gradients) + (symbol.kind == "rbf"))
    K, dK = _symbol_gram_grads(s, t, symbol)
    S = M.values[:n, :m]
    grads = [np.sum(d * S) for d in dK]
    grads += [np.sum(K * dS[:n, :m]) for dS in M.gradients]
    return float(np.sum(K * S)), np.array(grads, dtype=np.float64)


def kernel_and_gradients(s, t, cfg, M=None):
    """Kernel value and its gradient w.r.t. :func:`parameter_names`."""
    parameter_names(cfg)
    s, t = check_pair(s, t)
    M = _ensure_structure(M, cfg.structure, max(len(s), len(t)),
                          gradients=True)
    k, g = _raw_with_grads(s, t, cfg.symbol, M)
    if not cfg.normalize:
        return k, g
    if len(s) == 0 or len(t) == 0:
        raise NormalizationError("cannot normalize an empty sequence")
    kss, gss = _raw_with_grads(s, s, cfg.symbol, M)
    ktt, gtt = _raw_with_grads(t, t, cfg.symbol, M)
    return normalized_gradient(k, g, kss, gss, ktt, gtt)


def normalized_gradient(k, g, kss, gss, ktt, gtt):
    denom = math.sqrt(kss * ktt)
    if not denom > 0:
        raise NormalizationError("self-similarity is zero, cannot normalize")
    kn = k / denom
    return kn, g / denom - 0.5 * kn * (gss / kss + gtt / ktt)


def kernel_gradients(s, t, cfg, M=None):
    """Gradient of the sequence kernel w.r.t. its differentiable parameters.

    The order is given by :func:`parameter_names`: the rbf bandwidth first
    when present, then ``alpha`` (exponential) or ``c_hv, c_d`` (path).
    """
    return kernel_and_gradients(s, t, cfg, M)[1]

