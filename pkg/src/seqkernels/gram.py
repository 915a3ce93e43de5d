"""Gram matrices over datasets of sequences: building, checking, persistence."""

import hashlib
import json
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._validation import check_sequences, check_symmetric
from .exceptions import (
    FormatError,
    JitterWarning,
    NormalizationError,
    ProvenanceWarning,
)
from .kernels import (
    GlobalAlignmentConfig,
    _ga_log_value,
    _raw_kernel,
    _raw_with_grads,
    config_from_dict,
    config_to_dict,
    normalized_gradient,
    parameter_names,
    structure_matrix,
)

MAGIC = b"SQKG"
FORMAT_VERSION = 1


@dataclass
class GramMatrix:
    """Symmetric matrix of pairwise kernel values with provenance."""

    values: np.ndarray
    ids: list
    config: object = None
    checksum: str = ""

    @property
    def n(self):
        return self.values.shape[0]


@dataclass
class PsdReport:
    min_eig: float
    max_eig: float
    passed: bool
    tol: float = 1e-8

    def to_dict(self):
        return {"min_eig": self.min_eig, "max_eig": self.max_eig,
                "pass": self.passed, "tol": self.tol}


def dataset_checksum(data, ids=None):
    """SHA-256 over the shapes, values and ids of a list of sequences."""
    h = hashlib.sha256()
    for k, s in enumerate(data):
        arr = np.ascontiguousarray(s, dtype="<f8")
        h.update(struct.pack("<QQ", *(arr.shape if arr.ndim == 2
                                      else (arr.shape[0], 1))))
        h.update(arr.tobytes())
        if ids is not None:
            h.update(str(ids[k]).encode("utf-8") + b"\0")
    return h.hexdigest()


def _pair_values(A, B, cfg, pairs, n_jobs):
    """Evaluate raw (unnormalized) kernels for index pairs, possibly threaded."""
    if isinstance(cfg, GlobalAlignmentConfig):
        def one(p):
            return _ga_log_value(A[p[0]], B[p[1]], cfg.sigma)
    else:
        longest = max([len(s) for s in A] + [len(s) for s in B] + [1])
        M = structure_matrix(cfg.structure, longest)

        def one(p):
            return _raw_kernel(A[p[0]], B[p[1]], cfg.symbol, M)
    if n_jobs is None or n_jobs == 1 or len(pairs) < 2:
        return [one(p) for p in pairs]
    with ThreadPoolExecutor(max_workers=n_jobs if n_jobs > 0 else None) as ex:
        return list(ex.map(one, pairs, chunksize=max(1, len(pairs) // 64)))


def _finish(raw, diag_a, diag_b, cfg):
    """Turn raw values into kernel values (exp for GA logs, normalization)."""
    ga = isinstance(cfg, GlobalAlignmentConfig)
    if cfg.normalize:
        if ga:
            return np.exp(raw - 0.5 * (diag_a[:, None] + diag_b[None, :]))
        if np.any(diag_a <= 0) or np.any(diag_b <= 0):
            raise NormalizationError(
                "a sequence has zero self-similarity, cannot normalize")
        return raw / np.sqrt(np.outer(diag_a, diag_b))
    return np.exp(raw) if ga else raw


def _check_normalizable(data, cfg):
    if cfg.normalize and any(len(s) == 0 for s in data):
        raise NormalizationError("cannot normalize an empty sequence")


def build_gram(data, cfg, ids=None, n_jobs=1):
    """Gram matrix of ``cfg`` over a dataset.

    The structure matrix is computed once for the longest sequence; only
    the upper triangle is evaluated and then mirrored.

    Parameters
    ----------
    data : sequence of array-like
        Sequences of a common symbol dimension.
    cfg : KernelConfig or GlobalAlignmentConfig
    ids : list of str, optional
        Identifiers; defaults to ``"0", "1", ...``.
    n_jobs : int
        Worker threads for pairwise evaluations. Results do not depend on it.

    Returns
    -------
    GramMatrix
    """
    seqs, _ = check_sequences(data)
    if not seqs:
        raise ValueError("dataset is empty")
    _check_normalizable(seqs, cfg)
    if isinstance(cfg, GlobalAlignmentConfig) and any(len(s) == 0 for s in seqs):
        raise ValueError("global alignment kernel needs nonempty sequences")
    n = len(seqs)
    ids = [str(i) for i in range(n)] if ids is None else [str(i) for i in ids]
    if len(ids) != n:
        raise ValueError("ids and data differ in length")
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    vals = _pair_values(seqs, seqs, cfg, pairs, n_jobs)
    raw = np.zeros((n, n))
    for (i, j), v in zip(pairs, vals):
        raw[i, j] = v
        raw[j, i] = v
    diag = np.diag(raw).copy()
    G = _finish(raw, diag, diag, cfg)
    if cfg.normalize:
        np.fill_diagonal(G, 1.0)
    return GramMatrix(G, ids, cfg, dataset_checksum(seqs, ids))


def cross_gram(A, B, cfg, n_jobs=1):
    """Rectangular ``|A| x |B|`` matrix of kernel values."""
    seqs_a, dim = check_sequences(A)
    seqs_b, _ = check_sequences(B, dim=dim if seqs_a else None)
    if not seqs_a or not seqs_b:
        return np.zeros((len(seqs_a), len(seqs_b)))
    _check_normalizable(seqs_a + seqs_b, cfg)
    pairs = [(i, j) for i in range(len(seqs_a)) for j in range(len(seqs_b))]
    raw = np.array(_pair_values(seqs_a, seqs_b, cfg, pairs, n_jobs),
                   dtype=np.float64).reshape(len(seqs_a), len(seqs_b))
    if cfg.normalize:
        diag_a = np.array(_pair_values(seqs_a, seqs_a, cfg,
                                       [(i, i) for i in range(len(seqs_a))], 1))
        diag_b = np.array(_pair_values(seqs_b, seqs_b, cfg,
                                       [(i, i) for i in range(len(seqs_b))], 1))
    else:
        diag_a = diag_b = None
    return _finish(raw, diag_a, diag_b, cfg)


def gram_with_gradients(data, cfg):
    """Gram matrix and its derivatives w.r.t. :func:`parameter_names`.

    Returns
    -------
    G : ndarray of shape (n, n)
    dG : ndarray of shape (n_params, n, n)
    """
    names = parameter_names(cfg)
    seqs, _ = check_sequences(data)
    _check_normalizable(seqs, cfg)
    n = len(seqs)
    M = structure_matrix(cfg.structure, max([len(s) for s in seqs] + [1]),
                         gradients=True)
    K = np.zeros((n, n))
    dK = np.zeros((len(names), n, n))
    for i in range(n):
        for j in range(i, n):
            k, g = _raw_with_grads(seqs[i], seqs[j], cfg.symbol, M)
            K[i, j] = K[j, i] = k
            dK[:, i, j] = dK[:, j, i] = g
    if not cfg.normalize:
        return K, dK
    diag, ddiag = np.diag(K).copy(), np.array([dK[:, i, i] for i in range(n)])
    G = np.empty_like(K)
    dG = np.empty_like(dK)
    for i in range(n):
        for j in range(i, n):
            v, g = normalized_gradient(K[i, j], dK[:, i, j], diag[i], ddiag[i],
                                       diag[j], ddiag[j])
            G[i, j] = G[j, i] = v
            dG[:, i, j] = dG[:, j, i] = g
    np.fill_diagonal(G, 1.0)
    return G, dG


def check_psd(G, tol=1e-8):
    """Eigenvalue extremes of a symmetric matrix and a PSD verdict.

    Passes iff ``min_eig >= -tol * max(1, max_eig)``.
    """
    values = G.values if isinstance(G, GramMatrix) else G
    values = check_symmetric(values)
    eig = np.linalg.eigvalsh(values)
    lo, hi = float(eig[0]), float(eig[-1])
    return PsdReport(lo, hi, lo >= -tol * max(1.0, hi), tol)


def make_psd(K, tol=1e-8):
    """Return ``K`` with diagonal jitter added if it fails :func:`check_psd`.

    The second return value is the jitter that was added (0 if none).
    """
    report = check_psd(K, tol)
    if report.passed:
        return K, 0.0
    jitter = -report.min_eig + 1e-10 * max(1.0, report.max_eig)
    warnings.warn(f"Gram matrix not PSD (min eigenvalue {report.min_eig:.3g}); "
                  f"adding jitter {jitter:.3g}", JitterWarning, stacklevel=2)
    return K + jitter * np.eye(K.shape[0]), jitter


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------
#
# layout (little endian):
#   4s  magic "SQKG"
#   H   format version
#   Q   n
#   32s sha256 of the input sequences
#   32s sha256 of the value block
#   I   length of the UTF-8 JSON config, then the JSON bytes
#   n x (I length, UTF-8 id bytes)
#   n*n float64 values, row-major

_HEADER = struct.Struct("<4sHQ32s32sI")


def save_gram(G, path):
    values = np.ascontiguousarray(G.values, dtype="<f8")
    body = values.tobytes()
    cfg = json.dumps(config_to_dict(G.config) if G.config is not None else None,
                     sort_keys=True).encode("utf-8")
    checksum = bytes.fromhex(G.checksum) if G.checksum else b"\0" * 32
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, G.n, checksum,
                              hashlib.sha256(body).digest(), len(cfg)))
        fh.write(cfg)
        for ident in G.ids:
            raw = str(ident).encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        fh.write(body)


def _take(buf, pos, size, what):
    if pos + size > len(buf):
        raise FormatError(f"file truncated while reading {what}")
    return buf[pos:pos + size], pos + size


def load_gram(path, expected_checksum=None):
    """Read a Gram file written by :func:`save_gram`.

    A mismatch between the stored input checksum and ``expected_checksum``
    only warns; a corrupted value block raises :class:`FormatError`.
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    head, pos = _take(buf, 0, _HEADER.size, "header")
    magic, version, n, in_sum, body_sum, cfg_len = _HEADER.unpack(head)
    if magic != MAGIC:
        raise FormatError("not a Gram file (bad magic bytes)")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    cfg_raw, pos = _take(buf, pos, cfg_len, "config")
    try:
        cfg_dict = json.loads(cfg_raw.decode("utf-8"))
        cfg = config_from_dict(cfg_dict) if cfg_dict is not None else None
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"invalid config block: {exc}") from None
    ids = []
    for _ in range(n):
        raw_len, pos = _take(buf, pos, 4, "id length")
        raw, pos = _take(buf, pos, struct.unpack("<I", raw_len)[0], "id")
        ids.append(raw.decode("utf-8"))
    body, pos = _take(buf, pos, 8 * n * n, "values")
    if pos != len(buf):
        raise FormatError("trailing bytes after value block")
    if hashlib.sha256(body).digest() != body_sum:
        raise FormatError("value checksum mismatch")
    values = np.frombuffer(body, dtype="<f8").reshape(n, n).astype(np.float64)
    checksum = in_sum.hex()
    if expected_checksum is not None and expected_checksum != checksum:
        warnings.warn("Gram file was computed from different input data",
                      ProvenanceWarning, stacklevel=2)
    return GramMatrix(values, ids, cfg, checksum)


def export_csv(G, path):
    """Write a header row of ids, then rows of values at 17 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(G.ids) + "\n")
        for row in G.values:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
