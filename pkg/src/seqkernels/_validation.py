"""Input validation helpers for sequences and Gram matrices."""

import numpy as np

from .exceptions import DimensionError, DomainError


def check_sequence(s, dim=None):
    """Return ``s`` as a float array of shape ``(length, dim)``.

    One-dimensional input is read as a univariate sequence. Empty
    sequences are allowed; their symbol dimension is taken from ``dim``
    when given.
    """
    arr = np.asarray(s, dtype=np.float64)
    if arr.ndim == 1:
        if arr.size == 0:
            return np.zeros((0, dim or 1))
        arr = arr[:, None]
    elif arr.ndim != 2:
        raise DimensionError(f"sequence must be 1-D or 2-D, got {arr.ndim}-D")
    if arr.shape[0] == 0:
        return np.zeros((0, dim if dim is not None else arr.shape[1]))
    if arr.shape[1] < 1:
        raise DimensionError("symbols must have dimension >= 1")
    if dim is not None and arr.shape[1] != dim:
        raise DimensionError(
            f"symbol dimension {arr.shape[1]} does not match expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("sequence contains NaN or infinite values")
    return arr


def check_pair(s, t):
    s = check_sequence(s)
    t = check_sequence(t)
    if len(s) and len(t) and s.shape[1] != t.shape[1]:
        raise DimensionError(
            f"symbol dimensions differ: {s.shape[1]} vs {t.shape[1]}")
    return s, t


def check_sequences(data, dim=None):
    """Validate a collection of sequences sharing one symbol dimension.

    Returns the list of arrays and the common dimension.
    """
    if isinstance(data, np.ndarray) and data.dtype != object and data.ndim == 2:
        # a 2-D float array is a batch of equal-length univariate sequences
        data = list(data)
    seqs = [check_sequence(s) for s in data]
    for k, s in enumerate(seqs):
        if len(s) == 0:
            continue
        if dim is None:
            dim = s.shape[1]
        elif s.shape[1] != dim:
            raise DimensionError(
                f"sequence {k} has symbol dimension {s.shape[1]}, "
                f"expected {dim}")
    if dim is None:
        dim = 1
    seqs = [s if len(s) else np.zeros((0, dim)) for s in seqs]
    return seqs, dim


def check_symmetric(G, atol=1e-10):
    G = np.asarray(G, dtype=np.float64)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {G.shape}")
    scale = max(1.0, float(np.max(np.abs(G)))) if G.size else 1.0
    if G.size and np.max(np.abs(G - G.T)) > atol * scale:
        raise ValueError("matrix is not symmetric")
    return G
