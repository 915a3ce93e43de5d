"""Sequence datasets: the SEQT text format and the two toy generators.

SEQT is UTF-8 text with one sequence per line::

    label<TAB>x11,x12;x21,x22;...

Symbols are separated by ``;`` and their coordinates by ``,``. Lines
starting with ``#`` are comments, blank lines are skipped.

The UCI collections (AUSLAN, Libras, PEMS, Vowels, Characters) are not
bundled. To use one, write each recording as a SEQT line: class name, a
tab, then its frames in time order with one symbol per frame.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_sequences
from .exceptions import DomainError, FormatError


@dataclass
class Dataset:
    """Labeled variable-length sequences of one symbol dimension.

    ``labelings`` holds alternative label vectors by name; ``labels`` is
    the active one.
    """

    sequences: list
    labels: list
    ids: list = None
    class_names: list = None
    metadata: dict = field(default_factory=dict)
    labelings: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sequences, self.dim = check_sequences(self.sequences)
        if len(self.labels) != len(self.sequences):
            raise ValueError("labels and sequences differ in length")
        self.labels = list(self.labels)
        if self.ids is None:
            self.ids = [f"seq{k}" for k in range(len(self.sequences))]
        known = sorted(set(self.labels), key=str)
        if self.class_names is None:
            self.class_names = known
        elif not set(self.labels) <= set(self.class_names):
            raise ValueError("a label does not map to a known class")

    def __len__(self):
        return len(self.sequences)

    @property
    def lengths(self):
        return np.array([len(s) for s in self.sequences])

    def length_stats(self):
        """Minimum, maximum and median length."""
        L = self.lengths
        return {"min": int(L.min()), "max": int(L.max()),
                "median": float(np.median(L))}

    def with_labeling(self, name):
        """Copy whose active labels are ``labelings[name]``."""
        labels = self.labelings[name]
        return Dataset(self.sequences, labels, list(self.ids),
                       metadata=dict(self.metadata, labeling=name),
                       labelings=self.labelings)

    def summary(self):
        stats = self.length_stats()
        return {"n": len(self), "dim": self.dim,
                "classes": len(self.class_names),
                "length": f"{stats['min']}-{stats['max']} ({stats['median']:g})"}


def _parse_line(line, lineno, dim):
    label, sep, body = line.partition("\t")
    if not sep:
        raise FormatError("expected 'label<TAB>symbols'", lineno)
    if not label:
        raise FormatError("empty label", lineno)
    body = body.strip()
    if not body:
        raise FormatError("empty symbol list", lineno)
    rows = []
    for sym in body.split(";"):
        try:
            rows.append([float(v) for v in sym.split(",")])
        except ValueError:
            raise FormatError(f"unparseable number in symbol {sym!r}",
                              lineno) from None
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise FormatError("ragged symbol dimensions", lineno)
    if dim is not None and width != dim:
        raise FormatError(f"symbol dimension {width}, expected {dim}", lineno)
    arr = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise FormatError("non-finite value", lineno)
    return label, arr


def parse_dataset(path):
    """Read a SEQT file, keeping the order of the sequences."""
    seqs, labels, ids = [], [], []
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            label, arr = _parse_line(line, lineno, dim)
            dim = arr.shape[1]
            seqs.append(arr)
            labels.append(label)
            ids.append(f"line{lineno}")
    if not seqs:
        raise FormatError("file contains no sequences")
    return Dataset(seqs, labels, ids)


def write_dataset(dataset, path, header=None):
    """Write a SEQT file; values use 17 significant digits so they read back exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for label, seq in zip(dataset.labels, dataset.sequences):
            if len(seq) == 0:
                raise FormatError("cannot write an empty sequence")
            label = str(label)
            if "\t" in label or "\n" in label or not label:
                raise FormatError(f"label {label!r} cannot be written")
            body = ";".join(",".join(f"{v:.17g}" for v in sym) for sym in seq)
            fh.write(f"{label}\t{body}\n")


def gen_sine_cosine(n_per_class=10, len_range=(20, 60), noise_sd=0.1, seed=0):
    """Noisy sine (class ``sine``) and cosine (class ``cosine``) curves.

    Each curve covers exactly one period, sampled at ``L`` evenly spaced
    points with ``L`` drawn uniformly from ``len_range`` (inclusive).
    """
    lo, hi = (int(v) for v in len_range)
    if not 8 <= lo <= hi <= 512:
        raise DomainError(f"length range must lie within [8, 512], got {len_range}")
    if n_per_class < 1:
        raise DomainError("n_per_class must be >= 1")
    if noise_sd < 0:
        raise DomainError("noise_sd must be >= 0")
    rng = np.random.default_rng(seed)
    seqs, labels = [], []
    for label, wave in (("sine", np.sin), ("cosine", np.cos)):
        for _ in range(n_per_class):
            L = int(rng.integers(lo, hi + 1))
            phase = 2 * np.pi * np.arange(L) / L
            seqs.append((wave(phase) + rng.normal(0, noise_sd, L))[:, None])
            labels.append(label)
    meta = {"generator": "sine_cosine", "n_per_class": n_per_class,
            "len_range": [lo, hi], "noise_sd": noise_sd, "seed": seed,
            "amplitude": 1.0, "periods": 1}
    return Dataset(seqs, labels, metadata=meta)


def gen_sine_square_spike(n_per_class=10, L=100, noise_sd=0.1, seed=0,
                          n_spikes=5, spike_value=4.0):
    """Noisy sine and square waves, half of each class carrying spikes.

    The square wave is +1 over the first half period and -1 over the
    second. In a
    spiked sequence ``n_spikes`` distinct random positions are set to
    ``spike_value`` before the noise is added. The active labeling is
    ``waveform``; ``labelings["spike"]`` marks ``clean``/``spiked``.
    """
    if L < 20:
        raise DomainError(f"L must be >= 20, got {L}")
    if n_per_class < 2 or n_per_class % 2:
        raise DomainError("n_per_class must be even and >= 2")
    if noise_sd < 0:
        raise DomainError("noise_sd must be >= 0")
    rng = np.random.default_rng(seed)
    frac = np.arange(L) / L
    waves = {"sine": np.sin(2 * np.pi * frac),
             "square": np.where(frac < 0.5, 1.0, -1.0)}
    seqs, waveform, spike = [], [], []
    for label, base in waves.items():
        for k in range(n_per_class):
            x = base.copy()
            spiked = k < n_per_class // 2
            if spiked:
                x[rng.choice(L, size=n_spikes, replace=False)] = spike_value
            x = x + rng.normal(0, noise_sd, L)
            seqs.append(x[:, None])
            waveform.append(label)
            spike.append("spiked" if spiked else "clean")
    meta = {"generator": "sine_square_spike", "n_per_class": n_per_class,
            "L": L, "noise_sd": noise_sd, "seed": seed, "n_spikes": n_spikes,
            "spike_value": spike_value, "square": "sign of sine",
            "spike_before_noise": True, "labeling": "waveform"}
    return Dataset(seqs, waveform, metadata=meta,
                   labelings={"waveform": waveform, "spike": spike})
