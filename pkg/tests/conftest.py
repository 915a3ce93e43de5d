import warnings

import numpy as np
import pytest

from seqkernels.exceptions import GrowthWarning
from seqkernels.kernels import KernelConfig, StructureKernelParams, SymbolKernelParams

ACCEPTANCE_LINES = []


def random_sequences(rng, n, max_len=12, dim=None, min_len=1):
    dim = dim or int(rng.integers(1, 4))
    return [rng.normal(size=(int(rng.integers(min_len, max_len + 1)), dim))
            for _ in range(n)]


def path_config(c_hv=0.3, c_d=0.3, sigma=1.0, symbol="rbf", normalize=False):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GrowthWarning)
        structure = StructureKernelParams("path", c_hv=c_hv, c_d=c_d)
    return KernelConfig(SymbolKernelParams(symbol, sigma), structure, normalize)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
