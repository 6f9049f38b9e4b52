import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from octdl.dictlearn import StructuredDictionary  # noqa: E402
from octdl.dictlearn.structure import normalize_columns  # noqa: E402


def tiny_instance(seed, n=8, C=3, K=4, K0=2, per_class=5):
    """Random dictionary, codes and data of the size used by the gradient checks."""
    rng = np.random.default_rng(seed)
    dicts = [normalize_columns(rng.standard_normal((n, K))) for _ in range(C)]
    shared = normalize_columns(rng.standard_normal((n, K0))) if K0 else None
    D = StructuredDictionary(dicts, shared)
    labels = np.repeat(np.arange(C), per_class)
    Y = rng.standard_normal((n, labels.size))
    Xbar = rng.standard_normal((D.n_atoms, labels.size))
    return Y, D, Xbar, labels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
