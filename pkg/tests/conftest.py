from pathlib import Path

import numpy as np
import pytest

from tellipsoid.data import ExpressionMatrix, GroupLabels, load_expression_matrix, load_labels

FIXTURES = Path(__file__).parent / "fixtures"


def make_matrix(values, n1=None):
    values = np.asarray(values, dtype=float)
    m, n = values.shape
    n1 = n // 2 if n1 is None else n1
    X = ExpressionMatrix([f"g{i}" for i in range(m)], [f"s{j}" for j in range(n)], values)
    labels = GroupLabels([1] * n1 + [2] * (n - n1), X.sample_ids)
    return X, labels


@pytest.fixture
def small():
    X = load_expression_matrix(FIXTURES / "small_expression.tsv")
    return X, load_labels(FIXTURES / "small_labels.tsv", X.sample_ids)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Record one acceptance line; returns `ok` so tests can assert on it."""
    def record(number, ok, detail):
        request.config.stash[VERDICTS].append((number, bool(ok), detail))
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = sorted(config.stash[VERDICTS], key=lambda v: v[0])
    if lines:
        terminalreporter.section("acceptance criteria")
        for number, ok, detail in lines:
            terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
