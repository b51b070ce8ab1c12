"""Shared helpers: random instances and acceptance-criterion reporting."""

import numpy as np
import pytest

import emshs

CRITERION_RESULTS: list[tuple[str, bool, str]] = []


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    CRITERION_RESULTS.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERION_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in CRITERION_RESULTS:
        status = "PASS" if passed else "FAIL"
        line = f"{status} {name}"
        if detail:
            line += f" — {detail}"
        terminalreporter.write_line(line)


def random_graph(p: int, edge_prob: float, rng: np.random.Generator) -> emshs.SparseGraph:
    """Erdos-Renyi style graph for solver stress tests."""
    pairs = [
        (j, k)
        for j in range(p)
        for k in range(j + 1, p)
        if rng.random() < edge_prob
    ]
    if not pairs:
        return emshs.SparseGraph.empty(p)
    return emshs.SparseGraph.from_edge_array(p, np.array(pairs))


def random_instance(seed: int, n: int, p: int, edge_prob: float = 0.1, q: int = None):
    """Standardized dataset with a sparse truth plus a random graph."""
    rng = np.random.default_rng(seed)
    if q is None:
        q = max(1, p // 4)
    x = rng.standard_normal((n, p))
    beta0 = np.zeros(p)
    beta0[:q] = rng.normal(0.0, 1.5, q)
    y = x @ beta0 + rng.standard_normal(n)
    data = emshs.standardize(x, y)
    g = random_graph(p, edge_prob, rng)
    return data, g


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
