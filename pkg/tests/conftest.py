from pathlib import Path

import numpy as np
import pytest

from infomotif.graphstore import AttributedGraph

DATA_DIR = Path(__file__).resolve().parents[1] / "data"


def random_graph(n, p, directed, seed, num_features=4, num_classes=3):
    rng = np.random.default_rng(seed)
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    if not directed:
        mask = np.triu(mask)
    edges = np.argwhere(mask)
    feats = rng.normal(size=(n, num_features))
    labels = rng.integers(0, num_classes, size=n)
    return AttributedGraph(n, edges, feats, labels, directed=directed, num_classes=num_classes)


@pytest.fixture
def toy_graph():
    """12-node directed graph with dense features and three classes."""
    edges = [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3), (1, 6), (6, 7),
             (7, 8), (8, 6), (9, 10), (10, 11), (11, 9), (8, 9), (0, 5), (4, 10)]
    rng = np.random.default_rng(7)
    labels = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2, 0, 1, 2])
    return AttributedGraph(12, edges, rng.normal(size=(12, 5)), labels, directed=True,
                           num_classes=3, name="toy")


@pytest.fixture(scope="session")
def cora():
    from infomotif.graphstore import load_dataset
    path = DATA_DIR / "cora"
    if not (path / "meta.json").is_file():
        pytest.fail(f"Cora dataset missing at {path}; run scripts/prepare_cora.py")
    return load_dataset(path)


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
