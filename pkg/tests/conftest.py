import numpy as np
import pytest

from noiseforge.graph import Graph, build_graph


def random_graph(rng: np.random.Generator, n: int, num_classes: int,
                 edge_prob: float = 0.1, with_features: bool = False,
                 feature_dim: int = 5, block_labels: bool = False) -> Graph:
    """Connected-ish Erdos-Renyi graph with balanced labels.

    A spanning path is always included so no node is isolated and every
    class is populated for n >= C. Labels cycle (i mod C) by default;
    block_labels sorts them into contiguous runs, which makes the spanning
    path mostly homophilic.
    """
    edges = [(i, i + 1) for i in range(n - 1)]
    for i in range(n):
        for j in range(i + 2, n):
            if rng.random() < edge_prob:
                edges.append((i, j))
    labels = np.arange(n) % num_classes
    if block_labels:
        labels = np.sort(labels)
    features = None
    if with_features:
        centers = rng.normal(size=(num_classes, feature_dim)) * 3.0
        features = centers[labels] + rng.normal(size=(n, feature_dim))
    return build_graph(n, edges, labels, num_classes, node_features=features)


@pytest.fixture
def triangle():
    return build_graph(3, [(0, 1), (1, 2), (0, 2)], [0, 0, 0], 2)


@pytest.fixture
def star():
    # center node 0 class 0, three leaves class 1
    return build_graph(4, [(0, 1), (0, 2), (0, 3)], [0, 1, 1, 1], 2)


@pytest.fixture
def path3():
    return build_graph(3, [(0, 1), (1, 2)], [0, 1, 0], 2)
