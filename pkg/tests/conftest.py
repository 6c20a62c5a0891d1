import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from causalpatterns.graph import build_graph


def graph_from_pairs(edges, directed=False, num_nodes=None):
    """Index-pair edges -> SpatialGraph with node IDs n0..n{N-1}."""
    if num_nodes is None:
        num_nodes = max((max(s, d) for s, d in edges), default=-1) + 1
    ids = [f"n{i}" for i in range(num_nodes)]
    pairs = [(f"n{s}", f"n{d}", 1.0) for s, d in edges]
    return build_graph(pairs, directed=directed, node_ids=ids)


def mask_from_rows(rows):
    """List-of-bit-lists -> ActivationMask."""
    from causalpatterns.activation import ActivationMask

    return ActivationMask.from_dense(np.array(rows, dtype=bool))


@pytest.fixture
def path_graph_ab():
    return graph_from_pairs([(0, 1)], num_nodes=2)


@pytest.fixture
def tmp_csv(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return p

    return write
