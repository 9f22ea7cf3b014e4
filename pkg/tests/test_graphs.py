"""Graph and tower fixtures: validation, serialization, wired boundaries."""

import json

import numpy as np
import pytest

from hypersigma import Graph, GraphError, GraphTower, extend_alpha, line_tower, single_edge, triangle, wired_subgraph


def test_graph_validation():
    with pytest.raises(GraphError):
        Graph(("1", "delta"), np.array([[0.0, 1.0], [2.0, 0.0]]))  # asymmetric
    with pytest.raises(GraphError):
        Graph(("1", "delta"), np.array([[1.0, 1.0], [1.0, 0.0]]))  # loop
    with pytest.raises(GraphError):
        Graph(("1", "delta"), np.array([[0.0, -1.0], [-1.0, 0.0]]))  # negative
    with pytest.raises(GraphError):
        Graph(
            ("1", "2", "delta"),
            np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
        )  # disconnected


def test_graph_json_round_trip(tmp_path):
    g = triangle(1.5, 0.7, 1.2)
    data = g.to_json()
    g2 = Graph.from_json(data)
    assert g2.vertex_ids == g.vertex_ids
    assert np.abs(g2.weights - g.weights).max() == 0.0
    path = tmp_path / "g.json"
    path.write_text(json.dumps(data))
    g3 = Graph.load(path)
    assert g3.vertex_ids == g.vertex_ids


def test_single_edge_shape():
    g = single_edge(2.0)
    assert g.n_inner == 1
    assert g.pinned_id == "delta"
    assert list(g.edges()) == [(0, 1, 2.0)]


def test_tower_levels_must_increase():
    ids = ("1", "2", "3")
    w = np.zeros((3, 3))
    w[0, 1] = w[1, 0] = 1.0
    w[1, 2] = w[2, 1] = 1.0
    with pytest.raises(GraphError):
        GraphTower(ids, w, (("1", "2"), ("1",)))


def test_wired_subgraph_collects_outside_weight():
    tower = line_tower(depth=3)
    g1 = wired_subgraph(tower, 0)
    # level 0 is {1}; vertex 1 has a single outgoing edge of weight 1
    assert g1.vertex_ids == ("1", "delta_0")
    assert g1.weights[0, 1] == 1.0
    g2 = wired_subgraph(tower, 1)
    # level 1 is {1, 2}; only vertex 2 touches the boundary
    assert g2.vertex_ids == ("1", "2", "delta_1")
    assert g2.weights[0, 2] == 0.0
    assert g2.weights[1, 2] == 1.0


def test_wired_subgraph_rejects_bad_level():
    tower = line_tower(depth=3)
    with pytest.raises(IndexError):
        wired_subgraph(tower, 99)


def test_extend_alpha_sums_outside_onto_boundary():
    tower = line_tower(depth=3)
    alpha = {"1": -0.5, "3": -0.25}
    out = extend_alpha(tower, alpha, 1)
    # level 1 is {1, 2}: the entry at 3 lands on the boundary slot
    assert out.tolist() == [-0.5, 0.0, -0.25]


def test_extend_alpha_rejects_positive_entries():
    tower = line_tower(depth=3)
    with pytest.raises(ValueError):
        extend_alpha(tower, {"1": 0.5}, 1)


def test_tower_json_round_trip():
    tower = line_tower(depth=2)
    t2 = GraphTower.from_json(tower.to_json())
    assert t2.universe == tower.universe
    assert t2.levels == tower.levels
    assert np.abs(t2.weights - tower.weights).max() == 0.0
