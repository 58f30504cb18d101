import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bondvqa.topology import (
    CouplingGraph,
    bilinear_layers,
    color_edges,
    color_layers,
    coloring_conflict,
    device_graph,
    heavy_hex_for,
    heavy_hex_graph,
    heavy_hex_node_count,
    line_graph,
    trim_to_size,
)


def _is_proper(g: CouplingGraph) -> bool:
    seen = {}
    for (a, b), c in zip(g.edges, g.edge_colors):
        for v in (a, b):
            if (v, c) in seen:
                return False
            seen[(v, c)] = True
    return True


def test_line_graph():
    assert line_graph(5).edges == ((0, 1), (1, 2), (2, 3), (3, 4))
    assert line_graph(2).edges == ((0, 1),)
    assert line_graph(30).max_degree() == 2
    with pytest.raises(ValueError):
        line_graph(1)


def test_single_cell_is_subdivided_hexagon():
    g = heavy_hex_graph(1, 1)
    assert g.node_count == 12 and len(g.edges) == 12
    assert set(g.degrees()) == {2}
    assert nx.is_isomorphic(g.to_networkx(), nx.cycle_graph(12))


@pytest.mark.parametrize("rows,cols", [(1, 1), (1, 2), (2, 2), (2, 3), (3, 3), (4, 5)])
def test_heavy_hex_counts_and_structure(rows, cols):
    g = heavy_hex_graph(rows, cols)
    v = 2 * (rows + 1) * (cols + 1) - 2
    e = v + rows * cols - 1
    assert g.node_count == v + e == heavy_hex_node_count(rows, cols)
    assert len(g.edges) == 2 * e
    assert g.is_connected()
    assert nx.is_bipartite(g.to_networkx())
    # faces of the planar lattice are the rows*cols hexagons: V - E + F = 2 with the outer face
    assert v - e + rows * cols == 1
    if rows * cols > 1:
        assert g.max_degree() == 3


def test_heavy_hex_for_covers_request():
    for n in (2, 12, 16, 40, 109, 127):
        assert heavy_hex_for(n).node_count >= n


def test_color_line_alternates():
    assert color_edges(line_graph(4)).edge_colors == (0, 1, 0)


@pytest.mark.parametrize("rows,cols", [(1, 1), (2, 2), (3, 4), (5, 5)])
def test_heavy_hex_three_colorable(rows, cols):
    g = color_edges(heavy_hex_graph(rows, cols))
    assert _is_proper(g) and coloring_conflict(g) is None
    assert set(g.edge_colors) <= {0, 1, 2}


def test_star_with_four_leaves_rejected():
    star = CouplingGraph(5, ((0, 1), (0, 2), (0, 3), (0, 4)))
    with pytest.raises(ValueError, match="degree"):
        color_edges(star)


def test_triangle_uses_three_colors():
    tri = color_edges(CouplingGraph(3, ((0, 1), (1, 2), (0, 2))))
    assert _is_proper(tri) and len(set(tri.edge_colors)) == 3


def test_petersen_graph_is_not_three_edge_colorable():
    pet = nx.petersen_graph()
    g = CouplingGraph(10, tuple(sorted(tuple(sorted(e)) for e in pet.edges)))
    with pytest.raises(ValueError, match="colorable"):
        color_edges(g)


def test_improper_coloring_rejected():
    with pytest.raises(ValueError):
        CouplingGraph(3, ((0, 1), (1, 2)), (0, 0))


def test_trim_identity_and_line_rule():
    g = heavy_hex_graph(1, 2)
    assert trim_to_size(g, g.node_count).edges == g.edges
    # degree-1 ends of a line: node 0 goes first
    assert trim_to_size(line_graph(5), 4).edges == line_graph(4).edges
    assert trim_to_size(line_graph(5), 3).edges == line_graph(3).edges


def test_trim_heavy_hex_stays_connected_for_every_size():
    g = heavy_hex_graph(2, 2)
    for size in range(2, g.node_count + 1):
        t = trim_to_size(g, size)
        assert t.node_count == size
        assert t.is_connected()
        assert t.max_degree() <= g.max_degree()


def test_device_graph_for_table_size():
    g = device_graph(109)
    assert g.node_count == 109 and g.is_connected()
    assert g.max_degree() <= 3 and _is_proper(g)
    layers = color_layers(g)
    assert sum(len(layer) for layer in layers) == len(g.edges)
    assert len(layers) <= 3


def test_bilinear_layers_pair_parity():
    odd, even = bilinear_layers(6)
    assert odd == [(1, 2), (3, 4)]
    assert even == [(0, 1), (2, 3), (4, 5)]
    assert sum(map(len, bilinear_layers(109))) == 108
    assert bilinear_layers(2) == [[(0, 1)]]


def test_uncolored_graph_has_no_color_layers():
    with pytest.raises(ValueError):
        color_layers(line_graph(4))


def test_text_round_trip(tmp_path):
    g = device_graph(20)
    assert CouplingGraph.from_text(g.to_text()) == g
    g.save(tmp_path / "g.txt")
    assert CouplingGraph.from_text((tmp_path / "g.txt").read_text()) == g


def test_determinism():
    assert device_graph(57) == device_graph(57)


@settings(max_examples=30, deadline=None)
@given(rows=st.integers(1, 3), cols=st.integers(1, 3), data=st.data())
def test_trim_then_color_is_proper_and_connected(rows, cols, data):
    g = heavy_hex_graph(rows, cols)
    size = data.draw(st.integers(2, g.node_count))
    t = color_edges(trim_to_size(g, size))
    assert t.is_connected() and _is_proper(t)
    assert t.max_degree() <= 3


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 12), st.integers(0, 10 ** 6))
def test_random_max_degree_three_trees_are_colored_properly(n, seed):
    tree = nx.random_labeled_tree(n, seed=seed) if hasattr(nx, "random_labeled_tree") \
        else nx.random_tree(n, seed=seed)
    if max(d for _, d in tree.degree()) > 3:
        return
    g = CouplingGraph(n, tuple(sorted(tuple(sorted(e)) for e in tree.edges)))
    assert _is_proper(color_edges(g))
