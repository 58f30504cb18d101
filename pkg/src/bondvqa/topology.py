"""Qubit coupling graphs: line, heavy-hex, 3-edge-coloring and trimming."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx


@dataclass(frozen=True)
class CouplingGraph:
    node_count: int
    edges: tuple[tuple[int, int], ...]
    # color label per edge, aligned with ``edges``
    edge_colors: tuple[int, ...] | None = field(default=None)

    def __post_init__(self):
        edges = tuple(tuple(sorted((int(a), int(b)))) for a, b in self.edges)
        seen = set()
        for a, b in edges:
            if a == b:
                raise ValueError(f"self-loop on node {a}")
            if not (0 <= a < self.node_count and 0 <= b < self.node_count):
                raise ValueError(f"edge {(a, b)} out of range")
            if (a, b) in seen:
                raise ValueError(f"duplicate edge {(a, b)}")
            seen.add((a, b))
        object.__setattr__(self, "edges", edges)
        if self.edge_colors is not None:
            colors = tuple(int(c) for c in self.edge_colors)
            if len(colors) != len(edges):
                raise ValueError("one color per edge required")
            object.__setattr__(self, "edge_colors", colors)
            problem = coloring_conflict(self)
            if problem:
                raise ValueError(problem)

    @property
    def colored(self) -> bool:
        return self.edge_colors is not None

    def degrees(self) -> list[int]:
        deg = [0] * self.node_count
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def max_degree(self) -> int:
        return max(self.degrees(), default=0)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.node_count))
        g.add_edges_from(self.edges)
        return g

    def is_connected(self) -> bool:
        return self.node_count > 0 and nx.is_connected(self.to_networkx())

    def to_text(self) -> str:
        """Edge-list text: header ``nodes <count>`` then ``a b [color]`` per line."""
        lines = [f"nodes {self.node_count}"]
        for k, (a, b) in enumerate(self.edges):
            lines.append(f"{a} {b}" if self.edge_colors is None else f"{a} {b} {self.edge_colors[k]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CouplingGraph":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows or rows[0][0] != "nodes":
            raise ValueError("edge list must start with 'nodes <count>'")
        count = int(rows[0][1])
        edges = [(int(r[0]), int(r[1])) for r in rows[1:]]
        widths = {len(r) for r in rows[1:]}
        if widths == {3}:
            colors = [int(r[2]) for r in rows[1:]]
        elif widths <= {2}:
            colors = None
        else:
            raise ValueError("color column must be present on every edge or none")
        return cls(count, tuple(edges), None if colors is None else tuple(colors))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


def coloring_conflict(g: CouplingGraph) -> str | None:
    """Describe the first improper coloring found, or ``None`` if proper."""
    if g.edge_colors is None:
        return "graph is not colored"
    if any(c not in (0, 1, 2) for c in g.edge_colors):
        return "color labels must be in {0, 1, 2}"
    at_node: dict[int, dict[int, tuple[int, int]]] = {}
    for (a, b), c in zip(g.edges, g.edge_colors):
        for v in (a, b):
            used = at_node.setdefault(v, {})
            if c in used:
                return f"edges {used[c]} and {(a, b)} share color {c} at node {v}"
            used[c] = (a, b)
    return None


def line_graph(n: int) -> CouplingGraph:
    if n < 2:
        raise ValueError("a line needs at least 2 nodes")
    return CouplingGraph(n, tuple((i, i + 1) for i in range(n - 1)))


def heavy_hex_graph(rows: int, cols: int) -> CouplingGraph:
    """Heavy-hex lattice of ``rows x cols`` hexagonal cells.

    Built as a brick wall: ``rows + 1`` horizontal chains of ``2*cols + 2``
    nodes, with rungs between chains ``r`` and ``r+1`` at every column of the
    same parity as ``r``. Dangling degree-1 ends are pruned, leaving the
    hexagonal lattice, and every edge is then split by a midpoint node.

    Node ``k < V`` are the lattice vertices in (row, column) order; node
    ``V + e`` is the midpoint of lattice edge ``e``. With ``V`` lattice
    vertices and ``E = V + rows*cols - 1`` lattice edges the result has
    ``V + E`` nodes and ``2E`` edges, where
    ``V = 2*(rows + 1)*(cols + 1) - 2``.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    width = 2 * cols + 2
    hexg = nx.Graph()
    for r in range(rows + 1):
        for c in range(width - 1):
            hexg.add_edge((r, c), (r, c + 1))
    for r in range(rows):
        for c in range(r % 2, width, 2):
            hexg.add_edge((r, c), (r + 1, c))
    while True:
        leaves = [v for v, d in hexg.degree() if d <= 1]
        if not leaves:
            break
        hexg.remove_nodes_from(leaves)

    vertices = sorted(hexg.nodes)
    index = {v: k for k, v in enumerate(vertices)}
    lattice_edges = sorted(tuple(sorted((index[a], index[b]))) for a, b in hexg.edges)
    edges = []
    for e, (a, b) in enumerate(lattice_edges):
        mid = len(vertices) + e
        edges.append((a, mid))
        edges.append((b, mid))
    return CouplingGraph(len(vertices) + len(lattice_edges), tuple(sorted(edges)))


def heavy_hex_node_count(rows: int, cols: int) -> int:
    v = 2 * (rows + 1) * (cols + 1) - 2
    return v + (v + rows * cols - 1)


def heavy_hex_for(n: int) -> CouplingGraph:
    """Smallest near-square heavy-hex patch with at least ``n`` nodes."""
    size = 1
    while True:
        for rows, cols in ((size, size), (size, size + 1)):
            if heavy_hex_node_count(rows, cols) >= n:
                return heavy_hex_graph(rows, cols)
        size += 1


def color_edges(g: CouplingGraph, n_colors: int = 3) -> CouplingGraph:
    """Proper edge coloring with at most 3 colors.

    Greedy in edge-index order (smallest free color first) with chronological
    backtracking when an edge has no free color.
    """
    if g.max_degree() > n_colors:
        raise ValueError(
            f"max degree {g.max_degree()} exceeds {n_colors}: cannot {n_colors}-color edges"
        )
    incident: list[list[int]] = [[] for _ in range(g.node_count)]
    for k, (a, b) in enumerate(g.edges):
        incident[a].append(k)
        incident[b].append(k)
    neighbours = [
        sorted({j for v in g.edges[k] for j in incident[v] if j != k}) for k in range(len(g.edges))
    ]
    # -1 marks an unassigned edge; a revisited edge resumes from its last color
    colors = [-1] * len(g.edges)
    k = 0
    while k < len(g.edges):
        used = {colors[j] for j in neighbours[k] if j < k}
        start = colors[k] + 1
        colors[k] = next((c for c in range(start, n_colors) if c not in used), -1)
        if colors[k] >= 0:
            k += 1
            continue
        k -= 1
        if k < 0:
            raise ValueError(f"graph is not {n_colors}-edge-colorable")
    return CouplingGraph(g.node_count, g.edges, tuple(colors))


def trim_to_size(g: CouplingGraph, n_target: int) -> CouplingGraph:
    """Remove minimum-degree nodes one at a time until ``n_target`` remain.

    Ties prefer nodes whose removal keeps the graph connected, then the lowest
    index. Survivors are re-indexed 0..n_target-1 in their original order;
    any coloring is dropped.
    """
    if not 1 <= n_target <= g.node_count:
        raise ValueError(f"cannot trim {g.node_count} nodes to {n_target}")
    graph = g.to_networkx()
    if not nx.is_connected(graph):
        raise ValueError("trim_to_size requires a connected graph")
    while graph.number_of_nodes() > n_target:
        low = min(d for _, d in graph.degree())
        candidates = sorted(v for v, d in graph.degree() if d == low)
        victim = candidates[0]
        for v in candidates:
            rest = graph.subgraph(u for u in graph.nodes if u != v)
            if nx.is_connected(rest):
                victim = v
                break
        graph.remove_node(victim)
    keep = sorted(graph.nodes)
    index = {v: k for k, v in enumerate(keep)}
    edges = sorted(tuple(sorted((index[a], index[b]))) for a, b in graph.edges)
    return CouplingGraph(len(keep), tuple(edges))


def bilinear_layers(n: int) -> list[list[tuple[int, int]]]:
    """Adjacent pairs on a line: odd-start pairs ``(1,2),(3,4),...`` then even-start ``(0,1),(2,3),...``."""
    odd = [(i, i + 1) for i in range(1, n - 1, 2)]
    even = [(i, i + 1) for i in range(0, n - 1, 2)]
    return [layer for layer in (odd, even) if layer]


def color_layers(g: CouplingGraph) -> list[list[tuple[int, int]]]:
    """Edges grouped by color label, each group in lexicographic order."""
    if g.edge_colors is None:
        raise ValueError("color entanglement needs an edge-colored graph")
    groups: dict[int, list[tuple[int, int]]] = {}
    for e, c in zip(g.edges, g.edge_colors):
        groups.setdefault(c, []).append(e)
    return [sorted(groups[c]) for c in sorted(groups)]


def device_graph(n: int) -> CouplingGraph:
    """Colored heavy-hex patch trimmed to ``n`` nodes, for colored entanglement."""
    if n < 2:
        raise ValueError("need at least 2 qubits")
    return color_edges(trim_to_size(heavy_hex_for(n), n))
