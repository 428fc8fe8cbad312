"""Immutable sparse undirected graphs in compressed row form.

The graph type stores each undirected edge twice (once per direction),
keeps neighbor lists sorted, never stores self-loops, and is frozen
after construction: all mutation is by copy.  Normalization adds one
self-loop per node and rescales entries symmetrically by degree, which
is the propagation operator the GCN engine consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse

__all__ = [
    "Graph",
    "NormalizedAdjacency",
    "build_graph",
    "add_edges",
    "expand_nodes",
    "edge_pairs",
    "normalized_adjacency",
    "adjacency_matmul",
    "hop_distances",
    "hop_distance_classes",
]


@dataclass(frozen=True)
class Graph:
    """Undirected graph, CSR layout, no self-loops, no duplicate edges.

    Attributes
    ----------
    num_nodes : int
        Number of nodes; valid indices are 0..num_nodes-1.
    row_offsets : (num_nodes+1,) int64 array
        Neighbor list of node i is col_indices[row_offsets[i]:row_offsets[i+1]].
    col_indices : int64 array
        Neighbor indices, strictly increasing within each row.
    edge_count : int
        Number of undirected edges; row_offsets[-1] == 2 * edge_count.
    """

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    edge_count: int

    def __post_init__(self):
        if self.row_offsets.shape != (self.num_nodes + 1,):
            raise ValueError("row_offsets must have length num_nodes + 1")
        if self.row_offsets[-1] != 2 * self.edge_count:
            raise ValueError("row_offsets[-1] must equal 2 * edge_count")
        self.row_offsets.setflags(write=False)
        self.col_indices.setflags(write=False)

    def neighbors(self, node: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[node] : self.row_offsets[node + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def validate(self) -> None:
        """Full-scan structural check: sortedness, no loops, symmetry.

        Construction already guarantees these; this exists so tests can
        assert the invariants independently of the builder.
        """
        off, col = self.row_offsets, self.col_indices
        rows = np.repeat(np.arange(self.num_nodes, dtype=np.int64), np.diff(off))
        if np.any(rows == col):
            raise AssertionError("self-loop stored")
        for i in range(self.num_nodes):
            seg = col[off[i] : off[i + 1]]
            if seg.size > 1 and np.any(np.diff(seg) <= 0):
                raise AssertionError(f"row {i} not strictly increasing")
        forward = set(zip(rows.tolist(), col.tolist()))
        if any((j, i) not in forward for i, j in forward):
            raise AssertionError("adjacency not symmetric")


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Degree-normalized adjacency with implicit self-loops, CSR layout.

    Entry (i, j) is 1/sqrt((d_i+1)(d_j+1)) for j a neighbor of i or j == i,
    where d is the loop-free degree.  Row sums are positive, and equal 1
    exactly on regular graphs; on irregular graphs low-degree hubs can
    exceed 1 (the operator is bounded in spectrum, not in row sums).
    """

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        row_sums = np.add.reduceat(self.values, self.row_offsets[:-1]) if self.num_nodes else np.array([])
        if self.num_nodes and np.any(row_sums <= 0):
            raise ValueError("normalized adjacency row sums must be positive")
        self.row_offsets.setflags(write=False)
        self.col_indices.setflags(write=False)
        self.values.setflags(write=False)
        csr = sparse.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.num_nodes, self.num_nodes),
        )
        object.__setattr__(self, "_csr", csr)


def _edges_to_canonical(num_nodes: int, edges: np.ndarray) -> np.ndarray:
    """Validate an (k, 2) edge array and return unique (min, max) rows."""
    if edges.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    bad = (edges < 0) | (edges >= num_nodes)
    if np.any(bad):
        k = int(np.flatnonzero(bad.any(axis=1))[0])
        raise ValueError(
            f"edge ({edges[k, 0]}, {edges[k, 1]}) out of range for {num_nodes} nodes"
        )
    edges = edges[edges[:, 0] != edges[:, 1]]  # self-loop policy: drop
    if edges.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    keys = np.unique(lo.astype(np.int64) * num_nodes + hi)
    return np.column_stack((keys // num_nodes, keys % num_nodes))


def _from_canonical(num_nodes: int, canon: np.ndarray) -> Graph:
    """Build the CSR arrays from deduplicated (min, max) edge rows."""
    if canon.size == 0:
        return Graph(
            num_nodes=num_nodes,
            row_offsets=np.zeros(num_nodes + 1, dtype=np.int64),
            col_indices=np.empty(0, dtype=np.int64),
            edge_count=0,
        )
    src = np.concatenate((canon[:, 0], canon[:, 1]))
    dst = np.concatenate((canon[:, 1], canon[:, 0]))
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=num_nodes), out=offsets[1:])
    return Graph(
        num_nodes=num_nodes,
        row_offsets=offsets,
        col_indices=dst.astype(np.int64),
        edge_count=int(canon.shape[0]),
    )


def build_graph(num_nodes: int, edges) -> Graph:
    """Construct a Graph from an iterable of (u, v) pairs.

    Self-loops are dropped, duplicate and mirrored pairs collapse to a
    single undirected edge, and input order never affects the result.

    Raises
    ------
    ValueError
        If num_nodes is negative or any index falls outside
        [0, num_nodes); the offending edge is named in the message.
    """
    if num_nodes < 0:
        raise ValueError("num_nodes must be non-negative")
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if arr.size and (arr.ndim != 2 or arr.shape[1] != 2):
        raise ValueError("edges must be pairs")
    arr = arr.reshape(-1, 2)
    return _from_canonical(num_nodes, _edges_to_canonical(num_nodes, arr))


def edge_pairs(g: Graph) -> np.ndarray:
    """Return the (edge_count, 2) array of undirected edges with src < dst."""
    rows = np.repeat(np.arange(g.num_nodes, dtype=np.int64), g.degrees())
    keep = rows < g.col_indices
    return np.column_stack((rows[keep], g.col_indices[keep]))


def add_edges(g: Graph, new_edges) -> Graph:
    """Return a new Graph with ``new_edges`` merged in; ``g`` is unchanged.

    Adding edges that already exist is a no-op on the edge set.
    """
    arr = np.asarray(list(new_edges) if not isinstance(new_edges, np.ndarray) else new_edges, dtype=np.int64)
    arr = arr.reshape(-1, 2)
    merged = np.concatenate((edge_pairs(g), _edges_to_canonical(g.num_nodes, arr)))
    return _from_canonical(g.num_nodes, _edges_to_canonical(g.num_nodes, merged))


def expand_nodes(g: Graph, num_nodes: int) -> Graph:
    """Return a copy of ``g`` with extra isolated nodes appended."""
    if num_nodes < g.num_nodes:
        raise ValueError("cannot shrink a graph")
    offsets = np.concatenate(
        (g.row_offsets, np.full(num_nodes - g.num_nodes, g.row_offsets[-1], dtype=np.int64))
    )
    return Graph(
        num_nodes=num_nodes,
        row_offsets=offsets,
        col_indices=g.col_indices.copy(),
        edge_count=g.edge_count,
    )


def normalized_adjacency(g: Graph) -> NormalizedAdjacency:
    """Build the propagation operator: D̃^(-1/2) (A + I) D̃^(-1/2).

    Exactly one self-loop per node is introduced here; it is never part
    of the stored Graph.  Entry (i, j) equals 1/sqrt((d_i+1)(d_j+1)).
    """
    n = g.num_nodes
    deg = g.degrees()
    rows = np.concatenate((np.repeat(np.arange(n, dtype=np.int64), deg), np.arange(n, dtype=np.int64)))
    cols = np.concatenate((g.col_indices, np.arange(n, dtype=np.int64)))
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    deg_tilde = deg.astype(np.float64) + 1.0
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg + 1, out=offsets[1:])
    return NormalizedAdjacency(
        num_nodes=n,
        row_offsets=offsets,
        col_indices=cols,
        # joint sqrt keeps trivially exact cases exact (e.g. 1/sqrt(4))
        values=1.0 / np.sqrt(deg_tilde[rows] * deg_tilde[cols]),
    )


def adjacency_matmul(adj: NormalizedAdjacency, x: np.ndarray) -> np.ndarray:
    """Compute adj @ x for a dense (num_nodes, d) matrix x."""
    if adj.num_nodes == 0:
        return np.zeros_like(x)
    return adj._csr @ x


def _gather_neighbor_blocks(g: Graph, nodes: np.ndarray) -> np.ndarray:
    """Concatenate the neighbor lists of ``nodes`` without a Python loop."""
    starts = g.row_offsets[nodes]
    lengths = g.row_offsets[nodes + 1] - starts
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    cum = np.cumsum(lengths)
    step = np.ones(total, dtype=np.int64)
    step[0] = starts[0]
    step[cum[:-1]] = starts[1:] - starts[:-1] - lengths[:-1] + 1
    return g.col_indices[np.cumsum(step)]


def hop_distances(g: Graph, source: int, max_hops: int | None = None) -> np.ndarray:
    """BFS hop counts from ``source``; unreachable nodes get -1.

    With ``max_hops`` set, exploration stops after that many levels and
    anything farther keeps -1.
    """
    dist = np.full(g.num_nodes, -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    hops = 0
    while frontier.size and (max_hops is None or hops < max_hops):
        hops += 1
        nxt = np.unique(_gather_neighbor_blocks(g, frontier))
        nxt = nxt[dist[nxt] < 0]
        dist[nxt] = hops
        frontier = nxt
    return dist


def hop_distance_classes(g: Graph, near_max: int, far_min: int) -> tuple[np.ndarray, np.ndarray]:
    """Classify every ordered node pair as near, far, or neither.

    Returns (near, far) boolean matrices of shape (n, n): near marks
    pairs at hop distance in [1, near_max], far marks pairs at distance
    >= far_min.  Disconnected pairs count as far.  The diagonal is False
    in both.

    Raises
    ------
    ValueError
        If near_max >= far_min.
    """
    if near_max >= far_min:
        raise ValueError("near_max must be < far_min")
    n = g.num_nodes
    near = np.zeros((n, n), dtype=bool)
    far = np.zeros((n, n), dtype=bool)
    for src in range(n):
        # BFS only needs far_min - 1 levels: beyond that is "far" either way.
        dist = hop_distances(g, src, max_hops=far_min - 1)
        near[src] = (dist >= 1) & (dist <= near_max)
        far[src] = dist < 0
        far[src, src] = False
    return near, far
