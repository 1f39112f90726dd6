"""Network topology representation, graph distances and the on-disk format.

A topology is an undirected connected graph with a received-signal-strength
value on every edge and, optionally, hidden ground-truth node positions plus
ground-truth boundary flags.  Everything downstream (layout engines, boundary
scoring, the benchmark harness) works on these objects.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path


class TopologyError(ValueError):
    """Invalid topology (disconnected, duplicate edges, bad ids...)."""


class TopologyFormatError(TopologyError):
    """Malformed topology file; carries the offending line number."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


MAX_NODES = 20_000  # dense n*n matrices; documented memory ceiling


@dataclass(frozen=True)
class Topology:
    """Immutable undirected connected graph.

    Node ids are dense integers 0..n-1.  Edges are stored as an (m, 2) int
    array with u < v, lexicographically sorted; ``rssi`` is parallel to it
    (dBm).  ``true_positions`` (meters) and ``boundary_truth`` are ground
    truth carried along for scoring only; layout engines never see them.
    """

    n: int
    edges: np.ndarray
    rssi: np.ndarray
    true_positions: np.ndarray | None = None
    boundary_truth: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 1:
            raise TopologyError("node count must be positive")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        rssi = np.asarray(self.rssi, dtype=np.float64).reshape(-1)
        if len(edges) != len(rssi):
            raise TopologyError("edge and rssi arrays differ in length")
        if len(edges) and (edges.min() < 0 or edges.max() >= self.n):
            bad = edges.flat[np.argmax((edges < 0) | (edges >= self.n))]
            raise TopologyError(f"edge references unknown node id {bad}")
        if len(edges) and np.any(edges[:, 0] == edges[:, 1]):
            u = edges[edges[:, 0] == edges[:, 1]][0, 0]
            raise TopologyError(f"self-loop on node {u}")
        lo = np.minimum(edges[:, 0], edges[:, 1]) if len(edges) else edges[:, 0]
        hi = np.maximum(edges[:, 0], edges[:, 1]) if len(edges) else edges[:, 1]
        order = np.lexsort((hi, lo))
        edges = np.column_stack([lo, hi])[order] if len(edges) else edges
        rssi = rssi[order] if len(rssi) else rssi
        if len(edges) > 1 and np.any(np.all(edges[1:] == edges[:-1], axis=1)):
            i = int(np.argmax(np.all(edges[1:] == edges[:-1], axis=1)))
            raise TopologyError(f"duplicate edge {tuple(edges[i])}")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "rssi", rssi)
        if self.true_positions is not None:
            pos = np.asarray(self.true_positions, dtype=np.float64)
            if pos.shape != (self.n, 2):
                raise TopologyError(
                    f"true_positions must cover every node: expected shape "
                    f"({self.n}, 2), got {pos.shape}"
                )
            object.__setattr__(self, "true_positions", pos)
        if self.boundary_truth is not None:
            flags = np.asarray(self.boundary_truth, dtype=bool).reshape(-1)
            if flags.shape != (self.n,):
                raise TopologyError("boundary_truth must cover every node")
            object.__setattr__(self, "boundary_truth", flags)
        unreachable = _first_unreachable(self.n, edges)
        if unreachable is not None:
            raise TopologyError(
                f"disconnected topology: node {unreachable} unreachable from node 0"
            )
        for arr in (self.edges, self.rssi, self.true_positions, self.boundary_truth):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def average_degree(self) -> float:
        return 2.0 * self.m / self.n

    def adjacency(self) -> list[np.ndarray]:
        """Neighbor ids per node, ascending.  Built once, then cached."""
        cached = getattr(self, "_adjacency", None)
        if cached is None:
            nbrs: list[list[int]] = [[] for _ in range(self.n)]
            for u, v in self.edges:
                nbrs[u].append(int(v))
                nbrs[v].append(int(u))
            cached = [np.array(sorted(b), dtype=np.int64) for b in nbrs]
            object.__setattr__(self, "_adjacency", cached)
        return cached

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def hop_neighborhood(self, sources, max_hops: int) -> np.ndarray:
        """Ids of all nodes within ``max_hops`` of any source (sources included)."""
        adj = self.adjacency()
        seen = np.full(self.n, -1, dtype=np.int64)
        queue = deque()
        for s in np.atleast_1d(np.asarray(sources, dtype=np.int64)):
            seen[s] = 0
            queue.append(int(s))
        while queue:
            u = queue.popleft()
            if seen[u] == max_hops:
                continue
            for v in adj[u]:
                if seen[v] < 0:
                    seen[v] = seen[u] + 1
                    queue.append(int(v))
        return np.flatnonzero(seen >= 0)


def _first_unreachable(n: int, edges: np.ndarray) -> int | None:
    """BFS from node 0; id of the first unreachable node, or None."""
    if n == 1:
        return None
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(int(v))
        adj[v].append(int(u))
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    missing = np.flatnonzero(~seen)
    return int(missing[0]) if len(missing) else None


def all_pairs_graph_distance(
    topology: Topology, edge_weights: np.ndarray | None = None
) -> np.ndarray:
    """Dense n*n matrix of shortest-path distances.

    Unweighted (default) counts hops; with ``edge_weights`` (one positive
    length per edge, aligned with ``topology.edges``) path lengths are summed.
    """
    n = topology.n
    if edge_weights is None:
        data = np.ones(topology.m, dtype=np.float64)
        unweighted = True
    else:
        data = np.asarray(edge_weights, dtype=np.float64).reshape(-1)
        if len(data) != topology.m:
            raise ValueError("edge_weights must align with topology edges")
        if np.any(data <= 0):
            raise ValueError("edge weights must be positive")
        unweighted = False
    graph = csr_matrix(
        (data, (topology.edges[:, 0], topology.edges[:, 1])), shape=(n, n)
    )
    d = shortest_path(graph, method="D", directed=False, unweighted=unweighted)
    if np.isinf(d).any():
        i, j = np.argwhere(np.isinf(d))[0]
        raise TopologyError(f"disconnected topology: no path between {i} and {j}")
    return d


@dataclass(frozen=True)
class DistanceModel:
    """Spring model derived from a graph-distance matrix.

    ``l`` holds ideal spring lengths (drawing units, max normalized to the
    frame side L0) and ``k`` spring stiffness values K / d^2.
    """

    d: np.ndarray
    l: np.ndarray
    k: np.ndarray
    L0: float
    K: float
    mean_ideal_length: float = field(init=False)

    def __post_init__(self):
        n = self.d.shape[0]
        off = ~np.eye(n, dtype=bool)
        object.__setattr__(self, "mean_ideal_length", float(self.l[off].mean()))
        for arr in (self.d, self.l, self.k):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.d.shape[0]


def build_distance_model(d_matrix: np.ndarray, L0: float, K: float) -> DistanceModel:
    """Ideal lengths l = L0 * d / max(d) and stiffness k = K / d^2."""
    d = np.asarray(d_matrix, dtype=np.float64)
    n = d.shape[0]
    if n < 2:
        raise TopologyError("degenerate topology: need at least 2 nodes")
    if d.shape != (n, n) or not np.allclose(d, d.T):
        raise ValueError("distance matrix must be square and symmetric")
    off = ~np.eye(n, dtype=bool)
    if np.any(d[off] <= 0):
        raise ValueError("off-diagonal distances must be positive")
    if L0 <= 0 or K <= 0:
        raise ValueError("L0 and K must be positive")
    dmax = d[off].max()
    l = L0 * d / dmax
    with np.errstate(divide="ignore"):
        k = K / np.square(d)
    np.fill_diagonal(l, 0.0)
    np.fill_diagonal(k, 0.0)
    return DistanceModel(d=d.copy(), l=l, k=k, L0=float(L0), K=float(K))


# --- topology file format -------------------------------------------------
#
# Line-oriented text, '#' starts a comment:
#   TOPO <n> <m>
#   NODE <id> <x> <y>        (optional; all nodes or none, meters)
#   EDGE <u> <v> <rssi_dbm>  (exactly m lines)
#   BOUND <id>               (optional ground-truth boundary flags)


def write_topology(topology: Topology, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"TOPO {topology.n} {topology.m}\n")
        if topology.true_positions is not None:
            for i, (x, y) in enumerate(topology.true_positions):
                fh.write(f"NODE {i} {float(x)!r} {float(y)!r}\n")
        for (u, v), s in zip(topology.edges, topology.rssi):
            fh.write(f"EDGE {u} {v} {float(s)!r}\n")
        if topology.boundary_truth is not None:
            for i in np.flatnonzero(topology.boundary_truth):
                fh.write(f"BOUND {i}\n")


def read_topology(path) -> Topology:
    n = None
    m = None
    positions: dict[int, tuple[float, float]] = {}
    edges: list[tuple[int, int]] = []
    rssi: list[float] = []
    bound: list[int] = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            tag = parts[0]
            try:
                if tag == "TOPO":
                    if n is not None:
                        raise TopologyFormatError("duplicate TOPO header", line_no)
                    if len(parts) != 3:
                        raise IndexError
                    n, m = int(parts[1]), int(parts[2])
                elif tag == "NODE":
                    if len(parts) != 4:
                        raise IndexError
                    positions[int(parts[1])] = (float(parts[2]), float(parts[3]))
                elif tag == "EDGE":
                    if len(parts) != 4:
                        raise IndexError
                    edges.append((int(parts[1]), int(parts[2])))
                    rssi.append(float(parts[3]))
                elif tag == "BOUND":
                    if len(parts) != 2:
                        raise IndexError
                    bound.append(int(parts[1]))
                else:
                    raise TopologyFormatError(f"unknown record '{tag}'", line_no)
            except TopologyFormatError:
                raise
            except (ValueError, IndexError):
                raise TopologyFormatError(f"malformed {tag} record: '{line}'", line_no)
    if n is None or m is None:
        raise TopologyFormatError("missing TOPO header")
    if len(edges) != m:
        raise TopologyFormatError(f"expected {m} EDGE records, found {len(edges)}")
    true_positions = None
    if positions:
        if sorted(positions) != list(range(n)):
            missing = next(i for i in range(n) if i not in positions)
            raise TopologyFormatError(f"NODE records must cover every node; missing id {missing}")
        true_positions = np.array([positions[i] for i in range(n)])
    boundary_truth = None
    if bound:
        for i in bound:
            if not 0 <= i < n:
                raise TopologyFormatError(f"BOUND references unknown node id {i}")
        boundary_truth = np.zeros(n, dtype=bool)
        boundary_truth[bound] = True
    try:
        return Topology(
            n=n,
            edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
            rssi=np.array(rssi),
            true_positions=true_positions,
            boundary_truth=boundary_truth,
        )
    except TopologyError as exc:
        raise TopologyFormatError(str(exc)) from exc
