"""Shared fixtures: small graph builders and brute-force oracles."""

import numpy as np

from netbound.topology import Topology


def make_topology(n, edges, rssi=None, **kw):
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if rssi is None:
        rssi = np.full(len(edges), -40.0)
    return Topology(n=n, edges=edges, rssi=np.asarray(rssi, float), **kw)


def floyd_warshall_oracle(n, edges, weights=None):
    """Independent brute-force all-pairs shortest paths."""
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for idx, (u, v) in enumerate(edges):
        w = 1.0 if weights is None else weights[idx]
        d[u, v] = min(d[u, v], w)
        d[v, u] = min(d[v, u], w)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i, k] + d[k, j] < d[i, j]:
                    d[i, j] = d[i, k] + d[k, j]
    return d


def random_connected_graph(rng, n, extra_edge_prob=0.15):
    """Random spanning tree plus a sprinkling of extra edges."""
    edges = set()
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges.add((u, v))
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < extra_edge_prob:
                edges.add((u, v))
    return sorted(edges)
