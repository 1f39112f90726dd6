"""Fruchterman-Reingold spring embedder.

All nodes move simultaneously each iteration: every pair repels with force
k^2/d, every edge attracts with force d^2/k, where the force constants come
from a = attraction multiplier and r = repulsion multiplier applied to
sqrt(W*H/n).  Displacements are capped by a cooling scale s that starts at
W/10 and shrinks by the factor (1 - it/max_iteration); the run ends when s
drops below epsilon or the budget runs out.  Positions are clamped to the
centered frame.
"""

import math
from dataclasses import dataclass

import numpy as np

from .kk import _jitter_vectors
from .layout import Layout, RunTrace, TraceRecorder, initial_positions
from .topology import Topology


@dataclass(frozen=True)
class FrParams:
    a: float = 0.75
    r_mult: float = 0.75
    W: float = 600.0
    H: float = 600.0
    max_iteration: int = 1000
    epsilon: float = 1e-6
    budget_secs: float | None = None
    rng_seed: int = 0
    sample_every_ms: float = 100.0

    def __post_init__(self):
        if min(self.a, self.r_mult, self.W, self.H, self.epsilon) <= 0:
            raise ValueError("FR parameters must be positive")
        if self.max_iteration < 1:
            raise ValueError("max_iteration must be at least 1")


def fr_total_energy(positions, edges, k_attract, k_repulse) -> float:
    """Scalar objective for tracing: attraction + repulsion potentials.

    The update rule works on forces, not this value; the trace reports
    sum(d^3/(3k_a)) over edges plus sum(k_r^2 * log-barrier) over pairs,
    whose gradients are the forces used.
    """
    n = len(positions)
    dx = positions[:, 0, None] - positions[None, :, 0]
    dy = positions[:, 1, None] - positions[None, :, 1]
    dist = np.hypot(dx, dy)
    iu = np.triu_indices(n, k=1)
    pair_d = np.maximum(dist[iu], 1e-12)
    repulse = float(np.sum(-(k_repulse**2) * np.log(pair_d)))
    ed = np.maximum(
        np.hypot(*(positions[edges[:, 0]] - positions[edges[:, 1]]).T), 1e-12
    )
    attract = float(np.sum(ed**3 / (3.0 * k_attract)))
    return attract + repulse


def fr_layout(
    topology: Topology, params: FrParams, trace_hook=None, energy_model=None
) -> tuple[Layout, RunTrace]:
    n = topology.n
    w, h = params.W, params.H
    positions = initial_positions(n, (w, h), params.rng_seed, centered=True)
    k_attract = params.a * math.sqrt(w * h / n)
    k_repulse = params.r_mult * math.sqrt(w * h / n)
    edges = topology.edges
    jitter_scale = 1e-6 * w
    recorder = TraceRecorder(params.sample_every_ms, trace_hook)

    def energy() -> float:
        if energy_model is not None:
            from .kk import _energy

            return _energy(positions, energy_model.l, energy_model.k)
        return fr_total_energy(positions, edges, k_attract, k_repulse)

    s = w / 10.0
    it = 0
    terminated = None
    while True:
        if s < params.epsilon:
            terminated = "epsilon"
            break
        if params.budget_secs is not None and recorder.elapsed_secs() >= params.budget_secs:
            terminated = "budget"
            break

        dx = positions[:, 0, None] - positions[None, :, 0]
        dy = positions[:, 1, None] - positions[None, :, 1]
        dist = np.hypot(dx, dy)
        np.fill_diagonal(dist, 1.0)
        zero = dist == 0.0
        if zero.any():
            pairs = np.argwhere(zero)
            for i, j in pairs:
                off = _jitter_vectors(int(i), np.array([j]), jitter_scale)[0]
                dx[i, j], dy[i, j] = off
                dist[i, j] = jitter_scale
        # repulsion over all pairs: push each node away from every other
        coeff = (k_repulse * k_repulse) / (dist * dist)
        np.fill_diagonal(coeff, 0.0)
        disp_x = np.sum(coeff * dx, axis=1)
        disp_y = np.sum(coeff * dy, axis=1)
        # attraction along edges
        eu, ev = edges[:, 0], edges[:, 1]
        ex = positions[eu, 0] - positions[ev, 0]
        ey = positions[eu, 1] - positions[ev, 1]
        ed = np.hypot(ex, ey)
        ezero = ed == 0.0
        if ezero.any():
            for idx in np.flatnonzero(ezero):
                off = _jitter_vectors(int(eu[idx]), np.array([ev[idx]]), jitter_scale)[0]
                ex[idx], ey[idx] = off
                ed[idx] = jitter_scale
        pull = ed / k_attract  # f_a(d)/d = d/k
        np.subtract.at(disp_x, eu, pull * ex)
        np.subtract.at(disp_y, eu, pull * ey)
        np.add.at(disp_x, ev, pull * ex)
        np.add.at(disp_y, ev, pull * ey)
        # move, capping each node's step at the cooling scale s
        norm = np.hypot(disp_x, disp_y)
        norm[norm == 0.0] = 1.0
        step = np.minimum(norm, s) / norm
        positions[:, 0] = np.clip(positions[:, 0] + disp_x * step, -w / 2.0, w / 2.0)
        positions[:, 1] = np.clip(positions[:, 1] + disp_y * step, -h / 2.0, h / 2.0)

        it += 1
        s *= 1.0 - it / params.max_iteration
        if s < 0.0:
            s = 0.0
        recorder.maybe_sample(energy(), positions)

    trace = recorder.finish(
        terminated, energy(), positions, iterations=it, final_scale=s
    )
    return Layout(positions=positions, frame=(w, h)), trace
