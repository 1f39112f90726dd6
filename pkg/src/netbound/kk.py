"""Kamada-Kawai spring-embedder layout.

Energy of a layout is the sum over node pairs of half the spring stiffness
times the squared difference between drawn distance and ideal length.  The
engine repeatedly picks the node whose energy gradient has the largest norm
(its "maximum change") and relaxes it with damped-free 2x2 Newton-Raphson
steps while every other node stays fixed.

Coincident nodes would make the gradient singular; such pairs are separated
by a small deterministic offset derived from the pair ids, keeping runs
reproducible.
"""

import math
from dataclasses import dataclass

import numpy as np

from .layout import Layout, RunTrace, TraceRecorder, initial_positions
from .topology import DistanceModel, Topology


@dataclass(frozen=True)
class KkParams:
    K: float = 1.0
    L0: float = 600.0
    epsilon: float = 1e-2
    energy_stop: float | None = 1.0
    budget_secs: float | None = None
    rng_seed: int = 0
    newton_cap: int = 50  # per-node Newton iterations per selection
    max_moves: int | None = None  # deterministic alternative to budget_secs
    sample_every_ms: float = 100.0

    def __post_init__(self):
        if min(self.K, self.L0, self.epsilon) <= 0:
            raise ValueError("K, L0 and epsilon must be positive")
        if self.energy_stop is not None and self.energy_stop < 0:
            raise ValueError("energy_stop must be nonnegative")


_JITTER_FACTOR = 1e-6  # of the frame side, for coincident-node separation


def _jitter_vectors(m: int, others: np.ndarray, scale: float) -> np.ndarray:
    """Deterministic unit offsets for coincident pairs (m, j), scaled."""
    z = (np.uint64(m) << np.uint64(32)) ^ others.astype(np.uint64)
    z = (z + np.uint64(0x9E3779B97F4A7C15)).astype(np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    angle = (z >> np.uint64(11)).astype(np.float64) / float(1 << 53) * 2.0 * math.pi
    return scale * np.column_stack([np.cos(angle), np.sin(angle)])


def _pair_state(m, positions, others, jitter_scale):
    """Difference vectors and distances from node m to ``others``.

    Zero distances are replaced by deterministic jitter offsets so force
    evaluation never divides by zero.
    """
    diff = positions[m] - positions[others]
    dist = np.hypot(diff[:, 0], diff[:, 1])
    zero = dist == 0.0
    if zero.any():
        j = _jitter_vectors(m, others[zero], jitter_scale)
        diff[zero] = j
        dist[zero] = jitter_scale
    return diff, dist


def kk_energy(layout, model: DistanceModel) -> float:
    """Spring energy of a layout under a distance model."""
    positions = np.asarray(layout.positions if hasattr(layout, "positions") else layout)
    if len(positions) != model.n:
        raise ValueError("layout does not match model dimensions")
    return _energy(positions, model.l, model.k)


def _energy(positions, l, k) -> float:
    dx = positions[:, 0, None] - positions[None, :, 0]
    dy = positions[:, 1, None] - positions[None, :, 1]
    dist = np.hypot(dx, dy)
    err = dist - l
    np.fill_diagonal(err, 0.0)
    return 0.25 * float(np.sum(k * err * err))


def _all_deltas(positions, l, k):
    """Gradient norms of every node, plus the total energy, in one pass."""
    dx = positions[:, 0, None] - positions[None, :, 0]
    dy = positions[:, 1, None] - positions[None, :, 1]
    dist = np.hypot(dx, dy)
    np.fill_diagonal(dist, 1.0)
    zero = dist == 0.0
    if zero.any():
        dist[zero] = 1.0  # coincident pairs exert no force here (see _pair_state)
    factor = k * (1.0 - l / dist)
    np.fill_diagonal(factor, 0.0)
    if zero.any():
        factor[zero] = 0.0
    gx = np.sum(factor * dx, axis=1)
    gy = np.sum(factor * dy, axis=1)
    err = dist - l
    np.fill_diagonal(err, 0.0)
    if zero.any():
        err[zero] = -l[zero]
    energy = 0.25 * float(np.sum(k * err * err))
    return np.hypot(gx, gy), energy


def _gradient(m, positions, others, l_row, k_row, jitter_scale):
    diff, dist = _pair_state(m, positions, others, jitter_scale)
    factor = k_row * (1.0 - l_row / dist)
    g = factor @ diff
    return g[0], g[1]


def kk_gradient_and_delta(m: int, layout, model: DistanceModel):
    """Partial derivatives of the energy at node m and their norm."""
    positions = np.asarray(layout.positions if hasattr(layout, "positions") else layout)
    others = _others(model.n, m)
    gx, gy = _gradient(
        m, positions, others, model.l[m, others], model.k[m, others],
        _JITTER_FACTOR * model.L0,
    )
    return gx, gy, math.hypot(gx, gy)


def _others(n: int, m: int) -> np.ndarray:
    idx = np.arange(n)
    return idx[idx != m]


def _newton_step(m, positions, others, l_row, k_row, jitter_scale, mean_ideal,
                 weight: float = 1.0):
    """One relaxation step for node m; returns (dx, dy, delta_before)."""
    diff, dist = _pair_state(m, positions, others, jitter_scale)
    factor = k_row * (1.0 - l_row / dist)
    gx, gy = factor @ diff
    delta = math.hypot(gx, gy)
    dist3 = dist * dist * dist
    xx = diff[:, 0] * diff[:, 0]
    yy = diff[:, 1] * diff[:, 1]
    xy = diff[:, 0] * diff[:, 1]
    exx = float(np.sum(k_row * (1.0 - l_row * yy / dist3)))
    eyy = float(np.sum(k_row * (1.0 - l_row * xx / dist3)))
    exy = float(np.sum(k_row * (l_row * xy / dist3)))
    det = exx * eyy - exy * exy
    scale = exx * exx + eyy * eyy + 2.0 * exy * exy
    if abs(det) <= 1e-14 * scale or scale == 0.0:
        # singular Hessian: damped gradient descent step
        if delta == 0.0:
            return 0.0, 0.0, delta
        step = min(weight * delta, mean_ideal / 10.0)
        return -gx / delta * step, -gy / delta * step, delta
    dx = (-gx * eyy + gy * exy) / det
    dy = (-gy * exx + gx * exy) / det
    return dx, dy, delta


def _relax_node(m, positions, others, l_row, k_row, epsilon, cap, jitter_scale,
                mean_ideal, weight: float = 1.0) -> float:
    """Newton-relax node m in place until its delta drops to epsilon.

    ``weight`` scales node m's spring terms (decaying stiffness); since the
    gradient and Hessian scale together, the Newton displacement itself is
    unchanged and only the exit test and the fallback step length see the
    scaled delta.  Returns the delta seen on entry, unscaled.
    """
    entry_delta = None
    for _ in range(cap):
        dx, dy, delta = _newton_step(
            m, positions, others, l_row, k_row, jitter_scale, mean_ideal,
            weight=weight,
        )
        if entry_delta is None:
            entry_delta = delta
        if weight * delta <= epsilon:
            break
        positions[m, 0] += dx
        positions[m, 1] += dy
    return entry_delta if entry_delta is not None else 0.0


def kk_newton_update(m: int, layout, model: DistanceModel, epsilon: float,
                     cap: int = 50) -> np.ndarray:
    """Relaxed position for node m; the layout itself is left untouched."""
    positions = np.array(
        layout.positions if hasattr(layout, "positions") else layout, dtype=float
    )
    others = _others(model.n, m)
    _relax_node(
        m, positions, others, model.l[m, others], model.k[m, others], epsilon,
        cap, _JITTER_FACTOR * model.L0, model.mean_ideal_length,
    )
    return positions[m].copy()


def kk_layout(
    topology: Topology,
    model: DistanceModel,
    params: KkParams,
    trace_hook=None,
    energy_model: DistanceModel | None = None,
    on_select=None,
) -> tuple[Layout, RunTrace]:
    """Full Kamada-Kawai run: argmax-delta selection until convergence.

    Every outer pass recomputes the maximum change of all nodes, picks the
    largest and relaxes that node.  Stops when the largest delta falls to
    ``epsilon``, the energy drops below ``energy_stop``, or the wall-clock
    budget runs out.  ``energy_model`` switches which model the *reported*
    energy uses (the optimization always follows ``model``).
    """
    n = model.n
    if topology.n != n:
        raise ValueError("model does not match topology")
    positions = initial_positions(n, (params.L0, params.L0), params.rng_seed)
    jitter_scale = _JITTER_FACTOR * params.L0
    report = energy_model if energy_model is not None else model
    recorder = TraceRecorder(params.sample_every_ms, trace_hook)

    def reported(own_energy: float) -> float:
        if report is model:
            return own_energy
        return _energy(positions, report.l, report.k)

    moves = 0
    terminated = None
    while True:
        if params.budget_secs is not None and recorder.elapsed_secs() >= params.budget_secs:
            terminated = "budget"
            break
        if params.max_moves is not None and moves >= params.max_moves:
            terminated = "moves"
            break
        deltas, energy = _all_deltas(positions, model.l, model.k)
        if params.energy_stop is not None and energy < params.energy_stop:
            terminated = "energy"
            break
        m = int(np.argmax(deltas))
        if deltas[m] <= params.epsilon:
            terminated = "epsilon"
            break
        if on_select is not None:
            on_select(m)
        others = _others(n, m)
        _relax_node(
            m, positions, others, model.l[m, others], model.k[m, others],
            params.epsilon, params.newton_cap, jitter_scale,
            model.mean_ideal_length,
        )
        moves += 1
        recorder.maybe_sample(reported(energy), positions)

    final_energy = reported(_energy(positions, model.l, model.k))
    trace = recorder.finish(terminated, final_energy, positions, iterations=moves)
    return Layout(positions=positions, frame=(params.L0, params.L0)), trace
