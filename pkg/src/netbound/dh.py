"""Davidson-Harel simulated-annealing layout.

The objective sums, over every node pair, an attraction term y^2 and a
repulsion term 1/(y+1)^2 of the pair distance y.  Each step proposes moving
one random node to a point on a circle of the current disk radius around it;
downhill moves are always taken, uphill moves pass a Metropolis test with
probability exp(-dE / (k*T)).  Temperature and disk radius shrink by their
cooling constants after itmax = itmax_factor * n proposals; the run ends
when the temperature falls below epsilon or the budget runs out.
"""

import math
from dataclasses import dataclass

import numpy as np

from .layout import Layout, RunTrace, TraceRecorder, initial_positions
from .topology import Topology


@dataclass(frozen=True)
class DhParams:
    W: float = 600.0
    H: float = 600.0
    t_initial: float | None = None  # defaults to 0.3 * W
    t_c: float = 0.95
    disk_radius: float | None = None  # defaults to W / 10
    r_c: float = 0.95
    boltzmann_k: float = 1.0
    itmax_factor: int = 20
    epsilon: float = 1e-2
    budget_secs: float | None = None
    rng_seed: int = 0
    sample_every_ms: float = 100.0

    def __post_init__(self):
        if not 0.0 < self.t_c < 1.0:
            raise ValueError("t_c must lie in (0, 1)")
        if not 0.0 < self.r_c < 1.0:
            raise ValueError("r_c must lie in (0, 1)")
        if min(self.W, self.H, self.boltzmann_k, self.epsilon) <= 0:
            raise ValueError("DH parameters must be positive")

    @property
    def t_initial_value(self) -> float:
        return self.t_initial if self.t_initial is not None else 0.3 * self.W

    @property
    def disk_radius_value(self) -> float:
        return self.disk_radius if self.disk_radius is not None else self.W / 10.0


def dh_pair_energy(y):
    """Attraction y^2 plus repulsion 1/(y+1)^2 for a pair distance y."""
    return y * y + 1.0 / ((y + 1.0) * (y + 1.0))


def dh_energy(positions: np.ndarray) -> float:
    """Full objective: pair energies summed over all unordered pairs."""
    n = len(positions)
    dx = positions[:, 0, None] - positions[None, :, 0]
    dy = positions[:, 1, None] - positions[None, :, 1]
    y = np.hypot(dx, dy)
    total = np.sum(dh_pair_energy(y)) - n * dh_pair_energy(0.0)
    return 0.5 * float(total)


def _node_terms(positions: np.ndarray, i: int, point: np.ndarray) -> float:
    """Energy of node i's pair terms if it sat at ``point``."""
    diff = positions - point
    y = np.hypot(diff[:, 0], diff[:, 1])
    y = np.delete(y, i)
    return float(np.sum(dh_pair_energy(y)))


def dh_acceptance_probability(delta_e: float, boltzmann_k: float, temperature: float) -> float:
    """Metropolis probability of accepting an uphill move."""
    exponent = -delta_e / (boltzmann_k * temperature)
    if exponent < -700.0:
        return 0.0
    return math.exp(exponent)


def dh_layout(
    topology: Topology, params: DhParams, trace_hook=None, energy_model=None
) -> tuple[Layout, RunTrace]:
    n = topology.n
    w, h = params.W, params.H
    rng = np.random.default_rng(np.random.SeedSequence(params.rng_seed))
    positions = initial_positions(n, (w, h), params.rng_seed, centered=True)
    recorder = TraceRecorder(params.sample_every_ms, trace_hook)

    def reported(own: float) -> float:
        if energy_model is not None:
            from .kk import _energy

            return _energy(positions, energy_model.l, energy_model.k)
        return own

    temperature = params.t_initial_value
    radius = params.disk_radius_value
    itmax = params.itmax_factor * n
    energy = dh_energy(positions)
    moves = 0
    terminated = None
    while True:
        if temperature < params.epsilon:
            terminated = "epsilon"
            break
        if params.budget_secs is not None and recorder.elapsed_secs() >= params.budget_secs:
            terminated = "budget"
            break
        for _ in range(itmax):
            i = int(rng.integers(n))
            angle = rng.uniform(0.0, 2.0 * math.pi)
            candidate = positions[i] + radius * np.array(
                [math.cos(angle), math.sin(angle)]
            )
            old_terms = _node_terms(positions, i, positions[i])
            new_terms = _node_terms(positions, i, candidate)
            new_energy = energy - old_terms + new_terms
            if new_energy <= energy:
                positions[i] = candidate
                energy = new_energy
            else:
                p = dh_acceptance_probability(
                    new_energy - energy, params.boltzmann_k, temperature
                )
                phi = rng.uniform(0.0, 1.0)
                if phi <= p:
                    positions[i] = candidate
                    energy = new_energy
            moves += 1
            if moves % 256 == 0:
                recorder.maybe_sample(reported(energy), positions)
                if (
                    params.budget_secs is not None
                    and recorder.elapsed_secs() >= params.budget_secs
                ):
                    break
        else:
            temperature *= params.t_c
            radius *= params.r_c
            energy = dh_energy(positions)  # resync accumulated drift
            continue
        # inner break means the budget expired mid-sweep
        terminated = "budget"
        break

    trace = recorder.finish(terminated, reported(energy), positions, iterations=moves)
    return Layout(positions=positions, frame=(w, h)), trace
