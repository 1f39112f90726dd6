"""Accelerated Kamada-Kawai variants for boundary detection.

Three stacked ideas:

* signal-strength distances (KK-SS): the hop-count matrix is replaced by
  weighted shortest paths over per-edge distances estimated from RSSI;
* multi-node selection (KK-MS): instead of relaxing the single worst node,
  a queue of the k% worst nodes (spread out by a three-hop exclusion rule)
  is relaxed per round, with a full re-rank only every sqrt(n) selections;
* decaying stiffness with a growing starting area (KK-MS-DS): layout starts
  around the best-connected node, repeatedly selected nodes lose influence
  through an exponentially decaying per-node stiffness multiplier, and the
  area expands two hops outward whenever its edge-length error stops
  improving; a final fine-tune pass runs on the whole network with the
  original stiffness.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .fspl import FsplParams, fspl_distance
from .kk import (
    _JITTER_FACTOR,
    _all_deltas,
    _energy,
    _gradient,
    _relax_node,
)
from .kk import KkParams
from .layout import Layout, RunTrace, TraceRecorder, initial_positions
from .topology import DistanceModel, Topology, all_pairs_graph_distance, build_distance_model


def kk_ss_model(
    topology: Topology, fspl: FsplParams = FsplParams(), L0: float = 600.0,
    K: float = 1.0,
) -> DistanceModel:
    """Distance model whose graph metric sums RSSI-estimated edge lengths."""
    lengths = fspl_distance(topology.rssi, fspl)
    d = all_pairs_graph_distance(topology, edge_weights=lengths)
    return build_distance_model(d, L0, K)


@dataclass
class DecayState:
    """Per-node decaying stiffness multipliers in [0, 1].

    A node's spring terms are scaled by its multiplier while it moves, so
    repeatedly selected nodes settle down.  ``update`` applies one decay
    step m' = m - z * p^t and increments the node's selection count.
    """

    n: int
    p: float = 0.05
    rested_value: float = 0.1
    symmetric: bool = False  # also scale by the partner's multiplier
    m: np.ndarray = field(default=None)
    t: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.m is None:
            self.m = np.ones(self.n)
        if self.t is None:
            self.t = np.zeros(self.n, dtype=np.int64)

    def update(self, node: int, z: float) -> float:
        new = update_decaying_stiffness(
            float(self.m[node]), z, int(self.t[node]), self.p
        )
        self.m[node] = new
        self.t[node] += 1
        return new


def update_decaying_stiffness(m: float, z: float, t: int, p: float = 0.05) -> float:
    """One decay step m' = clamp(m - z * p^t, 0, 1)."""
    if not 0.0 <= z <= 1.0:
        raise ValueError("z must lie in [0, 1]")
    return min(1.0, max(0.0, m - z * p**t))


@dataclass
class StabilityState:
    """Edge-length agreement of a layout region with its RSSI estimates.

    ``r`` is the mean absolute rescaled edge-length error over its standard
    deviation; low or stalling r means the region has stopped expanding.
    ``tt`` is the check interval in selection rounds, ``epsilon_r`` the
    stability threshold and ``stall_window`` the number of consecutive
    non-improving checks that also count as stable.
    """

    ME: float = math.nan
    sigma: float = math.nan
    r: float = math.nan
    tt: int = 100
    epsilon_r: float = 0.1
    stall_window: int = 3


def stability_ratio(
    layout,
    topology: Topology,
    reference_lengths: np.ndarray,
    edge_mask: np.ndarray | None = None,
    tt: int = 100,
    epsilon_r: float = 0.1,
    stall_window: int = 3,
) -> StabilityState:
    """Stable-status ratio of (a region of) a layout.

    Layout edge lengths are first rescaled by the least-squares factor onto
    the reference lengths, removing the arbitrary drawing scale; the ratio
    is mean(|error|) / std(error), with r = 0 when the errors are exactly
    uniform (sigma = 0).
    """
    positions = np.asarray(layout.positions if hasattr(layout, "positions") else layout)
    edges = topology.edges
    refs = np.asarray(reference_lengths, dtype=np.float64).reshape(-1)
    if len(refs) != len(edges):
        raise ValueError("reference_lengths must align with topology edges")
    if edge_mask is not None:
        edges = edges[edge_mask]
        refs = refs[edge_mask]
    if len(edges) == 0:
        raise ValueError("no edges in scope")
    drawn = np.linalg.norm(positions[edges[:, 0]] - positions[edges[:, 1]], axis=1)
    denom = float(drawn @ drawn)
    scale = float(drawn @ refs) / denom if denom > 0 else 0.0
    diff = scale * drawn - refs
    me = float(diff.mean())
    sigma = float(np.sqrt(np.mean((diff - me) ** 2)))
    r = float(np.mean(np.abs(diff)) / sigma) if sigma > 0 else 0.0
    return StabilityState(
        ME=me, sigma=sigma, r=r, tt=tt, epsilon_r=epsilon_r, stall_window=stall_window
    )


@dataclass
class StartingArea:
    """Monotonically growing node set the layout currently works on."""

    members: np.ndarray  # boolean mask over nodes
    generation: int = 0

    def __post_init__(self):
        self.members = np.asarray(self.members, dtype=bool).copy()
        if not self.members.any():
            raise ValueError("starting area must be nonempty")

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.members)

    def expand(self, new_members: np.ndarray) -> np.ndarray:
        """Grow by the given node ids; returns the ids actually added."""
        added = np.setdiff1d(np.asarray(new_members), self.indices())
        self.members[added] = True
        self.generation += 1
        return added


class _MsEngine:
    """Queue-driven multi-node selection on top of the Newton relaxer.

    The queue holds the top-k nodes by selection key (gradient norm times
    the decay multiplier), spread out by a three-hop exclusion rule; it is
    rebuilt from scratch whenever it drains or sqrt(n) selections have
    happened since the last build.  Gradient ranks are only refreshed at
    builds, which is what makes batches cheap.
    """

    def __init__(
        self,
        topology: Topology,
        model: DistanceModel,
        params: KkParams,
        k_percent: float,
        decay: DecayState | None = None,
        positions: np.ndarray | None = None,
    ):
        if not 0.0 < k_percent <= 100.0:
            raise ValueError("k_percent must lie in (0, 100]")
        self.topology = topology
        self.model = model
        self.params = params
        self.k_percent = k_percent
        self.decay = decay
        self.positions = (
            positions
            if positions is not None
            else initial_positions(model.n, (params.L0, params.L0), params.rng_seed)
        )
        self.adjacency = topology.adjacency()
        self.rebuild_every = max(1, round(math.sqrt(topology.n)))
        self.jitter_scale = _JITTER_FACTOR * params.L0
        self.queue: list[int] = []
        self.selections = 0
        self.selections_since_rebuild = 0
        self.rebuilds = 0
        self.rounds = 0
        self.last_max_delta = math.inf
        self.scope_idx: np.ndarray | None = None
        self._sub_cache = None
        self.set_scope(None)

    # -- scope ---------------------------------------------------------

    def set_scope(self, idx: np.ndarray | None):
        self.scope_idx = None if idx is None else np.asarray(idx, dtype=np.int64)
        self._sub_cache = None
        self.queue = []
        self.selections_since_rebuild = 0

    def _scope_nodes(self) -> np.ndarray:
        if self.scope_idx is None:
            return np.arange(self.model.n)
        return self.scope_idx

    def _submatrices(self):
        if self.scope_idx is None:
            return self.model.l, self.model.k
        if self._sub_cache is None:
            ix = np.ix_(self.scope_idx, self.scope_idx)
            self._sub_cache = (self.model.l[ix], self.model.k[ix])
        return self._sub_cache

    # -- queue ---------------------------------------------------------

    def _k_count(self, scope_size: int) -> int:
        return max(1, round(scope_size * self.k_percent / 100.0))

    def rebuild_queue(self):
        nodes = self._scope_nodes()
        if self.scope_idx is None:
            deltas, self.last_energy = _all_deltas(
                self.positions, self.model.l, self.model.k
            )
        else:
            l_sub, k_sub = self._submatrices()
            sub = self.positions[nodes]
            dx = sub[:, 0, None] - sub[None, :, 0]
            dy = sub[:, 1, None] - sub[None, :, 1]
            dist = np.hypot(dx, dy)
            np.fill_diagonal(dist, 1.0)
            zero = dist == 0.0
            dist[zero] = 1.0
            factor = k_sub * (1.0 - l_sub / dist)
            np.fill_diagonal(factor, 0.0)
            factor[zero] = 0.0
            deltas = np.hypot(
                np.sum(factor * dx, axis=1), np.sum(factor * dy, axis=1)
            )
            self.last_energy = None
        self.last_max_delta = float(deltas.max()) if len(deltas) else 0.0
        keys = deltas
        if self.decay is not None:
            keys = deltas * self.decay.m[nodes]
        order = np.argsort(-keys, kind="stable")
        k_count = self._k_count(len(nodes))
        chosen: list[int] = []
        excluded: set[int] = set()
        for rank in range(min(k_count, len(order))):
            cand = int(nodes[order[rank]])
            if cand in excluded:
                continue
            chosen.append(cand)
            excluded.update(
                int(x) for x in self.topology.hop_neighborhood(cand, 3)
            )
        self.queue = chosen
        self.selections_since_rebuild = 0
        self.rebuilds += 1
        self.rounds += 1

    # -- stepping ------------------------------------------------------

    def needs_rebuild(self) -> bool:
        return not self.queue or self.selections_since_rebuild >= self.rebuild_every

    def step(self) -> int:
        """Select and relax one node; returns its id."""
        if self.needs_rebuild():
            self.rebuild_queue()
        m = self.queue.pop(0)
        nodes = self._scope_nodes()
        others = nodes[nodes != m]
        l_row = self.model.l[m, others]
        k_row = self.model.k[m, others]
        weight = 1.0
        canonical_entry = None
        if self.decay is not None:
            weight = float(self.decay.m[m])
            if self.decay.symmetric:
                gx, gy = _gradient(
                    m, self.positions, others, l_row, k_row, self.jitter_scale
                )
                canonical_entry = math.hypot(gx, gy)
                k_row = k_row * self.decay.m[others]
        entry_delta = _relax_node(
            m,
            self.positions,
            others,
            l_row,
            k_row,
            self.params.epsilon,
            self.params.newton_cap,
            self.jitter_scale,
            self.model.mean_ideal_length,
            weight=weight,
        )
        if canonical_entry is None:
            canonical_entry = entry_delta
        self.selections += 1
        self.selections_since_rebuild += 1
        if self.decay is not None:
            if self.last_max_delta > 0 and math.isfinite(self.last_max_delta):
                z = min(1.0, max(0.0, canonical_entry / self.last_max_delta))
            else:
                z = 0.0
            self.decay.update(m, z)
        return m

    def energy(self) -> float:
        return _energy(self.positions, self.model.l, self.model.k)


def kk_ms_layout(
    topology: Topology,
    model: DistanceModel,
    k_percent: float,
    params: KkParams,
    decay: DecayState | None = None,
    area: StartingArea | None = None,
    trace_hook=None,
    energy_model: DistanceModel | None = None,
    on_select=None,
) -> tuple[Layout, RunTrace]:
    """Multi-node selection layout run.

    Terminates when the scope's maximum change falls to epsilon (checked at
    queue builds), the energy drops below ``energy_stop``, the wall-clock
    budget runs out, or ``max_moves`` selections have happened.
    """
    engine = _MsEngine(topology, model, params, k_percent, decay=decay)
    if area is not None:
        engine.set_scope(area.indices())
    report = energy_model if energy_model is not None else model
    recorder = TraceRecorder(params.sample_every_ms, trace_hook)

    def reported() -> float:
        return _energy(engine.positions, report.l, report.k)

    terminated = None
    while True:
        if params.budget_secs is not None and recorder.elapsed_secs() >= params.budget_secs:
            terminated = "budget"
            break
        if params.max_moves is not None and engine.selections >= params.max_moves:
            terminated = "moves"
            break
        if engine.needs_rebuild():
            engine.rebuild_queue()
            if engine.last_max_delta <= params.epsilon:
                terminated = "epsilon"
                break
            if params.energy_stop is not None and engine.energy() < params.energy_stop:
                terminated = "energy"
                break
            if not engine.queue:
                terminated = "epsilon"
                break
        node = engine.step()
        if on_select is not None:
            on_select(node)
        if recorder.due():
            recorder.record(reported(), engine.positions)

    trace = recorder.finish(
        terminated,
        reported(),
        engine.positions,
        iterations=engine.selections,
        rebuilds=engine.rebuilds,
    )
    return Layout(engine.positions, (params.L0, params.L0)), trace


def kk_ms_ds_layout(
    topology: Topology,
    fspl: FsplParams = FsplParams(),
    params: KkParams = KkParams(),
    stability: StabilityState | None = None,
    decay: DecayState | None = None,
    k_percent: float = 5.0,
    trace_hook=None,
    energy_model: DistanceModel | None = None,
    stop_on_stable: bool = True,
    neighbor_max_stiffness: bool = False,
    phase_log: list | None = None,
) -> tuple[Layout, RunTrace]:
    """Growing-area layout with decaying stiffness and a fine-tune pass.

    Phase 1 seeds the working area with the highest-degree node plus its
    two-hop neighborhood and relaxes it with multi-node selection; every
    selection decays the moved node's stiffness multiplier.  Whenever the
    area's stability ratio drops below its threshold or stalls, the area
    grows by all nodes within two hops (fresh multiplier 1.0 for newcomers,
    ``rested_value`` for already-settled members).  Once the area covers the
    network and is stable, multipliers reset to 1 and a fine-tune pass with
    a ten-round check interval runs until stable again.

    ``neighbor_max_stiffness`` switches newcomers to inherit the largest
    multiplier among their in-area neighbors instead of 1.0.
    """
    stability = stability if stability is not None else StabilityState()
    decay = decay if decay is not None else DecayState(n=topology.n)
    model = kk_ss_model(topology, fspl, params.L0, params.K)
    reference = fspl_distance(topology.rssi, fspl)
    report = energy_model if energy_model is not None else model
    engine = _MsEngine(topology, model, params, k_percent, decay=decay)
    recorder = TraceRecorder(params.sample_every_ms, trace_hook)

    degrees = topology.degrees()
    start = int(np.argmax(degrees))  # ties break toward the smallest id
    seed_members = np.zeros(topology.n, dtype=bool)
    seed_members[topology.hop_neighborhood(start, 2)] = True
    area = StartingArea(members=seed_members)
    engine.set_scope(area.indices())
    expansions = 1  # the seeding itself grows the area from nothing
    if phase_log is not None:
        phase_log.append({"event": "seed", "size": int(area.members.sum())})

    def reported() -> float:
        return _energy(engine.positions, report.l, report.k)

    def scope_edge_mask() -> np.ndarray:
        e = topology.edges
        return area.members[e[:, 0]] & area.members[e[:, 1]]

    fine_phase = False
    tt = stability.tt
    prev_r = None
    stalls = 0
    next_check = engine.rounds + tt
    terminated = None

    while True:
        if params.budget_secs is not None and recorder.elapsed_secs() >= params.budget_secs:
            terminated = "budget"
            break
        if params.max_moves is not None and engine.selections >= params.max_moves:
            terminated = "moves"
            break
        if engine.needs_rebuild():
            engine.rebuild_queue()
            if fine_phase and engine.last_max_delta <= params.epsilon:
                terminated = "epsilon"
                break
            if not engine.queue:
                terminated = "epsilon"
                break
        engine.step()
        if recorder.due():
            energy_now = reported()
            recorder.record(energy_now, engine.positions)
            if params.energy_stop is not None and energy_now < params.energy_stop:
                terminated = "energy"
                break
        if engine.rounds < next_check:
            continue

        # stability check for the current scope
        mask = None if fine_phase else scope_edge_mask()
        if mask is not None and not mask.any():
            next_check = engine.rounds + tt
            continue
        state = stability_ratio(
            engine.positions, topology, reference, edge_mask=mask,
            tt=tt, epsilon_r=stability.epsilon_r, stall_window=stability.stall_window,
        )
        improving = prev_r is not None and prev_r > 0 and (
            (prev_r - state.r) / prev_r >= 0.01
        )
        stalls = 0 if (prev_r is None or improving) else stalls + 1
        stable = state.r < stability.epsilon_r or stalls >= stability.stall_window
        prev_r = state.r
        next_check = engine.rounds + tt
        if phase_log is not None:
            phase_log.append(
                {"event": "check", "fine": fine_phase, "r": state.r, "stable": stable}
            )
        if not stable:
            continue

        if fine_phase:
            if stop_on_stable:
                terminated = "stable"
                break
            prev_r, stalls = None, 0
            continue
        if area.members.all():
            # the area covers the network: restore stiffness and fine-tune
            fine_phase = True
            decay.m[:] = 1.0
            engine.decay = None
            engine.set_scope(None)
            tt = 10
            prev_r, stalls = None, 0
            next_check = engine.rounds + tt
            if phase_log is not None:
                phase_log.append({"event": "fine"})
            continue
        # grow the area two hops outward
        grown = topology.hop_neighborhood(area.indices(), 2)
        settled = area.indices()
        added = area.expand(grown)
        decay.m[settled] = decay.rested_value
        if neighbor_max_stiffness and len(added):
            for node in added:
                nbrs = engine.adjacency[node]
                inside = nbrs[area.members[nbrs]]
                decay.m[node] = decay.m[inside].max() if len(inside) else 1.0
        else:
            decay.m[added] = 1.0
        engine.set_scope(area.indices())
        expansions += 1
        prev_r, stalls = None, 0
        next_check = engine.rounds + tt
        if phase_log is not None:
            phase_log.append(
                {"event": "expand", "added": len(added), "size": int(area.members.sum())}
            )

    trace = recorder.finish(
        terminated,
        reported(),
        engine.positions,
        iterations=engine.selections,
        rebuilds=engine.rebuilds,
    )
    if phase_log is not None:
        phase_log.append({"event": "done", "expansions": expansions})
    return Layout(engine.positions, (params.L0, params.L0)), trace
