"""Boundary-node labeling from point sets and prediction scoring.

The boundary of a point set is taken from its alpha complex: Delaunay
triangles whose circumradius exceeds alpha are discarded, the largest
edge-connected group of surviving triangles is kept, and nodes on its outer
perimeter are the boundary.  Perimeters of interior holes are excluded by
default; ``include_holes`` adds them.

Degenerate inputs (fewer than three distinct points, collinear sets) label
every node as boundary.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .topology import Topology


@dataclass(frozen=True)
class BoundaryLabeling:
    """Per-node boolean flags; True marks a boundary node."""

    flags: np.ndarray

    def __post_init__(self):
        flags = np.asarray(self.flags, dtype=bool).reshape(-1)
        object.__setattr__(self, "flags", flags)
        flags.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.flags)

    def ids(self) -> np.ndarray:
        return np.flatnonzero(self.flags)


def _circumradii(points: np.ndarray, simplices: np.ndarray) -> np.ndarray:
    pa = points[simplices[:, 0]]
    pb = points[simplices[:, 1]]
    pc = points[simplices[:, 2]]
    a = np.linalg.norm(pb - pc, axis=1)
    b = np.linalg.norm(pc - pa, axis=1)
    c = np.linalg.norm(pa - pb, axis=1)
    cross = (pb[:, 0] - pa[:, 0]) * (pc[:, 1] - pa[:, 1]) - (
        pb[:, 1] - pa[:, 1]
    ) * (pc[:, 0] - pa[:, 0])
    area = 0.5 * np.abs(cross)
    with np.errstate(divide="ignore", invalid="ignore"):
        radii = a * b * c / (4.0 * area)
    radii[area == 0.0] = np.inf
    return radii


def alpha_shape_boundary(
    points: np.ndarray, alpha: float, include_holes: bool = False
) -> np.ndarray:
    """Boolean boundary flags for a 2D point set at scale ``alpha``."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if n < 3 or len(np.unique(points, axis=0)) < 3:
        return np.ones(n, dtype=bool)
    try:
        tri = Delaunay(points)
    except QhullError:
        return np.ones(n, dtype=bool)  # collinear or otherwise degenerate
    simplices = tri.simplices
    neighbors = tri.neighbors
    kept = _circumradii(points, simplices) <= alpha
    if not kept.any():
        return np.ones(n, dtype=bool)

    component = _largest_kept_component(kept, neighbors, simplices)

    # Removed triangles reachable from the infinite face form the outside;
    # removed triangles walled off by kept ones are holes.
    removed = ~kept
    outside = np.zeros(len(simplices), dtype=bool)
    stack = list(np.flatnonzero(removed & (neighbors == -1).any(axis=1)))
    outside[stack] = True
    while stack:
        t = stack.pop()
        for nb in neighbors[t]:
            if nb >= 0 and removed[nb] and not outside[nb]:
                outside[nb] = True
                stack.append(int(nb))

    flags = np.zeros(n, dtype=bool)
    for t in np.flatnonzero(component):
        for k in range(3):
            nb = neighbors[t, k]
            if nb >= 0 and kept[nb]:
                continue  # interior facet of the complex
            is_outer = nb < 0 or outside[nb]
            if is_outer or include_holes:
                facet = [simplices[t, j] for j in range(3) if j != k]
                flags[facet] = True
    return flags


def _largest_kept_component(
    kept: np.ndarray, neighbors: np.ndarray, simplices: np.ndarray
) -> np.ndarray:
    """Mask of the largest facet-connected group of kept triangles.

    Ties break on the component's sorted vertex ids, which are stable under
    rigid motion of the points (triangle indices are not).
    """
    label = np.full(len(kept), -1, dtype=np.int64)
    best = None  # (count, vertex-id sort key, label_id)
    next_label = 0
    for seed in np.flatnonzero(kept):
        if label[seed] >= 0:
            continue
        stack = [int(seed)]
        label[seed] = next_label
        members = []
        while stack:
            t = stack.pop()
            members.append(t)
            for nb in neighbors[t]:
                if nb >= 0 and kept[nb] and label[nb] < 0:
                    label[nb] = next_label
                    stack.append(int(nb))
        vertex_key = tuple(np.unique(simplices[members]))
        cand = (len(members), vertex_key, next_label)
        if (
            best is None
            or cand[0] > best[0]
            or (cand[0] == best[0] and cand[1] < best[1])
        ):
            best = cand
        next_label += 1
    return label == best[2]


def detect_boundary(
    layout, topology: Topology, alpha_factor: float = 1.5
) -> BoundaryLabeling:
    """Predict boundary nodes from a layout.

    Alpha adapts to the drawing scale: alpha_factor times the mean layout
    length of the topology's edges, so predictions are invariant under rigid
    motion and uniform scaling of the layout.
    """
    positions = np.asarray(layout.positions if hasattr(layout, "positions") else layout)
    if positions.shape[0] != topology.n:
        raise ValueError("layout does not cover the topology's nodes")
    diffs = positions[topology.edges[:, 0]] - positions[topology.edges[:, 1]]
    mean_edge = float(np.linalg.norm(diffs, axis=1).mean())
    if mean_edge <= 0:
        return BoundaryLabeling(np.ones(topology.n, dtype=bool))
    return BoundaryLabeling(alpha_shape_boundary(positions, alpha_factor * mean_edge))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class Score:
    counts: ConfusionCounts
    sensitivity: float
    specificity: float
    tpr: float
    fnr: float


def score(pred: BoundaryLabeling, truth: BoundaryLabeling) -> Score:
    """Confusion counts plus sensitivity/specificity of a prediction.

    Empty denominators (no true boundary nodes, or no true interior nodes)
    define the affected rate as 1.0 so that suite averages stay total.
    """
    if pred.n != truth.n:
        raise ValueError(f"mismatched node universes: {pred.n} vs {truth.n}")
    p, t = pred.flags, truth.flags
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    tn = int(np.count_nonzero(~p & ~t))
    fn = int(np.count_nonzero(~p & t))
    sensitivity = tp / (tp + fn) if tp + fn else 1.0
    specificity = tn / (tn + fp) if tn + fp else 1.0
    return Score(
        counts=ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn),
        sensitivity=sensitivity,
        specificity=specificity,
        tpr=sensitivity,
        fnr=1.0 - sensitivity,
    )
