"""Layout and run-trace containers shared by all layout engines.

A layout engine returns the node positions it settled on plus a RunTrace:
time-stamped samples of its objective value (and, when a trace hook is
given, boundary sensitivity/specificity) taken on a fixed wall-clock grid
and at termination.
"""

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Layout:
    """Node positions inside a drawing frame (width, height)."""

    positions: np.ndarray
    frame: tuple[float, float]

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ValueError("positions must be an (n, 2) array")
        if not np.isfinite(self.positions).all():
            raise ValueError("positions must be finite")

    @property
    def n(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class TraceSample:
    elapsed_ms: float
    energy: float
    sensitivity: float = math.nan
    specificity: float = math.nan


@dataclass
class RunTrace:
    samples: list[TraceSample] = field(default_factory=list)
    terminated_by: str = "budget"
    iterations: int = 0
    final_scale: float = math.nan  # displacement scale, engines that cool one
    rebuilds: int = 0  # queue builds, engines that batch selections

    def final_energy(self) -> float:
        return self.samples[-1].energy if self.samples else math.nan

    def first_crossing_ms(self, target: float) -> float | None:
        """Elapsed time of the first sample at or below ``target`` energy."""
        if math.isinf(target) and target > 0:
            return 0.0
        for s in self.samples:
            if s.energy <= target:
                return s.elapsed_ms
        return None


class TraceRecorder:
    """Samples (elapsed, energy, sensitivity, specificity) on a time grid.

    ``hook(positions) -> (sensitivity, specificity)`` is optional; without it
    the quality columns stay NaN.  elapsed_ms values are forced strictly
    increasing so traces are well-ordered even for instant runs.
    """

    def __init__(self, sample_every_ms: float = 100.0, hook=None):
        self.sample_every_ms = sample_every_ms
        self.hook = hook
        self.samples: list[TraceSample] = []
        self._t0 = time.perf_counter()
        self._next_due_ms = 0.0

    def elapsed_ms(self) -> float:
        return (time.perf_counter() - self._t0) * 1000.0

    def elapsed_secs(self) -> float:
        return time.perf_counter() - self._t0

    def _record(self, energy: float, positions: np.ndarray):
        elapsed = self.elapsed_ms()
        if self.samples and elapsed <= self.samples[-1].elapsed_ms:
            elapsed = self.samples[-1].elapsed_ms + 1e-3
        sens = spec = math.nan
        if self.hook is not None:
            sens, spec = self.hook(positions)
        self.samples.append(TraceSample(elapsed, float(energy), sens, spec))
        self._next_due_ms = elapsed + self.sample_every_ms

    def due(self) -> bool:
        return self.elapsed_ms() >= self._next_due_ms

    def record(self, energy: float, positions: np.ndarray):
        self._record(energy, positions)

    def maybe_sample(self, energy: float, positions: np.ndarray):
        if self.due():
            self._record(energy, positions)

    def finish(
        self, terminated_by: str, energy: float, positions: np.ndarray, **extra
    ) -> RunTrace:
        self._record(energy, positions)
        return RunTrace(samples=self.samples, terminated_by=terminated_by, **extra)


def initial_positions(
    n: int, frame: tuple[float, float], rng_seed: int, centered: bool = False
) -> np.ndarray:
    """Uniform random positions in the frame, deterministic per seed."""
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed))
    w, h = frame
    pts = rng.uniform(0.0, 1.0, (n, 2)) * np.array([w, h])
    if centered:
        pts -= np.array([w / 2.0, h / 2.0])
    return pts


# --- on-disk formats --------------------------------------------------------


def write_layout(layout: Layout, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"LAYOUT {layout.n}\n")
        for i, (x, y) in enumerate(layout.positions):
            fh.write(f"POS {i} {float(x)!r} {float(y)!r}\n")


def read_layout(path) -> Layout:
    n = None
    rows: dict[int, tuple[float, float]] = {}
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "LAYOUT" and len(parts) == 2:
                    n = int(parts[1])
                elif parts[0] == "POS" and len(parts) == 4:
                    rows[int(parts[1])] = (float(parts[2]), float(parts[3]))
                else:
                    raise ValueError
            except ValueError:
                raise ValueError(f"line {line_no}: malformed layout record '{line}'")
    if n is None or sorted(rows) != list(range(n)):
        raise ValueError("layout file must contain POS records for ids 0..n-1")
    positions = np.array([rows[i] for i in range(n)])
    extent = positions.max(axis=0) - positions.min(axis=0)
    return Layout(positions=positions, frame=(float(extent[0]), float(extent[1])))


TRACE_HEADER = ["elapsed_ms", "energy", "sensitivity", "specificity"]


def write_trace(trace: RunTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for s in trace.samples:
            writer.writerow(
                [f"{s.elapsed_ms:.3f}", repr(s.energy), repr(s.sensitivity), repr(s.specificity)]
            )


def read_trace(path) -> list[TraceSample]:
    samples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_HEADER:
            raise ValueError(f"unexpected trace header {header}")
        for row in reader:
            samples.append(
                TraceSample(float(row[0]), float(row[1]), float(row[2]), float(row[3]))
            )
    return samples
