"""Clock-free and geometry-free ISR observables with clock phase-jump faults.

Sign convention on an undirected edge ``(i, j)`` with ``i < j``: the lower
index plays the transmitter role and contributes ``+f_i``, the higher index
contributes ``-f_j`` to the clock-free range.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from isrfd.errors import ConfigError

C_LIGHT = 299_792_458.0  # m/s


def clock_jump_bias(delta_t):
    """Range bias (m) caused by a clock phase jump of ``delta_t`` seconds."""
    return 0.5 * C_LIGHT * delta_t


@dataclass(frozen=True)
class FaultScenario:
    """Which satellites jump, by how much (m), and how often each link is hit."""

    fault_satellites: frozenset
    bias_per_satellite: dict
    fault_ratio: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "fault_satellites", frozenset(self.fault_satellites))
        if not 0.0 <= self.fault_ratio <= 1.0:
            raise ConfigError(f"fault_ratio must lie in [0, 1], got {self.fault_ratio}")
        for s in self.fault_satellites:
            b = self.bias_per_satellite.get(s)
            if b is None or not np.isfinite(b):
                raise ConfigError(f"fault satellite {s} needs a finite bias")

    @classmethod
    def none(cls, seed=0):
        return cls(frozenset(), {}, 0.0, seed)

    @classmethod
    def single(cls, satellite, bias, fault_ratio, seed=0):
        return cls(frozenset([satellite]), {satellite: float(bias)}, fault_ratio, seed)


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    r: float  # m
    sigma_m: float  # m
    corrupted_by: tuple = ()
    bias: float = 0.0  # net injected bias, m


@dataclass
class MeasurementSet:
    """Clock-free ranges on the edges of one epoch's link graph."""

    epoch: float
    edges: list = field(default_factory=list)

    def __post_init__(self):
        self._index = {(e.i, e.j): k for k, e in enumerate(self.edges)}

    def __len__(self):
        return len(self.edges)

    def range(self, i, j) -> float:
        """Measured range for the pair in either order."""
        return self.edges[self._index[(min(i, j), max(i, j))]].r

    def sigma(self, i, j) -> float:
        return self.edges[self._index[(min(i, j), max(i, j))]].sigma_m

    def has(self, i, j) -> bool:
        return (min(i, j), max(i, j)) in self._index

    def pairs(self) -> np.ndarray:
        return np.array([(e.i, e.j) for e in self.edges], dtype=np.int64).reshape(-1, 2)

    def ranges(self) -> np.ndarray:
        return np.array([e.r for e in self.edges], dtype=float)

    def sigmas(self) -> np.ndarray:
        return np.array([e.sigma_m for e in self.edges], dtype=float)

    def corrupted_count(self) -> int:
        return sum(1 for e in self.edges if e.corrupted_by)

    def satellites(self, n=None) -> set:
        s = set()
        for e in self.edges:
            s.update((e.i, e.j))
        return s


def simulate_clock_free(x_i, x_j, f_i, f_j, sigma_m, rng):
    """Clock-free range (m): ``|x_i - x_j| + f_i - f_j + noise``. Positions in km."""
    if not sigma_m > 0:
        raise ValueError("sigma_m must be positive")
    d = 1e3 * float(np.linalg.norm(np.asarray(x_i, float) - np.asarray(x_j, float)))
    return d + f_i - f_j + rng.normal(0.0, sigma_m)


def simulate_geometry_free(tau_i, tau_j, f_i, f_j, sigma_c, rng):
    """Geometry-free clock observable (m): ``c (tau_j - tau_i) + f_i + f_j + noise``."""
    if not sigma_c > 0:
        raise ValueError("sigma_c must be positive")
    return C_LIGHT * (tau_j - tau_i) + f_i + f_j + rng.normal(0.0, sigma_c)


def inject_faults(graph, truth_positions, scenario: FaultScenario, sigma_m, rng=None,
                  epoch=0.0):
    """Noisy clock-free ranges on every graph edge, with faults fired per edge.

    Each edge incident to a fault satellite is corrupted independently with
    probability ``scenario.fault_ratio``. When both endpoints are faulty and
    fire, the net bias is ``f_i - f_j``.
    """
    if not sigma_m > 0:
        raise ValueError("sigma_m must be positive")
    n = len(truth_positions)
    for s in scenario.fault_satellites:
        if not 0 <= s < n:
            raise ConfigError(f"fault satellite {s} outside [0, {n})")
    if rng is None:
        rng = np.random.default_rng(scenario.seed)
    x = np.asarray(truth_positions, dtype=float)
    pairs = sorted(graph.edges)
    m = len(pairs)
    noise = rng.normal(0.0, sigma_m, size=m)
    # one uniform per (edge, endpoint) keeps the stream layout independent of
    # which satellites are faulty
    fire = rng.random(size=(m, 2)) < scenario.fault_ratio
    edges = []
    for k, (i, j) in enumerate(pairs):
        d = 1e3 * float(np.linalg.norm(x[i] - x[j]))
        f_i = f_j = 0.0
        hit = []
        if i in scenario.fault_satellites and fire[k, 0]:
            f_i = scenario.bias_per_satellite[i]
            hit.append(i)
        if j in scenario.fault_satellites and fire[k, 1]:
            f_j = scenario.bias_per_satellite[j]
            hit.append(j)
        bias = f_i - f_j
        edges.append(Edge(i, j, d + bias + noise[k], float(sigma_m), tuple(hit), bias))
    return MeasurementSet(float(epoch), edges)
