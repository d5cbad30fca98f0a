"""Link graphs and enumeration of 5-node subgraphs used by the EDM test."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from isrfd._backend import kernels


class Provenance(str, enum.Enum):
    MEASURED = "measured"
    COMPUTED = "computed"


def pair_order(k=5):
    """Canonical edge order of a k-node subgraph: (0,1), (0,2), ..., (k-2,k-1)."""
    return list(combinations(range(k), 2))


@dataclass
class LinkGraph:
    """Undirected graph on ``n`` satellites; keys are canonical ``(i, j)``, i < j."""

    n: int
    edges: dict = field(default_factory=dict)

    def __post_init__(self):
        canon = {}
        for (i, j), prov in self.edges.items():
            if i == j:
                raise ValueError(f"self-loop on vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) outside vertex range")
            canon[(min(i, j), max(i, j))] = Provenance(prov)
        self.edges = canon

    @classmethod
    def from_adjacency(cls, adj, provenance=Provenance.MEASURED):
        adj = np.asarray(adj, dtype=bool)
        iu, ju = np.nonzero(np.triu(adj, 1))
        return cls(len(adj), {(int(i), int(j)): provenance for i, j in zip(iu, ju)})

    def adjacency(self, provenance=Provenance.MEASURED) -> np.ndarray:
        """Boolean adjacency restricted to edges of one provenance."""
        adj = np.zeros((self.n, self.n), dtype=bool)
        for (i, j), prov in self.edges.items():
            if provenance is None or prov == provenance:
                adj[i, j] = adj[j, i] = True
        return adj

    def degree(self, v) -> int:
        return sum(1 for e in self.edges if v in e)

    def __len__(self):
        return len(self.edges)


@dataclass(frozen=True)
class SubgraphRecord:
    """A complete 5-node subgraph and the provenance of each of its 10 edges."""

    members: tuple
    edge_provenance: tuple

    @property
    def measured_mask(self) -> tuple:
        return tuple(p == Provenance.MEASURED for p in self.edge_provenance)

    def is_fault_detectable(self) -> bool:
        covered = set()
        for (a, b), prov in zip(pair_order(len(self.members)), self.edge_provenance):
            if prov == Provenance.MEASURED:
                covered.update((a, b))
        return len(covered) == len(self.members)


def _records(sets, measured_adj, limit=None):
    k = sets.shape[1] if sets.ndim == 2 else 0
    pairs = pair_order(k)
    out = []
    for row in sets[:limit] if limit is not None else sets:
        members = tuple(int(v) for v in row)
        prov = tuple(
            Provenance.MEASURED if measured_adj[members[a], members[b]] else Provenance.COMPUTED
            for a, b in pairs
        )
        out.append(SubgraphRecord(members, prov))
    return out


def list_k_cliques(graph: LinkGraph, k: int, limit=None):
    """All k-cliques of the measured-edge graph, lexicographically sorted.

    Listing follows the Chiba-Nishizeki scheme: vertices are taken in
    degeneracy order and each clique is grown from its earliest vertex
    inside the forward neighbourhood. ``limit`` caps the number returned.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    adj = graph.adjacency(Provenance.MEASURED)
    sets = kernels.k_cliques(adj.astype(np.uint8), k)
    return _records(sets, adj, limit)


def list_fault_detectable_5(graph: LinkGraph, limit=None):
    """5-node subgraphs completed with computed edges, each member touching a measured edge.

    Vertices without any measured edge are never candidates.
    """
    adj = graph.adjacency(Provenance.MEASURED)
    sets = kernels.fault_detectable_5(adj.astype(np.uint8))
    return _records(sets, adj, limit)


def subgraphs_excluding(records, satellite: int):
    """Records whose member set does not contain ``satellite``."""
    return [r for r in records if satellite not in r.members]


def membership_matrix(records, n) -> np.ndarray:
    """Boolean (len(records), n) matrix; True where the satellite is a member."""
    mem = np.zeros((len(records), n), dtype=bool)
    for row, rec in enumerate(records):
        mem[row, list(rec.members)] = True
    return mem


def exclusion_counts(records, n) -> np.ndarray:
    """Number of records not containing each satellite."""
    if not records:
        return np.zeros(n, dtype=np.int64)
    return (~membership_matrix(records, n)).sum(axis=0)
