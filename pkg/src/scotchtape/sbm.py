"""Microcanonical stochastic block model sampling and annotation generators.

The sampler fixes the exact number of edges per group pair and draws the
endpoints uniformly, so node degrees are Poisson in the sparse limit.
Parallel edges are admitted (each becomes its own factor node); self-loops
are not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleSpecError, ParameterError
from .graph import AnnotationSet, Graph, Partition


@dataclass(frozen=True)
class BlockSpec:
    """Planted-partition parameters: group sizes and per-pair edge counts."""

    group_sizes: tuple
    edge_counts: np.ndarray  # symmetric K x K integer matrix

    def __init__(self, group_sizes, edge_counts):
        sizes = tuple(int(n) for n in group_sizes)
        e = np.asarray(edge_counts, dtype=np.int64)
        k = len(sizes)
        if any(n < 1 for n in sizes):
            raise ParameterError("every group must have at least one node")
        if e.shape != (k, k):
            raise ParameterError(f"edge_counts must be {k}x{k}")
        if not np.array_equal(e, e.T):
            raise ParameterError("edge_counts must be symmetric")
        if (e < 0).any():
            raise ParameterError("edge_counts must be non-negative")
        object.__setattr__(self, "group_sizes", sizes)
        object.__setattr__(self, "edge_counts", e)

    @property
    def n_groups(self):
        return len(self.group_sizes)

    @property
    def n_nodes(self):
        return sum(self.group_sizes)

    @property
    def n_edges(self):
        e = self.edge_counts
        return int(np.triu(e).sum())

    def group_degrees(self):
        """Mean degree c_sigma of each group."""
        e = self.edge_counts
        k = self.n_groups
        c = np.empty(k)
        for s in range(k):
            c[s] = sum((1 + (s == t)) * e[s, t] for t in range(k)) / self.group_sizes[s]
        return c

    @property
    def mean_degree(self):
        return 2.0 * self.n_edges / self.n_nodes

    def density_matrix(self):
        """Row-stochastic degree-corrected density matrix f."""
        e = self.edge_counts
        k = self.n_groups
        c = self.group_degrees()
        f = np.empty((k, k))
        for s in range(k):
            for t in range(k):
                f[s, t] = (1 + (s == t)) * e[s, t] / (c[s] * self.group_sizes[s])
        return f

    def default_partition(self):
        labels = np.concatenate(
            [np.full(n, s + 1, dtype=np.int64) for s, n in enumerate(self.group_sizes)]
        )
        return Partition(labels)


@dataclass(frozen=True)
class SymmetricSpec:
    """Two equal groups; structure strength eps = e_out / (2 e_in)."""

    n_per_group: int
    mean_degree: float
    epsilon: float

    def __post_init__(self):
        if self.n_per_group < 1:
            raise ParameterError("n_per_group must be positive")
        if not (0 < self.epsilon <= 1):
            raise ParameterError("epsilon must lie in (0, 1]")
        if self.mean_degree <= 0:
            raise ParameterError("mean_degree must be positive")


def symmetric_to_block(spec: SymmetricSpec):
    """Convert a symmetric spec to (BlockSpec, planted Partition).

    The total edge count M0 = round(c N / 2) is exact; e_out absorbs the
    rounding remainder of e_in = round(M0 / (2 (1 + eps))).
    """
    n = 2 * spec.n_per_group
    m0 = int(round(spec.mean_degree * n / 2.0))
    e_in = int(round(m0 / (2.0 * (1.0 + spec.epsilon))))
    e_out = m0 - 2 * e_in
    if e_out < 0:
        raise ParameterError("rounding produced negative e_out; increase N or c")
    block = BlockSpec(
        (spec.n_per_group, spec.n_per_group),
        np.array([[e_in, e_out], [e_out, e_in]]),
    )
    return block, block.default_partition()


def _sample_within(rng, members, count):
    """Uniform unordered pairs from one group, no self-loops."""
    pairs = np.empty((count, 2), dtype=np.int64)
    filled = 0
    while filled < count:
        need = count - filled
        i = rng.integers(0, len(members), size=need)
        j = rng.integers(0, len(members), size=need)
        ok = i != j
        k = int(ok.sum())
        pairs[filled : filled + k, 0] = members[i[ok]]
        pairs[filled : filled + k, 1] = members[j[ok]]
        filled += k
    return pairs


def sample_sbm(spec: BlockSpec, seed: int) -> Graph:
    """Draw a graph with exactly e_{st} edges per group pair, uniformly.

    Deterministic for a given seed.  Edge ordering: blocks in (s <= t)
    order, draws in sampling order, so incidence columns are reproducible.
    """
    rng = np.random.default_rng(seed)
    part = spec.default_partition()
    members = [part.group_members(s + 1) for s in range(spec.n_groups)]
    e = spec.edge_counts
    edges = []
    for s in range(spec.n_groups):
        for t in range(s, spec.n_groups):
            count = int(e[s, t])
            if count == 0:
                continue
            if s == t:
                if len(members[s]) < 2:
                    raise InfeasibleSpecError(
                        f"group {s + 1} has one node but {count} internal edges"
                    )
                pairs = _sample_within(rng, members[s], count)
            else:
                i = members[s][rng.integers(0, len(members[s]), size=count)]
                j = members[t][rng.integers(0, len(members[t]), size=count)]
                pairs = np.stack([i, j], axis=1)
            edges.extend(map(tuple, pairs))
    return Graph(spec.n_nodes, edges)


def make_annotations(
    kind,
    partition: Partition,
    r=None,
    r_per_group=None,
    d_star=None,
    xi=None,
    seed=None,
) -> AnnotationSet:
    """Generate one of the three annotation families used in the experiments.

    uniform: ``r`` identical labels covering every node.
    group:   ``r_per_group[s]`` labels per group, each equal to that group.
    noisy:   ``r`` labels (r even) of fixed degree ``d_star``; the first half
             leans toward group 1 (each member drawn from group 1 with
             probability 1 - xi, else group 2), the second half mirrored.
             Members are distinct within a label.
    """
    n = partition.n_nodes
    everyone = np.arange(n)
    if kind == "uniform":
        if r is None or r < 1:
            raise ParameterError("uniform annotations need r >= 1")
        return AnnotationSet(n, [everyone] * int(r), [f"uniform{q}" for q in range(int(r))])

    if kind == "group":
        k = partition.n_groups
        if r_per_group is None:
            r_per_group = [1] * k
        if len(r_per_group) != k or any(q < 1 for q in r_per_group):
            raise ParameterError("group annotations need r_per_group >= 1 for each group")
        labels, names = [], []
        for s in range(1, k + 1):
            g = partition.group_members(s)
            for q in range(int(r_per_group[s - 1])):
                labels.append(g)
                names.append(f"group{s}_{q}")
        return AnnotationSet(n, labels, names)

    if kind == "noisy":
        if r is None or r < 2 or r % 2 != 0:
            raise ParameterError("noisy annotations need an even r >= 2")
        if d_star is None or d_star < 1:
            raise ParameterError("noisy annotations need d_star >= 1")
        if d_star > n:
            raise ParameterError(f"d_star={d_star} exceeds N={n}")
        if xi is None or not (0 <= xi <= 1):
            raise ParameterError("noisy annotations need xi in [0, 1]")
        if seed is None:
            raise ParameterError("noisy annotations need a seed")
        if partition.n_groups != 2:
            raise ParameterError("noisy annotations are defined for two groups")
        rng = np.random.default_rng(seed)
        groups = [partition.group_members(1), partition.group_members(2)]
        labels, names = [], []
        for q in range(int(r)):
            lean = 0 if q < r // 2 else 1
            chosen = np.zeros(n, dtype=bool)
            picked_in = [0, 0]
            total = 0
            while total < d_star:
                g = lean if rng.random() < 1.0 - xi else 1 - lean
                # a saturated group cannot supply more distinct members
                if picked_in[g] == len(groups[g]):
                    g = 1 - g
                node = int(groups[g][rng.integers(0, len(groups[g]))])
                if not chosen[node]:
                    chosen[node] = True
                    picked_in[g] += 1
                    total += 1
            labels.append(np.flatnonzero(chosen))
            names.append(f"noisy{'1' if lean == 0 else '2'}_{q}")
        return AnnotationSet(n, labels, names)

    raise ParameterError(f"unknown annotation kind {kind!r}")


def derive_seed(seed, index):
    """Independent per-replicate stream: SeedSequence spawn keyed by index."""
    return int(np.random.SeedSequence(entropy=seed, spawn_key=(index,)).generate_state(1)[0])
