"""Graphs, node annotations, and their joint factor-graph representation.

A graph plus a set of annotation labels is encoded as a single bipartite
factor graph: one factor node per edge (degree 2) and one factor node per
annotation label (connected to every node carrying that label).  The
concatenated incidence matrix drives all spectral operations downstream.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import (
    DegenerateNodeError,
    DimensionMismatchError,
    DisconnectedGraphWarning,
    IsolatedAnnotatedNodeWarning,
    ParameterError,
)

DENSE_THRESHOLD = 4096


@dataclass(frozen=True)
class Graph:
    """An undirected multigraph without self-loops.

    Edges are stored as an ordered list of unordered index pairs; parallel
    edges are allowed and each occurrence becomes its own factor node.
    """

    n_nodes: int
    edges: tuple

    def __init__(self, n_nodes, edges):
        edges = tuple((int(i), int(j)) for i, j in edges)
        if n_nodes < 1:
            raise ParameterError("graph must have at least one node")
        for i, j in edges:
            if i == j:
                raise ParameterError(f"self-loop ({i},{i}) is not allowed")
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                raise ParameterError(f"edge ({i},{j}) has endpoint outside [0,{n_nodes})")
        object.__setattr__(self, "n_nodes", int(n_nodes))
        object.__setattr__(self, "edges", edges)

    @property
    def n_edges(self):
        return len(self.edges)

    def degrees(self):
        """Per-node degree vector of the original graph."""
        d = np.zeros(self.n_nodes, dtype=np.int64)
        for i, j in self.edges:
            d[i] += 1
            d[j] += 1
        return d

    def adjacency(self):
        """Sparse adjacency matrix; parallel edges accumulate."""
        if not self.edges:
            return sp.csr_matrix((self.n_nodes, self.n_nodes))
        rows, cols = zip(*self.edges)
        i = np.concatenate([rows, cols])
        j = np.concatenate([cols, rows])
        data = np.ones(len(i))
        return sp.csr_matrix((data, (i, j)), shape=(self.n_nodes, self.n_nodes))


@dataclass(frozen=True)
class AnnotationSet:
    """R annotation labels, each a non-empty set of node indices."""

    n_nodes: int
    labels: tuple  # tuple of sorted int arrays
    names: tuple = ()

    def __init__(self, n_nodes, labels, names=None):
        packed = []
        for r, members in enumerate(labels):
            arr = np.unique(np.asarray(list(members), dtype=np.int64))
            if arr.size == 0:
                raise ParameterError(f"annotation label {r} is empty")
            if arr.min() < 0 or arr.max() >= n_nodes:
                raise ParameterError(f"annotation label {r} has a member outside [0,{n_nodes})")
            packed.append(arr)
        if names is None:
            names = tuple(f"label{r}" for r in range(len(packed)))
        else:
            names = tuple(str(n) for n in names)
            if len(names) != len(packed):
                raise ParameterError("names and labels length mismatch")
        object.__setattr__(self, "n_nodes", int(n_nodes))
        object.__setattr__(self, "labels", tuple(packed))
        object.__setattr__(self, "names", names)

    @property
    def n_labels(self):
        return len(self.labels)

    def indicator_matrix(self):
        """N x R sparse 0/1 matrix with one column per label."""
        n_r = self.n_labels
        if n_r == 0:
            return sp.csr_matrix((self.n_nodes, 0))
        rows = np.concatenate(self.labels)
        cols = np.concatenate([np.full(len(m), r) for r, m in enumerate(self.labels)])
        return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n_nodes, n_r))


def empty_annotations(n_nodes):
    return AnnotationSet(n_nodes, [])


@dataclass(frozen=True)
class IncidenceMatrix:
    """Sparse 0/1 incidence matrix over physical nodes x factor nodes."""

    matrix: sp.csr_matrix

    @property
    def n_rows(self):
        return self.matrix.shape[0]

    @property
    def n_cols(self):
        return self.matrix.shape[1]

    def toarray(self):
        return self.matrix.toarray()

    def column_degrees(self):
        return np.asarray(self.matrix.sum(axis=0)).ravel()

    def row_degrees(self):
        return np.asarray(self.matrix.sum(axis=1)).ravel()


@dataclass(frozen=True)
class Partition:
    """Per-node group assignment with labels in {1..K}."""

    labels: np.ndarray

    def __init__(self, labels):
        labels = np.asarray(labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size == 0:
            raise ParameterError("partition labels must be a non-empty 1-d sequence")
        if labels.min() < 1:
            raise ParameterError("group labels start at 1")
        object.__setattr__(self, "labels", labels)

    @property
    def n_nodes(self):
        return self.labels.size

    @property
    def n_groups(self):
        return int(self.labels.max())

    def group_members(self, sigma):
        return np.flatnonzero(self.labels == sigma)

    def group_sizes(self):
        return np.bincount(self.labels, minlength=self.n_groups + 1)[1:]


def build_incidence(graph: Graph) -> IncidenceMatrix:
    """N x M0 incidence of the factor-graph form of ``graph``.

    Column alpha carries exactly the two endpoints of edge alpha, in the
    order the edges were given, so the column ordering is deterministic.
    """
    m0 = graph.n_edges
    if m0 == 0:
        return IncidenceMatrix(sp.csr_matrix((graph.n_nodes, 0)))
    rows = np.fromiter((v for e in graph.edges for v in e), dtype=np.int64, count=2 * m0)
    cols = np.repeat(np.arange(m0), 2)
    mat = sp.csr_matrix((np.ones(2 * m0), (rows, cols)), shape=(graph.n_nodes, m0))
    return IncidenceMatrix(mat)


@dataclass(frozen=True)
class ScotchTapedGraph:
    """A graph and its annotations fused into one factor graph.

    ``b`` is the concatenation of the edge incidence ``b0`` and the
    annotation indicator columns; the degree vectors split accordingly.
    """

    graph: Graph
    annotations: AnnotationSet
    b0: IncidenceMatrix
    b: IncidenceMatrix
    d_u0: np.ndarray
    d_uh: np.ndarray
    d_u: np.ndarray
    d_v: np.ndarray
    _conn: list = field(default_factory=list, repr=False, compare=False)

    @property
    def n_nodes(self):
        return self.graph.n_nodes

    @property
    def n_factors(self):
        return self.b.n_cols

    @property
    def n_labels(self):
        return self.annotations.n_labels

    def label_degrees(self):
        """Degrees d_v of the annotation factor nodes (last R columns)."""
        return self.d_v[self.graph.n_edges:]

    def is_connected(self):
        """Connectivity of the scotch-taped graph (via its one-mode projection)."""
        if not self._conn:
            proj = self.b.matrix @ self.b.matrix.T
            n_comp, _ = connected_components(proj, directed=False)
            self._conn.append(n_comp == 1)
        return self._conn[0]


def tape(graph: Graph, annotations: AnnotationSet) -> ScotchTapedGraph:
    """Concatenate the edge incidence with annotation columns.

    Raises DimensionMismatchError when the node counts disagree.  Nodes
    whose entire degree comes from annotations are admitted with a warning.
    """
    if graph.n_nodes != annotations.n_nodes:
        raise DimensionMismatchError(
            f"graph has {graph.n_nodes} nodes, annotations {annotations.n_nodes}"
        )
    b0 = build_incidence(graph)
    h = annotations.indicator_matrix()
    b = IncidenceMatrix(sp.hstack([b0.matrix, h], format="csr"))
    d_u0 = graph.degrees().astype(np.float64)
    d_uh = np.asarray(h.sum(axis=1)).ravel()
    d_u = d_u0 + d_uh
    d_v = b.column_degrees()
    only_annotated = np.flatnonzero((d_u0 == 0) & (d_uh > 0))
    if only_annotated.size:
        warnings.warn(
            f"nodes {only_annotated.tolist()} have no graph edges, only annotations",
            IsolatedAnnotatedNodeWarning,
            stacklevel=2,
        )
    return ScotchTapedGraph(graph, annotations, b0, b, d_u0, d_uh, d_u, d_v)


def laplacian(graph: Graph) -> sp.csr_matrix:
    """Combinatorial Laplacian D0 - A of the original graph."""
    a = graph.adjacency()
    d = sp.diags(graph.degrees().astype(np.float64))
    return (d - a).tocsr()


class ProjectionOperator:
    """The symmetric PSD operator 2 * Bhat Bhat^T on physical-node space.

    Bhat is the degree-normalized incidence D_U^{-1/2} B D_V^{-1/2}.
    Supports matrix-vector products always, and dense materialization for
    graphs up to DENSE_THRESHOLD nodes.  Stateless and reentrant.
    """

    def __init__(self, stg: ScotchTapedGraph):
        zero = np.flatnonzero(stg.d_u == 0)
        if zero.size:
            raise DegenerateNodeError(f"nodes {zero.tolist()} have zero total degree")
        self.n = stg.n_nodes
        du_isqrt = 1.0 / np.sqrt(stg.d_u)
        dv_isqrt = 1.0 / np.sqrt(stg.d_v)
        self._bhat = sp.diags(du_isqrt) @ stg.b.matrix @ sp.diags(dv_isqrt)
        self._bhat = self._bhat.tocsr()
        self._stg = stg
        if not stg.is_connected():
            warnings.warn(
                "scotch-taped graph is disconnected; the top eigenvalue is degenerate",
                DisconnectedGraphWarning,
                stacklevel=2,
            )

    def apply(self, x):
        """Return 2 * Bhat (Bhat^T x); accepts vectors or column blocks."""
        return 2.0 * (self._bhat @ (self._bhat.T @ x))

    __call__ = apply

    def dense(self):
        if self.n > DENSE_THRESHOLD:
            raise ParameterError(
                f"dense materialization refused for N={self.n} > {DENSE_THRESHOLD}"
            )
        bh = self._bhat.toarray()
        return 2.0 * bh @ bh.T

    def aslinearoperator(self):
        from scipy.sparse.linalg import LinearOperator

        return LinearOperator((self.n, self.n), matvec=self.apply, matmat=self.apply)


def projection_operator(stg: ScotchTapedGraph) -> ProjectionOperator:
    return ProjectionOperator(stg)


# --- file formats ---------------------------------------------------------

def write_graph_tsv(graph: Graph, path):
    """Edge-list TSV with a '#nodes=N' header line."""
    with open(path, "w") as f:
        f.write(f"#nodes={graph.n_nodes}\n")
        for i, j in graph.edges:
            f.write(f"{i}\t{j}\n")


def read_graph_tsv(path) -> Graph:
    n_nodes = None
    edges = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("#nodes="):
                    n_nodes = int(line.split("=", 1)[1])
                continue
            i, j = line.split("\t")
            edges.append((int(i), int(j)))
    if n_nodes is None:
        raise ParameterError(f"{path}: missing '#nodes=N' header")
    return Graph(n_nodes, edges)


def write_annotations_tsv(annotations: AnnotationSet, path):
    """One line per label: 'name<TAB>i1,i2,...'."""
    with open(path, "w") as f:
        f.write(f"#nodes={annotations.n_nodes}\n")
        for name, members in zip(annotations.names, annotations.labels):
            f.write(f"{name}\t{','.join(str(i) for i in members)}\n")


def read_annotations_tsv(path, n_nodes=None) -> AnnotationSet:
    names, labels = [], []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("#nodes="):
                    n_nodes = int(line.split("=", 1)[1])
                continue
            name, members = line.split("\t")
            names.append(name)
            labels.append([int(i) for i in members.split(",")])
    if n_nodes is None:
        raise ParameterError(f"{path}: node count unknown (no header and none given)")
    return AnnotationSet(n_nodes, labels, names)


def write_partition_tsv(partition: Partition, path):
    with open(path, "w") as f:
        f.write(f"#nodes={partition.n_nodes}\n")
        for i, sigma in enumerate(partition.labels):
            f.write(f"{i}\t{sigma}\n")


def read_partition_tsv(path) -> Partition:
    pairs = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            i, sigma = line.split("\t")
            pairs.append((int(i), int(sigma)))
    pairs.sort()
    return Partition([sigma for _, sigma in pairs])
