"""Group-level reduction of the taped eigenproblem.

Replacing eigenvector elements by group-wise constants collapses the
N-dimensional generalized eigenproblem to a K x K one.  Two annotation
patterns leave the reduced eigenvector invariant while shifting its
eigenvalue by a closed form: orthogonal hyperedges spread evenly over the
degree profile (type 1) and one-hot group-aligned hyperedges (type 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateNodeError, ParameterError
from .graph import AnnotationSet, Partition
from .sbm import BlockSpec


@dataclass(frozen=True)
class ReducedModel:
    """K x K summary of an SBM instance plus annotation densities.

    ``f`` is row-stochastic; ``hbar[r, s]`` is the fraction of group s
    carrying label r; ``label_degrees[r]`` = sum_s hbar[r, s] * N_s.
    """

    f: np.ndarray
    c_sigma: np.ndarray
    hbar: np.ndarray  # R x K
    group_sizes: np.ndarray
    label_degrees: np.ndarray
    edge_counts: np.ndarray

    @property
    def k_groups(self):
        return self.f.shape[0]

    @property
    def n_labels(self):
        return self.hbar.shape[0]

    @property
    def n_nodes(self):
        return int(self.group_sizes.sum())

    def mean_degree(self):
        """Population mean degree sum_s (N_s/N) c_s."""
        return float(self.c_sigma @ self.group_sizes) / self.n_nodes

    def label_load(self):
        """sum_r hbar[r, s] per group: annotation degree added to a node of group s."""
        if self.n_labels == 0:
            return np.zeros(self.k_groups)
        return self.hbar.sum(axis=0)


def build_reduced(
    spec: BlockSpec, annotations: AnnotationSet | None, partition: Partition
) -> ReducedModel:
    """Exact group-level counts for a block spec and (possibly empty) labels."""
    sizes = np.asarray(spec.group_sizes, dtype=np.int64)
    c = spec.group_degrees()
    if (c == 0).any():
        raise DegenerateNodeError("a group has zero mean degree")
    f = spec.density_matrix()
    k = spec.n_groups
    if annotations is None or annotations.n_labels == 0:
        hbar = np.zeros((0, k))
        dv = np.zeros(0)
    else:
        if annotations.n_nodes != partition.n_nodes:
            raise ParameterError("annotations and partition node counts differ")
        hbar = np.empty((annotations.n_labels, k))
        for r, members in enumerate(annotations.labels):
            labs = partition.labels[members]
            for s in range(k):
                hbar[r, s] = np.count_nonzero(labs == s + 1) / sizes[s]
        dv = hbar @ sizes
    return ReducedModel(
        f=f,
        c_sigma=c,
        hbar=hbar,
        group_sizes=sizes,
        label_degrees=dv,
        edge_counts=spec.edge_counts.astype(np.float64),
    )


def reduced_spectrum(model: ReducedModel, taped: bool):
    """Eigenvalues (descending) and group-profile eigenvectors.

    Untaped: lambda0 = 1 + spec(f), largest exactly 2 with a flat vector.
    Taped: the K x K generalized problem including annotation terms,
    solved by direct linearization (the eigenvalue multiplies the total
    per-group degree on the right-hand side).
    """
    sizes = model.group_sizes.astype(np.float64)
    c = model.c_sigma
    e2 = model.edge_counts * (1.0 + np.eye(model.k_groups))  # (1+delta) e, symmetric
    if not taped or model.n_labels == 0:
        # f v = mu v  <=>  e2 v = mu diag(c N) v with e2 symmetric
        vals, vecs = scipy.linalg.eigh(e2, np.diag(c * sizes))
        lam = 1.0 + vals[::-1]
        vecs = vecs[:, ::-1]
    else:
        u = model.hbar * sizes[None, :]  # rows hbar^r * N
        m = e2 + 2.0 * (u.T / model.label_degrees) @ u
        load = model.label_load()
        lhs = m + np.diag(c * sizes)
        rhs = np.diag(sizes * (c + load))
        vals, vecs = scipy.linalg.eigh(lhs, rhs)
        lam = vals[::-1]
        vecs = vecs[:, ::-1]
    # normalize to unit Euclidean norm, flat vector positive
    for j in range(vecs.shape[1]):
        vecs[:, j] /= np.linalg.norm(vecs[:, j])
        i = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[i, j] < 0:
            vecs[:, j] *= -1.0
    return lam, vecs


def classify_taping(model: ReducedModel, eigvec, tol: float = 1e-10, statistical: bool = False):
    """Classify the annotation pattern relative to a reduced eigenvector.

    Returns (kind, kappa) with kind in {"type1", "type2", "generic"};
    kappa is the common annotation-to-degree ratio when the pattern is
    type 1 or type 2, else None.  In statistical mode the tolerances relax
    to 1/sqrt(min N_sigma) for sampled annotations.
    """
    eigvec = np.asarray(eigvec, dtype=np.float64)
    if model.n_labels == 0:
        return "generic", None
    if statistical:
        tol = 1.0 / np.sqrt(model.group_sizes.min())
    load = model.label_load()
    ratio = load / model.c_sigma
    kappa_ok = np.ptp(ratio) <= tol
    kappa = float(ratio.mean()) if kappa_ok else None

    weighted = model.hbar * model.group_sizes[None, :]  # rows (hbar^r N)
    scale = np.linalg.norm(eigvec) * np.maximum(model.label_degrees, 1.0)
    orth = np.abs(weighted @ eigvec) / scale
    if kappa_ok and np.all(orth <= tol):
        return "type1", kappa

    one_hot = np.all((model.hbar <= tol) | (model.hbar >= 1.0 - tol)) and np.all(
        np.sum(model.hbar >= 1.0 - tol, axis=1) == 1
    )
    if kappa_ok and one_hot:
        return "type2", kappa
    return "generic", None


def eigenvalue_shift(kind: str, lambda0: float, kappa: float) -> float:
    """Closed-form taped eigenvalue for invariant-eigenvector annotation patterns."""
    if kappa < 0:
        raise ParameterError("kappa must be non-negative")
    if not (0.0 <= lambda0 <= 2.0 + 1e-12):
        raise ParameterError("lambda0 must lie in [0, 2]")
    if kind == "type1":
        return lambda0 / (1.0 + kappa)
    if kind == "type2":
        return (lambda0 + 2.0 * kappa) / (1.0 + kappa)
    raise ParameterError(f"unknown taping kind {kind!r}")
