"""Multiplicative-update factorization of incidence matrices."""

import numpy as np
import pytest
import scipy.sparse as sp

from scotchtape.errors import ParameterError
from scotchtape.graph import IncidenceMatrix, empty_annotations, tape
from scotchtape.nmf import nmf_cluster
from scotchtape.sbm import SymmetricSpec, sample_sbm, symmetric_to_block
from scotchtape.spectral import accuracy


def planted_instance(eps=0.05, c=8.0, n=300, seed=0):
    block, part = symmetric_to_block(SymmetricSpec(n, c, eps))
    g = sample_sbm(block, seed)
    return tape(g, empty_annotations(g.n_nodes)), part


def test_loss_is_monotone_nonincreasing():
    stg, _ = planted_instance()
    res = nmf_cluster(stg.b, k=2, iters=100, seed=0, restarts=1)
    assert (np.diff(res.loss_trace) <= 1e-6 * res.loss_trace[0]).all()


def test_exact_low_rank_recovery():
    # B built as W H with k = 2 nonnegative factors: loss should go to ~0
    rng = np.random.default_rng(1)
    w_true = rng.uniform(0.0, 1.0, size=(40, 2))
    h_true = rng.uniform(0.0, 1.0, size=(2, 60))
    b = IncidenceMatrix(sp.csr_matrix(w_true @ h_true))
    res = nmf_cluster(b, k=2, iters=2000, seed=0, restarts=3)
    b_sq = float((w_true @ h_true).ravel() @ (w_true @ h_true).ravel())
    assert res.loss < 1e-4 * b_sq


def test_partition_labels_and_shapes():
    stg, _ = planted_instance()
    res = nmf_cluster(stg.b, k=3, iters=50, seed=2, restarts=2)
    assert res.w.shape == (stg.n_nodes, 3)
    assert res.h_factor.shape == (3, stg.n_factors)
    assert (res.w >= 0).all() and (res.h_factor >= 0).all()
    assert set(np.unique(res.partition.labels)) <= {1, 2, 3}


def test_deterministic_per_seed():
    stg, _ = planted_instance(seed=3)
    a = nmf_cluster(stg.b, k=2, iters=50, seed=5, restarts=2)
    b = nmf_cluster(stg.b, k=2, iters=50, seed=5, restarts=2)
    assert np.array_equal(a.w, b.w)
    assert np.array_equal(a.partition.labels, b.partition.labels)
    c = nmf_cluster(stg.b, k=2, iters=50, seed=6, restarts=2)
    assert not np.array_equal(a.w, c.w)


def test_restarts_never_increase_final_loss():
    stg, _ = planted_instance(seed=4)
    one = nmf_cluster(stg.b, k=2, iters=60, seed=7, restarts=1)
    many = nmf_cluster(stg.b, k=2, iters=60, seed=7, restarts=4)
    assert many.loss <= one.loss + 1e-9


def test_strong_structure_is_recovered_reasonably():
    stg, planted = planted_instance(eps=0.02, c=10.0, n=250, seed=8)
    res = nmf_cluster(stg.b, k=2, iters=300, seed=0, restarts=5)
    # raw-incidence NMF is noisy but should beat chance clearly here
    assert accuracy(res.partition, planted) > 0.7


def test_parameter_validation():
    stg, _ = planted_instance()
    with pytest.raises(ParameterError):
        nmf_cluster(stg.b, k=0)
    with pytest.raises(ParameterError):
        nmf_cluster(stg.b, k=2, iters=0)
    with pytest.raises(ParameterError):
        nmf_cluster(stg.b, k=2, restarts=0)
