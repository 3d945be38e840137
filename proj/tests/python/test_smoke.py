import numpy as np
import pytest

import feddag


def test_matrix_exp_identity():
    e = feddag.matrix_exp(np.zeros((3, 3)))
    assert np.allclose(e, np.eye(3))


def test_h_zero_on_dags():
    w = np.zeros((3, 3))
    w[0, 1] = 1.4
    w[1, 2] = -0.7
    value, grad = feddag.h_and_grad(w)
    assert abs(value) < 1e-9
    assert grad.shape == (3, 3)
    assert np.all(np.diag(grad) == 0.0)


def test_h_positive_on_cycles():
    w = np.zeros((2, 2))
    w[0, 1] = w[1, 0] = 1.0
    value, _ = feddag.h_and_grad(w)
    assert value == pytest.approx(2.0 * np.cosh(1.0) - 2.0, rel=1e-10)


def test_acyclicity_and_threshold():
    w = np.zeros((2, 2))
    w[0, 1] = 0.4
    w[1, 0] = 0.4
    adj = feddag.threshold_graph(w, 0.3)
    assert adj.sum() == 1
    assert feddag.is_acyclic(adj)


def test_prox_identities():
    u = np.array([[2.5, -0.5, 0.0]])
    assert np.allclose(feddag.prox_l1(u, 1.0), [[1.5, 0.0, 0.0]])

    stack = np.array([[2.0], [-1.0]])
    fused = feddag.prox_group_fused(stack, 2.0)
    assert np.allclose(fused[0], fused[1])  # large penalty fuses rows

    viadipa = feddag.dipa(stack, 0.0, 0.0, 1e-10, 100)
    assert np.array_equal(viadipa, stack)  # both penalties off


def test_metrics_roundtrip():
    truth = np.zeros((3, 3), dtype=np.int32)
    truth[0, 1] = 1
    learned = np.zeros((3, 3), dtype=np.int32)
    learned[1, 0] = 1
    tp, fp, fn, tn = feddag.confusion(learned, truth)
    assert (tp, fp, fn) == (0, 1, 1)
    assert feddag.shd(learned, truth) == 1
    metrics = feddag.edge_metrics(learned, truth)
    assert metrics["error"] == pytest.approx(2.0 / 6.0)


def test_proportion_test_matches_formula():
    p = feddag.two_sample_proportion_test(45, 50, 25, 50)
    se = np.sqrt(0.7 * 0.3 * (2.0 / 50.0))
    z = 0.4 / se
    from math import erfc, sqrt

    assert p == pytest.approx(erfc(z / sqrt(2.0)), rel=1e-9)


def test_gen_and_fit_recover_a_small_graph():
    problem = feddag.gen_problem(d=6, sites=3, perturbation_level=0.0, n_per_site=300, seed=11)
    assert len(problem["datasets"]) == 3
    for graph in problem["graphs"]:
        assert feddag.is_acyclic(graph)

    result = feddag.fit(problem["datasets"], estimator="pfl", seed=11)
    assert result["converged"]
    assert len(result["graphs"]) == 3
    total_shd = sum(
        feddag.shd(result["graphs"][k], problem["graphs"][k]) for k in range(3)
    )
    assert total_shd <= 1
    for graph in result["graphs"]:
        assert feddag.is_acyclic(graph)


def test_fit_is_deterministic():
    problem = feddag.gen_problem(d=5, sites=2, perturbation_level=0.0, n_per_site=80, seed=4)
    a = feddag.fit(problem["datasets"], max_iter=30)
    b = feddag.fit(problem["datasets"], max_iter=30)
    for za, zb in zip(a["z_final"], b["z_final"]):
        assert np.array_equal(za, zb)
