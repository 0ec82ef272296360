import itertools
import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from srdl.evaluation import (Confusion, agreement_matrix, align, apply_alignment, average_accuracy,
                             confusion, evaluate, kappa, overall_accuracy)


def labels_from_matrix(A):
    """Pixel vectors whose agreement matrix (class x cluster) is ``A``."""
    gt, pred = [], []
    for i, row in enumerate(A):
        for j, n in enumerate(row):
            gt += [i + 1] * n
            pred += [j + 1] * n
    return np.array(pred), np.array(gt)


def exhaustive_best(A):
    C, K = A.shape
    best = -1
    for perm in itertools.permutations(range(K), min(C, K)):
        if C <= K:
            s = sum(A[i, perm[i]] for i in range(C))
        else:
            s = 0
        best = max(best, s)
    if C > K:
        for perm in itertools.permutations(range(C), K):
            best = max(best, sum(A[perm[j], j] for j in range(K)))
    return best


def test_metric_worked_example():
    conf = Confusion.from_matrix([[25, 5], [10, 60]])
    assert overall_accuracy(conf) == pytest.approx(0.85, abs=1e-12)
    assert average_accuracy(conf) == pytest.approx((25 / 30 + 60 / 70) / 2, abs=1e-12)
    assert average_accuracy(conf) == pytest.approx(0.845238, abs=1e-6)
    p_e = (30 * 35 + 70 * 65) / 100 ** 2
    assert kappa(conf) == pytest.approx((0.85 - p_e) / (1 - p_e), abs=1e-12)
    assert kappa(conf) == pytest.approx(0.659091, abs=1e-6)


def test_align_example():
    A = np.array([[5, 0, 1], [0, 4, 0], [2, 0, 6]])
    pred, gt = labels_from_matrix(A)
    mapping = align(pred, gt)
    assert mapping == {1: 1, 2: 2, 3: 3}
    conf = confusion(pred, gt, mapping)
    assert np.trace(conf.matrix) == 15 == exhaustive_best(A)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 6), st.integers(1, 6))
def test_align_is_optimal(seed, C, K):
    A = np.random.default_rng(seed).integers(0, 8, size=(C, K))
    A[:, 0] += 1  # every class present
    pred, gt = labels_from_matrix(A)
    conf = confusion(pred, gt)
    assert np.trace(conf.matrix) == exhaustive_best(A)
    assert conf.total == A.sum()


def test_perfect_and_permuted():
    gt = np.repeat([1, 2, 3], 20)
    pred = np.repeat([3, 1, 2], 20)
    r = evaluate(pred, gt)
    assert r["oa"] == 1.0 and r["aa"] == 1.0 and r["kappa"] == 1.0
    assert r["alignment"] == {"1": 2, "2": 3, "3": 1}


def test_random_labels_kappa_near_zero():
    rng = np.random.default_rng(0)
    gt = rng.integers(1, 5, size=10_000)
    pred = rng.integers(1, 5, size=10_000)
    assert abs(evaluate(pred, gt)["kappa"]) < 0.05


def test_background_excluded():
    gt = np.array([[0, 1, 1], [0, 2, 2]])
    pred = np.array([[7, 1, 1], [9, 2, 2]])
    r = evaluate(pred, gt)
    assert r["oa"] == 1.0
    assert sum(map(sum, r["confusion"])) == 4


def test_relabeling_invariance():
    rng = np.random.default_rng(1)
    gt = rng.integers(1, 4, size=300)
    pred = np.where(rng.uniform(size=300) < 0.7, gt, rng.integers(1, 4, size=300))
    perm = np.array([0, 2, 3, 1])
    a, b = evaluate(pred, gt), evaluate(perm[pred], gt)
    for key in ("oa", "aa", "kappa"):
        assert a[key] == pytest.approx(b[key], abs=1e-15)


def test_single_cluster_prediction():
    gt = np.repeat([1, 2, 3], [50, 30, 20])
    r = evaluate(np.ones(100, dtype=int), gt)
    assert r["oa"] == pytest.approx(0.5)
    assert r["aa"] == pytest.approx(1 / 3)
    assert r["kappa"] == pytest.approx(0.0, abs=1e-12)


def test_more_clusters_than_classes():
    gt = np.repeat([1, 2], 10)
    pred = np.array([1] * 8 + [3] * 2 + [2] * 10)
    mapping = align(pred, gt)
    assert mapping[1] == 1 and mapping[2] == 2 and mapping[3] > 2
    conf = confusion(pred, gt, mapping)
    assert conf.unmatched.tolist() == [2, 0]
    assert conf.row_totals.tolist() == [10, 10]
    assert overall_accuracy(conf) == pytest.approx(0.9)
    assert average_accuracy(conf) == pytest.approx(0.9)


def test_fewer_clusters_than_classes():
    gt = np.repeat([1, 2, 3], 10)
    pred = np.repeat([1, 2], 15)
    r = evaluate(pred, gt)
    assert r["oa"] == pytest.approx(20 / 30)


def test_apply_alignment():
    out = apply_alignment(np.array([1, 2, 3, 2]), {1: 5, 2: 4, 3: 6})
    assert out.tolist() == [5, 4, 6, 4]


def test_agreement_matrix_shape():
    A, classes, clusters = agreement_matrix([1, 1, 2, 4], [1, 2, 2, 0])
    assert classes.tolist() == [1, 2]
    assert clusters.tolist() == [1, 2, 4]
    assert A.tolist() == [[1, 0, 0], [1, 1, 0]]


def test_errors():
    with pytest.raises(ValueError):
        evaluate(np.ones(3), np.zeros(3))
    with pytest.raises(ValueError):
        evaluate(np.ones(3), np.ones(4))


def test_empty_class_row_warns(caplog):
    conf = Confusion(np.array([1, 2]), np.array([[5, 0], [0, 0]]), np.zeros(2, dtype=np.int64))
    with caplog.at_level(logging.WARNING):
        assert average_accuracy(conf) == 1.0
    assert "no pixels" in caplog.text


def test_degenerate_kappa(caplog):
    conf = Confusion.from_matrix([[10]])
    with caplog.at_level(logging.WARNING):
        assert kappa(conf) == 0.0
