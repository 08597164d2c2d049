import numpy as np
import pytest

from conftest import cloud_distances, random_cloud_matrix
from trajtopo import errors, magnitudes as mg
from trajtopo.bundle import WeightTrajectory
from trajtopo.metrics import DistanceMatrix, euclidean_distance_matrix


def _dm(entries):
    return DistanceMatrix(entries=np.asarray(entries, dtype=float),
                          metric_kind="euclidean")


def _quotient_of_points(pts):
    dm = euclidean_distance_matrix(WeightTrajectory(matrix=np.asarray(pts, float)))
    return mg.metric_identification(dm)


def test_identification_merges_exact_duplicates():
    pts = [[0.0, 0], [1, 0], [2, 0], [1, 0], [5, 5]]
    q = _quotient_of_points(pts)
    assert q.n_classes == 4
    assert sorted(q.class_sizes.tolist()) == [1, 1, 1, 2]
    assert q.class_sizes.sum() == 5
    assert np.all(q.quotient_distances.entries[np.triu_indices(4, 1)] > 0)


def test_identification_identity_on_distinct_points():
    q = _quotient_of_points(np.random.default_rng(0).normal(size=(10, 3)))
    assert q.n_classes == 10
    assert np.all(q.class_sizes == 1)
    assert np.array_equal(q.representative_index, np.arange(10))


def test_identification_transitive_chain():
    # rho(a,b) = rho(b,c) = rho(a,c) = 0 collapses to one class
    d = np.zeros((3, 3))
    q = mg.metric_identification(_dm(d))
    assert q.n_classes == 1 and q.class_sizes[0] == 3


def test_single_point_weighting():
    q = mg.metric_identification(_dm([[0.0]]))
    w = mg.solve_weighting(q, 3.0)
    assert w.beta.tolist() == [1.0]
    assert mg.magnitude(q, 3.0) == 1.0


def test_two_point_closed_form():
    # scale * distance = ln 3 gives weights 0.75 each and magnitude 1.5
    q = mg.metric_identification(_dm([[0.0, 1.0], [1.0, 0.0]]))
    w = mg.solve_weighting(q, np.log(3.0))
    assert w.beta == pytest.approx([0.75, 0.75], abs=1e-12)
    assert mg.magnitude(q, np.log(3.0)) == pytest.approx(1.5, abs=1e-12)
    rng = np.random.default_rng(5)
    for _ in range(10):
        d, s = rng.random() * 4 + 0.1, rng.random() * 5 + 0.1
        q = mg.metric_identification(_dm([[0.0, d], [d, 0.0]]))
        want = 2.0 / (1.0 + np.exp(-s * d))
        assert mg.magnitude(q, s) == pytest.approx(want, abs=1e-10)
        assert mg.positive_magnitude(q, s) == pytest.approx(want, abs=1e-10)


def test_magnitude_approaches_point_count_at_huge_scale():
    dm = cloud_distances(3, 10, d=2, kind="gaussian")
    q = mg.metric_identification(dm)
    s = 1e6 / dm.entries[dm.entries > 0].min()
    assert mg.magnitude(q, s) == pytest.approx(10.0, abs=1e-6)


def test_krylov_matches_dense_on_random_cloud():
    dm = cloud_distances(1, 50, d=2)
    q = mg.metric_identification(dm)
    s = np.sqrt(1000.0)
    cg = mg.solve_weighting(q, s, mg.SolverConfig(dense_cutoff=0))
    dense = mg.solve_weighting(q, s, mg.SolverConfig(dense_cutoff=10_000))
    assert cg.solver == "krylov_cg" and dense.solver == "dense_direct"
    assert cg.residual <= 1e-8 and dense.residual <= 1e-8
    assert np.abs(cg.beta - dense.beta).max() <= 1e-6


def test_pmag_dominates_mag():
    rng = np.random.default_rng(8)
    for trial in range(25):
        q = mg.metric_identification(
            cloud_distances(trial, int(rng.integers(5, 40)), d=3, kind="gaussian"))
        s = float(rng.random() * 30 + 0.01)
        res = mg.magnitude_result(q, s)
        assert res.pmag >= res.mag - 1e-12
        assert res.pmag >= 0


def test_pmag_equals_mag_at_large_scale():
    dm = cloud_distances(2, 15, d=2)
    q = mg.metric_identification(dm)
    s = 1e6 / dm.entries[dm.entries > 0].min()
    res = mg.magnitude_result(q, s)
    assert res.pmag == pytest.approx(res.mag, abs=1e-9)


def test_pmag_tends_to_one_at_small_scale():
    # spherical clouds keep the limiting weights nonnegative, which is what
    # makes the small-scale limit reachable in practice
    rng = np.random.default_rng(0)
    raw = rng.normal(size=(30, 3))
    pts = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    dm = euclidean_distance_matrix(WeightTrajectory(matrix=pts))
    q = mg.metric_identification(dm)
    s = 1e-4 / dm.entries.max()
    res = mg.magnitude_result(q, s)
    assert abs(res.pmag - 1.0) <= 1e-2


def test_conditioning_flag_thresholds():
    q = _quotient_of_points([[0.0], [1.0], [2.5]])
    assert mg.conditioning_flag(q, 1e-7)
    assert not mg.conditioning_flag(q, 1.0)
    assert mg.magnitude_result(q, 1e-7).conditioning_flag


def test_quotient_invariance_with_duplicates():
    pts = random_cloud_matrix(4, 12, d=2)
    dup = np.vstack([pts, pts])
    for s in (0.5, 7.0):
        a = mg.magnitude_result(_quotient_of_points(pts), s)
        b = mg.magnitude_result(_quotient_of_points(dup), s)
        assert b.mag == pytest.approx(a.mag, abs=1e-10)
        assert b.pmag == pytest.approx(a.pmag, abs=1e-10)


def test_canonical_weighting_expansion():
    pts = np.array([[0.0, 0], [1, 0], [1, 0], [3, 2]])
    q = _quotient_of_points(pts)
    w = mg.solve_weighting(q, 2.0)
    expanded = mg.canonical_weighting(q, w)
    assert len(expanded) == 4
    # class members split the class weight equally
    assert expanded[1] == expanded[2] == pytest.approx(w.beta[1] / 2)
    # summing positive parts over members or classes gives the same pmag
    assert np.maximum(expanded, 0).sum() == pytest.approx(
        np.maximum(w.beta, 0).sum(), abs=1e-12)


def test_scale_sweep_mag_pmag_rank_agreement():
    dm = cloud_distances(6, 30, d=2)
    q = mg.metric_identification(dm)
    sweep = np.geomspace(0.05, 50, 12)
    mags = [mg.magnitude(q, s) for s in sweep]
    pmags = [mg.positive_magnitude(q, s) for s in sweep]
    assert all(p >= m - 1e-12 for m, p in zip(mags, pmags))
    from trajtopo.analysis import kendall_tau
    assert kendall_tau(mags, pmags) > 0


def test_nonpositive_scale_rejected():
    q = _quotient_of_points([[0.0], [1.0]])
    with pytest.raises(errors.NonPositiveScale):
        mg.solve_weighting(q, 0.0)
    with pytest.raises(errors.NonPositiveScale):
        mg.magnitude(q, -2.0)


def test_residual_recorded_and_within_tolerance():
    for seed in range(5):
        q = mg.metric_identification(cloud_distances(seed, 80, d=3))
        for s, cutoff in ((0.01, 512), (5.0, 0), (40.0, 0)):
            w = mg.solve_weighting(q, s, mg.SolverConfig(dense_cutoff=cutoff))
            assert w.residual <= 1e-8
            assert np.isfinite(w.beta).all()
