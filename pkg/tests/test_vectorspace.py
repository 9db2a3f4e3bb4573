"""Tests for embedding-space utilities: centering, cosine, centroids."""

import math

import numpy as np
import pytest

from trustprop.vectorspace import (
    CENTROID_MAX_COSINE,
    CenteringModel,
    DegenerateVectorError,
    build_centroids,
    center_and_normalize,
    cosine,
    fit_centering,
    synthetic_embedding,
)

LABELS = ("alpha", "beta", "gamma", "delta")


def _brute_force_mean(cloud):
    # Plain-Python oracle, deliberately independent of numpy reductions.
    n = len(cloud)
    dim = len(cloud[0])
    sums = [0.0] * dim
    for vec in cloud:
        for k in range(dim):
            sums[k] += float(vec[k])
    return [s / n for s in sums]


def test_fit_centering_matches_brute_force_mean():
    rng = np.random.default_rng(7)
    cloud = rng.normal(size=(40, 8))
    model = fit_centering(cloud)
    oracle = _brute_force_mean(cloud)
    assert model.sample_count == 40
    assert model.dim == 8
    np.testing.assert_allclose(model.mean, oracle, atol=1e-12)


def test_centered_cloud_has_negligible_mean():
    rng = np.random.default_rng(11)
    cloud = rng.normal(size=(64, 16)) + 3.0  # strong shared offset
    model = fit_centering(cloud)
    centered = np.array([center_and_normalize(model, v) for v in cloud])
    residual = np.linalg.norm(centered.mean(axis=0))
    # Directions are re-normalised so the mean is not exactly zero, but the
    # dominant shared component must be gone.
    assert residual < 0.5
    shifted = cloud - model.mean
    assert np.linalg.norm(shifted.mean(axis=0)) <= 1e-9 * math.sqrt(16)


def test_center_and_normalize_returns_unit_vectors():
    rng = np.random.default_rng(3)
    cloud = rng.normal(size=(10, 6))
    model = fit_centering(cloud)
    for v in cloud:
        out = center_and_normalize(model, v)
        assert abs(np.linalg.norm(out) - 1.0) < 1e-12


def test_center_and_normalize_rejects_degenerate_result():
    model = CenteringModel(mean=np.array([1.0, 2.0]), sample_count=4)
    with pytest.raises(DegenerateVectorError):
        center_and_normalize(model, np.array([1.0, 2.0]))


def test_fit_centering_validates_input():
    with pytest.raises(ValueError):
        fit_centering([])
    with pytest.raises(ValueError):
        fit_centering([np.array([1.0, 2.0]), np.array([1.0])])


def test_cosine_basic_values():
    a = np.array([1.0, 0.0])
    b = np.array([0.0, 1.0])
    assert cosine(a, a) == pytest.approx(1.0, abs=1e-12)
    assert cosine(a, b) == pytest.approx(0.0, abs=1e-12)
    assert cosine(a, -a) == pytest.approx(-1.0, abs=1e-12)


def test_cosine_is_clamped_against_rounding():
    v = np.array([0.1] * 9)
    c = cosine(v, 3.7 * v)
    assert -1.0 <= c <= 1.0
    assert c == pytest.approx(1.0, abs=1e-12)


def test_cosine_rejects_zero_norm_and_shape_mismatch():
    with pytest.raises(ValueError):
        cosine(np.zeros(3), np.array([1.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        cosine(np.array([1.0, 0.0]), np.array([1.0, 0.0, 0.0]))


def test_build_centroids_unit_norm_and_separation():
    cents = build_centroids(LABELS, dim=32, seed=5)
    assert set(cents) == set(LABELS)
    vecs = [cents[name] for name in LABELS]
    for v in vecs:
        assert abs(np.linalg.norm(v) - 1.0) < 1e-9
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            assert abs(cosine(vecs[i], vecs[j])) <= CENTROID_MAX_COSINE


def test_build_centroids_is_seed_deterministic():
    a = build_centroids(LABELS, dim=16, seed=9)
    b = build_centroids(LABELS, dim=16, seed=9)
    for name in LABELS:
        assert np.array_equal(a[name], b[name])


def test_build_centroids_rejects_bad_requests():
    with pytest.raises(ValueError):
        build_centroids((), dim=8, seed=0)
    with pytest.raises(ValueError):
        build_centroids(("x", "x"), dim=8, seed=0)
    with pytest.raises(ValueError):
        build_centroids(("a", "b", "c"), dim=2, seed=0)


def test_synthetic_embedding_is_unit_and_deterministic():
    cents = build_centroids(LABELS, dim=16, seed=2)
    v1 = synthetic_embedding(cents, seed=10, domain_mix={"alpha": 1.0}, noise=0.3)
    v2 = synthetic_embedding(cents, seed=10, domain_mix={"alpha": 1.0}, noise=0.3)
    assert np.array_equal(v1, v2)
    assert abs(np.linalg.norm(v1) - 1.0) < 1e-12


def test_synthetic_embedding_tracks_its_domain():
    cents = build_centroids(LABELS, dim=16, seed=2)
    hits = 0
    for s in range(400):
        label = LABELS[s % len(LABELS)]
        v = synthetic_embedding(cents, seed=s, domain_mix={label: 1.0}, noise=0.3)
        sims = {name: cosine(v, cents[name]) for name in LABELS}
        if max(sims, key=sims.get) == label:
            hits += 1
    assert hits / 400 >= 0.95


def test_synthetic_embedding_mix_leans_toward_heavier_domain():
    cents = build_centroids(LABELS, dim=16, seed=2)
    v = synthetic_embedding(
        cents, seed=77, domain_mix={"alpha": 0.8, "beta": 0.2}, noise=0.1
    )
    assert cosine(v, cents["alpha"]) > cosine(v, cents["beta"])


def test_synthetic_embedding_validates_mix():
    cents = build_centroids(LABELS, dim=16, seed=2)
    with pytest.raises(ValueError):
        synthetic_embedding(cents, seed=0, domain_mix={"nope": 1.0}, noise=0.1)
    with pytest.raises(ValueError):
        synthetic_embedding(cents, seed=0, domain_mix={"alpha": 0.0}, noise=0.1)
    with pytest.raises(ValueError):
        synthetic_embedding(cents, seed=0, domain_mix={"alpha": -1.0}, noise=0.1)
    with pytest.raises(ValueError):
        synthetic_embedding(cents, seed=0, domain_mix={"alpha": 1.0}, noise=-0.5)
