import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fnn_forge.errors import InvalidArgument
from fnn_forge.fnn import (
    FnnConfig,
    FnnDiagnostics,
    default_k,
    dim_indexed_distances,
    false_neighbor_fractions,
    fnn_loss,
    fnn_loss_grad,
    frozen_loss,
    neighbor_sort,
)

from oracles import fnn_loop


def test_distance_examples():
    assert dim_indexed_distances([[0.0], [3.0]])[0, 1, 0] == 3.0
    D = dim_indexed_distances([[0.0, 0.0], [3.0, 4.0]])
    np.testing.assert_allclose(D[0, 1], [3.0, 5.0])
    np.testing.assert_allclose(D[:, :, 1], D[:, :, 1].T)
    assert np.all(np.diagonal(D, axis1=0, axis2=1) == 0)


def test_distances_match_triple_loop():
    rng = np.random.default_rng(3)
    h = rng.normal(size=(8, 4))
    D = dim_indexed_distances(h)
    for a in range(8):
        for b in range(8):
            for m in range(4):
                ref = np.sqrt(sum((h[a, i] - h[b, i]) ** 2 for i in range(m + 1)))
                assert abs(D[a, b, m] - ref) < 1e-12


def test_neighbor_sort_collinear_and_ties():
    g = neighbor_sort(dim_indexed_distances([[0.0], [1.0], [3.0]]))
    assert g[1, :, 0].tolist() == [1, 0, 2]
    # duplicates: 0, 1, 2 coincide; point 2 sees itself first, then 0 before 1
    g = neighbor_sort(dim_indexed_distances([[5.0], [5.0], [5.0], [9.0]]))
    assert g[2, :, 0].tolist() == [2, 0, 1, 3]


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_neighbor_sort_is_permutation(B, L, seed):
    h = np.random.default_rng(seed).normal(size=(B, L))
    D = dim_indexed_distances(h)
    g = neighbor_sort(D)
    for a in range(B):
        for m in range(L):
            assert sorted(g[a, :, m]) == list(range(B))
            assert g[a, 0, m] == a
            assert np.all(np.diff(D[a, g[a, 1:, m], m]) >= 0)


def test_default_k():
    assert default_k(8) == 1
    assert default_k(100) == 1
    assert default_k(101) == 2
    assert default_k(512) == 6


def test_duplicated_columns_have_no_false_neighbors():
    # densely sampled column: no isolated points for the size criterion to flag
    col = np.random.default_rng(0).uniform(-1, 1, size=(256, 1))
    h = np.repeat(col, 5, axis=1)
    diag = false_neighbor_fractions(h)
    assert diag.f_bar[0] == 1.0
    assert np.all(diag.f_bar[1:] == 0.0)


def test_degenerate_batch():
    diag = false_neighbor_fractions(np.ones((10, 3)))
    assert np.all(diag.f_bar[1:] == 0.0)
    assert diag.loss == pytest.approx(2.0)


def test_random_batch_matches_loop_oracle_k1():
    h = np.random.default_rng(11).normal(size=(16, 5))
    cfg = FnnConfig(k=1)
    diag = false_neighbor_fractions(h, cfg)
    f_ref, r_ref, loss_ref = fnn_loop(h, k=1)
    np.testing.assert_array_equal(diag.f_bar, f_ref)
    np.testing.assert_allclose(diag.attractor_size, r_ref, atol=1e-12)
    assert abs(diag.loss - loss_ref) <= 1e-12


def test_mean_activity_mode_matches_oracle():
    h = np.random.default_rng(5).normal(loc=0.3, size=(20, 4))
    cfg = FnnConfig(k=2, activity="mean")
    _, _, loss_ref = fnn_loop(h, k=2, activity="mean")
    assert abs(fnn_loss(h, cfg) - loss_ref) <= 1e-12


def test_ties_follow_index_rule_like_oracle():
    rng = np.random.default_rng(2)
    h = rng.integers(0, 3, size=(24, 4)).astype(float)
    for k in (1, 3):
        cfg = FnnConfig(k=k)
        f_ref, _, loss_ref = fnn_loop(h, k=k)
        diag = false_neighbor_fractions(h, cfg)
        np.testing.assert_array_equal(diag.f_bar, f_ref)
        assert abs(diag.loss - loss_ref) <= 1e-12


def test_loss_zero_without_activity_in_penalized_units():
    h = np.zeros((30, 4))
    h[:, 0] = np.linspace(-1, 1, 30)
    assert fnn_loss(h) == 0.0
    grad, _ = fnn_loss_grad(h)
    assert np.all(grad == 0.0)


def test_full_false_fraction_means_zero_loss():
    h = np.random.default_rng(0).normal(size=(12, 4))
    assert frozen_loss(h, np.ones(4)) == 0.0


def test_gradient_matches_finite_differences_with_frozen_fbar():
    rng = np.random.default_rng(8)
    h = rng.normal(size=(20, 5))
    cfg = FnnConfig(k=2)
    grad, diag = fnn_loss_grad(h, cfg)
    eps = 1e-3  # the frozen loss is quadratic: central differences are exact up to rounding
    num = np.zeros_like(h)
    for idx in np.ndindex(*h.shape):
        hp, hm = h.copy(), h.copy()
        hp[idx] += eps
        hm[idx] -= eps
        num[idx] = (frozen_loss(hp, diag.f_bar) - frozen_loss(hm, diag.f_bar)) / (2 * eps)
    rel = np.abs(grad - num) / np.maximum(np.abs(num), 1e-8)
    assert np.max(rel[np.abs(num) > 1e-8]) < 1e-6
    assert np.all(grad[:, 0] == 0.0)


def test_full_loss_locally_matches_gradient():
    rng = np.random.default_rng(9)
    h = rng.normal(size=(16, 4))
    cfg = FnnConfig(k=1)
    grad, diag = fnn_loss_grad(h, cfg)
    eps = 1e-7
    for idx in [(0, 1), (3, 2), (7, 3), (15, 1)]:
        hp, hm = h.copy(), h.copy()
        hp[idx] += eps
        hm[idx] -= eps
        # tiny perturbation: no sort order or mask flips
        assert np.array_equal(false_neighbor_fractions(hp, cfg).f_bar, diag.f_bar)
        num = (fnn_loss(hp, cfg) - fnn_loss(hm, cfg)) / (2 * eps)
        assert num == pytest.approx(grad[idx], rel=1e-5, abs=1e-9)


def test_mean_mode_gradient():
    rng = np.random.default_rng(1)
    h = rng.normal(loc=0.5, size=(10, 3))
    cfg = FnnConfig(k=1, activity="mean")
    grad, diag = fnn_loss_grad(h, cfg)
    eps = 1e-6
    hp = h.copy()
    hp[4, 2] += eps
    hm = h.copy()
    hm[4, 2] -= eps
    num = (frozen_loss(hp, diag.f_bar, "mean") - frozen_loss(hm, diag.f_bar, "mean")) / (2 * eps)
    assert grad[4, 2] == pytest.approx(num, rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(4, 40), st.integers(2, 6), st.floats(0.01, 100.0), st.integers(0, 2**31 - 1))
def test_scale_and_row_order_invariance(B, L, c, seed):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(B, L))
    cfg = FnnConfig()
    base = false_neighbor_fractions(h, cfg)
    scaled = false_neighbor_fractions(c * h, cfg)
    np.testing.assert_array_equal(base.f_bar, scaled.f_bar)
    assert scaled.loss == pytest.approx(c * c * base.loss, rel=1e-9, abs=1e-300)
    perm = rng.permutation(B)
    shuffled = false_neighbor_fractions(h[perm], cfg)
    np.testing.assert_array_equal(base.f_bar, shuffled.f_bar)
    assert shuffled.loss == pytest.approx(base.loss, rel=1e-12, abs=1e-15)
    assert np.all((base.f_bar >= 0) & (base.f_bar <= 1))


@settings(max_examples=30, deadline=None)
@given(st.integers(4, 30), st.integers(2, 5), st.integers(0, 2**31 - 1))
def test_appending_duplicate_column_never_decreases_loss(B, L, seed):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(B, L))
    dup = rng.integers(0, L)
    h2 = np.hstack([h, h[:, dup:dup + 1]])
    assert fnn_loss(h2) >= fnn_loss(h) - 1e-12


def test_swapping_latent_columns_changes_loss():
    rng = np.random.default_rng(4)
    h = rng.normal(size=(64, 3)) * np.array([3.0, 1.0, 0.1])
    swapped = h[:, [1, 0, 2]]
    assert fnn_loss(h) != fnn_loss(swapped)


def test_hankel_pca_signature_of_lorenz(lorenz_x):
    """Leading Hankel principal components unfold Lorenz within about 3 units."""
    from fnn_forge.baselines import etd_embed
    from fnn_forge.timeseries import build_hankel

    _, cloud = etd_embed(build_hankel(lorenz_x, 10), 10)
    h = cloud.points[:512]
    diag = false_neighbor_fractions(h, FnnConfig())
    f = diag.f_bar
    assert f[1] > 0.1
    assert f[1] > f[4] and f[2] > f[4]
    assert np.max(f[4:]) < 0.1
    f_ref, _, loss_ref = fnn_loop(h[:64])
    sub = false_neighbor_fractions(h[:64])
    np.testing.assert_array_equal(sub.f_bar, f_ref)


def test_config_validation():
    with pytest.raises(InvalidArgument):
        FnnConfig(r_tol=0)
    with pytest.raises(InvalidArgument):
        FnnConfig(k=5).resolve_k(5)
    with pytest.raises(InvalidArgument):
        FnnConfig(activity="median")


def test_diagnostics_json_roundtrip():
    diag = false_neighbor_fractions(np.random.default_rng(0).normal(size=(10, 3)))
    back = FnnDiagnostics.from_dict(__import__("json").loads(diag.to_json()))
    np.testing.assert_array_equal(back.f_bar, diag.f_bar)
    assert back.loss == diag.loss
