import numpy as np
import pytest
from hypothesis import given, strategies as st

from pcaes.errors import DegenerateData, DimensionMismatch, DimensionTooSmallForPca
from pcaes.pca import back_map, choose_k, fit_pca, lift_displacement, project, transform_covariance
from pcaes.selftest import double_sum_transform, random_orthonormal_rows, random_psd


def test_collinear_points_give_rank_one():
    d = np.array([1.0, 2.0, -2.0]) / 3
    m = fit_pca([d * 0.5, d * 3.0])
    assert m.k == 1
    assert abs(m.p[0] @ d) == pytest.approx(1.0, abs=1e-12)


def test_plane_points():
    g = np.random.default_rng(1)
    a, b = g.standard_normal(40), g.standard_normal(40)
    pts = np.column_stack([a, a, b])
    m = fit_pca(pts, tau=0.999)
    assert m.k == 2
    np.testing.assert_allclose(m.p @ m.p.T, np.eye(2), atol=1e-10)
    # both rows lie in span{(1,1,0), (0,0,1)}: orthogonal to (1,-1,0)
    np.testing.assert_allclose(m.p @ np.array([1.0, -1.0, 0.0]), 0.0, atol=1e-10)


def test_tau_captures_variance():
    g = np.random.default_rng(2)
    pts = g.standard_normal((30, 10)) * np.linspace(3, 0.1, 10)
    m = fit_pca(pts, tau=0.95)
    xc = pts - m.center
    captured = np.sum((xc @ m.p.T) ** 2) / np.sum(xc ** 2)
    want = min(0.95, m.spectrum.cumulative[m.n - 2])
    assert captured >= want - 1e-12
    assert m.k == min(max(int(np.argmax(m.spectrum.cumulative >= 0.95)) + 1, 2), 9)


def test_center_is_mean():
    g = np.random.default_rng(3)
    pts = g.standard_normal((8, 5))
    np.testing.assert_allclose(fit_pca(pts).center, pts.mean(axis=0), atol=1e-15)


def test_fit_errors():
    with pytest.raises(DegenerateData):
        fit_pca(np.ones((5, 4)))
    with pytest.raises(DegenerateData):
        fit_pca(np.ones((1, 4)))
    with pytest.raises(DimensionTooSmallForPca):
        fit_pca(np.random.default_rng(0).standard_normal((5, 2)))


def test_fixed_k_clamped():
    g = np.random.default_rng(4)
    pts = g.standard_normal((30, 6))
    assert fit_pca(pts, k=3).k == 3
    assert fit_pca(pts, k=50).k == 5
    with pytest.raises(ValueError):
        choose_k(fit_pca(pts).spectrum, 6, k=2, tau=0.9)


def test_spectrum_invariants():
    g = np.random.default_rng(5)
    m = fit_pca(g.standard_normal((20, 7)))
    assert np.all(np.diff(m.spectrum.eigenvalues) <= 0)
    assert np.all(np.diff(m.spectrum.cumulative) >= 0)
    assert m.spectrum.cumulative[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(m.explained) <= 0)
    assert np.all((m.explained >= 0) & (m.explained <= 1)) and m.explained.sum() <= 1 + 1e-12


def test_sign_canonical_rows():
    g = np.random.default_rng(6)
    m = fit_pca(g.standard_normal((20, 8)), k=5)
    for row in m.p:
        assert row[np.argmax(np.abs(row))] > 0


def test_transform_identity_rows_selects_block():
    c = random_psd(6, np.random.default_rng(7))
    np.testing.assert_array_equal(transform_covariance(c, np.eye(6)[:4]), c[:4, :4])


def test_transform_examples():
    p = np.array([[1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])
    np.testing.assert_array_equal(transform_covariance(np.eye(3), p), [[2.0, -1.0], [-1.0, 2.0]])
    c = np.array([[4.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
    assert transform_covariance(c, p)[0, 1] == -3.0


def test_transform_general_bilinear_rule():
    # with c12 != c23 the entry is -c11 + c12 + c13 - c23
    p = np.array([[1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])
    c = np.array([[4.0, 0.5, 1.0], [0.5, 1.0, 0.2], [1.0, 0.2, 1.0]])
    assert transform_covariance(c, p)[0, 1] == pytest.approx(-4.0 + 0.5 + 1.0 - 0.2, abs=1e-15)


def test_transform_mismatch():
    with pytest.raises(DimensionMismatch):
        transform_covariance(np.eye(4), np.eye(3)[:2])


@given(st.integers(2, 20), st.data())
def test_transform_matches_double_sum(n, data):
    k = data.draw(st.integers(1, n - 1))
    g = np.random.default_rng(data.draw(st.integers(0, 2 ** 32 - 1)))
    p = random_orthonormal_rows(k, n, g)
    c = random_psd(n, g)
    got = transform_covariance(c, p)
    np.testing.assert_allclose(got, double_sum_transform(p.tolist(), c.tolist()), rtol=0, atol=1e-12)
    np.testing.assert_array_equal(got, got.T)
    assert np.linalg.eigvalsh(got).min() >= -1e-10


@given(st.integers(3, 20), st.integers(0, 2 ** 32 - 1))
def test_fit_pca_properties(n, seed):
    g = np.random.default_rng(seed)
    count = int(g.integers(2, 3 * n))
    pts = g.standard_normal((count, n)) * g.uniform(0.01, 5, n)
    m = fit_pca(pts)
    assert 1 <= m.k < n
    np.testing.assert_allclose(m.p @ m.p.T, np.eye(m.k), atol=1e-10)
    y = g.standard_normal(m.k)
    np.testing.assert_allclose(project(back_map(y, m), m), y, atol=1e-10)
    # x in the principal subspace survives the round trip
    x = back_map(g.standard_normal(m.k), m)
    np.testing.assert_allclose(back_map(project(x, m), m), x, atol=1e-9)


def test_project_back_map_basics():
    m = fit_pca(np.random.default_rng(8).standard_normal((10, 4)), k=2)
    np.testing.assert_array_equal(project(m.center, m), np.zeros(2))
    np.testing.assert_array_equal(back_map(np.zeros(2), m), m.center)
    with pytest.raises(DimensionMismatch):
        project(np.zeros(3), m)
    with pytest.raises(DimensionMismatch):
        back_map(np.zeros(3), m)


def test_lift_displacement_ignores_center():
    m = fit_pca(np.random.default_rng(9).standard_normal((10, 4)) + 100.0, k=2)
    y = np.array([[1.0, -2.0]])
    np.testing.assert_allclose(lift_displacement(y, m), y @ m.p)
