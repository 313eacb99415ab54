"""Path simulation: laws, grids, sampling, densities, serialization."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bmcheck import (DimensionMismatch, GaussianLaw, NotPositiveDefinite,
                     PathEnsemble, SingularCovariance, TimeGrid,
                     UnsupportedFormat, WindowNotOnGrid, apply_transform,
                     cholesky, identity_transform, load_ensemble,
                     parse_transform, sample_paths, save_ensemble,
                     standard_law, transition_density)
from bmcheck.rng import derive_key, philox4x32_ref


def test_philox_reference_vector():
    # zero counter, zero key
    out = philox4x32_ref((0, 0, 0, 0), (0, 0))
    assert [hex(v) for v in out] == ["0x6627e8d5", "0xe169c58d",
                                     "0xbc57ac4c", "0x9b00dbd8"]


def test_derive_key_stable_and_stage_separated():
    k1 = derive_key(42, "paths")
    assert k1 == derive_key(42, "paths")
    assert k1 != derive_key(42, "reference-paths")
    assert k1 != derive_key(43, "paths")


def test_cholesky_reconstructs_spd():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(4, 4))
    A = M @ M.T + 0.5 * np.eye(4)
    L = cholesky(A)
    assert_allclose(L @ L.T, A, rtol=0, atol=1e-12)
    assert np.allclose(np.triu(L, 1), 0.0)


def test_cholesky_rejects_asymmetric():
    with pytest.raises(ValueError):
        cholesky(np.array([[1.0, 0.5], [0.4, 1.0]]))


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_gaussian_law_validation():
    with pytest.raises(DimensionMismatch):
        GaussianLaw(n=2, b=np.zeros(3), A=np.eye(2))
    with pytest.raises(ValueError):
        GaussianLaw(n=2, b=np.zeros(2), A=np.array([[1.0, 0.2], [0.1, 1.0]]))
    with pytest.raises(NotPositiveDefinite):
        GaussianLaw(n=1, b=np.zeros(1), A=np.array([[0.0]]))
    law = GaussianLaw(n=1, b=np.zeros(1), A=np.array([[0.0]]),
                      non_singular=False)
    assert law.n == 1


def test_standard_law():
    law = standard_law(3)
    assert law.n == 3
    assert_allclose(law.b, 0.0)
    assert_allclose(law.A, np.eye(3))
    assert_allclose(law.L, np.eye(3))


def test_time_grid_regular():
    grid = TimeGrid.regular(2.0, 4)
    assert_allclose(grid.times, [0.0, 0.5, 1.0, 1.5, 2.0])
    assert grid.index_of(1.5) == 3
    with pytest.raises(WindowNotOnGrid):
        grid.index_of(0.75)


def test_time_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid(np.array([0.5, 1.0]))       # must start at 0
    with pytest.raises(ValueError):
        TimeGrid(np.array([0.0, 1.0, 1.0]))  # strictly increasing


def test_sample_paths_shape_and_origin():
    law = standard_law(2)
    grid = TimeGrid.regular(1.0, 10)
    ens = sample_paths(law, grid, 50, origin=[1.0, -2.0], seed=3)
    assert ens.paths.shape == (50, 11, 2)
    assert_allclose(ens.paths[:, 0, :], np.tile([1.0, -2.0], (50, 1)))
    assert ens.seed == 3


def test_sample_paths_moments():
    # drifted, correlated law: terminal mean T*b, covariance T*A
    A = np.array([[1.0, 0.6], [0.6, 2.0]])
    law = GaussianLaw(n=2, b=np.array([0.5, -1.0]), A=A)
    grid = TimeGrid.regular(2.0, 16)
    ens = sample_paths(law, grid, 20000, seed=11)
    end = ens.marginal(2.0)
    assert_allclose(end.mean(axis=0), [1.0, -2.0], atol=0.05)
    assert_allclose(np.cov(end.T), 2.0 * A, atol=0.12)


def test_increment_distribution_matches_law():
    A = np.array([[2.0, -0.8], [-0.8, 1.0]])
    law = GaussianLaw(n=2, b=np.array([1.0, 0.0]), A=A)
    grid = TimeGrid.regular(2.0, 8)
    ens = sample_paths(law, grid, 20000, seed=5)
    inc = ens.increments(0.5, 1.5)
    assert_allclose(inc.mean(axis=0), [1.0, 0.0], atol=0.05)
    assert_allclose(np.cov(inc.T), A, atol=0.08)


def test_sample_paths_deterministic_in_seed():
    law = standard_law(2)
    grid = TimeGrid.regular(1.0, 20)
    a = sample_paths(law, grid, 40, seed=9).paths
    b = sample_paths(law, grid, 40, seed=9).paths
    c = sample_paths(law, grid, 40, seed=10).paths
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_paths_prefix_stable_under_path_count():
    # per-path counter streams: growing N must not disturb earlier paths
    law = standard_law(3)
    grid = TimeGrid.regular(1.0, 12)
    small = sample_paths(law, grid, 30, seed=21).paths
    big = sample_paths(law, grid, 90, seed=21).paths
    assert np.array_equal(small, big[:30])


def test_marginal_and_increments_slicing():
    law = standard_law(1)
    grid = TimeGrid.regular(1.0, 4)
    ens = sample_paths(law, grid, 10, seed=1)
    assert_allclose(ens.marginal(0.5), ens.paths[:, 2, :])
    assert_allclose(ens.increments(0.25, 0.75),
                    ens.paths[:, 3, :] - ens.paths[:, 1, :])
    with pytest.raises(WindowNotOnGrid):
        ens.marginal(0.3)


def test_path_ensemble_validation():
    grid = TimeGrid.regular(1.0, 2)
    with pytest.raises(DimensionMismatch):
        PathEnsemble(law_dimension=2, grid=grid,
                     paths=np.zeros((5, 3, 1)), seed=0, origin=np.zeros(2))
    with pytest.raises(ValueError):
        PathEnsemble(law_dimension=1, grid=grid,
                     paths=np.ones((5, 3, 1)), seed=0, origin=np.zeros(1))


def test_apply_transform_matches_pointwise_map():
    law = standard_law(2)
    grid = TimeGrid.regular(1.0, 6)
    ens = sample_paths(law, grid, 25, seed=8)
    f = parse_transform("affine(P=[[2,0],[1,1]], q=[3,-1])")
    out = apply_transform(ens, f)
    P = np.array([[2.0, 0.0], [1.0, 1.0]])
    q = np.array([3.0, -1.0])
    want = ens.paths @ P.T + q
    assert_allclose(out.paths, want, rtol=0, atol=0)
    assert_allclose(out.origin, q)
    assert out.grid is ens.grid


def test_apply_transform_identity_is_noop():
    law = standard_law(2)
    grid = TimeGrid.regular(1.0, 5)
    ens = sample_paths(law, grid, 12, seed=2)
    out = apply_transform(ens, identity_transform(2))
    assert np.array_equal(out.paths, ens.paths)


def test_transition_density_matches_closed_form():
    from scipy.stats import multivariate_normal
    A = np.array([[1.5, 0.4], [0.4, 0.8]])
    law = GaussianLaw(n=2, b=np.array([0.3, -0.2]), A=A)
    tau = 0.7
    x = np.array([0.1, 0.2])
    y = np.array([-0.5, 1.0])
    got = transition_density(law, tau, x, y)
    want = multivariate_normal(mean=x + tau * law.b, cov=tau * A).pdf(y)
    assert_allclose(got, want, rtol=1e-12)


def test_transition_density_singular_law():
    law = GaussianLaw(n=1, b=np.zeros(1), A=np.array([[0.0]]),
                      non_singular=False)
    with pytest.raises(SingularCovariance):
        transition_density(law, 1.0, [0.0], [0.0])


def test_save_load_roundtrip_binary(tmp_path):
    law = standard_law(2)
    grid = TimeGrid.regular(1.5, 7)
    ens = sample_paths(law, grid, 15, seed=4)
    path = tmp_path / "paths.bin"
    save_ensemble(ens, str(path))
    back = load_ensemble(str(path))
    assert np.array_equal(back.paths, ens.paths)
    assert_allclose(back.grid.times, ens.grid.times)


def test_save_csv_row_count(tmp_path):
    law = standard_law(2)
    grid = TimeGrid.regular(1.0, 3)
    ens = sample_paths(law, grid, 5, seed=4)
    path = tmp_path / "paths.csv"
    save_ensemble(ens, str(path))
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 1 + 5 * 4
    assert lines[0].startswith("path,time_index,time,")


def test_save_unknown_extension(tmp_path):
    law = standard_law(1)
    ens = sample_paths(law, TimeGrid.regular(1.0, 2), 5, seed=0)
    with pytest.raises(UnsupportedFormat):
        save_ensemble(ens, str(tmp_path / "paths.parquet"))
