import numpy as np
import pytest
from numpy.testing import assert_allclose

from specsel.decompose import nipals_fit, project, truncate
from specsel.errors import AxisMismatch, BadOrder, NoConvergence
from specsel.spectra import SpectraSet

from conftest import random_spectra_set


def svd_loadings(matrix, k):
    """Oracle: right singular vectors of the centered matrix, sign-fixed."""
    centered = matrix - matrix.mean(axis=0)
    v = np.linalg.svd(centered, full_matrices=False)[2].T[:, :k]
    for c in range(k):
        peak = np.argmax(np.abs(v[:, c]))
        if v[peak, c] < 0:
            v[:, c] = -v[:, c]
    return v


class TestNipalsFit:
    def test_rank_one_matrix(self):
        rng = np.random.default_rng(0)
        t = rng.normal(size=6)
        p = rng.normal(size=40)
        ss = SpectraSet(np.arange(40.0), np.outer(t, p),
                        tuple(f"s{n}" for n in range(6)))
        model = nipals_fit(ss, 1)
        assert model.explained_variance[0] > 1.0 - 1e-10
        assert model.residual_fro < 1e-8 * np.linalg.norm(ss.matrix)

    def test_matches_svd_oracle(self):
        ss = random_spectra_set(i=8, j=50, seed=1)
        model = nipals_fit(ss, 5, tol=1e-12, max_iter=20000)
        assert np.abs(model.loadings - svd_loadings(ss.matrix, 5)).max() < 1e-8

    def test_full_rank_explains_everything(self):
        ss = random_spectra_set(i=6, j=30, seed=2)
        model = nipals_fit(ss, 5, max_iter=50000)
        assert model.explained_variance.sum() > 1.0 - 1e-10

    def test_invariants(self):
        ss = random_spectra_set(i=10, j=80, seed=3)
        model = nipals_fit(ss, 6, max_iter=50000)
        k = model.n_components
        gram = model.loadings.T @ model.loadings
        assert np.abs(gram - np.eye(k)).max() < 1e-8
        tt = model.scores.T @ model.scores
        off = tt - np.diag(np.diag(tt))
        assert np.abs(off).max() < 1e-8 * np.diag(tt).max()
        assert np.all(np.diff(model.explained_variance) <= 1e-12)
        assert np.all(model.explained_variance >= 0)
        assert model.explained_variance.sum() <= 1.0 + 1e-12
        centered = ss.matrix - ss.matrix.mean(axis=0)
        recon = np.linalg.norm(centered - model.scores @ model.loadings.T)
        assert abs(recon - model.residual_fro) < 1e-8 * max(recon, 1.0)

    def test_sign_convention(self):
        ss = random_spectra_set(i=7, j=33, seed=4)
        model = nipals_fit(ss, 4)
        for c in range(4):
            col = model.loadings[:, c]
            assert col[np.argmax(np.abs(col))] > 0

    def test_row_permutation(self):
        ss = random_spectra_set(i=8, j=40, seed=5)
        perm = [3, 1, 7, 0, 5, 2, 6, 4]
        permuted = ss.subset(perm)
        a = nipals_fit(ss, 3)
        b = nipals_fit(permuted, 3)
        assert_allclose(b.loadings, a.loadings, atol=1e-9)
        assert_allclose(b.scores, a.scores[perm, :], atol=1e-9)

    def test_rank_deficiency_flagged(self):
        rng = np.random.default_rng(6)
        low = rng.normal(size=(2, 30))
        weights = rng.normal(size=(8, 2))
        ss = SpectraSet(np.arange(30.0), weights @ low,
                        tuple(f"s{n}" for n in range(8)))
        model = nipals_fit(ss, 6)
        assert model.rank_deficient
        assert model.n_components == 2

    def test_bad_k(self):
        ss = random_spectra_set(i=5, j=20, seed=7)
        for k in (0, 5, 21):
            with pytest.raises(BadOrder):
                nipals_fit(ss, k)

    def test_deterministic(self):
        ss = random_spectra_set(i=9, j=45, seed=8)
        a = nipals_fit(ss, 4)
        b = nipals_fit(ss, 4)
        assert np.array_equal(a.loadings, b.loadings)
        assert np.array_equal(a.scores, b.scores)

    def test_no_convergence_carries_partial_model(self):
        # two nearly tied variance directions stall the iteration; the
        # exception must name the component and carry what converged
        rng = np.random.default_rng(16)
        basis = np.linalg.qr(rng.normal(size=(12, 3)))[0]
        directions = np.linalg.qr(rng.normal(size=(30, 3)))[0]
        matrix = (1.0 * np.outer(basis[:, 0], directions[:, 0])
                  + 0.99999 * np.outer(basis[:, 1], directions[:, 1])
                  + 0.2 * np.outer(basis[:, 2], directions[:, 2]))
        ss = SpectraSet(np.arange(30.0), matrix,
                        tuple(f"s{n}" for n in range(12)))
        with pytest.raises(NoConvergence) as info:
            nipals_fit(ss, 3, tol=1e-12, max_iter=50)
        assert info.value.component == 1
        assert info.value.model.n_components == 0


class TestTruncate:
    def test_matches_smaller_fit_bitwise(self):
        ss = random_spectra_set(i=8, j=40, seed=9)
        full = nipals_fit(ss, 6)
        for m in (1, 3, 6):
            direct = nipals_fit(ss, m)
            cut = truncate(full, m)
            assert np.array_equal(cut.loadings, direct.loadings)
            assert np.array_equal(cut.scores, direct.scores)

    def test_residual_non_increasing(self):
        ss = random_spectra_set(i=8, j=40, seed=10)
        full = nipals_fit(ss, 6)
        residuals = [truncate(full, m).residual_fro for m in range(1, 7)]
        assert all(a >= b - 1e-12 for a, b in zip(residuals, residuals[1:]))

    def test_residual_matches_reconstruction(self):
        ss = random_spectra_set(i=8, j=40, seed=11)
        full = nipals_fit(ss, 5)
        centered = ss.matrix - ss.matrix.mean(axis=0)
        for m in (1, 2, 4):
            cut = truncate(full, m)
            recon = np.linalg.norm(centered - cut.scores @ cut.loadings.T)
            assert abs(recon - cut.residual_fro) < 1e-8 * recon


class TestProject:
    def test_training_set_projects_to_scores(self):
        ss = random_spectra_set(i=8, j=40, seed=12)
        model = nipals_fit(ss, 4)
        assert np.abs(project(model, ss) - model.scores).max() < 1e-8

    def test_mean_spectrum_projects_to_zero(self):
        ss = random_spectra_set(i=8, j=40, seed=13)
        model = nipals_fit(ss, 3)
        mean_set = SpectraSet(ss.axis, model.mean_spectrum[None, :], ("mean",))
        assert np.abs(project(model, mean_set)).max() < 1e-10

    def test_loading_direction_projects_to_unit(self):
        ss = random_spectra_set(i=8, j=40, seed=14)
        model = nipals_fit(ss, 3, max_iter=50000)
        c = 2.5
        shifted = model.mean_spectrum + c * model.loadings[:, 0]
        out = project(model, SpectraSet(ss.axis, shifted[None, :], ("x",)))
        assert abs(out[0, 0] - c) < 1e-8
        assert np.abs(out[0, 1:]).max() < 1e-8

    def test_axis_mismatch(self):
        ss = random_spectra_set(i=8, j=40, seed=15)
        model = nipals_fit(ss, 2)
        other = SpectraSet(ss.axis + 1.0, ss.matrix, ss.labels)
        with pytest.raises(AxisMismatch):
            project(model, other)
