import numpy as np
import pytest
from numpy.testing import assert_allclose

from specsel.errors import RecipeSpeciesMismatch, SpecselError
from specsel.spectra import ConcentrationSet, load_spectra, save_spectra
from specsel.synth import (
    SpeciesSpec,
    SynthRecipe,
    generate,
    species_response,
    tears_phantom,
    tears_recipe,
)

from conftest import mixture_species, noiseless_mixtures


class TestGenerate:
    def test_linear_in_concentrations(self):
        spectra, conc, recipe = noiseless_mixtures(n_samples=10, n_species=3)
        responses = np.vstack([species_response(s, spectra.axis)
                               for s in recipe.species])
        # solve each spectrum for its mixing weights: must recover conc
        recovered, *_ = np.linalg.lstsq(responses.T, spectra.matrix.T,
                                        rcond=None)
        assert_allclose(recovered, conc.matrix, rtol=1e-10, atol=1e-12)

    def test_seeded_determinism(self):
        _, conc, recipe = noiseless_mixtures(n_samples=6)
        a = generate(recipe, conc)
        b = generate(recipe, conc)
        assert np.array_equal(a.matrix, b.matrix)
        assert a.labels == b.labels

    def test_noise_level(self):
        species = mixture_species(2)
        conc_values = np.tile([[0.6], [0.9]], (1, 40))
        conc = ConcentrationSet(conc_values,
                                tuple(s.name for s in species), ("u", "u"))
        quiet = SynthRecipe(species=species, noise_sigma=0.0, seed=77)
        noisy = SynthRecipe(species=species, noise_sigma=0.01, seed=77)
        clean = generate(quiet, conc)
        loud = generate(noisy, conc)
        reference = float(np.abs(clean.matrix[0]).max())
        residual = loud.matrix - clean.matrix
        sigma = residual.std(axis=0, ddof=1).mean()
        assert abs(sigma - 0.01 * reference) < 0.2 * 0.01 * reference

    def test_species_mismatch(self):
        _, conc, recipe = noiseless_mixtures(n_samples=6)
        renamed = ConcentrationSet(conc.matrix,
                                   ("x", "y", "z"), conc.units)
        with pytest.raises(RecipeSpeciesMismatch):
            generate(recipe, renamed)

    def test_rank_equals_varying_species(self):
        spectra, _, _ = noiseless_mixtures(n_samples=10, n_species=3)
        centered = spectra.matrix - spectra.matrix.mean(axis=0)
        singulars = np.linalg.svd(centered, compute_uv=False)
        assert (singulars > 1e-9 * singulars[0]).sum() == 3

    def test_spikes_applied(self):
        species = mixture_species(1)
        conc = ConcentrationSet(np.full((1, 5), 1.0), ("sp0",), ("u",))
        base = SynthRecipe(species=species, seed=3)
        spiked = SynthRecipe(species=species, spike_rate=3.0,
                             spike_amplitude=(5.0, 10.0), seed=3)
        a = generate(base, conc)
        b = generate(spiked, conc)
        assert np.any(b.matrix != a.matrix)
        assert b.matrix.max() > 4.0 * a.matrix.max()

    def test_io_round_trip_lossless(self, tmp_path):
        spectra, _, _ = noiseless_mixtures(n_samples=5)
        path = tmp_path / "synth.csv"
        save_spectra(path, spectra)
        again = load_spectra(path)
        assert np.array_equal(again.matrix, spectra.matrix)
        assert np.array_equal(again.axis, spectra.axis)

    def test_bad_recipe(self):
        with pytest.raises(SpecselError):
            SynthRecipe(axis_start=500.0, axis_stop=400.0)
        with pytest.raises(SpecselError):
            SynthRecipe(species=(SpeciesSpec("a", ((100.0, 5.0, 1.0),)),))
        with pytest.raises(SpecselError):
            SynthRecipe(species=(SpeciesSpec("a", ((500.0, -1.0, 1.0),)),))


class TestTearsPhantom:
    def test_sizes_and_ranges(self):
        spectra, conc = tears_phantom(40, seed=1)
        assert spectra.n_spectra == 40
        assert conc.species == ("glucose", "lysozyme")
        glucose, lysozyme = conc.matrix
        assert np.all((glucose >= 0.0) & (glucose <= 1.0))
        assert np.all((lysozyme >= 0.0) & (lysozyme <= 10.0))

    def test_seeded_determinism(self):
        a_spec, a_conc = tears_phantom(8, seed=5)
        b_spec, b_conc = tears_phantom(8, seed=5)
        assert np.array_equal(a_spec.matrix, b_spec.matrix)
        assert np.array_equal(a_conc.matrix, b_conc.matrix)
        c_spec, _ = tears_phantom(8, seed=6)
        assert not np.array_equal(a_spec.matrix, c_spec.matrix)

    def test_baseline_drift_present(self):
        recipe = tears_recipe(seed=2)
        assert recipe.baseline is not None
        assert recipe.noise_sigma > 0
        lo, hi = recipe.drift_range
        assert lo < 1.0 < hi

    def test_minimum_size(self):
        with pytest.raises(SpecselError):
            tears_phantom(3)
