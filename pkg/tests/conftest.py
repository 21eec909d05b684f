import numpy as np
import pytest

from specsel.spectra import ConcentrationSet, SpectraSet
from specsel import synth


def mixture_species(n_species=3):
    """Distinct Lorentzian peak sets, one per species."""
    return tuple(
        synth.SpeciesSpec(
            name=f"sp{k}",
            peaks=tuple(
                (520.0 + 310.0 * k + 90.0 * p, 9.0 + 2.5 * p, 1.0 - 0.2 * p)
                for p in range(3)
            ),
        )
        for k in range(n_species)
    )


def noiseless_mixtures(n_samples=10, n_species=3, conc_seed=7, recipe_seed=5):
    """Exactly linear spectra: no baseline, no drift, no noise."""
    species = mixture_species(n_species)
    recipe = synth.SynthRecipe(
        axis_start=400.0, axis_stop=1800.0, axis_step=2.0,
        species=species, seed=recipe_seed,
    )
    rng = np.random.default_rng(conc_seed)
    conc = ConcentrationSet(
        rng.uniform(0.2, 1.0, (n_species, n_samples)),
        tuple(s.name for s in species),
        ("u",) * n_species,
    )
    return synth.generate(recipe, conc), conc, recipe


def random_spectra_set(i=6, j=40, seed=0):
    rng = np.random.default_rng(seed)
    axis = 400.0 + 2.0 * np.arange(j)
    return SpectraSet(axis, rng.normal(size=(i, j)),
                      tuple(f"s{n}" for n in range(i)))


@pytest.fixture
def tiny_set():
    return random_spectra_set(i=5, j=12, seed=3)
