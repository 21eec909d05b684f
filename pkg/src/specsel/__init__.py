"""specsel: quantitative spectroscopy with qualified preprocessing selection.

Principal component regression over sets of spectra, leave-one-out PRESS
cross-validation, and a one-way ANOVA significance gate that accepts or
rejects candidate preprocessing pipelines while picking the component count.
"""

from .crossval import PressMatrix, loo_press_matrix
from .decompose import PcaModel, nipals_fit, project, truncate
from .errors import SpecselError
from .preprocess import (
    IDENTITY,
    Pipeline,
    PipelineStep,
    apply_pipeline,
    make_step,
    parse_pipeline,
)
from .regress import (
    PcrModel,
    load_model,
    pcr_fit,
    pcr_predict,
    press,
    save_model,
    truncate_pcr,
)
from .selector import (
    HoldoutEvaluation,
    SelectionReport,
    evaluate_holdout,
    select_method,
    train_final,
    write_report,
)
from .significance import (
    AnovaResult,
    BoxStats,
    PcVerdict,
    anova_oneway,
    boxplot_stats,
    f_cdf,
    f_critical,
    select_optimal_pc,
)
from .spectra import (
    ConcentrationSet,
    SpectraSet,
    Spectrum,
    load_concentrations,
    load_spectra,
    save_concentrations,
    save_matrix,
    save_spectra,
)
from .synth import (
    BaselineSpec,
    SpeciesSpec,
    SynthRecipe,
    generate,
    tears_phantom,
    tears_recipe,
)

__version__ = "0.1.0"

__all__ = [
    "AnovaResult", "BaselineSpec", "BoxStats", "ConcentrationSet",
    "HoldoutEvaluation", "IDENTITY", "PcaModel", "PcrModel", "PcVerdict",
    "Pipeline", "PipelineStep", "PressMatrix", "SelectionReport",
    "SpeciesSpec", "SpecselError", "SpectraSet", "Spectrum", "SynthRecipe",
    "anova_oneway", "apply_pipeline", "boxplot_stats", "evaluate_holdout",
    "f_cdf", "f_critical", "generate", "load_concentrations", "load_model",
    "load_spectra", "loo_press_matrix", "make_step", "nipals_fit",
    "parse_pipeline", "pcr_fit", "pcr_predict", "press", "project",
    "save_concentrations", "save_matrix", "save_model", "save_spectra",
    "select_method", "select_optimal_pc", "tears_phantom", "tears_recipe",
    "train_final", "truncate", "truncate_pcr", "write_report",
]
