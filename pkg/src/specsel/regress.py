"""Principal component regression: coefficients, prediction, PRESS.

Concentrations are regressed onto the PCA scores after centering both
sides; the species means come back at prediction time. The coefficient
matrix is solved by an orthogonal-factorization least squares, never by an
explicit normal-equation inverse.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .decompose import PcaModel, project, truncate
from .errors import IoFailure, ShapeMismatch, SingularScores
from .spectra import ConcentrationSet, SpectraSet

MAX_SCORE_CONDITION = 1e12


@dataclass(frozen=True)
class PcrModel:
    """PCA model plus regression coefficients for q species."""

    pca: PcaModel
    coeffs: np.ndarray      # q x k
    mean_conc: np.ndarray   # q
    species: tuple[str, ...]
    units: tuple[str, ...]
    pipeline_name: str = "identity"

    @property
    def n_components(self) -> int:
        return self.coeffs.shape[1]

    @property
    def n_species(self) -> int:
        return self.coeffs.shape[0]


def pcr_fit(pca: PcaModel, conc: ConcentrationSet) -> PcrModel:
    """Least-squares regression of centered concentrations on the scores."""
    scores = pca.scores
    if conc.n_samples != scores.shape[0]:
        raise ShapeMismatch(
            f"{conc.n_samples} concentration columns for {scores.shape[0]} spectra"
        )
    singulars = np.linalg.svd(scores, compute_uv=False)
    smin = singulars.min() if singulars.size else 0.0
    if smin == 0.0 or (singulars.max() / smin) ** 2 > MAX_SCORE_CONDITION:
        raise SingularScores(
            "score matrix is too ill-conditioned for a stable regression fit"
        )
    mean_conc = conc.matrix.mean(axis=1)
    centered = conc.matrix - mean_conc[:, None]
    solution, *_ = np.linalg.lstsq(scores, centered.T, rcond=None)
    return PcrModel(
        pca=pca,
        coeffs=solution.T,
        mean_conc=mean_conc,
        species=conc.species,
        units=conc.units,
    )


def pcr_predict(model: PcrModel, new_set: SpectraSet) -> np.ndarray:
    """Concentration estimates (q x r) for new spectra.

    Negative estimates are reported as-is; clamping would bias downstream
    error statistics.
    """
    new_scores = project(model.pca, new_set)
    return model.coeffs @ new_scores.T + model.mean_conc[:, None]


def press(estimated, actual) -> float:
    """Sum of squared prediction errors over all species and samples."""
    est = np.asarray(estimated, dtype=float)
    act = np.asarray(actual, dtype=float)
    if est.shape != act.shape:
        raise ShapeMismatch(f"shapes {est.shape} and {act.shape} differ")
    diff = est - act
    return float(np.sum(diff * diff))


def truncate_pcr(model: PcrModel, m: int) -> PcrModel:
    """Model restricted to its leading m components (coefficients sliced).

    Score columns are orthogonal, so dropping trailing components leaves
    the leading coefficients unchanged.
    """
    if m == model.n_components:
        return model
    return replace(model, pca=truncate(model.pca, m),
                   coeffs=np.ascontiguousarray(model.coeffs[:, :m]))


# --- serialization ---------------------------------------------------------------

_MODEL_FORMAT = "specsel-pcr-model"
_MODEL_VERSION = 1


def save_model(path, model: PcrModel) -> None:
    """Write everything a prediction needs to one JSON document.

    Floats are serialized with full round-trip precision, so a reloaded
    model predicts bit-identically.
    """
    payload = {
        "format": _MODEL_FORMAT,
        "version": _MODEL_VERSION,
        "pipeline": model.pipeline_name,
        "species": list(model.species),
        "units": list(model.units),
        "axis": model.pca.axis.tolist(),
        "mean_spectrum": model.pca.mean_spectrum.tolist(),
        "loadings": model.pca.loadings.tolist(),
        "coeffs": model.coeffs.tolist(),
        "mean_conc": model.mean_conc.tolist(),
    }
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_model(path) -> PcrModel:
    """Reload a model saved by save_model (prediction-only: no scores)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoFailure(f"{path}: not a valid model file: {exc}") from exc
    if payload.get("format") != _MODEL_FORMAT:
        raise IoFailure(f"{path}: not a {_MODEL_FORMAT} file")
    loadings = np.asarray(payload["loadings"], dtype=float)
    k = loadings.shape[1] if loadings.ndim == 2 else 0
    pca = PcaModel(
        axis=np.asarray(payload["axis"], dtype=float),
        mean_spectrum=np.asarray(payload["mean_spectrum"], dtype=float),
        loadings=loadings,
        scores=np.zeros((0, k)),
        explained_variance=np.zeros(k),
        residual_fro=0.0,
        total_center_ss=0.0,
    )
    return PcrModel(
        pca=pca,
        coeffs=np.asarray(payload["coeffs"], dtype=float),
        mean_conc=np.asarray(payload["mean_conc"], dtype=float),
        species=tuple(payload["species"]),
        units=tuple(payload["units"]),
        pipeline_name=payload["pipeline"],
    )
