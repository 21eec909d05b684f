"""Leave-one-out cross-validation of a (pipeline, PC count) grid.

For every held-out spectrum the remaining i-1 spectra are decomposed once
at the ceiling of i-2 components; truncating that fit reproduces each
smaller fit bit-identically, so one decomposition serves every candidate
PC count. The result is the i x (i-2) matrix of held-out squared
prediction errors that the significance test consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._parallel import run_indexed
from .decompose import nipals_fit, truncate
from .errors import (
    FoldPreprocessFailure,
    NoConvergence,
    ShapeMismatch,
    SingularScores,
    SpecselError,
    TooFewSpectra,
)
from .preprocess import Pipeline, apply_pipeline
from .regress import pcr_fit, pcr_predict, press
from .spectra import ConcentrationSet, SpectraSet

CROSSVAL_MAX_ITER = 10000


@dataclass(frozen=True)
class PressMatrix:
    """Held-out squared prediction errors, rows = samples, columns = PC counts.

    Column m holds the errors of the (m+1)-component model. Entries are
    non-negative; a NaN marks a (fold, PC count) pair that could not be
    evaluated (rank-deficient fold), with the reason recorded in ``notes``.
    """

    values: np.ndarray
    pipeline_name: str
    labels: tuple[str, ...]
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ShapeMismatch(f"PRESS matrix must be 2-D, got {values.shape}")
        with np.errstate(invalid="ignore"):
            if np.any(values < 0):
                raise ShapeMismatch("PRESS values must be non-negative")
        values = np.array(values, copy=True)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "notes", tuple(self.notes))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_pc_counts(self) -> int:
        return self.values.shape[1]

    def column_headers(self) -> list[str]:
        return [f"pc_{m + 1}" for m in range(self.n_pc_counts)]


def loo_press_matrix(spectra: SpectraSet, conc: ConcentrationSet,
                     pipeline: Pipeline, tol: float = 1e-10,
                     max_iter: int = CROSSVAL_MAX_ITER,
                     workers: int = 1) -> PressMatrix:
    """Full leave-one-out PRESS matrix for one preprocessing pipeline."""
    i = spectra.n_spectra
    if i < 4:
        raise TooFewSpectra(
            f"leave-one-out over 1..i-2 components needs i >= 4 spectra, got {i}"
        )
    if conc.n_samples != i:
        raise ShapeMismatch(
            f"{conc.n_samples} concentration columns for {i} spectra"
        )

    # every implemented step is per-spectrum, so preprocessing the whole set
    # once is identical to preprocessing each fold separately
    try:
        processed = apply_pipeline(spectra, pipeline)
    except SpecselError as exc:
        raise FoldPreprocessFailure(
            f"pipeline {pipeline.name!r} failed: {exc}"
        ) from exc

    k_max = i - 2
    k_possible = min(k_max, processed.n_channels)

    def evaluate_fold(n: int):
        train_idx = [r for r in range(i) if r != n]
        train = processed.subset(train_idx)
        train_conc = conc.select_columns(train_idx)
        held = processed.subset([n])
        truth = conc.matrix[:, [n]]
        row = np.full(k_max, np.nan)
        notes = []
        try:
            model = nipals_fit(train, k_possible, tol=tol, max_iter=max_iter)
        except NoConvergence as exc:
            # a stalled component (near-tied variance directions) limits this
            # fold the same way rank deficiency does: keep what converged
            model = exc.model
            notes.append(
                f"fold {processed.labels[n]!r}: component {exc.component} did "
                f"not converge; columns beyond {model.n_components} recorded "
                f"as NaN"
            )
        k_have = model.n_components
        if k_have < k_max and not notes:
            notes.append(
                f"fold {processed.labels[n]!r}: only {k_have} of {k_max} "
                f"components available; later columns recorded as NaN"
            )
        negatives = 0
        for m in range(1, k_have + 1):
            try:
                fold_model = pcr_fit(truncate(model, m), train_conc)
            except SingularScores:
                notes.append(
                    f"fold {processed.labels[n]!r}: singular scores at "
                    f"{m} components; column recorded as NaN"
                )
                continue
            estimate = pcr_predict(fold_model, held)
            if np.any(estimate < 0):
                negatives += 1
            row[m - 1] = press(estimate, truth)
        if negatives:
            notes.append(
                f"fold {processed.labels[n]!r}: negative predicted "
                f"concentrations at {negatives} PC count(s)"
            )
        return row, notes

    results = run_indexed(evaluate_fold, i, workers=workers)
    values = np.vstack([row for row, _ in results])
    notes = tuple(note for _, fold_notes in results for note in fold_notes)
    return PressMatrix(values, pipeline.name, spectra.labels, notes)
