"""End-to-end qualification of candidate preprocessing pipelines.

Every candidate is cross-validated into a PRESS matrix and put through the
significance gate. Candidates that pass are compared by their PRESS sum at
their own optimal component count and the smallest wins; candidates that
fail the gate can never displace a passing one, no matter how small their
error looks. If nothing passes, the best non-significant candidate is
returned with an explicit alert so callers can branch on it.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, replace

import numpy as np

from ._parallel import run_indexed
from .crossval import CROSSVAL_MAX_ITER, PressMatrix, loo_press_matrix
from .decompose import nipals_fit, project
from .errors import AllCandidatesFailed, BadOrder, ShapeMismatch, SpecselError
from .preprocess import Pipeline, apply_pipeline
from .regress import PcrModel, pcr_fit, press
from .significance import PcVerdict, select_optimal_pc
from .spectra import ConcentrationSet, SpectraSet

NO_SIGNIFICANCE_ALERT = (
    "no candidate pipeline reached statistical significance; the returned "
    "choice is only the smallest PRESS sum and should be treated with caution"
)


@dataclass(frozen=True)
class CandidateResult:
    """Verdict (or failure) for one candidate pipeline."""

    pipeline_name: str
    verdict: PcVerdict | None
    press_matrix: PressMatrix | None
    sum_press_at_optimal: float | None
    error: str | None
    wall_time_s: float

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class SelectionReport:
    """Full audit of a pipeline-selection run."""

    entries: tuple[CandidateResult, ...]
    chosen_pipeline: str
    chosen_pc: int
    chosen_significant: bool
    alpha: float
    log_press: bool
    alerts: tuple[str, ...]


def select_method(spectra: SpectraSet, conc: ConcentrationSet,
                  candidates: list[Pipeline], alpha: float = 0.05,
                  log_press: bool = False, workers: int = 1,
                  tol: float = 1e-10,
                  max_iter: int = CROSSVAL_MAX_ITER) -> SelectionReport:
    """Evaluate candidate pipelines and choose the qualified best.

    A candidate that raises anywhere in its evaluation becomes a failed
    entry instead of aborting the run; only when every candidate fails is
    AllCandidatesFailed raised.
    """
    if not 0.0 < alpha < 1.0:
        raise SpecselError(f"alpha must be in (0, 1), got {alpha}")
    if not candidates:
        raise AllCandidatesFailed("no candidate pipelines supplied")

    def evaluate(index: int) -> CandidateResult:
        pipeline = candidates[index]
        started = time.perf_counter()
        try:
            matrix = loo_press_matrix(spectra, conc, pipeline, tol=tol,
                                      max_iter=max_iter)
            verdict = select_optimal_pc(matrix, alpha=alpha,
                                        log_transform=log_press)
        except SpecselError as exc:
            return CandidateResult(
                pipeline_name=pipeline.name, verdict=None, press_matrix=None,
                sum_press_at_optimal=None,
                error=f"{type(exc).__name__}: {exc}",
                wall_time_s=time.perf_counter() - started,
            )
        return CandidateResult(
            pipeline_name=pipeline.name, verdict=verdict, press_matrix=matrix,
            sum_press_at_optimal=float(verdict.sum_press[verdict.optimal_pc - 1]),
            error=None,
            wall_time_s=time.perf_counter() - started,
        )

    entries = run_indexed(evaluate, len(candidates), workers=workers)
    alerts: list[str] = []
    for entry in entries:
        if entry.ok:
            alerts.extend(
                f"{entry.pipeline_name}: {note}"
                for note in (*entry.press_matrix.notes, *entry.verdict.notes)
            )
        else:
            alerts.append(f"candidate {entry.pipeline_name} failed: {entry.error}")

    usable = [e for e in entries if e.ok]
    if not usable:
        raise AllCandidatesFailed(
            "every candidate pipeline failed: "
            + "; ".join(e.error for e in entries if e.error)
        )
    significant = [e for e in usable if e.verdict.significant]
    pool = significant if significant else usable
    best = min(pool, key=lambda e: e.sum_press_at_optimal)
    ties = [e.pipeline_name for e in pool
            if e is not best and e.sum_press_at_optimal == best.sum_press_at_optimal]
    if ties:
        alerts.append(
            f"tie on PRESS sum between {best.pipeline_name} and "
            f"{', '.join(ties)}; kept the earlier candidate"
        )
    if not significant:
        alerts.append(NO_SIGNIFICANCE_ALERT)
    return SelectionReport(
        entries=tuple(entries),
        chosen_pipeline=best.pipeline_name,
        chosen_pc=best.verdict.optimal_pc,
        chosen_significant=bool(significant),
        alpha=alpha,
        log_press=log_press,
        alerts=tuple(alerts),
    )


def train_final(spectra: SpectraSet, conc: ConcentrationSet,
                pipeline: Pipeline, pc_count: int, tol: float = 1e-10,
                max_iter: int = CROSSVAL_MAX_ITER) -> PcrModel:
    """Rebuild the model on the full set at the selected component count."""
    if pc_count < 1:
        raise BadOrder(f"component count must be >= 1, got {pc_count}")
    if pc_count > spectra.n_spectra - 1:
        raise BadOrder(
            f"component count {pc_count} exceeds i-1 = {spectra.n_spectra - 1}"
        )
    processed = apply_pipeline(spectra, pipeline)
    pca = nipals_fit(processed, pc_count, tol=tol, max_iter=max_iter)
    model = pcr_fit(pca, conc)
    return replace(model, pipeline_name=pipeline.name)


@dataclass(frozen=True)
class HoldoutEvaluation:
    """Residual sums of squares of a model truncated to 1..k components."""

    rss: np.ndarray          # k
    per_species: np.ndarray  # q x k
    species: tuple[str, ...]

    @property
    def best_pc(self) -> int:
        return int(np.argmin(self.rss)) + 1


def evaluate_holdout(model: PcrModel, holdout: SpectraSet,
                     truth: ConcentrationSet) -> HoldoutEvaluation:
    """True-error curve over component counts on a held-out set.

    The model's own pipeline is NOT applied here; pass spectra that are
    already preprocessed the same way as the training set (the CLI does
    this automatically).
    """
    if truth.n_samples != holdout.n_spectra:
        raise ShapeMismatch(
            f"{truth.n_samples} truth columns for {holdout.n_spectra} spectra"
        )
    if tuple(truth.species) != tuple(model.species):
        raise ShapeMismatch(
            f"truth species {list(truth.species)} != model species "
            f"{list(model.species)}"
        )
    scores = project(model.pca, holdout)   # r x k, raises AxisMismatch
    k = model.n_components
    q = model.n_species
    rss = np.empty(k)
    per_species = np.empty((q, k))
    for m in range(1, k + 1):
        estimate = (model.coeffs[:, :m] @ scores[:, :m].T
                    + model.mean_conc[:, None])
        diff = estimate - truth.matrix
        per_species[:, m - 1] = np.sum(diff * diff, axis=1)
        rss[m - 1] = press(estimate, truth.matrix)
    return HoldoutEvaluation(rss=rss, per_species=per_species,
                             species=model.species)


# --- report serialization -------------------------------------------------------

def dataset_digest(spectra: SpectraSet, conc: ConcentrationSet) -> str:
    """Stable fingerprint of the training inputs."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(spectra.axis).tobytes())
    h.update(np.ascontiguousarray(spectra.matrix).tobytes())
    h.update("\x1f".join(spectra.labels).encode("utf-8"))
    h.update(np.ascontiguousarray(conc.matrix).tobytes())
    h.update("\x1f".join(conc.species).encode("utf-8"))
    return h.hexdigest()


def _json_num(value: float):
    return None if np.isnan(value) else float(value)


def _boxstats_payload(verdict: PcVerdict) -> list[dict]:
    return [
        {
            "pc": b.pc, "q1": _json_num(b.q1), "median": _json_num(b.median),
            "q3": _json_num(b.q3), "lo_whisker": _json_num(b.lo_whisker),
            "hi_whisker": _json_num(b.hi_whisker),
            "outliers": list(b.outliers), "n_valid": b.n_valid,
        }
        for b in verdict.boxplot
    ]


def _entry_payload(entry: CandidateResult) -> dict:
    payload: dict = {"pipeline": entry.pipeline_name, "ok": entry.ok}
    if not entry.ok:
        payload["error"] = entry.error
        return payload
    verdict = entry.verdict
    anova = verdict.anova
    payload.update({
        "significant": verdict.significant,
        "optimal_pc": verdict.optimal_pc,
        "candidate_set": list(verdict.candidate_set),
        "sum_press_at_optimal": entry.sum_press_at_optimal,
        "anova": {
            "sst": anova.sst,
            "sse": anova.sse,
            "f": anova.f_statistic,
            "p_value": anova.p_value,
            "df_treat": anova.df_treat,
            "df_error": anova.df_error,
            "group_means": [None if np.isnan(v) else float(v)
                            for v in anova.group_means],
            "log_transformed": anova.log_transformed,
        },
        "sum_press": [None if np.isnan(v) else float(v)
                      for v in verdict.sum_press],
        "pairwise_p_vs_worst": {str(pc): p for pc, p
                                in sorted(verdict.pairwise_p.items())},
        "boxplot": _boxstats_payload(verdict),
        "notes": list(verdict.notes),
    })
    return payload


def report_payload(report: SelectionReport, inputs: dict | None = None,
                   include_timing: bool = False) -> dict:
    """JSON-ready dict for a selection report.

    Timing is opt-in so that default reports are byte-reproducible across
    runs and thread counts.
    """
    payload: dict = {
        "report": "specsel-selection",
        "version": 1,
        "alpha": report.alpha,
        "log_press": report.log_press,
    }
    if inputs:
        payload["inputs"] = dict(sorted(inputs.items()))
    payload["candidates"] = [_entry_payload(e) for e in report.entries]
    if include_timing:
        for entry, cand in zip(report.entries, payload["candidates"]):
            cand["wall_time_s"] = entry.wall_time_s
    payload["chosen_pipeline"] = report.chosen_pipeline
    payload["chosen_pc"] = report.chosen_pc
    payload["chosen_significant"] = report.chosen_significant
    payload["alerts"] = list(report.alerts)
    return payload


def write_report(path, report: SelectionReport, inputs: dict | None = None,
                 include_timing: bool = False) -> None:
    payload = report_payload(report, inputs, include_timing)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
