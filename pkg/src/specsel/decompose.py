"""Iterative principal component extraction (NIPALS) and projection.

Components are computed one at a time: alternate score/loading regressions
until the score vector settles, subtract the converged component, repeat on
the residual. The leading m components of a k-component fit are therefore
bit-identical to an m-component fit, which cross-validation exploits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AxisMismatch, BadOrder, NoConvergence
from .spectra import SpectraSet

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 500
RANK_EPS = 1e-12


@dataclass(frozen=True)
class PcaModel:
    """Centered decomposition X = scores @ loadings.T + residual.

    loadings columns are unit-norm and mutually orthogonal; each column's
    largest-magnitude entry is positive so refits are bit-comparable.
    ``rank_deficient`` is set when the residual ran out before the requested
    component count was reached (the model is truncated, not an error).
    """

    axis: np.ndarray
    mean_spectrum: np.ndarray
    loadings: np.ndarray            # j x k
    scores: np.ndarray              # i x k
    explained_variance: np.ndarray  # k
    residual_fro: float
    total_center_ss: float
    rank_deficient: bool = False

    @property
    def n_components(self) -> int:
        return self.loadings.shape[1]


def _fix_sign(loading: np.ndarray, score: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    peak = int(np.argmax(np.abs(loading)))
    if loading[peak] < 0:
        return -loading, -score
    return loading, score


def nipals_fit(spectra: SpectraSet, k: int, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER) -> PcaModel:
    """Extract the leading k principal components of the centered set.

    Raises NoConvergence (carrying the partial model) if a component fails
    to settle within max_iter iterations. If the residual norm falls below
    RANK_EPS relative to the centered matrix before k components are found,
    the model is truncated and flagged rank_deficient.
    """
    i, j = spectra.matrix.shape
    if not 1 <= k <= min(i - 1, j):
        raise BadOrder(
            f"component count must satisfy 1 <= k <= min(i-1, j) = "
            f"{min(i - 1, j)}, got {k}"
        )
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if max_iter < 10:
        raise ValueError(f"max_iter must be >= 10, got {max_iter}")

    mean_spectrum = spectra.matrix.mean(axis=0)
    residual = spectra.matrix - mean_spectrum
    total_ss = float(np.sum(residual * residual))
    norm0 = np.sqrt(total_ss)

    loadings = np.zeros((j, k))
    scores = np.zeros((i, k))
    explained = np.zeros(k)
    rank_deficient = False
    n_done = 0

    for comp in range(k):
        if np.linalg.norm(residual) < RANK_EPS * max(norm0, 1.0):
            rank_deficient = True
            break
        t = residual[:, int(np.argmax(residual.var(axis=0)))].copy()
        converged = False
        for _ in range(max_iter):
            p = residual.T @ t
            p /= np.linalg.norm(p)
            t_new = residual @ p
            if np.linalg.norm(t_new - t) <= tol * np.linalg.norm(t_new):
                t = t_new
                converged = True
                break
            t = t_new
        if not converged:
            partial = _build_model(spectra.axis, mean_spectrum,
                                   loadings[:, :n_done], scores[:, :n_done],
                                   explained[:n_done], residual, total_ss,
                                   rank_deficient=False)
            raise NoConvergence(
                f"component {comp + 1} did not converge within {max_iter} "
                f"iterations (tol {tol:g})",
                component=comp + 1, model=partial,
            )
        p, t = _fix_sign(p, t)
        residual = residual - np.outer(t, p)
        loadings[:, comp] = p
        scores[:, comp] = t
        explained[comp] = (t @ t) / total_ss if total_ss > 0 else 0.0
        n_done += 1

    return _build_model(spectra.axis, mean_spectrum, loadings[:, :n_done],
                        scores[:, :n_done], explained[:n_done], residual,
                        total_ss, rank_deficient)


def _build_model(axis, mean_spectrum, loadings, scores, explained, residual,
                 total_ss, rank_deficient) -> PcaModel:
    return PcaModel(
        axis=axis,
        mean_spectrum=mean_spectrum,
        loadings=loadings,
        scores=scores,
        explained_variance=explained,
        residual_fro=float(np.linalg.norm(residual)),
        total_center_ss=total_ss,
        rank_deficient=rank_deficient,
    )


def project(model: PcaModel, new_set: SpectraSet) -> np.ndarray:
    """Scores of new spectra in the model basis: (X - mean) @ loadings."""
    if new_set.axis.shape != model.axis.shape or not np.array_equal(
            new_set.axis, model.axis):
        raise AxisMismatch(
            "new spectra are not on the model's training axis"
        )
    return (new_set.matrix - model.mean_spectrum) @ model.loadings


def truncate(model: PcaModel, m: int) -> PcaModel:
    """Model restricted to its leading m components."""
    if not 1 <= m <= model.n_components:
        raise BadOrder(
            f"truncation must satisfy 1 <= m <= {model.n_components}, got {m}"
        )
    if m == model.n_components:
        return model
    kept_ss = float(np.sum(model.scores[:, :m] ** 2))
    residual_sq = max(model.total_center_ss - kept_ss, 0.0)
    # contiguous copies: strided slices can take a different BLAS path and
    # break bit-reproducibility against a direct m-component fit
    return PcaModel(
        axis=model.axis,
        mean_spectrum=model.mean_spectrum,
        loadings=np.ascontiguousarray(model.loadings[:, :m]),
        scores=np.ascontiguousarray(model.scores[:, :m]),
        explained_variance=model.explained_variance[:m],
        residual_fro=float(np.sqrt(residual_sq)),
        total_center_ss=model.total_center_ss,
        rank_deficient=False,
    )
