"""Spectral pre-treatment operations and their composition into pipelines.

Every operation is a pure function of one spectrum (plus the axis where it
matters), so applying a pipeline to a set is row-by-row with no coupling
between spectra. Pipelines have a canonical text form,
``step(arg,...)|step(arg,...)``, e.g. ``baseline_als(100000,0.01,10)|rnv(75)``;
the empty pipeline is spelled ``identity``. Two pipelines are equal iff their
canonical names are equal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .errors import (
    BadOrder,
    DegenerateSubset,
    NonpositivePeak,
    NonuniformAxis,
    PipelineSyntaxError,
    SpecselError,
    WindowOutsideAxis,
    WindowTooLarge,
    ZeroVariance,
)
from .spectra import SpectraSet


MIN_ALS_CHANNELS = 8


# --- single-spectrum operations -----------------------------------------------

def snv(spectrum) -> np.ndarray:
    """Center by the mean and scale by the sample standard deviation."""
    x = np.asarray(spectrum, dtype=float)
    if x.size < 2:
        raise ZeroVariance("need at least 2 points for variate scaling")
    sd = x.std(ddof=1)
    if sd == 0.0:
        raise ZeroVariance("constant spectrum has no variance to scale by")
    return (x - x.mean()) / sd


def rnv(spectrum, percentile: float) -> np.ndarray:
    """Percentile-based variant of snv, insensitive to high outliers.

    Centers on the requested percentile (linear interpolation between order
    statistics) and scales by the sample standard deviation of the values at
    or below it. Percentile 100 degenerates to centering on the maximum and
    scaling by the full-vector deviation.
    """
    if not 0.0 < percentile <= 100.0:
        raise DegenerateSubset(f"percentile must be in (0, 100], got {percentile}")
    x = np.asarray(spectrum, dtype=float)
    pct = np.percentile(x, percentile)
    subset = x[x <= pct]
    if subset.size < 2:
        raise DegenerateSubset(
            f"only {subset.size} point(s) at or below the {percentile} percentile"
        )
    sd = subset.std(ddof=1)
    if sd == 0.0:
        raise DegenerateSubset(
            f"zero spread at or below the {percentile} percentile"
        )
    return (x - pct) / sd


def _savgol_design(window: int, polyorder: int) -> np.ndarray:
    half = window // 2
    offsets = np.arange(-half, half + 1, dtype=float)
    return np.vander(offsets, polyorder + 1, increasing=True)


def savitzky_golay(spectrum, window: int, polyorder: int, deriv: int = 0,
                   delta: float = 1.0) -> np.ndarray:
    """Moving-window least-squares polynomial smoothing / differentiation.

    Interior points take the deriv-th derivative of the local fit at the
    window center. The first and last half-windows are filled by fitting the
    first/last full window once and evaluating that polynomial at the
    off-center positions, so the output keeps the input length. Derivatives
    are scaled by ``delta**deriv`` (the channel spacing).
    """
    if window % 2 == 0 or window < 5:
        raise BadOrder(f"window must be odd and >= 5, got {window}")
    if not 0 <= polyorder < window:
        raise BadOrder(f"polyorder must satisfy 0 <= polyorder < window, got {polyorder}")
    if not 0 <= deriv <= polyorder:
        raise BadOrder(f"deriv must satisfy 0 <= deriv <= polyorder, got {deriv}")
    x = np.asarray(spectrum, dtype=float)
    j = x.size
    if window > j:
        raise WindowTooLarge(f"window {window} exceeds {j} channels")

    half = window // 2
    design = _savgol_design(window, polyorder)
    # pinv rows are the least-squares polynomial coefficients as linear
    # functionals of the window samples
    pinv = np.linalg.pinv(design)
    scale = math.factorial(deriv) / delta ** deriv
    kernel = pinv[deriv] * scale

    out = np.empty_like(x)
    windows = np.lib.stride_tricks.sliding_window_view(x, window)
    out[half:j - half] = windows @ kernel

    # derivative of the fitted polynomial, evaluated off-center
    def poly_deriv_at(coeffs: np.ndarray, u: np.ndarray) -> np.ndarray:
        acc = np.zeros_like(u)
        for m in range(deriv, polyorder + 1):
            factor = math.factorial(m) / math.factorial(m - deriv)
            acc += coeffs[m] * factor * u ** (m - deriv)
        return acc / delta ** deriv

    left_coeffs = pinv @ x[:window]
    out[:half] = poly_deriv_at(left_coeffs, np.arange(-half, 0, dtype=float))
    right_coeffs = pinv @ x[j - window:]
    out[j - half:] = poly_deriv_at(right_coeffs, np.arange(1, half + 1, dtype=float))
    return out


def _uniform_spacing(axis: np.ndarray) -> float:
    steps = np.diff(axis)
    mean_step = steps.mean()
    if mean_step <= 0:
        raise NonuniformAxis("axis must be increasing")
    if (steps.max() - steps.min()) > 1e-3 * mean_step:
        raise NonuniformAxis(
            "channel spacing varies by more than 0.1%; differentiation "
            "requires a uniform axis"
        )
    return float(mean_step)


def derivative(spectrum, axis, order: int) -> np.ndarray:
    """Finite-difference derivative along the wavenumber axis.

    Central differences at interior points, one-sided at the two edges;
    order 1 removes a constant baseline, order 2 a linear one.
    """
    if order not in (1, 2):
        raise BadOrder(f"derivative order must be 1 or 2, got {order}")
    x = np.asarray(spectrum, dtype=float)
    ax = np.asarray(axis, dtype=float)
    if x.size != ax.size:
        raise NonuniformAxis(f"{x.size} intensities for {ax.size} axis points")
    h = _uniform_spacing(ax)
    if order == 1:
        return np.gradient(x, h, edge_order=1)
    out = np.empty_like(x)
    out[1:-1] = (x[:-2] - 2.0 * x[1:-1] + x[2:]) / h ** 2
    out[0] = (x[0] - 2.0 * x[1] + x[2]) / h ** 2
    out[-1] = (x[-3] - 2.0 * x[-2] + x[-1]) / h ** 2
    return out


def baseline_als(spectrum, lam: float = 1e5, p: float = 0.01,
                 iterations: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Asymmetric least-squares baseline estimate.

    Smoothness comes from a second-difference penalty (weight ``lam``);
    points above the running estimate get the small weight ``p`` so the
    baseline hugs the bottom of the spectrum. Returns (corrected, baseline).
    """
    if lam <= 0:
        raise BadOrder(f"lambda must be > 0, got {lam}")
    if not 0.0 < p < 1.0:
        raise BadOrder(f"asymmetry p must be in (0, 1), got {p}")
    if iterations < 1:
        raise BadOrder(f"iterations must be >= 1, got {iterations}")
    x = np.asarray(spectrum, dtype=float)
    j = x.size
    if j < MIN_ALS_CHANNELS:
        raise WindowTooLarge(
            f"baseline estimation needs >= {MIN_ALS_CHANNELS} channels, got {j}"
        )
    diff = sparse.diags([1.0, -2.0, 1.0], [0, -1, -2], shape=(j, j - 2), format="csc")
    penalty = lam * (diff @ diff.T)
    weights = np.ones(j)
    baseline = np.zeros(j)
    for _ in range(iterations):
        system = sparse.diags(weights, 0, format="csc") + penalty
        baseline = spsolve(system, weights * x)
        weights = np.where(x > baseline, p, 1.0 - p)
    return x - baseline, baseline


def despike(spectrum, window: int = 7, threshold: float = 8.0) -> np.ndarray:
    """Replace cosmic-ray spikes by the running median.

    A point is a spike when it sits more than ``threshold`` local MADs away
    from the running median of its window; everything else is passed through
    bit-identically. Windows are truncated at the edges.
    """
    if window % 2 == 0 or window < 3:
        raise BadOrder(f"window must be odd and >= 3, got {window}")
    if threshold <= 0:
        raise BadOrder(f"threshold must be > 0, got {threshold}")
    x = np.asarray(spectrum, dtype=float)
    j = x.size
    half = window // 2
    medians = np.empty(j)
    mads = np.empty(j)
    if j >= window:
        win = np.lib.stride_tricks.sliding_window_view(x, window)
        med = np.median(win, axis=1)
        medians[half:j - half] = med
        mads[half:j - half] = np.median(np.abs(win - med[:, None]), axis=1)
    for n in list(range(min(half, j))) + list(range(max(j - half, 0), j)):
        win = x[max(0, n - half):n + half + 1]
        med = np.median(win)
        medians[n] = med
        mads[n] = np.median(np.abs(win - med))
    spikes = np.abs(x - medians) > threshold * mads
    out = x.copy()
    out[spikes] = medians[spikes]
    return out


def peak_normalize(spectrum, axis, reference_wavenumber: float,
                   half_width: float = 10.0) -> np.ndarray:
    """Scale so the maximum inside the reference-peak window becomes 1."""
    if half_width <= 0:
        raise BadOrder(f"half_width must be > 0, got {half_width}")
    x = np.asarray(spectrum, dtype=float)
    ax = np.asarray(axis, dtype=float)
    lo, hi = reference_wavenumber - half_width, reference_wavenumber + half_width
    if lo < ax[0] or hi > ax[-1]:
        raise WindowOutsideAxis(
            f"window [{lo:g}, {hi:g}] cm-1 not inside axis "
            f"[{ax[0]:g}, {ax[-1]:g}] cm-1"
        )
    mask = (ax >= lo) & (ax <= hi)
    if not mask.any():
        raise WindowOutsideAxis(
            f"no channel inside window [{lo:g}, {hi:g}] cm-1"
        )
    peak = x[mask].max()
    if peak <= 0:
        raise NonpositivePeak(
            f"maximum inside window [{lo:g}, {hi:g}] cm-1 is {peak:.6g}"
        )
    return x / peak


# --- pipeline steps -------------------------------------------------------------

def _fmt_param(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    f = float(value)
    if f.is_integer() and abs(f) < 1e16:
        return str(int(f))
    return repr(f)


def _as_int(value, what: str) -> int:
    f = float(value)
    if not f.is_integer():
        raise PipelineSyntaxError(f"{what} must be an integer, got {value!r}")
    return int(f)


@dataclass(frozen=True)
class PipelineStep:
    """One validated preprocessing step; params are positional and typed."""

    kind: str
    params: tuple

    @property
    def name(self) -> str:
        if not self.params:
            return self.kind
        return f"{self.kind}({','.join(_fmt_param(v) for v in self.params)})"

    def apply(self, intensities: np.ndarray, axis: np.ndarray) -> np.ndarray:
        return _STEP_APPLY[self.kind](intensities, axis, self.params)


def _validate_step(kind: str, args: tuple) -> tuple:
    if kind == "snv":
        if args:
            raise PipelineSyntaxError("snv takes no parameters")
        return ()
    if kind == "rnv":
        if len(args) != 1:
            raise PipelineSyntaxError("rnv takes exactly one parameter (percentile)")
        pct = float(args[0])
        if not 0.0 < pct <= 100.0:
            raise PipelineSyntaxError(f"rnv percentile must be in (0, 100], got {pct}")
        return (pct,)
    if kind == "savgol":
        if len(args) not in (2, 3):
            raise PipelineSyntaxError("savgol takes (window, polyorder[, deriv])")
        window = _as_int(args[0], "savgol window")
        polyorder = _as_int(args[1], "savgol polyorder")
        deriv = _as_int(args[2], "savgol deriv") if len(args) == 3 else 0
        if window % 2 == 0 or window < 5:
            raise PipelineSyntaxError(f"savgol window must be odd and >= 5, got {window}")
        if not 0 <= polyorder < window:
            raise PipelineSyntaxError(f"savgol polyorder must be < window, got {polyorder}")
        if not 0 <= deriv <= polyorder:
            raise PipelineSyntaxError(f"savgol deriv must be <= polyorder, got {deriv}")
        return (window, polyorder, deriv)
    if kind == "derivative":
        if len(args) != 1:
            raise PipelineSyntaxError("derivative takes exactly one parameter (order)")
        order = _as_int(args[0], "derivative order")
        if order not in (1, 2):
            raise PipelineSyntaxError(f"derivative order must be 1 or 2, got {order}")
        return (order,)
    if kind == "baseline_als":
        if len(args) > 3:
            raise PipelineSyntaxError("baseline_als takes (lambda[, p[, iterations]])")
        lam = float(args[0]) if len(args) >= 1 else 1e5
        p = float(args[1]) if len(args) >= 2 else 0.01
        iterations = _as_int(args[2], "baseline_als iterations") if len(args) >= 3 else 10
        if lam <= 0:
            raise PipelineSyntaxError(f"baseline_als lambda must be > 0, got {lam}")
        if not 0.0 < p < 1.0:
            raise PipelineSyntaxError(f"baseline_als p must be in (0, 1), got {p}")
        if iterations < 1:
            raise PipelineSyntaxError("baseline_als iterations must be >= 1")
        return (lam, p, iterations)
    if kind == "despike":
        if len(args) > 2:
            raise PipelineSyntaxError("despike takes (window[, threshold])")
        window = _as_int(args[0], "despike window") if len(args) >= 1 else 7
        threshold = float(args[1]) if len(args) >= 2 else 8.0
        if window % 2 == 0 or window < 3:
            raise PipelineSyntaxError(f"despike window must be odd and >= 3, got {window}")
        if threshold <= 0:
            raise PipelineSyntaxError(f"despike threshold must be > 0, got {threshold}")
        return (window, threshold)
    if kind == "peak_normalize":
        if len(args) not in (1, 2):
            raise PipelineSyntaxError(
                "peak_normalize takes (reference_wavenumber[, half_width])"
            )
        ref = float(args[0])
        hw = float(args[1]) if len(args) == 2 else 10.0
        if hw <= 0:
            raise PipelineSyntaxError(f"peak_normalize half_width must be > 0, got {hw}")
        return (ref, hw)
    raise PipelineSyntaxError(f"unknown preprocessing step {kind!r}")


_STEP_APPLY = {
    "snv": lambda x, ax, p: snv(x),
    "rnv": lambda x, ax, p: rnv(x, p[0]),
    "savgol": lambda x, ax, p: savitzky_golay(
        x, p[0], p[1], p[2], delta=float(np.mean(np.diff(ax)))
    ),
    "derivative": lambda x, ax, p: derivative(x, ax, p[0]),
    "baseline_als": lambda x, ax, p: baseline_als(x, p[0], p[1], p[2])[0],
    "despike": lambda x, ax, p: despike(x, p[0], p[1]),
    "peak_normalize": lambda x, ax, p: peak_normalize(x, ax, p[0], p[1]),
}

_ALIASES = {
    "savitzky_golay": "savgol",
    "sg": "savgol",
}


def make_step(kind: str, *args) -> PipelineStep:
    canon = kind.strip().lower()
    canon = _ALIASES.get(canon, canon)
    return PipelineStep(canon, _validate_step(canon, tuple(args)))


@dataclass(frozen=True)
class Pipeline:
    """Ordered preprocessing steps with a canonical, parseable name."""

    steps: tuple[PipelineStep, ...] = ()

    @property
    def name(self) -> str:
        if not self.steps:
            return "identity"
        return "|".join(step.name for step in self.steps)

    def __str__(self) -> str:
        return self.name


IDENTITY = Pipeline(())


def parse_pipeline(text: str) -> Pipeline:
    """Parse ``step(arg,...)|step(arg,...)`` (case-insensitive) or ``identity``."""
    body = text.strip()
    if not body:
        raise PipelineSyntaxError("empty pipeline description")
    if body.lower() == "identity":
        return IDENTITY
    steps = []
    for part in body.split("|"):
        part = part.strip()
        if not part:
            raise PipelineSyntaxError(f"empty step in pipeline {text!r}")
        if "(" in part:
            if not part.endswith(")"):
                raise PipelineSyntaxError(f"unbalanced parentheses in step {part!r}")
            kind, arg_text = part[:-1].split("(", 1)
            arg_text = arg_text.strip()
            if arg_text:
                try:
                    args = tuple(float(a) for a in arg_text.split(","))
                except ValueError as exc:
                    raise PipelineSyntaxError(
                        f"cannot parse arguments of step {part!r}"
                    ) from exc
            else:
                args = ()
        else:
            kind, args = part, ()
        steps.append(make_step(kind, *args))
    return Pipeline(tuple(steps))


def apply_pipeline(spectra: SpectraSet, pipeline: Pipeline) -> SpectraSet:
    """Apply the steps in order to every spectrum; the axis never changes.

    The first failing step re-raises its error with the spectrum label and
    step name attached.
    """
    if not pipeline.steps:
        return spectra
    matrix = np.array(spectra.matrix, copy=True)
    for n in range(spectra.n_spectra):
        row = matrix[n]
        for step in pipeline.steps:
            try:
                row = step.apply(row, spectra.axis)
            except SpecselError as exc:
                raise type(exc)(
                    f"spectrum {spectra.labels[n]!r}, step {step.name}: {exc}"
                ) from exc
        matrix[n] = row
    return spectra.with_matrix(matrix)
