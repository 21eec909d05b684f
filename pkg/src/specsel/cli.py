"""Command-line interface.

Subcommands: validate, synth, crossval, select, train, predict. Exit codes
are machine-readable: 0 success, 2 input or validation failure, 3 when a
selection run had to fall back because no candidate pipeline reached
statistical significance.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import synth
from .crossval import loo_press_matrix
from .errors import SpecselError
from .preprocess import Pipeline, apply_pipeline, parse_pipeline
from .regress import load_model, pcr_predict, save_model
from .selector import (
    dataset_digest,
    select_method,
    train_final,
    write_report,
)
from .significance import boxplot_stats
from .spectra import (
    load_concentrations,
    load_spectra,
    save_concentrations,
    save_matrix,
    save_spectra,
)

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_NOT_SIGNIFICANT = 3

DEFAULT_ALPHA = 0.05

# candidate grid used when neither the config nor the command line lists any
DEFAULT_CANDIDATES = [
    "snv",
    "rnv(75)",
    "rnv(90)",
    "savgol(7,2,0)",
    "derivative(1)",
    "derivative(2)",
    "baseline_als(100000,0.01,10)",
    "despike(7,8)",
    "baseline_als(100000,0.01,10)|rnv(75)",
    "baseline_als(100000,0.01,10)|rnv(90)",
    "despike(7,8)|baseline_als(100000,0.01,10)",
    "savgol(7,2,0)|derivative(2)",
]


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecselError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(config, dict):
        raise SpecselError(f"config {path} must be a JSON object")
    return config


def _setting(args, config: dict, key: str, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_pair(spectra_path, conc_path):
    spectra = load_spectra(spectra_path)
    conc = load_concentrations(conc_path, labels=spectra.labels)
    return spectra, conc


def _candidate_pipelines(args, config: dict) -> list[Pipeline]:
    texts = list(getattr(args, "candidate", None) or [])
    if not texts:
        texts = list(config.get("candidates", []))
    if not texts:
        texts = list(DEFAULT_CANDIDATES)
    return [parse_pipeline(t) for t in texts]


# --- subcommands ----------------------------------------------------------------

def cmd_validate(args, config) -> int:
    spectra, conc = _load_pair(args.spectra, args.concentrations)
    print(f"i={spectra.n_spectra} j={spectra.n_channels} q={conc.n_species}")
    return EXIT_OK


def cmd_synth(args, config) -> int:
    seed = int(_setting(args, config, "seed", 0))
    n = int(_setting(args, config, "n", 40))
    recipe_cfg = config.get("recipe")
    if recipe_cfg:
        recipe = _recipe_from_dict(recipe_cfg, seed)
        ranges = {s["name"]: tuple(s["conc_range"])
                  for s in recipe_cfg.get("species", []) if "conc_range" in s}
        conc = _phantom_concentrations(recipe, n, seed, ranges)
        spectra = synth.generate(recipe, conc)
    else:
        spectra, conc = synth.tears_phantom(n, seed)
    save_spectra(args.out_spectra, spectra)
    save_concentrations(args.out_concentrations, conc, spectra.labels)
    print(f"wrote {spectra.n_spectra} spectra x {spectra.n_channels} channels")
    return EXIT_OK


def _recipe_from_dict(cfg: dict, seed: int) -> synth.SynthRecipe:
    species = tuple(
        synth.SpeciesSpec(
            name=s["name"],
            peaks=tuple(tuple(p) for p in s["peaks"]),
            response_coeff=float(s.get("response_coeff", 1.0)),
            unit=s.get("unit", "mg/mL"),
        )
        for s in cfg.get("species", [])
    )
    baseline = None
    if "baseline" in cfg:
        b = cfg["baseline"]
        baseline = synth.BaselineSpec(
            kind=b.get("kind", "exp_decay"),
            coeffs=tuple(b.get("coeffs", (1.0, 600.0))),
            scale_range=tuple(b.get("scale_range", (1.0, 1.0))),
        )
    return synth.SynthRecipe(
        axis_start=float(cfg.get("axis_start", 400.0)),
        axis_stop=float(cfg.get("axis_stop", 1800.0)),
        axis_step=float(cfg.get("axis_step", 2.0)),
        species=species,
        baseline=baseline,
        noise_sigma=float(cfg.get("noise_sigma", 0.0)),
        spike_rate=float(cfg.get("spike_rate", 0.0)),
        spike_amplitude=tuple(cfg.get("spike_amplitude", (5.0, 20.0))),
        drift_range=tuple(cfg.get("drift_range", (1.0, 1.0))),
        seed=seed,
    )


def _phantom_concentrations(recipe: synth.SynthRecipe, n: int, seed: int,
                            ranges: dict[str, tuple[float, float]]):
    from .spectra import ConcentrationSet

    rng = np.random.default_rng((seed, synth.CONC_STREAM))
    rows = [rng.uniform(*ranges.get(s.name, (0.0, 1.0)), n)
            for s in recipe.species]
    return ConcentrationSet(
        np.vstack(rows),
        species=tuple(s.name for s in recipe.species),
        units=tuple(s.unit for s in recipe.species),
    )


def cmd_crossval(args, config) -> int:
    spectra, conc = _load_pair(args.spectra, args.concentrations)
    pipeline = parse_pipeline(str(_setting(args, config, "pipeline", "identity")))
    workers = int(_setting(args, config, "threads", 1))
    matrix = loo_press_matrix(spectra, conc, pipeline, workers=workers)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    press_path = out_dir / "press_matrix.csv"
    save_matrix(press_path, matrix.values, matrix.column_headers(),
                row_labels=list(matrix.labels), row_label_header="held_out")
    box_path = out_dir / "boxplot.csv"
    _write_boxplot_csv(box_path, matrix)
    for note in matrix.notes:
        print(f"note: {note}")
    print(f"wrote {press_path} and {box_path}")
    return EXIT_OK


def _write_boxplot_csv(path, matrix) -> None:
    import csv as _csv

    stats = boxplot_stats(matrix)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["pc", "q1", "median", "q3", "lo_whisker",
                         "hi_whisker", "outliers"])
        for b in stats:
            writer.writerow([
                b.pc, f"{b.q1:.9g}", f"{b.median:.9g}", f"{b.q3:.9g}",
                f"{b.lo_whisker:.9g}", f"{b.hi_whisker:.9g}",
                ";".join(f"{v:.9g}" for v in b.outliers),
            ])


def cmd_select(args, config) -> int:
    spectra, conc = _load_pair(args.spectra, args.concentrations)
    candidates = _candidate_pipelines(args, config)
    alpha = float(_setting(args, config, "alpha", DEFAULT_ALPHA))
    log_press = bool(_setting(args, config, "log_press", False))
    workers = int(_setting(args, config, "threads", 1))
    report = select_method(spectra, conc, candidates, alpha=alpha,
                           log_press=log_press, workers=workers)
    inputs = {
        "spectra": str(args.spectra),
        "concentrations": str(args.concentrations),
        "spectra_sha256": _file_digest(args.spectra),
        "concentrations_sha256": _file_digest(args.concentrations),
        "dataset_digest": dataset_digest(spectra, conc),
        "i": spectra.n_spectra,
        "j": spectra.n_channels,
        "q": conc.n_species,
    }
    write_report(args.out, report, inputs=inputs,
                 include_timing=bool(args.timing))
    for alert in report.alerts:
        print(f"alert: {alert}", file=sys.stderr)
    print(f"chosen: {report.chosen_pipeline} with {report.chosen_pc} components"
          f" ({'significant' if report.chosen_significant else 'fallback'})")
    print(f"report: {args.out}")
    return EXIT_OK if report.chosen_significant else EXIT_NOT_SIGNIFICANT


def cmd_train(args, config) -> int:
    spectra, conc = _load_pair(args.spectra, args.concentrations)
    pipeline = parse_pipeline(str(_setting(args, config, "pipeline", "identity")))
    model = train_final(spectra, conc, pipeline, int(args.pc))
    save_model(args.out_model, model)
    print(f"wrote model {args.out_model} ({pipeline.name}, {args.pc} components)")
    return EXIT_OK


def cmd_predict(args, config) -> int:
    model = load_model(args.model)
    spectra = load_spectra(args.spectra)
    pipeline = parse_pipeline(model.pipeline_name)
    processed = apply_pipeline(spectra, pipeline)
    estimates = pcr_predict(model, processed)
    save_matrix(args.out, estimates, list(spectra.labels),
                row_labels=list(model.species), row_label_header="species")
    print(f"wrote predictions {args.out}")
    return EXIT_OK


# --- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specsel",
        description=(
            "Quantify analyte concentrations from spectra via principal "
            "component regression, with ANOVA-gated selection of the "
            "preprocessing pipeline and component count."
        ),
    )
    parser.add_argument("--config", help="JSON config file with defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a spectra/concentrations pair")
    p.add_argument("--spectra", required=True)
    p.add_argument("--concentrations", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth", help="generate a synthetic phantom data set")
    p.add_argument("--out-spectra", required=True)
    p.add_argument("--out-concentrations", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("crossval",
                       help="leave-one-out PRESS matrix for one pipeline")
    p.add_argument("--spectra", required=True)
    p.add_argument("--concentrations", required=True)
    p.add_argument("--pipeline")
    p.add_argument("--threads", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("select",
                       help="qualify candidate pipelines and pick the best")
    p.add_argument("--spectra", required=True)
    p.add_argument("--concentrations", required=True)
    p.add_argument("--candidate", action="append",
                   help="pipeline description; repeatable")
    p.add_argument("--alpha", type=float)
    p.add_argument("--log-press", dest="log_press", action="store_const",
                   const=True)
    p.add_argument("--threads", type=int)
    p.add_argument("--timing", action="store_true",
                   help="include wall times in the report (breaks "
                        "byte-reproducibility)")
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="train a final model on the full set")
    p.add_argument("--spectra", required=True)
    p.add_argument("--concentrations", required=True)
    p.add_argument("--pipeline")
    p.add_argument("--pc", type=int, required=True)
    p.add_argument("--out-model", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict concentrations of new spectra")
    p.add_argument("--model", required=True)
    p.add_argument("--spectra", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except SpecselError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
