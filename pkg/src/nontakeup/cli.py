"""Command-line front end.

Stages hand over delimited-text files through directories::

    nontakeup simulate   --out run/sim
    nontakeup select     --input run/sim --out run/sel
    nontakeup covariates --input run/sel run/sim --out run/cov
    nontakeup estimate   --input run/sel run/cov --out run/est
    nontakeup metrics    --input run/sim --out run/met
    nontakeup report     --input run/met run/est run/sel --out run/rep
    nontakeup montecarlo --out run/mc

Every stage writes ``manifest.json`` into its output directory.  Errors end
the process with a distinct exit status and one line on stderr of the form
``error: <code>: <message>``.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import hashlib
import json
import math
import os
import platform
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from . import __version__
from . import io
from .design import MODELS, estimation_frame, model_terms
from .estimator import EstimationResult, model_suite
from .exceptions import (
    ConfigurationError,
    MissingArtifactError,
    NonTakeUpError,
)
from .metrics import (
    covariate_means,
    density_export,
    gap_curve,
    metrics_frame,
    rate_table,
    sim_quality,
    subgroup_table,
    takeup_types,
)
from .policy import load_config, policy_from_config
from .rules import results_frame, simulate_population
from .selection import apply_cascade
from .spells import build_covariates
from .synthgen import SyntheticDGP, generate, replicate

CONFIG_DIR_ENV = "NONTAKEUP_CONFIG_DIR"
CONFIG_NAME = "config.yaml"
MANIFEST = "manifest.json"

EXIT_CODES = {
    "ok": 0,
    "error": 1,
    "usage": 2,
    "configuration": 3,
    "validation": 4,
    "schema": 5,
    "missing-artifact": 6,
    "domain": 7,
    "singular-design": 8,
    "non-convergence": 9,
    "undefined-rate": 10,
    "composition": 11,
}

PANEL, SPELLS, ENTITLEMENTS, TRUTH = "panel.csv", "spells.csv", "entitlements.csv", "truth.csv"
COVARIATES, LEDGER, FRAME = "covariates.csv", "selection_ledger.csv", "estimation_frame.csv"

# covariates summarised in the means table
MEAN_COLUMNS = (
    "relative_income_gap", "entitlement", "need_total", "female", "east", "home_owner",
    "child_le3", "disabled", "early_retirement", "other_benefit", "genpop",
)


class UsageError(NonTakeUpError):
    code = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- plumbing


def _resolve_config(path: Optional[str]) -> tuple[Optional[Path], dict]:
    """Explicit path, else ``$NONTAKEUP_CONFIG_DIR/config.yaml``, else the
    packaged default.  Relative paths that do not exist are also looked up
    in the configuration directory."""
    env_dir = os.environ.get(CONFIG_DIR_ENV)
    if path is None:
        if env_dir and (Path(env_dir) / CONFIG_NAME).exists():
            candidate = Path(env_dir) / CONFIG_NAME
        else:
            return None, load_config(None)
    else:
        candidate = Path(path)
        if not candidate.exists() and env_dir and not candidate.is_absolute():
            candidate = Path(env_dir) / candidate
        if not candidate.exists():
            raise ConfigurationError(f"configuration file not found: {path}")
    return candidate, load_config(candidate)


def _find(inputs: Sequence[str], name: str, required: bool = True) -> Optional[Path]:
    """First input that is ``name`` or a directory containing it."""
    for raw in inputs:
        p = Path(raw)
        if p.is_dir() and (p / name).exists():
            return p / name
        if p.is_file() and p.name == name:
            return p
    if required:
        raise MissingArtifactError(f"no {name} among inputs {list(inputs)}")
    return None


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    moment = dt.datetime.fromtimestamp(int(epoch), dt.timezone.utc) if epoch else dt.datetime.now(dt.timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


def _versions() -> dict:
    import scipy

    return {
        "nontakeup": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }


class _Stage:
    """Output directory bookkeeping for one subcommand."""

    def __init__(self, args, config_path: Optional[Path], options: dict):
        self.args = args
        self.out = Path(args.out)
        self.config_path = config_path
        self.options = options
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []

    def read(self, name: str, kind: Optional[str] = None, required: bool = True) -> Optional[pd.DataFrame]:
        path = _find(self.args.input or [], name, required)
        if path is None:
            return None
        self.inputs.append(path)
        return io.read_csv(path, kind)

    def write(self, frame: pd.DataFrame, name: str, index: bool = False) -> Path:
        path = self.out / name
        if index:
            frame = frame.reset_index()
        io.write_csv(frame, path)
        self.outputs.append(path)
        return path

    def write_json(self, data, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
        self.outputs.append(path)
        return path

    def _rel(self, path: Path) -> str:
        return os.path.relpath(path.resolve(), self.out.resolve())

    def manifest(self) -> Path:
        options = json.loads(json.dumps(self.options, sort_keys=True, default=_json_default))
        data = {
            "subcommand": self.args.command,
            "config": None if self.config_path is None else self._rel(self.config_path),
            "config_sha256": None if self.config_path is None else _sha256(self.config_path),
            "inputs": {self._rel(p): _sha256(p) for p in sorted(set(self.inputs))},
            "outputs": {p.name: _sha256(p) for p in sorted(set(self.outputs))},
            "seed": self.options.get("seed"),
            "options": options,
            "option_hash": hashlib.sha256(json.dumps(options, sort_keys=True).encode()).hexdigest(),
            "versions": _versions(),
            "created": _timestamp(),
        }
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / MANIFEST
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    if dataclasses.is_dataclass(value):
        return dataclasses.asdict(value)
    raise TypeError(f"not serialisable: {type(value).__name__}")


def _on_off(value: Optional[str], default: bool) -> bool:
    return default if value is None else value == "on"


def _models(arg: Optional[str], config: dict) -> list[str]:
    if arg is None or arg == "all":
        models = list(config.get("estimation", {}).get("models", MODELS)) if arg is None else list(MODELS)
    else:
        models = [arg.upper()]
    unknown = [m for m in models if m not in MODELS]
    if unknown:
        raise ConfigurationError(f"unknown models {unknown}")
    return models


def _dgp(config: dict, config_path: Optional[Path], seed: Optional[int]) -> SyntheticDGP:
    block = dict(config.get("synthetic") or {})
    if config_path is not None:
        block["config"] = str(config_path)
    if seed is not None:
        block["seed"] = seed
    return SyntheticDGP.from_mapping(block)


def _panel_inputs(stage: _Stage):
    panel = io.frame_to_panel(stage.read(PANEL, "panel"))
    ents = io.entitlements_from_frame(stage.read(ENTITLEMENTS, "entitlements"))
    keys = [(hh.household_id, hh.wave_year) for hh in panel]
    if keys != [(e.household_id, e.wave_year) for e in ents]:
        raise MissingArtifactError("entitlements do not align with the panel")
    return panel, ents


def _cpi(config: dict) -> dict[int, float]:
    return {y: float(p.cpi_index) for y, p in policy_from_config(config).items()}


# ---------------------------------------------------------------- stages


def cmd_simulate(args, config_path, config) -> _Stage:
    policy = policy_from_config(config)
    if args.input:
        stage = _Stage(args, config_path, {"source": "input"})
        panel = io.frame_to_panel(stage.read(PANEL, "panel"))
        spells = stage.read(SPELLS, "spells", required=False)
        ents = simulate_population(panel, policy)
        stage.write(io.panel_to_frame(panel), PANEL)
        if spells is not None:
            stage.write(spells, SPELLS)
    else:
        dgp = _dgp(config, config_path, args.seed)
        options = {"source": "synthetic", "seed": dgp.seed, "synthetic": {k: v for k, v in dgp.to_dict().items() if k != "config"}}
        stage = _Stage(args, config_path, options)
        data = generate(dgp, with_spells=True)
        panel, ents = data.panel, data.entitlements
        stage.write(io.panel_to_frame(panel), PANEL)
        stage.write(io.spells_to_frame(data.spells), SPELLS)
        stage.write(data.truth, TRUTH)
    stage.write(results_frame(ents), ENTITLEMENTS)
    return stage


def cmd_select(args, config_path, config) -> _Stage:
    filters = (config.get("selection") or {}).get("filters")
    stage = _Stage(args, config_path, {"filters": filters})
    panel, ents = _panel_inputs(stage)
    ledger, kept = apply_cascade(panel, ents, config={"filters": filters} if filters else None)
    keep = set(ledger.final_ids)
    stage.write(io.panel_to_frame(kept), PANEL)
    stage.write(results_frame([e for e in ents if (e.household_id, e.wave_year) in keep]), ENTITLEMENTS)
    stage.write(ledger.to_frame(), LEDGER, index=True)
    return stage


def cmd_covariates(args, config_path, config) -> _Stage:
    stage = _Stage(args, config_path, {})
    panel, ents = _panel_inputs(stage)
    spells = io.frame_to_spells(stage.read(SPELLS, "spells"))
    cov = build_covariates(panel, spells, _cpi(config), [e.need_total for e in ents], n_jobs=args.jobs)
    stage.write(cov, COVARIATES)
    return stage


def _result_files(stage: _Stage, name: str, result) -> None:
    if isinstance(result, Exception):
        stage.write_json({"model": name, "error": getattr(result, "code", "error"), "message": str(result)}, f"model_{name}.json")
        return
    stage.write_json(result.to_dict(), f"model_{name}.json")
    table = result.coef_table()
    table.index.name = "term"
    stage.write(table, f"coefficients_{name}.csv", index=True)
    stage.write(result.marginal_effects.table(), f"effects_{name}.csv", index=True)


def cmd_estimate(args, config_path, config) -> _Stage:
    est = dict(config.get("estimation") or {})
    models = _models(args.model, config)
    weighted = _on_off(args.weights, bool(est.get("weights", False)))
    nodes = args.nodes or int(est.get("nodes", 32))
    options = {
        "models": models, "weighted": weighted, "nodes": nodes,
        "quadrature": est.get("quadrature", "two-sided"), "kind": est.get("kind", "re"),
    }
    stage = _Stage(args, config_path, options)
    panel, ents = _panel_inputs(stage)
    needs_cov = any(model_terms(m) for m in models)
    cov = stage.read(COVARIATES, required=needs_cov)
    frame = estimation_frame(panel, ents, cov)
    eligible = np.array([e.eligible_ubii for e in ents], dtype=bool)
    frame = frame[eligible].reset_index(drop=True)
    stage.write(frame, FRAME)
    results = model_suite(
        frame, models, kind=options["kind"], weighted=weighted, nodes=nodes, quadrature=options["quadrature"]
    )
    for name, result in results.items():
        _result_files(stage, name, result)
    failed = [r for r in results.values() if isinstance(r, Exception)]
    stage.failure = failed[0] if failed else None
    return stage


def _metrics_weighted(args, config) -> bool:
    return _on_off(args.weights, bool((config.get("metrics") or {}).get("weights", True)))


def cmd_metrics(args, config_path, config) -> _Stage:
    weighted = _metrics_weighted(args, config)
    bins = int((config.get("metrics") or {}).get("gap_bins", 11))
    stage = _Stage(args, config_path, {"weighted": weighted, "gap_bins": bins})
    panel, ents = _panel_inputs(stage)
    frame = metrics_frame(panel, ents, None, _cpi(config))
    stage.write(rate_table(frame, "wave_year", weighted), "rates_by_year.csv", index=True)
    stage.write(rate_table(frame, "sample_origin", weighted), "rates_by_subsample.csv", index=True)
    by_year_sample = frame.assign(cell=frame.wave_year.astype(str) + ":" + frame.sample_origin)
    stage.write(rate_table(by_year_sample, "cell", weighted), "rates_by_year_subsample.csv", index=True)
    stage.write(subgroup_table(frame, weighted), "rates_by_subgroup.csv")
    eligible = frame[frame.eligible]
    w = eligible.weight if weighted else None
    stage.write(takeup_types(eligible.household_id, eligible.receipt_corrected, None, w), "takeup_types.csv", index=True)
    curve, fit = gap_curve(eligible.relative_income_gap, eligible.receipt_corrected, w, bins=bins)
    stage.write(curve, "gap_curve.csv", index=True)
    stage.write(fit, "gap_fit.csv", index=True)
    means = covariate_means(
        eligible.rename(columns={"receipt_corrected": "takeup"}), MEAN_COLUMNS, "takeup", "weight" if weighted else None
    )
    stage.write(means, "covariate_means.csv", index=True)
    stage.write(sim_quality(frame, weighted), "sim_quality.csv")
    series = []
    for name, values in (("simulated_income", frame.simulated_income), ("reported_income", frame.reported_income)):
        series.append(density_export(values).assign(series=name))
    for label, part in (("takeup", eligible[eligible.receipt_corrected]), ("non_takeup", eligible[~eligible.receipt_corrected])):
        if part.entitlement_real.nunique() > 1:
            series.append(density_export(part.entitlement_real).assign(series=f"entitlement_{label}"))
    stage.write(pd.concat(series, ignore_index=True)[["series", "grid", "density"]], "densities.csv")
    return stage


def _model_table(results: dict) -> pd.DataFrame:
    """Coefficients of all models side by side."""
    cols = {}
    for name, res in results.items():
        t = res.coef_table()
        cols[(name, "estimate")] = t["estimate"]
        cols[(name, "se")] = t["se"]
        cols[(name, "stars")] = t["stars"]
    table = pd.DataFrame(cols)
    table.columns = [f"{m}_{c}" for m, c in table.columns]
    table.index.name = "term"
    return table


def cmd_report(args, config_path, config) -> _Stage:
    stage = _Stage(args, config_path, {})
    results = {}
    for name in MODELS:
        path = _find(args.input or [], f"model_{name}.json", required=False)
        if path is None:
            continue
        stage.inputs.append(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        if "error" not in data:
            results[name] = EstimationResult.from_dict(data)
    if not results:
        raise MissingArtifactError("no estimation results among inputs; run `estimate` first")
    rates = stage.read("rates_by_year.csv")
    stage.write(rates, "table1_rates.csv")
    stage.write(stage.read("takeup_types.csv"), "table2_takeup_types.csv")
    ledger = stage.read(LEDGER, required=False)
    if ledger is not None:
        stage.write(ledger, "tableA1_selection.csv")
    stage.write(stage.read("rates_by_subgroup.csv"), "tableB1_subgroups.csv")
    stage.write(stage.read("sim_quality.csv"), "tableC1_sim_quality.csv")
    stage.write(stage.read("covariate_means.csv"), "tableD1_covariate_means.csv")
    stage.write(_model_table(results), "tableE1_coefficients.csv", index=True)
    effects = []
    for name, res in results.items():
        path = _find(args.input or [], f"effects_{name}.csv", required=False)
        if path is not None:
            stage.inputs.append(path)
            effects.append(io.read_csv(path).assign(model=name))
    if effects:
        stage.write(pd.concat(effects, ignore_index=True), "tableE1_effects.csv")
    years = rates[rates.iloc[:, 0].astype(str) != "Total"]
    stage.write(years.iloc[:, [0, 1, 2]], "fig1_ntr_by_year.csv")
    stage.write(stage.read("rates_by_year_subsample.csv"), "fig2_ntr_by_subsample.csv")
    stage.write(stage.read("gap_curve.csv"), "fig4_gap_curve.csv")
    total = rates[rates.iloc[:, 0].astype(str) == "Total"].iloc[0]
    lines = [
        "# Non-take-up report",
        "",
        f"Corrected non-take-up rate: {total['ntr_corrected']:.1f} %",
        f"Uncorrected non-take-up rate: {total['ntr_uncorrected']:.1f} %",
        f"Difference: {total['diff_pp']:.1f} pp",
        "",
        "| model | observations | households | log-likelihood | rho |",
        "|---|---|---|---|---|",
    ]
    for name, res in results.items():
        lines.append(f"| {name} | {res.n_obs} | {res.n_groups} | {res.loglik:.3f} | {res.rho:.3f} |")
    stage.out.mkdir(parents=True, exist_ok=True)
    path = stage.out / "report.md"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    stage.outputs.append(path)
    return stage


def cmd_montecarlo(args, config_path, config) -> _Stage:
    dgp = _dgp(config, config_path, args.seed)
    mc = dict(config.get("montecarlo") or {})
    reps = args.reps or int(mc.get("replications", 200))
    est = dict(config.get("estimation") or {})
    weighted = _on_off(args.weights, bool(est.get("weights", False)))
    models = "truth" if args.model is None else _models(args.model, config)
    nodes = args.nodes or int(est.get("nodes", 32))
    options = {
        "seed": dgp.seed, "replications": reps, "models": models, "weighted": weighted, "nodes": nodes,
        "synthetic": {k: v for k, v in dgp.to_dict().items() if k != "config"},
    }
    stage = _Stage(args, config_path, options)
    summary = replicate(
        dgp, reps, models, n_jobs=args.jobs, weighted=weighted, n_nodes=nodes,
        quadrature=est.get("quadrature", "two-sided"),
    )
    for name in summary.params:
        table = summary.table(name)
        table.loc["rho"] = [
            dgp.sigma_nu**2 / (1 + dgp.sigma_nu**2), summary.rho[name].mean(),
            summary.rho[name].mean() - dgp.sigma_nu**2 / (1 + dgp.sigma_nu**2),
            math.nan, math.nan, summary.rho[name].std(ddof=1) if len(summary.rho[name]) > 1 else math.nan, math.nan,
        ]
        stage.write(table, f"mc_{name}.csv", index=True)
    stage.write(pd.DataFrame(summary.failures, columns=["replication", "model", "reason"]), "mc_failures.csv")
    return stage


COMMANDS = {
    "simulate": cmd_simulate,
    "select": cmd_select,
    "covariates": cmd_covariates,
    "estimate": cmd_estimate,
    "metrics": cmd_metrics,
    "report": cmd_report,
    "montecarlo": cmd_montecarlo,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help=f"YAML configuration (default: ${CONFIG_DIR_ENV}/{CONFIG_NAME} or packaged)")
    common.add_argument("--input", nargs="+", metavar="PATH", help="input files or stage directories")
    common.add_argument("--out", required=True, metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, help="top-level seed for synthetic data")
    common.add_argument("--weights", choices=("on", "off"), help="use survey weights")
    common.add_argument("--model", choices=("m0", "m1", "m2", "m3", "all"), help="specification(s) to fit")
    common.add_argument("--nodes", type=int, help="quadrature nodes per household")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers; outputs do not depend on it")
    common.add_argument("--reps", type=int, help="Monte Carlo replications")
    parser = _Parser(prog="nontakeup", description="Benefit take-up pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _fail(code: str, message: str) -> int:
    reason = " ".join(str(message).split())
    print(f"error: {code}: {reason}", file=sys.stderr)
    return EXIT_CODES.get(code, 1)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.nodes is not None and args.nodes < 2:
            raise ConfigurationError(f"--nodes must be at least 2, got {args.nodes}")
        if args.jobs < 1:
            raise ConfigurationError(f"--jobs must be at least 1, got {args.jobs}")
        config_path, config = _resolve_config(args.config)
        stage = COMMANDS[args.command](args, config_path, config)
        stage.manifest()
        failure = getattr(stage, "failure", None)
        if failure is not None:
            return _fail(getattr(failure, "code", "error"), failure)
        return 0
    except NonTakeUpError as exc:
        return _fail(exc.code, exc)
    except (OSError, ValueError) as exc:
        return _fail("error", f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
