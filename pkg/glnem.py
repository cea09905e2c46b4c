#!/usr/bin/env python3
"""
glnem: fit generalized linear network eigenmodels from the command line.

    glnem simulate   --config run.cfg --out sim/
    glnem fit        --config run.cfg --data sim/network.csv --out fit/
    glnem postprocess --draws fit/draws.npz --out fit/
    glnem select     --config run.cfg --data sim/network.csv --out select/
    glnem gof        --config run.cfg --data sim/network.csv --draws fit/draws.npz --out gof/
    glnem experiment --config run.cfg --out experiment/
    glnem serve      --port 8000

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
import argparse
import json
import os
import sys
from dataclasses import replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

import settings
from exceptions import ConfigError, GLNEMError
from gof import fit_diagnostics, posterior_predictive
from network_io import NetworkData, load_network, save_network
from postprocess import align_draws, latent_summary, summarize
from run_config import RunConfig
from sampler import DrawStore, run_chains
from selection import criterion_report
from simulate import generate, run_experiment
from ssibp_prior import expected_slab_probabilities, tail_bound

TAIL_POINTS = (1, 2, 3, 4, 5)


def _json_default(value: Any):
    if hasattr(value, "tolist"):
        return value.tolist()
    return str(value)


def write_json(path: str, payload: Dict[str, Any]) -> str:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, default=_json_default)
        handle.write("\n")
    return path


def network_path(out_dir: str, fmt: str) -> str:
    return os.path.join(out_dir, "network.csv" if fmt == "edge-csv" else "network.manifest")


def load_data(config: RunConfig) -> NetworkData:
    if not config.data.path:
        raise ConfigError("no network given; set data.path or pass --data")
    return load_network(config.data.path, config.data.format, n=config.data.n, add_intercept=config.data.intercept)


def prior_provenance(config: RunConfig, n: int) -> Dict[str, Any]:
    """Resolved hyperparameters with the prior's expected slab probabilities and dimension tail bound."""
    hyper = config.hyper.resolve(n)
    out: Dict[str, Any] = {"hyper": hyper.to_dict(), "expected_slab_probabilities": expected_slab_probabilities(hyper)}
    if hyper.d >= 2 and hyper.kappa > 0:
        out["tail_bound"] = {str(t): float(b) for t, b in zip(TAIL_POINTS, tail_bound(hyper, TAIL_POINTS))}
    return out


# ---------------------------------------------------------------------------
# Artifact writers
# ---------------------------------------------------------------------------

def write_posterior(draws: DrawStore, out_dir: str, provenance: Optional[Dict[str, Any]] = None
                    ) -> Dict[str, str]:
    """Align the draws and write the aligned draws, summary tables and summary.json."""
    aligned = align_draws(draws)
    summary = summarize(aligned)
    summary.provenance.update(provenance or {})
    paths: Dict[str, str] = {}
    _, paths["aligned"] = replace(aligned.draws, trace=None).save(os.path.join(out_dir, "aligned"))

    paths["summary_csv"] = os.path.join(out_dir, "summary.csv")
    summary.table.to_csv(paths["summary_csv"], index=False, float_format="%.10g")
    paths["inclusion"] = os.path.join(out_dir, "inclusion.csv")
    pd.DataFrame({"dimension": np.arange(1, draws.d + 1), "inclusion": summary.inclusion,
                  "lambda_mean": aligned.draws.lam.mean(axis=0)}).to_csv(paths["inclusion"], index=False)
    paths["dimension_pmf"] = os.path.join(out_dir, "dimension_pmf.csv")
    pd.DataFrame({"k": np.arange(draws.d + 1), "probability": summary.dimension_pmf}).to_csv(
        paths["dimension_pmf"], index=False)
    paths["latent"] = os.path.join(out_dir, "latent_summary.csv")
    latent_summary(summary, aligned).to_csv(paths["latent"], index=False, float_format="%.10g")
    paths["summary_json"] = write_json(os.path.join(out_dir, "summary.json"), summary.to_dict())
    print(f"Postprocess: dimension mode {summary.dimension_mode}, "
          f"inclusion {np.round(summary.inclusion, 3).tolist()}")
    return paths


def fit_to_dir(config: RunConfig, data: NetworkData, out_dir: str) -> Tuple[DrawStore, Dict[str, str]]:
    """Run the sampler and write draws, trace data and the posterior summary under out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    family = config.build_family()
    draws = run_chains(data, family, config.hyper, config.sampler, prior=config.prior)
    csv_path, npz_path = draws.save(os.path.join(out_dir, "draws"))
    paths = {"draws_csv": csv_path, "draws": npz_path, "trace": os.path.join(out_dir, "draws.trace.csv")}
    provenance = {"config": config.to_dict(), "prior": prior_provenance(config, data.n),
                  "data_path": config.data.path}
    paths.update(write_posterior(draws, out_dir, provenance))
    with open(os.path.join(out_dir, "config.resolved.txt"), "w", encoding="utf-8") as handle:
        handle.write(config.to_text())
    return draws, paths


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(config: RunConfig, args: argparse.Namespace) -> int:
    sim = config.sim_config().resolve()
    data, truth = generate(sim)
    os.makedirs(config.out_dir, exist_ok=True)
    path = network_path(config.out_dir, config.data.format)
    save_network(data, path, config.data.format)
    truth_path = truth.save(os.path.join(config.out_dir, "network"))
    print(f"Simulate: {sim.family} network with n={sim.n}, d0={sim.d0} written to {path} (truth: {truth_path})")
    return settings.EXIT_OK


def cmd_fit(config: RunConfig, args: argparse.Namespace) -> int:
    data = load_data(config)
    print(f"Fit: {config.family.name} GLNEM on {data.n} nodes, {data.p} covariates, "
          f"truncation d={config.hyper.d}, {config.sampler.chains} chain(s)")
    _, paths = fit_to_dir(config, data, config.out_dir)
    print(f"Fit: wrote {', '.join(sorted(paths.values()))}")
    return settings.EXIT_OK


def cmd_postprocess(config: RunConfig, args: argparse.Namespace) -> int:
    draws_path = args.draws or os.path.join(config.out_dir, "draws.npz")
    draws = DrawStore.load(draws_path)
    os.makedirs(config.out_dir, exist_ok=True)
    paths = write_posterior(draws, config.out_dir, {"draws_path": draws_path})
    print(f"Postprocess: wrote {', '.join(sorted(paths.values()))}")
    return settings.EXIT_OK


def cmd_select(config: RunConfig, args: argparse.Namespace) -> int:
    data = load_data(config)
    family = config.build_family()
    report = criterion_report(data, family, config.d_grid(), config.sampler, config.hyper,
                              folds=config.select.folds if config.select.cv else 0)
    os.makedirs(config.out_dir, exist_ok=True)
    report.table.to_csv(os.path.join(config.out_dir, "selection.csv"), index=False, float_format="%.10g")
    if report.cv_scores is not None:
        report.cv_scores.to_csv(os.path.join(config.out_dir, "cv_scores.csv"), index=False, float_format="%.10g")
    write_json(os.path.join(config.out_dir, "selection.json"),
               {"selected": report.selected, "provenance": {**report.provenance, "config": config.to_dict()}})
    return settings.EXIT_OK


def cmd_gof(config: RunConfig, args: argparse.Namespace) -> int:
    data = load_data(config)
    family = config.build_family()
    draws = DrawStore.load(args.draws or os.path.join(config.out_dir, "draws.npz"))
    report = posterior_predictive(draws, data, family, statistic=config.gof.statistic,
                                  subsample=config.gof.subsample, rng=np.random.default_rng(config.sampler.seed),
                                  binary_degree=config.gof.binary_degree)
    os.makedirs(config.out_dir, exist_ok=True)
    stem = os.path.join(config.out_dir, f"gof_{config.gof.statistic}")
    report.to_frame().to_csv(f"{stem}.csv", index=False, float_format="%.10g")
    report.quantiles.to_csv(f"{stem}_quantiles.csv", index=False, float_format="%.10g")
    payload: Dict[str, Any] = {"statistic": report.statistic, "replicates": report.num_replicates,
                               "diagnostics": fit_diagnostics(draws, data, family),
                               "provenance": {**report.provenance, "config": config.to_dict()}}
    if "p_value" in report.quantiles.attrs:
        payload["observed"] = float(report.observed)
        payload["p_value"] = report.quantiles.attrs["p_value"]
    write_json(f"{stem}.json", payload)
    print(f"Gof: {report.num_replicates} predictive networks, {config.gof.statistic} written to {stem}.csv")
    return settings.EXIT_OK


def cmd_experiment(config: RunConfig, args: argparse.Namespace) -> int:
    result = run_experiment(config.sim_config(), config.simulate.replicates, config.sampler, config.hyper,
                            fit_family=config.simulate.fit_family,
                            select_grid=config.d_grid() if config.simulate.select else (),
                            folds=config.select.folds if config.select.cv else 0)
    paths = result.save(config.out_dir)
    paths.append(write_json(os.path.join(config.out_dir, "experiment.json"),
                            {**result.provenance, "config": config.to_dict()}))
    print(f"Experiment: wrote {', '.join(paths)}")
    return settings.EXIT_OK


def cmd_serve(config: RunConfig, args: argparse.Namespace) -> int:
    import uvicorn

    from main_server import app

    uvicorn.run(app, host=args.host, port=args.port)
    return settings.EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, "simulate a network and its true parameters"),
    "fit": (cmd_fit, "fit the spike-and-slab GLNEM and summarise the posterior"),
    "postprocess": (cmd_postprocess, "align saved draws and rewrite the posterior summary"),
    "select": (cmd_select, "fixed-dimension fits scored by AIC, BIC, DIC, WAIC and optional K-fold CV"),
    "gof": (cmd_gof, "posterior-predictive goodness of fit from saved draws"),
    "experiment": (cmd_experiment, "replicated simulation study"),
    "serve": (cmd_serve, "HTTP API over simulate and fit"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--seed", type=int, help="overrides sampler.seed")
    common.add_argument("--chains", type=int, help="overrides sampler.chains")
    common.add_argument("--out", help="overrides out.dir")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any configuration key (repeatable)")

    parser = argparse.ArgumentParser(prog="glnem", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"glnem {settings.VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (handler, help_text) in COMMANDS.items():
        command = sub.add_parser(name, parents=[common], help=help_text)
        command.set_defaults(handler=handler)
        if name in ("fit", "select", "gof"):
            command.add_argument("--data", help="overrides data.path")
            command.add_argument("--format", choices=("edge-csv", "dense-csv"), help="overrides data.format")
        if name in ("gof", "postprocess"):
            command.add_argument("--draws", help="draws .npz (default: <out>/draws.npz)")
        if name == "serve":
            command.add_argument("--host", default="0.0.0.0")
            command.add_argument("--port", type=int, default=8000)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got '{item}'")
        key, value = item.split("=", 1)
        config.set(key, value, where="--set")
    config.update({"sampler.seed": args.seed, "sampler.chains": args.chains, "out.dir": args.out,
                   "data.path": getattr(args, "data", None), "data.format": getattr(args, "format", None)},
                  where="command line")
    return config.validate()


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        return args.handler(config, args)
    except GLNEMError as e:
        print(f"glnem: {e.kind} error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"glnem: data error: {e}", file=sys.stderr)
        return settings.EXIT_DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
