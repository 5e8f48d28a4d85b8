"""Command-line interface: bootstrap, fit, test and simulate subcommands.

Every run is reproducible: all randomness flows from --seed, and the seed
is recorded in the output headers.  Flags override values given in JSON
config files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import copula as cp
from . import fit as ft
from . import ingest as ig
from . import marginal as mg
from . import procedure as proc
from . import simulate as sim

DEFAULT_SEED = 20240001

_METHOD_ALIASES = {"h": "hard", "hard": "hard", "s": "soft", "soft": "soft",
                   "storey": "storey"}


def parse_copula_spec(spec: str) -> cp.CopulaModel:
    """Parse 'family[:theta[:rotation]]', e.g. 'clayton:1.333:90'."""
    parts = spec.lower().split(":")
    family = parts[0]
    if family == "independence":
        if len(parts) > 1:
            raise ValueError("independence takes no parameter")
        return cp.CopulaModel("independence")
    if len(parts) < 2:
        raise ValueError(f"copula spec {spec!r} needs a parameter, e.g. 'clayton:2.0'")
    theta = float(parts[1])
    rotation = int(parts[2]) if len(parts) > 2 else 0
    return cp.CopulaModel(family, theta, rotation)


def _read_hypothesis_input(path, null: mg.GaussianMixture, tail: str) -> mg.HypothesisTable:
    """Build a HypothesisTable from a TSV with id, beta_hat and an
    auxiliary column named y or sd_boot."""
    with ig.open_text(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = lines[0].split("\t")
    cols = {name: i for i, name in enumerate(header)}
    id_col = next((c for c in ("gene_id", "id") if c in cols), None)
    aux_col = next((c for c in ("y", "sd_boot") if c in cols), None)
    if id_col is None or "beta_hat" not in cols or aux_col is None:
        raise ValueError(f"{path}: need columns gene_id/id, beta_hat and y/sd_boot")
    ids, beta, y = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != len(header):
            raise ValueError(f"{path}: line {lineno}: expected {len(header)} columns")
        ids.append(parts[cols[id_col]])
        beta.append(float(parts[cols["beta_hat"]]))
        y.append(float(parts[cols[aux_col]]))
    if not ids:
        raise ValueError(f"{path}: no data rows")
    return mg.build_table(ids, beta, y, null, tail)


def _load_null(path: str | None) -> mg.GaussianMixture:
    return mg.REAL_DATA_NULL if path is None else mg.mixture_from_json(path)


def cmd_bootstrap(args) -> int:
    data = ig.read_counts(args.input)
    summary = ig.summarize(data)
    ig.write_summary(summary, args.output)
    print(f"wrote {len(summary.ids)} genes to {args.output}")
    return 0


def cmd_fit(args) -> int:
    table = _read_hypothesis_input(args.input, _load_null(args.null_mixture), args.tail)
    obs = cp.PseudoObservations(np.clip(table.p1, 1e-10, 1 - 1e-10),
                                np.clip(table.p2, 1e-10, 1 - 1e-10))
    report = ft.select_copula(obs)
    print(ft.format_report(report))
    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    out = Path(args.out_dir) / "selection.json"
    out.write_text(ft.report_to_json(report) + "\n", encoding="utf-8")
    print(f"wrote {out}")
    return 0


def cmd_test(args) -> int:
    method = _METHOD_ALIASES[args.method.lower()]
    table = _read_hypothesis_input(args.input, _load_null(args.null_mixture), args.tail)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    model = None
    if method in ("hard", "soft"):
        if args.copula == "auto":
            obs = cp.PseudoObservations(np.clip(table.p1, 1e-10, 1 - 1e-10),
                                        np.clip(table.p2, 1e-10, 1 - 1e-10))
            report = ft.select_copula(obs)
            model = report.winner("bic").model
            print(f"auto-selected copula: {model.describe()}")
        else:
            model = parse_copula_spec(args.copula)

    if method == "storey":
        outcome = proc.run_one_stage_storey(table, args.alpha, args.lambda_)
    elif method == "soft":
        outcome = proc.run_two_stage_soft(table, model, args.alpha, args.lambda_)
    else:
        grid = None
        if args.gamma1_grid is not None:
            grid = [float(x) for x in args.gamma1_grid.split(",")]
        outcome = proc.run_two_stage_hard(table, model, args.alpha, args.lambda_,
                                          gamma1_grid=grid)

    proc.write_decisions_tsv(table, outcome, out_dir / "decisions.tsv", seed=args.seed)
    (out_dir / "outcome.json").write_text(proc.outcome_to_json(outcome, seed=args.seed)
                                          + "\n", encoding="utf-8")
    if method == "hard":
        proc.write_gamma1_curve_tsv(outcome, out_dir / "gamma1_curve.tsv", seed=args.seed)
    extra = f", gamma1_hat={outcome.gamma1_hat}" if outcome.gamma1_hat is not None else ""
    print(f"{method}: rejected {outcome.n_rejected} of {table.m} "
          f"(gamma_hat={outcome.gamma_hat:.6g}, pi0_hat={outcome.pi0_hat:.4f}{extra})")
    return 0


_CELL_KEYS = {"mode", "m", "mu", "tau", "p0", "dep_family", "analysis_family",
              "analysis_mode", "k_reps", "alpha", "lambda", "seed"}
_MISSPEC_KEYS = _CELL_KEYS | {"analysis_families", "fit_mode"}
_SELECTION_KEYS = {"mode", "n", "true_family", "tau", "reps", "seed", "candidates"}


def _cfg_from_payload(payload: dict, seed: int) -> sim.SimulationConfig:
    kwargs = {k: payload[k] for k in
              ("m", "mu", "tau", "p0", "dep_family", "analysis_family",
               "analysis_mode", "k_reps", "alpha") if k in payload}
    if "lambda" in payload:
        kwargs["lambda_"] = payload["lambda"]
    kwargs["seed"] = seed
    return sim.SimulationConfig(**kwargs)


def cmd_simulate(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    mode = payload.get("mode", "cell")
    seed = args.seed if args.seed is not None else payload.get("seed", DEFAULT_SEED)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table_path = out_dir / "simtable.tsv"

    if mode == "cell":
        _reject_unknown(payload, _CELL_KEYS)
        cfg = _cfg_from_payload(payload, seed)
        results = sim.run_cell(cfg, threads=args.threads)
        sim.cell_to_tsv(results, table_path, seed=seed)
        (out_dir / "results.json").write_text(sim.cell_to_json(results, cfg) + "\n",
                                              encoding="utf-8")
    elif mode == "misspecification":
        _reject_unknown(payload, _MISSPEC_KEYS)
        cfg = _cfg_from_payload(payload, seed)
        results = sim.run_misspecification(
            cfg, analysis_families=payload.get("analysis_families"),
            mode=payload.get("fit_mode", "refit"), threads=args.threads)
        sim.misspecification_to_tsv(results, table_path, seed=seed)
        (out_dir / "results.json").write_text(sim.cell_to_json(results, cfg) + "\n",
                                              encoding="utf-8")
    elif mode == "selection":
        _reject_unknown(payload, _SELECTION_KEYS)
        true_model = cp.tau_to_theta(payload.get("true_family", "clayton"),
                                     payload.get("tau", -0.4))
        study = sim.run_copula_selection_study(
            true_model, n=payload.get("n", 8000), reps=payload.get("reps", 100),
            seed=seed, candidates=payload.get("candidates", ft.DEFAULT_CANDIDATES))
        sim.study_to_tsv(study, table_path, seed=seed)
    else:
        raise ValueError(f"unknown simulate mode {mode!r}")
    print(f"wrote {table_path}")
    return 0


def _reject_unknown(payload: dict, allowed: set) -> None:
    unknown = set(payload) - allowed
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twostage-fdr",
        description="Two-stage FDR procedures with a copula-coupled auxiliary statistic")
    sub = parser.add_subparsers(dest="command", required=True)

    p_boot = sub.add_parser("bootstrap",
                            help="exhaustive bootstrap SD of log-fold changes")
    p_boot.add_argument("input", help="counts TSV: gene_id, ko_1..ko_r, wt_1..wt_r")
    p_boot.add_argument("output", help="summary TSV: gene_id, beta_hat, sd_boot")
    p_boot.set_defaults(func=cmd_bootstrap)

    p_fit = sub.add_parser("fit", help="fit candidate copulas and report criteria")
    p_fit.add_argument("input", help="TSV with id, beta_hat and y/sd_boot columns")
    p_fit.add_argument("--null-mixture", default=None,
                       help="JSON file with the null mixture (weights/means/sds)")
    p_fit.add_argument("--tail", default="two_sided", choices=mg.TAILS)
    p_fit.add_argument("--out-dir", default=".")
    p_fit.set_defaults(func=cmd_fit)

    p_test = sub.add_parser("test", help="run an FDR-controlling procedure")
    p_test.add_argument("input", help="TSV with id, beta_hat and y/sd_boot columns")
    p_test.add_argument("--method", required=True, type=str.lower,
                        choices=sorted(_METHOD_ALIASES),
                        help="H (hard), S (soft) or storey")
    p_test.add_argument("--alpha", type=float, default=0.05)
    p_test.add_argument("--lambda", dest="lambda_", type=float, default=0.5)
    p_test.add_argument("--copula", default="auto",
                        help="'auto' or family[:theta[:rotation]]")
    p_test.add_argument("--gamma1-grid", default=None,
                        help="comma-separated screen levels for the hard method")
    p_test.add_argument("--null-mixture", default=None)
    p_test.add_argument("--tail", default="two_sided", choices=mg.TAILS)
    p_test.add_argument("--out-dir", default=".")
    p_test.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_test.set_defaults(func=cmd_test)

    p_sim = sub.add_parser("simulate", help="run a simulation study from a JSON config")
    p_sim.add_argument("config", help="JSON config (mode: cell/misspecification/selection)")
    p_sim.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    p_sim.add_argument("--threads", type=int, default=1)
    p_sim.add_argument("--out-dir", default=".")
    p_sim.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, ft.FitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
