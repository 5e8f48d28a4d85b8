"""Two-stage FDR procedures.

The auxiliary p-value p1 and the primary p-value p2 are merged into a
single p-value that is uniform under the null coupling:

* hard variant: p = C(gamma1, p2) when p1 passes the screen p1 <= gamma1,
  otherwise p = p1 (the hypothesis is screened out);
* soft variant: p = C(p2 | p1), the conditional CDF of p2 given p1.

Rejection thresholds come from the plug-in FDR estimate
pi0 * gamma * M / max(R(gamma), 1), scanned over the observed values.
The hard variant additionally scans a grid of screen levels gamma1 and
keeps the one that rejects the most.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .copula import CopulaModel, cdf as copula_cdf, hfunc
from .marginal import HypothesisTable

__all__ = [
    "AggregatedPValues",
    "ProcedureOutcome",
    "default_gamma1_grid",
    "aggregate_hard",
    "aggregate_soft",
    "gamma2_from",
    "estimate_pi0",
    "estimate_fdr",
    "select_gamma",
    "run_two_stage_hard",
    "run_two_stage_soft",
    "run_one_stage_storey",
    "outcome_to_json",
    "write_decisions_tsv",
    "write_gamma1_curve_tsv",
]


@dataclass(frozen=True)
class AggregatedPValues:
    """Merged p-values aligned with a HypothesisTable's ids."""

    kind: str  # "hard", "soft" or "raw"
    values: np.ndarray
    gamma1: float | None = None

    def __post_init__(self):
        if self.kind not in ("hard", "soft", "raw"):
            raise ValueError(f"unknown aggregation kind {self.kind!r}")
        vals = np.asarray(self.values, dtype=float)
        if np.any(vals < 0.0) or np.any(vals > 1.0):
            raise ValueError("aggregated p-values must lie in [0, 1]")
        if (self.kind == "hard") != (self.gamma1 is not None):
            raise ValueError("gamma1 is required for hard aggregation only")
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class ProcedureOutcome:
    """Result of one FDR-controlling run."""

    method: str  # "hard", "soft" or "storey"
    alpha: float
    lambda_: float
    pi0_hat: float
    gamma_hat: float
    rejected: frozenset
    aggregated: AggregatedPValues
    gamma1_hat: float | None = None
    rejections_by_gamma1: tuple | None = None

    @property
    def n_rejected(self) -> int:
        return len(self.rejected)


def default_gamma1_grid() -> np.ndarray:
    """199 equispaced screen levels 0.005..0.995 plus a refined band near 1."""
    coarse = np.round(np.arange(1, 200) * 0.005, 4)
    fine = np.round(0.996 + 0.0005 * np.arange(8), 4)
    return np.concatenate([coarse, fine])


def aggregate_hard(table: HypothesisTable, model: CopulaModel,
                   gamma1: float) -> AggregatedPValues:
    """p_i = C(gamma1, p2_i) if p1_i <= gamma1 else p1_i."""
    if not 0.0 < gamma1 < 1.0:
        raise ValueError(f"gamma1 must lie strictly inside (0, 1), got {gamma1}")
    joint = copula_cdf(model, gamma1, table.p2)
    values = np.where(table.p1 <= gamma1, joint, table.p1)
    return AggregatedPValues("hard", values, gamma1=float(gamma1))


def aggregate_soft(table: HypothesisTable, model: CopulaModel) -> AggregatedPValues:
    """p_i = C(p2_i | p1_i), the conditional CDF under the fitted copula."""
    return AggregatedPValues("soft", hfunc(model, table.p2, table.p1))


def gamma2_from(model: CopulaModel, gamma1: float, gamma: float) -> float:
    """Solve C(gamma1, gamma2) = gamma for gamma2 by bisection.

    Requires gamma <= gamma1 (= C(gamma1, 1)); C is increasing in its
    second argument, so the solution is unique up to flat stretches.
    """
    if not 0.0 < gamma1 < 1.0:
        raise ValueError(f"gamma1 must lie strictly inside (0, 1), got {gamma1}")
    if gamma < 0.0 or gamma > gamma1:
        raise ValueError(f"gamma must lie in [0, gamma1={gamma1}], got {gamma}")
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = copula_cdf(model, gamma1, mid)
        if abs(val - gamma) <= 1e-12:
            return mid
        if val < gamma:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


def estimate_pi0(pvalues: AggregatedPValues, lambda_: float) -> float:
    """Tail estimate of the true-null proportion, capped at 1."""
    if not 0.0 < lambda_ < 1.0:
        raise ValueError(f"lambda must lie strictly inside (0, 1), got {lambda_}")
    m = pvalues.m
    pi0 = np.count_nonzero(pvalues.values > lambda_) / ((1.0 - lambda_) * m)
    return min(pi0, 1.0)


def estimate_fdr(pvalues: AggregatedPValues, gamma: float, pi0: float) -> float:
    """Plug-in FDR estimate pi0 * gamma * M / max(R(gamma), 1)."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    m = pvalues.m
    r = np.count_nonzero(pvalues.values <= gamma)
    return pi0 * gamma * m / max(r, 1)


def select_gamma(pvalues: AggregatedPValues, alpha: float,
                 lambda_: float) -> tuple[float, float, int]:
    """Largest candidate threshold whose estimated FDR stays below alpha.

    Candidates are the observed p-values (plus 0); the rejection count is
    a step function of gamma, so scanning the observed values is exact.
    Returns (gamma_hat, pi0_hat, rejected_count).
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    pi0 = estimate_pi0(pvalues, lambda_)
    m = pvalues.m
    vals = np.sort(pvalues.values)
    counts = np.searchsorted(vals, vals, side="right")  # R(gamma) at each candidate
    fdr = pi0 * vals * m / np.maximum(counts, 1)
    ok = np.nonzero(fdr <= alpha)[0]
    if ok.size == 0:
        return 0.0, pi0, 0
    best = ok[-1]
    return float(vals[best]), pi0, int(counts[best])


def _rejected_ids(table: HypothesisTable, values: np.ndarray, gamma_hat: float) -> frozenset:
    mask = values <= gamma_hat
    return frozenset(np.asarray(table.ids, dtype=object)[mask].tolist())


def run_one_stage_storey(table: HypothesisTable, alpha: float,
                         lambda_: float = 0.5) -> ProcedureOutcome:
    """Storey's one-stage procedure on the raw primary p-values."""
    agg = AggregatedPValues("raw", table.p2)
    gamma_hat, pi0, _ = select_gamma(agg, alpha, lambda_)
    return ProcedureOutcome("storey", alpha, lambda_, pi0, gamma_hat,
                            _rejected_ids(table, agg.values, gamma_hat), agg)


def run_two_stage_soft(table: HypothesisTable, model: CopulaModel, alpha: float,
                       lambda_: float = 0.5) -> ProcedureOutcome:
    """Soft-threshold two-stage procedure."""
    agg = aggregate_soft(table, model)
    gamma_hat, pi0, _ = select_gamma(agg, alpha, lambda_)
    return ProcedureOutcome("soft", alpha, lambda_, pi0, gamma_hat,
                            _rejected_ids(table, agg.values, gamma_hat), agg)


def run_two_stage_hard(table: HypothesisTable, model: CopulaModel, alpha: float,
                       lambda_: float = 0.5, gamma1_grid=None) -> ProcedureOutcome:
    """Hard-threshold two-stage procedure with data-driven screen level.

    Every grid level is evaluated end to end (aggregate, pi0, threshold);
    the level rejecting the most hypotheses wins, ties resolved toward the
    smallest (most stringent) screen.
    """
    grid = default_gamma1_grid() if gamma1_grid is None else np.asarray(gamma1_grid, float)
    if grid.size < 1:
        raise ValueError("gamma1 grid must be nonempty")
    if np.any(grid <= 0.0) or np.any(grid >= 1.0):
        raise ValueError("gamma1 grid must lie strictly inside (0, 1)")

    counts = []
    for g1 in grid:
        agg = aggregate_hard(table, model, g1)
        _, _, m_k = select_gamma(agg, alpha, lambda_)
        counts.append(m_k)
    counts = np.asarray(counts)
    gamma1_hat = float(grid[np.argmax(counts)])  # argmax takes the first (smallest) tie

    agg = aggregate_hard(table, model, gamma1_hat)
    gamma_hat, pi0, _ = select_gamma(agg, alpha, lambda_)
    return ProcedureOutcome(
        "hard", alpha, lambda_, pi0, gamma_hat,
        _rejected_ids(table, agg.values, gamma_hat), agg,
        gamma1_hat=gamma1_hat,
        rejections_by_gamma1=tuple((float(g), int(c)) for g, c in zip(grid, counts)),
    )


def outcome_to_json(outcome: ProcedureOutcome, seed=None) -> str:
    payload = {
        "method": outcome.method,
        "alpha": outcome.alpha,
        "lambda": outcome.lambda_,
        "pi0_hat": outcome.pi0_hat,
        "gamma_hat": outcome.gamma_hat,
        "gamma1_hat": outcome.gamma1_hat,
        "n_rejected": outcome.n_rejected,
        "rejected": sorted(outcome.rejected),
    }
    if seed is not None:
        payload["seed"] = seed
    return json.dumps(payload, indent=2)


def write_decisions_tsv(table: HypothesisTable, outcome: ProcedureOutcome, path,
                        seed=None) -> None:
    """Per-hypothesis decisions: id, p1, p2, aggregated p, rejected flag."""
    with open(path, "w", encoding="utf-8") as fh:
        if seed is not None:
            fh.write(f"# seed: {seed}\n")
        fh.write("id\tp1\tp2\tp_aggregated\trejected\n")
        for i, hid in enumerate(table.ids):
            rej = 1 if hid in outcome.rejected else 0
            fh.write(f"{hid}\t{float(table.p1[i])!r}\t{float(table.p2[i])!r}"
                     f"\t{float(outcome.aggregated.values[i])!r}\t{rej}\n")


def write_gamma1_curve_tsv(outcome: ProcedureOutcome, path, seed=None) -> None:
    """Screen level vs rejection count, for plotting."""
    if outcome.rejections_by_gamma1 is None:
        raise ValueError("outcome has no gamma1 curve (not a hard run)")
    with open(path, "w", encoding="utf-8") as fh:
        if seed is not None:
            fh.write(f"# seed: {seed}\n")
        fh.write("gamma1\tn_rejected\n")
        for g1, count in outcome.rejections_by_gamma1:
            fh.write(f"{g1!r}\t{count}\n")
