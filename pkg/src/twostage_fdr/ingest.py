"""Replicate count ingestion, log-fold changes and the exhaustive
bootstrap of their standard deviation.

With r replicates per condition the bootstrap enumerates all r^r
with-replacement resamples of each condition (729 = 27 x 27 resample
pairs for triplicates) instead of drawing randomly, so the auxiliary
statistic is deterministic.
"""

from __future__ import annotations

import gzip
import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ReplicateData",
    "FoldChangeSummary",
    "MAX_BOOTSTRAP_COMBINATIONS",
    "logfold",
    "bootstrap_logfolds",
    "bootstrap_sd",
    "summarize",
    "open_text",
    "read_counts",
    "write_summary",
    "read_summary",
]

MAX_BOOTSTRAP_COMBINATIONS = 1_000_000


@dataclass(frozen=True)
class ReplicateData:
    """Per-gene weighted counts under knockout and wildtype conditions."""

    ids: tuple
    ko: np.ndarray  # shape (n_genes, r)
    wt: np.ndarray  # shape (n_genes, r)

    def __post_init__(self):
        ko = np.asarray(self.ko, dtype=float)
        wt = np.asarray(self.wt, dtype=float)
        ids = tuple(str(i) for i in self.ids)
        if ko.ndim != 2 or wt.shape != ko.shape or ko.shape[0] != len(ids):
            raise ValueError("ko and wt must be (n_genes, r) arrays matching ids")
        if len(set(ids)) != len(ids):
            raise ValueError("gene ids must be unique")
        if not (np.all(np.isfinite(ko)) and np.all(np.isfinite(wt))):
            raise ValueError("counts must be finite")
        if np.any(ko <= 0.0) or np.any(wt <= 0.0):
            raise ValueError("counts must be positive")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "ko", ko)
        object.__setattr__(self, "wt", wt)

    @property
    def n_genes(self) -> int:
        return len(self.ids)

    @property
    def r(self) -> int:
        return self.ko.shape[1]


@dataclass(frozen=True)
class FoldChangeSummary:
    """Per-gene log-fold change and its bootstrap standard deviation."""

    ids: tuple
    beta_hat: np.ndarray
    sd_boot: np.ndarray

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        beta = np.asarray(self.beta_hat, dtype=float)
        sd = np.asarray(self.sd_boot, dtype=float)
        if beta.shape != (len(ids),) or sd.shape != (len(ids),):
            raise ValueError("beta_hat and sd_boot must match ids in length")
        if np.any(sd < 0.0):
            raise ValueError("bootstrap standard deviations must be nonnegative")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "beta_hat", beta)
        object.__setattr__(self, "sd_boot", sd)


def logfold(ko, wt) -> float:
    """log2 of the ratio of condition means, knockout over wildtype."""
    ko_mean = float(np.mean(ko))
    wt_mean = float(np.mean(wt))
    if ko_mean <= 0.0 or wt_mean <= 0.0:
        raise ValueError("condition means must be positive")
    return float(np.log2(ko_mean / wt_mean))


def _resample_means(values: np.ndarray) -> np.ndarray:
    """Means of all r^r with-replacement resamples, in odometer order."""
    r = values.size
    idx = np.array(list(itertools.product(range(r), repeat=r)), dtype=int)
    return values[idx].mean(axis=1)


def bootstrap_logfolds(ko, wt) -> np.ndarray:
    """All r^r x r^r bootstrap log-fold changes (KO resamples outer)."""
    ko = np.asarray(ko, dtype=float)
    wt = np.asarray(wt, dtype=float)
    if ko.size != wt.size:
        raise ValueError("conditions must have the same replicate count")
    r = ko.size
    n_comb = (r ** r) ** 2
    if n_comb > MAX_BOOTSTRAP_COMBINATIONS:
        raise ValueError(
            f"{r} replicates need {n_comb} bootstrap combinations "
            f"(cap {MAX_BOOTSTRAP_COMBINATIONS}); exhaustive enumeration not feasible")
    if np.any(ko <= 0.0) or np.any(wt <= 0.0):
        raise ValueError("counts must be positive")
    ko_means = _resample_means(ko)
    wt_means = _resample_means(wt)
    return np.log2(ko_means[:, None] / wt_means[None, :]).ravel()


def bootstrap_sd(ko, wt) -> tuple[float, int]:
    """Sample SD (denominator n-1) of the exhaustive bootstrap log-folds.

    Returns (sd, combination_count); the count is 729 for triplicates.
    """
    folds = bootstrap_logfolds(ko, wt)
    if np.all(folds == folds[0]):
        return 0.0, folds.size
    return float(np.std(folds, ddof=1)), folds.size


def summarize(data: ReplicateData) -> FoldChangeSummary:
    """Log-fold change and bootstrap SD for every gene, input order kept."""
    beta = np.array([logfold(data.ko[i], data.wt[i]) for i in range(data.n_genes)])
    sd = np.array([bootstrap_sd(data.ko[i], data.wt[i])[0] for i in range(data.n_genes)])
    return FoldChangeSummary(data.ids, beta, sd)


def open_text(path, mode="rt"):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode, encoding="utf-8")
    return open(path, mode.replace("t", ""), encoding="utf-8")


def read_counts(path) -> ReplicateData:
    """Read a TSV with header gene_id, ko_1..ko_r, wt_1..wt_r.

    Accepts gzip input by extension and both LF and CRLF line endings;
    rejects malformed rows with the offending line number.
    """
    with open_text(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = lines[0].split("\t")
    if header[0] != "gene_id":
        raise ValueError(f"{path}: first column must be gene_id, got {header[0]!r}")
    ko_cols = [c for c in header[1:] if c.startswith("ko_")]
    wt_cols = [c for c in header[1:] if c.startswith("wt_")]
    r = len(ko_cols)
    if r < 1 or len(wt_cols) != r or header[1:] != ko_cols + wt_cols:
        raise ValueError(f"{path}: header must be gene_id, ko_1..ko_r, wt_1..wt_r")
    ids, ko_rows, wt_rows = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 1 + 2 * r:
            raise ValueError(f"{path}: line {lineno}: expected {1 + 2 * r} columns, "
                             f"got {len(parts)}")
        try:
            values = [float(x) for x in parts[1:]]
        except ValueError:
            raise ValueError(f"{path}: line {lineno}: non-numeric count") from None
        if any(not np.isfinite(x) for x in values):
            raise ValueError(f"{path}: line {lineno}: non-finite count")
        if any(x <= 0.0 for x in values):
            raise ValueError(f"{path}: line {lineno}: counts must be positive")
        ids.append(parts[0])
        ko_rows.append(values[:r])
        wt_rows.append(values[r:])
    if not ids:
        raise ValueError(f"{path}: no data rows")
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path}: duplicate gene ids")
    return ReplicateData(tuple(ids), np.array(ko_rows), np.array(wt_rows))


def write_summary(summary: FoldChangeSummary, path) -> None:
    with open_text(path, "wt") as fh:
        fh.write("gene_id\tbeta_hat\tsd_boot\n")
        for i, gid in enumerate(summary.ids):
            fh.write(f"{gid}\t{float(summary.beta_hat[i])!r}\t{float(summary.sd_boot[i])!r}\n")


def read_summary(path) -> FoldChangeSummary:
    with open_text(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].split("\t") != ["gene_id", "beta_hat", "sd_boot"]:
        raise ValueError(f"{path}: expected header gene_id, beta_hat, sd_boot")
    ids, beta, sd = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}: line {lineno}: expected 3 columns")
        ids.append(parts[0])
        beta.append(float(parts[1]))
        sd.append(float(parts[2]))
    if not ids:
        raise ValueError(f"{path}: no data rows")
    return FoldChangeSummary(tuple(ids), np.array(beta), np.array(sd))
