"""Plug-in CATE predictions, PEHE, multi-run aggregates, propensity histograms."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import zoo


def predict_cate(model, X):
    """Plug-in effect estimate mu1_hat - mu0_hat."""
    bundle = zoo.predict(model, X)
    return bundle.mu1_hat - bundle.mu0_hat


def pehe(e_hat, e_true):
    """Root mean squared error between predicted and true effects."""
    e_hat = np.asarray(e_hat, dtype=np.float64).reshape(-1)
    e_true = np.asarray(e_true, dtype=np.float64).reshape(-1)
    if e_hat.size == 0:
        raise ValueError("pehe: empty effect vectors")
    if e_hat.shape != e_true.shape:
        raise ValueError(f"pehe: length mismatch {e_hat.shape} vs {e_true.shape}")
    return float(np.sqrt(np.mean((e_hat - e_true) ** 2)))


@dataclass
class EvalReport:
    """Per-run PEHE record; diverged runs carry no values."""

    estimator: str
    seed: int
    realization: int | None = None
    pehe_in: float | None = None
    pehe_out: float | None = None
    diverged: bool = False

    def __post_init__(self):
        if self.diverged:
            if self.pehe_in is not None or self.pehe_out is not None:
                raise ValueError("diverged runs carry no PEHE values")
        else:
            for v in (self.pehe_in, self.pehe_out):
                if v is not None and v < 0:
                    raise ValueError(f"PEHE must be >= 0, got {v}")


@dataclass
class AggregateReport:
    """Mean and standard error over completed (non-diverged) runs."""

    estimator: str
    n_runs: int
    pehe_in_mean: float
    pehe_in_se: float | None
    pehe_out_mean: float
    pehe_out_se: float | None


def _mean_se(values):
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean())
    if values.size < 2:
        return mean, None
    se = float(values.std(ddof=1) / math.sqrt(values.size))
    return mean, se


def aggregate(reports):
    """Aggregate one estimator's runs; diverged runs are excluded."""
    if not reports:
        raise ValueError("aggregate: no runs given")
    names = {r.estimator for r in reports}
    if len(names) != 1:
        raise ValueError(f"aggregate: mixed estimators {sorted(names)}")
    completed = [r for r in reports if not r.diverged]
    if not completed:
        raise ValueError(
            f"aggregate: zero completed runs for {reports[0].estimator} "
            f"({len(reports)} diverged)")
    in_mean, in_se = _mean_se([r.pehe_in for r in completed])
    out_mean, out_se = _mean_se([r.pehe_out for r in completed])
    return AggregateReport(reports[0].estimator, len(completed),
                           in_mean, in_se, out_mean, out_se)


def propensity_histogram(model, X, bins=10):
    """Counts of predicted treatment probabilities over uniform bins of (0, 1)."""
    if not model.spec.has_propensity_head:
        raise ValueError(f"{model.spec.family} has no propensity head")
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    pi = zoo.predict(model, X).pi_hat
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(pi, bins=edges)
    return edges[:-1], edges[1:], counts


def write_histogram_csv(path, bin_lo, bin_hi, counts):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(bin_lo, bin_hi, counts):
            w.writerow([format(lo, ".17g"), format(hi, ".17g"), int(c)])
