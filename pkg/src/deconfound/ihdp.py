"""IHDP100 realization loading from the portable CSV layout.

Per realization r the layout carries `ihdp_train_r.csv` and `ihdp_test_r.csv`
with header x0..x24,t,y_factual,y_cfactual,mu0,mu1 in 17-significant-digit
decimal text. The test file is the distribution's predefined held-out
portion; validation is carved out of the training portion by seed.
"""

from __future__ import annotations

import csv
import os
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autograd import SeededRng
from .data import ObservationalData

ENV_VAR = "DECONFOUND_IHDP_DIR"
N_COVARIATES = 25
EXPECTED_ROWS = 747
EXPECTED_TREATED = 139
HEADER = [f"x{j}" for j in range(N_COVARIATES)] + ["t", "y_factual", "y_cfactual", "mu0", "mu1"]


class IhdpFormatError(ValueError):
    """Structural problem in an IHDP CSV file; names file and line."""


@dataclass
class IhdpRealization:
    """One simulation setting: combined train+test arrays plus the role mask."""

    realization_id: int
    x: np.ndarray
    t: np.ndarray
    y_factual: np.ndarray
    y_cfactual: np.ndarray
    mu0: np.ndarray
    mu1: np.ndarray
    is_test: np.ndarray  # True for the predefined test portion

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def cate(self):
        return self.mu1 - self.mu0

    def portion(self, test):
        idx = np.where(self.is_test == test)[0]
        return ObservationalData(self.x[idx], self.t[idx], self.y_factual[idx],
                                 mu0=self.mu0[idx], mu1=self.mu1[idx])


def resolve_root(path=None):
    """IHDP data directory: explicit path, else the DECONFOUND_IHDP_DIR env var."""
    root = path or os.environ.get(ENV_VAR)
    if not root:
        raise FileNotFoundError(
            f"no IHDP directory given; pass --ihdp-dir or set {ENV_VAR}")
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"IHDP directory {root} does not exist")
    return root


def _read_csv(path):
    if not path.is_file():
        raise IhdpFormatError(f"{path}: missing file")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise IhdpFormatError(f"{path}:1: empty file")
    if rows[0] != HEADER:
        raise IhdpFormatError(
            f"{path}:1: bad header, expected {len(HEADER)} columns "
            f"(x0..x{N_COVARIATES - 1},t,y_factual,y_cfactual,mu0,mu1), got {len(rows[0])}")
    data = np.empty((len(rows) - 1, len(HEADER)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(HEADER):
            raise IhdpFormatError(f"{path}:{i}: expected {len(HEADER)} fields, got {len(row)}")
        try:
            data[i - 2] = [float(v) for v in row]
        except ValueError as exc:
            raise IhdpFormatError(f"{path}:{i}: non-numeric value ({exc})") from None
        tv = data[i - 2, N_COVARIATES]
        if tv not in (0.0, 1.0):
            raise IhdpFormatError(f"{path}:{i}: t must be 0 or 1, got {tv}")
    return data


def train_path(root, rid):
    return Path(root) / f"ihdp_train_{rid}.csv"


def test_path(root, rid):
    return Path(root) / f"ihdp_test_{rid}.csv"


def load_realization(root, rid):
    """Load and validate one realization from `root`."""
    if not 1 <= rid <= 100:
        raise ValueError(f"realization id must be in 1..100, got {rid}")
    train = _read_csv(train_path(root, rid))
    test = _read_csv(test_path(root, rid))
    combined = np.vstack([train, test])
    is_test = np.zeros(len(combined), dtype=bool)
    is_test[len(train):] = True

    n_treated = int(combined[:, N_COVARIATES].sum())
    if len(combined) != EXPECTED_ROWS:
        warnings.warn(
            f"realization {rid}: {len(combined)} combined rows, expected {EXPECTED_ROWS}")
    if n_treated != EXPECTED_TREATED:
        warnings.warn(
            f"realization {rid}: {n_treated} treated units, expected {EXPECTED_TREATED}")

    c = N_COVARIATES
    real = IhdpRealization(
        realization_id=rid,
        x=combined[:, :c],
        t=combined[:, c],
        y_factual=combined[:, c + 1],
        y_cfactual=combined[:, c + 2],
        mu0=combined[:, c + 3],
        mu1=combined[:, c + 4],
        is_test=is_test,
    )
    if not np.isfinite(real.cate).all():
        raise IhdpFormatError(f"realization {rid}: non-finite mu0/mu1 values")
    return real


def make_splits(realization, val_frac=0.20, seed=0):
    """(train, val, test): test is the predefined portion, validation a seeded
    fraction of the training portion."""
    if not 0 < val_frac < 1:
        raise ValueError(f"val_frac must be in (0, 1), got {val_frac}")
    test = realization.portion(test=True)
    train_all = realization.portion(test=False)
    n_val = int(np.floor(val_frac * train_all.n))
    if n_val < 1 or n_val >= train_all.n:
        raise ValueError(f"degenerate validation split: {n_val} of {train_all.n}")
    perm = SeededRng(seed).permutation(train_all.n)
    val = train_all.subset(perm[:n_val])
    train = train_all.subset(perm[n_val:])
    return train, val, test


def _fmt(x):
    return format(float(x), ".17g")


def write_portion_csv(path, x, t, yf, ycf, mu0, mu1):
    """Emit one portion in the ingest layout (17 significant digits)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for i in range(len(x)):
            row = [_fmt(v) for v in x[i]]
            row += [_fmt(t[i]), _fmt(yf[i]), _fmt(ycf[i]), _fmt(mu0[i]), _fmt(mu1[i])]
            w.writerow(row)


def write_realization(realization, out_dir):
    """Re-emit a loaded realization; used for round-trip verification."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for test, path in ((False, train_path(out_dir, realization.realization_id)),
                       (True, test_path(out_dir, realization.realization_id))):
        idx = np.where(realization.is_test == test)[0]
        write_portion_csv(path, realization.x[idx], realization.t[idx],
                          realization.y_factual[idx], realization.y_cfactual[idx],
                          realization.mu0[idx], realization.mu1[idx])
