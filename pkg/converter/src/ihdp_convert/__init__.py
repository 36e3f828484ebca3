"""One-shot converter from the IHDP100 npz archives to per-realization CSVs.

The archives hold arrays x (units, 25, 100), t, yf, ycf, mu0, mu1 for the
train and test portions, realizations stacked on the last axis. Output is
one `ihdp_train_r.csv` and one `ihdp_test_r.csv` per realization r in 1..100
with header x0..x24,t,y_factual,y_cfactual,mu0,mu1, written as
17-significant-digit decimal text so 64-bit values round-trip exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

REQUIRED_ARRAYS = ("x", "t", "yf", "ycf", "mu0", "mu1")
N_COVARIATES = 25
HEADER = [f"x{j}" for j in range(N_COVARIATES)] + ["t", "y_factual", "y_cfactual", "mu0", "mu1"]


class ArchiveError(ValueError):
    """Archive does not match the expected manifest."""


@dataclass
class ArchiveManifest:
    """Expected structure of the train/test archives."""

    train_path: str
    test_path: str
    n_covariates: int = N_COVARIATES
    n_realizations: int = 100

    def validate(self, npz, which):
        """Check one archive against the manifest; returns its row count."""
        missing = [k for k in REQUIRED_ARRAYS if k not in npz.files]
        if missing:
            raise ArchiveError(f"{which} archive: missing arrays {missing}")
        x = npz["x"]
        if x.ndim != 3 or x.shape[1] != self.n_covariates or x.shape[2] != self.n_realizations:
            raise ArchiveError(
                f"{which} archive: x has shape {x.shape}, expected "
                f"(rows, {self.n_covariates}, {self.n_realizations})")
        rows = x.shape[0]
        for k in REQUIRED_ARRAYS[1:]:
            a = npz[k]
            if a.shape != (rows, self.n_realizations):
                raise ArchiveError(
                    f"{which} archive: {k} has shape {a.shape}, expected "
                    f"({rows}, {self.n_realizations})")
        t = npz["t"]
        if not np.isin(t, (0.0, 1.0)).all():
            raise ArchiveError(f"{which} archive: t contains non-binary values")
        return rows


def _fmt(x):
    return format(float(x), ".17g")


def _write_portion(path, npz, r):
    """Emit realization r (0-based index) of one archive."""
    x = npz["x"][:, :, r]
    cols = [npz[k][:, r] for k in ("t", "yf", "ycf", "mu0", "mu1")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for i in range(x.shape[0]):
            w.writerow([_fmt(v) for v in x[i]] + [_fmt(c[i]) for c in cols])
    return int(cols[0].sum())


def convert(train_path, test_path, out_dir, manifest=None, echo=print):
    """Convert both archives; returns the list of output paths.

    Prints per-realization row and treated counts (read from the archive
    itself). Aborts with a diagnostic on a missing array or shape mismatch.
    """
    manifest = manifest or ArchiveManifest(str(train_path), str(test_path))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with np.load(train_path) as train_npz, np.load(test_path) as test_npz:
        n_train = manifest.validate(train_npz, "train")
        n_test = manifest.validate(test_npz, "test")
        written = []
        for r in range(1, manifest.n_realizations + 1):
            train_file = out_dir / f"ihdp_train_{r}.csv"
            test_file = out_dir / f"ihdp_test_{r}.csv"
            treated_train = _write_portion(train_file, train_npz, r - 1)
            treated_test = _write_portion(test_file, test_npz, r - 1)
            written += [train_file, test_file]
            echo(f"realization {r}: train {n_train} rows ({treated_train} treated), "
                 f"test {n_test} rows ({treated_test} treated), "
                 f"combined {n_train + n_test} rows "
                 f"({treated_train + treated_test} treated)")
    return written
