"""Observational dataset container shared by the synthetic and IHDP pipelines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ObservationalData:
    """Context matrix, binary treatments, outcomes, optional oracle surfaces."""

    X: np.ndarray
    t: np.ndarray
    y: np.ndarray
    mu0: np.ndarray | None = None
    mu1: np.ndarray | None = None
    pi: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.t = np.asarray(self.t, dtype=np.float64).reshape(-1)
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if self.X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {self.X.shape}")
        n = self.X.shape[0]
        if self.t.shape[0] != n or self.y.shape[0] != n:
            raise ValueError(
                f"length mismatch: X has {n} rows, t {self.t.shape[0]}, y {self.y.shape[0]}")
        if not np.isin(self.t, (0.0, 1.0)).all():
            raise ValueError("t must be binary (0/1)")
        for name in ("mu0", "mu1", "pi"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=np.float64).reshape(-1)
                if v.shape[0] != n:
                    raise ValueError(f"{name} has {v.shape[0]} entries, expected {n}")
                setattr(self, name, v)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def cate(self):
        if self.mu0 is None or self.mu1 is None:
            return None
        return self.mu1 - self.mu0

    def subset(self, idx):
        idx = np.asarray(idx)
        pick = lambda v: None if v is None else v[idx]
        return ObservationalData(self.X[idx], self.t[idx], self.y[idx],
                                 pick(self.mu0), pick(self.mu1), pick(self.pi))
