"""Synthetic observational data with oracle counterfactuals.

Covariates are iid standard normal, laid out as contiguous blocks
[confounders | outcome-only | treatment-only | effect modifiers]. Outcome
surfaces are sums of squares: mu0 over the confounder+outcome block, the
treatment effect over the modifier block. Treatment probability is a
logistic function of the centred mean square over the confounder+treatment
block, with selection-bias strength xi.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .autograd import SeededRng
from .data import ObservationalData


@dataclass
class DgpConfig:
    n: int
    d: int = 25
    d_O: int = 5
    d_T: int = 5
    d_C: int = 10
    xi: float = 3.0
    noise_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.d_O, self.d_T, self.d_C) < 0:
            raise ValueError("covariate block sizes must be >= 0")
        if self.d_O + self.d_T + self.d_C > self.d:
            raise ValueError(
                f"blocks exceed d: {self.d_O} + {self.d_T} + {self.d_C} > {self.d}")
        if self.d_C + self.d_T == 0:
            raise ValueError("propensity undefined: need at least one confounder or treatment covariate")
        if self.xi < 0:
            raise ValueError(f"xi must be >= 0, got {self.xi}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")

    @property
    def d_tau(self):
        return self.d - self.d_O - self.d_T - self.d_C

    # Column blocks: [C | O | T | tau]
    @property
    def cols_C(self):
        return np.arange(0, self.d_C)

    @property
    def cols_O(self):
        return np.arange(self.d_C, self.d_C + self.d_O)

    @property
    def cols_T(self):
        return np.arange(self.d_C + self.d_O, self.d_C + self.d_O + self.d_T)

    @property
    def cols_tau(self):
        return np.arange(self.d_C + self.d_O + self.d_T, self.d)

    @property
    def label(self):
        """Dataset tag in the w{treatment}-c{confounder}-o{outcome}-{n}K scheme."""
        return f"w{self.d_T}-c{self.d_C}-o{self.d_O}-{self.n / 1000:g}K"


@dataclass
class SyntheticDataset(ObservationalData):
    config: DgpConfig | None = None


def _expit(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def draw_covariates(config):
    """The covariate draw used by generate(); exposed so sweep variants can
    share one X while redrawing treatments and outcomes per variant."""
    return SeededRng(config.seed).child(0).normal((config.n, config.d))


def generate(config, X=None):
    """Draw one synthetic dataset; pass X to reuse a shared covariate draw.

    Covariates and (treatment, noise) come from independent child streams of
    the seed, so generating with an explicitly passed X equals the plain call
    bit for bit when X is the same draw.
    """
    if X is None:
        X = draw_covariates(config)
    else:
        X = np.asarray(X, dtype=np.float64)
        if X.shape != (config.n, config.d):
            raise ValueError(f"shared X has shape {X.shape}, expected {(config.n, config.d)}")
    rng = SeededRng(config.seed).child(1)

    sq = X * X
    cols_CO = np.concatenate([config.cols_C, config.cols_O])
    cols_CT = np.concatenate([config.cols_C, config.cols_T])
    mu0 = sq[:, cols_CO].sum(axis=1)
    mu1 = mu0 + sq[:, config.cols_tau].sum(axis=1)
    s = sq[:, cols_CT].mean(axis=1)
    omega = np.median(s)
    pi = _expit(config.xi * (s - omega))
    t = rng.binomial(pi)
    noise = config.noise_sigma * rng.normal((config.n,))
    y = t * mu1 + (1.0 - t) * mu0 + noise

    ds = SyntheticDataset(X, t, y, mu0=mu0, mu1=mu1, pi=pi, config=config)
    assert np.all((ds.pi > 0.0) & (ds.pi < 1.0))
    assert np.all(ds.mu1 >= ds.mu0)
    return ds


def split(dataset, test_frac=0.30, val_frac=0.30, seed=0):
    """Disjoint, exhaustive (train, val, test) partition by seeded shuffle."""
    if not (0 < test_frac < 1 and 0 < val_frac < 1):
        raise ValueError("split fractions must be in (0, 1)")
    n = dataset.n
    n_test = int(np.floor(n * test_frac))
    n_val = int(np.floor((n - n_test) * val_frac))
    n_train = n - n_test - n_val
    if min(n_test, n_val, n_train) < 1:
        raise ValueError(f"empty partition for n={n}: train={n_train}, val={n_val}, test={n_test}")
    perm = SeededRng(seed).permutation(n)
    test = perm[:n_test]
    val = perm[n_test:n_test + n_val]
    train = perm[n_test + n_val:]
    return dataset.subset(train), dataset.subset(val), dataset.subset(test)


SIZE_SWEEP_N = (2000, 3000, 5000, 7000)
CONFOUNDING_SWEEP_DC = (10, 11, 12, 13)


def sweep_configs(kind, seed=0, noise_sigma=1.0):
    """Dataset configurations for the size and confounding sweeps."""
    if kind == "size":
        return [DgpConfig(n=n, seed=seed, noise_sigma=noise_sigma) for n in SIZE_SWEEP_N]
    if kind == "confounding":
        return [DgpConfig(n=3000, d_C=c, seed=seed, noise_sigma=noise_sigma)
                for c in CONFOUNDING_SWEEP_DC]
    raise ValueError(f"unknown sweep kind {kind!r}; expected 'size' or 'confounding'")


def generate_confounding_family(configs):
    """Generate the confounding-sweep variants from one shared covariate draw."""
    X = draw_covariates(configs[0])
    return [generate(c, X=X) for c in configs]


def _fmt(x):
    return format(float(x), ".17g")


def to_csv(dataset, path):
    """Persist as header + rows: x0..x{d-1}, t, y, mu0, mu1, pi."""
    d = dataset.d
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j}" for j in range(d)] + ["t", "y", "mu0", "mu1", "pi"])
        for i in range(dataset.n):
            row = [_fmt(v) for v in dataset.X[i]]
            row += [_fmt(dataset.t[i]), _fmt(dataset.y[i]),
                    _fmt(dataset.mu0[i]), _fmt(dataset.mu1[i]), _fmt(dataset.pi[i])]
            w.writerow(row)


def from_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    d = sum(1 for h in header if h.startswith("x"))
    body = np.array([[float(v) for v in r] for r in rows[1:]])
    return SyntheticDataset(body[:, :d], body[:, d], body[:, d + 1],
                            mu0=body[:, d + 2], mu1=body[:, d + 3], pi=body[:, d + 4])
