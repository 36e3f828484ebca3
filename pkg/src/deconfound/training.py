"""Joint objective assembly, the adversarial-lambda schedule, and the
mini-batch training loop with patience-based early stopping."""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from . import disentangle as dis
from . import zoo


@dataclass
class TrainConfig:
    """Optimisation and balancing hyperparameters for one training run."""

    batch_size: int = 100
    lr: float = 1e-4
    l2_lambda1: float = 1e-4
    ortho_lambda2: float = 0.01
    max_epochs: int = 1000
    patience: int = 50
    val_fraction: float = 0.30
    alpha: float | None = None  # None: unit mode; in (0, 1): alpha-weighted mode
    lambda0: float = 1.0
    gamma: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.val_fraction < 1:
            raise ValueError(f"val_fraction must be in (0, 1), got {self.val_fraction}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.gamma < 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if self.lambda0 < 0:
            raise ValueError(f"lambda0 must be >= 0, got {self.lambda0}")
        if self.alpha is not None and not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.ortho_lambda2 < 0:
            raise ValueError(f"ortho_lambda2 must be >= 0, got {self.ortho_lambda2}")


def lambda_schedule(epoch, lambda0, gamma):
    """Adversarial weight lambda0 * (2 / (1 + exp(-10 * epoch / gamma)) - 1)."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    if lambda0 < 0:
        raise ValueError(f"lambda0 must be >= 0, got {lambda0}")
    if gamma < 1:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    return lambda0 * (2.0 / (1.0 + math.exp(-10.0 * epoch / gamma)) - 1.0)


def _columns(tape, *arrays):
    return [tape.constant(np.asarray(a, dtype=np.float64).reshape(-1, 1)) for a in arrays]


def factual_outcome(tape, t, mu0, mu1):
    """mu_hat routed by the observed treatment: t * mu1 + (1 - t) * mu0."""
    t = np.asarray(t, dtype=np.float64).reshape(-1, 1)
    t_node, omt_node = _columns(tape, t, 1.0 - t)
    return ag.add(ag.mul(t_node, mu1), ag.mul(omt_node, mu0))


def factual_loss(y, t, mu0, mu1):
    """Mean squared error against the head matching each unit's treatment."""
    tape = mu0.tape
    q = factual_outcome(tape, t, mu0, mu1)
    (y_node,) = _columns(tape, y)
    return ag.reduce_mean(ag.square(ag.sub(y_node, q)))


def propensity_loss(t, pi):
    """Mean binary cross-entropy of the treatment classifier."""
    tape = pi.tape
    t = np.asarray(t, dtype=np.float64).reshape(-1, 1)
    t_node, omt_node, ones = _columns(tape, t, 1.0 - t, np.ones_like(t))
    ll = ag.add(ag.mul(t_node, ag.logn(pi)),
                ag.mul(omt_node, ag.logn(ag.sub(ones, pi))))
    return ag.scale(ag.reduce_mean(ll), -1.0)


Batch = namedtuple("Batch", ["X", "t", "y"])


def total_objective(model, batch, lam, config):
    """Assemble the training objective for one batch.

    Returns (root node, bundle, parts) where parts holds the scalar value of
    each term for tracing. The GRL lambda enters through the forward pass,
    never as a loss coefficient.
    """
    X, t, y = batch.X, batch.t, batch.y
    spec = model.spec
    bundle = zoo.forward(model, X, lam=lam if spec.adversarial else 0.0)
    tape = bundle.tape
    parts = {}

    l_y = factual_loss(y, t, bundle.mu0, bundle.mu1)
    parts["L_y"] = float(l_y.value[0, 0])
    if spec.has_propensity_head:
        l_t = propensity_loss(t, bundle.pi)
        parts["L_t"] = float(l_t.value[0, 0])
        if config.alpha is None:
            total = ag.add(l_y, l_t)
        else:
            total = ag.add(ag.scale(l_y, config.alpha), ag.scale(l_t, 1.0 - config.alpha))
    else:
        # no propensity term, hence no coefficient pair to balance
        total = l_y

    if config.l2_lambda1 > 0:
        r2 = ag.sum_sq([tape.leaf(w) for w in model.weight_params()])
        parts["R_2"] = float(r2.value[0, 0])
        total = ag.add(total, ag.scale(r2, config.l2_lambda1))

    if spec.has_disentangled_reps and config.ortho_lambda2 > 0:
        wbars = [dis.contribution_node([tape.leaf(w) for w in model.rep_weight_params(f)])
                 for f in model.contribution_factors()]
        l_o = dis.orthogonality_loss_node(wbars)
        r_o = dis.ortho_regulariser_node(wbars)
        parts["L_O"] = float(l_o.value[0, 0])
        parts["R_O"] = float(r_o.value[0, 0])
        total = ag.add(total, ag.scale(ag.add(l_o, r_o), config.ortho_lambda2))

    if spec.family == "cfrnet" and spec.mmd_weight > 0:
        rep = bundle.reps["C"]
        treated = ag.gather_rows(rep, np.where(t == 1.0)[0])
        control = ag.gather_rows(rep, np.where(t == 0.0)[0])
        mmd = zoo.mmd_linear(treated, control)
        parts["MMD"] = float(mmd.value[0, 0])
        total = ag.add(total, ag.scale(mmd, spec.mmd_weight))

    if spec.family == "dragonnet_tr":
        q = factual_outcome(tape, t, bundle.mu0, bundle.mu1)
        tr = zoo.targeted_regularisation(y, t, q, bundle.pi, tape.leaf(model.epsilon))
        parts["TR"] = float(tr.value[0, 0])
        total = ag.add(total, ag.scale(tr, spec.tr_weight))

    return total, bundle, parts


def validation_loss(model, data, config):
    """Supervised model-selection criterion on held-out data.

    Factual MSE, plus the propensity cross-entropy when the family has a
    treatment classifier, combined with the same weighting as training.
    """
    bundle = zoo.forward(model, data.X, lam=0.0)
    l_y = float(factual_loss(data.y, data.t, bundle.mu0, bundle.mu1).value[0, 0])
    if not model.spec.has_propensity_head:
        return l_y
    l_t = float(propensity_loss(data.t, bundle.pi).value[0, 0])
    if config.alpha is None:
        return l_y + l_t
    return config.alpha * l_y + (1.0 - config.alpha) * l_t


@dataclass
class EarlyStopState:
    """Best-so-far tracking for patience-based stopping."""

    patience: int
    best_val_loss: float = math.inf
    best_params: list | None = None
    epochs_since_improvement: int = 0

    def update(self, val_loss, snapshot):
        """Record one epoch's validation loss; returns True when out of patience."""
        if val_loss < self.best_val_loss:
            self.best_val_loss = val_loss
            self.best_params = snapshot()
            self.epochs_since_improvement = 0
            return False
        self.epochs_since_improvement += 1
        return self.epochs_since_improvement >= self.patience


@dataclass
class TrainReport:
    epochs_run: int = 0
    train_trace: list = field(default_factory=list)
    val_trace: list = field(default_factory=list)
    lambda_trace: list = field(default_factory=list)
    final_lambda: float = 0.0
    diverged: bool = False
    best_val_loss: float = math.inf

    def trace_rows(self):
        """Line-oriented (epoch, train_loss, val_loss, lambda) records."""
        return [(e + 1, tr, va, la) for e, (tr, va, la) in
                enumerate(zip(self.train_trace, self.val_trace, self.lambda_trace))]


class DivergedRun(RuntimeError):
    """Raised internally when training hits non-finite values."""


def train(model, train_data, val_data, config):
    """Mini-batch training with per-epoch lambda schedule and early stopping.

    The model is updated in place and finishes holding the best-validation
    snapshot. A divergent run (non-finite loss or gradient) stops training,
    sets the report's flag, and leaves the best snapshot (when one exists).
    """
    rng = ag.SeededRng(config.seed).child(1)
    optimiser = ag.Adam(model.parameters(), lr=config.lr)
    stopper = EarlyStopState(patience=config.patience)
    report = TrainReport()
    n = train_data.n
    lambda0 = config.lambda0 if model.spec.adversarial else 0.0

    try:
        for epoch in range(1, config.max_epochs + 1):
            lam = lambda_schedule(epoch - 1, lambda0, config.gamma)
            order = rng.permutation(n)
            batch_losses = []
            for lo in range(0, n, config.batch_size):
                idx = order[lo:lo + config.batch_size]
                batch = Batch(train_data.X[idx], train_data.t[idx], train_data.y[idx])
                total, _, _ = total_objective(model, batch, lam, config)
                loss = float(total.value[0, 0])
                if not math.isfinite(loss):
                    raise DivergedRun(f"non-finite training loss at epoch {epoch}")
                total.tape.backward(total)
                optimiser.step()
                batch_losses.append(loss)

            val_loss = validation_loss(model, val_data, config)
            if not math.isfinite(val_loss):
                raise DivergedRun(f"non-finite validation loss at epoch {epoch}")

            report.epochs_run = epoch
            report.train_trace.append(float(np.mean(batch_losses)))
            report.val_trace.append(val_loss)
            report.lambda_trace.append(lam)
            report.final_lambda = lam
            if stopper.update(val_loss, model.snapshot):
                break
    except (DivergedRun, ag.DivergenceError):
        report.diverged = True

    if stopper.best_params is not None:
        model.restore(stopper.best_params)
        report.best_val_loss = stopper.best_val_loss
    return report


def coefficient_search(score, max_steps=64):
    """Greedy alpha search for the supervised-loss weighting.

    Starts at 0.5 and walks by 0.1 in the improving direction while the
    score keeps improving; past 0.1 it divides by 10, past 0.9 it appends
    another 9. Returns the best-scoring alpha visited (0.5 when neither
    first step improves).
    """
    best_alpha = 0.5
    best = score(0.5)

    def advance(a, direction):
        if direction > 0:
            return round(a + 0.1, 12) if a < 0.9 - 1e-9 else round(1.0 - (1.0 - a) / 10.0, 15)
        return round(a - 0.1, 12) if a > 0.1 + 1e-9 else a / 10.0

    up, down = score(0.6), score(0.4)
    if min(up, down) >= best:
        return 0.5
    if up <= down:
        direction, cur, cur_score = +1, 0.6, up
    else:
        direction, cur, cur_score = -1, 0.4, down
    best_alpha, best = cur, cur_score

    for _ in range(max_steps):
        nxt = advance(cur, direction)
        if not 0.0 < nxt < 1.0 or nxt == cur:
            break
        s = score(nxt)
        if s < best:
            best_alpha, best = nxt, s
            cur = nxt
        else:
            break
    return best_alpha
