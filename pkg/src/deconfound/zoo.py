"""Estimator architectures: declarative specs, parameter construction, forward pass.

Families and their wiring:

* slearner      one stack on the treatment-augmented input [X, T]
* tlearner      two independent stacks, one per treatment arm
* tarnet        shared representation, two outcome heads
* cfrnet        tarnet plus a linear-MMD balancing term
* dragonnet     tarnet plus a propensity head (affine + sigmoid) on the shared rep
* dragonnet_tr  dragonnet plus targeted regularisation with a trainable scalar
* drcfr         three factor nets (I, C, A); outcome heads on [C, A], propensity on [I, C]
* snet          five factor nets (I, C, A, A0, A1); mu0 on [C, A, A0], mu1 on
                [C, A, A1], propensity on [I, C]

With ``adversarial=True`` ("+" variants) a gradient reversal layer sits on the
confounder representation's path into the propensity head only; forward
outputs are identical to the plain variant.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import ParamTensor, ShapeError, Tape

log = logging.getLogger("deconfound")

FAMILIES = ("slearner", "tlearner", "tarnet", "cfrnet",
            "dragonnet", "dragonnet_tr", "drcfr", "snet")
ADVERSARIAL_FAMILIES = frozenset({"dragonnet", "dragonnet_tr", "drcfr", "snet"})
FACTOR_ORDER = ("I", "C", "A", "A0", "A1")

PI_CLIP = 1e-7


@dataclass
class LayerSpec:
    width: int
    activation: str = "elu"

    def __post_init__(self):
        if self.width < 1:
            raise ValueError(f"layer width must be >= 1, got {self.width}")
        if self.activation not in ("elu", "identity", "sigmoid"):
            raise ValueError(f"unknown activation {self.activation!r}")


def _layers(widths):
    return [LayerSpec(w) for w in widths]


# Per-family defaults: representation widths and head hidden widths.
_DEFAULT_REPS = {
    "slearner": {"C": [200, 200, 200, 100, 100]},
    "tlearner": {},
    "tarnet": {"C": [200, 200, 200]},
    "cfrnet": {"C": [200, 200, 200]},
    "dragonnet": {"C": [200, 200, 200]},
    "dragonnet_tr": {"C": [200, 200, 200]},
    "drcfr": {"C": [150], "A": [50], "I": [50]},
    "snet": {"C": [100], "I": [100], "A": [50], "A1": [50], "A0": [50]},
}
_DEFAULT_HEADS = {
    "slearner": {"mu0": []},
    "tlearner": {"mu0": [100, 100, 100, 50, 50], "mu1": [100, 100, 100, 50, 50]},
    "tarnet": {"mu0": [100, 100], "mu1": [100, 100]},
    "cfrnet": {"mu0": [100, 100], "mu1": [100, 100]},
    "dragonnet": {"mu0": [100, 100], "mu1": [100, 100], "pi": []},
    "dragonnet_tr": {"mu0": [100, 100], "mu1": [100, 100], "pi": []},
    "drcfr": {"mu0": [100, 100], "mu1": [100, 100], "pi": []},
    "snet": {"mu0": [100, 100], "mu1": [100, 100], "pi": []},
}
# Which representation factors feed each head (concatenated in this order).
_HEAD_INPUTS = {
    "tarnet": {"mu0": ("C",), "mu1": ("C",)},
    "cfrnet": {"mu0": ("C",), "mu1": ("C",)},
    "dragonnet": {"mu0": ("C",), "mu1": ("C",), "pi": ("C",)},
    "dragonnet_tr": {"mu0": ("C",), "mu1": ("C",), "pi": ("C",)},
    "drcfr": {"mu0": ("C", "A"), "mu1": ("C", "A"), "pi": ("I", "C")},
    "snet": {"mu0": ("C", "A", "A0"), "mu1": ("C", "A", "A1"), "pi": ("I", "C")},
}


@dataclass
class EstimatorSpec:
    """Declarative architecture: family, adversarial flag, layer widths."""

    family: str
    adversarial: bool = False
    rep_layers: dict = field(default_factory=dict)   # factor -> [LayerSpec]
    head_layers: dict = field(default_factory=dict)  # head -> [LayerSpec] (hidden only)
    mmd_weight: float = 1.0
    tr_weight: float = 1.0
    tr_epsilon_init: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.adversarial and self.family not in ADVERSARIAL_FAMILIES:
            raise ValueError(
                f"{self.family} has no confounder-fed propensity head; "
                f"adversarial training applies only to {sorted(ADVERSARIAL_FAMILIES)}")
        if self.mmd_weight < 0:
            raise ValueError(f"mmd_weight must be >= 0, got {self.mmd_weight}")
        reps = {k: _coerce_layers(v) for k, v in _DEFAULT_REPS[self.family].items()}
        heads = {k: _coerce_layers(v) for k, v in _DEFAULT_HEADS[self.family].items()}
        for k, v in (self.rep_layers or {}).items():
            if k not in reps:
                raise ValueError(f"family {self.family} has no representation factor {k!r}")
            reps[k] = _coerce_layers(v)
        for k, v in (self.head_layers or {}).items():
            if k not in heads:
                raise ValueError(f"family {self.family} has no head {k!r}")
            heads[k] = _coerce_layers(v)
        for k, v in reps.items():
            if not v:
                raise ValueError(f"representation {k} must have at least one layer")
        self.rep_layers = reps
        self.head_layers = heads

    @property
    def has_propensity_head(self):
        return "pi" in self.head_layers

    @property
    def has_disentangled_reps(self):
        return self.family in ("drcfr", "snet")

    def to_dict(self):
        return {
            "family": self.family,
            "adversarial": self.adversarial,
            "rep_layers": {k: [l.width for l in v] for k, v in self.rep_layers.items()},
            "head_layers": {k: [l.width for l in v] for k, v in self.head_layers.items()},
            "mmd_weight": self.mmd_weight,
            "tr_weight": self.tr_weight,
            "tr_epsilon_init": self.tr_epsilon_init,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _coerce_layers(widths):
    out = []
    for w in widths:
        out.append(w if isinstance(w, LayerSpec) else LayerSpec(int(w)))
    return out


# Canonical estimator names: family plus the "+" adversarial marker.
ESTIMATOR_NAMES = {}
for _f in FAMILIES:
    ESTIMATOR_NAMES[_f] = (_f, False)
    if _f in ADVERSARIAL_FAMILIES:
        ESTIMATOR_NAMES[_f + "+"] = (_f, True)


def spec_from_name(name, **overrides):
    try:
        family, adversarial = ESTIMATOR_NAMES[name]
    except KeyError:
        raise ValueError(f"unknown estimator {name!r}; expected one of {sorted(ESTIMATOR_NAMES)}")
    return EstimatorSpec(family=family, adversarial=adversarial, **overrides)


def estimator_name(spec):
    return spec.family + ("+" if spec.adversarial else "")


@dataclass
class DenseLayer:
    W: ParamTensor
    b: ParamTensor
    activation: str

    def apply(self, tape, x):
        h = ag.add_bias(ag.matmul(x, tape.leaf(self.W)), tape.leaf(self.b))
        if self.activation == "elu":
            return ag.elu(h)
        if self.activation == "sigmoid":
            return ag.sigmoid(h)
        return h


class Model:
    """Built parameters for one estimator, grouped by role."""

    def __init__(self, spec, input_dim, reps, heads, epsilon=None):
        self.spec = spec
        self.input_dim = input_dim
        self.reps = reps        # factor -> [DenseLayer]
        self.heads = heads      # head name -> [DenseLayer]
        self.epsilon = epsilon  # dragonnet_tr perturbation scalar

    def parameter_groups(self):
        groups = {}
        for factor, layers in self.reps.items():
            groups[f"rep_{factor}"] = [p for l in layers for p in (l.W, l.b)]
        for head, layers in self.heads.items():
            groups[f"head_{head}"] = [p for l in layers for p in (l.W, l.b)]
        if self.epsilon is not None:
            groups["tr_epsilon"] = [self.epsilon]
        return groups

    def parameters(self):
        return [p for ps in self.parameter_groups().values() for p in ps]

    def weight_params(self):
        """Weight matrices only (no biases, no perturbation scalar); the l2 target."""
        out = [l.W for layers in self.reps.values() for l in layers]
        out += [l.W for layers in self.heads.values() for l in layers]
        return out

    def rep_weight_params(self, factor):
        return [l.W for l in self.reps[factor]]

    def contribution_factors(self):
        if not self.spec.has_disentangled_reps:
            return []
        return [f for f in FACTOR_ORDER if f in self.reps]

    def snapshot(self):
        return [p.values.copy() for p in self.parameters()]

    def restore(self, snap):
        for p, v in zip(self.parameters(), snap):
            p.values[...] = v


def _build_stack(specs, in_dim, rng, prefix, out_width=None):
    layers = []
    width = in_dim
    for i, ls in enumerate(specs):
        W = ParamTensor(ag.glorot_uniform_init((width, ls.width), rng), f"{prefix}.L{i}.W")
        b = ParamTensor(np.zeros((1, ls.width)), f"{prefix}.L{i}.b")
        layers.append(DenseLayer(W, b, ls.activation))
        width = ls.width
    if out_width is not None:
        W = ParamTensor(ag.glorot_uniform_init((width, out_width), rng), f"{prefix}.out.W")
        b = ParamTensor(np.zeros((1, out_width)), f"{prefix}.out.b")
        layers.append(DenseLayer(W, b, "identity"))
    return layers


def build_estimator(spec, input_dim, rng):
    """Construct a Model with Glorot-uniform weights and zero biases."""
    if input_dim < 1:
        raise ValueError(f"input_dim must be >= 1, got {input_dim}")
    reps, heads = {}, {}
    rep_in = input_dim + 1 if spec.family == "slearner" else input_dim
    for factor in FACTOR_ORDER:
        if factor in spec.rep_layers:
            reps[factor] = _build_stack(spec.rep_layers[factor], rep_in, rng, f"rep_{factor}")
    rep_width = {f: layers[-1].W.shape[1] for f, layers in reps.items()}

    if spec.family == "slearner":
        heads["mu0"] = _build_stack(spec.head_layers["mu0"], rep_width["C"], rng, "head_mu0", out_width=1)
    elif spec.family == "tlearner":
        for head in ("mu0", "mu1"):
            heads[head] = _build_stack(spec.head_layers[head], input_dim, rng, f"head_{head}", out_width=1)
    else:
        inputs = _HEAD_INPUTS[spec.family]
        for head in ("mu0", "mu1", "pi"):
            if head not in spec.head_layers:
                continue
            in_w = sum(rep_width[f] for f in inputs[head])
            heads[head] = _build_stack(spec.head_layers[head], in_w, rng, f"head_{head}", out_width=1)

    epsilon = None
    if spec.family == "dragonnet_tr":
        epsilon = ParamTensor(np.full((1, 1), spec.tr_epsilon_init), "tr_epsilon")
    return Model(spec, input_dim, reps, heads, epsilon)


class PredBundle:
    """Nodes for the per-batch predictions plus the tape they live on."""

    def __init__(self, tape, mu0, mu1, pi, reps):
        self.tape = tape
        self.mu0 = mu0
        self.mu1 = mu1
        self.pi = pi
        self.reps = reps

    @property
    def mu0_hat(self):
        return self.mu0.value[:, 0].copy()

    @property
    def mu1_hat(self):
        return self.mu1.value[:, 0].copy()

    @property
    def pi_hat(self):
        return None if self.pi is None else self.pi.value[:, 0].copy()


def _check_inputs(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ShapeError(
            f"forward: expected (n, {model.input_dim}) inputs, got {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("forward: inputs contain non-finite values")
    return X


def _apply(tape, x, layers):
    h = x
    for layer in layers:
        h = layer.apply(tape, h)
    return h


def forward(model, X, lam=0.0):
    """Evaluate the estimator on a batch; returns prediction nodes on a fresh tape."""
    if lam < 0:
        raise ValueError(f"forward: lambda must be >= 0, got {lam}")
    X = _check_inputs(model, X)
    tape = Tape()
    xc = tape.constant(X)
    spec = model.spec

    if spec.family == "slearner":
        n = X.shape[0]
        zeros = tape.constant(np.zeros((n, 1)))
        ones = tape.constant(np.ones((n, 1)))
        trunk = model.reps["C"]
        h0 = _apply(tape, ag.concat_cols([xc, zeros]), trunk)
        h1 = _apply(tape, ag.concat_cols([xc, ones]), trunk)
        mu0 = _apply(tape, h0, model.heads["mu0"])
        mu1 = _apply(tape, h1, model.heads["mu0"])
        return PredBundle(tape, mu0, mu1, None, {})

    if spec.family == "tlearner":
        mu0 = _apply(tape, xc, model.heads["mu0"])
        mu1 = _apply(tape, xc, model.heads["mu1"])
        return PredBundle(tape, mu0, mu1, None, {})

    reps = {f: _apply(tape, xc, model.reps[f]) for f in model.reps}
    inputs = _HEAD_INPUTS[spec.family]

    def head_input(head):
        parts = []
        for f in inputs[head]:
            node = reps[f]
            if head == "pi" and f == "C" and spec.adversarial:
                node = ag.grad_reverse(node, lam)
            parts.append(node)
        return parts[0] if len(parts) == 1 else ag.concat_cols(parts)

    mu0 = _apply(tape, head_input("mu0"), model.heads["mu0"])
    mu1 = _apply(tape, head_input("mu1"), model.heads["mu1"])
    pi = None
    if spec.has_propensity_head:
        logit = _apply(tape, head_input("pi"), model.heads["pi"])
        pi = ag.clip(ag.sigmoid(logit), PI_CLIP, 1.0 - PI_CLIP)
    return PredBundle(tape, mu0, mu1, pi, reps)


def predict(model, X):
    """Plain numpy predictions (GRL inactive; it is a forward identity anyway)."""
    return forward(model, X, lam=0.0)


def mmd_linear(rep_treated, rep_control):
    """Squared distance between group means of a shared representation.

    An empty group contributes 0 and is flagged in the run log.
    """
    if rep_treated.shape[0] == 0 or rep_control.shape[0] == 0:
        log.warning("mmd_linear: empty treatment group in batch; term contributes 0")
        return rep_treated.tape.constant(np.zeros((1, 1)))
    if rep_treated.shape[1] != rep_control.shape[1]:
        raise ShapeError(
            f"mmd_linear: feature widths differ, {rep_treated.shape} vs {rep_control.shape}")
    diff = ag.sub(ag.reduce_mean(rep_treated, axis=0), ag.reduce_mean(rep_control, axis=0))
    return ag.reduce_sum(ag.square(diff))


def targeted_regularisation(y, t, q_t, g, epsilon):
    """Mean squared error of the epsilon-perturbed outcome model.

    y, t are constants; q_t is the factual outcome prediction, g the clipped
    propensity, epsilon the trainable perturbation scalar node.
    """
    tape = q_t.tape
    t = np.asarray(t, dtype=np.float64).reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    t_node = tape.constant(t)
    omt_node = tape.constant(1.0 - t)
    y_node = tape.constant(y)
    shift = ag.sub(ag.divide(t_node, g), ag.divide(omt_node, ag.sub(tape.constant(np.ones_like(t)), g)))
    y_tilde = ag.add(q_t, ag.mul(epsilon, shift))
    return ag.reduce_mean(ag.square(ag.sub(y_node, y_tilde)))
