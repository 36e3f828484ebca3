"""Variable-contribution vectors and the pairwise-orthogonality penalty.

The contribution of each input variable to a representation network is
approximated by the absolute value of the product of its weight matrices
(activations ignored, biases excluded), row-averaged over the output
dimension. Orthogonality across representation networks is the sum of dot
products over all unordered pairs; a soft regulariser pushes each vector's
sum toward 1 so the all-zero escape is penalised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag


@dataclass
class ContributionVector:
    """Average absolute contribution of each input variable to one factor."""

    rep_id: str
    wbar: np.ndarray  # length d, entries >= 0

    def __post_init__(self):
        self.wbar = np.asarray(self.wbar, dtype=np.float64).reshape(-1)


def contribution_node(weight_nodes):
    """Row-mean of |W_1 @ W_2 @ ... @ W_l| as a (d, 1) tape node."""
    if not weight_nodes:
        raise ValueError("contribution_node: empty weight chain")
    prod = weight_nodes[0]
    for w in weight_nodes[1:]:
        prod = ag.matmul(prod, w)
    return ag.reduce_mean(ag.absolute(prod), axis=1)


def orthogonality_loss_node(wbar_nodes):
    """Sum of pairwise dot products over all k(k-1)/2 unordered pairs."""
    _check_vectors(wbar_nodes)
    total = None
    for i in range(len(wbar_nodes)):
        for j in range(i + 1, len(wbar_nodes)):
            dot = ag.reduce_sum(ag.mul(wbar_nodes[i], wbar_nodes[j]))
            total = dot if total is None else ag.add(total, dot)
    return total


def ortho_regulariser_node(wbar_nodes):
    """Sum over factors of (sum of contributions - 1)^2."""
    if not wbar_nodes:
        raise ValueError("ortho_regulariser: no contribution vectors")
    total = None
    for w in wbar_nodes:
        term = ag.square(ag.shift(ag.reduce_sum(w), -1.0))
        total = term if total is None else ag.add(total, term)
    return total


def _check_vectors(wbar_nodes):
    if len(wbar_nodes) < 2:
        raise ValueError(f"orthogonality needs >= 2 contribution vectors, got {len(wbar_nodes)}")
    d = wbar_nodes[0].shape[0]
    for w in wbar_nodes:
        if w.shape != (d, 1):
            raise ag.ShapeError(f"contribution vectors disagree in length: {w.shape} vs {(d, 1)}")


def contribution_vector(weight_matrices, rep_id=""):
    """Numpy-level contribution vector from raw weight matrices."""
    tape = ag.Tape()
    nodes = [tape.constant(np.asarray(w, dtype=np.float64)) for w in weight_matrices]
    return ContributionVector(rep_id, contribution_node(nodes).value[:, 0])


def _as_nodes(tape, contribs):
    return [tape.constant(c.wbar.reshape(-1, 1)) for c in contribs]


def orthogonality_loss(contribs):
    tape = ag.Tape()
    return float(orthogonality_loss_node(_as_nodes(tape, contribs)).value[0, 0])


def ortho_regulariser(contribs):
    tape = ag.Tape()
    return float(ortho_regulariser_node(_as_nodes(tape, contribs)).value[0, 0])
