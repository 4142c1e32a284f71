"""Pruning methods, mask application, parameter matching, and reweighting.

Node pruning keeps a subset of hidden units (the network shrinks); edge
pruning zeroes individual first-layer weights (the shape is preserved).  A
node count k_n and per-node edge count k_e are *matched* when both prunings
retain the same number of parameters, which for a single-output network
means k_e = (k_n (1 + N) - K) / K and c = k_n / K = k_e / N.

All indices are 0-based.  Ties in the importance methods break toward the
smaller index.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .dpp import KdppSampler
from .netcore import TwoLayerNet, hidden_activations

log = logging.getLogger(__name__)

#: ridge regularizer scale for least-squares reweighting
REWEIGHT_RIDGE = 1e-8


@dataclass
class NodeMask:
    """Sorted indices of the hidden nodes that survive pruning."""

    kept: np.ndarray
    n_total: int

    def __post_init__(self):
        self.kept = np.asarray(sorted(int(i) for i in np.ravel(self.kept)), dtype=int)
        if self.kept.size:
            if self.kept.min() < 0 or self.kept.max() >= self.n_total:
                raise ValueError("node indices out of range")
            if np.unique(self.kept).size != self.kept.size:
                raise ValueError("duplicate node indices")

    @property
    def k_n(self):
        return int(self.kept.size)

    def to_json(self):
        return {"kept": self.kept.tolist(), "n_total": self.n_total}


@dataclass
class EdgeMask:
    """Boolean matrix (K x N); True marks a surviving first-layer edge."""

    kept: np.ndarray

    def __post_init__(self):
        self.kept = np.atleast_2d(np.asarray(self.kept, dtype=bool))

    @property
    def per_node_counts(self):
        return self.kept.sum(axis=1)

    def to_json(self):
        return {"rows": ["".join("1" if b else "0" for b in row) for row in self.kept]}


@dataclass
class MatchSpec:
    """Parameter-matched pruning sizes: k_n nodes <-> k_e edges per node, fraction c."""

    k_n: int
    k_e: int
    c: float


def match_params(k_n, K, N):
    """Edge count matched to a node count so both prunings keep equal parameters.

    k_e = (k_n (1 + N) - K) / K rounded half away from zero; c = k_n / K.
    """
    if not 1 <= k_n <= K:
        raise ValueError("k_n out of range")
    k_e = int(math.floor((k_n * (1 + N) - K) / K + 0.5))
    return MatchSpec(k_n=int(k_n), k_e=k_e, c=k_n / K)


def prune_random_node(K, k_n, rng):
    """Keep k_n of K hidden nodes uniformly at random."""
    if not 0 <= k_n <= K:
        raise ValueError("k_n out of range")
    kept = rng.choice(K, size=k_n, replace=False)
    return NodeMask(kept=np.sort(kept), n_total=K)


def prune_importance_node(v, k_n):
    """Keep the k_n nodes with the largest |v_i| (outgoing-weight magnitude)."""
    v = np.asarray(v, dtype=float).ravel()
    if not 0 <= k_n <= v.size:
        raise ValueError("k_n out of range")
    order = np.argsort(-np.abs(v), kind="stable")
    return NodeMask(kept=np.sort(order[:k_n]), n_total=v.size)


def prune_dpp_node(kernel, k_n, rng):
    """Keep a size-k_n subset drawn from the k-DPP with the given kernel."""
    return NodeMask(kept=KdppSampler(kernel, k_n).sample(rng), n_total=kernel.size)


def prune_random_edge(K, N, c, rng, exact=False, k_e=None):
    """Random edge mask: keep each edge independently with probability c.

    With ``exact=True`` every row instead keeps exactly ``k_e`` uniformly
    chosen edges (k_e defaults to round(c*N)), which makes parameter counts
    reproducible for matched-size comparisons.
    """
    if not 0.0 <= c <= 1.0:
        raise ValueError("c must lie in [0, 1]")
    if exact:
        if k_e is None:
            k_e = int(round(c * N))
        if not 0 <= k_e <= N:
            raise ValueError("k_e out of range")
        kept = np.zeros((K, N), dtype=bool)
        for i in range(K):
            kept[i, rng.choice(N, size=k_e, replace=False)] = True
        return EdgeMask(kept=kept)
    return EdgeMask(kept=rng.random((K, N)) < c)


def prune_importance_edge(w, k_e):
    """Per node, keep the k_e incoming edges with the largest |w_ij|."""
    w = np.atleast_2d(np.asarray(w, dtype=float))
    K, N = w.shape
    if not 0 <= k_e <= N:
        raise ValueError("k_e out of range")
    kept = np.zeros((K, N), dtype=bool)
    for i in range(K):
        kept[i, np.argsort(-np.abs(w[i]), kind="stable")[:k_e]] = True
    return EdgeMask(kept=kept)


def apply_mask(net, mask):
    """Restrict a network to a node mask, or zero out the dropped edges of an edge mask."""
    if isinstance(mask, NodeMask):
        if mask.n_total != net.hidden_count:
            raise ValueError("node mask size does not match network")
        return TwoLayerNet(net.w[mask.kept], net.v[mask.kept])
    if isinstance(mask, EdgeMask):
        if mask.kept.shape != net.w.shape:
            raise ValueError("edge mask shape does not match network")
        return TwoLayerNet(net.w * mask.kept, net.v.copy())
    raise TypeError(f"unsupported mask type {type(mask).__name__}")


def reweight_node(original, mask, probe_inputs):
    """Refit the surviving second-layer weights to the original network's output.

    Solves the ridge-regularized least squares

        min_vhat sum_probes ( sum_{i in kept} vhat_i a_i(x) - phi_original(x) )^2

    on the probe activations, with regularizer REWEIGHT_RIDGE * trace(Gram).
    Returns the pruned network with the refitted second layer.
    """
    if mask.k_n == 0:
        raise ValueError("cannot reweight an empty node mask")
    probe_inputs = np.atleast_2d(np.asarray(probe_inputs, dtype=float))
    if probe_inputs.shape[0] < 10 * mask.k_n:
        raise ValueError("need at least 10 probe inputs per kept node")
    acts = hidden_activations(original, probe_inputs)
    target = acts @ original.v
    A = acts[:, mask.kept]
    gram = A.T @ A
    v_hat = solve_reweight(gram, A.T @ target)
    return TwoLayerNet(original.w[mask.kept], v_hat)


def solve_reweight(gram, rhs):
    """Ridge-regularized normal-equation solve shared by all reweighting paths."""
    k = gram.shape[0]
    tr = float(np.trace(gram))
    if tr <= 0 or np.linalg.eigvalsh(gram).min() < 1e-10 * tr:
        log.warning("degenerate probe activations; ridge regularizer dominates the fit")
    return np.linalg.solve(gram + REWEIGHT_RIDGE * tr * np.eye(k), rhs)


def reweight_edge_scale(pruned, A):
    """Scale the second layer by A (the edge-pruning reweighting family)."""
    return TwoLayerNet(pruned.w.copy(), A * pruned.v)


def optimal_edge_scale(c, Z):
    """The second-layer rescale minimizing the closed-form error of random edge pruning.

    The error is quadratic in the scale A; its minimizer is

        A* = arcsin(c / sqrt(2(1+c))) /
             [ (1/Z) arcsin(c/(1+c)) + (1 - 1/Z) arcsin(c^2/(1+c)) ].

    c = 0 zeroes the denominator; the output is the zero function then, so 0
    is returned by convention.
    """
    if not 0.0 <= c <= 1.0:
        raise ValueError("c must lie in [0, 1]")
    if Z < 1:
        raise ValueError("Z must be at least 1")
    if c == 0.0:
        log.warning("optimal_edge_scale(c=0) returns 0 by convention (network output is 0)")
        return 0.0
    num = math.asin(c / math.sqrt(2.0 * (1.0 + c)))
    den = math.asin(c / (1.0 + c)) / Z + (1.0 - 1.0 / Z) * math.asin(c * c / (1.0 + c))
    return num / den
