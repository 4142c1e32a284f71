"""Closed-form generalization-error formulas for pruned, converged networks.

All formulas assume the specialized noiseless fixed point: K = Z*M student
nodes, Z per teacher node, unit overlaps within a group, orthogonal teacher
rows, and per-group second-layer sums equal to v*.  In that state the error
of a node-pruned network depends only on the *occupancy* vector (how many
students survive per teacher node):

    ge = (v*)^2 / 6 * sum_m (1 - l_m / Z)^2.

DPP pruning with the converged overlap kernel keeps at most one node per
group, random pruning spreads occupancy hypergeometrically, and random edge
pruning scales the overlaps entrywise; each case reduces to arcsin algebra.
"""

import math
from dataclasses import dataclass

import numpy as np

from .analytics import OrderParams, ge_closed_form
from .pruning import optimal_edge_scale


class TheoremDomainError(ValueError):
    """Parameters fall outside the range a formula is proved for."""


@dataclass
class TheoryParams:
    """Specialized-regime parameters: M teacher nodes, Z students each, scalar v*.

    ``k_n`` may be fractional: the node formulas are linear in it, and the
    difference grids evaluate them along a continuous fill.
    """

    M: int
    Z: int
    v_star: float
    k_n: float | None = None
    c: float | None = None

    def __post_init__(self):
        if self.M < 1 or self.Z < 1:
            raise ValueError("M and Z must be positive")
        if self.k_n is not None and self.c is not None:
            if abs(self.c - self.k_n / self.K) > 1e-12:
                raise ValueError("inconsistent k_n and c: need c = k_n / K")

    @property
    def K(self):
        return self.M * self.Z


@dataclass
class DiffGrid:
    """Grid of error differences over (Z, pruning fraction).

    ``c_values`` holds the fraction of the feasible range, u = c * Z in
    (0, 1]; the physical keep probability for row i is c = u / Z.  This keeps
    the grid rectangular even though each Z has its own c range (0, 1/Z].
    """

    z_values: list
    c_values: list
    values: np.ndarray

    def iter_cells(self):
        for i, z in enumerate(self.z_values):
            for j, u in enumerate(self.c_values):
                yield z, u / z, float(self.values[i, j])

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("Z,c,diff\n")
            for z, c, d in self.iter_cells():
                fh.write(f"{z},{c!r},{d!r}\n")


def ge_dpp_node(p):
    """Closed-form error after keeping k_n <= M nodes by DPP on the converged kernel.

    (v*)^2 [ (k_n/6)(1 - 1/Z)^2 + (M - k_n)/6 ].  Continuous k_n values are
    accepted (the expression is linear in k_n), which the difference grids
    use for dense fills.
    """
    kn = p.k_n
    if kn is None or not 0 <= kn <= p.M:
        raise TheoremDomainError("ge_dpp_node requires 0 <= k_n <= M")
    return p.v_star**2 * (kn / 6.0 * (1.0 - 1.0 / p.Z) ** 2 + (p.M - kn) / 6.0)


def ge_dpp_node_reweighted(p):
    """Error after DPP node pruning plus least-squares reweighting: (M - k_n)(v*)^2/6."""
    kn = p.k_n
    if kn is None or not 0 <= kn <= p.M:
        raise TheoremDomainError("ge_dpp_node_reweighted requires 0 <= k_n <= M")
    return (p.M - kn) * p.v_star**2 / 6.0


def ge_node_pruned(occupancy, Z, v_star):
    """Occupancy-based error of any node-pruned specialized network.

    occupancy[m] = surviving students of teacher node m; each must lie in [0, Z].
    """
    occ = np.asarray(occupancy, dtype=float)
    if np.any(occ < 0) or np.any(occ > Z):
        raise ValueError("occupancy entries must lie in [0, Z]")
    return v_star**2 / 6.0 * float(np.sum((1.0 - occ / Z) ** 2))


def ge_random_node_expected(p):
    """Exact expected error of uniform random node pruning.

    Averages ge_node_pruned over the multivariate hypergeometric occupancy of
    a uniform size-k_n subset of K = Z*M nodes in M groups of Z, by direct
    enumeration of occupancy vectors.
    """
    kn = p.k_n
    if kn is None or not 0 <= kn <= p.K:
        raise TheoremDomainError("need 0 <= k_n <= K")
    if p.K > 64:
        raise ValueError("K too large for exact enumeration")
    total = 0.0
    stack = [(0, kn, 1, 0.0)]
    # enumerate occupancy vectors (l_1..l_M), sum l = k_n, 0 <= l_m <= Z
    while stack:
        m, left, ways, acc = stack.pop()
        if m == p.M:
            if left == 0:
                total += ways * acc
            continue
        for l in range(0, min(p.Z, left) + 1):
            stack.append((m + 1, left - l, ways * math.comb(p.Z, l), acc + (1.0 - l / p.Z) ** 2))
    return total / math.comb(p.K, kn) * p.v_star**2 / 6.0


def ge_random_edge(p):
    """Closed-form error of the network with expected order parameters after
    Bernoulli(c) edge pruning:

    M (v*)^2/pi [ (1/Z) arcsin(c/(1+c)) + (1-1/Z) arcsin(c^2/(1+c))
                  + pi/6 - 2 arcsin(c / sqrt(2(1+c))) ].
    """
    c = p.c
    if c is None or not 0.0 <= c <= 1.0:
        raise TheoremDomainError("need 0 <= c <= 1")
    bracket = (
        math.asin(c / (1.0 + c)) / p.Z
        + (1.0 - 1.0 / p.Z) * math.asin(c * c / (1.0 + c))
        + math.pi / 6.0
        - 2.0 * math.asin(c / math.sqrt(2.0 * (1.0 + c)))
    )
    return p.M * p.v_star**2 / math.pi * bracket


def ge_random_edge_rescaled(p, A):
    """Closed-form error of random edge pruning with second layer scaled by A.

    Quadratic in A; A = 1 recovers ge_random_edge and the minimizer is
    pruning.optimal_edge_scale(c, Z).
    """
    c = p.c
    if c is None or not 0.0 <= c <= 1.0:
        raise TheoremDomainError("need 0 <= c <= 1")
    a = math.asin(c / (1.0 + c)) / p.Z + (1.0 - 1.0 / p.Z) * math.asin(c * c / (1.0 + c))
    b = math.asin(c / math.sqrt(2.0 * (1.0 + c)))
    return p.M * p.v_star**2 / math.pi * (A * A * a + math.pi / 6.0 - 2.0 * A * b)


def expected_edge_order_params(op, c):
    """Expected order parameters after Bernoulli(c) edge pruning of the student.

    E[Q'_ii] = c Q_ii, E[Q'_ik] = c^2 Q_ik (i != k), E[R'] = c R, T' = T.
    """
    if not 0.0 <= c <= 1.0:
        raise ValueError("c must lie in [0, 1]")
    Q = c * c * op.Q.copy()
    np.fill_diagonal(Q, c * np.diag(op.Q))
    return OrderParams(Q=Q, R=c * op.R, T=op.T.copy())


def specialized_order_params(M, Z):
    """The idealized converged overlaps: block-of-ones Q, indicator R, identity T."""
    K = M * Z
    groups = np.repeat(np.arange(M), Z)
    Q = (groups[:, None] == groups[None, :]).astype(float)
    R = np.zeros((K, M))
    R[np.arange(K), groups] = 1.0
    return OrderParams(Q=Q, R=R, T=np.eye(M))


def specialized_second_layer(M, Z, v_star):
    """Student second layer at the specialized fixed point: v_i = v*/Z."""
    return np.full(M * Z, v_star / Z)


def _check_grid_domain(z_values):
    z_values = [int(z) for z in z_values]
    for z in z_values:
        if z < 4:
            raise TheoremDomainError("difference grids are only defined for Z >= 4")
    return z_values


def _fraction_grid(M, c_resolution):
    # exact matched points u = k_n / M plus a dense fill for plotting
    exact = np.arange(1, M + 1) / M
    dense = np.linspace(0.0, 1.0, int(c_resolution) + 1)[1:]
    return np.unique(np.concatenate([exact, dense]))


def dpp_node_minus_random_edge_grid(z_values, c_resolution, M=5, v_star=1.0):
    """Grid of ge_dpp_node - ge_random_edge at matched parameter counts.

    Rows are Z >= 4; columns are fractions u = c*Z in (0, 1] (so c <= 1/Z and
    k_n = u*M <= M).  Entries are nonnegative: unreweighted random edge
    pruning beats DPP node pruning throughout this domain.
    """
    z_values = _check_grid_domain(z_values)
    us = _fraction_grid(M, c_resolution)
    values = np.empty((len(z_values), us.size))
    for i, z in enumerate(z_values):
        for j, u in enumerate(us):
            p = TheoryParams(M=M, Z=z, v_star=v_star, k_n=u * M, c=u / z)
            values[i, j] = ge_dpp_node(p) - ge_random_edge(p)
    return DiffGrid(z_values=z_values, c_values=us.tolist(), values=values)


def reweighted_dpp_minus_rescaled_edge_grid(z_values, c_resolution, M=5, v_star=1.0):
    """Grid of ge_dpp_node_reweighted - min_A ge_random_edge_rescaled.

    Entries are nonpositive over the same domain: with reweighting, DPP node
    pruning beats every scalar rescaling of random edge pruning.
    """
    z_values = _check_grid_domain(z_values)
    us = _fraction_grid(M, c_resolution)
    values = np.empty((len(z_values), us.size))
    for i, z in enumerate(z_values):
        for j, u in enumerate(us):
            p = TheoryParams(M=M, Z=z, v_star=v_star, k_n=u * M, c=u / z)
            best = ge_random_edge_rescaled(p, optimal_edge_scale(p.c, z))
            values[i, j] = ge_dpp_node_reweighted(p) - best
    return DiffGrid(z_values=z_values, c_values=us.tolist(), values=values)


def cross_check_edge_formula(M, Z, v_star, c):
    """ge_closed_form on the expected pruned overlaps of the idealized state.

    Algebraically identical to ge_random_edge; exposed for cross-implementation
    verification.
    """
    op = expected_edge_order_params(specialized_order_params(M, Z), c)
    v = specialized_second_layer(M, Z, v_star)
    return ge_closed_form(op, v, np.full(M, v_star))
