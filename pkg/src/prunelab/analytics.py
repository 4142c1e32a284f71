"""Order parameters, group assignment, and generalization error (closed form + Monte Carlo).

The generalization error between a student f and teacher f* is defined as

    ge = 1/2 < [phi(x, f) - phi(x, f*)]^2 >,

averaged over standard-normal inputs.  For the erf sigmoid this average has
an exact closed form in the overlap matrices

    Q = w w^T / N,   R = w w*^T / N,   T = w* w*^T / N,

namely ge = f1(Q) + f2(T) - f3(R, Q, T) with

    f1 = (1/pi) sum_ik v_i v_k  arcsin( Q_ik / sqrt((1+Q_ii)(1+Q_kk)) )
    f2 = (1/pi) sum_nm v*_n v*_m arcsin( T_nm / sqrt((1+T_nn)(1+T_mm)) )
    f3 = (2/pi) sum_in v_i v*_n arcsin( R_in / sqrt((1+Q_ii)(1+T_nn)) ).

The 1/2 prefactor of the definition is already absorbed into these
expressions, so closed-form and Monte-Carlo values are directly comparable.
"""

import math
from dataclasses import dataclass

import numpy as np

from .netcore import TwoLayerNet, forward_many, sample_inputs

#: silently clamp arcsin arguments that overshoot [-1, 1] by at most this much
ARCSIN_TOL = 1e-9


class AnalyticDomainError(ValueError):
    """An overlap matrix violates the analytic domain beyond tolerance."""


@dataclass
class OrderParams:
    """Overlap matrices: Q student-student (KxK), R student-teacher (KxM), T teacher-teacher (MxM)."""

    Q: np.ndarray
    R: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        self.T = np.atleast_2d(np.asarray(self.T, dtype=float))
        K, M = self.R.shape
        if self.Q.shape != (K, K) or self.T.shape != (M, M):
            raise ValueError("inconsistent order-parameter shapes")
        if not np.allclose(self.Q, self.Q.T, atol=1e-8) or not np.allclose(self.T, self.T.T, atol=1e-8):
            raise ValueError("Q and T must be symmetric")


@dataclass
class GroupAssignment:
    """Which teacher node each student node specializes in.

    ``group[i]`` is the 0-based teacher index learned by student node i, or -1
    for a dead node (zero norm).  ``occupancy[m]`` counts the assigned student
    nodes per teacher node.
    """

    group: np.ndarray
    occupancy: np.ndarray


@dataclass
class GEEstimate:
    """Monte-Carlo generalization error with standard error and sample count."""

    value: float
    std_err: float
    n_samples: int


def order_params(student, teacher):
    """Overlap matrices Q = w w^T/N, R = w w*^T/N, T = w* w*^T/N."""
    if student.input_dim != teacher.input_dim:
        raise ValueError("student and teacher input dimensions differ")
    N = student.input_dim
    return OrderParams(
        Q=student.w @ student.w.T / N,
        R=student.w @ teacher.w.T / N,
        T=teacher.w @ teacher.w.T / N,
    )


def _arcsin_overlap(A, diag_row, diag_col):
    den = np.sqrt(1.0 + diag_row)[:, None] * np.sqrt(1.0 + diag_col)[None, :]
    arg = A / den
    worst = np.max(np.abs(arg)) if arg.size else 0.0
    if worst > 1.0 + ARCSIN_TOL:
        raise AnalyticDomainError(f"arcsin argument {worst} outside [-1, 1] beyond tolerance")
    return np.arcsin(np.clip(arg, -1.0, 1.0))


def ge_closed_form(op, v, v_star):
    """Closed-form generalization error f1(Q) + f2(T) - f3(R, Q, T).

    ``v`` and ``v_star`` are the student and teacher second-layer vectors.
    The result is clamped at 0 (it can undershoot by rounding only).
    """
    v = np.asarray(v, dtype=float).ravel()
    v_star = np.asarray(v_star, dtype=float).ravel()
    dq, dt = np.diag(op.Q), np.diag(op.T)
    f1 = v @ _arcsin_overlap(op.Q, dq, dq) @ v / math.pi
    f2 = v_star @ _arcsin_overlap(op.T, dt, dt) @ v_star / math.pi
    f3 = 2.0 / math.pi * (v @ _arcsin_overlap(op.R, dq, dt) @ v_star)
    return max(f1 + f2 - f3, 0.0)


def ge_monte_carlo(student, teacher, n_test, rng, chunk=20_000):
    """Monte-Carlo generalization error over n_test fresh standard-normal inputs.

    Label noise is never added here: the error compares the two network
    functions directly.  Inputs are drawn in chunks to bound memory.
    """
    if student.input_dim != teacher.input_dim:
        raise ValueError("student and teacher input dimensions differ")
    if n_test < 100:
        raise ValueError("n_test must be at least 100")
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_test:
        n = min(chunk, n_test - done)
        X = sample_inputs(student.input_dim, n, rng)
        s = 0.5 * (forward_many(student, X) - forward_many(teacher, X)) ** 2
        total += s.sum()
        total_sq += (s * s).sum()
        done += n
    mean = total / n_test
    var = max(total_sq / n_test - mean * mean, 0.0) * n_test / (n_test - 1)
    return GEEstimate(value=mean, std_err=math.sqrt(var / n_test), n_samples=n_test)


def ge_from_outputs(student_out, teacher_out):
    """GEEstimate from precomputed output pairs (shared-test-set fast path)."""
    s = 0.5 * (np.asarray(student_out) - np.asarray(teacher_out)) ** 2
    n = s.size
    return GEEstimate(value=float(s.mean()), std_err=float(s.std(ddof=1) / math.sqrt(n)), n_samples=n)


def assign_groups(op):
    """Assign each student node to the teacher node with the largest normalized overlap.

    group[i] = argmax_n R_in / sqrt(Q_ii T_nn); ties break toward the smaller
    teacher index (argmax does).  Dead student nodes (Q_ii = 0) get -1 and are
    excluded from the occupancy counts.
    """
    dq, dt = np.diag(op.Q), np.diag(op.T)
    K, M = op.R.shape
    group = np.full(K, -1, dtype=int)
    alive = dq > 0
    if np.any(alive):
        normed = op.R[alive] / np.sqrt(np.outer(dq[alive], dt))
        group[alive] = np.argmax(normed, axis=1)
    occupancy = np.bincount(group[group >= 0], minlength=M)
    return GroupAssignment(group=group, occupancy=occupancy)


def canonicalize_signs(student, teacher):
    """Flip (w_i, v_i) jointly so every student node aligns positively with its teacher match.

    Because the activation is odd, (w_i, v_i) -> (-w_i, -v_i) leaves the
    network function unchanged; online SGD converges to either sign at random.
    This picks the representative with R_in > 0 at the |R|-argmax teacher
    column, which makes the converged Q/R block structure positive and group
    assignment well defined.
    """
    op = order_params(student, teacher)
    dq, dt = np.diag(op.Q), np.diag(op.T)
    K = student.hidden_count
    signs = np.ones(K)
    alive = dq > 0
    normed = np.zeros_like(op.R)
    normed[alive] = op.R[alive] / np.sqrt(np.outer(dq[alive], dt))
    best = np.argmax(np.abs(normed), axis=1)
    picked = normed[np.arange(K), best]
    signs[picked < 0] = -1.0
    return TwoLayerNet(student.w * signs[:, None], student.v * signs)


def order_params_to_json(op):
    """Row-major JSON-ready dict of the three overlap matrices."""
    return {"Q": op.Q.tolist(), "R": op.R.tolist(), "T": op.T.tolist()}


def order_params_from_json(doc):
    return OrderParams(Q=np.array(doc["Q"]), R=np.array(doc["R"]), T=np.array(doc["T"]))
