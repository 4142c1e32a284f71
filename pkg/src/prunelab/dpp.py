"""Determinantal point process kernels and exact fixed-size (k-DPP) sampling.

A k-DPP over a ground set of n items with PSD kernel L assigns a subset Y of
size k probability det(L_Y) / sum_{|Y'|=k} det(L_Y').  Sampling is exact:
eigendecompose L, pick k eigenvectors via the elementary-symmetric-polynomial
recursion, then run the standard projection-DPP elimination loop.  Ground
sets here are tiny (hidden layers), so exactness is cheap.
"""

import itertools
from dataclasses import dataclass

import numpy as np

#: default bandwidth for the squared-distance activation kernel
DEFAULT_BETA = 0.3
#: default diagonal jitter added to the activation kernel
DEFAULT_EPS = 1e-6

_SYMMETRY_TOL = 1e-10
_PSD_TOL = 1e-8


class InfeasibleSizeError(ValueError):
    """No subset of the requested size has positive determinant."""


@dataclass
class DppKernel:
    """Symmetric PSD similarity kernel over hidden nodes.

    ``beta`` and ``eps`` record how the kernel was built (bandwidth and
    diagonal jitter); they are 0 for kernels taken directly from overlap
    matrices.
    """

    L: np.ndarray
    beta: float = 0.0
    eps: float = 0.0

    def __post_init__(self):
        self.L = np.atleast_2d(np.asarray(self.L, dtype=float))
        if self.L.shape[0] != self.L.shape[1]:
            raise ValueError("kernel must be square")
        if np.max(np.abs(self.L - self.L.T)) > _SYMMETRY_TOL:
            raise ValueError("kernel must be symmetric")
        if np.linalg.eigvalsh(self.L).min() < -_PSD_TOL:
            raise ValueError("kernel must be PSD up to numerical tolerance")

    @property
    def size(self):
        return self.L.shape[0]


def activation_kernel(activations, beta=DEFAULT_BETA, eps=DEFAULT_EPS):
    """Data-driven kernel L = L' + eps*I with L'_st = exp(-beta ||a_s - a_t||^2).

    ``activations`` holds one row per hidden node (n_l x n_samples): the
    node's responses across a probe set.  The diagonal of L' is exactly 1.
    """
    A = np.atleast_2d(np.asarray(activations, dtype=float))
    if not np.all(np.isfinite(A)):
        raise ValueError("activations must be finite")
    if beta <= 0:
        raise ValueError("beta must be positive")
    sq = np.sum(A * A, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (A @ A.T)
    np.fill_diagonal(d2, 0.0)
    Lp = np.exp(-beta * np.clip(d2, 0.0, None))
    Lp = 0.5 * (Lp + Lp.T)
    return DppKernel(L=Lp + eps * np.eye(A.shape[0]), beta=beta, eps=eps)


def analytic_kernel(Q):
    """Kernel equal to the student-student overlap matrix Q (eigenvalues floored at 0)."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if np.max(np.abs(Q - Q.T)) > _PSD_TOL:
        raise ValueError("Q must be symmetric within tolerance")
    Qs = 0.5 * (Q + Q.T)
    lam, V = np.linalg.eigh(Qs)
    if lam.min() < -_PSD_TOL:
        raise ValueError("Q must be PSD up to tolerance")
    L = (V * np.clip(lam, 0.0, None)) @ V.T
    return DppKernel(L=0.5 * (L + L.T), beta=0.0, eps=0.0)


def elementary_symmetric(lam, k):
    """Table E of elementary symmetric polynomials, E[l, m] = e_l(lam_1..lam_m).

    Built by the stable bottom-up recursion; shape (k+1, n+1).
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.size
    E = np.zeros((k + 1, n + 1))
    E[0, :] = 1.0
    for l in range(1, k + 1):
        for m in range(1, n + 1):
            E[l, m] = E[l, m - 1] + lam[m - 1] * E[l - 1, m - 1]
    return E


class KdppSampler:
    """Factored k-DPP sampler: eigendecompose once, draw many subsets."""

    def __init__(self, kernel, k):
        n = kernel.size
        if not 1 <= k <= n:
            raise InfeasibleSizeError(f"subset size {k} out of range for ground set of {n}")
        lam, V = np.linalg.eigh(kernel.L)
        self.lam = np.clip(lam, 0.0, None)
        self.V = V
        self.k = k
        self.E = elementary_symmetric(self.lam, k)
        if self.E[k, n] <= 0.0:
            raise InfeasibleSizeError(
                f"every size-{k} subset has zero determinant (kernel rank too low)"
            )

    def _select_eigenvectors(self, rng):
        lam, E, k = self.lam, self.E, self.k
        picked = []
        rem = k
        for m in range(lam.size, 0, -1):
            if rem == 0:
                break
            if m == rem:
                marg = 1.0
            elif E[rem, m] > 0.0:
                marg = lam[m - 1] * E[rem - 1, m - 1] / E[rem, m]
            else:
                marg = 0.0
            if rng.random() < marg:
                picked.append(m - 1)
                rem -= 1
        return picked

    def sample(self, rng):
        """One subset, returned as a sorted integer index array."""
        Vs = self.V[:, self._select_eigenvectors(rng)].copy()
        out = []
        for remaining in range(self.k, 0, -1):
            p = np.clip(np.sum(Vs * Vs, axis=1), 0.0, None)
            p /= p.sum()
            i = int(np.searchsorted(np.cumsum(p), rng.random()))
            i = min(i, p.size - 1)
            out.append(i)
            if remaining > 1:
                # condition on item i: eliminate one column, re-orthonormalize
                j = int(np.argmax(np.abs(Vs[i])))
                col = Vs[:, j].copy()
                Vs = np.delete(Vs, j, axis=1)
                Vs = Vs - np.outer(col, Vs[i] / col[i])
                Vs, _ = np.linalg.qr(Vs)
        return np.array(sorted(out), dtype=int)


def sample_kdpp(kernel, k, rng):
    """Draw one size-k subset with probability proportional to det(L_Y)."""
    return KdppSampler(kernel, k).sample(rng)


def kdpp_subset_prob(kernel, subset):
    """Exact k-DPP probability of ``subset`` by brute-force enumeration.

    Normalizes by summing det(L_Y) over all subsets of the same size, so it
    is independent of the eigendecomposition sampling path.  Ground sets are
    capped at 25 items.
    """
    subset = np.asarray(sorted(int(i) for i in subset), dtype=int)
    k = subset.size
    n = kernel.size
    if len(set(subset.tolist())) != k or k == 0:
        raise ValueError("subset must be nonempty without duplicates")
    if subset.min() < 0 or subset.max() >= n:
        raise ValueError("subset indices out of range")
    subsets, probs = kdpp_distribution(kernel, k)
    return float(probs[subsets.index(tuple(subset.tolist()))])


def kdpp_distribution(kernel, k):
    """All size-k subsets with their exact probabilities (enumeration oracle)."""
    n = kernel.size
    if n > 25:
        raise ValueError("ground set too large for enumeration")
    if not 1 <= k <= n:
        raise InfeasibleSizeError(f"subset size {k} out of range for ground set of {n}")
    subsets = list(itertools.combinations(range(n), k))
    dets = np.array([np.linalg.det(kernel.L[np.ix_(s, s)]) for s in subsets])
    dets = np.clip(dets, 0.0, None)
    Z = dets.sum()
    if Z <= 0.0:
        raise InfeasibleSizeError(f"every size-{k} subset has zero determinant")
    return subsets, dets / Z


def kernel_to_json(kernel):
    """Dense row-major JSON-ready dict."""
    return {"L": kernel.L.tolist(), "beta": kernel.beta, "eps": kernel.eps}


def kernel_from_json(doc):
    return DppKernel(L=np.array(doc["L"]), beta=doc.get("beta", 0.0), eps=doc.get("eps", 0.0))


def kernel_to_text(kernel):
    """Whitespace-delimited matrix rows, one line per row."""
    return "\n".join(" ".join(repr(float(x)) for x in row) for row in kernel.L) + "\n"


def kernel_from_text(text, beta=0.0, eps=0.0):
    rows = [[float(tok) for tok in line.split()] for line in text.strip().splitlines()]
    return DppKernel(L=np.array(rows), beta=beta, eps=eps)
