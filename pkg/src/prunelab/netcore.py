"""Two-layer committee networks: representation, forward pass, and data generation.

A network has a first-layer weight matrix ``w`` of shape (hidden, input_dim)
and a second-layer weight vector ``v`` of length hidden.  Its output on an
input ``x`` is

    phi(x) = sum_k v_k * g(w_k . x / sqrt(N)),

where ``g`` is the error-function sigmoid ``g(z) = erf(z / sqrt(2))``.

NOTE on the activation: all closed-form error expressions used elsewhere in
this package (arcsin overlap integrals) are exact only for the erf sigmoid,
not the logistic one.  Everything here is therefore built on erf.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

_SQRT2 = math.sqrt(2.0)
_GPRIME0 = math.sqrt(2.0 / math.pi)


def activation(z):
    """Error-function sigmoid g(z) = erf(z / sqrt(2)).

    Odd, strictly increasing, bounded in (-1, 1).  Accepts scalars or arrays.
    """
    return erf(np.asarray(z, dtype=float) / _SQRT2) if np.ndim(z) else float(erf(z / _SQRT2))


def activation_deriv(z):
    """Derivative g'(z) = sqrt(2/pi) * exp(-z^2 / 2).  Even, positive."""
    if np.ndim(z):
        z = np.asarray(z, dtype=float)
        return _GPRIME0 * np.exp(-0.5 * z * z)
    return _GPRIME0 * math.exp(-0.5 * z * z)


@dataclass
class TwoLayerNet:
    """First-layer weights ``w`` (hidden x input_dim) and second-layer ``v``."""

    w: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.w = np.atleast_2d(np.asarray(self.w, dtype=float))
        self.v = np.asarray(self.v, dtype=float).ravel()
        if self.w.shape[0] != self.v.shape[0]:
            raise ValueError(
                f"w has {self.w.shape[0]} rows but v has {self.v.shape[0]} entries"
            )
        if not (np.all(np.isfinite(self.w)) and np.all(np.isfinite(self.v))):
            raise ValueError("network weights must be finite")

    @property
    def input_dim(self):
        return self.w.shape[1]

    @property
    def hidden_count(self):
        return self.w.shape[0]

    def copy(self):
        return TwoLayerNet(self.w.copy(), self.v.copy())


@dataclass
class InputSample:
    """A single input vector with its (possibly noisy) teacher label."""

    x: np.ndarray
    y: float


@dataclass
class NoiseConfig:
    """Label noise level; sigma = 0 is the noiseless case."""

    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


def local_fields(net, x):
    """Pre-activation fields w_k . x / sqrt(N) for one input or a batch.

    ``x`` may be a vector of length input_dim or an array (n, input_dim);
    returns shape (hidden,) or (n, hidden) accordingly.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.input_dim:
        raise ValueError(f"input has dimension {x.shape[-1]}, expected {net.input_dim}")
    return x @ net.w.T / math.sqrt(net.input_dim)


def hidden_activations(net, x):
    """Post-activation values g(w_k . x / sqrt(N)); same shapes as local_fields."""
    return activation(local_fields(net, x))


def forward(net, x):
    """Network output sum_k v_k g(w_k . x / sqrt(N)) for a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("forward expects a single input vector; use forward_many")
    return float(hidden_activations(net, x) @ net.v)


def forward_many(net, X):
    """Network outputs for a batch of inputs, shape (n, input_dim) -> (n,)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("forward_many expects a 2-d batch of inputs")
    return hidden_activations(net, X) @ net.v


def sample_input(input_dim, rng):
    """One i.i.d. standard-normal input vector from the given stream."""
    if input_dim < 1:
        raise ValueError("input_dim must be positive")
    return rng.standard_normal(input_dim)


def sample_inputs(input_dim, n, rng):
    """A batch of n i.i.d. standard-normal inputs, shape (n, input_dim).

    Consumes the stream exactly as n successive sample_input calls.
    """
    return rng.standard_normal((n, input_dim))


def teacher_label(teacher, x, noise, rng):
    """Teacher output plus sigma * zeta noise (zeta ~ N(0,1), drawn only if sigma > 0)."""
    y = forward(teacher, x)
    if noise.sigma > 0:
        y += noise.sigma * rng.standard_normal()
    return y


def make_teacher(input_dim, hidden_count, v_star, rng):
    """Teacher net: first-layer rows i.i.d. N(0,1), second layer all equal to v_star."""
    w = rng.standard_normal((hidden_count, input_dim))
    return TwoLayerNet(w, np.full(hidden_count, float(v_star)))


def make_student(input_dim, hidden_count, rng):
    """Student initialization: every parameter i.i.d. N(0,1)."""
    w = rng.standard_normal((hidden_count, input_dim))
    v = rng.standard_normal(hidden_count)
    return TwoLayerNet(w, v)
