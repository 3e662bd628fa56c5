"""Shifted power-law Volterra kernel and its closed-form integrals.

The kernel

    K(t, s) = sqrt(2H) * (t - s + eps)**(H - 1/2),   0 <= s <= t,

drives every rough-volatility model in this package.  H in (0, 1) is the
roughness index, eps >= 0 a small shift that regularises the t = s
singularity for H < 1/2.  Three closed-form integrals are used by the
weight formulas and the variance normalisation:

    kappa(t) = int_0^t K(t, s) ds
             = sqrt(2H)/(H + 1/2) * ((t + eps)**(H + 1/2) - eps**(H + 1/2))
    r(t)     = int_0^t K(t, s)^2 ds = (t + eps)**(2H) - eps**(2H)
    dK/dH    = K(t, s) * (1/(2H) + log(t - s + eps))

At H = 1/2, eps = 0 the kernel collapses to the constant 1 and
kappa(t) = r(t) = t; those reductions are exact in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "KernelSpec",
    "kernel_eval",
    "kernel_kappa",
    "kernel_variance",
    "kernel_dh",
    "kernel_variance_dh",
    "kernel_matrix",
    "kernel_dh_matrix",
    "cell_variance_matrix",
]


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of the shifted power-law kernel."""

    H: float
    eps: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.H < 1.0:
            raise ValueError(f"H must lie in (0, 1), got {self.H}")
        if self.eps < 0.0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")


def _check_args(spec: KernelSpec, t, s) -> None:
    t = np.asarray(t)
    s = np.asarray(s)
    if np.any(s > t) or np.any(s < 0.0):
        raise ValueError("kernel arguments require 0 <= s <= t")
    if spec.H < 0.5 and spec.eps == 0.0 and np.any(s == t):
        raise ValueError("t = s with H < 1/2 requires eps > 0")


def kernel_eval(spec: KernelSpec, t, s):
    """Evaluate K(t, s) = sqrt(2H) (t - s + eps)^(H - 1/2).

    Accepts scalars or broadcastable arrays.  Raises ValueError outside
    the domain 0 <= s <= t, or on the diagonal when it is singular
    (H < 1/2 with eps = 0).
    """
    _check_args(spec, t, s)
    out = math.sqrt(2.0 * spec.H) * (np.asarray(t) - s + spec.eps) ** (spec.H - 0.5)
    return out if out.ndim else float(out)


def kernel_kappa(spec: KernelSpec, t):
    """Closed form of kappa(t) = int_0^t K(t, s) ds, exact t at H=1/2, eps=0."""
    t = np.asarray(t)
    if np.any(t < 0.0):
        raise ValueError("kappa requires t >= 0")
    p = spec.H + 0.5
    out = math.sqrt(2.0 * spec.H) / p * ((t + spec.eps) ** p - spec.eps**p)
    return out if out.ndim else float(out)


def kernel_variance(spec: KernelSpec, t):
    """Closed form of r(t) = int_0^t K(t, s)^2 ds = (t+eps)^2H - eps^2H."""
    t = np.asarray(t)
    if np.any(t < 0.0):
        raise ValueError("variance requires t >= 0")
    out = (t + spec.eps) ** (2.0 * spec.H) - spec.eps ** (2.0 * spec.H)
    return out if out.ndim else float(out)


def kernel_dh(spec: KernelSpec, t, s):
    """Derivative of the kernel in H: K(t,s) * (1/(2H) + log(t - s + eps))."""
    _check_args(spec, t, s)
    x = np.asarray(t) - s + spec.eps
    out = math.sqrt(2.0 * spec.H) * x ** (spec.H - 0.5) * (0.5 / spec.H + np.log(x))
    return out if out.ndim else float(out)


def kernel_variance_dh(spec: KernelSpec, t):
    """Derivative of r(t) in H: 2(t+eps)^2H log(t+eps) - 2 eps^2H log(eps).

    The eps = 0 limit is 2 t^2H log t (zero at t = 0 by continuity).
    """
    t = np.asarray(t, dtype=float)
    h2 = 2.0 * spec.H
    if spec.eps == 0.0:
        out = np.where(t > 0.0, 2.0 * t**h2 * np.log(np.where(t > 0.0, t, 1.0)), 0.0)
    else:
        out = 2.0 * (t + spec.eps) ** h2 * np.log(t + spec.eps) - 2.0 * spec.eps**h2 * math.log(spec.eps)
    return out if out.ndim else float(out)


def kernel_matrix(spec: KernelSpec, times: np.ndarray) -> np.ndarray:
    """Strictly lower-triangular matrix K[i, j] = K(t_i, t_j) for j < i.

    Rows index the evaluation time t_i (0..n), columns the increment cell
    [t_j, t_{j+1}) (0..n-1).  Entries with j >= i are zero; the diagonal is
    never evaluated, so eps = 0 is valid for any H.
    """
    n = len(times) - 1
    diff = times[:, None] - times[None, :n]
    mask = diff > 0.0
    out = np.zeros((n + 1, n))
    out[mask] = math.sqrt(2.0 * spec.H) * (diff[mask] + spec.eps) ** (spec.H - 0.5)
    return out


def kernel_dh_matrix(spec: KernelSpec, times: np.ndarray) -> np.ndarray:
    """Strictly lower-triangular matrix of dK/dH values on the grid."""
    n = len(times) - 1
    diff = times[:, None] - times[None, :n]
    mask = diff > 0.0
    x = diff[mask] + spec.eps
    out = np.zeros((n + 1, n))
    out[mask] = math.sqrt(2.0 * spec.H) * x ** (spec.H - 0.5) * (0.5 / spec.H + np.log(x))
    return out


def cell_variance_matrix(spec: KernelSpec, times: np.ndarray) -> np.ndarray:
    """Variance-exact convolution weights W[i, j] = sqrt(int_cell K^2 / dt).

    Scales each kernel weight so the per-cell variance contribution of the
    discrete scheme is exact:  sum_j W[i,j]^2 dt = r(t_i) by telescoping.
    """
    n = len(times) - 1
    dt = times[1] - times[0]
    h2 = 2.0 * spec.H
    lo = times[:, None] - times[None, 1 : n + 1]  # t_i - t_{j+1}
    hi = times[:, None] - times[None, :n]  # t_i - t_j
    mask = hi > 0.0
    out = np.zeros((n + 1, n))
    out[mask] = np.sqrt(((hi[mask] + spec.eps) ** h2 - (lo[mask] + spec.eps) ** h2) / dt)
    return out
