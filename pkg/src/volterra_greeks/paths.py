"""Time grid, correlated driver increments and discrete Volterra paths.

Simulation is exact-in-law for the Gaussian driver: on a uniform grid with
step dt, each path p draws dW, dWt ~ N(0, dt) i.i.d. from its own
substream seeded by (master seed, path index), so path p is identical
under any batching or worker schedule and larger runs extend smaller
ones.  The volatility driver is dZ = rho dW + sqrt(1 - rho^2) dWt.

The Volterra path uses the left-point rule

    Y_i = sum_{j < i} K(t_i, t_j) dZ_j,

which never evaluates the kernel on its singular diagonal.  The same
convolution with dK/dH in place of K gives the pathwise H-derivative.
An optional variance-exact variant replaces K(t_i, t_j) with per-cell
root-mean-square kernel weights (used to tighten variance tests; the
weight formulas elsewhere assume the left-point scheme).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .kernel import KernelSpec, cell_variance_matrix, kernel_dh_matrix, kernel_matrix

__all__ = [
    "TimeGrid",
    "DriverIncrements",
    "VolterraPath",
    "gen_increments",
    "volterra_path",
    "volterra_dh_path",
    "convolve_kernel",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_n = T with t_i = i * (T / n)."""

    T: float
    n: int

    def __post_init__(self):
        if self.T <= 0.0:
            raise ValueError(f"T must be > 0, got {self.T}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")

    @property
    def dt(self) -> float:
        return self.T / self.n

    @cached_property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.dt


@dataclass(frozen=True)
class DriverIncrements:
    """Brownian increments over grid cells; last axis is time (length n).

    dZ = rho * dW + sqrt(1 - rho^2) * dWt drives the volatility factor,
    dW drives the asset.  Arrays may carry a leading path axis.
    """

    dW: np.ndarray
    dWt: np.ndarray
    dZ: np.ndarray
    rho: float


@dataclass(frozen=True)
class VolterraPath:
    """Discrete Volterra path Y (last axis length n+1, Y_0 = 0)."""

    Y: np.ndarray
    kernel: KernelSpec


def gen_increments(
    grid: TimeGrid, rho: float, seed: int, n_paths: int = 1, start: int = 0
) -> DriverIncrements:
    """Draw increments for paths [start, start + n_paths).

    Each path has its own substream derived from (seed, path index), so
    results for a given path do not depend on batching, worker count or
    the total number of paths requested.
    """
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [-1, 1], got {rho}")
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    sqdt = math.sqrt(grid.dt)
    z = np.empty((n_paths, 2, grid.n))
    for k in range(n_paths):
        ss = np.random.SeedSequence(seed, spawn_key=(start + k,))
        rng = np.random.Generator(np.random.PCG64(ss))
        z[k] = rng.standard_normal((2, grid.n))
    dW = z[:, 0, :] * sqdt
    dWt = z[:, 1, :] * sqdt
    dZ = rho * dW + math.sqrt(1.0 - rho * rho) * dWt
    return DriverIncrements(dW=dW, dWt=dWt, dZ=dZ, rho=rho)


def convolve_kernel(kmat: np.ndarray, dz: np.ndarray) -> np.ndarray:
    """Apply the lower-triangular kernel weights: Y = dz @ kmat.T, Y_0 = 0."""
    y = dz @ kmat.T
    y[..., 0] = 0.0
    return y


def volterra_path(
    spec: KernelSpec, grid: TimeGrid, inc: DriverIncrements, cell_integrated: bool = False
) -> VolterraPath:
    """Left-point Volterra path Y_i = sum_{j<i} K(t_i, t_j) dZ_j.

    With cell_integrated=True the kernel values are replaced by per-cell
    RMS weights, making Var(Y_i) = r(t_i) exact.  At H = 1/2, eps = 0 the
    default scheme is a running sum of dZ, computed exactly as such.
    """
    if inc.dZ.shape[-1] != grid.n:
        raise ValueError("increments do not match the grid")
    if not cell_integrated and spec.H == 0.5 and spec.eps == 0.0:
        # constant kernel: exact cumulative sum
        y = np.zeros(inc.dZ.shape[:-1] + (grid.n + 1,))
        np.cumsum(inc.dZ, axis=-1, out=y[..., 1:])
        return VolterraPath(Y=y, kernel=spec)
    build = cell_variance_matrix if cell_integrated else kernel_matrix
    return VolterraPath(Y=convolve_kernel(build(spec, grid.times), inc.dZ), kernel=spec)


def volterra_dh_path(spec: KernelSpec, grid: TimeGrid, inc: DriverIncrements) -> np.ndarray:
    """Pathwise H-derivative: the same convolution with dK/dH weights."""
    if inc.dZ.shape[-1] != grid.n:
        raise ValueError("increments do not match the grid")
    return convolve_kernel(kernel_dh_matrix(spec, grid.times), inc.dZ)
