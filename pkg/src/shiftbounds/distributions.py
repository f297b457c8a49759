"""Gridded and integer-lattice distributions, entropies and max-entropy forms.

All entropies are in nats. Gridded densities use the histogram convention:
node ``i`` carries probability mass ``w_i`` spread evenly over its cell, so
``H = -sum w ln(w/step)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .quantum import UniformGrid

MASS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GriddedDistribution:
    grid: UniformGrid
    masses: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.masses, dtype=float)
        if w.shape != (self.grid.count,):
            raise ValueError("masses must match the grid length")
        if np.any(w < 0):
            raise ValueError("masses must be non-negative")
        if abs(w.sum() - 1) > MASS_TOL:
            raise ValueError(f"masses sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "masses", w)

    @classmethod
    def from_density(cls, grid: UniformGrid, density) -> "GriddedDistribution":
        w = np.clip(np.asarray(density, dtype=float), 0, None) * grid.step
        return cls(grid, w / w.sum())

    @property
    def density(self) -> np.ndarray:
        return self.masses / self.grid.step

    @property
    def periodic(self) -> bool:
        return self.grid.periodic

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def max_density(self) -> float:
        return float(self.masses.max() / self.grid.step)

    def mean(self) -> float:
        return float(np.dot(self.masses, self.nodes))


@dataclass(frozen=True, eq=False)
class IntegerDistribution:
    support_offset: int
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if np.any(p < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(p.sum() - 1) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def support(self) -> np.ndarray:
        return self.support_offset + np.arange(self.probs.size)


# --------------------------------------------------------------------------
# priors


def uniform_circle(count: int = 512, period: float = 2 * math.pi) -> GriddedDistribution:
    g = UniformGrid.circle(count, period)
    return GriddedDistribution(g, np.full(count, 1 / count))


def uniform_on(grid: UniformGrid, a: float, b: float) -> GriddedDistribution:
    """Uniform prior on the nodes of ``grid`` whose cells lie in ``[a, b)``.

    On periodic grids the arc may wrap. The effective length is
    ``(number of nodes) * step``.
    """
    x = grid.nodes
    if grid.periodic:
        p = grid.period
        if b - a >= p - 1e-12:
            mask = np.ones_like(x, bool)
        else:
            mask = np.mod(x - a, p) < b - a
    else:
        mask = (x >= a) & (x < b)
    if not mask.any():
        raise ValueError("interval contains no grid nodes")
    w = mask / mask.sum()
    return GriddedDistribution(grid, w)


def gaussian_prior(grid: UniformGrid, mu: float, sigma: float) -> GriddedDistribution:
    x = grid.nodes
    if grid.periodic:
        p = grid.period
        d = np.mod(x - mu + p / 2, p) - p / 2
    else:
        d = x - mu
    return GriddedDistribution.from_density(grid, np.exp(-d ** 2 / (2 * sigma ** 2)))


def support_length(d: GriddedDistribution) -> float:
    return float(np.count_nonzero(d.masses) * d.grid.step)


def is_uniform(d: GriddedDistribution, rtol: float = 1e-9) -> bool:
    nz = d.masses[d.masses > 0]
    return bool(np.all(np.abs(nz - nz[0]) <= rtol * nz[0]))


# --------------------------------------------------------------------------
# entropies and moments


def shannon_entropy(d) -> float:
    p = np.asarray(d.probs if isinstance(d, IntegerDistribution) else d, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def differential_entropy(d: GriddedDistribution) -> float:
    """Histogram differential entropy; equals Shannon entropy of the masses plus ln step."""
    return shannon_entropy(d.masses) + math.log(d.grid.step)


def wrapped_deviation(x, center: float, period):
    dev = np.asarray(x, dtype=float) - center
    if period is None:
        return dev
    # wrap into (-period/2, period/2]
    return period / 2 - np.mod(period / 2 - dev, period)


def rms_deviation(d: GriddedDistribution, center: float = 0.0) -> float:
    dev = wrapped_deviation(d.nodes, center, d.grid.period)
    return float(math.sqrt(np.dot(d.masses, dev ** 2)))


def mean_abs_deviation(values, probs, ref: float) -> float:
    return float(np.dot(np.asarray(probs, float), np.abs(np.asarray(values, float) - ref)))


def median(values, probs) -> float:
    """Smallest value whose cumulative mass reaches 1/2."""
    v = np.asarray(values, float)
    p = np.asarray(probs, float)
    order = np.argsort(v, kind="stable")
    c = np.cumsum(p[order])
    i = int(np.searchsorted(c, 0.5 - 1e-12))
    return float(v[order][min(i, v.size - 1)])


# --------------------------------------------------------------------------
# maximum entropy at fixed mean absolute deviation


def max_entropy_integer(nbar: float) -> float:
    """Largest Shannon entropy on the integers with ``<|n - n0|> = nbar``.

    ``ln(sqrt(nbar^2 + 1) + nbar) + x/sinh x`` with ``sinh x = 1/nbar``.
    """
    if not nbar > 0:
        raise ValueError("nbar must be positive")
    x = math.asinh(1 / nbar)
    h = math.log(math.sqrt(nbar * nbar + 1) + nbar) + x * nbar
    assert h <= math.log(2 * nbar + 1) + 1 + 1e-12
    return h


def max_entropy_integer_bounded(nbar: float) -> float:
    """Upper bound ``ln(nbar + 1) + 1`` for one-sided integer spectra."""
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    return math.log(nbar + 1) + 1


def max_entropy_continuous(gbar: float) -> float:
    """``ln(2 gbar) + 1``, attained by the two-sided exponential."""
    if not gbar > 0:
        raise ValueError("gbar must be positive")
    return math.log(2 * gbar) + 1


def geometric_ratio(nbar: float) -> float:
    """``v`` solving ``2v/(1 - v^2) = nbar``."""
    if nbar == 0:
        return 0.0
    return math.sqrt(1 + 1 / nbar ** 2) - 1 / nbar


def two_sided_geometric(nbar: float, halfwidth: int) -> IntegerDistribution:
    """``A v^|n|`` on ``-halfwidth..halfwidth`` with ``A = (1-v)/(1+v)``."""
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    n = np.arange(-halfwidth, halfwidth + 1)
    if nbar == 0:
        return IntegerDistribution(-halfwidth, (n == 0).astype(float))
    v = geometric_ratio(nbar)
    tail = 2 * v ** (halfwidth + 1) / (1 + v)
    if tail > 1e-12:
        raise ValueError(f"halfwidth {halfwidth} leaves tail mass {tail:.2e} > 1e-12")
    p = (1 - v) / (1 + v) * v ** np.abs(n)
    return IntegerDistribution(-halfwidth, p / p.sum())


def brute_force_max_entropy(nbar: float, halfwidth: int, tol: float = 1e-10) -> float:
    """Maximise ``-sum p ln p`` on ``-W..W`` subject to ``sum |n| p = nbar``.

    Solves the concave dual over the two Lagrange multipliers: normalisation
    is eliminated through the log-partition function and the remaining
    multiplier is found by bracketing the root of the constraint residual.
    """
    if nbar < 0 or nbar > halfwidth:
        raise ValueError(f"nbar={nbar} infeasible on halfwidth {halfwidth}")
    if nbar == 0:
        return 0.0
    if nbar == halfwidth:
        return math.log(2)
    a = np.abs(np.arange(-halfwidth, halfwidth + 1)).astype(float)

    def moments(beta):
        z = -beta * a
        z -= z.max()
        p = np.exp(z)
        p /= p.sum()
        return p

    def residual(beta):
        return float(np.dot(moments(beta), a) - nbar)

    lo, hi = -1.0, 1.0
    while residual(lo) < 0:
        lo *= 2
    while residual(hi) > 0:
        hi *= 2
    beta = brentq(residual, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    p = moments(beta)
    if abs(np.dot(p, a) - nbar) > max(tol, 1e-12 * nbar):
        raise RuntimeError("dual solve did not meet the constraint tolerance")
    return shannon_entropy(p)
