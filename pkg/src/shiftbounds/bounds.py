"""Resolution floors for shift-parameter estimates.

Every bound is a plain function returning a float (hbar = 1). The
``BoundReport`` collects them under stable equation tags for reporting;
entries flagged ``conjecture`` are never treated as assertions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, optimize

from . import kernels
from .distributions import GriddedDistribution
from .quantum import DISCRETE, CONTINUOUS_SURROGATE, Generator, Povm

# (2 pi e^3)^(-1/2): k_I = HEISENBERG_FACTOR * K_I
HEISENBERG_FACTOR = (2 * math.pi * math.e ** 3) ** -0.5
# (2 pi e)^(-1/2): RMS of a Gaussian with unit entropy power
GAUSSIAN_FACTOR = (2 * math.pi * math.e) ** -0.5
# sqrt(pi / 2e): covariant continuous constant, K_I = pi e
COVARIANT_FACTOR = math.sqrt(math.pi / (2 * math.e))
# sqrt(2 pi / e^3): K_I = 2 pi, the number-phase / rank-one constant
PHASE_FACTOR = math.sqrt(2 * math.pi / math.e ** 3)
TSANG_A = 0.154
TSANG_B = 0.329
TSANG_MIN_PRODUCT = 0.690
TSANG_CROSSOVER = TSANG_A / HEISENBERG_FACTOR

EXACT = "exact-supremum"
QMAX = "qmax-lower"
IGNORANCE = "ignorance-lower"
COVARIANT_CONTINUOUS = "covariant-continuous"
COVARIANT_PHASE = "covariant-phase"


@dataclass(frozen=True)
class KiEstimate:
    value: float
    method: str
    grid_step: Optional[float] = None
    argmax_eigenvalue: Optional[float] = None
    argmax_shift: Optional[float] = None
    approximate: bool = False

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("K_I must be positive")

    @property
    def small_k(self) -> float:
        return HEISENBERG_FACTOR * self.value

    @classmethod
    def covariant_continuous(cls) -> "KiEstimate":
        return cls(math.pi * math.e, COVARIANT_CONTINUOUS)

    @classmethod
    def covariant_phase(cls) -> "KiEstimate":
        return cls(2 * math.pi, COVARIANT_PHASE)


# --------------------------------------------------------------------------
# report containers


@dataclass
class BoundEntry:
    tag: str
    value: Optional[float]
    equation: str
    assumptions: str = ""
    kind: str = "absolute"  # absolute | relative | entropy | length | bits
    conjecture: bool = False
    asserted: bool = False
    reason: Optional[str] = None

    def to_dict(self) -> dict:
        d = {"value": self.value, "equation": self.equation, "kind": self.kind,
             "assumptions": self.assumptions, "conjecture": self.conjecture,
             "asserted": self.asserted and not self.conjecture}
        if self.reason:
            d["reason"] = self.reason
        return d


@dataclass
class BoundReport:
    entries: dict = field(default_factory=dict)
    achieved: dict = field(default_factory=dict)
    inapplicable: dict = field(default_factory=dict)

    def add(self, tag, value, equation, assumptions="", kind="absolute",
            conjecture=False, asserted=False):
        self.entries[tag] = BoundEntry(tag, value, equation, assumptions, kind,
                                       conjecture, asserted)
        return self.entries[tag]

    def skip(self, tag, reason):
        self.inapplicable[tag] = reason

    def __getitem__(self, tag):
        return self.entries[tag].value

    def __contains__(self, tag):
        return tag in self.entries

    def merge(self, other: "BoundReport") -> "BoundReport":
        self.entries.update(other.entries)
        self.inapplicable.update(other.inapplicable)
        self.achieved.update(other.achieved)
        return self

    def violations(self, tol: float = 1e-9) -> list:
        """Asserted, non-conjecture entries the achieved values fall below.

        ``achieved`` keys: ``rms`` (absolute), ``relative``, ``entropy``
        (nats) and ``ensemble_length``.
        """
        lookup = {"absolute": "rms", "relative": "relative", "entropy": "entropy",
                  "length": "ensemble_length"}
        tol_for = self.achieved.get("tolerances", {})
        out = []
        for tag, e in self.entries.items():
            if not e.asserted or e.conjecture or e.value is None:
                continue
            key = lookup.get(e.kind)
            got = self.achieved.get(key)
            if got is None:
                continue
            t = tol_for.get(key, tol)
            if got < e.value - t:
                out.append((tag, got, e.value))
        return out

    def to_dict(self) -> dict:
        return {
            "bounds": {t: e.to_dict() for t, e in sorted(self.entries.items())},
            "inapplicable": dict(sorted(self.inapplicable.items())),
            "achieved": self.achieved,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


# --------------------------------------------------------------------------
# K_I


def _grid_shifts(prior: GriddedDistribution, povm: Povm):
    """Lattice of error values ``y`` indexed like the kernel outputs."""
    pg, mg = prior.grid, povm.grid
    if pg.periodic != mg.periodic:
        raise ValueError("prior and POVM grids must both be periodic or both open")
    if pg.periodic:
        if pg.count != mg.count or abs(pg.period - mg.period) > 1e-12 * pg.period:
            raise ValueError("periodic prior and POVM grids must coincide")
        if pg.offset_to(mg) % mg.count != 0:
            raise ValueError("periodic prior and POVM grids must share nodes")
        return mg.step * np.arange(mg.count)
    pg.offset_to(mg)
    first = mg.start - pg.stop
    return first + mg.step * np.arange(pg.count + mg.count - 1)


def _compressed_blocks(povm: Povm, bases, chunk: int = 64):
    """``B^dag M_j B`` for every basis and node ``j``, one rotation per chunk of effects."""
    full = np.concatenate(bases, axis=1)
    edges = np.cumsum([0] + [b.shape[1] for b in bases])
    out = [np.empty((len(povm), b.shape[1], b.shape[1]), dtype=complex) for b in bases]
    for lo in range(0, len(povm), chunk):
        rot = full.conj().T @ povm.elements[lo:lo + chunk] @ full
        for blk, a, b in zip(out, edges[:-1], edges[1:]):
            blk[lo:lo + chunk] = rot[:, a:b, a:b]
    return out


def _compressed_columns(povm: Povm, basis: np.ndarray, c: np.ndarray = None) -> np.ndarray:
    """Real columns of ``B^dag M_j B`` for every node ``j``."""
    if c is None:
        c = basis.conj().T @ povm.elements @ basis
    k = basis.shape[1]
    if k == 1:
        return np.ascontiguousarray(c[:, 0, :].real)
    return np.ascontiguousarray(np.concatenate([c.real.reshape(len(c), -1),
                                                c.imag.reshape(len(c), -1)], axis=1))


def _largest_eig(cols: np.ndarray, k: int) -> np.ndarray:
    if k == 1:
        return cols[:, 0]
    n = cols.shape[0]
    m = cols[:, :k * k].reshape(n, k, k) + 1j * cols[:, k * k:].reshape(n, k, k)
    return np.linalg.eigvalsh((m + np.conj(np.swapaxes(m, 1, 2))) / 2)[:, -1]


def eigenspace_convolutions(prior: GriddedDistribution, povm: Povm, gen: Generator):
    """For each eigenvalue cluster, ``sup_psi <psi|Mbar_y|psi>`` over ``psi`` in the
    eigenspace, for every lattice shift ``y``.

    Returns ``(shifts, table)`` with ``table`` shaped ``(clusters, shifts)``.
    Within an eigenspace the shift phases cancel, so the compressed averaged
    POVM is the prior-correlation of ``B^dag M B``.
    """
    if povm.kind != "grid":
        raise TypeError("K_I needs a grid POVM")
    if povm.dim != gen.dim:
        raise ValueError("POVM and generator dimensions differ")
    shifts = _grid_shifts(prior, povm)
    q = np.ascontiguousarray(prior.masses)
    table = np.empty((len(gen.clusters), shifts.size))
    blocks = _compressed_blocks(povm, [c.basis for c in gen.clusters])
    for ci, c in enumerate(gen.clusters):
        cols = _compressed_columns(povm, c.basis, blocks[ci])
        corr = kernels.correlate(q, cols, prior.grid.periodic)
        table[ci] = _largest_eig(corr, c.rank)
    return shifts, table


def ki_exact_discrete(prior: GriddedDistribution, povm: Povm, gen: Generator,
                      refine: bool = True, allow_surrogate: bool = False) -> KiEstimate:
    """``1 / sup_{g,y} int q(x) <g|M_{x+y}|g> dx`` on the grid.

    The scan covers every lattice shift; when the POVM carries an exact
    ``density_fn`` the best shift is polished by a golden-section search
    over one grid step either side.
    """
    if gen.spectrum_kind != DISCRETE and not allow_surrogate:
        raise ValueError("ki_exact_discrete needs a discrete generator")
    shifts, table = eigenspace_convolutions(prior, povm, gen)
    ci, yi = np.unravel_index(np.argmax(table), table.shape)
    best = float(table[ci, yi])
    y_best = float(shifts[yi])
    if refine and povm.density_fn is not None:
        basis = gen.clusters[ci].basis
        x = prior.nodes[prior.masses > 0]
        w = prior.masses[prior.masses > 0]

        def neg(y):
            m = sum(wi * (basis.conj().T @ povm.density_fn(xi + y) @ basis) for xi, wi in zip(x, w))
            return -float(np.linalg.eigvalsh((m + m.conj().T) / 2)[-1])

        step = povm.grid.step
        lo, mid, hi = neg(y_best - step), neg(y_best), neg(y_best + step)
        # a flat profile (covariant POVM) has nothing to polish
        if mid < lo and mid < hi:
            res = optimize.minimize_scalar(neg, bracket=(y_best - step, y_best, y_best + step),
                                           method="golden", tol=1e-6)
            if -res.fun > best:
                best, y_best = -float(res.fun), float(res.x)
        elif max(-lo, -hi) > best:
            best, y_best = max((best, y_best), (-lo, y_best - step), (-hi, y_best + step))
    return KiEstimate(1 / best, EXACT, povm.grid.step, gen.clusters[ci].value, y_best,
                      approximate=gen.spectrum_kind == CONTINUOUS_SURROGATE)


def ki_continuous_surrogate(prior, povm, gen) -> KiEstimate:
    """Same supremum evaluated on surrogate eigenvectors; flagged approximate."""
    return ki_exact_discrete(prior, povm, gen, allow_surrogate=True)


def ki_from_qmax(prior: GriddedDistribution) -> KiEstimate:
    return KiEstimate(1 / prior.max_density, QMAX, prior.grid.step)


def ki_ignorance(prior: GriddedDistribution) -> KiEstimate:
    """``[int q^2]^-1`` for estimates that respect ignorance."""
    return KiEstimate(prior.grid.step / float(np.sum(prior.masses ** 2)), IGNORANCE, prior.grid.step)


def _value(ki) -> float:
    return ki.value if isinstance(ki, KiEstimate) else float(ki)


# --------------------------------------------------------------------------
# the entropic chain


def error_entropy_floor(ki, h_g: float) -> float:
    return math.log(_value(ki)) - h_g


def rms_floor_from_entropy(ki, h_g: float) -> float:
    return _value(ki) * GAUSSIAN_FACTOR * math.exp(-h_g)


def ensemble_length_floor(ki, h_g: float) -> float:
    return _value(ki) * math.exp(-h_g)


def _factor(use_gmin):
    return 1.0 if use_gmin else 2.0


def generic_bound(ki, madev: float, gap: Optional[float] = None, kind: str = DISCRETE,
                  use_gmin: bool = False) -> float:
    """``k_I / (c + f <|G-g|> / gap)``; ``c=1`` discrete, ``c=0, gap=1`` continuous."""
    if kind == DISCRETE:
        if gap is None or not gap > 0:
            raise ValueError("discrete bound needs a positive spectral gap")
        c = 1.0
    else:
        c, gap = 0.0, 1.0
    return HEISENBERG_FACTOR * _value(ki) / (c + _factor(use_gmin) * madev / gap)


def relative_resolution_bound(m: int, madev_single: float, gap: float = 1.0,
                              L: Optional[float] = None, use_gmin: bool = False) -> float:
    """Floor on ``dX/L`` for ``m`` copies and a prior uniform on length ``L``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if not gap > 0:
        raise ValueError("gap must be positive")
    return HEISENBERG_FACTOR / (1 + _factor(use_gmin) * m * madev_single / gap)


def covariant_bound(m: int, madev_single: float, use_gmin: bool = False) -> float:
    if m < 1:
        raise ValueError("m must be at least 1")
    return COVARIANT_FACTOR / (_factor(use_gmin) * m * madev_single)


def conjectured_relative_bound_continuous(L: float, madev: float, use_gmin: bool = False) -> float:
    """Unproven relative floor for continuous generators; report only."""
    return COVARIANT_FACTOR / (_factor(use_gmin) * L * madev)


def mz_bounds(n_max: int, ki, m: int = 1, L: Optional[float] = None):
    """Absolute and relative floors from ``H(G) <= ln(2 n_max + 1)``."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    absolute = GAUSSIAN_FACTOR * _value(ki) / (2 * n_max + 1)
    relative = GAUSSIAN_FACTOR / (2 * m * n_max + 1)
    return absolute, relative


def tsang_bound(tau: float, e_dev: float) -> Optional[float]:
    """Relative floor quoted from Tsang; ``None`` when ``tau*e_dev < 0.690``."""
    s = tau * e_dev
    if s < TSANG_MIN_PRODUCT:
        return None
    return TSANG_A / s * math.sqrt(1 - TSANG_B / s)


def time_bounds(e_mean: float, e0: float, gap_e: Optional[float], qmax: Optional[float],
                tau: Optional[float], m: int = 1, D: Optional[int] = None) -> BoundReport:
    rep = BoundReport()
    dev = e_mean - e0
    if gap_e is not None and gap_e > 0:
        if qmax is not None:
            rep.add("time", HEISENBERG_FACTOR / qmax / (1 + dev / gap_e), "time",
                    "K_I >= 1/q_max, g = e0 (factor 2 dropped)", asserted=True)
        rep.add("timem", HEISENBERG_FACTOR / (1 + m * dev / gap_e), "timem",
                f"uniform prior of length tau, m={m}, g = e0", kind="relative", asserted=True)
    else:
        rep.skip("time", "energy gap undefined or zero")
        rep.skip("timem", "energy gap undefined or zero")
    if D is not None:
        if D < 1:
            raise ValueError("D must be at least 1")
        rep.add("d", GAUSSIAN_FACTOR / (m * D), "d", f"probe supported on D={D} levels",
                kind="relative", asserted=True)
    if tau is not None:
        t = tsang_bound(tau, dev)
        if t is None:
            rep.skip("qzz", "tau*<E-e0> < 0.690")
        else:
            rep.add("qzz", t, "qzz", "quoted bound, uniform prior of length tau", kind="relative",
                    asserted=True)
    return rep


def tsang_stronger_than_timem(tau: float, gap_e: float) -> bool:
    """Asymptotic ordering: Tsang's floor wins iff ``tau*gap <= 0.154 sqrt(2 pi e^3)``."""
    return tau * gap_e <= TSANG_CROSSOVER


# --------------------------------------------------------------------------
# noise


def noisy_additive_bound(base: float, h_z: float) -> float:
    if base < 0:
        raise ValueError("base must be non-negative")
    return math.sqrt(base ** 2 + math.exp(2 * h_z) / (2 * math.pi * math.e))


def noisy_rank1_bounds(ki, madev_noisy: float, s_noisy: float, gap: Optional[float] = None,
                       kind: str = DISCRETE, use_gmin: bool = False,
                       gen: Optional[Generator] = None) -> BoundReport:
    """Entropy-boosted floors for rank-one generators and a single copy."""
    if gen is not None and not gen.is_rank_one:
        raise ValueError("noisy rank-one bounds need a non-degenerate generator")
    boost = math.exp(s_noisy)
    rep = BoundReport()
    if kind == DISCRETE:
        rep.add("gen1", generic_bound(ki, madev_noisy, gap, DISCRETE, use_gmin) * boost, "gen1",
                "rank-1 G, m=1, averages over the noisy state", asserted=True)
        rep.add("gendis1", relative_resolution_bound(1, madev_noisy, gap, use_gmin=use_gmin) * boost,
                "gendis1", "rank-1 G, m=1, uniform prior", kind="relative", asserted=True)
    else:
        rep.add("cov1", PHASE_FACTOR / (_factor(use_gmin) * madev_noisy) * boost, "cov1",
                "rank-1 continuous G, covariant estimate")
    return rep


def gaussian_noise_entropy_floor(n_lambda: float, weak: bool = False) -> float:
    """``ln(1+n) + n ln(1+1/n)``; ``weak=True`` gives the looser ``ln(1+n)``."""
    if n_lambda < 0:
        raise ValueError("n_lambda must be non-negative")
    if n_lambda == 0:
        return 0.0
    if weak:
        return math.log1p(n_lambda)
    return math.log1p(n_lambda) + n_lambda * math.log1p(1 / n_lambda)


def noisy_phase_relative_bound(n_mean: float, n_lambda: float) -> float:
    if n_mean < 0:
        raise ValueError("mean photon number must be non-negative")
    return HEISENBERG_FACTOR / (1 + n_mean / (n_lambda + 1))


def mutual_info_cap(relative_floor: float) -> float:
    """Approximate cap ``log2(1/relative_floor)`` on the information in bits."""
    if not 0 < relative_floor <= 1:
        raise ValueError("relative floor must lie in (0, 1]")
    return math.log2(1 / relative_floor)


# --------------------------------------------------------------------------
# baselines


def prior_fisher_information(prior: GriddedDistribution) -> float:
    """``int q (d ln q/dx)^2`` by finite differences over the prior's support.

    Jumps at the support edges are excluded, so a flat prior gives zero.
    """
    w = prior.masses
    lnq = np.log(np.clip(prior.density, 1e-300, None))
    h = prior.grid.step
    if prior.grid.periodic and np.all(w > 0):
        d = (np.roll(lnq, -1) - np.roll(lnq, 1)) / (2 * h)
        return float(np.dot(w, d ** 2))
    total = 0.0
    support = w > 0
    edges = np.flatnonzero(np.diff(np.concatenate([[0], support.astype(int), [0]])))
    for a, b in zip(edges[::2], edges[1::2]):
        if b - a < 2:
            continue
        d = np.gradient(lnq[a:b], h)
        total += float(np.dot(w[a:b], d ** 2))
    return total


def baseline_bounds(var_g: float, m: int = 1, fisher_q: float = 0.0):
    """Cramer-Rao ``1/(2 sqrt(m) dG)`` and its van Trees variant."""
    if not var_g > 0:
        raise ValueError("generator variance must be positive")
    cr = 1 / (2 * math.sqrt(m * var_g))
    vt = 1 / (2 * math.sqrt(m * var_g + fisher_q))
    return cr, vt


def displacement_comparison(density, lo=-np.inf, hi=np.inf):
    """Compare the covariant displacement floor with the Cramer-Rao floor for
    a momentum density (callable), using the median as reference momentum.

    Returns a dict with ``spread_ratio = dP/<|P - p0|>``, both floors, and
    ``cr_over_cov``.
    """
    norm = integrate.quad(density, lo, hi)[0]
    mean = integrate.quad(lambda k: k * density(k), lo, hi)[0] / norm
    var = integrate.quad(lambda k: (k - mean) ** 2 * density(k), lo, hi)[0] / norm
    cdf = lambda p: integrate.quad(density, lo, p)[0] / norm - 0.5
    a, b = mean - 10 * math.sqrt(var), mean + 10 * math.sqrt(var)
    p0 = optimize.brentq(cdf, a, b, xtol=1e-12)
    mad = (integrate.quad(lambda k: (p0 - k) * density(k), lo, p0)[0]
           + integrate.quad(lambda k: (k - p0) * density(k), p0, hi)[0]) / norm
    cov = 0.5 * COVARIANT_FACTOR / mad
    cr = 0.5 / math.sqrt(var)
    return {"median": p0, "mean_abs_dev": mad, "std": math.sqrt(var),
            "spread_ratio": math.sqrt(var) / mad, "covx": cov, "cr": cr,
            "cr_over_cov": cr / cov}
