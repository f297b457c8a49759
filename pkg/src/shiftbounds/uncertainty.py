"""Numerical checks of entropic uncertainty relations.

Finite relations are checked exactly. Continuous ones are checked on grids:
a grid POVM with weights ``density*step`` is a finite POVM, so the finite
relation holds on the grid and the continuum statement is approached as the
grid is refined.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .distributions import GriddedDistribution, differential_entropy, shannon_entropy
from .quantum import (DensityOperator, Generator, Povm, UniformGrid, canonical_phase_povm,
                      haar_unitary, hermite_functions, psd_sqrt, random_finite_povm, random_state,
                      von_neumann_entropy)

DISCRETE_TOL = 1e-8
GRID_TOL = 1e-3
ALIASING_TOL = 1e-8


@dataclass
class UrCheckResult:
    lhs: float
    rhs: float
    relation: str
    digest: str
    tol: float = DISCRETE_TOL

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        return self.slack >= -self.tol

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(slack=self.slack, passed=self.passed)
        return d


def _digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()[:16]


def _effects(p) -> np.ndarray:
    if isinstance(p, Povm):
        if p.kind != "finite":
            raise TypeError("finite POVM expected")
        return p.elements
    e = np.asarray(p, dtype=complex)
    if e.ndim == 2:
        e = e[None]
    return e


def _check_psd(e, tol=1e-10):
    h = (e + np.conj(np.swapaxes(e, -1, -2))) / 2
    if np.max(np.abs(e - h)) > tol or np.min(np.linalg.eigvalsh(h)) < -tol:
        raise ValueError("POVM element is not positive semidefinite")


def _sqrt_all(e):
    _check_psd(e)
    return np.array([psd_sqrt(x) for x in e])


def overlap_norm(povm_a, povm_b) -> float:
    """``max_jk || A_j^1/2 B_k^1/2 ||`` (largest singular value)."""
    sa, sb = _sqrt_all(_effects(povm_a)), _sqrt_all(_effects(povm_b))
    if sa.shape[1] != sb.shape[1]:
        raise ValueError("POVM dimensions differ")
    prod = np.einsum("aij,bjk->abik", sa, sb)
    return float(np.max(np.linalg.svd(prod, compute_uv=False)))


def _probs(state: DensityOperator, e) -> np.ndarray:
    p = np.real(np.einsum("ij,kji->k", state.matrix, e))
    return np.clip(p, 0, None)


def check_eur_discrete(state: DensityOperator, povm_a, povm_b, tol=DISCRETE_TOL) -> UrCheckResult:
    """``H(A) + H(B) >= -2 ln c`` with ``c`` the overlap norm."""
    a, b = _effects(povm_a), _effects(povm_b)
    lhs = shannon_entropy(_probs(state, a)) + shannon_entropy(_probs(state, b))
    rhs = -2 * math.log(overlap_norm(a, b))
    return UrCheckResult(lhs, rhs, "eur-discrete", _digest(state.matrix, a, b), tol)


def _is_rank_one(e, tol=1e-9) -> bool:
    w = np.linalg.eigvalsh((e + np.conj(np.swapaxes(e, -1, -2))) / 2)
    return bool(np.all(np.sum(w > tol * np.max(w, axis=-1, keepdims=True), axis=-1) <= 1))


def check_eur_rank1(state: DensityOperator, povm_a, povm_b, tol=DISCRETE_TOL) -> UrCheckResult:
    """``H(A) + H(B) >= -2 ln c + S[rho]`` for rank-one ``A``."""
    a, b = _effects(povm_a), _effects(povm_b)
    if not _is_rank_one(a):
        raise ValueError("every element of the first POVM must have rank one")
    lhs = shannon_entropy(_probs(state, a)) + shannon_entropy(_probs(state, b))
    rhs = -2 * math.log(overlap_norm(a, b)) + von_neumann_entropy(state)
    return UrCheckResult(lhs, rhs, "eur-rank1", _digest(state.matrix, a, b), tol)


def check_number_phase(state: DensityOperator, grid: Optional[UniformGrid] = None,
                       with_entropy: bool = False, tol: float = 1e-6) -> UrCheckResult:
    """``H(N) + H(Phi) >= ln 2pi`` under the canonical phase measurement.

    With ``with_entropy`` the von Neumann entropy is added to the right side.
    """
    grid = grid or UniformGrid.circle(512)
    povm = canonical_phase_povm(state.dim, grid)
    h_n = shannon_entropy(np.clip(np.real(np.diag(state.matrix)), 0, None))
    h_phi = differential_entropy(GriddedDistribution.from_density(grid, povm.density(state)))
    rhs = math.log(2 * math.pi) + (von_neumann_entropy(state) if with_entropy else 0.0)
    tag = "number-phase-rank1" if with_entropy else "number-phase"
    return UrCheckResult(h_n + h_phi, rhs, tag, _digest(state.matrix, grid.nodes), tol)


# --------------------------------------------------------------------------
# position and momentum on a line grid


def _momentum_masses(psi: np.ndarray) -> np.ndarray:
    return np.abs(np.fft.fft(psi, norm="ortho")) ** 2


def _tail_mass(masses: np.ndarray, fraction: float = 1 / 16) -> float:
    """Mass in the outer ``fraction`` of the centred grid on either side."""
    n = masses.size
    k = max(1, int(n * fraction))
    m = np.fft.fftshift(masses)
    return float(m[:k].sum() + m[-k:].sum())


def qp_entropies(grid: UniformGrid, psis, weights=None):
    """``(H(Q), H(P))`` for an ensemble of orthonormal grid wavefunctions.

    Momentum laws use the unitary DFT; the momentum step is ``2pi/(n dx)``.
    Raises if either law has more than 1e-8 of its mass near the grid edges.
    """
    psis = np.atleast_2d(np.asarray(psis, dtype=complex))
    w = np.ones(len(psis)) / len(psis) if weights is None else np.asarray(weights, float)
    n, dx = grid.count, grid.step
    dp = 2 * math.pi / (n * dx)
    q = np.einsum("k,kx->x", w, np.abs(psis) ** 2)
    p = np.einsum("k,kx->x", w, np.array([_momentum_masses(s) for s in psis]))
    q, p = q / q.sum(), p / p.sum()
    if _tail_mass(p) > ALIASING_TOL:
        raise ValueError(f"momentum tail mass {_tail_mass(p):.2e} signals aliasing")
    if _tail_mass(np.fft.ifftshift(q)) > ALIASING_TOL:
        raise ValueError("position law reaches the grid edge")
    return shannon_entropy(q) + math.log(dx), shannon_entropy(p) + math.log(dp)


def check_qp_discretized(grid: UniformGrid, psis, weights=None, variant: str = "pure",
                         tol: float = 1e-9) -> UrCheckResult:
    """``H(Q)+H(P) >= ln 2pi``; variant ``mixed`` subtracts the ensemble entropy.

    ``psis`` are orthonormal wavefunctions sampled on ``grid`` (normalised so
    that ``sum |psi|^2 = 1``); ``weights`` are their probabilities.
    """
    psis = np.atleast_2d(np.asarray(psis, dtype=complex))
    psis = psis / np.linalg.norm(psis, axis=1, keepdims=True)
    w = np.ones(len(psis)) / len(psis) if weights is None else np.asarray(weights, float)
    hq, hp = qp_entropies(grid, psis, w)
    lhs = hq + hp
    if variant == "mixed":
        lhs -= shannon_entropy(w)
    elif variant != "pure":
        raise ValueError(f"unknown variant {variant!r}")
    return UrCheckResult(lhs, math.log(2 * math.pi), f"qp-{variant}", _digest(psis, w), tol)


def gaussian_wavefunction(grid: UniformGrid, sigma: float = 1 / math.sqrt(2), x0: float = 0.0,
                          p0: float = 0.0) -> np.ndarray:
    """Grid samples of a Gaussian with position spread ``sigma``, unit norm."""
    x = grid.nodes
    psi = np.exp(-(x - x0) ** 2 / (4 * sigma ** 2) + 1j * p0 * x)
    return psi / np.linalg.norm(psi)


def thermal_ensemble(grid: UniformGrid, nbar: float, nmax: Optional[int] = None):
    """Oscillator eigenfunctions with thermal weights (tail below 1e-14)."""
    if nbar == 0:
        nmax = 1
    elif nmax is None:
        r = nbar / (1 + nbar)
        nmax = int(math.ceil(math.log(1e-14) / math.log(r)))
    w = (nbar / (1 + nbar)) ** np.arange(nmax) if nbar > 0 else np.ones(1)
    w = w / w.sum()
    return hermite_functions(nmax, grid.nodes), w


def random_smooth_state(grid: UniformGrid, rng: np.random.Generator, nmax: int = 8) -> np.ndarray:
    """Random superposition of scaled, shifted oscillator eigenfunctions."""
    scale = rng.uniform(0.6, 1.6)
    x0 = rng.uniform(-1.0, 1.0)
    c = rng.standard_normal(nmax) + 1j * rng.standard_normal(nmax)
    c *= np.exp(-0.3 * np.arange(nmax))
    psi = c @ hermite_functions(nmax, (grid.nodes - x0) / scale)
    return psi / np.linalg.norm(psi)


# --------------------------------------------------------------------------
# binned limits


def binned_convergence(povm: Povm, state: DensityOperator, eps_list):
    """``(eps, H(C_eps) + ln eps)`` for bins of width ``eps`` built from ``povm``'s grid.

    Each ``eps`` must be an integer multiple of the grid step that divides
    the node count. Returns the list and a flag telling whether the sequence
    approaches its limit monotonically. Splitting a bin into ``k`` parts raises
    the entropy by at most ``ln k``, so the values can only fall as ``eps``
    shrinks along nested bins.
    """
    if povm.kind != "grid":
        raise TypeError("binned convergence needs a grid POVM")
    masses = np.clip(povm.probabilities(state), 0, None)
    masses = masses / masses.sum()
    step, n = povm.grid.step, povm.grid.count
    out = []
    for eps in eps_list:
        k = eps / step
        ki = int(round(k))
        if ki < 1 or abs(k - ki) > 1e-9 * max(1, k) or n % ki:
            raise ValueError(f"bin width {eps} is not commensurate with the grid")
        binned = masses.reshape(-1, ki).sum(axis=1)
        out.append((float(eps), shannon_entropy(binned) + math.log(eps)))
    vals = [v for _, v in sorted(out, key=lambda t: -t[0])]
    monotone = all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
    return out, monotone


# --------------------------------------------------------------------------
# covariant measurements of a continuous generator


def check_covariant_relation(gen: Generator, state: DensityOperator, grid: UniformGrid,
                             blur_sigma: float = 0.0, tol: float = GRID_TOL) -> UrCheckResult:
    """``H(G) + H(M) >= ln(pi e)`` for a momentum surrogate and a covariant estimate.

    The estimate is position (the observable conjugate to the surrogate),
    optionally blurred by a Gaussian kernel of width ``blur_sigma``.
    """
    p_g = np.clip(gen.distribution(state), 0, None)
    vals = gen.distinct_values
    dp = float(np.min(np.diff(vals)))
    h_g = shannon_entropy(p_g / p_g.sum()) + math.log(dp)
    q = np.clip(np.real(np.diag(state.matrix)), 0, None)
    if blur_sigma > 0:
        x = grid.nodes - grid.nodes[grid.count // 2]
        kern = np.exp(-x ** 2 / (2 * blur_sigma ** 2))
        kern /= kern.sum()
        q = np.convolve(q, kern, mode="same")
    h_m = shannon_entropy(q / q.sum()) + math.log(grid.step)
    return UrCheckResult(h_g + h_m, math.log(math.pi * math.e), "covariant",
                         _digest(state.matrix, np.array([blur_sigma])), tol)


# --------------------------------------------------------------------------
# randomized suites


def _trial_rngs(seed: int, trials: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]


def random_eur_suite(trials: int = 1000, seed: int = 0, max_dim: int = 8, rank1: bool = False):
    """Random (state, POVM, POVM) triples checked with the discrete or rank-one relation."""
    out = []
    for rng in _trial_rngs(seed, trials):
        d = int(rng.integers(2, max_dim + 1))
        state = random_state(d, rng, rank=int(rng.integers(1, d + 1)))
        if rank1:
            a = random_finite_povm(d, int(rng.integers(d, 2 * d + 1)), rng, "rank1")
        else:
            kind = rng.choice(["projective", "wishart", "mixed", "rank1"])
            k = int(rng.integers(2, d + 1)) if kind == "projective" else int(rng.integers(d, 2 * d + 1))
            a = random_finite_povm(d, k, rng, kind)
        kind = rng.choice(["projective", "wishart", "mixed", "rank1"])
        k = int(rng.integers(2, d + 1)) if kind == "projective" else int(rng.integers(d, 2 * d + 1))
        b = random_finite_povm(d, k, rng, kind)
        out.append((check_eur_rank1 if rank1 else check_eur_discrete)(state, a, b))
    return out


def mub_pair(dim: int):
    """Computational basis and its Fourier transform as rank-one POVMs."""
    f = np.fft.fft(np.eye(dim), norm="ortho")
    comp = np.array([np.outer(e, e) for e in np.eye(dim)]).astype(complex)
    four = np.einsum("ik,jk->kij", f, f.conj())
    return comp, four


def rank2_counterexample_search(trials: int = 10_000, dim: int = 6, seed: int = 0,
                                tol: float = 1e-9, x_rank: int = 1) -> Optional[dict]:
    """Search for violations of the unproven relation for two continuous observables.

    Both observables are represented by grid densities ``X_x = X_k/dx`` and
    ``Y_y = Y_l/dy`` built from random finite POVMs; the ``ln dx + ln dy``
    terms cancel between the two sides. The relation tested is
    ``H(X) + H(Y) >= -sup ln <psi|Y_y^1/2 X_x Y_y^1/2|psi> + S[rho]`` with
    rank-one ``X`` elements. ``x_rank=2`` uses rank-two projective ``X``,
    which lies outside the hypothesis and does admit violations.
    Returns the first violating instance serialised as nested lists, or ``None``.
    """
    for t, rng in enumerate(_trial_rngs(seed, trials)):
        d = int(rng.integers(2 * x_rank, max(dim, 2 * x_rank) + 1))
        if x_rank == 1:
            x = random_finite_povm(d, int(rng.integers(d, 3 * d + 1)), rng, "rank1")
        else:
            u = haar_unitary(d, rng)
            cols = [u[:, i:i + x_rank] for i in range(0, d, x_rank)]
            x = np.array([c @ c.conj().T for c in cols])
        kind = rng.choice(["projective", "wishart", "mixed", "rank1"])
        kk = int(rng.integers(2, d + 1)) if kind == "projective" else int(rng.integers(d, 2 * d + 1))
        y = random_finite_povm(d, kk, rng, kind)
        state = random_state(d, rng, rank=int(rng.integers(1, d + 1)))
        sy = _sqrt_all(y)
        sandwich = np.einsum("bij,ajk,bkl->abil", sy, x, sy)
        c = float(np.max(np.linalg.eigvalsh(sandwich)))
        lhs = shannon_entropy(_probs(state, x)) + shannon_entropy(_probs(state, y))
        rhs = -math.log(c) + von_neumann_entropy(state)
        if lhs - rhs < -tol:
            return {"trial": t, "lhs": lhs, "rhs": rhs, "state": _serial(state.matrix),
                    "X": _serial(x), "Y": _serial(y)}
    return None


def _serial(a):
    a = np.asarray(a)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def summarize(results) -> dict:
    slacks = [r.slack for r in results]
    return {"trials": len(results), "passed": sum(r.passed for r in results),
            "failed": sum(not r.passed for r in results),
            "worst_slack": min(slacks) if slacks else None}
