"""Finite-dimensional states, shift generators, POVMs and noise channels.

Units: hbar = 1. Every operator is a dense complex numpy array and every
matrix function goes through a Hermitian eigendecomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.special import roots_legendre

HERM_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
COMPLETENESS_TOL = 1e-8
PROJECTOR_TOL = 1e-9


class DimensionError(ValueError):
    pass


class TruncationError(RuntimeError):
    """Raised when a Fock-space truncation loses too much probability."""


# --------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class UniformGrid:
    """Uniform parameter grid ``start + i*step`` for ``i < count``.

    Each node is the centre of a cell of width ``step``; a periodic grid
    wraps with period ``step*count``.
    """

    start: float
    step: float
    count: int
    periodic: bool = False

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"grid step must be positive, got {self.step}")
        if self.count < 1:
            raise ValueError(f"grid count must be positive, got {self.count}")

    @classmethod
    def circle(cls, count: int, period: float = 2 * math.pi, start: float = 0.0):
        return cls(start, period / count, count, True)

    @classmethod
    def interval(cls, a: float, b: float, count: int):
        """Cell-centred grid covering ``[a, b]`` exactly."""
        if not b > a:
            raise ValueError("interval needs b > a")
        step = (b - a) / count
        return cls(a + step / 2, step, count, False)

    @property
    def nodes(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @property
    def period(self) -> Optional[float]:
        return self.step * self.count if self.periodic else None

    @property
    def length(self) -> float:
        return self.step * self.count

    @property
    def stop(self) -> float:
        """Last node (not the right cell edge)."""
        return self.start + self.step * (self.count - 1)

    def offset_to(self, other: "UniformGrid", tol: float = 1e-9) -> int:
        """Integer node offset of ``other`` relative to ``self``.

        Raises ``ValueError`` unless both grids share a step and sit on a
        common lattice.
        """
        if abs(self.step - other.step) > tol * self.step:
            raise ValueError(f"grid steps differ: {self.step} vs {other.step}")
        shift = (other.start - self.start) / self.step
        k = int(round(shift))
        if abs(shift - k) > 1e-6:
            raise ValueError("grids are not on a common lattice")
        return k


# --------------------------------------------------------------------------
# states


def _as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True, eq=False)
class DensityOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = _as_matrix(self.matrix)
        if np.max(np.abs(m - m.conj().T)) > HERM_TOL:
            raise ValueError("density operator is not Hermitian")
        m = (m + m.conj().T) / 2
        tr = np.trace(m).real
        if abs(tr - 1) > TRACE_TOL:
            raise ValueError(f"density operator trace is {tr!r}, not 1")
        if np.linalg.eigvalsh(m)[0] < -PSD_TOL:
            raise ValueError("density operator has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_vector(cls, psi) -> "DensityOperator":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def renormalized(cls, matrix) -> "DensityOperator":
        """Hermitise, clip tiny negative eigenvalues and rescale to unit trace."""
        m = _as_matrix(matrix)
        m = (m + m.conj().T) / 2
        w, v = np.linalg.eigh(m)
        w = np.clip(w, 0, None)
        m = (v * w) @ v.conj().T
        return cls(m / np.trace(m).real)

    def expect(self, op) -> float:
        return float(np.real(np.trace(self.matrix @ op)))

    def is_pure(self, tol: float = 1e-10) -> bool:
        return abs(np.trace(self.matrix @ self.matrix).real - 1) < tol


def fock_state(n: int, dim: int) -> DensityOperator:
    if not 0 <= n < dim:
        raise DimensionError(f"Fock level {n} outside dimension {dim}")
    psi = np.zeros(dim)
    psi[n] = 1
    return DensityOperator.from_vector(psi)


def coherent_state(alpha: complex, dim: int) -> DensityOperator:
    """Truncated coherent state, renormalised after truncation."""
    psi = np.zeros(dim, dtype=complex)
    psi[0] = math.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, dim):
        psi[n] = psi[n - 1] * alpha / math.sqrt(n)
    return DensityOperator.from_vector(psi)


def thermal_state(nbar: float, dim: int) -> DensityOperator:
    if nbar < 0:
        raise ValueError("thermal occupation must be non-negative")
    if nbar == 0:
        return fock_state(0, dim)
    r = nbar / (1 + nbar)
    p = r ** np.arange(dim)
    return DensityOperator(np.diag(p / p.sum()).astype(complex))


def maximally_mixed(dim: int) -> DensityOperator:
    return DensityOperator(np.eye(dim, dtype=complex) / dim)


def random_state(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> DensityOperator:
    """Random density operator from a complex Ginibre matrix of given rank."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    m = g @ g.conj().T
    return DensityOperator.renormalized(m)


def random_pure_state(dim: int, rng: np.random.Generator) -> DensityOperator:
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return DensityOperator.from_vector(psi)


def von_neumann_entropy(state: DensityOperator) -> float:
    """``-tr[rho ln rho]`` in nats."""
    w = np.linalg.eigvalsh(state.matrix)
    w = w[w > 1e-14]
    return float(-np.sum(w * np.log(w)))


# --------------------------------------------------------------------------
# generators

DISCRETE = "discrete"
CONTINUOUS_SURROGATE = "continuous-surrogate"


@dataclass(frozen=True)
class EigenCluster:
    value: float
    basis: np.ndarray  # dim x multiplicity, orthonormal columns

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T


class Generator:
    """Hermitian shift generator with its clustered spectral decomposition.

    ``degeneracy_tol`` defaults to ``1e-8`` times the larger of the spectral
    range and the largest ``|g|``.
    For ``continuous-surrogate`` generators the eigenvalue spacing is kept
    in ``spacing`` and ``min_gap`` is ``None`` so gap-based formulas cannot
    be applied to them by accident.
    """

    def __init__(self, matrix, kind: str = DISCRETE, degeneracy_tol: Optional[float] = None,
                 bounded_below: bool = True):
        m = _as_matrix(matrix)
        if np.max(np.abs(m - m.conj().T)) > HERM_TOL:
            raise ValueError("generator is not Hermitian")
        if kind not in (DISCRETE, CONTINUOUS_SURROGATE):
            raise ValueError(f"unknown spectrum kind {kind!r}")
        self.matrix = (m + m.conj().T) / 2
        self.spectrum_kind = kind
        w, v = np.linalg.eigh(self.matrix)
        self.eigenvalues = w
        self.eigenvectors = v
        # a near-zero range would split a fully degenerate spectrum on rounding noise
        scale = max(w[-1] - w[0], float(np.max(np.abs(w))))
        if degeneracy_tol is None:
            degeneracy_tol = 1e-8 * scale if scale > 0 else 1e-12
        self.degeneracy_tol = degeneracy_tol
        self.clusters = _cluster(w, v, degeneracy_tol)
        self.bounded_below = bounded_below
        self.g_min = float(self.clusters[0].value) if bounded_below else None
        values = self.distinct_values
        gap = float(np.min(np.diff(values))) if len(values) > 1 else None
        self.spacing = gap
        self.min_gap = gap if kind == DISCRETE else None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def distinct_values(self) -> np.ndarray:
        return np.array([c.value for c in self.clusters])

    @property
    def is_rank_one(self) -> bool:
        return all(c.rank == 1 for c in self.clusters)

    @classmethod
    def from_spectrum(cls, values, **kw) -> "Generator":
        return cls(np.diag(np.asarray(values, dtype=float)).astype(complex), **kw)

    def distribution(self, state: DensityOperator) -> np.ndarray:
        """Probabilities ``tr[rho Gamma_g]`` over the distinct eigenvalues."""
        p = np.array([np.real(np.einsum("ij,ji->", c.basis.conj().T @ state.matrix, c.basis))
                      for c in self.clusters])
        return np.clip(p, 0, None)

    def unitary(self, x: float) -> np.ndarray:
        """``exp(-i G x)``."""
        v = self.eigenvectors
        return (v * np.exp(-1j * self.eigenvalues * x)) @ v.conj().T

    def check_projectors(self, tol: float = PROJECTOR_TOL) -> None:
        total = np.zeros_like(self.matrix)
        projs = [c.projector for c in self.clusters]
        for i, p in enumerate(projs):
            if np.max(np.abs(p @ p - p)) > tol:
                raise AssertionError("eigenprojector is not idempotent")
            for q in projs[i + 1:]:
                if np.max(np.abs(p @ q)) > tol:
                    raise AssertionError("eigenprojectors are not orthogonal")
            total = total + p
        if np.max(np.abs(total - np.eye(self.dim))) > tol:
            raise AssertionError("eigenprojectors do not resolve the identity")

    def is_integer_spectrum(self, period: float = 2 * math.pi, tol: float = 1e-8) -> bool:
        """True when ``exp(-iG*period)`` is the identity."""
        scaled = self.eigenvalues * period / (2 * math.pi)
        return bool(np.all(np.abs(scaled - np.round(scaled)) < tol))

    def __repr__(self):
        return (f"Generator(dim={self.dim}, kind={self.spectrum_kind}, "
                f"levels={len(self.clusters)}, min_gap={self.min_gap})")


def _cluster(w, v, tol):
    groups = [[0]]
    for i in range(1, len(w)):
        if w[i] - w[groups[-1][-1]] > tol:
            groups.append([i])
        else:
            groups[-1].append(i)
    return [EigenCluster(float(np.mean(w[g])), v[:, g]) for g in groups]


def number_operator(dim: int) -> Generator:
    return Generator.from_spectrum(np.arange(dim))


def mach_zehnder_generator(n_max: int) -> Generator:
    """``(N_A - N_B)/2`` on two modes restricted to ``N_A + N_B <= n_max``."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    values = [(a - b) / 2 for a in range(n_max + 1) for b in range(n_max + 1 - a)]
    return Generator.from_spectrum(values, bounded_below=True)


def momentum_surrogate(grid: UniformGrid) -> Generator:
    """Momentum on a position grid, diagonal in the unitary DFT basis."""
    n = grid.count
    k = np.fft.fftfreq(n, d=grid.step) * 2 * math.pi
    f = np.fft.fft(np.eye(n), norm="ortho")
    matrix = f.conj().T @ np.diag(k) @ f
    return Generator(matrix, kind=CONTINUOUS_SURROGATE, bounded_below=False)


def min_spectral_gap(gen: Generator, degeneracy_tol: Optional[float] = None) -> float:
    if gen.spectrum_kind != DISCRETE:
        raise ValueError("minimum gap is only defined for discrete generators")
    if degeneracy_tol is None:
        clusters = gen.clusters
    else:
        clusters = _cluster(gen.eigenvalues, gen.eigenvectors, degeneracy_tol)
    if len(clusters) < 2:
        raise ValueError("need at least two distinct eigenvalues for a gap")
    return float(np.min(np.diff([c.value for c in clusters])))


def apply_shift(state: DensityOperator, gen: Generator, x: float) -> DensityOperator:
    """``exp(-iGx) rho exp(iGx)``."""
    if state.dim != gen.dim:
        raise DimensionError(f"state dim {state.dim} != generator dim {gen.dim}")
    u = gen.unitary(x)
    return DensityOperator(u @ state.matrix @ u.conj().T)


# --------------------------------------------------------------------------
# POVMs

FINITE = "finite"
GRID = "grid"


def _psd_min(ops):
    ops = np.asarray(ops)
    return float(np.min(np.linalg.eigvalsh((ops + np.conj(np.swapaxes(ops, -1, -2))) / 2)[..., 0]))


class Povm:
    """A measurement, either a finite list of effects or an operator
    density sampled on a ``UniformGrid``.

    For grid POVMs ``elements[i]`` is the operator density at node ``i`` and
    completeness means ``sum(elements) * step == I``. ``density_fn`` is an
    optional exact density used for off-grid evaluation.
    """

    def __init__(self, elements, grid: Optional[UniformGrid] = None,
                 density_fn: Optional[Callable[[float], np.ndarray]] = None,
                 validate: bool = True, completeness_tol: float = COMPLETENESS_TOL):
        e = np.asarray(elements, dtype=complex)
        if e.ndim != 3 or e.shape[1] != e.shape[2]:
            raise DimensionError(f"POVM elements must be (k, d, d), got {e.shape}")
        if grid is not None and grid.count != e.shape[0]:
            raise DimensionError("grid size does not match number of POVM elements")
        self.elements = e
        self.grid = grid
        self.kind = GRID if grid is not None else FINITE
        self.density_fn = density_fn
        if validate:
            self.validate(completeness_tol)

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    def __len__(self):
        return self.elements.shape[0]

    @property
    def weights(self) -> np.ndarray:
        """Effects as probabilities-per-outcome (density times step for grids)."""
        return self.elements * self.grid.step if self.kind == GRID else self.elements

    def completeness_defect(self) -> float:
        total = self.weights.sum(axis=0)
        return float(np.max(np.abs(total - np.eye(self.dim))))

    def validate(self, tol: float = COMPLETENESS_TOL) -> None:
        if _psd_min(self.elements) < -PSD_TOL * max(1.0, np.max(np.abs(self.elements))):
            raise ValueError("POVM element is not positive semidefinite")
        defect = self.completeness_defect()
        if defect > tol:
            raise ValueError(f"POVM completeness defect {defect:.3e} exceeds {tol:.1e}")

    def probabilities(self, state: DensityOperator) -> np.ndarray:
        """Outcome masses ``tr[rho E_k]`` (for grids: density times step)."""
        p = np.real(np.einsum("ij,kji->k", state.matrix, self.weights))
        return np.clip(p, 0, None)

    def density(self, state: DensityOperator) -> np.ndarray:
        if self.kind != GRID:
            raise TypeError("density is only defined for grid POVMs")
        return np.real(np.einsum("ij,kji->k", state.matrix, self.elements))

    def conjugated(self, u: np.ndarray) -> "Povm":
        """``u^dag E u`` for every element; still complete for unitary ``u``."""
        e = u.conj().T @ self.elements @ u
        fn = None
        if self.density_fn is not None:
            base = self.density_fn
            fn = lambda x: u.conj().T @ base(x) @ u
        return Povm(e, self.grid, fn, validate=False)


def canonical_phase_povm(dim: int, grid: UniformGrid) -> Povm:
    """Canonical phase density ``(2pi)^-1 sum_mn exp(-i(m-n)phi)|m><n|``."""
    if not grid.periodic or abs(grid.period - 2 * math.pi) > 1e-12:
        raise ValueError("canonical phase POVM needs a periodic grid of period 2*pi")
    return covariant_phase_povm(np.zeros(dim), grid)


def covariant_phase_povm(seed_phases, grid: UniformGrid) -> Povm:
    """Phase-covariant rank-one POVM with seed ket ``sum_n exp(i theta_n)|n>``.

    Zero seed phases give the canonical phase measurement.
    """
    theta = np.asarray(seed_phases, dtype=float)
    dim = theta.size
    if not grid.periodic or abs(grid.period - 2 * math.pi) > 1e-12:
        raise ValueError("covariant phase POVM needs a periodic grid of period 2*pi")
    if grid.count < dim:
        raise ValueError("grid too coarse for exact completeness (need count >= dim)")
    n = np.arange(dim)

    def density(phi):
        ket = np.exp(-1j * n * phi + 1j * theta)
        return np.outer(ket, ket.conj()) / (2 * math.pi)

    kets = np.exp(-1j * np.outer(grid.nodes, n) + 1j * theta)
    elements = np.einsum("km,kn->kmn", kets, kets.conj()) / (2 * math.pi)
    return Povm(elements, grid, density)


def hermite_functions(nmax: int, x) -> np.ndarray:
    """Normalised oscillator eigenfunctions ``<x|n>`` for ``n < nmax``.

    Returns shape ``(nmax, len(x))``; uses the stable three-term recurrence.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((nmax,) + x.shape)
    out[0] = math.pi ** -0.25 * np.exp(-x ** 2 / 2)
    if nmax > 1:
        out[1] = math.sqrt(2) * x * out[0]
    for n in range(2, nmax):
        out[n] = math.sqrt(2 / n) * x * out[n - 1] - math.sqrt((n - 1) / n) * out[n - 2]
    return out


def quadrature_povm(dim: int, grid: UniformGrid, scale: float = 1.0,
                    validate: bool = True) -> Povm:
    """Homodyne measurement of ``(a + a^dag)/sqrt 2`` reported as ``scale * x``.

    On a periodic grid the reported value is wrapped, so the density at
    ``phi`` sums the quadrature eigenprojectors over every preimage.
    """
    cutoff = math.sqrt(2 * dim + 1) + 12

    def density(t):
        t = np.atleast_1d(t)
        if grid.periodic:
            p = grid.period
            kmax = int(math.ceil((cutoff * scale + p) / p))
            xs = (t[:, None] + p * np.arange(-kmax, kmax + 1)[None, :]) / scale
        else:
            xs = t[:, None] / scale
        h = hermite_functions(dim, xs)  # (dim, nt, nk)
        return np.einsum("mtk,ntk->tmn", h, h) / scale

    elements = density(grid.nodes).astype(complex)
    return Povm(elements, grid, lambda t: density(t)[0].astype(complex), validate=validate)


def projective_povm(gen: Generator, grid: UniformGrid, locations=None) -> Povm:
    """Measure ``G`` and report a grid node for each eigenvalue.

    By default eigenvalue ``g`` is reported at the node nearest ``g``
    (wrapped on periodic grids). The density is a point mass of height
    ``1/step``.
    """
    elements = np.zeros((grid.count, gen.dim, gen.dim), dtype=complex)
    if locations is None:
        locations = gen.distinct_values
    for c, loc in zip(gen.clusters, locations):
        k = int(round((loc - grid.start) / grid.step))
        if grid.periodic:
            k %= grid.count
        elif not 0 <= k < grid.count:
            raise ValueError(f"eigenvalue {c.value} reported outside the grid")
        elements[k] += c.projector / grid.step
    return Povm(elements, grid)


def smeared_povm(effects, grid: UniformGrid, profiles) -> Povm:
    """Finite POVM whose outcome ``k`` is reported with grid profile ``f_k``.

    ``profiles`` has shape ``(k, grid.count)``; each row is normalised to a
    probability mass function, so completeness of ``effects`` carries over.
    """
    effects = np.asarray(effects, dtype=complex)
    prof = np.asarray(profiles, dtype=float)
    prof = prof / prof.sum(axis=1, keepdims=True)
    elements = np.einsum("kg,kij->gij", prof, effects) / grid.step
    return Povm(elements, grid)


# --------------------------------------------------------------------------
# random objects


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def psd_sqrt(a: np.ndarray, clamp: float = 1e-12) -> np.ndarray:
    """Square root of a PSD matrix; eigenvalues below ``clamp`` go to zero."""
    w, v = np.linalg.eigh((a + a.conj().T) / 2)
    w = np.where(w < clamp, 0.0, w)
    return (v * np.sqrt(w)) @ v.conj().T


def psd_inv_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((a + a.conj().T) / 2)
    return (v / np.sqrt(w)) @ v.conj().T


def random_finite_povm(dim: int, k: int, rng: np.random.Generator, kind: str = "mixed") -> np.ndarray:
    """Random effects ``(k, d, d)`` summing to the identity.

    ``kind``: ``projective`` groups the columns of a Haar unitary into ``k``
    blocks (needs ``k <= dim``); ``wishart`` normalises random PSD matrices
    by ``S^-1/2``; ``mixed`` perturbs a projective POVM with Wishart noise
    and renormalises; ``rank1`` takes rows of a Haar isometry (``k >= dim``).
    """
    if kind == "projective":
        if k > dim:
            raise ValueError("projective POVM needs k <= dim")
        u = haar_unitary(dim, rng)
        cuts = np.sort(rng.choice(np.arange(1, dim), size=k - 1, replace=False)) if k > 1 else []
        blocks = np.split(np.arange(dim), cuts)
        return np.array([u[:, b] @ u[:, b].conj().T for b in blocks])
    if kind == "rank1":
        if k < dim:
            raise ValueError("rank-1 POVM needs k >= dim")
        u = haar_unitary(k, rng)[:dim, :]
        return np.einsum("ik,jk->kij", u, u.conj())
    if kind in ("wishart", "mixed"):
        g = rng.standard_normal((k, dim, dim)) + 1j * rng.standard_normal((k, dim, dim))
        w = np.einsum("kij,klj->kil", g, g.conj())
        if kind == "mixed":
            base = random_finite_povm(dim, min(k, dim), rng, "projective")
            base = np.concatenate([base, np.zeros((k - base.shape[0], dim, dim))])
            w = base + rng.uniform(0.01, 0.5) * w / dim
        s = psd_inv_sqrt(w.sum(axis=0))
        return s @ w @ s
    raise ValueError(f"unknown POVM kind {kind!r}")


# --------------------------------------------------------------------------
# tensor products


def tensor_product(a, b):
    """Kronecker composition of two states, generators or finite POVMs.

    Generators compose as ``G (x) I + I (x) G``.
    """
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        return DensityOperator(np.kron(a.matrix, b.matrix))
    if isinstance(a, Generator) and isinstance(b, Generator):
        if a.spectrum_kind != b.spectrum_kind:
            raise TypeError("cannot combine generators of different spectrum kinds")
        ia, ib = np.eye(a.dim), np.eye(b.dim)
        return Generator(np.kron(a.matrix, ib) + np.kron(ia, b.matrix), kind=a.spectrum_kind,
                         bounded_below=a.bounded_below and b.bounded_below)
    if isinstance(a, Povm) and isinstance(b, Povm):
        if a.kind != FINITE or b.kind != FINITE:
            raise TypeError("tensor product is only defined for finite POVMs; "
                            "build joint grid estimators with joint_estimator_povm")
        e = np.einsum("aij,bkl->abikjl", a.elements, b.elements)
        d = a.dim * b.dim
        return Povm(e.reshape(len(a) * len(b), d, d))
    raise TypeError(f"cannot take tensor product of {type(a).__name__} and {type(b).__name__}")


def tensor_power(a, m: int):
    out = a
    for _ in range(m - 1):
        out = tensor_product(out, a)
    return out


# --------------------------------------------------------------------------
# displacement and Gaussian noise


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


class Displacement(NamedTuple):
    matrix: np.ndarray
    unitary_defect: float


def displacement_operator(alpha: complex, dim: int, work_dim: Optional[int] = None) -> Displacement:
    """Glauber ``D(alpha) = exp(alpha a^dag - alpha^* a)``.

    The exponential is taken on ``work_dim >= dim`` levels and then cut
    down to ``dim``; with ``work_dim > dim`` the unitary defect measures the
    amplitude that leaks out of the kept levels.
    """
    if dim < 2:
        raise DimensionError("displacement needs dim >= 2")
    work = dim if work_dim is None else max(work_dim, dim)
    a = annihilation(work)
    # i(alpha a^dag - alpha^* a) is Hermitian
    h = 1j * (alpha * a.conj().T - np.conj(alpha) * a)
    w, v = np.linalg.eigh(h)
    d = ((v * np.exp(-1j * w)) @ v.conj().T)[:dim, :dim]
    defect = float(np.max(np.abs(d.conj().T @ d - np.eye(dim))))
    return Displacement(d, defect)


def gaussian_noise_channel(state: DensityOperator, n_lambda: float, n_radial: int = 64,
                           n_angular: int = 64, radius_factor: float = 6.0,
                           pad: int = 30, max_defect: float = 1e-3,
                           return_defect: bool = False):
    """Random-displacement channel with Gaussian weight ``exp(-|a|^2/n)/(pi n)``.

    Quadrature: Gauss-Legendre in the radius on ``[0, radius_factor*sqrt(n)]``
    and a uniform angular rule. Displacements act on ``dim + pad`` levels and
    the result is cut back to ``dim``; the lost trace is the defect. The
    output is renormalised only when the defect is at most ``max_defect``,
    otherwise ``TruncationError`` is raised.
    """
    if n_lambda < 0:
        raise ValueError("n_lambda must be non-negative")
    if n_lambda == 0:
        return (state, 0.0) if return_defect else state
    dim = state.dim
    work = dim + pad
    radius = radius_factor * math.sqrt(n_lambda)
    xr, wr = roots_legendre(n_radial)
    r = (xr + 1) * radius / 2
    wr = wr * radius / 2 * (2 / n_lambda) * r * np.exp(-r ** 2 / n_lambda)
    theta = 2 * math.pi * np.arange(n_angular) / n_angular

    rho = np.zeros((work, work), dtype=complex)
    rho[:dim, :dim] = state.matrix
    levels = np.arange(work)
    diff = levels[:, None] - levels[None, :]
    # rotate rho by exp(-i theta N) once per angle; D(r e^{i theta}) = R D(r) R^dag
    phase = np.exp(-1j * theta[:, None, None] * diff[None])
    rho_rot = rho[None] * phase
    out = np.zeros((work, work), dtype=complex)
    for ri, wi in zip(r, wr):
        d = displacement_operator(ri, work).matrix
        s = np.einsum("ij,tjk,lk->til", d, rho_rot, d.conj(), optimize=True)
        out += wi * np.mean(s * phase.conj(), axis=0)
    out = out[:dim, :dim]
    defect = 1.0 - float(np.trace(out).real)
    if abs(defect) > max_defect:
        raise TruncationError(f"trace defect {defect:.3e} exceeds {max_defect:.1e}; "
                              "increase dim or pad")
    result = DensityOperator.renormalized(out)
    return (result, defect) if return_defect else result
