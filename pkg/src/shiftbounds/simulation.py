"""Forward simulation of shift estimation schemes on grids.

The error ``Y = X_hat - X`` has law ``p_Y(y) = sum_i q_i tr[rho_{x_i} M_{x_i+y}]``.
Prior and POVM grids share a step; on periodic grids they share nodes and
``Y`` is wrapped into ``(-period/2, period/2]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import bounds as B
from . import kernels
from .distributions import (GriddedDistribution, differential_entropy, is_uniform,
                            mean_abs_deviation, rms_deviation, shannon_entropy, support_length)
from .quantum import (DISCRETE, DensityOperator, Generator, Povm, UniformGrid, tensor_power,
                      von_neumann_entropy)

NORMALIZATION_TOL = 1e-4
MAX_JOINT_DIM = 4096


@dataclass
class Scenario:
    probe: DensityOperator
    gen: Generator
    prior: GriddedDistribution
    povm: Povm
    copies: int = 1
    single_copy: Optional[tuple] = None  # (probe, gen) before composition
    noise: Optional[dict] = None  # {"n_lambda": ..., "clean_mean": ...}

    def __post_init__(self):
        if not (self.probe.dim == self.gen.dim == self.povm.dim):
            raise ValueError(f"dimension mismatch: probe {self.probe.dim}, "
                             f"generator {self.gen.dim}, POVM {self.povm.dim}")
        if self.povm.kind != "grid":
            raise ValueError("scenarios need a grid POVM")
        B._grid_shifts(self.prior, self.povm)
        if self.prior.periodic and not self.gen.is_integer_spectrum(self.prior.grid.period):
            raise ValueError("periodic parameter needs exp(-iG*period) = I")

    @property
    def periodic(self) -> bool:
        return self.prior.periodic


def response_matrix(probe: DensityOperator, gen: Generator, xs, povm: Povm,
                    chunk: int = 64) -> np.ndarray:
    """``R[i, j] = tr[rho_{x_i} M_j]`` (a density in the estimate)."""
    v = gen.eigenvectors
    g = gen.eigenvalues
    rho = v.conj().T @ probe.matrix @ v
    # effects are Hermitian, so tr[A M] = real(sum(conj(A) * M))
    eff = povm.elements.reshape(len(povm), -1)
    xs = np.asarray(xs, dtype=float)
    out = np.empty((xs.size, len(povm)))
    for lo in range(0, xs.size, chunk):
        ph = np.exp(-1j * np.outer(xs[lo:lo + chunk], g))
        rx = v @ (ph[:, :, None] * rho[None] * ph.conj()[:, None, :]) @ v.conj().T
        out[lo:lo + chunk] = np.real(rx.reshape(len(ph), -1).conj() @ eff.T)
    return out


def _centered_periodic(out: np.ndarray, step: float):
    n = out.size
    kmin = -((n - 1) // 2)
    idx = (kmin + np.arange(n)) % n
    return UniformGrid(kmin * step, step, n, True), out[idx]


def error_distribution(s: Scenario, return_defect: bool = False):
    """Gridded law of the estimation error; raises if mass leaks by more than 1e-4."""
    q = np.ascontiguousarray(s.prior.masses)
    live = q > 0
    resp = np.zeros((q.size, len(s.povm)))
    resp[live] = response_matrix(s.probe, s.gen, s.prior.nodes[live], s.povm)
    step = s.povm.grid.step
    out = kernels.band_sum(q, resp, s.periodic) * step
    if s.periodic:
        grid, masses = _centered_periodic(out, step)
    else:
        grid = UniformGrid(s.povm.grid.start - s.prior.grid.stop, step, out.size)
        masses = out
    total = masses.sum()
    defect = abs(1 - total)
    if defect > NORMALIZATION_TOL:
        raise ValueError(f"error law normalisation defect {defect:.2e} > {NORMALIZATION_TOL}")
    dist = GriddedDistribution(grid, np.clip(masses, 0, None) / np.clip(masses, 0, None).sum())
    return (dist, defect) if return_defect else dist


def _node_index(grid: UniformGrid, x: float) -> Optional[int]:
    u = (x - grid.start) / grid.step
    k = int(round(u))
    if abs(u - k) > 1e-6:
        raise ValueError(f"value {x} is not on the POVM lattice")
    if grid.periodic:
        return k % grid.count
    return k if 0 <= k < grid.count else None


def averaged_povm(s: Scenario, y: float) -> np.ndarray:
    """``Mbar_y = sum_i q_i exp(iGx_i) M_{x_i+y} exp(-iGx_i)`` (operator density)."""
    out = np.zeros((s.gen.dim, s.gen.dim), dtype=complex)
    for x, w in zip(s.prior.nodes, s.prior.masses):
        if w == 0:
            continue
        j = _node_index(s.povm.grid, x + y)
        if j is None:
            continue
        u = s.gen.unitary(x)
        out += w * (u.conj().T @ s.povm.elements[j] @ u)
    return out


def _cluster_index(gen: Generator, which_g) -> int:
    if not 0 <= which_g < len(gen.clusters):
        raise IndexError(f"eigenvalue index {which_g} outside 0..{len(gen.clusters) - 1}")
    return which_g


def eigenstate_response(povm: Povm, gen: Generator, which_g: int,
                        prior: Optional[GriddedDistribution] = None) -> GriddedDistribution:
    """Estimate law ``p_g`` when the probe is an eigenstate of ``G``.

    For a degenerate eigenvalue the eigenstate used is the maximiser of the
    compressed averaged POVM at the best shift (needs ``prior``), or of the
    compressed POVM density at its peak node when no prior is given.
    """
    if gen.spectrum_kind != DISCRETE:
        raise ValueError("eigenstate response needs a discrete generator")
    c = gen.clusters[_cluster_index(gen, which_g)]
    comp = c.basis.conj().T @ povm.elements @ c.basis
    if c.rank == 1:
        vec = np.ones(1)
    else:
        if prior is not None:
            shifts, table = B.eigenspace_convolutions(prior, povm, gen)
            yi = int(np.argmax(table[which_g]))
            mbar = np.zeros((c.rank, c.rank), dtype=complex)
            for x, w in zip(prior.nodes, prior.masses):
                j = _node_index(povm.grid, x + shifts[yi]) if w > 0 else None
                if j is not None:
                    mbar += w * comp[j]
            target = mbar
        else:
            peaks = np.linalg.eigvalsh(comp)[:, -1]
            target = comp[int(np.argmax(peaks))]
        vec = np.linalg.eigh((target + target.conj().T) / 2)[1][:, -1]
    dens = np.real((comp @ vec) @ vec.conj())
    return GriddedDistribution.from_density(povm.grid, dens)


def total_variation_from_uniform(d: GriddedDistribution) -> float:
    return 0.5 * float(np.sum(np.abs(d.masses - 1 / d.masses.size)))


def exploits_prior_necessary_condition(povm: Povm, gen: Generator, tol: float = 1e-6) -> bool:
    """True iff some eigenstate of ``G`` yields a non-uniform estimate law.

    Non-uniformity for some vector in an eigenspace is equivalent to some
    compressed density ``B^dag M_j B`` differing from ``I/length``; the
    total-variation test runs on the basis vectors and on the worst-case
    vector of the largest deviation.
    """
    n = len(povm)
    step = povm.grid.step
    for c in gen.clusters:
        comp = c.basis.conj().T @ povm.elements @ c.basis * step
        dev = comp - np.eye(c.rank)[None] / n
        candidates = list(np.eye(c.rank))
        if c.rank > 1:
            w, v = np.linalg.eigh(dev)
            j = int(np.argmax(np.max(np.abs(w), axis=1)))
            k = int(np.argmax(np.abs(w[j])))
            candidates.append(v[j][:, k])
        for vec in candidates:
            masses = np.real((comp @ vec) @ vec.conj())
            if 0.5 * np.sum(np.abs(masses - 1 / n)) > tol:
                return True
    return False


def is_covariant(povm: Povm, gen: Generator, tol: float = 1e-9, shifts=None) -> bool:
    """Check ``M_{x+y} = exp(-iGy) M_x exp(iGy)`` for lattice shifts ``y``."""
    n = len(povm)
    if shifts is None:
        shifts = sorted({1, 2, 3, max(1, n // 7), max(1, n // 3), n // 2} - {0})
    for s in shifts:
        u = gen.unitary(s * povm.grid.step)
        moved = u @ povm.elements @ u.conj().T
        if povm.grid.periodic:
            target = np.roll(povm.elements, -s, axis=0)
            diff = moved - target
        else:
            if s >= n:
                continue
            diff = moved[: n - s] - povm.elements[s:]
        if np.max(np.abs(diff)) > tol:
            return False
    return True


def m_copy_scenario(s: Scenario, m: int, povm: Optional[Povm] = None) -> Scenario:
    """``m`` copies of the probe with generator ``G_1 + ... + G_m``; the joint POVM is supplied."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if m == 1:
        return s
    if s.probe.dim ** m > MAX_JOINT_DIM:
        raise ValueError(f"joint dimension {s.probe.dim}^{m} exceeds {MAX_JOINT_DIM}")
    if povm is None:
        raise ValueError("a joint POVM on the m-copy space must be supplied")
    probe = tensor_power(s.probe, m)
    gen = tensor_power(s.gen, m)
    return Scenario(probe, gen, s.prior, povm, copies=m, single_copy=(s.probe, s.gen))


# --------------------------------------------------------------------------
# shift-invariant joint estimators


def _wrap(d, period):
    return period / 2 - np.mod(period / 2 - d, period)


def shift_invariant_joint_estimate(samples, weights, period: Optional[float] = None) -> float:
    """Weighted mean ``sum w_i x_i`` with ``sum w = 1``.

    With a period, samples are unwrapped relative to the first one before
    averaging and the result is wrapped back to ``[0, period)``.
    """
    x = np.asarray(samples, float)
    w = np.asarray(weights, float)
    if abs(w.sum() - 1) > 1e-12:
        raise ValueError("weights must sum to 1")
    if period is None:
        return float(np.dot(w, x))
    rel = _wrap(x - x[0], period)
    return float(np.mod(x[0] + np.dot(w, rel), period))


def joint_estimator_povm(povm: Povm, m: int = 2, weights=None,
                         estimator: Optional[Callable] = None) -> Povm:
    """POVM of ``f(x_1..x_m)`` from independent measurements of ``povm``.

    Outcomes are binned to the nearest node of ``povm.grid`` with ties
    going to the lower node. The default estimator is the equal-weight
    mean, evaluated in node-index space so shift invariance is exact.
    """
    if povm.kind != "grid":
        raise TypeError("joint estimators need a grid POVM")
    grid = povm.grid
    n = grid.count
    if povm.dim ** m > 64:
        raise ValueError("joint estimator construction limited to dim^m <= 64")
    if weights is None:
        weights = np.full(m, 1 / m)
    weights = np.asarray(weights, float)
    if abs(weights.sum() - 1) > 1e-12:
        raise ValueError("weights must sum to 1")
    idx = np.array(list(itertools.product(range(n), repeat=m)))
    if estimator is None:
        rel = idx[:, 1:] - idx[:, :1]
        if grid.periodic:
            rel = n / 2 - np.mod(n / 2 - rel, n)
        u = idx[:, 0] + rel @ weights[1:]
    else:
        vals = np.array([estimator(grid.nodes[r]) for r in idx])
        u = (vals - grid.start) / grid.step
    bins = np.ceil(u - 0.5 - 1e-9).astype(int)
    if grid.periodic:
        bins %= n
    else:
        bins = np.clip(bins, 0, n - 1)
    d = povm.dim ** m
    joint = np.zeros((n, d, d), dtype=complex)
    effects = povm.elements * grid.step
    for row, k in zip(idx, bins):
        op = effects[row[0]]
        for r in row[1:]:
            op = np.kron(op, effects[r])
        joint[k] += op
    return Povm(joint / grid.step, grid)


def joint_estimator_covariance_check(povm: Povm, gen: Generator, m: int = 2, weights=None,
                                     estimator: Optional[Callable] = None,
                                     tol: float = 1e-9) -> bool:
    if povm.dim > 4:
        raise ValueError("joint covariance check limited to dim <= 4")
    joint = joint_estimator_povm(povm, m, weights, estimator)
    return is_covariant(joint, tensor_power(gen, m), tol)


# --------------------------------------------------------------------------
# full pipeline


@dataclass
class ScenarioResult:
    error_law: GriddedDistribution
    rms: float
    entropy: float
    relative: Optional[float]
    report: B.BoundReport
    normalization_defect: float
    ki: B.KiEstimate
    h_g: float


def rms_tolerance(floor: float, step: float) -> float:
    """Slack from the histogram variance term ``step^2/12`` in the Gaussian step."""
    b2 = step ** 2 / 12
    return floor - math.sqrt(max(floor ** 2 - b2, 0.0)) + 1e-12


def scenario_bounds(s: Scenario, refine: bool = False):
    """Every floor applicable to ``s``; returns ``(report, ki, h_g)``.

    ``report.achieved["tolerances"]`` holds the grid slack each comparison
    is allowed (entropy and RMS floors are exact on the grid up to these).
    """
    gen = s.gen
    p_g = gen.distribution(s.probe)
    h_g = shannon_entropy(p_g)
    values = gen.distinct_values
    step = s.povm.grid.step
    rep = B.BoundReport()
    uniform = is_uniform(s.prior)
    L = support_length(s.prior) if uniform else None

    if gen.spectrum_kind != DISCRETE:
        ki = B.ki_continuous_surrogate(s.prior, s.povm, gen)
        rep.add("K_I", ki.value, "kicont", "surrogate eigenvectors, approximate", kind="constant")
        rep.skip("gen", "gap undefined: continuous surrogate")
        rep.achieved["tolerances"] = {}
        return rep, ki, h_g

    ki = B.ki_exact_discrete(s.prior, s.povm, gen, refine=refine)
    kq = B.ki_from_qmax(s.prior)
    kh = B.ki_ignorance(s.prior)
    rep.add("K_I", ki.value, "kinverse", "grid supremum over eigenstates and shifts", kind="constant")
    rep.add("K_I_qmax", kq.value, "qmax", "1/q_max", kind="constant")
    rep.add("K_I_ignorance", kh.value, "honest", "valid only for ignorance-respecting estimates",
            kind="constant")

    floor_x = B.rms_floor_from_entropy(ki, h_g)
    rep.add("hbound", B.error_entropy_floor(ki, h_g), "hbound", "H(Y) >= ln K_I - H(G)",
            kind="entropy", asserted=True)
    rep.add("xbound", floor_x, "xbound", "Gaussian max-entropy step", asserted=True)
    rep.add("ensemble", B.ensemble_length_floor(ki, h_g), "hbound",
            "exp H(Y) >= K_I exp(-H(G))", kind="length", asserted=True)

    gap = gen.min_gap
    g_min = gen.g_min
    tolerances = {"rms": rms_tolerance(floor_x, step)}
    if gap is not None:
        madev = mean_abs_deviation(values, p_g, g_min)
        rep.add("gen", B.generic_bound(ki, madev, gap, DISCRETE, use_gmin=True), "gen",
                "K_I exact, g = g_min (factor 2 dropped)", asserted=True)
        rep.add("gen_qmax", B.generic_bound(kq, madev, gap, DISCRETE, use_gmin=True), "qmax",
                "K_I >= 1/q_max, g = g_min", asserted=True)
        # phase forms assume an integer spectrum on a 2pi period
        integer = (s.periodic and abs(s.prior.grid.period - 2 * math.pi) < 1e-9
                   and gen.is_integer_spectrum(2 * math.pi))
        if integer:
            rep.add("phasegen", B.generic_bound(ki, madev, 1.0, DISCRETE, use_gmin=True), "phasegen",
                    "integer spectrum, g = g_min", asserted=True)
        if uniform:
            if s.copies > 1 and s.single_copy is not None:
                p1, g1 = s.single_copy
                mad1 = mean_abs_deviation(g1.distinct_values, g1.distribution(p1), g1.g_min)
                rel = B.relative_resolution_bound(s.copies, mad1, g1.min_gap, L, use_gmin=True)
                note = f"m={s.copies} copies, single-copy <|G-g_min|>"
            else:
                rel = B.relative_resolution_bound(1, madev, gap, L, use_gmin=True)
                note = "uniform prior, g = g_min"
            rep.add("gendis", rel, "gendis", note, kind="relative", asserted=True)
            if integer:
                rep.add("phasem", rel, "phasem", note, kind="relative", asserted=True)
            rep.add("mi_cap", B.mutual_info_cap(min(rel, 1.0)), "mi", "approximate, report only",
                    kind="bits")
            tolerances["relative"] = tolerances["rms"] / L
        else:
            rep.skip("gendis", "prior is not uniform on an interval")
        if s.noise is not None and uniform:
            n_l = s.noise.get("n_lambda", 0.0)
            clean = s.noise.get("clean_mean")
            if integer and clean is not None:
                rep.add("phasen", B.noisy_phase_relative_bound(clean, n_l), "phasen",
                        f"Gaussian noise n_lambda={n_l}, clean <N>={clean:.6g}", kind="relative",
                        asserted=True)
            if gen.is_rank_one and s.copies == 1:
                rep.merge(B.noisy_rank1_bounds(ki, madev, von_neumann_entropy(s.probe), gap,
                                               DISCRETE, use_gmin=True))
    else:
        rep.skip("gen", "single eigenvalue: gap undefined")

    var_g = float(np.dot(p_g, values ** 2) - np.dot(p_g, values) ** 2)
    if var_g > 1e-14:
        cr, vt = B.baseline_bounds(var_g, 1, B.prior_fisher_information(s.prior))
        rep.add("cr", cr, "cr", "unbiased estimates at a fixed shift only; report only")
        rep.add("vantrees", vt, "vantrees", "report only")
    else:
        rep.skip("cr", "generator variance is zero")
    rep.achieved["tolerances"] = tolerances
    return rep, ki, h_g


def run_scenario(s: Scenario, refine: bool = False) -> ScenarioResult:
    """Error law, achieved resolution and every applicable floor in one record."""
    law, defect = error_distribution(s, return_defect=True)
    rms = rms_deviation(law, 0.0)
    h_y = differential_entropy(law)
    rep, ki, h_g = scenario_bounds(s, refine)
    L = support_length(s.prior) if is_uniform(s.prior) else None
    relative = rms / L if L else None
    rep.achieved.update({"rms": rms, "entropy": h_y, "ensemble_length": math.exp(h_y),
                         "normalization_defect": defect})
    if relative is not None:
        rep.achieved["relative"] = relative
    tol = rep.achieved["tolerances"]
    h_tol = 1e-9 + 10 * (s.povm.completeness_defect() + defect)
    tol.update(entropy=h_tol, ensemble_length=h_tol * math.exp(h_y))
    return ScenarioResult(law, rms, h_y, relative, rep, defect, ki, h_g)


# --------------------------------------------------------------------------
# random scenarios for property suites


def _random_profiles(rng, k, grid: UniformGrid):
    x = grid.nodes
    out = np.empty((k, grid.count))
    for i in range(k):
        c = rng.uniform(x[0], x[-1])
        w = rng.uniform(2, 0.3 * grid.count) * grid.step
        d = _wrap(x - c, grid.period) if grid.periodic else x - c
        out[i] = np.exp(-d ** 2 / (2 * w ** 2)) + rng.uniform(0, 0.05)
    return out


def _random_prior(rng, grid: UniformGrid, support=None) -> GriddedDistribution:
    from .distributions import gaussian_prior, uniform_on
    lo, hi = support if support is not None else (grid.start, grid.start + grid.length)
    kind = rng.choice(["uniform", "arc", "gaussian", "mixture", "rough"])
    if kind == "uniform":
        return uniform_on(grid, lo - 0.5 * grid.step, hi)
    if kind == "arc":
        w = rng.uniform(0.2, 0.9) * (hi - lo)
        a = rng.uniform(lo, hi if grid.periodic else hi - w)
        return uniform_on(grid, a, a + w)
    x = grid.nodes
    inside = (x >= lo - 1e-12) & (x <= hi + 1e-12)
    if kind == "gaussian":
        d = gaussian_prior(grid, rng.uniform(lo, hi), rng.uniform(0.05, 0.5) * (hi - lo)).masses
    elif kind == "mixture":
        d = sum(rng.uniform(0.2, 1) * gaussian_prior(grid, rng.uniform(lo, hi),
                                                     rng.uniform(0.02, 0.3) * (hi - lo)).masses
                for _ in range(int(rng.integers(2, 5))))
    else:
        d = rng.exponential(size=x.size)
    d = np.where(inside, d, 0.0)
    return GriddedDistribution(grid, d / d.sum())


MIN_PRIOR_WIDTH = 0.4


def _resolved_prior(rng, grid, min_width=MIN_PRIOR_WIDTH):
    # 1/q_max >= min_width keeps the RMS floor well above the grid step
    while True:
        prior = _random_prior(rng, grid)
        if 1 / prior.max_density >= min_width:
            return prior


def random_scenario(rng: np.random.Generator, max_dim: int = 12, count: int = 512) -> Scenario:
    """Random probe, discrete generator, prior and grid POVM.

    Periodic scenarios use integer spectra on a ``count``-node circle; open
    scenarios use arbitrary real spectra on a line grid whose POVM range
    extends past the prior support. Priors are redrawn until
    ``1/q_max >= 0.4`` so the default grids resolve them.
    """
    from .quantum import (covariant_phase_povm, haar_unitary, projective_povm, quadrature_povm,
                          random_finite_povm, random_state, smeared_povm)
    d = int(rng.integers(2, max_dim + 1))
    probe = random_state(d, rng, rank=int(rng.integers(1, d + 1)))
    u = haar_unitary(d, rng)
    periodic = rng.random() < 0.6
    if periodic:
        grid = UniformGrid.circle(count)
        prior = _resolved_prior(rng, grid)
        family = rng.choice(["covariant", "smeared", "quadrature", "projective"])
        if family == "covariant":
            gen = Generator(u.conj().T @ np.diag(np.arange(d) + int(rng.integers(0, 3))) @ u)
            povm = covariant_phase_povm(rng.uniform(0, 2 * math.pi, d), grid).conjugated(u)
        else:
            values = rng.integers(0, d + 2, size=d).astype(float)
            gen = Generator(u.conj().T @ np.diag(values) @ u)
            if family == "smeared":
                kind = rng.choice(["projective", "wishart", "mixed", "rank1"])
                k = int(rng.integers(2, d + 1)) if kind == "projective" else int(rng.integers(d, 2 * d + 1))
                eff = random_finite_povm(d, k, rng, kind)
                povm = smeared_povm(eff, grid, _random_profiles(rng, len(eff), grid))
            elif family == "quadrature":
                povm = quadrature_povm(d, grid, scale=rng.uniform(0.3, 1.5)).conjugated(u)
            else:
                locs = rng.uniform(0, 2 * math.pi, len(gen.clusters))
                povm = projective_povm(gen, grid, locs)
    else:
        step = rng.uniform(0.004, 0.01)
        n_prior = int(math.ceil(rng.uniform(0.8, 2.5) / step))
        pad = int(rng.integers(32, 161))
        prior_grid = UniformGrid(0.0, step, n_prior)
        povm_grid = UniformGrid(-pad * step, step, n_prior + 2 * pad)
        prior = _resolved_prior(rng, prior_grid)
        values = rng.uniform(-3, 3, size=d)
        if rng.random() < 0.3:
            values[: d // 2] = values[0]
        gen = Generator(u.conj().T @ np.diag(values) @ u)
        family = rng.choice(["smeared", "projective"])
        if family == "smeared":
            kind = rng.choice(["projective", "wishart", "mixed", "rank1"])
            k = int(rng.integers(2, d + 1)) if kind == "projective" else int(rng.integers(d, 2 * d + 1))
            eff = random_finite_povm(d, k, rng, kind)
            povm = smeared_povm(eff, povm_grid, _random_profiles(rng, len(eff), povm_grid))
        else:
            locs = rng.uniform(povm_grid.start, povm_grid.stop, len(gen.clusters))
            povm = projective_povm(gen, povm_grid, locs)
    return Scenario(probe, gen, prior, povm)
