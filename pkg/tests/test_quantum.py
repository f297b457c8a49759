import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shiftbounds import quantum as Q
from shiftbounds.distributions import GriddedDistribution, differential_entropy


def seeds():
    return st.integers(0, 2 ** 32 - 1)


# --- states -----------------------------------------------------------------


def test_density_operator_rejects_bad_input():
    with pytest.raises(ValueError):
        Q.DensityOperator(np.array([[1, 1], [0, 0]]))
    with pytest.raises(ValueError):
        Q.DensityOperator(np.eye(2))
    with pytest.raises(ValueError):
        Q.DensityOperator(np.diag([1.5, -0.5]))
    with pytest.raises(Q.DimensionError):
        Q.DensityOperator(np.ones((2, 3)) / 2)


def test_von_neumann_entropy_examples():
    assert Q.von_neumann_entropy(Q.fock_state(2, 5)) == pytest.approx(0, abs=1e-15)
    assert Q.von_neumann_entropy(Q.maximally_mixed(7)) == pytest.approx(math.log(7), abs=1e-12)
    # oracle: direct scalar evaluation of -sum p ln p
    expected = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))
    got = Q.von_neumann_entropy(Q.DensityOperator(np.diag([0.75, 0.25])))
    assert got == pytest.approx(expected, abs=1e-14)
    assert got == pytest.approx(0.5623, abs=1e-4)


# --- generators --------------------------------------------------------------


def test_min_spectral_gap_examples():
    assert Q.min_spectral_gap(Q.number_operator(6)) == 1
    assert Q.min_spectral_gap(Q.Generator.from_spectrum([0, 0.3, 1.0])) == pytest.approx(0.3)
    mz = Q.mach_zehnder_generator(3)
    assert Q.min_spectral_gap(mz) == pytest.approx(0.5)
    assert len(mz.distinct_values) == 2 * 3 + 1
    with pytest.raises(ValueError):
        Q.min_spectral_gap(Q.Generator.from_spectrum([2.0, 2.0]))


def test_surrogate_has_no_gap():
    gen = Q.momentum_surrogate(Q.UniformGrid.interval(-4, 4, 32))
    assert gen.min_gap is None and gen.spacing > 0
    with pytest.raises(ValueError):
        Q.min_spectral_gap(gen)


@given(seeds(), st.integers(2, 9))
def test_eigenprojectors_resolve_identity(seed, d):
    rng = np.random.default_rng(seed)
    u = Q.haar_unitary(d, rng)
    values = rng.integers(0, 4, size=d).astype(float)
    gen = Q.Generator(u @ np.diag(values) @ u.conj().T)
    gen.check_projectors()
    distinct = np.unique(values)
    assert len(gen.clusters) == distinct.size
    if distinct.size > 1:
        assert gen.min_gap == pytest.approx(np.min(np.diff(distinct)), abs=1e-9)


def test_tensor_product_generator():
    g = Q.Generator.from_spectrum([0, 1])
    gt = Q.tensor_product(g, g)
    assert np.allclose(gt.eigenvalues, [0, 1, 1, 2])
    assert gt.min_gap == pytest.approx(1)
    rho = Q.random_state(3, np.random.default_rng(1))
    assert np.trace(Q.tensor_product(rho, rho).matrix).real == pytest.approx(1)
    eye = Q.Povm(np.eye(2)[None])
    assert np.allclose(Q.tensor_product(eye, eye).elements[0], np.eye(4))
    with pytest.raises(TypeError):
        Q.tensor_product(g, rho)


# --- shifts -----------------------------------------------------------------


def test_apply_shift_examples(rng):
    rho = Q.random_state(4, rng)
    gen = Q.Generator(Q.random_state(4, rng).matrix * 3)
    assert np.allclose(Q.apply_shift(rho, gen, 0.0).matrix, rho.matrix, atol=1e-14)
    n = Q.number_operator(5)
    fock = Q.fock_state(3, 5)
    assert np.allclose(Q.apply_shift(fock, n, 1.234).matrix, fock.matrix, atol=1e-14)
    # oracle: e^{-i pi diag(0,1)} = diag(1, -1) maps |+> to |->
    plus = Q.DensityOperator.from_vector([1, 1])
    minus = np.array([[1, -1], [-1, 1]]) / 2
    assert np.allclose(Q.apply_shift(plus, Q.number_operator(2), math.pi).matrix, minus, atol=1e-14)
    with pytest.raises(Q.DimensionError):
        Q.apply_shift(rho, n, 0.1)


@given(seeds(), st.floats(-5, 5), st.floats(-5, 5))
def test_apply_shift_composes(seed, x, y):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 7))
    rho = Q.random_state(d, rng)
    h = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    gen = Q.Generator(h + h.conj().T)
    two = Q.apply_shift(Q.apply_shift(rho, gen, x), gen, y)
    one = Q.apply_shift(rho, gen, x + y)
    assert np.max(np.abs(two.matrix - one.matrix)) < 1e-9
    assert abs(np.trace(one.matrix).real - 1) < 1e-10


# --- POVMs ------------------------------------------------------------------


def test_canonical_phase_examples():
    grid = Q.UniformGrid.circle(64)
    one = Q.canonical_phase_povm(1, grid)
    assert np.allclose(one.elements[:, 0, 0], 1 / (2 * math.pi))
    povm = Q.canonical_phase_povm(6, grid)
    for n in range(6):
        assert np.allclose(povm.density(Q.fock_state(n, 6)), 1 / (2 * math.pi), atol=1e-15)
    # oracle: <psi|M_phi|psi> with psi = (|0>+|1>)/sqrt2 expands to (1 + cos phi)/2pi
    p = Q.canonical_phase_povm(2, grid).density(Q.DensityOperator.from_vector([1, 1]))
    assert np.allclose(p, (1 + np.cos(grid.nodes)) / (2 * math.pi), atol=1e-14)
    with pytest.raises(ValueError):
        Q.canonical_phase_povm(3, Q.UniformGrid.interval(0, 2 * math.pi, 64))


@given(seeds(), st.integers(1, 63))
def test_canonical_phase_is_covariant(seed, k):
    rng = np.random.default_rng(seed)
    grid = Q.UniformGrid.circle(64)
    d = int(rng.integers(2, 8))
    povm = Q.canonical_phase_povm(d, grid)
    rho = Q.random_state(d, rng)
    shifted = Q.apply_shift(rho, Q.number_operator(d), k * grid.step)
    assert np.allclose(povm.density(shifted), np.roll(povm.density(rho), k), atol=1e-12)


@given(seeds())
def test_constructed_povms_are_complete(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 8))
    circle = Q.UniformGrid.circle(128)
    line = Q.UniformGrid(-3.0, 0.05, 160)
    gen = Q.Generator.from_spectrum(rng.integers(0, 3, size=d))
    povms = [
        Q.canonical_phase_povm(d, circle),
        Q.covariant_phase_povm(rng.uniform(0, 6, d), circle),
        Q.quadrature_povm(d, circle, scale=rng.uniform(0.4, 1.4)),
        Q.projective_povm(gen, line, rng.uniform(-2, 2, len(gen.clusters))),
        Q.smeared_povm(Q.random_finite_povm(d, d + 1, rng), line, rng.random((d + 1, line.count))),
    ]
    for kind in ("projective", "wishart", "mixed", "rank1"):
        k = 2 if kind == "projective" else d + 2
        povms.append(Q.Povm(Q.random_finite_povm(d, k, rng, kind)))
    for p in povms:
        assert p.completeness_defect() <= 1e-8
        w = np.linalg.eigvalsh(p.elements)
        assert w.min() >= -1e-10


def test_povm_rejects_incomplete():
    with pytest.raises(ValueError):
        Q.Povm(np.array([np.eye(2) / 2]))


# --- displacement and noise --------------------------------------------------


def test_displacement_examples():
    assert np.allclose(Q.displacement_operator(0, 6).matrix, np.eye(6))
    for alpha in (0.3, 0.7 + 0.2j, 1.0):
        d = Q.displacement_operator(alpha, 40).matrix
        assert abs(d[0, 0]) ** 2 == pytest.approx(math.exp(-abs(alpha) ** 2), abs=1e-10)
        inv = Q.displacement_operator(-alpha, 40).matrix
        assert np.max(np.abs(d @ inv - np.eye(40))) < 1e-8


def test_displacement_defect_reports_leakage():
    d = Q.displacement_operator(2.0, 8, work_dim=60)
    assert d.unitary_defect > 1e-3


def test_noise_channel_zero_is_identity(rng):
    rho = Q.random_state(5, rng)
    assert Q.gaussian_noise_channel(rho, 0.0) is rho


def test_noise_channel_on_vacuum_is_thermal():
    dim = 40
    out = Q.gaussian_noise_channel(Q.fock_state(0, dim), 1.0)
    # oracle: vacuum under the channel is thermal with mean 1, p_n = (1/2)^(n+1)
    pops = np.real(np.diag(out.matrix))
    assert np.allclose(pops[:12], 0.5 ** (np.arange(12) + 1), atol=1e-6)
    n = Q.number_operator(dim).matrix
    assert out.expect(n) == pytest.approx(1.0, abs=1e-3)


def test_noise_channel_adds_photons(rng):
    dim = 45
    rho = Q.coherent_state(0.8 + 0.3j, dim)
    n = Q.number_operator(dim).matrix
    out = Q.gaussian_noise_channel(rho, 0.5)
    assert out.expect(n) == pytest.approx(rho.expect(n) + 0.5, abs=1e-3)


def test_noise_channel_truncation_error():
    with pytest.raises(Q.TruncationError):
        Q.gaussian_noise_channel(Q.fock_state(2, 5), 3.0)


@pytest.mark.slow
@pytest.mark.parametrize("nl", [0.3, 1.0])
def test_noise_channel_never_lowers_entropy(nl, rng):
    dim = 40
    for rho in (Q.fock_state(2, dim), Q.coherent_state(1.0, dim), Q.thermal_state(0.5, dim)):
        out, defect = Q.gaussian_noise_channel(rho, nl, return_defect=True)
        assert abs(defect) <= 1e-4
        assert Q.von_neumann_entropy(out) >= Q.von_neumann_entropy(rho) - 1e-9


def test_phase_density_entropy_of_fock_state():
    grid = Q.UniformGrid.circle(256)
    povm = Q.canonical_phase_povm(4, grid)
    d = GriddedDistribution.from_density(grid, povm.density(Q.fock_state(1, 4)))
    assert differential_entropy(d) == pytest.approx(math.log(2 * math.pi), abs=1e-12)
