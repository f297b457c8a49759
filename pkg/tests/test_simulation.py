import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shiftbounds import quantum as Q
from shiftbounds import simulation as S
from shiftbounds.distributions import (gaussian_prior, mean_abs_deviation, uniform_circle,
                                       uniform_on)
from shiftbounds.quantum import UniformGrid


def phase_scenario(probe, count=256, prior=None, povm=None):
    grid = UniformGrid.circle(count)
    d = probe.dim
    return S.Scenario(probe, Q.number_operator(d), prior or uniform_circle(count),
                      povm or Q.canonical_phase_povm(d, grid))


# --- error law ------------------------------------------------------------------


def test_eigenstate_gives_uniform_error():
    s = phase_scenario(Q.fock_state(1, 3), count=512)
    law = S.error_distribution(s)
    assert np.allclose(law.masses, 1 / 512, atol=1e-15)
    # oracle: centred lattice k*step, k = -255 .. 256
    k = np.arange(-255, 257)
    expected = math.sqrt(np.mean((k * law.grid.step) ** 2))
    res = S.run_scenario(s)
    assert res.rms == pytest.approx(expected, abs=1e-12)
    assert res.rms == pytest.approx(math.pi / math.sqrt(3), abs=1e-4)
    assert res.report.violations() == []


def test_superposition_error_law():
    s = phase_scenario(Q.DensityOperator.from_vector([1, 1]), count=1024)
    law = S.error_distribution(s)
    # oracle: (1 + cos y)/2pi on the centred nodes
    assert np.allclose(law.masses / law.grid.step, (1 + np.cos(law.nodes)) / (2 * math.pi), atol=1e-12)
    res = S.run_scenario(s)
    assert res.rms == pytest.approx(math.sqrt(math.pi ** 2 / 3 - 2), abs=1e-4)
    assert res.report.violations() == []


def test_covariant_error_law_ignores_prior(rng):
    probe = Q.random_state(4, rng)
    grid = UniformGrid.circle(256)
    a = S.error_distribution(phase_scenario(probe))
    b = S.error_distribution(phase_scenario(probe, prior=gaussian_prior(grid, 1.0, 0.5)))
    c = S.error_distribution(phase_scenario(probe, prior=uniform_on(grid, 4.0, 5.0)))
    assert np.allclose(a.masses, b.masses, atol=1e-12)
    assert np.allclose(a.masses, c.masses, atol=1e-12)


def test_point_prior_recentres_position_law():
    # narrow probe in a position-like basis: G = momentum surrogate is continuous,
    # so use a discrete generator whose eigenbasis is conjugate to the readout
    n = 32
    line = UniformGrid(-1.6, 0.1, n)
    grid = UniformGrid(-1.6, 0.1, n)
    prior_grid = UniformGrid(0.0, 0.1, 1)
    prior = uniform_on(prior_grid, -0.05, 0.05)
    povm = Q.Povm(np.array([np.outer(e, e) for e in np.eye(n)]) / grid.step, grid)
    psi = np.exp(-(line.nodes + 0.3) ** 2 / 0.02)
    probe = Q.DensityOperator.from_vector(psi)
    gen = Q.Generator.from_spectrum(np.arange(n))
    law = S.error_distribution(S.Scenario(probe, gen, prior, povm))
    pos = np.abs(psi) ** 2 / np.sum(np.abs(psi) ** 2)
    assert np.allclose(law.masses, pos, atol=1e-12)
    assert law.nodes[np.argmax(law.masses)] == pytest.approx(-0.3, abs=1e-9)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=15)
def test_error_law_matches_averaged_povm(seed):
    rng = np.random.default_rng(seed)
    s = S.random_scenario(rng, max_dim=5, count=128)
    law = S.error_distribution(s)
    density = law.masses / law.grid.step
    for i in rng.choice(law.grid.count, size=16, replace=False):
        y = law.nodes[i]
        expected = np.real(np.trace(s.probe.matrix @ S.averaged_povm(s, y)))
        assert density[i] == pytest.approx(expected, abs=1e-9 * max(1, np.max(density)))


# --- averaged POVM and covariance -------------------------------------------------


def test_averaged_povm_of_covariant_povm(rng):
    probe = Q.random_state(3, rng)
    grid = UniformGrid.circle(128)
    for prior in (uniform_circle(128), gaussian_prior(grid, 2.0, 0.4)):
        s = phase_scenario(probe, 128, prior)
        for j in (0, 5, 77):
            assert np.allclose(S.averaged_povm(s, grid.nodes[j]), s.povm.elements[j], atol=1e-12)


def test_averaged_povm_point_prior(rng):
    grid = UniformGrid.circle(64)
    masses = np.zeros(64)
    masses[10] = 1
    from shiftbounds.distributions import GriddedDistribution
    prior = GriddedDistribution(grid, masses)
    povm = Q.quadrature_povm(3, grid, 0.8)
    s = S.Scenario(Q.random_state(3, rng), Q.number_operator(3), prior, povm)
    x0 = grid.nodes[10]
    u = s.gen.unitary(x0)
    y = grid.nodes[7]
    assert np.allclose(S.averaged_povm(s, y), u.conj().T @ povm.elements[17] @ u, atol=1e-13)


def test_is_covariant_examples():
    grid = UniformGrid.circle(64)
    gen = Q.number_operator(4)
    povm = Q.canonical_phase_povm(4, grid)
    assert S.is_covariant(povm, gen)
    e = povm.elements.copy()
    e[3] = e[3] * 0.9
    e[4] = e[4] + e[3] / 9
    assert not S.is_covariant(Q.Povm(e, grid, validate=False), gen)
    assert not S.is_covariant(Q.quadrature_povm(4, grid), gen)


def test_exploits_prior_examples():
    grid = UniformGrid.circle(128)
    gen = Q.number_operator(4)
    assert not S.exploits_prior_necessary_condition(Q.canonical_phase_povm(4, grid), gen)
    assert S.exploits_prior_necessary_condition(Q.quadrature_povm(4, grid, 0.6), gen)
    assert S.exploits_prior_necessary_condition(Q.projective_povm(gen, grid), gen)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=20)
def test_covariant_never_exploits_prior(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 6))
    grid = UniformGrid.circle(64)
    povm = Q.covariant_phase_povm(rng.uniform(0, 2 * math.pi, d), grid)
    gen = Q.number_operator(d)
    assert S.is_covariant(povm, gen)
    assert not S.exploits_prior_necessary_condition(povm, gen)


def test_eigenstate_response_examples():
    grid = UniformGrid.circle(128)
    gen = Q.number_operator(4)
    for n in range(4):
        d = S.eigenstate_response(Q.canonical_phase_povm(4, grid), gen, n)
        assert np.allclose(d.masses, 1 / 128, atol=1e-14)
    proj = S.eigenstate_response(Q.projective_povm(gen, grid), gen, 2)
    assert np.max(proj.masses) == pytest.approx(1.0)
    # oracle: quadrature law of |1> is |<x|1>|^2 = 2 x^2 exp(-x^2)/sqrt(pi), wrapped
    quad = S.eigenstate_response(Q.quadrature_povm(4, grid, 1.0), gen, 1)
    x = grid.nodes[:, None] + 2 * math.pi * np.arange(-3, 4)[None, :]
    expected = np.sum(2 * x ** 2 * np.exp(-x ** 2) / math.sqrt(math.pi), axis=1)
    assert np.allclose(quad.masses / grid.step, expected, atol=1e-9)
    assert S.total_variation_from_uniform(quad) > 0.1
    with pytest.raises(IndexError):
        S.eigenstate_response(Q.canonical_phase_povm(4, grid), gen, 4)


def test_scenario_guards(rng):
    grid = UniformGrid.circle(64)
    with pytest.raises(ValueError):
        S.Scenario(Q.random_state(3, rng), Q.number_operator(4), uniform_circle(64),
                   Q.canonical_phase_povm(4, grid))
    half = Q.Generator.from_spectrum([0, 0.5])
    with pytest.raises(ValueError):
        S.Scenario(Q.random_state(2, rng), half, uniform_circle(64), Q.canonical_phase_povm(2, grid))


# --- copies ------------------------------------------------------------------------


def test_m_copy_scenario(rng):
    s = phase_scenario(Q.random_state(3, rng), count=64)
    assert S.m_copy_scenario(s, 1) is s
    joint = S.joint_estimator_povm(Q.canonical_phase_povm(3, UniformGrid.circle(64)), 2)
    s2 = S.m_copy_scenario(s, 2, joint)
    p1 = s.gen.distribution(s.probe)
    p2 = s2.gen.distribution(s2.probe)
    mean1 = mean_abs_deviation(s.gen.distinct_values, p1, 0)
    assert mean_abs_deviation(s2.gen.distinct_values, p2, 0) == pytest.approx(2 * mean1, abs=1e-12)
    assert s2.gen.min_gap == pytest.approx(s.gen.min_gap)
    with pytest.raises(ValueError):
        S.m_copy_scenario(s, 2)
    big = phase_scenario(Q.random_state(9, rng), count=64)
    with pytest.raises(ValueError):
        S.m_copy_scenario(big, 4, joint)


def test_shift_invariant_joint_estimate():
    assert S.shift_invariant_joint_estimate([1, 2, 3], [1 / 3] * 3) == pytest.approx(2)
    assert S.shift_invariant_joint_estimate([1.5, 7, 9], [1, 0, 0]) == 1.5
    with pytest.raises(ValueError):
        S.shift_invariant_joint_estimate([1, 2], [0.5, 0.6])
    # wrapped mean of two phases either side of zero
    assert S.shift_invariant_joint_estimate([0.1, 2 * math.pi - 0.1], [0.5, 0.5], 2 * math.pi) == pytest.approx(
        0, abs=1e-12)


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=5), st.floats(-20, 20))
def test_joint_estimate_is_shift_invariant(samples, y):
    w = np.arange(1, len(samples) + 1, dtype=float)
    w /= w.sum()
    a = S.shift_invariant_joint_estimate(samples, w)
    b = S.shift_invariant_joint_estimate(np.add(samples, y), w)
    assert b == pytest.approx(a + y, abs=1e-9)


def test_joint_estimator_covariance_examples():
    grid = UniformGrid.circle(16)
    povm = Q.canonical_phase_povm(2, grid)
    gen = Q.number_operator(2)
    assert S.joint_estimator_covariance_check(povm, gen, 2)
    assert S.joint_estimator_covariance_check(povm, gen, 2, weights=[1, 0])
    assert not S.joint_estimator_covariance_check(povm, gen, 2, estimator=lambda x: x[0] ** 2)
    joint = S.joint_estimator_povm(povm, 2)
    assert joint.completeness_defect() < 1e-12


# --- full pipeline --------------------------------------------------------------------


def test_rms_tolerance():
    assert S.rms_tolerance(1.0, 0.0) == pytest.approx(1e-12)
    step = 0.1
    assert S.rms_tolerance(1.0, step) == pytest.approx(1 - math.sqrt(1 - step ** 2 / 12) + 1e-12)


@pytest.mark.slow
@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=25)
def test_random_scenarios_respect_floors(seed):
    res = S.run_scenario(S.random_scenario(np.random.default_rng(seed), max_dim=6, count=256))
    assert res.report.violations() == []
    assert res.entropy >= res.report["hbound"] - res.report.achieved["tolerances"]["entropy"]
