"""Exit criteria. Each test prints one PASS/FAIL line, repeated in the
terminal summary under "acceptance criteria"."""

import math

import numpy as np
import pytest

from conftest import record_criterion
from shiftbounds import bounds as B
from shiftbounds import distributions as D
from shiftbounds import quantum as Q
from shiftbounds import simulation as S
from shiftbounds import uncertainty as U
from shiftbounds.quantum import UniformGrid

pytestmark = pytest.mark.acceptance


def test_criterion_1_constants():
    checks = {
        "(2pi/e^3)^1/2": (round(math.sqrt(2 * math.pi / math.e ** 3), 3), round(B.PHASE_FACTOR, 3), 0.559),
        "(2pi e^3)^-1/2": (round((2 * math.pi * math.e ** 3) ** -0.5, 3), round(B.HEISENBERG_FACTOR, 3), 0.089),
        "(2pi e)^-1/2": (round((2 * math.pi * math.e) ** -0.5, 3), round(B.GAUSSIAN_FACTOR, 3), 0.242),
        "sqrt(pi/2e)": (round(math.sqrt(math.pi / (2 * math.e)), 2), round(B.COVARIANT_FACTOR, 2), 0.76),
        "crossover": (round(0.154 * math.sqrt(2 * math.pi * math.e ** 3), 2), round(B.TSANG_CROSSOVER, 2), 1.73),
    }
    ok = all(a == b == c for a, b, c in checks.values())
    record_criterion(1, "constants", ok, ", ".join(f"{k}={v[1]}" for k, v in checks.items()))
    assert ok


def test_criterion_2_central_inequality_suite():
    rng = np.random.default_rng(20240601)
    violations, worst_tol, n = [], 0.0, 500
    for i in range(n):
        s = S.random_scenario(rng)
        res = S.run_scenario(s)
        tol = res.report.achieved["tolerances"]
        worst_tol = max(worst_tol, tol["rms"], tol["entropy"])
        hfloor = res.report["hbound"]
        xfloor = res.report["xbound"]
        if (res.entropy < hfloor - tol["entropy"] or res.rms < xfloor - tol["rms"]
                or res.report.violations()):
            violations.append(i)
    ok = not violations and worst_tol <= 1e-3
    record_criterion(2, "central inequalities", ok,
                     f"{n} scenarios, {len(violations)} violations, max grid slack {worst_tol:.2e}")
    assert ok


def test_criterion_3_phase_bound():
    rng = np.random.default_rng(7)
    count = 2048
    grid = UniformGrid.circle(count)
    prior = D.uniform_circle(count)
    worst, bad = np.inf, 0
    for _ in range(100):
        d = int(rng.integers(2, 31))
        kind = rng.integers(0, 4)
        if kind == 3:
            # sine-weighted number superpositions sit close to the optimal product
            probe = Q.DensityOperator.from_vector(np.sin(math.pi * (np.arange(d) + 1) / (d + 1)))
        elif kind == 0:
            probe = Q.random_state(d, rng, rank=int(rng.integers(1, d + 1)))
        elif kind == 1:
            probe = Q.random_pure_state(d, rng)
        else:
            probe = Q.fock_state(int(rng.integers(0, d)), d)
        s = S.Scenario(probe, Q.number_operator(d), prior, Q.canonical_phase_povm(d, grid))
        rms = D.rms_deviation(S.error_distribution(s), 0.0)
        n_mean = probe.expect(Q.number_operator(d).matrix)
        ratio = rms * (n_mean + 1)
        worst = min(worst, ratio)
        bad += ratio < B.PHASE_FACTOR
    ok = bad == 0
    record_criterion(3, "phase bound dPhi<N+1> >= 0.559", ok,
                     f"100 probes, {bad} violations, smallest product {worst:.4f}")
    assert ok


def test_criterion_4_max_entropy_oracle():
    w = 200
    diffs = {nb: abs(D.brute_force_max_entropy(nb, w) - D.max_entropy_integer(nb))
             for nb in (0.1, 0.5, 1, 2, 5, 10)}
    caps = all(D.max_entropy_integer(nb) <= math.log(2 * nb + 1) + 1 for nb in diffs)
    rng = np.random.default_rng(11)
    n = np.arange(-w, w + 1)
    exceed = 0
    for _ in range(300):
        width = int(rng.integers(1, w + 1))
        p = np.zeros(n.size)
        inside = np.abs(n) <= width
        p[inside] = rng.dirichlet(rng.uniform(0.05, 5) * np.ones(inside.sum()))
        nbar = D.mean_abs_deviation(n, p, 0)
        if nbar > 0:
            exceed += D.shannon_entropy(p) > D.max_entropy_integer(nbar) + 1e-9
    ok = max(diffs.values()) <= 1e-6 and exceed == 0 and caps
    record_criterion(4, "max-entropy oracle", ok,
                     f"max |brute - closed| {max(diffs.values()):.1e}, {exceed} random exceedances, cap ok={caps}")
    assert ok


def test_criterion_5_eur_suites():
    disc = U.summarize(U.random_eur_suite(1000, seed=1))
    rank1 = U.summarize(U.random_eur_suite(1000, seed=2, rank1=True))
    mub = 0.0
    for d in range(2, 9):
        a, b = U.mub_pair(d)
        mub = max(mub, abs(U.check_eur_discrete(Q.fock_state(0, d), a, b).slack))
    fock = max(abs(U.check_number_phase(Q.fock_state(k, 10), UniformGrid.circle(512)).slack)
               for k in range(10))
    ok = (disc["failed"] == 0 and rank1["failed"] == 0 and disc["worst_slack"] >= -1e-8
          and rank1["worst_slack"] >= -1e-8 and mub <= 1e-10 and fock <= 1e-6)
    record_criterion(5, "EUR suites", ok,
                     f"discrete worst {disc['worst_slack']:.2e}, rank1 worst {rank1['worst_slack']:.2e}, "
                     f"MUB {mub:.1e}, Fock number-phase {fock:.1e}")
    assert ok


def test_criterion_6_qp_discretization():
    grid = UniformGrid.interval(-20, 20, 2048)
    gauss = U.check_qp_discretized(grid, U.gaussian_wavefunction(grid))
    dev = abs(gauss.lhs - math.log(math.pi * math.e))
    rng = np.random.default_rng(5)
    lows = [U.check_qp_discretized(grid, U.random_smooth_state(grid, rng)).lhs for _ in range(100)]
    ok = dev <= 1e-3 and min(lows) >= math.log(2 * math.pi)
    record_criterion(6, "Q/P discretization", ok,
                     f"Gaussian |H-ln(pi e)| {dev:.1e}, smallest random sum {min(lows):.4f}")
    assert ok


def test_criterion_7_displacement_factors():
    gauss = B.displacement_comparison(lambda k: math.exp(-k * k / 2))
    expo = B.displacement_comparison(lambda k: math.exp(-abs(k)))
    g_ratio = gauss["spread_ratio"] / math.sqrt(math.pi / 2)
    e_ratio = expo["spread_ratio"] / math.sqrt(2)
    f_gauss, f_expo = round(gauss["cr_over_cov"], 2), round(1 / expo["cr_over_cov"], 2)
    ok = abs(g_ratio - 1) < 1e-8 and abs(e_ratio - 1) < 1e-8 and f_gauss == 1.05 and f_expo == 1.08
    record_criterion(7, "displacement factors", ok, f"Gaussian {f_gauss}, exponential {f_expo}")
    assert ok


def test_criterion_8_noise_channel():
    dim = 40
    n_op = Q.number_operator(dim).matrix
    grid = UniformGrid.circle(512)
    prior = D.uniform_circle(512)
    povm = Q.canonical_phase_povm(dim, grid)
    worst_mean = worst_entropy = 0.0
    sim_bad = 0
    for nl in (0.5, 1.0, 2.0):
        out = Q.gaussian_noise_channel(Q.fock_state(0, dim), nl)
        worst_mean = max(worst_mean, abs(out.expect(n_op) - nl))
        worst_entropy = min(worst_entropy, Q.von_neumann_entropy(out) - B.gaussian_noise_entropy_floor(nl))
        for clean in (Q.fock_state(0, dim), Q.fock_state(3, dim), Q.coherent_state(1.2, dim)):
            noisy = Q.gaussian_noise_channel(clean, nl)
            s = S.Scenario(noisy, Q.number_operator(dim), prior, povm,
                           noise={"n_lambda": nl, "clean_mean": clean.expect(n_op)})
            res = S.run_scenario(s)
            tol = res.report.achieved["tolerances"]["relative"]
            sim_bad += res.relative < res.report["phasen"] - tol or bool(res.report.violations())
    ok = worst_mean <= 1e-3 and worst_entropy >= -1e-3 and sim_bad == 0
    record_criterion(8, "noise channel", ok,
                     f"max |<N>-n| {worst_mean:.1e}, entropy margin {worst_entropy:.1e}, "
                     f"{sim_bad} phasen violations in 9 runs")
    assert ok


def test_criterion_9_covariance():
    grid = UniformGrid.circle(128)
    rng = np.random.default_rng(9)
    worst = 0.0
    for d in (2, 4, 7):
        povm = Q.canonical_phase_povm(d, grid)
        probe = Q.random_state(d, rng)
        for prior in (D.uniform_circle(128), D.gaussian_prior(grid, 1.3, 0.3), D.uniform_on(grid, 4.0, 5.5)):
            s = S.Scenario(probe, Q.number_operator(d), prior, povm)
            for j in rng.choice(128, size=8, replace=False):
                worst = max(worst, float(np.max(np.abs(S.averaged_povm(s, grid.nodes[j]) - povm.elements[j]))))
    small = UniformGrid.circle(16)
    joint = all(S.joint_estimator_covariance_check(Q.canonical_phase_povm(d, small), Q.number_operator(d), 2)
                for d in (2, 3, 4))
    ok = worst <= 1e-8 and joint
    record_criterion(9, "covariance machinery", ok,
                     f"max |Mbar_y - M_y| {worst:.1e}, joint mean covariant={joint}")
    assert ok
