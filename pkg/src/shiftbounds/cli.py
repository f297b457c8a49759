"""Command-line front end: ``shiftbounds {bounds,simulate,verify-ur,sweep}``.

Exit codes: 0 when every asserted inequality holds, 2 on a violation,
1 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import math
import platform
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import __version__, kernels
from . import bounds as B
from . import config as C
from . import quantum as Q
from . import simulation as S
from . import uncertainty as U
from .distributions import (GriddedDistribution, is_uniform, mean_abs_deviation, median,
                            support_length)

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION = 0, 1, 2
MAX_SURROGATE_DIM = 512
MAX_JOINT_DIM = 64
SUITES = ("discrete", "rank1", "number-phase", "qp", "covariant", "binned", "rank2-search")


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    return f"{x:.12g}"


def _round(obj):
    if isinstance(obj, float):
        return float(_fmt(obj)) if math.isfinite(obj) else str(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return _round(obj.item())
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


# --------------------------------------------------------------------------
# building a scenario from a config


@dataclass
class Built:
    cfg: dict
    family: str
    gen: Q.Generator
    probe: Q.DensityOperator
    probe_clean: Q.DensityOperator
    prior: GriddedDistribution
    povm: Optional[Q.Povm]
    noise: dict
    copies: int
    scenario: Optional[S.Scenario]
    scenario_note: Optional[str]


def build(cfg: dict, seed: int) -> Built:
    gen, family = C.build_generator(cfg)
    rng = np.random.default_rng(seed)
    surrogate_grid = None
    if family == "surrogate-momentum":
        if "grid" not in cfg:
            raise C.ConfigError("grid", "surrogate-momentum needs an explicit line grid")
        surrogate_grid = C._parameter_grid(cfg, False)
        if surrogate_grid.count > MAX_SURROGATE_DIM:
            raise C.ConfigError("grid.count", f"surrogate dimension limited to {MAX_SURROGATE_DIM}")
        gen = Q.momentum_surrogate(surrogate_grid)
        periodic = False
    else:
        periodic = C.is_periodic(cfg, family)
        if family != "number" and "dim" in cfg and int(cfg["dim"]) != gen.dim:
            raise C.ConfigError("dim", f"generator fixes the dimension to {gen.dim}")
    period = C.period_of(cfg, family)
    probe_clean = C.build_probe(cfg, gen.dim, rng, surrogate_grid)

    noise = C.build_noise(cfg)
    probe = probe_clean
    scen_noise = None
    if noise["family"] == "gaussian":
        if family != "number":
            raise C.ConfigError("noise.family", "Gaussian displacement noise needs the number generator")
        try:
            probe = Q.gaussian_noise_channel(probe_clean, noise["n_lambda"])
        except Q.TruncationError as exc:
            raise C.ConfigError("noise.n_lambda", str(exc)) from None
        scen_noise = {"n_lambda": noise["n_lambda"],
                      "clean_mean": float(np.real(probe_clean.expect(gen.matrix)))}

    prior = C.build_prior(cfg, periodic, period)
    if surrogate_grid is not None and prior.grid != surrogate_grid:
        raise C.ConfigError("prior", "surrogate prior must live on the generator grid")
    povm = C.build_povm(cfg, gen, prior) if cfg.get("povm") is not None or periodic else None

    copies = C._num(cfg, "copies", "", default=1, kind=int, positive=True)
    scenario, note = None, None
    if povm is not None:
        try:
            single = S.Scenario(probe, gen, prior, povm, noise=scen_noise)
        except ValueError as exc:
            raise C.ConfigError("povm", str(exc)) from None
        if copies == 1:
            scenario = single
        elif gen.dim ** copies <= MAX_JOINT_DIM:
            joint = S.joint_estimator_povm(povm, copies)
            scenario = S.m_copy_scenario(single, copies, joint)
        else:
            note = f"joint POVM for dim^m = {gen.dim ** copies} > {MAX_JOINT_DIM} not built"
    else:
        note = "no POVM configured"
    return Built(cfg, family, gen, probe, probe_clean, prior, povm, noise, copies, scenario, note)


def collect_bounds(b: Built, with_scenario: bool = True) -> B.BoundReport:
    """Every applicable floor for a built config (no simulation)."""
    gen, prior, m = b.gen, b.prior, b.copies
    uniform = is_uniform(prior)
    L = support_length(prior) if uniform else None
    ki = None
    if b.scenario is not None and with_scenario:
        rep, ki, _ = S.scenario_bounds(b.scenario)
    else:
        rep = B.BoundReport()
        rep.skip("K_I", b.scenario_note or "scenario not built")
        if gen.spectrum_kind == Q.DISCRETE and gen.min_gap is not None and uniform:
            mad = mean_abs_deviation(gen.distinct_values, gen.distribution(b.probe), gen.g_min)
            rel = B.relative_resolution_bound(m, mad, gen.min_gap, L, use_gmin=True)
            rep.add("gendis", rel, "gendis", f"m={m} copies, single-copy <|G-g_min|>", kind="relative",
                    asserted=True)
            if prior.periodic and abs(prior.grid.period - 2 * math.pi) < 1e-9 \
                    and gen.is_integer_spectrum(2 * math.pi):
                rep.add("phasem", rel, "phasem", f"m={m} copies", kind="relative", asserted=True)
            if b.noise["family"] == "gaussian":
                clean = float(np.real(b.probe_clean.expect(gen.matrix)))
                rep.add("phasen", B.noisy_phase_relative_bound(clean, b.noise["n_lambda"]), "phasen",
                        f"Gaussian noise n_lambda={b.noise['n_lambda']}", kind="relative", asserted=True)

    if gen.spectrum_kind == Q.CONTINUOUS_SURROGATE:
        rep.skip("gen", "gap undefined: continuous surrogate")
        vals, probs = gen.distinct_values, gen.distribution(b.probe)
        p0 = median(vals, probs)
        mad = mean_abs_deviation(vals, probs, p0)
        rep.add("cov", B.covariant_bound(m, mad), "cov",
                "covariant estimates only, reference g = median; report only")
        if uniform:
            rep.add("con", B.conjectured_relative_bound_continuous(L, m * mad), "con",
                    "uniform prior; unproven", kind="relative", conjecture=True)

    if b.family == "mach-zehnder":
        n_max = int(C._section(b.cfg, "generator")["n_max"])
        absolute, relative = B.mz_bounds(n_max, ki if ki is not None else 1.0, m, L)
        if ki is not None:
            rep.add("int", absolute, "int", f"H(G) <= ln(2N_max+1), N_max={n_max}", asserted=True)
        rep.add("int_relative", relative, "int", f"uniform prior, m={m}, N_max={n_max}",
                kind="relative", asserted=uniform)

    if b.family == "hamiltonian" or "time" in b.cfg:
        t = C._section(b.cfg, "time", {})
        p_g = gen.distribution(b.probe)
        e0 = C._num(t, "e0", "time", default=gen.g_min)
        e_mean = C._num(t, "e_mean", "time", default=float(np.dot(p_g, gen.distinct_values)))
        gap = t.get("gap", gen.min_gap)
        tau = t.get("tau", L)
        d_levels = t.get("D", int(np.count_nonzero(p_g > 1e-12)))
        qmax = prior.max_density if "tau" not in t else 1 / float(tau)
        tb = B.time_bounds(e_mean, e0, None if gap is None else float(gap), qmax,
                           None if tau is None else float(tau), m, int(d_levels))
        if not uniform:
            for tag in ("timem", "d", "qzz"):
                if tag in tb:
                    tb.entries[tag].asserted = False
                    tb.entries[tag].assumptions += "; prior not uniform, report only"
        if prior.periodic and "qzz" in tb:
            tb.entries["qzz"].asserted = False
            tb.entries["qzz"].assumptions += "; periodic parameter, report only"
        rep.merge(tb)

    if b.noise["family"] == "additive-entropy":
        base = rep["xbound"] if "xbound" in rep else 0.0
        rep.add("additive", B.noisy_additive_bound(base, b.noise["h_z"]), "epi",
                f"additive noise with H(Z)={b.noise['h_z']}; report only")
    if b.noise["family"] == "gaussian":
        rep.add("noise_entropy", B.gaussian_noise_entropy_floor(b.noise["n_lambda"]), "lambda",
                "entropy floor of the noisy field", kind="constant")
    return rep


def _record(b: Built, rep: B.BoundReport, seed: int, meta: bool, violations=None) -> dict:
    achieved = {k: v for k, v in rep.achieved.items() if k != "tolerances"}
    out = {
        "tool": "shiftbounds",
        "version": __version__,
        "seed": seed,
        "config_digest": C.digest(b.cfg),
        "copies": b.copies,
        "achieved": achieved,
        "tolerances": rep.achieved.get("tolerances", {}),
        "bounds": {t: e.to_dict() for t, e in sorted(rep.entries.items())},
        "inapplicable": dict(sorted(rep.inapplicable.items())),
    }
    if violations is not None:
        out["violations"] = [{"tag": t, "achieved": a, "bound": v} for t, a, v in violations]
    if meta:
        out["meta"] = {"timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
                       "python": platform.python_version(), "kernel_backend": kernels.BACKEND}
    return _round(out)


def _bounds_csv(rec: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tag", "value", "kind", "equation", "asserted", "conjecture", "assumptions"])
    for k, v in rec.get("achieved", {}).items():
        w.writerow([f"achieved.{k}", _fmt(v), "achieved", "", "", "", ""])
    for tag, e in rec["bounds"].items():
        w.writerow([tag, "" if e["value"] is None else _fmt(e["value"]), e["kind"], e["equation"],
                    e["asserted"], e["conjecture"], e["assumptions"]])
    for tag, why in rec["inapplicable"].items():
        w.writerow([tag, "", "inapplicable", "", "", "", why])
    return buf.getvalue()


# --------------------------------------------------------------------------
# commands


def cmd_bounds(cfg: dict, seed: int = 0, meta: bool = True):
    b = build(cfg, seed)
    rep = collect_bounds(b)
    return _record(b, rep, seed, meta), EXIT_OK


def error_law_csv(law: GriddedDistribution) -> str:
    """Columns ``parameter,density`` for the simulated error law."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["parameter", "density"])
    for y, dens in zip(law.nodes, law.masses / law.grid.step):
        w.writerow([_fmt(y), _fmt(dens)])
    return buf.getvalue()


def cmd_simulate(cfg: dict, seed: int = 0, meta: bool = True, ur_suite: Optional[str] = None,
                 trials: int = 100, dist_out: Optional[str] = None):
    b = build(cfg, seed)
    if b.scenario is None:
        raise C.ConfigError("povm", f"cannot simulate: {b.scenario_note}")
    try:
        res = S.run_scenario(b.scenario)
    except ValueError as exc:
        raise C.ConfigError("grid", str(exc)) from None
    extra = collect_bounds(b, with_scenario=False)
    rep = res.report
    for tag, e in extra.entries.items():
        rep.entries.setdefault(tag, e)
    for tag, why in extra.inapplicable.items():
        if tag not in rep.entries:
            rep.inapplicable.setdefault(tag, why)
    rep.inapplicable.pop("K_I", None)
    if dist_out:
        _emit(error_law_csv(res.error_law), dist_out)
    violations = rep.violations()
    rec = _record(b, rep, seed, meta, violations)
    if ur_suite:
        details, summary = run_suite(ur_suite, trials, seed)
        rec["ur_checks"] = _round({"suite": ur_suite, "summary": summary})
        if summary.get("failed"):
            violations = violations + [("ur", 0, 0)]
    return rec, EXIT_VIOLATION if violations else EXIT_OK


def _one_plus_cos_state():
    return Q.DensityOperator.from_vector(np.array([1, 1]) / math.sqrt(2))


def run_suite(name: str, trials: int, seed: int):
    """Run a named verification suite; returns ``(detail dicts, summary)``."""
    if name not in SUITES:
        raise UsageError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(max(trials, 1))]
    extra = {}
    if name in ("discrete", "rank1"):
        results = U.random_eur_suite(trials, seed, rank1=name == "rank1")
    elif name == "number-phase":
        results = [U.check_number_phase(Q.fock_state(n, 8)) for n in range(8)]
        for r in rngs[:trials]:
            d = int(r.integers(2, 31))
            results.append(U.check_number_phase(Q.random_state(d, r, rank=int(r.integers(1, d + 1)))))
    elif name == "qp":
        grid = Q.UniformGrid.interval(-20, 20, 2048)
        gauss = U.check_qp_discretized(grid, U.gaussian_wavefunction(grid))
        extra["gaussian_minus_ln_pi_e"] = gauss.lhs - math.log(math.pi * math.e)
        extra["gaussian_saturation_ok"] = abs(extra["gaussian_minus_ln_pi_e"]) <= 1e-3
        results = [gauss] + [U.check_qp_discretized(grid, U.random_smooth_state(grid, r))
                             for r in rngs[:trials]]
    elif name == "covariant":
        grid = Q.UniformGrid.interval(-12, 12, 256)
        gen = Q.momentum_surrogate(grid)
        results = []
        for r in rngs[:min(trials, 20)]:
            psi = U.gaussian_wavefunction(grid, sigma=r.uniform(0.6, 1.6), x0=r.uniform(-1, 1),
                                          p0=r.uniform(-1, 1))
            state = Q.DensityOperator.from_vector(psi)
            results.append(U.check_covariant_relation(gen, state, grid))
            results.append(U.check_covariant_relation(gen, state, grid, blur_sigma=0.5))
    elif name == "binned":
        grid = Q.UniformGrid.circle(8192)
        povm = Q.canonical_phase_povm(2, grid)
        eps = [2 * math.pi / n for n in (16, 64, 256, 1024, 4096)]
        seq, monotone = U.binned_convergence(povm, _one_plus_cos_state(), eps)
        from scipy import integrate
        p = lambda t: (1 + math.cos(t)) / (2 * math.pi)
        limit = -integrate.quad(lambda t: p(t) * math.log(p(t)) if p(t) > 0 else 0.0, -math.pi,
                                math.pi, limit=200)[0]
        extra.update(sequence=seq, monotone=monotone, limit=limit,
                     error_at_finest=abs(seq[-1][1] - limit))
        results = [U.UrCheckResult(seq[-1][1], limit, "binned-limit", "", 1e-4)]
    else:
        found = U.rank2_counterexample_search(trials, 6, seed)
        extra["counterexample"] = found
        extra["message"] = "no counterexample found" if found is None else "counterexample found"
        return [], {"suite": name, "trials": trials, **extra}
    summary = {"suite": name, **U.summarize(results), **extra}
    return [r.to_dict() for r in results], summary


def cmd_verify_ur(suite: str, trials: int = 1000, seed: int = 0, out: Optional[str] = None):
    details, summary = run_suite(suite, trials, seed)
    if out:
        with open(out, "w") as f:
            for d in details:
                f.write(json.dumps(_round(d), sort_keys=True) + "\n")
    code = EXIT_VIOLATION if summary.get("failed") or summary.get("gaussian_saturation_ok") is False \
        or summary.get("counterexample") else EXIT_OK
    return _round(summary), code


def cmd_sweep(cfg: dict, axis: str, values, seed: int = 0, simulate: bool = False):
    """One row per value; columns: axis, achieved rms/entropy/relative, then bound tags."""
    current = C.get_path(cfg, axis)
    if current is not None and (isinstance(current, bool) or not isinstance(current, (int, float))):
        raise C.ConfigError(axis, f"sweep axis must be numeric, found {current!r}")
    rows, code = [], EXIT_OK
    for raw in values:
        try:
            v = float(raw)
        except (TypeError, ValueError):
            raise C.ConfigError(axis, f"sweep value {raw!r} is not numeric") from None
        v = int(v) if v.is_integer() and (isinstance(current, int) or current is None) else v
        point = C.set_path(cfg, axis, v)
        rec, c = (cmd_simulate if simulate else cmd_bounds)(point, seed, meta=False)
        code = max(code, c)
        rows.append((v, rec))
    tags = sorted({t for _, r in rows for t in r["bounds"]})
    head = [axis, "achieved.rms", "achieved.entropy", "achieved.relative", "violations"] + tags
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(head)
    for v, r in rows:
        a = r.get("achieved", {})
        cells = [_fmt(v) if isinstance(v, float) else v]
        cells += ["" if a.get(k) is None else _fmt(a[k]) for k in ("rms", "entropy", "relative")]
        cells.append(len(r.get("violations", [])))
        for t in tags:
            e = r["bounds"].get(t)
            cells.append("" if e is None or e["value"] is None else _fmt(e["value"]))
        w.writerow(cells)
    return buf.getvalue(), code


# --------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (YAML, or JSON by .json suffix)")
    common.add_argument("--seed", type=int, default=0, help="master seed (u64)")
    common.add_argument("--trials", type=int, default=None, help="number of randomized trials")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--no-meta", action="store_true", help="omit timestamps and host details")

    p = _Parser(prog="shiftbounds", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("bounds", parents=[common], help="evaluate every applicable floor")
    sim = sub.add_parser("simulate", parents=[common], help="simulate and compare with floors")
    sim.add_argument("--ur-suite", choices=SUITES, help="also run a verification suite")
    sim.add_argument("--dist-out", help="write the error law as CSV (parameter,density)")
    ur = sub.add_parser("verify-ur", parents=[common], help="run an uncertainty-relation suite")
    ur.add_argument("suite", choices=SUITES)
    sw = sub.add_parser("sweep", parents=[common], help="sweep one numeric config field")
    sw.add_argument("--axis", required=True, help="dotted config path, e.g. probe.n")
    sw.add_argument("--values", required=True, help="comma-separated numbers")
    sw.add_argument("--simulate", action="store_true", help="simulate each point")
    return p


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "verify-ur":
            trials = args.trials if args.trials is not None else 1000
            summary, code = cmd_verify_ur(args.suite, trials, args.seed, args.out)
            sys.stdout.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")
            return code
        if not args.config:
            raise UsageError("--config is required")
        cfg = C.load_config(args.config)
        if args.command == "sweep":
            text, code = cmd_sweep(cfg, args.axis, args.values.split(","), args.seed, args.simulate)
            _emit(text, args.out)
            return code
        if args.command == "bounds":
            rec, code = cmd_bounds(cfg, args.seed, not args.no_meta)
        else:
            trials = args.trials if args.trials is not None else 100
            rec, code = cmd_simulate(cfg, args.seed, not args.no_meta, args.ur_suite, trials,
                                     args.dist_out)
        text = _bounds_csv(rec) if args.format == "csv" else json.dumps(rec, sort_keys=True, indent=2) + "\n"
        _emit(text, args.out)
        if code == EXIT_VIOLATION:
            for v in rec.get("violations", []):
                print(f"violation: {v['tag']} achieved {v['achieved']} < bound {v['bound']}",
                      file=sys.stderr)
        return code
    except (C.ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
