"""Scenario configuration: YAML or JSON text resolved into module objects.

Every resolution error is a ``ConfigError`` naming the offending field by its
dotted path.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from . import quantum as Q
from .distributions import GriddedDistribution, gaussian_prior, uniform_circle, uniform_on


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def load_config(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError("--config", f"parse error: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping")
    data["_base_dir"] = str(p.resolve().parent)
    return data


def digest(cfg: dict) -> str:
    clean = {k: v for k, v in cfg.items() if not k.startswith("_")}
    return hashlib.sha256(json.dumps(clean, sort_keys=True, default=str).encode()).hexdigest()


def get_path(cfg: dict, dotted: str):
    node = cfg
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return None
        node = node[part]
    return node


def set_path(cfg: dict, dotted: str, value) -> dict:
    out = copy.deepcopy(cfg)
    node = out
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(dotted, "path crosses a non-mapping field")
    node[parts[-1]] = value
    return out


# --------------------------------------------------------------------------
# field helpers


def _section(cfg, key, default=None) -> dict:
    sec = cfg.get(key, default)
    if sec is None:
        raise ConfigError(key, "missing section")
    if isinstance(sec, str):
        sec = {"family": sec}
    if not isinstance(sec, dict):
        raise ConfigError(key, "expected a mapping or a family name")
    return sec


def _num(sec, key, path, default=None, kind=float, positive=False, nonneg=False):
    v = sec.get(key, default)
    if path:
        key_path = f"{path}.{key}"
    else:
        key_path = key
    if v is None:
        raise ConfigError(key_path, "required")
    if isinstance(v, bool):
        raise ConfigError(key_path, f"expected a number, got {v!r}")
    try:
        out = kind(v)
    except (TypeError, ValueError):
        raise ConfigError(key_path, f"expected a number, got {v!r}") from None
    if kind is int and out != v and not isinstance(v, str):
        raise ConfigError(key_path, f"expected an integer, got {v!r}")
    if positive and not out > 0:
        raise ConfigError(key_path, "must be positive")
    if nonneg and out < 0:
        raise ConfigError(key_path, "must be non-negative")
    return out


def _complex(v, path) -> complex:
    try:
        if isinstance(v, (list, tuple)) and len(v) == 2:
            return complex(float(v[0]), float(v[1]))
        if isinstance(v, str):
            return complex(v.replace(" ", ""))
        return complex(v)
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected a complex number, got {v!r}") from None


def _resolve(cfg, name) -> Path:
    p = Path(name)
    return p if p.is_absolute() else Path(cfg.get("_base_dir", ".")) / p


def read_matrix_csv(path) -> np.ndarray:
    """Complex matrix from CSV: one header line, each row holds ``re, im`` pairs."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))[1:]
    vals = np.array([[float(x) for x in r] for r in rows if r], dtype=float)
    if vals.ndim != 2 or vals.shape[1] % 2:
        raise ValueError("matrix CSV needs an even number of columns (re, im pairs)")
    return vals[:, 0::2] + 1j * vals[:, 1::2]


def write_matrix_csv(path, m) -> None:
    m = np.asarray(m, dtype=complex)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"{part}{j}" for j in range(m.shape[1]) for part in ("re", "im")])
        for row in m:
            w.writerow([f"{v:.17g}" for z in row for v in (z.real, z.imag)])


def read_table_csv(path):
    """Two numeric columns ``parameter, density`` after a header line."""
    with open(path, newline="") as f:
        rows = [r for r in list(csv.reader(f))[1:] if r]
    arr = np.array([[float(r[0]), float(r[1])] for r in rows])
    return arr[:, 0], arr[:, 1]


def read_povm_csv(path, dim):
    """Rows ``parameter, re00, im00, re01, ...``: operator density per node."""
    with open(path, newline="") as f:
        rows = [r for r in list(csv.reader(f))[1:] if r]
    arr = np.array([[float(x) for x in r] for r in rows])
    if arr.shape[1] != 1 + 2 * dim * dim:
        raise ValueError(f"expected {1 + 2 * dim * dim} columns for dim {dim}")
    dens = (arr[:, 1::2] + 1j * arr[:, 2::2]).reshape(-1, dim, dim)
    return arr[:, 0], dens


def _grid_from_nodes(x, path, periodic=False, period=None) -> Q.UniformGrid:
    if x.size < 2:
        raise ConfigError(path, "need at least two nodes")
    step = float(np.mean(np.diff(x)))
    if np.max(np.abs(np.diff(x) - step)) > 1e-9 * max(1.0, abs(step)):
        raise ConfigError(path, "parameter column is not uniformly spaced")
    if periodic and period is not None and abs(step * x.size - period) > 1e-9:
        raise ConfigError(path, "periodic table must cover exactly one period")
    return Q.UniformGrid(float(x[0]), step, x.size, periodic)


# --------------------------------------------------------------------------
# builders


def build_generator(cfg) -> tuple:
    sec = _section(cfg, "generator", "number")
    fam = sec.get("family", "number")
    path = "generator"
    if fam == "number":
        dim = _num(cfg, "dim", "", kind=int, positive=True, default=sec.get("dim"))
        return Q.number_operator(dim), fam
    if fam == "mach-zehnder":
        return Q.mach_zehnder_generator(_num(sec, "n_max", path, kind=int, positive=True)), fam
    if fam == "hamiltonian":
        vals = sec.get("eigenvalues")
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"{path}.eigenvalues", "expected a non-empty list")
        try:
            return Q.Generator.from_spectrum([float(v) for v in vals]), fam
        except (TypeError, ValueError):
            raise ConfigError(f"{path}.eigenvalues", "entries must be numbers") from None
    if fam == "surrogate-momentum":
        return None, fam
    raise ConfigError(f"{path}.family", f"unknown generator family {fam!r}")


def _parameter_grid(cfg, periodic: bool, period: float = 2 * math.pi) -> Q.UniformGrid:
    g = _section(cfg, "grid", {})
    if periodic:
        return Q.UniformGrid.circle(_num(g, "count", "grid", default=512, kind=int, positive=True),
                                    period)
    count = _num(g, "count", "grid", default=1024, kind=int, positive=True)
    a = _num(g, "start", "grid", default=-8.0)
    b = _num(g, "stop", "grid", default=8.0)
    if not b > a:
        raise ConfigError("grid.stop", "must exceed grid.start")
    return Q.UniformGrid.interval(a, b, count)


def build_prior(cfg, periodic: bool, period: float = 2 * math.pi) -> GriddedDistribution:
    sec = _section(cfg, "prior", "uniform-circle")
    fam = sec.get("family", "uniform-circle")
    path = "prior"
    if fam == "uniform-circle":
        if not periodic:
            raise ConfigError(f"{path}.family", "uniform-circle needs a periodic parameter")
        return uniform_circle(_num(_section(cfg, "grid", {}), "count", "grid", default=512, kind=int,
                                   positive=True), period)
    if fam == "table":
        try:
            x, dens = read_table_csv(_resolve(cfg, sec.get("file", "")))
        except (OSError, ValueError, IndexError) as exc:
            raise ConfigError(f"{path}.file", str(exc)) from None
        grid = _grid_from_nodes(x, f"{path}.file", periodic, period if periodic else None)
        if np.any(dens < 0):
            raise ConfigError(f"{path}.file", "negative density")
        return GriddedDistribution.from_density(grid, dens)
    grid = _parameter_grid(cfg, periodic, period)
    try:
        if fam == "uniform-interval":
            a, b = _num(sec, "a", path), _num(sec, "b", path)
            if not b > a:
                raise ConfigError(f"{path}.b", "must exceed prior.a")
            return uniform_on(grid, a, b)
        if fam == "gaussian":
            mu = _num(sec, "mu", path, default=0.0)
            sigma = _num(sec, "sigma", path, positive=True)
            if not periodic and "grid" not in cfg:
                grid = Q.UniformGrid.interval(mu - 8 * sigma, mu + 8 * sigma, 1024)
            return gaussian_prior(grid, mu, sigma)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.family", f"unknown prior family {fam!r}")


def build_probe(cfg, dim: int, rng, grid: Optional[Q.UniformGrid] = None) -> Q.DensityOperator:
    """Probe state; ``grid`` is the position grid of a momentum surrogate, if any."""
    sec = _section(cfg, "probe")
    fam = sec.get("family")
    path = "probe"
    try:
        if fam == "gaussian-wavepacket":
            if grid is None:
                raise ConfigError(f"{path}.family", "wavepackets need the surrogate-momentum generator")
            sigma = _num(sec, "sigma", path, default=1.0, positive=True)
            x0, p0 = _num(sec, "x0", path, default=0.0), _num(sec, "p0", path, default=0.0)
            x = grid.nodes
            psi = np.exp(-(x - x0) ** 2 / (4 * sigma ** 2) + 1j * p0 * x)
            return Q.DensityOperator.from_vector(psi / np.linalg.norm(psi))
        if fam == "fock-state":
            n = _num(sec, "n", path, kind=int, nonneg=True)
            if n >= dim:
                raise ConfigError(f"{path}.n", f"level {n} outside dimension {dim}")
            return Q.fock_state(n, dim)
        if fam == "coherent":
            return Q.coherent_state(_complex(sec.get("alpha"), f"{path}.alpha"), dim)
        if fam == "superposition":
            coeffs = sec.get("coefficients")
            if not isinstance(coeffs, list) or len(coeffs) > dim:
                raise ConfigError(f"{path}.coefficients", f"expected a list of at most {dim} entries")
            psi = np.zeros(dim, complex)
            psi[: len(coeffs)] = [_complex(c, f"{path}.coefficients[{i}]") for i, c in enumerate(coeffs)]
            if np.linalg.norm(psi) == 0:
                raise ConfigError(f"{path}.coefficients", "all zero")
            return Q.DensityOperator.from_vector(psi / np.linalg.norm(psi))
        if fam == "thermal":
            return Q.thermal_state(_num(sec, "nbar", path, nonneg=True), dim)
        if fam == "random":
            rank = sec.get("rank")
            return Q.random_state(dim, rng, rank=None if rank is None else int(rank))
        if fam == "custom":
            m = read_matrix_csv(_resolve(cfg, sec.get("file", "")))
            if m.shape != (dim, dim):
                raise ConfigError(f"{path}.file", f"matrix shape {m.shape} does not match dim {dim}")
            return Q.DensityOperator(m)
    except ConfigError:
        raise
    except (OSError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.family", f"unknown probe family {fam!r}")


def build_povm(cfg, gen: Q.Generator, prior: GriddedDistribution) -> Q.Povm:
    sec = _section(cfg, "povm", "canonical-phase")
    fam = sec.get("family", "canonical-phase")
    path = "povm"
    grid = prior.grid
    if fam == "position":
        if gen.spectrum_kind != Q.CONTINUOUS_SURROGATE:
            raise ConfigError(f"{path}.family", "position POVM needs the surrogate-momentum generator")
        points = np.zeros((gen.dim, gen.dim, gen.dim))
        points[np.arange(gen.dim), np.arange(gen.dim), np.arange(gen.dim)] = 1 / grid.step
        return Q.Povm(points, grid)
    if not grid.periodic:
        pad = _num(_section(cfg, "grid", {}), "pad", "grid", default=grid.count // 2, kind=int,
                   nonneg=True)
        grid = Q.UniformGrid(grid.start - pad * grid.step, grid.step, grid.count + 2 * pad)
    try:
        if fam == "canonical-phase":
            if not gen.is_integer_spectrum() or not np.allclose(gen.matrix, np.diag(np.diag(gen.matrix))):
                raise ConfigError(f"{path}.family", "canonical phase needs the number generator")
            return Q.canonical_phase_povm(gen.dim, grid)
        if fam == "projective-generator":
            return Q.projective_povm(gen, grid)
        if fam == "quadrature":
            return Q.quadrature_povm(gen.dim, grid, scale=_num(sec, "scale", path, default=1.0,
                                                               positive=True))
        if fam == "custom":
            x, dens = read_povm_csv(_resolve(cfg, sec.get("file", "")), gen.dim)
            g = _grid_from_nodes(x, f"{path}.file", prior.periodic, prior.grid.period)
            return Q.Povm(dens, g)
    except ConfigError:
        raise
    except (OSError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.family", f"unknown POVM family {fam!r}")


def build_noise(cfg) -> dict:
    sec = _section(cfg, "noise", "none")
    fam = sec.get("family", "none")
    if fam == "none":
        return {"family": "none"}
    if fam == "gaussian":
        return {"family": fam, "n_lambda": _num(sec, "n_lambda", "noise", nonneg=True)}
    if fam == "additive-entropy":
        return {"family": fam, "h_z": _num(sec, "h_z", "noise")}
    raise ConfigError("noise.family", f"unknown noise family {fam!r}")


def is_periodic(cfg, gen_family: str) -> bool:
    explicit = get_path(cfg, "grid.periodic")
    if explicit is not None:
        return bool(explicit)
    return gen_family in ("number", "mach-zehnder")


def period_of(cfg, gen_family: str) -> float:
    """Default period: 2pi for the number operator, 4pi for half-integer spectra."""
    default = 4 * math.pi if gen_family == "mach-zehnder" else 2 * math.pi
    return _num(_section(cfg, "grid", {}), "period", "grid", default=default, positive=True)
