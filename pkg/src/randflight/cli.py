"""Batch command-line interface.

Subcommands: ``simulate`` (Monte Carlo histograms), ``layers`` (the
turn-count layers), ``density`` (the assembled transition density),
``cf`` (spectral cross-check), ``validate`` (invariant suites).  Every
run writes the requested CSV artifact plus a JSON metadata sidecar with
the resolved configuration, seed, package version, wall time and the
mass accounting.  Outputs are byte-identical for identical
(configuration, seed, worker count).

Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .cf import layer_fourier, volterra_cf
from .convolution import ac_profile, transition_density
from .core import (FlightParams, PolarGrid, RadialGrid, poisson_weight,
                   tail_mass)
from .dissipation import CircularGaussianLaw, law_from_config
from .errors import DomainError, EstimationError, NumericError
from .sampler import estimate_density, simulate_batch

SCHEMA_VERSION = 1


@dataclass
class RunConfig:
    """Resolved configuration of one CLI run."""

    command: str
    m: int = 2
    law: dict = field(default_factory=lambda: {"kind": "uniform"})
    lam: float = 1.0
    c: float = 1.0
    t: float = 1.0
    K: int = 8
    n_r: int = 64
    n_theta: int = 16
    n_samples: int = 1_000_000
    seed: int = 0
    conditioning: str = "all"
    out: str = "out.csv"
    fmt: str = "csv"
    threads: int | None = None
    suite: str = "all"
    alphas: tuple = (0.5, 1.0, 2.0)
    s_values: tuple = (0.5, 1.0, 2.0)

    def params(self) -> FlightParams:
        return FlightParams(self.m, self.c, self.lam)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["schema"] = SCHEMA_VERSION
        d["alphas"] = list(self.alphas)
        d["s_values"] = list(self.s_values)
        return d


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randflight",
                                description="random-flight density engine")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override it")
        sp.add_argument("--m", type=int)
        sp.add_argument("--law", choices=["uniform", "circular_gaussian"])
        sp.add_argument("--k", type=float, help="circular Gaussian concentration")
        sp.add_argument("--lambda", dest="lam", type=float)
        sp.add_argument("--c", type=float)
        sp.add_argument("--t", type=float)
        sp.add_argument("--nr", type=int, help="radial grid nodes")
        sp.add_argument("--ntheta", type=int, help="angular grid nodes")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output CSV path")
        sp.add_argument("--format", dest="fmt", choices=["csv", "json"])
        sp.add_argument("--threads", type=int,
                        default=_env_threads(), help="worker count")

    sp = sub.add_parser("simulate", help="Monte Carlo density histogram")
    common(sp)
    sp.add_argument("--n", dest="n_samples", type=int)
    sp.add_argument("--conditioning", help="'all' or an event count")

    sp = sub.add_parser("layers", help="turn-count layers 1..K")
    common(sp)
    sp.add_argument("--K", type=int)

    sp = sub.add_parser("density", help="assembled transition density")
    common(sp)
    sp.add_argument("--K", type=int)

    sp = sub.add_parser("cf", help="characteristic-function cross-check")
    common(sp)
    sp.add_argument("--K", type=int)
    sp.add_argument("--alphas", help="comma-separated inversion magnitudes")

    sp = sub.add_parser("validate", help="run invariant suites")
    common(sp)
    sp.add_argument("--suite", default="all",
                    choices=["all", "quick", "core", "specfun", "sampler",
                             "convolution"])
    return p


def _env_threads() -> int | None:
    v = os.environ.get("RANDFLIGHT_THREADS")
    return int(v) if v else None


def load_config(args: argparse.Namespace) -> RunConfig:
    base: dict = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            base = json.load(fh)
        schema = base.pop("schema", SCHEMA_VERSION)
        if schema != SCHEMA_VERSION:
            raise DomainError(f"unsupported config schema {schema}")
    cfg = RunConfig(command=args.command)
    for key in ("m", "law", "lam", "c", "t", "K", "n_samples", "seed",
                "out", "fmt", "threads", "suite", "conditioning"):
        if key in base and base[key] is not None:
            setattr(cfg, key, base[key])
    if "nr" in base:
        cfg.n_r = int(base["nr"])
    if "ntheta" in base:
        cfg.n_theta = int(base["ntheta"])
    if "alphas" in base:
        cfg.alphas = tuple(float(v) for v in base["alphas"])
    if "s_values" in base:
        cfg.s_values = tuple(float(v) for v in base["s_values"])

    for key in ("m", "lam", "c", "t", "K", "n_samples", "seed", "out",
                "fmt", "threads", "suite", "conditioning"):
        v = getattr(args, key, None)
        if v is not None:
            setattr(cfg, key, v)
    if getattr(args, "nr", None) is not None:
        cfg.n_r = args.nr
    if getattr(args, "ntheta", None) is not None:
        cfg.n_theta = args.ntheta
    if getattr(args, "law", None) is not None:
        cfg.law = {"kind": args.law}
        if args.law == "circular_gaussian":
            if getattr(args, "k", None) is None:
                raise DomainError("--law circular_gaussian requires --k")
            cfg.law["k"] = args.k
    elif getattr(args, "k", None) is not None and \
            cfg.law.get("kind") == "circular_gaussian":
        cfg.law["k"] = args.k
    if getattr(args, "alphas", None):
        cfg.alphas = tuple(float(v) for v in args.alphas.split(","))

    _validate_config(cfg)
    return cfg


def _validate_config(cfg: RunConfig) -> None:
    if cfg.m < 2:
        raise DomainError("m must be >= 2")
    for name in ("lam", "c", "t"):
        if not getattr(cfg, name) > 0:
            raise DomainError(f"{name} must be positive")
    if cfg.K < 1 or cfg.n_r < 2 or cfg.n_samples < 1:
        raise DomainError("K, nr and n must be positive")
    if cfg.fmt not in ("csv", "json"):
        raise DomainError(f"unknown format {cfg.fmt}")
    if cfg.conditioning != "all":
        cfg.conditioning = int(cfg.conditioning)


def _write_rows(path: str, fmt: str, header: list[str], rows: list) -> None:
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump({"columns": header,
                       "rows": [[_num(v) for v in row] for row in rows]},
                      fh, indent=1)
            fh.write("\n")
        return
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt_num(v) for v in row])


def _num(v):
    return int(v) if isinstance(v, (int, np.integer)) else float(v)


def _fmt_num(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".12g")


def _sidecar(path: str, cfg: RunConfig, started: float, extra: dict) -> None:
    meta = {
        "config": cfg.to_dict(),
        "version": __version__,
        "seed": cfg.seed,
        "wall_time_s": time.time() - started,
    }
    meta.update(extra)
    with open(path + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=1, default=float)
        fh.write("\n")


def _grid(cfg: RunConfig, params: FlightParams, law, uniform_bins=False):
    if isinstance(law, CircularGaussianLaw):
        return PolarGrid.build(params, cfg.t, cfg.n_r, cfg.n_theta)
    if uniform_bins:
        return RadialGrid.build_uniform(params, cfg.t, cfg.n_r)
    return RadialGrid.build(params, cfg.t, cfg.n_r)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _cmd_simulate(cfg: RunConfig) -> dict:
    params = cfg.params()
    law = law_from_config(cfg.law, params)
    grid = _grid(cfg, params, law, uniform_bins=True)
    est = estimate_density(params, law, cfg.t, cfg.n_samples, grid,
                           conditioning=cfg.conditioning, seed=cfg.seed,
                           threads=cfg.threads)
    polar = isinstance(grid, PolarGrid)
    rows = []
    if polar:
        header = ["r", "theta", "density", "stderr"]
        for i, r in enumerate(grid.nodes):
            for j, th in enumerate(grid.thetas):
                rows.append([r, th, est.values[i, j], est.standard_errors[i, j]])
    else:
        header = ["r", "density", "stderr"]
        for i, r in enumerate(grid.nodes):
            rows.append([r, est.values[i], est.standard_errors[i]])
    _write_rows(cfg.out, cfg.fmt, header, rows)
    counts = {
        "n_samples": est.n_samples,
        "n_conditioned": est.n_conditioned,
        "boundary_fraction": est.boundary_fraction,
        "zero_event_weight": math.exp(-params.lam * cfg.t),
    }
    return {"estimate": counts}


def _layer_rows(layers, grid) -> tuple[list[str], list]:
    rows = []
    if isinstance(grid, PolarGrid):
        header = ["n", "r", "theta", "value"]
        for layer in layers:
            for i, r in enumerate(grid.nodes):
                for j, th in enumerate(grid.thetas):
                    rows.append([layer.n, r, th, layer.values[i, j]])
    else:
        header = ["n", "r", "value"]
        for layer in layers:
            for i, r in enumerate(grid.nodes):
                rows.append([layer.n, r, layer.values[i]])
    return header, rows


def _cmd_layers(cfg: RunConfig) -> dict:
    params = cfg.params()
    law = law_from_config(cfg.law, params)
    grid = _grid(cfg, params, law)
    field_obj = transition_density(params, law, cfg.t, cfg.K, grid)
    header, rows = _layer_rows(field_obj.layers, grid)
    _write_rows(cfg.out, cfg.fmt, header, rows)
    return {"mass_accounting": _mass_accounting(field_obj)}


def _mass_accounting(field_obj) -> dict:
    return {
        "singular_weight": field_obj.singular_weight,
        "layer_masses": list(field_obj.layer_masses),
        "tail_mass": field_obj.tail,
        "total": field_obj.total_mass(),
    }


def _cmd_density(cfg: RunConfig) -> dict:
    params = cfg.params()
    law = law_from_config(cfg.law, params)
    grid = _grid(cfg, params, law)
    field_obj = transition_density(params, law, cfg.t, cfg.K, grid)
    rows = []
    if isinstance(grid, PolarGrid):
        header = ["r", "theta", "p_ac"]
        for j, th in enumerate(grid.thetas):
            vals = ac_profile(field_obj, grid.nodes,
                              np.full(grid.n_r, th))
            for i, r in enumerate(grid.nodes):
                rows.append([r, th, vals[i]])
    else:
        header = ["r", "p_ac"]
        vals = ac_profile(field_obj, grid.nodes)
        for i, r in enumerate(grid.nodes):
            rows.append([r, vals[i]])
    _write_rows(cfg.out, cfg.fmt, header, rows)
    return {"mass_accounting": _mass_accounting(field_obj)}


def _cmd_cf(cfg: RunConfig) -> dict:
    params = cfg.params()
    law = law_from_config(cfg.law, params)
    grid = _grid(cfg, params, law)
    field_obj = transition_density(params, law, cfg.t, cfg.K, grid)
    sing_w = field_obj.singular_weight
    rows = []
    header = ["alpha", "volterra", "layer_sum", "abs_diff"]
    from .cf import sphere_cf
    for a in cfg.alphas:
        alpha = np.zeros(params.m)
        alpha[0] = a
        G = volterra_cf(params, law, alpha, cfg.t, 2048).values[-1]
        total = sing_w * sphere_cf(params, law, alpha, cfg.t).real
        for layer in field_obj.layers:
            total += layer_fourier(layer, params, alpha)
        rows.append([a, G.real, total, abs(G.real - total)])
    _write_rows(cfg.out, cfg.fmt, header, rows)
    worst = max(row[3] for row in rows)
    return {"max_abs_diff": worst,
            "tail_mass": field_obj.tail,
            "mass_accounting": _mass_accounting(field_obj)}


def _cmd_validate(cfg: RunConfig) -> dict:
    checks = _validation_checks(cfg)
    width = max(len(name) for name, _, _ in checks)
    failures = 0
    results = []
    for name, ok, detail in checks:
        status = "PASS" if ok else "FAIL"
        failures += not ok
        print(f"{name:<{width}}  {status}  {detail}")
        results.append({"check": name, "pass": bool(ok), "detail": detail})
    print(f"{len(checks) - failures}/{len(checks)} checks passed")
    return {"checks": results, "failures": failures}


def _validation_checks(cfg: RunConfig) -> list[tuple[str, bool, str]]:
    from .specfun import bessel_i0, bessel_j0, gauss_2f1

    params = cfg.params()
    law = law_from_config(cfg.law, params)
    suites = ("core", "specfun", "sampler", "convolution") \
        if cfg.suite in ("all", "quick") else (cfg.suite,)
    checks = []

    if "core" in suites:
        s = sum(poisson_weight(n, params, cfg.t) for n in range(40))
        err = abs(s + tail_mass(39, params, cfg.t) - 1.0)
        checks.append(("poisson-normalization", err < 1e-12, f"defect {err:.2e}"))

    if "specfun" in suites:
        err = max(abs(gauss_2f1(0.5, 1.0, 1.0, z) * math.sqrt(1 - z) - 1.0)
                  for z in np.arange(0.0, 0.95, 0.1))
        checks.append(("hypergeometric-identity", err < 1e-10, f"defect {err:.2e}"))
        err = abs(bessel_j0(2.404825557695773))
        checks.append(("bessel-j0-zero", err < 1e-10, f"|J0| {err:.2e}"))
        err = abs(bessel_i0(1.0) - 1.2660658777520084)
        checks.append(("bessel-i0-value", err < 1e-12, f"defect {err:.2e}"))

    if "sampler" in suites:
        rng = np.random.default_rng(cfg.seed)
        _, counts = simulate_batch(params, law, cfg.t, 200_000, rng)
        p0 = np.count_nonzero(counts == 0) / counts.size
        target = math.exp(-params.lam * cfg.t)
        se = math.sqrt(target * (1 - target) / counts.size)
        checks.append(("zero-event-fraction", abs(p0 - target) < 4 * se,
                       f"{p0:.5f} vs {target:.5f} (4se {4 * se:.5f})"))

    if "convolution" in suites and params.m in (2, 3) \
            and not isinstance(law, CircularGaussianLaw):
        grid = RadialGrid.build(params, cfg.t, 33)
        field_obj = transition_density(params, law, cfg.t, min(cfg.K, 5), grid)
        defect = abs(field_obj.total_mass() - 1.0)
        checks.append(("field-mass", defect < 2e-3, f"defect {defect:.2e}"))
        ratios = []
        for n in range(1, len(field_obj.layer_masses)):
            pw = poisson_weight(n + 1, params, cfg.t) \
                / poisson_weight(n, params, cfg.t)
            ratios.append(abs(field_obj.layer_masses[n]
                              / field_obj.layer_masses[n - 1] - pw))
        worst = max(ratios)
        checks.append(("mass-cascade", worst < 1e-2, f"worst ratio defect {worst:.2e}"))
    return checks


_COMMANDS = {
    "simulate": _cmd_simulate,
    "layers": _cmd_layers,
    "density": _cmd_density,
    "cf": _cmd_cf,
    "validate": _cmd_validate,
}


def run(cfg: RunConfig) -> int:
    started = time.time()
    try:
        extra = _COMMANDS[cfg.command](cfg)
    except (NumericError, EstimationError) as exc:
        print(f"randflight: numerical failure: {exc}", file=sys.stderr)
        return 3
    if cfg.command == "validate":
        return 0 if extra["failures"] == 0 else 1
    _sidecar(cfg.out, cfg, started, extra)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
    except (DomainError, ValueError, OSError) as exc:
        print(f"randflight: invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        code = run(cfg)
    except DomainError as exc:
        print(f"randflight: invalid configuration: {exc}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
