"""Command-line driver: ``hgtlab {ess,simulate,eigen,sweep,verify-kernel}``.

Parameters come from an optional flat ``key = value`` file (``#`` starts a
comment) and from flags; flags win. Every run writes ``config.json`` with
the fully resolved configuration next to its results, and prints it.

Exit status: 0 success, 2 configuration error, 3 numerical failure. On
failure ``error.json`` is written to the output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ess as ess_mod
from . import spectral
from .errors import ConfigurationError, DomainError, HGTLabError, NumericalError
from .kernels import KERNEL_NAMES, ModelParams, make_kernel, validate_h1
from .pde import Grid1D, SimConfig, init_state, run

logger = logging.getLogger("hgtlab")

MODES = ("ess", "simulate", "eigen", "sweep", "verify-kernel")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# key -> (type, default); None default means "required for the modes that use it"
FIELDS: dict[str, tuple[type, object]] = {
    "kernel": (str, "tanh"),
    "tau": (float, None),
    "g": (float, None),
    "epsilon": (float, None),
    "z_min": (float, -2.0),
    "z_max": (float, 6.0),
    "dz": (float, 1e-2),
    "dt": (float, 1e-4),
    "t_max": (float, 1000.0),
    "z_init": (float, 0.0),
    "A": (float, 1.0),
    "steady_tol": (float, 1e-7),
    "mass_stride": (int, 100),
    "backend": (str, "auto"),
    "mu_min": (float, None),
    "mu_max": (float, None),
    "mu_step": (float, None),
    "mu_values": (str, ""),
    "fitness_step": (float, 1e-3),
    "domain_min": (float, -10.0),
    "domain_max": (float, 10.0),
    "n_points": (int, spectral.DEFAULT_POINTS),
}

MODE_FIELDS = {
    "ess": ("kernel", "tau", "g", "fitness_step"),
    "simulate": (
        "kernel", "tau", "g", "epsilon", "z_min", "z_max", "dz", "dt", "t_max",
        "z_init", "A", "steady_tol", "mass_stride", "backend",
    ),
    "eigen": ("g", "epsilon", "domain_min", "domain_max", "n_points"),
    "sweep": ("kernel", "tau", "mu_min", "mu_max", "mu_step", "mu_values"),
    "verify-kernel": ("kernel",),
}

# accepted spellings in config files besides the canonical key
ALIASES = {"zmin": "z_min", "zmax": "z_max", "tmax": "t_max", "zinit": "z_init", "eps": "epsilon", "a": "A"}

POSITIVE = {"g", "epsilon", "dz", "dt", "t_max", "A", "steady_tol", "mass_stride", "mu_step", "fitness_step", "mu_min"}


@dataclass
class RunConfig:
    mode: str
    out: Path
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def echo(self) -> dict:
        return {"mode": self.mode, **self.values}


def _canonical(key: str) -> str:
    key = key.strip().replace("-", "_")
    return ALIASES.get(key, ALIASES.get(key.lower(), key))


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are ignored."""
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file not found: {p}", field="config")
    out: dict[str, str] = {}
    for lineno, raw in enumerate(p.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{p}:{lineno}: expected 'key = value'", field="config")
        key, value = line.split("=", 1)
        key = _canonical(key)
        if key not in FIELDS and key != "mode":
            raise ConfigurationError(f"{p}:{lineno}: unknown key {key!r}", field=key)
        out[key] = value.strip()
    return out


def _convert(key: str, raw) -> object:
    typ = FIELDS[key][0]
    if typ is str:
        return str(raw)
    try:
        value = typ(raw)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key} must be a {typ.__name__}, got {raw!r}", field=key) from None
    if typ is float and not math.isfinite(value):
        raise ConfigurationError(f"{key} must be finite, got {raw!r}", field=key)
    return value


def _check_ranges(mode: str, v: dict) -> None:
    for key in POSITIVE & v.keys():
        if v[key] is not None and not v[key] > 0:
            raise ConfigurationError(f"{key} must be > 0 (got {v[key]})", field=key)
    if v.get("tau") is not None and v["tau"] < 0:
        raise ConfigurationError(f"tau must be >= 0 (got {v['tau']})", field="tau")
    if "kernel" in v:
        name = v["kernel"].lower().removesuffix("-kernel")
        if name not in KERNEL_NAMES:
            raise ConfigurationError(
                f"unknown kernel {v['kernel']!r}; supported kernels: {', '.join(KERNEL_NAMES)}", field="kernel"
            )
        v["kernel"] = name
    if mode == "simulate":
        if not v["z_max"] > v["z_min"]:
            raise ConfigurationError("z_max must be > z_min", field="z_max")
        if not v["z_min"] <= v["z_init"] <= v["z_max"]:
            raise ConfigurationError(f"z_init must lie in [{v['z_min']}, {v['z_max']}]", field="z_init")
        if v["backend"] not in ("auto", "numba", "numpy"):
            raise ConfigurationError("backend must be one of auto, numba, numpy", field="backend")
    if mode == "eigen" and not v["domain_max"] > v["domain_min"]:
        raise ConfigurationError("domain_max must be > domain_min", field="domain_max")
    if mode == "eigen" and v["n_points"] < spectral.MIN_POINTS:
        raise ConfigurationError(f"n_points must be >= {spectral.MIN_POINTS}", field="n_points")
    if mode == "sweep":
        if v["mu_values"]:
            mus = _mu_list(v)
            if any(m <= 0 for m in mus):
                raise ConfigurationError("mu_values must all be > 0", field="mu_values")
        else:
            for key in ("mu_min", "mu_max", "mu_step"):
                if v[key] is None:
                    raise ConfigurationError(f"{key} is required for sweep (or give mu_values)", field=key)
            if v["mu_max"] < v["mu_min"]:
                raise ConfigurationError("mu_max must be >= mu_min", field="mu_max")


def parse_config(mode: str, file_values: dict | None = None, overrides: dict | None = None, out=".") -> RunConfig:
    """Merge defaults, file values and flag overrides; validate for ``mode``."""
    if mode not in MODES:
        raise ConfigurationError(f"unknown mode {mode!r}; use one of {', '.join(MODES)}", field="mode")
    merged = {k: FIELDS[k][1] for k in MODE_FIELDS[mode]}
    for source in (file_values or {}, overrides or {}):
        for key, raw in source.items():
            key = _canonical(key)
            if key in merged and raw is not None:
                merged[key] = _convert(key, raw)
    # the mu range may be replaced by an explicit mu_values list
    for key in MODE_FIELDS[mode]:
        if merged[key] is None and key not in ("mu_min", "mu_max", "mu_step"):
            raise ConfigurationError(f"missing required value {key!r} for mode {mode}", field=key)
    _check_ranges(mode, merged)
    return RunConfig(mode=mode, out=Path(out), values=merged)


def _mu_list(v: dict) -> list[float]:
    if v["mu_values"]:
        try:
            return sorted({float(s) for s in v["mu_values"].replace(";", ",").split(",") if s.strip()})
        except ValueError:
            raise ConfigurationError("mu_values must be a comma-separated list of numbers", field="mu_values") from None
    n = int(math.floor((v["mu_max"] - v["mu_min"]) / v["mu_step"] + 1e-9))
    return [v["mu_min"] + i * v["mu_step"] for i in range(n + 1)]


# ---------------------------------------------------------------------------
# deterministic writers


def _clean(obj):
    """Make ``obj`` JSON-safe: arrays to lists, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def fmt(x) -> str:
    """Shortest round-trip decimal for floats; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


# ---------------------------------------------------------------------------
# modes


def _constants_for(kernel, mu: float | None = None):
    """Kernel constants, skipping the slow mu2 search when mu is monomorphic."""
    kc = ess_mod.compute_constants(kernel, with_mu2=False)
    if mu is None or mu > kc.mu1:
        kc = ess_mod.compute_constants(kernel, with_mu2=True)
    return kc


def run_ess(cfg: RunConfig) -> None:
    kernel = make_kernel(cfg["kernel"])
    params = ModelParams(cfg["tau"], cfg["g"])
    kc = _constants_for(kernel, params.mu)
    regime, eq = ess_mod.classify(params, kc, kernel)
    if eq is None:
        raise NumericalError(f"no equilibrium found at mu = {params.mu}")
    report = ess_mod.verify_ess(eq, params, kernel)
    lo, hi = -2.0, params.mu + 5.0
    n = int(round((hi - lo) / cfg["fitness_step"]))
    prof = ess_mod.fitness(eq, params, kernel, np.linspace(lo, hi, n + 1))
    body = {
        "mu": params.mu,
        "regime": regime,
        **eq.to_dict(),
        "max_fitness_excursion": report.max_fitness_excursion,
        "verification": report.to_dict(),
        "constants": kc.to_dict(),
    }
    write_json(cfg.out / "ess.json", body)
    write_csv(cfg.out / "fitness.csv", ("z", "F"), zip(prof.grid, prof.values))


def run_simulate(cfg: RunConfig) -> None:
    v = cfg.values
    sim = SimConfig(
        params=ModelParams(v["tau"], v["g"], v["epsilon"]),
        kernel=make_kernel(v["kernel"]),
        grid=Grid1D(v["z_min"], v["z_max"], v["dz"]),
        dt=v["dt"],
        t_max=v["t_max"],
        z_init=v["z_init"],
        A=v["A"],
        steady_tol=v["steady_tol"],
        backend=None if v["backend"] == "auto" else v["backend"],
    )
    rep = run(sim)
    hist = rep.rho_history
    stride = v["mass_stride"]
    idx = list(range(stride - 1, hist.size, stride))
    if hist.size and (not idx or idx[-1] != hist.size - 1):
        idx.append(hist.size - 1)
    mass_rows = [(0.0, init_state(sim).rho)] + [((i + 1) * sim.dt, hist[i]) for i in idx]
    write_csv(cfg.out / "mass.csv", ("t", "rho"), mass_rows)
    write_csv(cfg.out / "profile.csv", ("z", "u", "n_rescaled"), zip(rep.z, rep.u, rep.n_rescaled))
    write_json(cfg.out / "report.json", {**rep.to_dict(), "parameters": cfg.echo(), "mu": sim.params.mu})


def run_eigen(cfg: RunConfig) -> None:
    v = cfg.values
    res = spectral.principal_eigen(v["epsilon"], v["g"], (v["domain_min"], v["domain_max"]), v["n_points"])
    write_json(cfg.out / "eigen.json", res.to_dict())


SWEEP_HEADER = (
    "mu", "g", "regime", "morphism", "z1", "z2", "z3",
    "a1_over_rho0", "a2_over_rho0", "a3_over_rho0", "rho0", "verified",
)


def run_sweep(cfg: RunConfig) -> None:
    kernel = make_kernel(cfg["kernel"])
    kc = ess_mod.compute_constants(kernel)
    rows = ess_mod.sweep(_mu_list(cfg.values), cfg["tau"], kernel, kc)
    out = []
    for r in rows:
        pts = list(r.ess.points) if r.ess else []
        fr = list(r.ess.fractions) if r.ess else []
        pts += [None] * (3 - len(pts))
        fr += [None] * (3 - len(fr))
        out.append((r.mu, r.g, r.regime, r.ess.morphism if r.ess else 0, *pts, *fr,
                    r.ess.rho0 if r.ess else None, r.verified))
    write_csv(cfg.out / "sweep.csv", SWEEP_HEADER, out)


def run_verify_kernel(cfg: RunConfig) -> None:
    rep = validate_h1(make_kernel(cfg["kernel"]))
    write_json(cfg.out / "h1_report.json", rep.to_dict())
    if not rep.passed:
        raise ConfigurationError(f"kernel {cfg['kernel']} fails the structural hypotheses", field="kernel")


RUNNERS = {
    "ess": run_ess,
    "simulate": run_simulate,
    "eigen": run_eigen,
    "sweep": run_sweep,
    "verify-kernel": run_verify_kernel,
}


def run_scenario(cfg: RunConfig) -> int:
    """Run one mode, writing outputs (or ``error.json``) under ``cfg.out``."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_json(cfg.out / "config.json", cfg.echo())
    try:
        RUNNERS[cfg.mode](cfg)
    except (ConfigurationError, DomainError) as exc:
        return _fail(cfg.out, EXIT_CONFIG, "configuration", exc)
    except (HGTLabError, ArithmeticError) as exc:
        return _fail(cfg.out, EXIT_NUMERIC, "numerical", exc)
    return EXIT_OK


def _fail(out: Path | None, code: int, kind: str, exc: Exception) -> int:
    record = {"error": kind, "type": type(exc).__name__, "message": str(exc), "exit_status": code}
    if getattr(exc, "field", None):
        record["field"] = exc.field
    print(f"error: {exc}", file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            write_json(out / "error.json", record)
        except OSError:
            pass
    return code


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--kernel", help=f"transfer kernel: {', '.join(KERNEL_NAMES)}")
    p.add_argument("--tau", help="transfer rate tau >= 0")
    p.add_argument("--g", help="selection strength g > 0")
    p.add_argument("--epsilon", help="mutation scale epsilon > 0")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hgtlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="mode", required=True)

    p = sub.add_parser("ess", help="equilibrium (ESS) and its fitness profile")
    _add_common(p)
    p.add_argument("--fitness-step", dest="fitness_step")

    p = sub.add_parser("simulate", help="run the PDE to steady state")
    _add_common(p)
    for flag, key in (("--zmin", "z_min"), ("--zmax", "z_max"), ("--dz", "dz"), ("--dt", "dt"),
                      ("--tmax", "t_max"), ("--zinit", "z_init"), ("--A", "A"),
                      ("--steady-tol", "steady_tol"), ("--mass-stride", "mass_stride")):
        p.add_argument(flag, dest=key)
    p.add_argument("--backend", choices=("auto", "numba", "numpy"))

    p = sub.add_parser("eigen", help="principal eigenvalue without transfer")
    _add_common(p)
    p.add_argument("--domain-min", dest="domain_min")
    p.add_argument("--domain-max", dest="domain_max")
    p.add_argument("--n-points", dest="n_points")

    p = sub.add_parser("sweep", help="equilibria along a range of mu at fixed tau")
    _add_common(p)
    p.add_argument("--mu-min", dest="mu_min")
    p.add_argument("--mu-max", dest="mu_max")
    p.add_argument("--mu-step", dest="mu_step")
    p.add_argument("--mu-values", dest="mu_values", help="comma-separated explicit mu list")

    p = sub.add_parser("verify-kernel", help="check the structural kernel hypotheses")
    _add_common(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = Path(args.out)
    flags = {k: v for k, v in vars(args).items() if k not in ("mode", "config", "out", "verbose") and v is not None}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        file_mode = file_values.pop("mode", None)
        if file_mode and file_mode != args.mode:
            raise ConfigurationError(f"config file is for mode {file_mode!r}, not {args.mode!r}", field="mode")
        cfg = parse_config(args.mode, file_values, flags, out)
    except ConfigurationError as exc:
        return _fail(out, EXIT_CONFIG, "configuration", exc)
    print(json.dumps(_clean(cfg.echo()), sort_keys=True))
    return run_scenario(cfg)


if __name__ == "__main__":
    sys.exit(main())
