"""Command line: ``alphamod <command> [flags]`` or ``alphamod --config run.json``.

Exit codes: 0 success, 1 invalid configuration, 2 numerical failure,
3 a check did not pass.  Every run echoes a manifest (inputs, versions, seed,
sha256 of each output) on stdout and writes it next to the outputs when
``--manifest`` is given.
"""
from __future__ import annotations

import argparse
import json
import math
import platform
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__, io, regions
from .experiments import FAMILIES, NumericalFailure

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3
COMMANDS = ("bapu", "norm", "propagate", "regions", "sweep", "nls4", "verify")


class ConfigError(ValueError):
    """A configuration field violates a precondition."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    command: str
    params: dict
    seed: int = 0
    outputs: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"command": self.command, "seed": self.seed,
                "params": {k: _jsonable(v) for k, v in sorted(self.params.items())},
                "outputs": dict(sorted(self.outputs.items()))}


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, (list, tuple)):
        return [_jsonable(a) for a in v]
    return v


# ---------------------------------------------------------------- parsing


def _exponent(s: str):
    """Exact exponent: ``6``, ``0.5``, ``10/3`` or ``inf``."""
    try:
        return regions.as_exact(s)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not an exponent: {s!r}") from None


def _int_list(s: str) -> list:
    try:
        return [int(v) for v in str(s).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {s!r}") from None


def _float_list(s: str) -> list:
    try:
        return [float(v) for v in str(s).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {s!r}") from None


OUTPUT_KEYS = {"out", "report", "manifest", "out_json", "out_bin"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="alphamod",
        description="Alpha-modulation spaces, fractional Schroedinger local smoothing "
                    "and a fourth-order NLS solver.",
        epilog="Exit codes: 0 success, 1 invalid configuration, 2 numerical failure, "
               "3 check failed. ALPHAMOD_THREADS caps the FFT worker count.")
    ap.add_argument("--config", help="JSON file with 'command' and the flag fields "
                                     "(dashes written as underscores)")
    sub = ap.add_subparsers(dest="command")
    fmt = argparse.ArgumentDefaultsHelpFormatter

    def common(p, out_help):
        p.add_argument("--seed", type=int, default=0, help="RNG seed")
        p.add_argument("--manifest", default=None, help="also write the manifest JSON here")
        if out_help:
            p.add_argument("--out", required=False, default=None, help=out_help)

    p = sub.add_parser("bapu", help="build an alpha-partition of unity and export it",
                       formatter_class=fmt)
    p.add_argument("--alpha", type=float, default=0.5, help="alpha < 1")
    p.add_argument("--d", type=int, default=1, help="dimension")
    p.add_argument("--N", type=int, default=256, help="samples per axis (power of two)")
    p.add_argument("--L", type=float, default=256.0, help="box length")
    p.add_argument("--out-json", default="bapu.json", help="metadata JSON")
    p.add_argument("--out-bin", default="bapu.bin", help="window samples")
    common(p, None)

    p = sub.add_parser("norm", help="norms of a grid function (file or seeded random)",
                       formatter_class=fmt)
    p.add_argument("--input", default=None, help="grid-function file; random if omitted")
    p.add_argument("--N", type=int, default=256, help="random data: samples per axis")
    p.add_argument("--L", type=float, default=64.0, help="random data: box length")
    p.add_argument("--d", type=int, default=1, help="random data: dimension")
    p.add_argument("--p", type=_exponent, default=Fraction(2), help="Lebesgue exponent")
    p.add_argument("--q", type=_exponent, default=Fraction(2), help="sequence exponent")
    p.add_argument("--s", type=float, default=0.0, help="regularity")
    p.add_argument("--alpha", type=float, default=0.0, help="alpha < 1")
    common(p, "CSV of norms")

    p = sub.add_parser("propagate", help="apply S_beta(t) to a grid function",
                       formatter_class=fmt)
    p.add_argument("--input", default=None, help="grid-function file; random if omitted")
    p.add_argument("--N", type=int, default=256, help="random data: samples per axis")
    p.add_argument("--L", type=float, default=64.0, help="random data: box length")
    p.add_argument("--d", type=int, default=1, help="random data: dimension")
    p.add_argument("--beta", type=_exponent, default=Fraction(2), help="dispersion order > 0")
    p.add_argument("--t", type=float, default=1.0, help="time")
    common(p, "grid-function file for S_beta(t) u")

    p = sub.add_parser("regions", help="raster of sufficient/necessary thresholds",
                       formatter_class=fmt)
    p.add_argument("--d", type=int, default=1, help="dimension")
    p.add_argument("--beta", type=_exponent, default=Fraction(1, 2), help="beta > 0, beta != 1")
    p.add_argument("--resolution", type=int, default=101, help="raster points per axis (>= 11)")
    common(p, "raster CSV")

    p = sub.add_parser("sweep", help="lambda-sweep of a test family with power-law fits",
                       formatter_class=fmt)
    p.add_argument("--family", choices=FAMILIES, default="scaled_bump", help="test family")
    p.add_argument("--d", type=int, default=1, help="dimension")
    p.add_argument("--beta", type=_exponent, default=Fraction(1, 2), help="beta > 0, beta != 1")
    p.add_argument("--p", type=_exponent, default=Fraction(4), help="space-time exponent")
    p.add_argument("--q", type=_exponent, default=Fraction(2), help="sequence exponent")
    p.add_argument("--s", type=float, default=0.0, help="regularity")
    p.add_argument("--alpha", type=float, default=None,
                   help="alpha < 1 (default 1 - beta/2 for beta <= 2, else 0)")
    p.add_argument("--lambdas", type=_float_list, default=[4.0, 8.0, 16.0, 32.0],
                   help="increasing sweep values (k for modulated_bump)")
    p.add_argument("--tolerance", type=float, default=0.1, help="slope tolerance in the report")
    p.add_argument("--report", default=None, help="fit report JSON (default: <out>.json)")
    common(p, "sweep CSV")

    p = sub.add_parser("nls4", help="solve the cubic fourth-order NLS and monitor its energies",
                       formatter_class=fmt)
    p.add_argument("--u0", default=None, help="initial data file; Gaussian if omitted")
    p.add_argument("--N", type=int, default=512, help="Gaussian data: samples")
    p.add_argument("--L", type=float, default=50.0, help="Gaussian data: box length")
    p.add_argument("--amplitude", type=float, default=1.0, help="Gaussian data: amplitude")
    p.add_argument("--scheme", choices=("splitstep", "picard"), default="splitstep",
                   help="time integrator")
    p.add_argument("--dt", type=float, default=1e-4, help="time step")
    p.add_argument("--T", type=float, default=0.1, help="final time")
    p.add_argument("--report", default="energy.csv", help="energy CSV")
    common(p, "trajectory file")

    p = sub.add_parser("verify", help="run the acceptance checks", formatter_class=fmt)
    p.add_argument("--checks", type=_int_list, default=None,
                   help="comma-separated check numbers (default: all)")
    common(p, "JSON summary of the checks")
    return ap


def _config_to_argv(path: str, parser: argparse.ArgumentParser) -> list:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    if not isinstance(data, dict) or "command" not in data:
        raise ConfigError("config", "expected an object with a 'command' field")
    cmd = data.pop("command")
    if cmd not in COMMANDS:
        raise ConfigError("command", f"unknown command {cmd!r}")
    sub = _subparser(parser, cmd)
    flags = {a.dest: a for a in sub._actions if a.option_strings}
    flags.pop("help", None)
    unknown = sorted(set(data) - set(flags))
    if unknown:
        raise ConfigError(unknown[0], f"unknown key for {cmd!r} (allowed: {sorted(flags)})")
    argv = [cmd]
    for key, val in data.items():
        flag = flags[key].option_strings[0]
        if isinstance(val, list):
            val = ",".join(str(v) for v in val)
        argv += [flag, str(val)]
    return argv


def _subparser(parser, cmd):
    for a in parser._actions:
        if isinstance(a, argparse._SubParsersAction):
            return a.choices[cmd]
    raise KeyError(cmd)


def parse_config(argv) -> RunConfig:
    """Flags or ``--config file.json`` to a validated :class:`RunConfig`."""
    parser = build_parser()
    argv = list(argv)
    ns = _parse(parser, argv)
    if ns.config:
        if ns.command:
            raise ConfigError("config", "give either a command with flags or --config, not both")
        ns = _parse(parser, _config_to_argv(ns.config, parser))
    if not ns.command:
        raise ConfigError("command", f"missing command (one of {', '.join(COMMANDS)})")
    params = {k: v for k, v in vars(ns).items() if k not in ("command", "config", "seed")}
    outputs = {k: params.pop(k) for k in list(params) if k in OUTPUT_KEYS}
    cfg = RunConfig(ns.command, params, ns.seed, outputs)
    validate(cfg)
    return cfg


def _parse(parser, argv):
    try:
        return parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:
            raise
        raise ConfigError("arguments", "could not parse the command line") from None


# ---------------------------------------------------------------- validation


def _pow2(name, n):
    if n < 1 or n & (n - 1):
        raise ConfigError(name, f"must be a power of two, got {n}")


def _exp(name, v):
    if not v >= 1:
        raise ConfigError(name, f"must lie in [1, inf], got {v}")


def validate(cfg: RunConfig) -> None:
    P, c = cfg.params, cfg.command
    if "d" in P and P["d"] < 1:
        raise ConfigError("d", "must be >= 1")
    if "N" in P:
        _pow2("N", P["N"])
    if "L" in P and not P["L"] > 0:
        raise ConfigError("L", "must be positive")
    for k in ("p", "q"):
        if k in P:
            _exp(k, P[k])
    if P.get("alpha") is not None and not P["alpha"] < 1:
        raise ConfigError("alpha", "must be < 1")
    if "beta" in P:
        if not P["beta"] > 0:
            raise ConfigError("beta", "must be positive")
        if c in ("regions", "sweep") and P["beta"] == 1:
            raise ConfigError("beta", "beta=1 excluded (wave case)")
    if c == "regions" and P["resolution"] < 11:
        raise ConfigError("resolution", "must be >= 11")
    if c == "sweep":
        lams = P["lambdas"]
        if len(lams) < 4:
            raise ConfigError("lambdas", "a sweep needs at least four values")
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise ConfigError("lambdas", "values must be strictly increasing")
        if P["beta"] == math.inf:
            raise ConfigError("beta", "must be finite")
        if not cfg.outputs.get("out"):
            raise ConfigError("out", "sweep needs --out")
    if c == "nls4":
        if not (P["dt"] > 0 and P["T"] > 0):
            raise ConfigError("dt", "dt and T must be positive")
        n = P["T"] / P["dt"]
        if abs(n - round(n)) > 1e-9 * n:
            raise ConfigError("T", "must be an integer multiple of dt")
    if c in ("norm", "propagate", "regions") and not cfg.outputs.get("out"):
        raise ConfigError("out", f"{c} needs --out")
    if c == "verify" and P.get("checks"):
        from .acceptance import CHECKS
        bad = [v for v in P["checks"] if v not in CHECKS]
        if bad:
            raise ConfigError("checks", f"unknown check numbers {bad}")


# ---------------------------------------------------------------- running


class _Staged:
    """Outputs held in memory until the run succeeds, then written atomically."""

    def __init__(self):
        self.items: list[tuple[Path, bytes]] = []

    def add(self, path, data: bytes):
        self.items.append((Path(path), data))

    def text(self, path, text: str):
        self.add(path, text.encode())

    def json(self, path, obj):
        self.text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def commit(self) -> dict:
        done = []
        try:
            for path, data in self.items:
                io.atomic_write_bytes(path, data)
                done.append(path)
        except BaseException:
            for path in done:
                path.unlink(missing_ok=True)
            raise
        return {str(p): io.sha256_file(p) for p in done}


def _input_function(cfg: RunConfig, key: str = "input"):
    from .grid import Grid, load_gridfunction, random_bandlimited

    P = cfg.params
    if P.get(key):
        return load_gridfunction(P[key])
    rng = np.random.default_rng(cfg.seed)
    return random_bandlimited(Grid(P["d"], P["N"], P["L"]), rng, fraction=0.5)


def _gridfunction_bytes(gf) -> bytes:
    import tempfile

    from .grid import save_gridfunction

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "gf.bin"
        save_gridfunction(gf, path)
        return path.read_bytes()


def _run_bapu(cfg, out: _Staged):
    from .frequency_partition import AlphaParams, build_bapu, export_bapu
    from .grid import Grid
    import tempfile

    P = cfg.params
    bapu = build_bapu(AlphaParams(P["alpha"], P["d"]), Grid(P["d"], P["N"], P["L"]))
    with tempfile.TemporaryDirectory() as tmp:
        j, b = Path(tmp) / "m.json", Path(tmp) / "w.bin"
        export_bapu(bapu, j, b)
        out.add(cfg.outputs["out_json"], j.read_bytes())
        out.add(cfg.outputs["out_bin"], b.read_bytes())
    return EXIT_OK, {"windows": len(bapu), "overlap": bapu.overlap,
                     "partition_error": bapu.partition_error()}


def _run_norm(cfg, out: _Staged):
    from .frequency_partition import AlphaParams, build_bapu
    from .spaces import ExponentTuple, alpha_mod_norm, lp_norm, plancherel_norm, sobolev_norm

    P = cfg.params
    f = _input_function(cfg)
    p, q = float(P["p"]), float(P["q"])
    t = ExponentTuple(f.d, 2.0, p, q, P["s"], P["alpha"])
    bapu = build_bapu(AlphaParams(P["alpha"], f.d), f.grid)
    tup = [f.d, p, q, P["s"], P["alpha"]]
    rows = [tup + ["lp", lp_norm(f, p)],
            tup + ["plancherel_l2", plancherel_norm(f)],
            tup + ["sobolev", sobolev_norm(f, P["s"], p)],
            tup + ["alpha_modulation", alpha_mod_norm(f, t, bapu)]]
    out.text(cfg.outputs["out"], io.csv_text(["d", "p", "q", "s", "alpha", "norm", "value"], rows))
    return EXIT_OK, {"rows": len(rows)}


def _run_propagate(cfg, out: _Staged):
    from .propagator import propagate

    P = cfg.params
    f = _input_function(cfg)
    g = propagate(f, float(P["beta"]), P["t"])
    out.add(cfg.outputs["out"], _gridfunction_bytes(g))
    return EXIT_OK, {"N": g.grid.N, "L": g.grid.L}


def _run_regions(cfg, out: _Staged):
    P = cfg.params
    cells = regions.region_grid(P["d"], P["beta"], P["resolution"])
    rows = [c.row() for col in cells for c in col]
    out.text(cfg.outputs["out"], io.csv_text(regions.CSV_HEADER, rows))
    return EXIT_OK, {"cells": len(rows)}


def _run_sweep(cfg, out: _Staged):
    from . import experiments as ex
    from .spaces import ExponentTuple

    P = cfg.params
    beta = float(P["beta"])
    alpha = ex.canonical_alpha(beta) if P["alpha"] is None else P["alpha"]
    t = ExponentTuple(P["d"], beta, float(P["p"]), float(P["q"]), P["s"], alpha)
    sw = ex.scaling_sweep(P["family"], t, P["lambdas"])
    out.text(cfg.outputs["out"], io.csv_text(sw.CSV_HEADER, sw.csv_rows()))
    report = sweep_report(sw, P)
    path = cfg.outputs.get("report") or str(Path(cfg.outputs["out"]).with_suffix(".json"))
    cfg.outputs["report"] = path
    out.json(path, report)
    return (EXIT_OK if report["passed"] else EXIT_CHECK), {"passed": report["passed"]}


def sweep_report(sw, P: dict) -> dict:
    """Fits, residuals, theory thresholds and the pass/fail verdict of a sweep.

    The forced regularity is ``s + slope(lhs/rhs)``: the smallest ``s`` for which
    the ratio stays bounded along the family.  It must not exceed the
    sufficient threshold; at the canonical alpha it should also match the
    family's own lower bound.
    """
    from . import experiments as ex

    t = sw.exponents
    d, beta, p, q = t.d, P["beta"], P["p"], P["q"]
    tol = P["tolerance"]
    forced = t.s + sw.ratio_fit.slope
    suf = regions.sufficient_threshold(d, beta, p, q)
    nec = regions.necessity_threshold(d, beta, p, q)
    checks = {"below_sufficient": bool(forced <= float(suf.threshold) + tol)}
    fam_th = None
    if math.isclose(t.alpha, ex.canonical_alpha(float(beta)), abs_tol=1e-14):
        fam_th = ex.family_theory(d, float(beta), p, q).get(sw.family)
        if fam_th is not None:
            checks["matches_family_bound"] = bool(abs(forced - fam_th[1]) <= tol)

    def fit(f):
        return {"slope": f.slope, "intercept": f.intercept, "max_residual": f.max_residual}

    xs = np.log([r.scale for r in sw.rows])
    resid = np.log([r.ratio for r in sw.rows]) - (sw.ratio_fit.slope * xs + sw.ratio_fit.intercept)
    return {
        "family": sw.family,
        "exponents": {"d": d, "beta": _jsonable(beta), "p": _jsonable(p), "q": _jsonable(q),
                      "s": t.s, "alpha": t.alpha},
        "fit": {"lhs": fit(sw.lhs_fit), "rhs": fit(sw.rhs_fit), "ratio": fit(sw.ratio_fit)},
        "residuals": [float(r) for r in resid],
        "forced_s": forced,
        "theory": {"sufficient_s": float(suf.threshold), "sufficient_label": suf.label,
                   "sufficient_boundary": suf.boundary, "necessary_s": float(nec),
                   "family_bound": None if fam_th is None
                   else {"formula": fam_th[0], "value": fam_th[1]}},
        "tolerance": tol,
        "checks": checks,
        "passed": all(checks.values()),
        "meta": _jsonable_meta(sw.meta),
    }


def _jsonable_meta(meta):
    return json.loads(json.dumps(meta, default=float))


def _run_nls4(cfg, out: _Staged):
    from . import nls4
    from .grid import Grid, load_gridfunction, sample

    P = cfg.params
    if P["u0"]:
        u0 = load_gridfunction(P["u0"])
    else:
        a = P["amplitude"]
        u0 = sample(Grid(1, P["N"], P["L"]), lambda x: a * np.exp(-x * x / 2).astype(complex))
    scfg = nls4.SolverConfig(u0.grid, P["dt"], P["T"], scheme=P["scheme"])
    traj = nls4.solve(u0, scfg)
    rep = nls4.energy_report(traj)
    C = nls4.calibrate_gronwall_constant(rep)
    verdict = nls4.gronwall_monitor(rep, C)
    out.text(cfg.outputs["report"], io.csv_text(rep.CSV_HEADER, rep.csv_rows(C)))
    if cfg.outputs.get("out"):
        import tempfile

        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "traj.bin"
            traj.save(path)
            out.add(cfg.outputs["out"], path.read_bytes())
    return EXIT_OK, {"mass_drift": rep.mass_drift(), "energy_drift": rep.energy_drift(),
                     "gronwall": {"passed": verdict.passed, "rate": verdict.rate, "C": C}}


def _run_verify(cfg, out: _Staged):
    from .acceptance import run_checks

    nums = cfg.params.get("checks") or None
    results = run_checks(nums, echo=lambda s: print(s, file=sys.stderr))
    summary = [{"number": r.number, "title": r.title, "passed": r.passed,
                "detail": json.loads(json.dumps(r.detail, default=str))} for r in results]
    if cfg.outputs.get("out"):
        out.json(cfg.outputs["out"], summary)
    ok = all(r.passed for r in results)
    return (EXIT_OK if ok else EXIT_CHECK), {"passed": [r.number for r in results if r.passed],
                                             "failed": [r.number for r in results if not r.passed]}


RUNNERS = {"bapu": _run_bapu, "norm": _run_norm, "propagate": _run_propagate,
           "regions": _run_regions, "sweep": _run_sweep, "nls4": _run_nls4,
           "verify": _run_verify}


def versions() -> dict:
    return {"alphamod": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run(cfg: RunConfig) -> tuple[int, dict]:
    """Dispatch, commit outputs atomically and return ``(exit code, manifest)``."""
    staged = _Staged()
    code, summary = RUNNERS[cfg.command](cfg, staged)
    hashes = staged.commit()
    manifest = {"command": cfg.command, "inputs": cfg.as_dict()["params"], "seed": cfg.seed,
                "versions": versions(), "outputs": hashes, "summary": summary,
                "exit_code": code}
    if cfg.outputs.get("manifest"):
        io.atomic_write_json(Path(cfg.outputs["manifest"]), manifest)
    return code, manifest


def main(argv: Optional[list] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        code, manifest = run(cfg)
    except (ConfigError, ValueError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, RuntimeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps(manifest, indent=2, sort_keys=True, default=str))
    return code


if __name__ == "__main__":
    sys.exit(main())
