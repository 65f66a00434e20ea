"""Command line entry point: ``kdblockade {blockade,simulate,wigner,design,sweep}``.

Exit codes: 0 success, 2 bad arguments or config, 3 integration failure,
4 truncation tail violation, 5 state too large for a Wigner grid.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from .amplitudes import amplitude_map, blockade_detunings, write_amplitude_map
from .config import ConfigError, SweepConfig, build_scenario, load_config
from .design import design_report
from .dynamics import StateVector1D, bell_fidelity, integrate
from .errors import DomainError, IntegrationError, KDError, TruncationError
from .phasespace import cat_metrics, marginals, synthesize, wigner
from .specfun import RealGrid

EXIT_OK, EXIT_USAGE, EXIT_INTEGRATION, EXIT_TRUNCATION, EXIT_WIGNER_CAP = 0, 2, 3, 4, 5
WIGNER_N_TOP_CAP = 400


def _provenance(digest: str) -> str:
    return f"kdblockade {__version__} config-sha256={digest}"


def _fmt(x) -> str:
    return f"{x:.17g}"


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _out_dir(args, cfg=None) -> Path:
    base = Path(args.output_dir) if args.output_dir else Path(cfg.output.directory if cfg else ".")
    base.mkdir(parents=True, exist_ok=True)
    return base


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


# -- blockade --------------------------------------------------------------


def cmd_blockade(args) -> int:
    try:
        roots = blockade_detunings(args.n, args.nm)
    except DomainError as exc:
        return _fail(EXIT_USAGE, str(exc))
    if roots.size == 0:
        return _fail(EXIT_USAGE, f"no blockade roots for n_bk={args.n}, N_m={args.nm}")
    print(f"# blockade detunings for |{args.n}> -> |{args.n + args.nm}> (N_m={args.nm})")
    for i, dp in enumerate(roots, 1):
        print(f"{i}\t{dp:.6f}\teta={(args.nm + dp) / 2:.6f}")
    if args.map:
        lo, hi = args.dp_range
        dps, table = amplitude_map(args.map_n_max, (lo, hi), args.nm, args.samples)
        digest = hashlib.sha256(f"blockade-map {args.nm} {args.map_n_max} {lo} {hi} {args.samples}".encode()).hexdigest()
        path = _out_dir(args) / args.map
        write_amplitude_map(path, dps, table, _provenance(digest))
        print(f"wrote {path}")
    return EXIT_OK


# -- simulate --------------------------------------------------------------


def _state_doc(traj, scenario, digest) -> dict:
    final = traj.final
    c = final.amplitudes
    doc = {
        "tool": f"kdblockade {__version__}",
        "config_sha256": digest,
        "dimension": 2 if scenario.is_2d else 1,
        "time": float(final.time),
        "shape": list(c.shape),
        "amplitudes": np.stack([c.real, c.imag], axis=-1).tolist(),
    }
    r = scenario.resonance
    if scenario.is_2d:
        doc["resonance"] = {"ladder": [r.n_x, r.n_y], "delta_px": r.delta_px, "delta_py": r.delta_py, "trap_ratio": r.trap_ratio}
    else:
        doc["resonance"] = {"N_m": r.N_m, "delta_p": r.delta_p}
    return doc


def _summary(traj, scenario) -> dict:
    out = traj.summary()
    out["pulse"] = asdict(scenario.pulse)
    if scenario.is_2d:
        c = traj.final.amplitudes
        out["bell_fidelity"] = bell_fidelity(traj.final)
        out["P_2_2"] = float(abs(c[2, 2]) ** 2) if min(c.shape) > 2 else 0.0
    else:
        try:
            m = cat_metrics(traj.final, scenario.resonance)
            out["n_max"] = m.n_max
            out["width"] = m.width
            out["sub_poissonian"] = m.sub_poissonian
        except DomainError:
            out["n_max"] = 0
            out["width"] = None
    if "tuning" in scenario.extra:
        out["tuning"] = scenario.extra["tuning"]
    return out


def run_scenario(cfg, digest, out_dir: Path, prefix: str, write: bool = True, **overrides):
    """Build, integrate and (optionally) export one scenario; returns its summary dict."""
    scenario = build_scenario(cfg, **overrides)
    traj = integrate(scenario.initial, scenario.resonance, scenario.pulse, scenario.controls)
    summary = _summary(traj, scenario)
    summary["provenance"] = _provenance(digest)
    if write:
        if "csv" in cfg.output.formats:
            traj.to_csv(out_dir / f"{prefix}_trajectory.csv", _provenance(digest))
        if "json" in cfg.output.formats:
            _write_json(out_dir / f"{prefix}_summary.json", summary)
        _write_json(out_dir / f"{prefix}_final_state.json", _state_doc(traj, scenario, digest))
    return summary


def _load(path):
    try:
        return load_config(path), None
    except FileNotFoundError:
        return None, f"config file {path} not found"
    except (ValidationError, ConfigError) as exc:
        return None, f"invalid config {path}:\n{exc}"


def cmd_simulate(args) -> int:
    loaded, err = _load(args.config)
    if err:
        return _fail(EXIT_USAGE, err)
    cfg, digest = loaded
    out = _out_dir(args, cfg)
    start = time.perf_counter()
    try:
        summary = run_scenario(cfg, digest, out, cfg.output.prefix)
    except TruncationError as exc:
        return _fail(EXIT_TRUNCATION, str(exc))
    except IntegrationError as exc:
        return _fail(EXIT_INTEGRATION, str(exc))
    except DomainError as exc:
        return _fail(EXIT_USAGE, str(exc))
    runtime = time.perf_counter() - start
    brief = {k: summary[k] for k in ("peak", "n_max", "width", "max_norm_drift", "bell_fidelity", "P_2_2") if k in summary}
    pops = summary["final_populations"]
    if not isinstance(pops[0], list):
        brief["P"] = {n: p for n, p in enumerate(pops) if p > 1e-4}
    brief["runtime_s"] = round(runtime, 3)
    print(json.dumps(brief, default=_json_default))
    return EXIT_OK


# -- wigner ----------------------------------------------------------------


def _read_state(path):
    with open(path) as fh:
        doc = json.load(fh)
    arr = np.asarray(doc["amplitudes"], dtype=float)
    c = arr[..., 0] + 1j * arr[..., 1]
    if doc.get("dimension", 1) != 1:
        raise DomainError("Wigner grids are available for 1D states only")
    return StateVector1D(c, time=doc.get("time", 0.0)), doc


def cmd_wigner(args) -> int:
    try:
        state, doc = _read_state(args.state)
    except FileNotFoundError:
        return _fail(EXIT_USAGE, f"state file {args.state} not found")
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        return _fail(EXIT_USAGE, f"unreadable state file: {exc}")
    pops = state.populations()
    occupied = np.nonzero(pops > 1e-16)[0]
    n_top = int(occupied[-1]) if occupied.size else 0
    if n_top > WIGNER_N_TOP_CAP:
        return _fail(EXIT_WIGNER_CAP, f"highest occupied state {n_top} exceeds the Wigner cap {WIGNER_N_TOP_CAP}")
    t = state.time if args.time is None else args.time
    grid = RealGrid.for_states(n_top, spacing=args.spacing, margin=args.margin)
    try:
        psi = synthesize(state, t, grid)
    except KDError as exc:
        return _fail(EXIT_USAGE, str(exc))
    w = wigner(psi, p_max=args.p_max)
    pos, mom = marginals(w)
    digest = doc.get("config_sha256", "unknown")
    header = _provenance(digest)
    out = _out_dir(args)
    stem = args.prefix or Path(args.state).stem.replace("_final_state", "")
    if args.format == "binary":
        wpath = out / f"{stem}_wigner.bin"
        w.to_binary(wpath)
    else:
        wpath = out / f"{stem}_wigner.csv"
        w.to_csv(wpath, header)
    with open(out / f"{stem}_marginal_x.csv", "w", newline="\n") as fh:
        fh.write(f"# {header}\n# t = {_fmt(t)}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["q/x0", "position_density", "abs_psi_sq"])
        for q, a, b in zip(w.q, pos, psi.density()):
            wr.writerow([_fmt(q), _fmt(a), _fmt(b)])
    with open(out / f"{stem}_marginal_p.csv", "w", newline="\n") as fh:
        fh.write(f"# {header}\n# t = {_fmt(t)}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["p/hbar k0", "momentum_density"])
        for p, a in zip(w.p, mom):
            wr.writerow([_fmt(p), _fmt(a)])
    i0 = int(np.argmin(np.abs(w.q)))
    j0 = int(np.argmin(np.abs(w.p)))
    report = {
        "time": float(t),
        "n_top": n_top,
        "W_origin": float(w.W[i0, j0]),
        "W_min": float(w.W.min()),
        "W_max": float(w.W.max()),
        "integral": w.integral(),
        "position_marginal_total": float(np.sum(pos) * w.dq),
        "momentum_marginal_total": float(np.sum(mom) * w.dp),
        "output": str(wpath),
    }
    print(json.dumps(report))
    return EXIT_OK


# -- design ----------------------------------------------------------------


def cmd_design(args) -> int:
    loaded, err = _load(args.config)
    if err:
        return _fail(EXIT_USAGE, err)
    cfg, digest = loaded
    if cfg.mode != "physical":
        return _fail(EXIT_USAGE, "design needs a physical-mode config")
    try:
        particle, trap, kd = cfg.physical_specs()
        d = cfg.design
        report = design_report(particle, trap, kd, d.n_max, d.timescale_threshold, d.regime_factor, d.anharmonic_safety)
    except DomainError as exc:
        return _fail(EXIT_USAGE, str(exc))
    report["provenance"] = _provenance(digest)
    path = _out_dir(args, cfg) / f"{cfg.output.prefix}_design.json"
    _write_json(path, report)
    s = report["scales"]
    print(f"Omega_0 = {s['Omega_0']:.4g} rad/s, lambda_KD = {s['lambda_KD'] * 1e9:.1f} nm, "
          f"lambda_peak = {s['lambda_peak_dimless']:.4g} hbar*Omega_0")
    for link in report["timescales"]["links"]:
        mark = "ok" if link["passed"] else "FAIL"
        print(f"  {link['upper']} >> {link['lower']}: ratio {link['ratio']:.3g} [{mark}]")
    if report["regime"]:
        print(f"  regime: {report['regime']['regime']}")
    print(f"wrote {path}")
    return EXIT_OK


# -- sweep -----------------------------------------------------------------


def _sweep_row(job):
    cfg, digest, name, value = job
    try:
        summary = run_scenario(cfg, digest, Path("."), "", write=False, **{name: float(value)})
        return {"value": value, "status": "ok", "summary": summary}
    except (KDError, ValueError) as exc:
        return {"value": value, "status": f"{type(exc).__name__}: {exc}".replace("\n", " "), "summary": None}


def cmd_sweep(args) -> int:
    loaded, err = _load(args.config)
    if err:
        return _fail(EXIT_USAGE, err)
    cfg, digest = loaded
    spec = cfg.sweep
    if args.param:
        try:
            spec = SweepConfig(parameter=args.param, start=args.start, stop=args.stop, samples=args.samples)
        except ValidationError as exc:
            return _fail(EXIT_USAGE, str(exc))
    if spec is None:
        return _fail(EXIT_USAGE, "no sweep given (config 'sweep' block or --param/--start/--stop/--samples)")
    try:
        values = spec.values()
    except ConfigError as exc:
        return _fail(EXIT_USAGE, str(exc))
    jobs = [(cfg, digest, spec.parameter, float(v)) for v in values]
    workers = max(1, args.threads or 1)
    if workers == 1:
        rows = [_sweep_row(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    size = max((len(r["summary"]["final_populations"]) for r in rows if r["summary"]), default=0)
    flat = size and not isinstance(next(r for r in rows if r["summary"])["summary"]["final_populations"][0], list)
    path = _out_dir(args, cfg) / f"{cfg.output.prefix}_sweep_{spec.parameter}.csv"
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# {_provenance(digest)}\n")
        wr = csv.writer(fh, lineterminator="\n")
        pop_cols = [f"P_{n}" for n in range(size)] if flat else []
        wr.writerow([spec.parameter, "status", "lambda_peak_used", "max_norm_drift"] + pop_cols)
        for r in rows:
            s = r["summary"]
            if s is None:
                wr.writerow([_fmt(r["value"]), r["status"], "", ""] + [""] * len(pop_cols))
                continue
            pops = s["final_populations"] if flat else []
            wr.writerow([_fmt(r["value"]), "ok", _fmt(s["pulse"]["lambda_peak"]), _fmt(s["max_norm_drift"])] + [_fmt(p) for p in pops])
    ok = sum(r["status"] == "ok" for r in rows)
    print(f"{ok}/{len(rows)} rows succeeded; wrote {path}")
    return EXIT_OK if ok else EXIT_INTEGRATION


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    def global_flags(parser, suppress):
        # subcommands accept the flags too; SUPPRESS keeps them from resetting values given earlier
        dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        parser.add_argument("--threads", type=int, default=dflt(1), help="worker processes for sweeps")
        parser.add_argument(
            "--seed-irrelevant", action="store_true", default=dflt(False), help="reserved; the tool is deterministic"
        )
        parser.add_argument("--output-dir", default=dflt(None), help="directory for output files (overrides the config)")

    common = argparse.ArgumentParser(add_help=False)
    global_flags(common, suppress=True)

    p = argparse.ArgumentParser(prog="kdblockade", description="Kapitza-Dirac blockade ladder simulations.")
    global_flags(p, suppress=False)
    p.add_argument("--version", action="version", version=f"kdblockade {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("blockade", parents=[common], help="list blockade detunings")
    b.add_argument("--n", type=int, required=True, help="blockade state n_bk")
    b.add_argument("--nm", type=int, default=2, help="ladder step N_m")
    b.add_argument("--map", default=None, help="also write the amplitude map CSV to this file")
    b.add_argument("--map-n-max", type=int, default=20)
    b.add_argument("--dp-range", type=float, nargs=2, default=(-2.0, 2.0), metavar=("LO", "HI"))
    b.add_argument("--samples", type=int, default=401)
    b.set_defaults(func=cmd_blockade)

    s = sub.add_parser("simulate", parents=[common], help="integrate a scenario config")
    s.add_argument("config")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("wigner", parents=[common], help="Wigner function of a saved final state")
    w.add_argument("state", help="*_final_state.json written by simulate")
    w.add_argument("--time", type=float, default=None, help="evaluation time in trap periods (default: state time)")
    w.add_argument("--spacing", type=float, default=1.0 / 16, help="grid spacing in x0")
    w.add_argument("--margin", type=float, default=10.0, help="grid margin beyond the turning point, in x0")
    w.add_argument("--p-max", type=float, default=None, help="crop |p| (hbar k0)")
    w.add_argument("--format", choices=("csv", "binary"), default="csv")
    w.add_argument("--prefix", default=None)
    w.set_defaults(func=cmd_wigner)

    d = sub.add_parser("design", parents=[common], help="SI design report for a physical config")
    d.add_argument("config")
    d.set_defaults(func=cmd_design)

    sw = sub.add_parser("sweep", parents=[common], help="parallel parameter sweep")
    sw.add_argument("config")
    sw.add_argument("--param", choices=("lambda_peak", "delta_p", "tau_KD"), default=None)
    sw.add_argument("--start", type=float, default=None)
    sw.add_argument("--stop", type=float, default=None)
    sw.add_argument("--samples", type=int, default=None)
    sw.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.command == "sweep" and args.param and None in (args.start, args.stop, args.samples):
        return _fail(EXIT_USAGE, "--param needs --start, --stop and --samples")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
