"""Command-line experiment runner.

Usage::

    vplinear --config run.ini --out results/ penrose check

Exit status: 0 when every verdict passes, 1 when a verdict fails, 2 on a
configuration error (nothing is written), 3 on a numerical failure (the
artifacts written so far are kept next to a ``FAILED.json`` marker).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import ConfigError, DomainError, VPError

__all__ = ["main", "main_exit", "build_equilibrium", "COMMANDS"]

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

COMMANDS = {
    "symbols": ["eval"],
    "penrose": ["check"],
    "dispersion": ["trace"],
    "kernel": ["decay"],
    "evolve": [],
}


# ------------------------------------------------------------------ output

def _num(x):
    """Shortest round-trip text for a float; deterministic across runs."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


class Artifacts:
    """Collects output files and writes them (with schema and manifest) in order."""

    def __init__(self, out: Path):
        self.out = out
        self.files: dict[str, bytes] = {}
        self.schema: dict[str, dict] = {}

    def csv(self, name, columns, rows, doc):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([c for c, _ in columns])
        for row in rows:
            w.writerow([v if isinstance(v, str) else _num(v) for v in row])
        self._put(name, buf.getvalue().encode())
        self.schema[name] = {"description": doc, "columns": dict(columns)}

    def json(self, name, obj, doc):
        text = json.dumps(_jsonable(obj), indent=1, sort_keys=True) + "\n"
        self._put(name, text.encode())
        self.schema[name] = {"description": doc}

    def _put(self, name, data):
        self.files[name] = data
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / name).write_bytes(data)

    def finish(self, manifest: dict):
        self.json("schema.json", self.schema, "Column documentation for every file in this directory.")
        manifest = dict(manifest)
        manifest["artifacts"] = {k: hashlib.sha256(v).hexdigest() for k, v in sorted(self.files.items())}
        self.out.mkdir(parents=True, exist_ok=True)
        text = json.dumps(_jsonable(manifest), indent=1, sort_keys=True) + "\n"
        (self.out / "manifest.json").write_text(text)


# ------------------------------------------------------------ equilibrium

def build_equilibrium(cfg: ExperimentConfig):
    """Equilibrium described by the ``[equilibrium]`` section."""
    from .equilibrium import load_custom, make_custom, make_maxwellian, make_power_law, two_stream_table

    e = cfg.equilibrium
    kw = {} if e.R0 is None else {"R0": e.R0}
    if e.kind == "maxwellian":
        return make_maxwellian(e.d, **kw)
    if e.kind == "power_law":
        return make_power_law(e.d, e.m, **kw)
    if e.kind == "two_stream":
        s, F = two_stream_table(e.separation)
        return make_custom(1, s, F, name="two_stream", **kw)
    path = cfg.resolve(e.table)
    try:
        return load_custom(path, e.d, **kw)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"equilibrium table {path}: {exc}") from None


def _read_queries(cfg: ExperimentConfig):
    if not cfg.symbols.queries:
        raise ConfigError("[symbols] queries is required for symbols eval")
    path = cfg.resolve(cfg.symbols.queries)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read queries {path}: {exc}") from None
    rows = []
    for k, row in enumerate(csv.reader(io.StringIO(text))):
        if not row or row[0].strip().startswith("#"):
            continue
        try:
            vals = [float(v) for v in row]
        except ValueError:
            if k == 0:
                continue  # header
            raise ConfigError(f"{path}: line {k + 1} is not numeric") from None
        if len(vals) != 3:
            raise ConfigError(f"{path}: line {k + 1} needs re_z, im_z, xi")
        rows.append(vals)
    if not rows:
        raise ConfigError(f"{path}: no queries")
    return rows, hashlib.sha256(text.encode()).hexdigest()


# ------------------------------------------------------------- pipelines

def _run_symbols(cfg, eq, art, opts, queries):
    from .symbols import SymbolQuery, evaluate

    rtol = opts.rtol if opts.rtol is not None else cfg.symbols.rtol

    def one(q):
        re, im, xi = q
        try:
            v = evaluate(eq, SymbolQuery(complex(re, im), xi, rtol))
        except DomainError:
            return (re, im, xi) + (math.nan,) * 7 + ("domain_error",)
        return (re, im, xi, v.m_vp.real, v.m_vp.imag, v.m_vb.real, v.m_vb.imag,
                v.m_ke.real, v.m_ke.imag, v.error, "ok")

    with ThreadPoolExecutor(opts.threads) as pool:
        rows = list(pool.map(one, queries))
    cols = [("re_z", "Re z"), ("im_z", "Im z"), ("xi", "|xi|"),
            ("re_m_vp", "Re m_VP"), ("im_m_vp", "Im m_VP"), ("re_m_vb", "Re m_VB"), ("im_m_vb", "Im m_VB"),
            ("re_m_ke", "Re m_KE"), ("im_m_ke", "Im m_KE"),
            ("error", "estimated quadrature error"), ("status", "ok or domain_error")]
    art.csv("symbols.csv", cols, rows, "Symbols at the queried points.")
    bad = sum(r[-1] != "ok" for r in rows)
    verdict = "pass" if bad == 0 else "fail"
    art.json("symbols_summary.json", {"n_queries": len(rows), "domain_errors": bad, "rtol": rtol,
                                      "verdict": verdict}, "Counts and verdict.")
    return verdict


def _run_penrose(cfg, eq, art, opts):
    from .penrose import check_stability, default_radii

    p = cfg.penrose
    radii = list(p.radii) or default_radii(p.n_radii, p.radius_min, p.radius_max)
    rep = check_stability(eq, radii, p.tau_max, p.gamma_max, workers=opts.threads, keep_curve=p.curve)
    h1 = []
    for r in rep.h1:
        rec = asdict(r)
        rec.pop("curve")
        h1.append(rec)
    verdict = "pass" if rep.verdict == p.expect else "fail"
    art.json("penrose.json", {"h1": h1, "h2": asdict(rep.h2), "verdict": rep.verdict, "expected": p.expect,
                              "check": verdict}, "Nyquist (h1) and zero-structure (h2) results.")
    if p.curve:
        rows = []
        for r in rep.h1:
            for seg, w, val in r.curve:
                z = w * r.xi_norm
                rows.append((r.xi_norm, seg, z.real, z.imag, val.real, val.imag))
        art.csv("nyquist.csv", [("xi", "|xi|"), ("segment", "contour piece 0-3, 3 is the imaginary axis"),
                                ("re_z", "Re z"), ("im_z", "Im z"),
                                ("re_value", "Re (1 - m_VP)"), ("im_value", "Im (1 - m_VP)")],
                rows, "Nyquist curve points.")
    return verdict


def _run_dispersion(cfg, eq, art, opts):
    from .dispersion import branch_quadratic_fit, damping_flatness_check, track_branch

    p = cfg.dispersion
    r = np.linspace(p.r_min, p.r_max, p.n_r)
    br = track_branch(eq, 1, r, eps3=p.eps3, check_window=p.check_every if p.check_every else False)
    rows = [(s.r, s.Z.real, s.Z.imag, s.a.real, s.a.imag, s.newton_residual, s.log_abs_gamma,
             "" if s.window_unique is None else str(bool(s.window_unique)).lower()) for s in br.samples]
    art.csv("branch.csv", [("r", "|xi|"), ("re_Z", "Re Z_+"), ("im_Z", "Im Z_+"), ("re_a", "Re a_+"),
                           ("im_a", "Im a_+"), ("residual", "Newton residual |g(Z)|"),
                           ("log_abs_gamma", "log |Re Z_+|"),
                           ("window_unique", "argument-principle uniqueness check (blank if skipped)")],
            rows, "Langmuir branch Z_+ and residue amplitude a_+.")
    fit = branch_quadratic_fit(br, p.fit_r_max)
    target = 1.5 * eq.C
    rel = abs(fit["c2"] / target - 1)
    flat = damping_flatness_check(br, p.r_max)
    unique_ok = all(s.window_unique is not False for s in br.samples)
    ok = rel <= p.c2_tolerance and flat["all_damped"] and unique_ok
    verdict = "pass" if ok else "fail"
    art.json("dispersion_summary.json", {
        "c2_fit": fit, "c2_target": target, "c2_relative_error": rel, "c2_tolerance": p.c2_tolerance,
        "flatness": flat, "window_unique": unique_ok, "certified_radius": br.certified_radius,
        "verdict": verdict}, "Bohm-Gross fit and damping checks.")
    return verdict


def _dump_rows(t_grid, want):
    """Nearest grid time for each requested dump time."""
    out = []
    for tw in want:
        k = int(np.argmin(np.abs(t_grid - tw)))
        out.append((k, float(t_grid[k])))
    return out


def _t_grid(sec):
    return np.geomspace(sec.t_min, sec.t_max, sec.n_t)


def _run_kernel(cfg, eq, art, opts):
    from .kernel import decompose_kernel, kernel_reports

    k = cfg.kernel
    dec = decompose_kernel(eq, _t_grid(k), n_xi=k.n_xi, xi_max=k.xi_max, delta=k.delta, h=k.h, levels=k.levels)
    pieces = ["G", "GR", "GS_plus", "GS_minus"]
    cols = [("t", "time")] + [(f"{p}_{n}", f"||{p}(t)||_{n}") for p in pieces for n in ("L1", "L2", "Linf")]
    rows = [[t] + [dec.norms[p][n][i] for p in pieces for n in ("L1", "L2", "Linf")]
            for i, t in enumerate(dec.t_grid)]
    art.csv("kernel_norms.csv", cols, rows,
            "Kernel norms; L2 by Plancherel on the frequency grid, L1 on the truncated physical grid.")
    rep = kernel_reports(dec, k.fit_window, k.slope_tolerance, k.l2_tolerance, k.regular_tolerance)
    info = {key: v for key, v in dec.info.items() if key != "gs_hat"}
    art.json("kernel_summary.json", {
        "d": dec.d, "delta": dec.delta, "info": info, "reports": [r.to_dict() for r in rep["reports"]],
        "l2": rep["l2"], "slopes": dec.slopes(k.fit_window), "verdict": rep["verdict"]},
        "Fitted slopes and verdicts.")
    for i, tt in _dump_rows(dec.t_grid, k.dump_times):
        gs = (dec.GS_plus[i] + dec.GS_minus[i]).real
        rows = zip(dec.x_grid, dec.G[i], dec.GR[i], gs)
        art.csv(f"kernel_field_t{_num(tt)}.csv", [("x", "|x|"), ("G", "G(t, x)"), ("GR", "G^R(t, x)"),
                                                  ("GS", "G^S_+ + G^S_- at (t, x)")],
                rows, f"Radial kernel fields at t = {_num(tt)}.")
    return rep["verdict"]


def _run_evolve(cfg, eq, art, opts):
    from .evolution import InitialData, decompose_density, density_reports, kernel_route_check, solve_density
    from .kernel import select_delta

    e = cfg.evolve
    data = InitialData(e.amplitude, e.x_center, e.x_width, e.v_width)
    run = solve_density(eq, data, _t_grid(e), n_xi=e.n_xi, xi_max=e.xi_max, h=e.h, levels=e.levels)
    delta = e.delta
    delta_info = None
    if delta is None:
        drep = select_delta(eq)
        if not drep.ok:
            from .errors import ConvergenceError

            raise ConvergenceError(f"no admissible delta: {drep.attempts}")
        delta, delta_info = drep.delta, drep.attempts
    decompose_density(run, eq, data, delta)
    comps = ["rho", "S", "rhoR", "rhoS"]
    cols = [("t", "time")] + [(f"{c}_{n}", f"||{c}(t)||_{n}") for c in comps for n in ("L1", "L2", "Linf")]
    rows = [[t] + [run.norms[c][n][i] for c in comps for n in ("L1", "L2", "Linf")]
            for i, t in enumerate(run.t_grid)]
    art.csv("density_norms.csv", cols, rows,
            "Density norms; L2 by Plancherel on the frequency grid, L1 on the truncated physical grid.")
    reps = density_reports(run, e.fit_window, e.slope_tolerance)
    comp_ok = run.info["sum_residual"] <= e.composition_tolerance
    checks = {"composition_residual": run.info["sum_residual"], "composition_tolerance": e.composition_tolerance,
              "realness_residual": run.info["realness_residual"]}
    ok = comp_ok and reps[0].verdict == "pass" and reps[1].verdict == "pass"
    if e.kernel_check:
        gap = kernel_route_check(eq, data, run)
        checks.update({"kernel_route_gap": gap, "kernel_route_tolerance": e.kernel_check_tolerance})
        ok = ok and gap <= e.kernel_check_tolerance
    verdict = "pass" if ok else "fail"
    art.json("decay_reports.json", {
        "d": run.d, "delta": delta, "delta_report": delta_info, "tail": run.info["tail"],
        "reports": [r.to_dict() for r in reps], "checks": checks,
        "note": "the k = 0 report (third entry) is informational; the k = 1 target decides",
        "verdict": verdict}, "Density decay fits and consistency checks.")
    for i, tt in _dump_rows(run.t_grid, e.dump_times):
        rs = (run.rhoS_plus[i] + run.rhoS_minus[i]).real
        rows = zip(run.x_grid, run.rho[i].real, run.S[i].real, run.rhoR[i].real, rs)
        art.csv(f"density_field_t{_num(tt)}.csv",
                [("x", "|x - x0|"), ("rho", "rho"), ("S", "free-streaming S"), ("rhoR", "rho^R"),
                 ("rhoS", "rho^S_+ + rho^S_-")], rows, f"Radial density fields at t = {_num(tt)}.")
    return verdict


# ------------------------------------------------------------------ parser

def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS, help="INI configuration")
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--threads", metavar="N", type=int, default=argparse.SUPPRESS, help="worker threads")
    common.add_argument("--rtol", metavar="X", type=float, default=argparse.SUPPRESS,
                        help="relative tolerance for symbol quadrature")
    ap = argparse.ArgumentParser(prog="vplinear", parents=[common],
                                 description="Linear Vlasov-Poisson analysis runner.")
    ap.add_argument("--version", action="version", version=f"vplinear {__version__}")
    sub = ap.add_subparsers(dest="group", required=True)
    for group, actions in COMMANDS.items():
        gp = sub.add_parser(group, parents=[common])
        if actions:
            gsub = gp.add_subparsers(dest="action", required=True)
            for a in actions:
                gsub.add_parser(a, parents=[common])
    return ap


def main(argv=None) -> int:
    """Entry point; returns the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = _parser().parse_args(argv)
    except SystemExit as exc:  # argparse: status 2 on usage errors, 0 for --help
        return int(exc.code or 0)
    command = ns.group + (f" {ns.action}" if getattr(ns, "action", None) else "")
    opts = argparse.Namespace(threads=getattr(ns, "threads", 1), rtol=getattr(ns, "rtol", None))
    out = Path(getattr(ns, "out", "vplinear-out"))
    try:
        if not hasattr(ns, "config"):
            raise ConfigError("--config is required")
        if opts.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if opts.rtol is not None and not (opts.rtol > 0 and math.isfinite(opts.rtol)):
            raise ConfigError("--rtol must be positive")
        cfg, digest = load_config(ns.config)
        if opts.rtol is not None:
            cfg = replace(cfg, symbols=replace(cfg.symbols, rtol=opts.rtol))
        inputs = {"config": digest}
        queries = None
        if ns.group == "symbols":
            queries, inputs["queries"] = _read_queries(cfg)
        if cfg.equilibrium.kind == "table":
            inputs["table"] = hashlib.sha256(cfg.resolve(cfg.equilibrium.table).read_bytes()).hexdigest()
        eq = build_equilibrium(cfg)
    except ConfigError as exc:
        print(f"vplinear: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"vplinear: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (VPError, ArithmeticError, ValueError) as exc:
        print(f"vplinear: numerical failure building the equilibrium: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    art = Artifacts(out)
    manifest = {
        "command": command,
        "inputs_sha256": inputs,
        "config": cfg.to_ini(),
        "equilibrium": eq.describe(),
        "tolerances": cfg.tolerances(),
        "flags": {"threads": opts.threads, "rtol": opts.rtol},
        "versions": {"vplinear": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
    }
    runners = {"symbols": lambda: _run_symbols(cfg, eq, art, opts, queries),
               "penrose": lambda: _run_penrose(cfg, eq, art, opts),
               "dispersion": lambda: _run_dispersion(cfg, eq, art, opts),
               "kernel": lambda: _run_kernel(cfg, eq, art, opts),
               "evolve": lambda: _run_evolve(cfg, eq, art, opts)}
    try:
        verdict = runners[ns.group]()
    except (VPError, ArithmeticError, ValueError, FloatingPointError) as exc:
        art.json("FAILED.json", {"command": command, "error": type(exc).__name__, "message": str(exc)},
                 "Failure marker: the run stopped with a numerical error.")
        art.finish({**manifest, "status": "error"})
        print(f"vplinear: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    art.finish({**manifest, "status": verdict})
    print(f"{command}: {verdict}")
    return EXIT_PASS if verdict == "pass" else EXIT_FAIL


def main_exit():  # pragma: no cover
    """Console-script wrapper: exit with :func:`main`'s status."""
    sys.exit(main())
