"""Acceptance criteria 1-11.

Each test records a one-line PASS/FAIL verdict (printed in the terminal
summary) and then asserts it.  Runtime budgets are part of the verdict.
"""

import subprocess
import sys
import time

import numpy as np
import pytest

from acceptance_log import record
from oracles import landau_root, maxwell_mvp, right_half_plane_roots, two_stream_mvp
from vplinear.dispersion import branch_quadratic_fit, track_branch
from vplinear.equilibrium import make_custom, make_maxwellian, make_power_law, two_stream_table
from vplinear.evolution import InitialData, decompose_density, density_reports, solve_density
from vplinear.kernel import (
    decompose_kernel,
    ghat_contour,
    ghat_volterra_array,
    kernel_reports,
    resolvent_residual,
    select_delta,
    short_time_constant,
)
from vplinear.penrose import check_h1, check_h2
from vplinear.symbols import m_ke, m_vp

pytestmark = pytest.mark.slow

SLOPE_TIMES = np.geomspace(10, 500, 48)
WINDOW = (20.0, 500.0)


def _finish(n, ok, detail):
    record(n, ok, detail)
    assert ok, detail


def test_criterion_01_symbol_identities():
    start = time.perf_counter()
    rng = np.random.default_rng(20240601)
    eqs = [make_maxwellian(d) for d in (1, 2, 3)] + [make_power_law(d, 4.0) for d in (1, 2, 3)]
    worst_id = worst_h = 0.0
    n = 0
    for k in range(500):
        eq = eqs[k % len(eqs)]
        r = float(np.exp(rng.uniform(np.log(0.05), np.log(5.0))))
        z = complex(r * rng.uniform(-0.8 * eq.R0, 2.0), rng.uniform(-5.0, 5.0))
        ke = complex(m_ke(eq, z, r))
        vp = complex(m_vp(eq, z, r))
        worst_id = max(worst_id, abs(ke - (1 + z * z * vp)) / (1 + abs(ke)))
        for lam in (0.5, 2.0, 10.0):
            worst_h = max(worst_h, abs(complex(m_ke(eq, lam * z, lam * r)) - ke))
        n += 1
    elapsed = time.perf_counter() - start
    ok = worst_id <= 1e-10 and worst_h <= 1e-8 and elapsed < 60
    _finish(1, ok, f"{n} queries: identity {worst_id:.1e} (<=1e-10), homogeneity {worst_h:.1e} (<=1e-8), "
                   f"{elapsed:.0f} s (<60)")


def test_criterion_02_faddeeva_oracle():
    start = time.perf_counter()
    eq = make_maxwellian(1)
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        r = float(rng.uniform(0.05, 3.0))
        z = complex(r * rng.uniform(-0.9, 2.0), rng.uniform(-4.0, 4.0))
        ref = complex(maxwell_mvp(z, r))
        worst = max(worst, abs(complex(m_vp(eq, z, r)) - ref) / abs(ref))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 30
    _finish(2, ok, f"100 points: max relative gap {worst:.1e} (<=1e-8), {elapsed:.1f} s")


def test_criterion_03_h2_identities():
    start = time.perf_counter()
    parts = []
    ok = True
    for d in (1, 2, 3):
        rec = check_h2(make_maxwellian(d), np.linspace(-10, 10, 401))
        d2_ok = abs(rec.d2z_at_zero - rec.d2z_closed_form) <= 1e-6 * abs(rec.d2z_closed_form)
        good = (rec.zero_locations == [0.0] and abs(rec.dz_at_zero) <= 1e-8 and d2_ok
                and abs(rec.d2z_at_zero + 2) <= 1e-6 * 2)
        ok &= good
        parts.append(f"d={d}: zeros {rec.zero_locations}, dz {abs(rec.dz_at_zero):.0e}, "
                     f"d2z {rec.d2z_at_zero.real:.8f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    _finish(3, ok, "; ".join(parts) + f"; {elapsed:.1f} s")


def test_criterion_04_nyquist():
    start = time.perf_counter()
    recs = check_h1(make_maxwellian(1))
    wind = [r.winding_number for r in recs]
    certified = all(r.status == "certified" for r in recs)
    s, F = two_stream_table()
    ts = make_custom(1, s, F, name="two_stream")
    rec = check_h1(ts, [0.2])[0]
    roots = right_half_plane_roots(lambda z: 1 - two_stream_mvp(z, 0.2))
    elapsed = time.perf_counter() - start
    ok = (len(recs) == 24 and all(w == 0 for w in wind) and certified and rec.winding_number >= 1
          and rec.winding_number == len(roots) and elapsed < 60)
    _finish(4, ok, f"Maxwellian windings {sorted(set(wind))} at {len(recs)} radii (certified={certified}); "
                   f"two-stream winding {rec.winding_number}, oracle roots {len(roots)}; {elapsed:.0f} s (<60)")


def test_criterion_05_bohm_gross():
    start = time.perf_counter()
    r = np.linspace(0.005, 0.1, 20)
    cases = [("Maxwellian d=1", make_maxwellian(1)), ("Maxwellian d=2", make_maxwellian(2)),
             ("Maxwellian d=3", make_maxwellian(3)), ("power law d=1 m=4", make_power_law(1, 4.0))]
    parts = []
    ok = True
    for name, eq in cases:
        fit = branch_quadratic_fit(track_branch(eq, 1, r, check_window=False))
        rel = abs(fit["c2"] / (1.5 * eq.C) - 1)
        ok &= rel <= 0.01
        parts.append(f"{name}: c2/(1.5C) = {fit['c2'] / (1.5 * eq.C):.5f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 120
    _finish(5, ok, "; ".join(parts) + f" (1% tol); {elapsed:.1f} s")


def test_criterion_06_landau_root():
    start = time.perf_counter()
    br = track_branch(make_maxwellian(1), 1, np.linspace(0.01, 0.5, 50))
    Z = br.samples[-1].Z
    ref = landau_root(0.5)
    gap = abs(Z - ref)
    elapsed = time.perf_counter() - start
    ok = gap <= 1e-6 and elapsed < 30
    _finish(6, ok, f"Z_+(0.5) = {Z.real:.10f}{Z.imag:+.10f}i, oracle gap {gap:.1e} (<=1e-6); {elapsed:.1f} s")


def test_criterion_07_cross_route():
    start = time.perf_counter()
    eq = make_maxwellian(1)
    h = 0.01
    t = np.arange(0, 2001) * h
    xis = [0.1, 0.5, 1.0]
    times = [1.0, 5.0, 20.0]
    y, _ = ghat_volterra_array(eq, xis, t)
    worst = 0.0
    worst_res = 0.0
    for j, xi in enumerate(xis):
        worst_res = max(worst_res, resolvent_residual(eq, xi, t, y[:, j]))
        modes = ["contour"] + (["residue_plus_contour"] if xi <= 0.1 else [])
        for mode in modes:
            for s in ghat_contour(eq, xi, times, mode=mode):
                ref = y[int(round(s.t / h)), j]
                worst = max(worst, abs(s.ghat - ref) / max(abs(ref), 1e-300))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-4 and worst_res < 1e-6 and elapsed < 300
    _finish(7, ok, f"max relative gap {worst:.1e} (<=1e-4) over 9 points (+3 residue-mode); "
                   f"resolvent residual {worst_res:.1e} (<1e-6); {elapsed:.0f} s (<300)")


def test_criterion_08_short_time():
    start = time.perf_counter()
    rep = short_time_constant(make_maxwellian(1), xi_max=5.0, n_xi=101, T=1.0, h=0.01)
    elapsed = time.perf_counter() - start
    ok = bool(np.isfinite(rep["C"])) and elapsed < 60
    _finish(8, ok, f"|G^(t,xi)| <= C t with C = {rep['C']:.6f} (at t={rep['t']}, xi={rep['xi']}); "
                   f"{elapsed:.1f} s")


def test_criterion_09_kernel_slopes():
    start = time.perf_counter()
    parts = []
    ok = True
    delta = select_delta(make_maxwellian(1))
    for d in (1, 2):
        dec = decompose_kernel(make_maxwellian(d), SLOPE_TIMES, n_xi=2048, xi_max=2.0, delta=delta.delta)
        rep = kernel_reports(dec, WINDOW, 0.15, 0.2, 0.2)
        gs, gr = rep["reports"]
        ok &= rep["verdict"] == "pass"
        parts.append(
            f"d={d}: GS+ Linf slope {gs.slope:.3f} log-corr (plain {gs.alt_slope:.3f}) vs {gs.target:.1f}+-0.15 "
            f"[{gs.verdict}], GS+ L2 dev {rep['l2']['max_relative_deviation']:.1e} [{rep['l2']['verdict']}], "
            f"GR Linf slope {gr.slope:.3f} vs <= {gr.target + 0.2:.1f} [{gr.verdict}]"
        )
        del dec
    elapsed = time.perf_counter() - start
    ok &= elapsed < 900
    _finish(9, ok, f"delta={delta.delta}; " + "; ".join(parts) + f"; {elapsed:.0f} s (<900)")


def test_criterion_10_density_slopes():
    start = time.perf_counter()
    data = InitialData(amplitude=1.0, x_width=3.0, v_width=1.0)
    delta = select_delta(make_maxwellian(1)).delta
    parts = []
    ok = True
    for d in (1, 2, 3):
        eq = make_maxwellian(d)
        run = solve_density(eq, data, SLOPE_TIMES, n_xi=2048, xi_max=2.0)
        decompose_density(run, eq, data, delta)
        rr, rs, _ = density_reports(run, WINDOW, 0.2)
        comp = run.info["sum_residual"]
        good = comp <= 1e-6 and rr.verdict == "pass" and rs.verdict == "pass"
        ok &= good
        parts.append(f"d={d}: sum {comp:.0e}, rhoR {rr.slope:.3f} vs {rr.target:.0f} [{rr.verdict}], "
                     f"rhoS {rs.slope:.3f} vs {rs.target:.1f} [{rs.verdict}]")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 1200
    _finish(10, ok, "; ".join(parts) + f" (log-corrected, tol 0.2); {elapsed:.0f} s (<1200)")


DETERMINISM_INI = """
[equilibrium]
kind = maxwellian
d = 2
[penrose]
radii = 0.3, 1.0
curve = true
[evolve]
t_min = 10
t_max = 100
n_t = 24
n_xi = 256
xi_max = 2.0
fit_window = 20, 100
dump_times = 30
"""


def test_criterion_11_determinism(tmp_path):
    start = time.perf_counter()
    cfg = tmp_path / "det.ini"
    cfg.write_text(DETERMINISM_INI)
    same = True
    files = 0
    for cmd in (["penrose", "check"], ["dispersion", "trace"], ["evolve"]):
        outs = []
        for k in range(2):
            out = tmp_path / f"{cmd[0]}{k}"
            subprocess.run([sys.executable, "-m", "vplinear", "--config", str(cfg), "--out", str(out)] + cmd,
                           check=False, capture_output=True)
            outs.append(out)
        names = sorted(p.name for p in outs[0].iterdir())
        same &= names == sorted(p.name for p in outs[1].iterdir()) and len(names) > 0
        for name in names:
            files += 1
            same &= (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    elapsed = time.perf_counter() - start
    _finish(11, same, f"{files} artifacts from 3 subcommands byte-identical across two runs: {same}; {elapsed:.0f} s")
