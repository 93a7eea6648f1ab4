"""End-to-end acceptance criteria, one test per criterion.

Each test prints a PASS/FAIL line (also collected into the pytest terminal
summary).  Run standalone with ``python3 tests/test_acceptance.py``.
"""
import time
import warnings

import numpy as np
import pytest
from click.testing import CliRunner

from quartic_otoc.analysis import lyapunov_fit, moment_reference, saturation_stats
from quartic_otoc.cli import main
from quartic_otoc.engine import (
    ThermalParams,
    appendix_b_diag,
    b_element,
    thermal_otoc,
    time_grid,
)
from quartic_otoc.oracle import oracle_backend
from quartic_otoc.perturbation import ModelParams
from quartic_otoc.spectra import perturbative_backend, sho_backend

import conftest

pytestmark = pytest.mark.acceptance

G = 0.001
N_MAX = 300
LEVELS = N_MAX + 9


def report(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    conftest.ACCEPTANCE_LINES[number] = line
    print(line)
    assert ok, detail


def quiet(fn, *args, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fn(*args, **kw)


_cache = {}


def thermal(T, order=3, t_max=200.0, n_max=N_MAX):
    key = (T, order, t_max, n_max)
    if key not in _cache:
        spec, table = perturbative_backend(ModelParams(G, order=order), n_max + 9)
        tp = ThermalParams(T=T, n_max=n_max)
        _cache[key] = (quiet(thermal_otoc, time_grid(t_max), spec, table, tp), spec, tp)
    return _cache[key]


def test_criterion_01_free_oscillator():
    spec, table = sho_backend(409)
    t = time_grid(100.0)
    start = time.perf_counter()
    errs = [np.max(np.abs(thermal_otoc(t, spec, table, ThermalParams(T=T)).values
                          - np.cos(t) ** 2)) for T in (1.0, 10.0, 50.0)]
    elapsed = time.perf_counter() - start
    report(1, max(errs) < 1e-10 and elapsed < 1.0,
           f"max |C_T - cos^2| = {max(errs):.2e} (< 1e-10), {elapsed:.2f} s for three T")


def test_criterion_02_commutator_normalization():
    start = time.perf_counter()
    spec, table = perturbative_backend(ModelParams(G), 409)
    c0 = quiet(thermal_otoc, [0.0], spec, table, ThermalParams(T=20.0)).values[0]
    elapsed = time.perf_counter() - start
    report(2, abs(c0 - 1) < 5e-4 and elapsed < 1.0,
           f"C_20(0) = {c0:.6g}, |C - 1| = {abs(c0 - 1):.3g} (< 5e-4), {elapsed:.2f} s")


def test_criterion_03_hermiticity_and_band():
    rng = np.random.default_rng(20240611)
    spec, table = perturbative_backend(ModelParams(G), 160)
    spec2, table2 = perturbative_backend(ModelParams(G, order=2), 160)
    herm, outside, eighth = 0.0, 0.0, 0.0
    pairs = 0
    while pairs < 1000:
        n = int(rng.integers(0, 151))
        m = int(rng.integers(max(0, n - 10), min(150, n + 10) + 1))
        t = float(rng.uniform(0, 100))
        b = b_element(n, m, t, spec, table)
        herm = max(herm, abs(b - np.conj(b_element(m, n, t, spec, table))))
        if (m - n) % 2 or abs(m - n) > 8:
            outside = max(outside, abs(b))
        if abs(m - n) == 8:
            eighth = max(eighth, abs(b_element(n, m, t, spec2, table2)))
        pairs += 1
    far = max(abs(b_element(0, 100, 1.0, spec, table)), abs(b_element(150, 3, 7.0, spec, table)))
    outside = max(outside, far)
    ok = herm <= 1e-12 and outside == 0 and eighth == 0
    report(3, ok, f"{pairs} pairs: hermiticity {herm:.1e}, outside band {outside:.0e}, "
                  f"order-2 |b_8| {eighth:.0e}")


def _oracle_ratios(order):
    diffs = []
    for g in (1e-3, 5e-4):
        ospec, _ = oracle_backend(g, 200)
        pspec, _ = perturbative_backend(ModelParams(g, order=order), 6)
        diffs.append(np.abs(pspec.energies[:6] - ospec.energies[:6]))
    return diffs[0] / diffs[1]


def test_criterion_04_oracle_convergence():
    start = time.perf_counter()
    r3, r2 = _oracle_ratios(3), _oracle_ratios(2)
    elapsed = time.perf_counter() - start
    ok = (np.all((r3 >= 8) & (r3 <= 32)) and np.all((r2 >= 4) & (r2 <= 16)) and elapsed < 30)
    report(4, ok, f"order 3 ratios {np.round(r3, 2).tolist()} in [8,32]; "
                  f"order 2 ratios {np.round(r2, 2).tolist()} in [4,16]; {elapsed:.1f} s")


ROUNDOFF = 1e-11


def _closed_form_residual(n, g):
    spec, table = perturbative_backend(ModelParams(g), n + 20)
    t = time_grid(50.0)
    return float(np.max(np.abs(b_element(n, n, t, spec, table) - appendix_b_diag(n, t, g))))


def test_criterion_05_closed_form_equivalence():
    lines, ok = [], True
    for g in (1e-3, 5e-3):
        for n in (0, 1, 5):
            r, r_half = _closed_form_residual(n, g), _closed_form_residual(n, g / 2)
            # a residual at round-off level is trivially O(g^4); otherwise it must shrink ~16x
            good = r < ROUNDOFF or 8 <= r / max(r_half, 1e-300) <= 32
            ok &= good
            lines.append(f"n={n} g={g:g}: {r:.1e}")
    report(5, ok, "max |b_nn - closed form| " + ", ".join(lines))


def test_criterion_06_figure1_shape():
    start = time.perf_counter()
    parts, ok = [], True
    for T in (10.0, 20.0, 40.0):
        series, _, _ = thermal(T)
        early = series.values[series.t <= 5.0].mean()
        sat = saturation_stats(series)
        rises = sat.tail_mean > 3 * early
        flat = sat.drift < 0.10
        ok &= rises and flat
        parts.append(f"T={T:g}: plateau/early {sat.tail_mean / early:.2f}, drift {sat.drift:.3f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 300
    report(6, ok, "; ".join(parts) + " (need > 3 and < 0.10)")


def test_criterion_07_lyapunov_window():
    series, _, _ = thermal(10.0)
    slopes = [lyapunov_fit(series, (lo, lo + 30.0), use_envelope=True).slope
              for lo in (20.0, 15.0, 25.0)]
    base = slopes[0]
    spread = max(abs(s - base) for s in slopes[1:]) / abs(base)
    ok = base > 0 and spread <= 0.20
    report(7, ok, f"slopes [20,50] {slopes[0]:.4f}, [15,45] {slopes[1]:.4f}, "
                  f"[25,55] {slopes[2]:.4f}; max shift {100 * spread:.0f}% (<= 20%)")


UNIFORM_GAP_SPREAD = 0.25


def test_criterion_08_saturation_identity():
    gaps = []
    for T in (10.0, 20.0, 40.0):
        series, spec, tp = thermal(T)
        ref = moment_reference(spec, tp, G)
        gaps.append(saturation_stats(series, reference=ref).gap)
    spread = max(gaps) - min(gaps)
    ok = max(gaps) < 0.5 and spread < UNIFORM_GAP_SPREAD
    report(8, ok, f"|ln C_inf - ln 2<x2><p2>| = {[round(x, 3) for x in gaps]} (< 0.5), "
                  f"spread {spread:.2f} (< {UNIFORM_GAP_SPREAD})")


def test_criterion_09_order_contrast():
    d3 = saturation_stats(thermal(20.0, 3, 200.0)[0]).drift
    d2 = saturation_stats(thermal(20.0, 2, 1000.0, n_max=400)[0]).drift
    report(9, d2 >= 3 * d3, f"order-2 drift {d2:.3f} at t=1000 vs order-3 {d3:.4f} at t=200 "
                            f"(ratio {d2 / d3:.1f}, need >= 3)")


def test_criterion_10_determinism(tmp_path):
    runner = CliRunner()
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / "figures"
        res = quiet(runner.invoke, main, ["figures", "--out", str(out)])
        assert res.exit_code == 0, res.output
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    same = outputs[0] == outputs[1]
    report(10, same and len(outputs[0]) >= 6,
           f"{len(outputs[0])} files byte-identical across two runs: {same}")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
