"""The fourteen acceptance criteria, at their stated tolerances.

Each test prints one PASS/FAIL line; the lines are also collected and shown
in the terminal summary of every pytest run."""

import math
import time

import numpy as np
import pytest

from hausdorff_symbol.checks import _factor_nodes, _multiset_distance, _xor_product
from hausdorff_symbol.fixtures import FUNCTIONS, OPERATORS, load_fixture, load_function
from hausdorff_symbol.mellin import (
    GridFunction,
    LogGrid,
    apply_hausdorff,
    diagonalization_residual,
    dual_norm,
    gaussian_bump,
    mellin_forward,
    probe_functions,
    sample_function,
)
from hausdorff_symbol.quadrature import QuadConfig, discretize_measure
from hausdorff_symbol.spec_model import parse_function
from hausdorff_symbol.special import cesaro_gamma_symbol
from hausdorff_symbol.spectral import (
    SGrid,
    classify,
    noncompactness_probe,
    operator_norm,
    point_spectrum_estimate,
    spectrum,
    symbols,
)
from hausdorff_symbol.symbol import adjoint_spec, compose_specs, wht, xor_coefficients_at, xor_matrix

RESULTS: dict[int, str] = {}


def record(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title}: {detail}"
    RESULTS[number] = line
    print(line)


def fresh(name):
    spec = load_fixture(name)
    return spec, discretize_measure(spec)


def test_01_cesaro_norm():
    out = []
    ok = True
    for name, expected, tol in (("cesaro-1-1", 2.0, 1e-6), ("cesaro-2-2", 1.0, 1e-5)):
        start = time.perf_counter()
        spec, nodes = fresh(name)
        grid = SGrid.default(spec.n)
        r = operator_norm(spec, nodes, grid)
        elapsed = time.perf_counter() - start
        at_zero = max(abs(v) for v in r.argmax_s) <= grid.cell
        good = abs(r.norm - expected) <= tol and at_zero and elapsed < 10
        ok &= good
        out.append(f"{name} norm={r.norm:.12g} argmax={r.argmax_s} {elapsed:.1f}s")
    record(1, "Cesaro norm", ok, "; ".join(out))
    assert ok


def test_02_cesaro_spectrum_curve():
    spec, nodes = fresh("cesaro-1-1")
    est = spectrum(spec, nodes, SGrid.default(1))
    ref = np.array([cesaro_gamma_symbol(1, 1, s) for s in est.points[:, 0]])
    dev = max(float(np.max(np.abs(est.eigenvalues[:, chi] - ref))) for chi in range(2))
    far = est.far_eigenvalues[np.abs(est.far_points[:, 0]) == 1e3]
    far_max = float(np.max(np.abs(far)))
    ok = dev <= 1e-7 and far_max <= 0.05
    record(2, "Cesaro spectrum curve", ok, f"max |lambda - gamma| = {dev:.2e}, max |lambda| at |t|=1e3 = {far_max:.2e}")
    assert ok


def test_03_qcesaro_spectra():
    spec, nodes = fresh("qcesaro-0.25")
    lam = spectrum(spec, nodes, SGrid.default(1)).all_samples()
    pos = float(np.max(np.abs(np.abs(lam - 1) - 0.5)))
    nr = operator_norm(spec, nodes, SGrid.default(1))
    spec_n, nodes_n = fresh("qcesaro-neg0.25")
    lam_n = spectrum(spec_n, nodes_n, SGrid.default(1)).all_samples()
    neg = float(np.max(np.minimum(np.abs(np.abs(lam_n - 1) - 0.5), np.abs(np.abs(lam_n + 1) - 0.5))))
    ok = pos <= 1e-8 and neg <= 1e-8
    record(
        3,
        "q-Cesaro spectra",
        ok,
        f"q=0.25 circle defect {pos:.2e}; q=-0.25 two-circle defect {neg:.2e}; "
        f"sup|phi| = {nr.norm:.12g}, sup|phi - 1| = {nr.sup_distance_from_one:.12g} (norm discrepancy reported)",
    )
    assert pos <= 1e-8
    assert neg <= 1e-8


def test_04_norm_bound():
    worst = -math.inf
    sharp = 0.0
    for name in OPERATORS:
        spec, nodes = fresh(name)
        r = operator_norm(spec, nodes, SGrid.default(spec.n))
        worst = max(worst, r.norm - r.bound)
        if name.startswith("cesaro"):
            sharp = max(sharp, abs(r.norm - r.bound))
    ok = worst <= 1e-9 and sharp <= 1e-6
    record(4, "norm bound", ok, f"max(norm - bound) = {worst:.2e} over {len(OPERATORS)} fixtures; Cesaro |norm - bound| = {sharp:.2e}")
    assert ok


def test_05_diagonalization():
    start = time.perf_counter()
    worst, where = 0.0, ""
    for name in ("cesaro-1-1", "qcesaro-0.25", "qcesaro-neg0.25", "reflection", "cesaro-2-2"):
        spec, nodes = fresh(name)
        grid = LogGrid.default(spec.n)
        for j, f in enumerate(probe_functions(grid, nodes)):
            for i in range(1 << spec.n):
                r = diagonalization_residual(spec, nodes, f, i, j)["residual"]
                if r >= worst:
                    worst, where = r, f"{name} ({i},{j})"
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-3 and elapsed < 60
    record(5, "diagonalization", ok, f"worst residual {worst:.2e} at {where}; {elapsed:.1f}s")
    assert ok


def test_06_adjoint_symbol():
    worst = 0.0
    for name in OPERATORS:
        spec, nodes = fresh(name)
        adj = adjoint_spec(spec)
        grid = SGrid.default(spec.n)
        a = symbols(spec, nodes, grid)
        b = symbols(adj, discretize_measure(adj), grid)
        worst = max(worst, float(np.max(np.abs(b.coeffs - np.conj(a.coeffs)))))
        worst = max(worst, float(np.max(np.abs(b.far_coeffs - np.conj(a.far_coeffs)))) if len(a.far_coeffs) else 0.0)
    ok = worst <= 1e-8
    record(6, "adjoint symbol", ok, f"max |Phi_adj - conj Phi| = {worst:.2e}")
    assert ok


def test_07_composition():
    cfg = QuadConfig()
    out, ok = [], True
    for name in ("cesaro-1-1", "qcesaro-0.25"):
        spec, nodes = fresh(name)
        fn = _factor_nodes(spec, nodes, cfg)
        comp = compose_specs(spec, spec, fn, fn)
        cn = discretize_measure(comp, cfg)
        S = np.linspace(-40, 40, 2049)[:, None]
        lhs = xor_coefficients_at(cn, S)
        rhs = _xor_product(xor_coefficients_at(fn, S), xor_coefficients_at(fn, S))
        tol = 2 * (fn.cfg.tol + fn.cfg.tol)
        d = float(np.max(np.abs(lhs - rhs)))
        ok &= d <= tol
        out.append(f"{name}: {d:.2e} (limit {tol:.0e})")
    record(7, "composition", ok, "; ".join(out))
    assert ok


def test_08_inverse():
    q = 0.25
    spec, nodes = fresh("qcesaro-0.25")
    grid = LogGrid.default(1)
    f = gaussian_bump(grid, 0, -2.0, width=1.0, phase=1.5)
    idx = np.arange(grid.m // 4, 3 * grid.m // 4)
    x = np.exp(grid.t[idx])[:, None]
    back = (apply_hausdorff(spec, nodes, f, x) - q * apply_hausdorff(spec, nodes, f, q * x)) / (1 - q)
    v = f.values[0][idx]
    err = float(np.max(np.abs(back - v)) / np.max(np.abs(v)))
    det = classify(spec, nodes, SGrid.default(1)).invertible.value
    ok = err <= 1e-6 and abs(det - 0.25) <= 1e-8
    record(8, "inverse", ok, f"roundtrip error {err:.2e}; min |det Phi| = {det:.12g}")
    assert ok


def test_09_reflection():
    spec, nodes = fresh("reflection")
    grid = SGrid.default(1)
    est = spectrum(spec, nodes, grid)
    values = sorted(c.value.real for c in est.candidates)
    lam = est.all_samples()
    spread = float(np.min(np.abs(lam[:, None] - np.array([-1, 1])[None, :]), axis=1).max())
    cand_ok = len(values) == 2 and abs(values[0] + 1) <= 1e-12 and abs(values[1] - 1) <= 1e-12
    norm = operator_norm(spec, nodes, grid).norm
    rep = classify(spec, nodes, grid)
    ok = cand_ok and spread <= 1e-12 and norm == 1.0 and rep.self_adjoint.holds and rep.unitary.holds
    record(9, "reflection", ok, f"clusters {values}, sample spread {spread:.1e}, norm {norm}, self-adjoint {rep.self_adjoint.holds}, unitary {rep.unitary.holds}")
    assert ok


def test_10_hadamard_vs_dense():
    rng = np.random.default_rng(2024)
    pairs = [fresh(name) for name in OPERATORS]
    worst = 0.0
    draws = 10_000
    picks = rng.integers(len(pairs), size=draws)
    for k, (spec, nodes) in enumerate(pairs):
        count = int(np.sum(picks == k))
        S = rng.uniform(-40, 40, size=(count, spec.n))
        for c in xor_coefficients_at(nodes, S):
            worst = max(worst, _multiset_distance(wht(c), np.linalg.eigvals(xor_matrix(c))))
    ok = worst <= 1e-9
    record(10, "Hadamard vs dense", ok, f"{draws} draws, worst multiset distance {worst:.2e}")
    assert ok


def test_11_plancherel():
    worst, where = 0.0, ""
    for name in FUNCTIONS:
        fs = load_function(name)
        grid = LogGrid.default(fs.n)
        f = sample_function(fs, grid)
        for i in f.values:
            fi = GridFunction(grid, {i: f.values[i]})
            d = abs(dual_norm(mellin_forward(fi, i), grid) - fi.norm()) / fi.norm()
            if d >= worst:
                worst, where = d, f"{name} octant {i}"
    ok = worst <= 1e-3
    record(11, "Mellin unitarity", ok, f"worst relative defect {worst:.2e} ({where})")
    assert ok


def test_12_noncompactness():
    spec, nodes = fresh("cesaro-1-1")
    r = noncompactness_probe(spec, nodes, (32, 64, 128), 0.5)
    ok = r["strictly_increasing"]
    record(12, "noncompactness probe", ok, f"counts {r['counts']} for N = {r['sizes']}")
    assert ok


def test_13_point_spectrum():
    grid = SGrid.default(1)
    ca = point_spectrum_estimate(*fresh("constant-atom"), grid, 1e-6)
    ce = point_spectrum_estimate(*fresh("cesaro-1-1"), grid, 1e-6)
    ok = len(ca) == 1 and abs(ca[0].value - 2) <= 1e-12 and ca[0].measure == pytest.approx(grid.volume) and ce == []
    desc = ", ".join(f"{c.value.real:g} (measure {c.measure:g})" for c in ca)
    record(13, "point spectrum", ok, f"constant atom: {desc} of box {grid.volume:g}; Cesaro: {len(ce)} candidates")
    assert ok


def test_14_direct_application():
    spec, nodes = fresh("cesaro-1-1")
    grid = LogGrid.default(1)
    f = sample_function(parse_function({"n": 1, "octants": {"0": {"expr": "1", "support": [[-11, 0]]}}}), grid)
    x = np.linspace(0.05, 0.95, 901)
    err = float(np.max(np.abs(apply_hausdorff(spec, nodes, f, x[:, None], resolve=True) + np.log(x))))
    ok = err <= 1e-4
    record(14, "direct application", ok, f"max |Hf + ln x| on [0.05, 0.95] = {err:.2e}")
    assert ok
