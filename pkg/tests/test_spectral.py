import numpy as np
import pytest

from hausdorff_symbol.quadrature import QuadConfig, discretize_measure
from hausdorff_symbol.spec_model import parse_config
from hausdorff_symbol.special import cesaro_gamma_symbol
from hausdorff_symbol.spectral import (
    SGrid,
    classify,
    noncompactness_probe,
    norm_bound,
    operator_norm,
    point_spectrum_estimate,
    resolvent_margin,
    spectral_radius_check,
    spectrum,
)
from hausdorff_symbol.symbol import adjoint_spec, compose_specs, wht, xor_coefficients_at

FIXTURES = ["cesaro-1-1", "cesaro-2-2", "qcesaro-0.25", "qcesaro-neg0.25", "reflection", "constant-atom", "zero-kernel"]


def _atom(K, a, n=1):
    spec = parse_config({"name": "atom", "n": n, "measure": {"type": "atoms", "points": [[1, 1]]}, "kernel": str(K), "eigenvalues": [str(a)] * n})
    return spec, discretize_measure(spec)


def test_sgrid_validation():
    with pytest.raises(ValueError):
        SGrid(1, 0.0, 10)
    with pytest.raises(ValueError):
        SGrid(1, 1.0, 2)
    g = SGrid.default(2)
    assert (g.S, g.m) == (20.0, 257)
    assert g.volume == 1600.0


def test_norm_bound_examples(pair):
    assert norm_bound(*pair("cesaro-1-1")) == pytest.approx(2.0, abs=1e-8)
    assert norm_bound(*pair("qcesaro-0.25")) == pytest.approx(1.5, abs=1e-12)
    assert norm_bound(*_atom(3, 4)) == pytest.approx(1.5, abs=1e-15)


def test_cesaro_norm(pair):
    r = operator_norm(*pair("cesaro-1-1"), SGrid.default(1))
    assert r.norm == pytest.approx(2.0, abs=1e-6)
    assert abs(r.argmax_s[0]) <= SGrid.default(1).cell
    r2 = operator_norm(*pair("cesaro-2-2"), SGrid.default(2))
    assert r2.norm == pytest.approx(1.0, abs=1e-5)
    assert max(abs(v) for v in r2.argmax_s) <= SGrid.default(2).cell


def test_qcesaro_norm_reports_both_numbers(pair):
    r = operator_norm(*pair("qcesaro-0.25"), SGrid.default(1))
    assert r.norm == pytest.approx(1.5, abs=1e-9)
    assert r.sup_distance_from_one == pytest.approx(0.5, abs=1e-9)
    assert r.tail_bound > 0


def test_reflection_norm(pair):
    assert operator_norm(*pair("reflection"), SGrid(1, 10.0, 21)).norm == 1.0


@pytest.mark.parametrize("name", FIXTURES)
def test_norm_below_bound_and_containment(pair, name):
    spec, nodes = pair(name)
    grid = SGrid.default(spec.n)
    r = operator_norm(spec, nodes, grid)
    assert r.norm <= r.bound + 1e-9
    est = spectrum(spec, nodes, grid)
    assert spectral_radius_check(est, r.norm) <= 1e-9


@pytest.mark.parametrize("name", ["cesaro-1-1", "cesaro-2-2", "qcesaro-0.25", "constant-atom"])
def test_bound_sharp_for_positive_families(pair, name):
    r = operator_norm(*pair(name), SGrid.default(pair(name)[0].n))
    assert r.norm == pytest.approx(r.bound, abs=1e-6)


def test_reflection_spectrum(pair):
    est = spectrum(*pair("reflection"), SGrid(1, 10.0, 41))
    assert set(np.round(est.all_samples().real, 12)) == {-1.0, 1.0}
    assert np.all(est.all_samples().imag == 0)


def test_qcesaro_circle(pair):
    est = spectrum(*pair("qcesaro-0.25"), SGrid.default(1))
    lam = est.all_samples()
    assert np.max(np.abs(np.abs(lam - 1) - 0.5)) <= 1e-8


def test_negative_q_samples_sit_on_their_true_circle(pair):
    # Both branches lie on |lam - 5/3| = 5/6; the circles around +-1 of
    # radius 1/2 are not where they are (see the decisions ledger).
    est = spectrum(*pair("qcesaro-neg0.25"), SGrid.default(1))
    lam = est.all_samples()
    assert np.max(np.abs(np.abs(lam - 5 / 3) - 5 / 6)) <= 1e-9


def test_cesaro_cloud_matches_gamma(pair):
    grid = SGrid.default(1)
    est = spectrum(*pair("cesaro-1-1"), grid)
    ref = np.array([cesaro_gamma_symbol(1, 1, s) for s in est.points[:, 0]])
    for chi in range(2):
        assert np.max(np.abs(est.eigenvalues[:, chi] - ref)) <= 1e-7
    far = np.abs(est.far_eigenvalues[np.abs(est.far_points[:, 0]) == 1e3])
    assert np.all(far <= 0.05)


def test_spectrum_csv(pair):
    est = spectrum(*pair("reflection"), SGrid(1, 1.0, 3, far=(100.0,)))
    lines = est.to_csv().splitlines()
    assert lines[0] == "s_1,chi,re,im,far"
    assert len(lines) == 1 + 3 * 2 + 2 * 2
    assert lines[-1].endswith(",1")


def test_resolvent_margin_examples(pair):
    c = pair("cesaro-1-1")
    grid = SGrid.default(1)
    m2 = resolvent_margin(*c, grid, 2.0)
    assert m2["margin"] <= 1e-6
    assert abs(m2["s"][0]) <= grid.cell
    assert resolvent_margin(*c, grid, 5.0)["margin"] >= 9.0
    assert resolvent_margin(*pair("reflection"), SGrid(1, 5.0, 11), 0.0)["margin"] == pytest.approx(1.0, abs=1e-15)


def test_point_spectrum_examples(pair):
    grid = SGrid.default(1)
    ca = point_spectrum_estimate(*pair("constant-atom"), grid, 1e-6)
    assert len(ca) == 1
    assert ca[0].value == pytest.approx(2.0, abs=1e-12)
    assert ca[0].measure == pytest.approx(grid.volume)
    assert point_spectrum_estimate(*pair("cesaro-1-1"), grid, 1e-6) == []
    refl = point_spectrum_estimate(*pair("reflection"), grid, 1e-6)
    assert sorted(c.value.real for c in refl) == [-1.0, 1.0]
    assert all(c.measure == pytest.approx(grid.volume) for c in refl)


def test_cesaro_branch_strictly_varies():
    # the oracle behind the empty candidate list: gamma has no flat stretch
    t = np.linspace(-40, 40, 2049)
    g = np.array([cesaro_gamma_symbol(1, 1, v) for v in t])
    assert np.min(np.abs(np.diff(g))) > 1e-6


def test_point_spectrum_on_a_plateau():
    # two atoms with |a| = 1 give a constant symbol 1 + 1 = 2 on every branch
    spec = parse_config({"name": "p", "n": 1, "measure": {"type": "atoms", "points": [[1, 1], [2, 1]]}, "kernel": "1", "eigenvalues": ["1"]})
    nodes = discretize_measure(spec)
    cand = point_spectrum_estimate(spec, nodes, SGrid(1, 5.0, 101), 1e-6)
    assert [c.value for c in cand] == [pytest.approx(2.0)]


@pytest.mark.parametrize("name", ["reflection", "constant-atom", "qcesaro-0.25", "cesaro-1-1"])
def test_adjoint_point_spectrum_is_conjugate(pair, name):
    spec, nodes = pair(name)
    adj = adjoint_spec(spec)
    grid = SGrid(1, 20.0, 401)
    a = sorted((c.value for c in point_spectrum_estimate(spec, nodes, grid)), key=lambda z: (z.real, z.imag))
    b = sorted((c.value.conjugate() for c in point_spectrum_estimate(adj, discretize_measure(adj), grid)), key=lambda z: (z.real, z.imag))
    assert len(a) == len(b)
    for x, y in zip(a, b):
        assert abs(x - y) <= 1e-9


def test_classify_reflection(pair):
    r = classify(*pair("reflection"), SGrid(1, 10.0, 41))
    assert r.self_adjoint.holds and r.unitary.holds and r.invertible.holds
    assert not r.positive.holds
    assert r.positive.value == -1.0


def test_classify_cesaro(pair):
    r = classify(*pair("cesaro-1-1"), SGrid.default(1))
    assert not r.self_adjoint.holds
    assert not r.invertible.holds
    assert r.nonzero.holds


def test_classify_qcesaro(pair):
    r = classify(*pair("qcesaro-0.25"), SGrid.default(1))
    assert r.invertible.holds
    assert r.invertible.value == pytest.approx(0.25, abs=1e-8)


def test_classify_json_round_trip(pair):
    import json

    r = classify(*pair("constant-atom"), SGrid(1, 5.0, 11))
    d = json.loads(r.to_json())
    assert set(d) == {"tol", "self_adjoint", "positive", "unitary", "invertible", "nonzero"}
    assert d["positive"]["holds"] is True
    assert d["unitary"]["holds"] is False


def test_classify_zero_kernel(pair):
    r = classify(*pair("zero-kernel"), SGrid(1, 5.0, 11))
    assert not r.nonzero.holds


@pytest.mark.parametrize("name", ["cesaro-1-1", "qcesaro-neg0.25", "reflection"])
def test_composition_with_adjoint_is_psd(pair, name):
    spec, nodes = pair(name)
    coarse = QuadConfig(tol=1e-8, max_frequency=1.0)
    n1 = discretize_measure(spec, coarse) if len(nodes) > 2000 else nodes
    adj = adjoint_spec(spec)
    n2 = discretize_measure(adj, coarse) if len(nodes) > 2000 else discretize_measure(adj)
    comp = compose_specs(spec, adj, n1, n2)
    S = np.linspace(-40, 40, 801)[:, None]
    lam = wht(xor_coefficients_at(discretize_measure(comp), S))
    assert np.max(np.abs(lam.imag)) <= 1e-8
    assert lam.real.min() >= -1e-8


def test_noncompactness_examples(pair):
    r = noncompactness_probe(*pair("cesaro-1-1"), sizes=(32, 64, 128), threshold=0.5)
    assert r["strictly_increasing"]
    z = noncompactness_probe(*pair("zero-kernel"), sizes=(16, 32))
    assert z["counts"] == [0, 0]
    refl = noncompactness_probe(*pair("reflection"), sizes=(16, 32), threshold=0.9)
    assert refl["counts"] == [16, 32]
