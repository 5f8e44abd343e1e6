import numpy as np
import pytest
from scipy import integrate as sint

from hausdorff_symbol.octants import ZeroEigenvalueError
from hausdorff_symbol.quadrature import (
    NonIntegrableError,
    QuadConfig,
    QuadratureError,
    discretize_measure,
    gauss_legendre,
    integrate,
)
from hausdorff_symbol.spec_model import parse_config


def _spec(measure, kernel="1", eig=("u",), n=1):
    return parse_config({"name": "t", "n": n, "measure": measure, "kernel": kernel, "eigenvalues": list(eig)})


def test_cesaro_l1_integral(pair):
    # int_0^1 u^(-1/2) du = 2
    _, nodes = pair("cesaro-1-1")
    assert nodes.l1_bound() == pytest.approx(2.0, abs=1e-8)
    assert np.all(nodes.delta == 0)
    assert np.all(nodes.w > 0)


def test_cesaro_symbol_integrand_at_zero_frequency(pair):
    _, nodes = pair("cesaro-1-1")
    val = integrate(nodes, nodes.K * nodes.absdet ** (-0.5 - 0j))
    assert val == pytest.approx(2.0, abs=1e-8)


def test_cesaro_2d_integral(pair):
    # 2 int_0^1 (1-u) du = 1
    _, nodes = pair("cesaro-2-2")
    assert nodes.l1_bound() == pytest.approx(1.0, abs=1e-10)


def test_atom_passthrough():
    nodes = discretize_measure(_spec({"type": "atoms", "points": [[1, 1]]}, eig=("2",)))
    assert len(nodes) == 1
    assert nodes.w[0] == 1.0
    assert integrate(_one := discretize_measure(_spec({"type": "atoms", "points": [[2, 0.5]]}, eig=("2",))), 1.0) == 0.5
    assert len(_one) == 1


def test_counting_geometric_sum(pair):
    # sum_k 0.75 * 0.25^k * 0.25^(-k/2) = 0.75 / (1 - 0.5)
    _, nodes = pair("qcesaro-0.25")
    assert len(nodes) == 61
    assert nodes.l1_bound() == pytest.approx(1.5, abs=1e-12)
    # reported tail: |K(N)| |a(N)|^(-1/2) r / (1 - r)
    assert nodes.tail_bound == pytest.approx(0.75 * 0.5**60, rel=1e-12)


def test_integrate_linear_exact():
    nodes = discretize_measure(_spec({"type": "interval", "a": 0, "b": 1}, eig=("2",)))
    assert integrate(nodes, nodes.u).real == pytest.approx(0.5, abs=1e-12)


def test_integrate_matches_scipy_oscillatory(pair):
    _, nodes = pair("cesaro-1-1")
    s = 7.3
    ref_re = sint.quad(lambda u: u**-0.5 * np.cos(s * np.log(u)), 0, 1, limit=400, weight=None)[0]
    ref_im = sint.quad(lambda u: u**-0.5 * np.sin(s * np.log(u)), 0, 1, limit=400)[0]
    val = integrate(nodes, nodes.K * np.exp((-0.5 - 1j * s) * nodes.logabs[0]))
    assert abs(val - complex(ref_re, ref_im)) < 1e-7


def test_gauss_exactness_single_panel():
    x, w = gauss_legendre(16)
    for deg in range(0, 32):
        exact = 0.0 if deg % 2 else 2.0 / (deg + 1)
        assert abs(np.sum(w * x**deg) - exact) < 1e-14


def test_refinement_monotone():
    spec = _spec({"type": "interval", "a": 0, "b": 1, "singular_endpoints": ["a"]}, kernel="u^(-0.7)", eig=("1",))
    errs = [discretize_measure(spec, QuadConfig(tol=t)).error_estimate for t in (1e-6, 5e-7, 2.5e-7, 1.25e-7)]
    assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_deterministic_nodes(pair):
    spec, nodes = pair("cesaro-1-1")
    again = discretize_measure(spec)
    np.testing.assert_array_equal(nodes.u, again.u)
    np.testing.assert_array_equal(nodes.w, again.w)
    assert nodes.l1_bound() == again.l1_bound()


def test_non_integrable_singularity():
    spec = _spec({"type": "interval", "a": 0, "b": 1, "singular_endpoints": ["a"]}, kernel="1/u^2", eig=("1",))
    with pytest.raises(NonIntegrableError):
        discretize_measure(spec)


def test_zero_eigenvalue_at_atom():
    spec = _spec({"type": "atoms", "points": [[1, 1]]}, eig=("u-1",))
    with pytest.raises(ZeroEigenvalueError) as info:
        discretize_measure(spec)
    assert info.value.node_index == 0


def test_non_finite_integrand():
    nodes = discretize_measure(_spec({"type": "atoms", "points": [[1, 1]]}, eig=("2",)))
    with pytest.raises(QuadratureError):
        integrate(nodes, np.array([np.inf]))


def test_jacobi_type_endpoint():
    # (1-u)^(-1/2) at the right end: int_0^1 (1-u)^(-1/2) du = 2.  Grading
    # towards u = 1 stops at the float spacing there, so the dropped piece
    # (about 1.3e-6) is what the reported error estimate should describe.
    spec = _spec({"type": "interval", "a": 0, "b": 1, "singular_endpoints": ["b"]}, kernel="(1-u)^(-0.5)", eig=("1",))
    nodes = discretize_measure(spec)
    gap = abs(nodes.l1_bound() - 2.0)
    assert gap < 1e-5
    assert gap == pytest.approx(nodes.error_estimate, rel=1e-3)


def test_refined_nodes_keep_the_integral(pair):
    _, nodes = pair("cesaro-1-1")
    fine = nodes.refined(200.0)
    assert len(fine) > len(nodes)
    assert fine.l1_bound() == pytest.approx(2.0, abs=1e-8)
