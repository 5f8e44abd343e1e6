"""Residual suite behind ``hausdorff-symbol verify``.

Each check compares two independent computations of the same quantity and
reports the discrepancy next to its threshold.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .mellin import (
    GridFunction,
    LogGrid,
    apply_hausdorff,
    apply_on_grid,
    diagonalization_residual,
    dual_norm,
    mellin_forward,
    probe_functions,
    symbol_solve,
)
from .quadrature import NodeSet, QuadConfig, discretize_measure
from .spec_model import OperatorSpec
from .spectral import SGrid, classify, operator_norm
from .symbol import (
    MAX_PRODUCT_NODES,
    adjoint_spec,
    compose_specs,
    inverse_wht,
    symbol_grid,
    wht,
    xor_coefficients_at,
    xor_matrix,
)

THRESHOLDS = {
    "norm-bound": 1e-9,
    "hadamard-vs-dense": 1e-9,
    "plancherel": 1e-3,
    "diagonalization": 1e-3,
    "block-additivity": 1e-10,
    "adjointness": 1e-6,
    "adjoint-symbol": 1e-8,
    "composition": None,  # 2 x combined quadrature tolerance, set per run
    "composition-psd": 1e-8,
    "inverse-roundtrip": 1e-3,
}


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{status}  {self.name:<22} value={self.value!r:<24} threshold={self.threshold!r}{extra}"

    def to_dict(self) -> dict:
        return asdict(self)


def _check(name, value, threshold, detail="") -> Check:
    value = float(value)
    return Check(name, value, float(threshold), bool(value <= threshold), detail)


def _small_axes(n: int):
    m = 65 if n == 1 else 17
    S = 40.0 if n == 1 else 20.0
    return tuple(np.linspace(-S, S, m) for _ in range(n))


def _factor_nodes(spec: OperatorSpec, nodes: NodeSet, cfg: QuadConfig) -> NodeSet:
    """Node set small enough that its square fits the composition cap."""
    if len(nodes) ** 2 <= MAX_PRODUCT_NODES:
        return nodes
    return discretize_measure(spec, QuadConfig(order=cfg.order, tol=max(cfg.tol, 1e-8), depth=cfg.depth, max_frequency=1.0))


def run_checks(
    spec: OperatorSpec,
    nodes: NodeSet,
    sgrid: SGrid | None = None,
    loggrid: LogGrid | None = None,
    cfg: QuadConfig | None = None,
    seed: int = 0,
) -> list[Check]:
    cfg = cfg or QuadConfig()
    sgrid = sgrid or SGrid.default(spec.n)
    loggrid = loggrid or LogGrid.default(spec.n)
    rng = np.random.default_rng(seed)
    N = 1 << spec.n
    out: list[Check] = []

    nr = operator_norm(spec, nodes, sgrid)
    out.append(_check("norm-bound", max(nr.norm - nr.bound, 0.0), THRESHOLDS["norm-bound"], f"norm={nr.norm!r} bound={nr.bound!r}"))

    S = rng.uniform(-sgrid.S, sgrid.S, size=(200, spec.n))
    C = xor_coefficients_at(nodes, S)
    worst = 0.0
    for c in C:
        fast = np.sort_complex(wht(c))
        dense = np.sort_complex(np.linalg.eigvals(xor_matrix(c)))
        worst = max(worst, _multiset_distance(fast, dense))
    out.append(_check("hadamard-vs-dense", worst, THRESHOLDS["hadamard-vs-dense"], "200 random s"))

    probes = probe_functions(loggrid, nodes)
    pl = 0.0
    for f in probes:
        for i in f.values:
            Mf = mellin_forward(f, i)
            nf = GridFunction(loggrid, {i: f.values[i]}).norm()
            pl = max(pl, abs(dual_norm(Mf, loggrid) - nf) / nf)
    out.append(_check("plancherel", pl, THRESHOLDS["plancherel"]))

    worst, where = 0.0, ""
    for j, f in enumerate(probes):
        for i in range(N):
            r = diagonalization_residual(spec, nodes, f, i, j)["residual"]
            if r >= worst:
                worst, where = r, f"worst block ({i},{j})"
    out.append(_check("diagonalization", worst, THRESHOLDS["diagonalization"], where))

    # block additivity: sum of blocks on the grid versus direct application
    f = probes[0]
    for extra in probes[1:]:
        f = f + extra
    total = apply_on_grid(spec, nodes, f)
    idx = rng.integers(loggrid.m // 4, 3 * loggrid.m // 4, size=(64, spec.n))
    worst = 0.0
    scale = max(float(np.max(np.abs(v))) for v in total.values.values()) if total.values else 0.0
    for i in range(N):
        t = loggrid.t[idx]
        sign = np.array([-1.0 if (i >> l) & 1 else 1.0 for l in range(spec.n)])
        x = sign * np.exp(t)
        direct = apply_hausdorff(spec, nodes, f, x @ spec.C.T)
        via_blocks = total.octant(i)[tuple(idx.T)]
        worst = max(worst, float(np.max(np.abs(direct - via_blocks))) / max(scale, 1e-300))
    out.append(_check("block-additivity", worst, THRESHOLDS["block-additivity"], "relative to max |Hf|"))

    adj = adjoint_spec(spec)
    nodes_adj = discretize_measure(adj, cfg)
    g = probes[-1]
    lhs = apply_on_grid(spec, nodes, f).inner(g)
    rhs = f.inner(apply_on_grid(adj, nodes_adj, g))
    out.append(_check("adjointness", abs(lhs - rhs), THRESHOLDS["adjointness"], "<Hf,g> vs <f,H*g>"))

    axes = _small_axes(spec.n)
    g1 = symbol_grid(spec, nodes, axes)
    g2 = symbol_grid(adj, nodes_adj, axes)
    diff = float(np.max(np.abs(g2.coeffs - np.conj(g1.coeffs))))
    out.append(_check("adjoint-symbol", diff, THRESHOLDS["adjoint-symbol"], "Phi_adj vs conj Phi"))

    n1 = _factor_nodes(spec, nodes, cfg)
    n2 = _factor_nodes(adj, nodes_adj, cfg)
    comp = compose_specs(spec, adj, n1, n2)
    nc = discretize_measure(comp, cfg)
    # factor symbols from the very node sets that built the product, so the
    # comparison isolates the composition itself
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.n)
    composed = xor_coefficients_at(nc, pts)
    prod = _xor_product(xor_coefficients_at(n1, pts), xor_coefficients_at(n2, pts))
    tol = 2 * (_tol(n1, cfg) + _tol(n2, cfg))
    cd = float(np.max(np.abs(composed - prod)))
    out.append(_check("composition", cd, tol, f"H H* on {len(nc)} atoms"))
    lam = wht(composed)
    psd = float(max(np.max(np.abs(lam.imag)), max(0.0, -float(lam.real.min()))))
    out.append(_check("composition-psd", psd, THRESHOLDS["composition-psd"], "eigenvalues of Phi Phi* real and >= 0"))

    report = classify(spec, nodes, sgrid)
    if report.invertible.holds:
        f0 = probes[0]
        Hf = apply_on_grid(spec, nodes, f0)
        back = symbol_solve(spec, nodes, Hf)
        err = (back + _negate(f0)).norm() / f0.norm()
        out.append(_check("inverse-roundtrip", err, THRESHOLDS["inverse-roundtrip"], "f -> Hf -> Phi^-1"))
    else:
        out.append(Check("inverse-roundtrip", 0.0, THRESHOLDS["inverse-roundtrip"], True, "skipped: symbol not invertible"))
    return out


def _tol(nodes: NodeSet, cfg: QuadConfig) -> float:
    return (nodes.cfg or cfg).tol


def _negate(f: GridFunction) -> GridFunction:
    return GridFunction(f.grid, {i: -v for i, v in f.values.items()})


def _xor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """XOR coefficients of the product of two XOR matrices."""
    return inverse_wht(wht(a) * wht(b))


def _multiset_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Greedy matching distance between two small multisets of complex values."""
    b = list(b)
    worst = 0.0
    for v in a:
        k = int(np.argmin([abs(v - w) for w in b]))
        worst = max(worst, abs(v - b[k]))
        b.pop(k)
    return worst
