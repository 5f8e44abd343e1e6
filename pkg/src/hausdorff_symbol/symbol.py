"""Matrix symbols of Hausdorff operators.

The symbol entry phi_ij depends only on ``i ^ j`` (see :mod:`.octants`), so a
symbol is stored through its 2^n XOR coefficients c_delta.  Such a matrix is
diagonalised by the Walsh-Hadamard matrix: its eigenvalues are

    lambda_chi = sum_delta (-1)^popcount(chi & delta) c_delta.
"""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .octants import block_permutation
from .quadrature import NodeSet, QuadConfig, discretize_measure
from .spec_model import AtomList, DilationFamily, OperatorSpec, SpecError, Table

NORMALITY_TOL = 1e-10
STRUCTURE_TOL = 1e-12
CHUNK = 256


class SymbolError(ValueError):
    pass


class SingularSymbolError(SymbolError):
    pass


class NotPositiveDefiniteError(SymbolError):
    pass


# --------------------------------------------------------------------------
# Walsh-Hadamard helpers


def wht(c: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform along the last axis."""
    out = np.array(c, dtype=complex, copy=True)
    N = out.shape[-1]
    if N & (N - 1):
        raise ValueError("last axis length must be a power of two")
    h = 1
    while h < N:
        v = out.reshape(out.shape[:-1] + (N // (2 * h), 2, h))
        a = v[..., 0, :].copy()
        b = v[..., 1, :]
        v[..., 0, :] = a + b
        v[..., 1, :] = a - b
        h *= 2
    return out


def inverse_wht(lam: np.ndarray) -> np.ndarray:
    return wht(lam) / np.shape(lam)[-1]


def xor_matrix(coeffs: np.ndarray) -> np.ndarray:
    """Dense matrix(ces) with entries c[i ^ j] from coefficients on the last axis."""
    coeffs = np.asarray(coeffs)
    N = coeffs.shape[-1]
    idx = np.arange(N)
    return coeffs[..., idx[:, None] ^ idx[None, :]]


def _threads() -> int:
    raw = os.environ.get("HAUSDORFF_THREADS", "0")
    try:
        k = int(raw)
    except ValueError:
        k = 0
    return k if k > 0 else min(8, os.cpu_count() or 1)


# --------------------------------------------------------------------------
# coefficient evaluation


def _class_weights(nodes: NodeSet) -> np.ndarray:
    # w K |a|^(-1/2): the frequency-independent factor of every term
    return nodes.w * nodes.K * np.exp(-0.5 * nodes.logabs.sum(axis=0))


def _points_chunk(g, L, S):
    phase = S @ L  # (P, K)
    return np.exp(-1j * phase) @ g


def xor_coefficients_at(nodes: NodeSet, S) -> np.ndarray:
    """XOR coefficients at frequency points ``S`` (shape (P, n)); returns
    shape (P, 2^n)."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape[1] != nodes.n:
        raise ValueError(f"frequency points must have {nodes.n} coordinates")
    N = 1 << nodes.n
    out = np.zeros((S.shape[0], N), dtype=complex)
    g = _class_weights(nodes)
    chunks = [slice(p, min(p + CHUNK, S.shape[0])) for p in range(0, S.shape[0], CHUNK)]
    for d in range(N):
        sel = nodes.delta == d
        if not sel.any():
            continue
        gd, Ld = g[sel], nodes.logabs[:, sel]

        def work(sl, gd=gd, Ld=Ld):
            return _points_chunk(gd, Ld, S[sl])

        if len(chunks) > 1 and _threads() > 1:
            with ThreadPoolExecutor(_threads()) as pool:
                parts = list(pool.map(work, chunks))
        else:
            parts = [work(sl) for sl in chunks]
        out[:, d] = np.concatenate(parts) if parts else 0
    return out


def xor_coefficient(nodes: NodeSet, delta: int, s) -> complex:
    """c_delta(s): the symbol integral over nodes whose sign class is ``delta``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    sel = nodes.delta == delta
    if not sel.any():
        return 0j
    g = _class_weights(nodes)[sel]
    phase = s @ nodes.logabs[:, sel]
    return complex(np.sum(g * np.exp(-1j * phase)))


def _tensor_coefficients(nodes: NodeSet, axes) -> np.ndarray:
    """Coefficients on the tensor grid spanned by ``axes``; shape
    (*counts, 2^n).  The phase factor separates over coordinates, which turns
    the two-dimensional case into one matrix product per class."""
    n = nodes.n
    counts = tuple(len(a) for a in axes)
    N = 1 << n
    out = np.zeros(counts + (N,), dtype=complex)
    g = _class_weights(nodes)
    for d in range(N):
        sel = nodes.delta == d
        if not sel.any():
            continue
        gd, Ld = g[sel], nodes.logabs[:, sel]
        if n == 1:
            out[..., d] = xor_coefficients_at(nodes.select(sel), axes[0][:, None])[:, d]
        elif n == 2:
            acc = np.zeros(counts, dtype=complex)
            for start in range(0, gd.size, 4096):
                sl = slice(start, start + 4096)
                E1 = np.exp(-1j * np.outer(axes[0], Ld[0, sl]))
                E2 = np.exp(-1j * np.outer(axes[1], Ld[1, sl]))
                acc += (E1 * gd[sl]) @ E2.T
            out[..., d] = acc
        else:
            mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
            out[..., d] = xor_coefficients_at(nodes.select(sel), mesh)[:, d].reshape(counts)
    return out


# --------------------------------------------------------------------------
# symbol containers


@dataclass(frozen=True, eq=False)
class SymbolMatrix:
    s: np.ndarray
    coeffs: np.ndarray

    @property
    def n(self) -> int:
        return int(self.coeffs.size).bit_length() - 1

    @property
    def entries(self) -> np.ndarray:
        return xor_matrix(self.coeffs)

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues indexed by character chi (Hadamard path)."""
        return wht(self.coeffs)

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def det(self) -> complex:
        return complex(np.prod(self.eigenvalues))

    def normality_defect(self) -> float:
        M = self.entries
        return float(np.max(np.abs(M @ M.conj().T - M.conj().T @ M)))

    def block_form(self, mask: int | None = None) -> np.ndarray:
        """Entries reordered so that the reflection pairing by ``mask``
        (default all ones) becomes the two-by-two block layout."""
        mask = (1 << self.n) - 1 if mask is None else mask
        p = block_permutation(mask, self.n)
        return self.entries[np.ix_(p, p)]


@dataclass(frozen=True, eq=False)
class SymbolGrid:
    axes: tuple[np.ndarray, ...]
    coeffs: np.ndarray  # (*counts, 2^n)
    far_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    far_coeffs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=complex))
    tag: str = ""

    @property
    def n(self) -> int:
        return len(self.axes)

    def points(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1).reshape(-1, self.n)

    def flat_coeffs(self) -> np.ndarray:
        return self.coeffs.reshape(-1, self.coeffs.shape[-1])

    def eigenvalues(self) -> np.ndarray:
        return wht(self.flat_coeffs())

    def far_eigenvalues(self) -> np.ndarray:
        return wht(self.far_coeffs) if len(self.far_coeffs) else np.zeros((0, self.coeffs.shape[-1]), complex)

    def at(self, index) -> SymbolMatrix:
        idx = np.unravel_index(index, self.coeffs.shape[:-1])
        s = np.array([ax[i] for ax, i in zip(self.axes, idx)])
        return SymbolMatrix(s, self.coeffs[idx])

    def to_csv(self, include_far=True) -> str:
        n, N = self.n, self.coeffs.shape[-1]
        buf = io.StringIO()
        cols = [f"s_{l + 1}" for l in range(n)]
        for d in range(N):
            cols += [f"re_c{d}", f"im_c{d}"]
        buf.write(",".join(cols) + "\n")
        rows = [(self.points(), self.flat_coeffs())]
        if include_far and len(self.far_points):
            rows.append((self.far_points, self.far_coeffs))
        for P, C in rows:
            for s, c in zip(P, C):
                vals = [repr(float(x)) for x in s]
                for z in c:
                    vals += [repr(float(z.real)), repr(float(z.imag))]
                buf.write(",".join(vals) + "\n")
        return buf.getvalue()


# --------------------------------------------------------------------------
# operations


def symbol_matrix(spec: OperatorSpec, nodes: NodeSet, s) -> SymbolMatrix:
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if s.size != spec.n:
        raise ValueError(f"frequency must have {spec.n} coordinates")
    freq = float(np.max(np.abs(s))) if s.size else 0.0
    use = nodes.refined(freq) if freq > nodes.max_frequency else nodes
    c = xor_coefficients_at(use, s[None, :])[0]
    sm = SymbolMatrix(s, c)
    if spec.n <= 6:
        scale = max(sm.norm, 1e-300) ** 2
        defect = sm.normality_defect()
        if defect > NORMALITY_TOL * scale:
            raise SymbolError(f"symbol is not normal at s={s.tolist()} (defect {defect:.3g})")
    return sm


def scalar_symbol(spec: OperatorSpec, nodes: NodeSet, s) -> complex:
    """phi(s) for positive definite dilation families."""
    if np.any(nodes.delta != 0):
        k = int(np.flatnonzero(nodes.delta != 0)[0])
        raise NotPositiveDefiniteError(
            f"dilations are not positive definite: node {k} (u={nodes.u[k]!r}) has sign class {int(nodes.delta[k])}"
        )
    # same path as the matrix, so phi(s) is exactly its diagonal entry
    return complex(symbol_matrix(spec, nodes, s).coeffs[0])


def symbol_grid(spec: OperatorSpec, nodes: NodeSet, axes, far_points=None) -> SymbolGrid:
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    if len(axes) != spec.n:
        raise ValueError(f"need {spec.n} grid axes")
    bound = max(float(np.max(np.abs(a))) for a in axes)
    use = nodes.refined(bound) if bound > nodes.max_frequency else nodes
    coeffs = _tensor_coefficients(use, axes)
    N = 1 << spec.n
    if far_points is None or len(far_points) == 0:
        fp = np.zeros((0, spec.n))
        fc = np.zeros((0, N), dtype=complex)
    else:
        fp = np.atleast_2d(np.asarray(far_points, dtype=float))
        fc = np.zeros((len(fp), N), dtype=complex)
        need = np.max(np.abs(fp), axis=1)
        for freq in np.unique(need):
            rows = need == freq
            fc[rows] = xor_coefficients_at(nodes.refined(float(freq)), fp[rows])
    grid = SymbolGrid(axes, coeffs, fp, fc)
    return SymbolGrid(axes, coeffs, fp, fc, detect_structure(grid))


def detect_structure(grid: SymbolGrid, tol: float = STRUCTURE_TOL) -> str:
    C = grid.flat_coeffs()
    if len(grid.far_coeffs):
        C = np.concatenate([C, grid.far_coeffs])
    N = C.shape[1]
    full = N - 1
    live = {d for d in range(N) if np.max(np.abs(C[:, d])) > tol}
    if live <= {0}:
        return "diagonal-scalar"
    if live == {full}:
        return "antidiagonal-block"
    if live == {0, full}:
        return "xor-block"
    return "general"


def symbol_inverse(sm: SymbolMatrix, tol: float = 1e-12) -> SymbolMatrix:
    lam = sm.eigenvalues
    det = complex(np.prod(lam))
    if abs(det) <= tol:
        raise SingularSymbolError(f"symbol is singular at s={sm.s.tolist()} (|det| = {abs(det):.3g})")
    return SymbolMatrix(sm.s, inverse_wht(1.0 / lam))


# --------------------------------------------------------------------------
# adjoint and composition


def _abs_det_expr(eigen) -> ex.Expr:
    det = eigen[0]
    for a in eigen[1:]:
        det = ex.binop("*", det, a)
    return ex.call("abs", det)


def adjoint_spec(spec: OperatorSpec) -> OperatorSpec:
    """Spec of the adjoint: kernel K(v)/|det A(v)|, eigenvalues 1/a_j(v)."""
    eig = spec.dilations.eigenvalues
    if isinstance(spec.kernel, ex.Expr) and all(isinstance(a, ex.Expr) for a in eig):
        kernel = ex.binop("/", spec.kernel, _abs_det_expr(eig))
        new_eig = tuple(ex.binop("/", ex.const(1.0), a) for a in eig)
    else:
        tab = spec.kernel if isinstance(spec.kernel, Table) else None
        nodes = tab.nodes if tab is not None else _atom_positions(spec)
        a = spec.dilations.values(nodes)
        kernel = Table(nodes, np.asarray(spec.kernel(nodes), float) / np.abs(np.prod(a, axis=0)), "adjoint kernel")
        new_eig = tuple(Table(nodes, 1.0 / a[j], f"adjoint a_{j + 1}") for j in range(spec.n))
    return OperatorSpec(
        name=f"{spec.name}-adjoint",
        n=spec.n,
        measure=spec.measure,
        kernel=kernel,
        dilations=DilationFamily(new_eig, spec.C),
        inherited_tail=spec.inherited_tail,
    )


def _atom_positions(spec):
    if not isinstance(spec.measure, AtomList):
        raise SpecError("/kernel", "tabulated kernels require an atom measure")
    return np.array([p[0] for p in spec.measure.points])


MAX_PRODUCT_NODES = 4_000_000


def compose_specs(
    spec1: OperatorSpec,
    spec2: OperatorSpec,
    nodes1: NodeSet | None = None,
    nodes2: NodeSet | None = None,
    cfg: QuadConfig | None = None,
) -> OperatorSpec:
    """Spec of the product H1 H2 on the product of the two node sets.

    The result is an atom measure; atoms with identical dilation eigenvalues
    are merged (their weighted kernels add), which is exact."""
    if spec1.n != spec2.n:
        raise SpecError("/n", f"dimension mismatch: {spec1.n} vs {spec2.n}")
    if not np.allclose(spec1.C, spec2.C, atol=1e-12, rtol=0):
        raise SpecError("/C", "composition requires a common conjugator C")
    nodes1 = nodes1 or discretize_measure(spec1, cfg)
    nodes2 = nodes2 or discretize_measure(spec2, cfg)
    total = len(nodes1) * len(nodes2)
    if total > MAX_PRODUCT_NODES:
        raise SpecError(
            "/measure",
            f"product node set too large ({total} atoms); discretise the factors with a coarser QuadConfig",
        )
    wk = (nodes1.w * nodes1.K)[:, None] * (nodes2.w * nodes2.K)[None, :]
    a = nodes1.a[:, :, None] * nodes2.a[:, None, :]
    wk = wk.ravel()
    a = a.reshape(spec1.n, -1)
    keys, inverse = np.unique(a.T, axis=0, return_inverse=True)
    merged = np.zeros(len(keys))
    np.add.at(merged, inverse.ravel(), wk)
    keep = merged != 0
    keys, merged = keys[keep], merged[keep]
    pos = np.arange(len(merged), dtype=float)
    b1, b2 = nodes1.l1_bound(), nodes2.l1_bound()
    t1, t2 = nodes1.tail_bound, nodes2.tail_bound
    tail = t1 * b2 + t2 * b1 + t1 * t2
    eig = tuple(Table(pos, keys[:, j], f"composed a_{j + 1}") for j in range(spec1.n))
    return OperatorSpec(
        name=f"{spec1.name}*{spec2.name}",
        n=spec1.n,
        measure=AtomList(tuple((float(p), 1.0) for p in pos)),
        kernel=Table(pos, merged, "composed kernel"),
        dilations=DilationFamily(eig, spec1.C),
        inherited_tail=tail,
    )


def default_axes(n: int, S: float | None = None, m: int | None = None):
    S = S if S is not None else (40.0 if n == 1 else 20.0)
    m = m if m is not None else (2049 if n == 1 else 257)
    return tuple(np.linspace(-S, S, m) for _ in range(n))


def far_field_points(n: int, radii=(1e2, 1e3, 1e4)) -> np.ndarray:
    """Directions +-e_j and +-(1,...,1)/sqrt(n) at each radius."""
    dirs = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        dirs += [e, -e]
    if n > 1:
        d = np.ones(n) / math.sqrt(n)
        dirs += [d, -d]
    return np.array([r * d for r in radii for d in dirs])
