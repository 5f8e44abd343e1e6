"""Operator-level facts read off the matrix symbol: norm, spectrum, point
spectrum, invertibility and self-adjoint / unitary / positive classification.

Every Phi(s) is normal and block-diagonalised by the Walsh-Hadamard
transform, so all quantities here are reductions over the eigenvalue
branches lambda_chi(s) sampled on an s-grid plus a few far-field points.
"""

from __future__ import annotations

import functools
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from .mellin import LogGrid, galerkin_matrix
from .quadrature import NodeSet
from .spec_model import OperatorSpec
from .symbol import SymbolGrid, default_axes, far_field_points, symbol_grid, wht, xor_coefficients_at


@dataclass(frozen=True)
class SGrid:
    """Sampling of s in R^n: [-S, S] with ``m`` points per axis plus far-field
    radii along the coordinate and diagonal directions."""

    n: int
    S: float
    m: int
    far: tuple[float, ...] = (1e2, 1e3, 1e4)

    def __post_init__(self):
        if not self.S > 0:
            raise ValueError("grid half-width S must be positive")
        if self.m < 3:
            raise ValueError("need at least 3 grid points per axis")

    @classmethod
    def default(cls, n: int) -> "SGrid":
        return cls(n, 40.0 if n == 1 else 20.0, 2049 if n == 1 else 257)

    def axes(self):
        return default_axes(self.n, self.S, self.m)

    @property
    def cell(self) -> float:
        return 2 * self.S / (self.m - 1)

    @property
    def volume(self) -> float:
        return (2 * self.S) ** self.n

    def far_points(self) -> np.ndarray:
        return far_field_points(self.n, self.far) if self.far else np.zeros((0, self.n))


@functools.lru_cache(maxsize=16)
def _cached_symbols(spec: OperatorSpec, nodes: NodeSet, grid: SGrid) -> SymbolGrid:
    return symbol_grid(spec, nodes, grid.axes(), grid.far_points())


def symbols(spec: OperatorSpec, nodes: NodeSet, grid: SGrid | SymbolGrid | None = None) -> SymbolGrid:
    """Symbol grid for ``grid``; repeated requests with the same objects reuse
    the previous evaluation."""
    if isinstance(grid, SymbolGrid):
        return grid
    return _cached_symbols(spec, nodes, grid or SGrid.default(spec.n))


def _samples(sg: SymbolGrid):
    """All (s, eigenvalue row) pairs, grid first then far field."""
    pts = np.concatenate([sg.points(), sg.far_points]) if len(sg.far_points) else sg.points()
    lam = np.concatenate([sg.eigenvalues(), sg.far_eigenvalues()]) if len(sg.far_points) else sg.eigenvalues()
    return pts, lam


def _tolist(s) -> list[float]:
    return [float(v) for v in np.atleast_1d(s)]


def _pick(values: np.ndarray, pts: np.ndarray, largest: bool) -> int:
    """Index of the extremum; near-ties (1e-12 relative) go to the smallest |s|."""
    best = values.max() if largest else values.min()
    slack = 1e-12 * max(abs(best), 1e-300)
    ties = np.flatnonzero(np.abs(values - best) <= slack)
    return int(ties[np.argmin(np.linalg.norm(pts[ties], axis=1))])


def _polish(nodes: NodeSet, reduce, s0, h: float, largest: bool):
    """Refine a grid extremum of ``reduce(eigenvalues)`` inside the cell
    around ``s0``.  Returns (value, s); the grid value is kept unless the
    local search improves on it."""
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    sign = -1.0 if largest else 1.0

    def f(s):
        lam = wht(xor_coefficients_at(nodes, np.atleast_2d(s)))[0]
        return sign * float(reduce(lam))

    start = f(s0)
    if s0.size == 1:
        res = optimize.minimize_scalar(lambda x: f([x]), bounds=(s0[0] - h, s0[0] + h), method="bounded", options={"xatol": 1e-12})
        x, val = np.array([res.x]), res.fun
    else:
        simplex = np.vstack([s0] + [s0 + h * e for e in np.eye(s0.size)])
        res = optimize.minimize(f, s0, method="Nelder-Mead", options={"initial_simplex": simplex, "xatol": 1e-10, "fatol": 1e-15})
        x, val = res.x, res.fun
        if np.max(np.abs(x - s0)) > 2 * h:
            return sign * start, s0
    if val < start:
        return sign * val, x
    return sign * start, s0


def _grid_step(sg: SymbolGrid) -> float:
    return max(float(a[1] - a[0]) if a.size > 1 else 0.0 for a in sg.axes)


# --------------------------------------------------------------------------
# norms


def norm_bound(spec: OperatorSpec, nodes: NodeSet) -> float:
    """Integral of |K| |det A|^(-1/2) over the discretised measure."""
    return nodes.l1_bound()


@dataclass(frozen=True)
class NormReport:
    norm: float
    argmax_s: list
    bound: float
    sup_distance_from_one: float
    tail_bound: float

    def to_dict(self) -> dict:
        return asdict(self)


def operator_norm(spec: OperatorSpec, nodes: NodeSet, grid=None) -> NormReport:
    sg = symbols(spec, nodes, grid)
    pts, lam = _samples(sg)
    mag = np.abs(lam).max(axis=1)
    k = _pick(mag, pts, largest=True)
    value, where = float(mag[k]), pts[k]
    if k < sg.coeffs[..., 0].size and _grid_step(sg) > 0:
        value, where = _polish(nodes, lambda l: np.abs(l).max(), pts[k], _grid_step(sg), largest=True)
    return NormReport(
        norm=float(value),
        argmax_s=_tolist(where),
        bound=norm_bound(spec, nodes),
        sup_distance_from_one=float(np.abs(lam - 1.0).max()),
        tail_bound=float(nodes.tail_bound),
    )


# --------------------------------------------------------------------------
# spectrum


@dataclass(frozen=True)
class PointSpectrumCandidate:
    value: complex
    measure: float
    cells: int

    def to_dict(self) -> dict:
        return {"re": self.value.real, "im": self.value.imag, "measure": self.measure, "cells": self.cells}


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    points: np.ndarray  # (P, n) grid frequencies
    eigenvalues: np.ndarray  # (P, 2^n)
    far_points: np.ndarray
    far_eigenvalues: np.ndarray
    candidates: list = field(default_factory=list)
    tol: float = 1e-6
    cell: float = 0.0

    def all_samples(self) -> np.ndarray:
        return np.concatenate([self.eigenvalues.ravel(), self.far_eigenvalues.ravel()])

    def to_csv(self) -> str:
        n = self.points.shape[1]
        buf = io.StringIO()
        buf.write(",".join([f"s_{l + 1}" for l in range(n)] + ["chi", "re", "im", "far"]) + "\n")
        for pts, lam, far in ((self.points, self.eigenvalues, 0), (self.far_points, self.far_eigenvalues, 1)):
            for s, row in zip(pts, lam):
                head = [repr(float(v)) for v in s]
                for chi, v in enumerate(row):
                    buf.write(",".join(head + [str(chi), repr(float(v.real)), repr(float(v.imag)), str(far)]) + "\n")
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "tol": self.tol,
            "cell": self.cell,
            "samples": int(self.eigenvalues.size + self.far_eigenvalues.size),
            "point_spectrum": [c.to_dict() for c in self.candidates],
        }


def spectrum(spec: OperatorSpec, nodes: NodeSet, grid=None, tol: float = 1e-6) -> SpectrumEstimate:
    """Eigenvalue cloud of the symbol over the grid, far-field samples as
    closure candidates, and point-spectrum candidates at ``tol``."""
    sg = symbols(spec, nodes, grid)
    sgrid = grid if isinstance(grid, SGrid) else None
    return SpectrumEstimate(
        points=sg.points(),
        eigenvalues=sg.eigenvalues(),
        far_points=sg.far_points,
        far_eigenvalues=sg.far_eigenvalues(),
        candidates=point_spectrum_estimate(spec, nodes, sg, tol),
        tol=tol,
        cell=sgrid.cell if sgrid else _cell_volume(sg),
    )


def resolvent_margin(spec: OperatorSpec, nodes: NodeSet, grid, lam: complex) -> dict:
    """min over sampled s of |det(lam - Phi(s))| with the witnessing s."""
    sg = symbols(spec, nodes, grid)
    pts, ev = _samples(sg)
    d = np.prod(np.abs(lam - ev), axis=1)
    k = _pick(d, pts, largest=False)
    value, where = float(d[k]), pts[k]
    if k < sg.coeffs[..., 0].size and _grid_step(sg) > 0:
        value, where = _polish(nodes, lambda l: np.prod(np.abs(lam - l)), pts[k], _grid_step(sg), largest=False)
    return {"margin": float(value), "s": _tolist(where)}


def _cell_volume(sg: SymbolGrid) -> float:
    return float(np.prod([a[1] - a[0] if a.size > 1 else 1.0 for a in sg.axes]))


def _cluster(values: np.ndarray, radius: float) -> list[complex]:
    """Greedy clustering, smallest |lambda| first; returns cluster means."""
    order = np.argsort(np.abs(values), kind="stable")
    vals = values[order]
    alive = np.ones(vals.size, dtype=bool)
    out = []
    for k in range(vals.size):
        if not alive[k]:
            continue
        near = alive & (np.abs(vals - vals[k]) <= radius)
        out.append(complex(np.mean(vals[near])))
        alive &= ~near
    return out


def point_spectrum_estimate(spec: OperatorSpec, nodes: NodeSet, grid, tol: float = 1e-6) -> list[PointSpectrumCandidate]:
    """Heuristic detection of eigenvalues with level sets of positive measure.

    A grid point counts toward E(lambda) when lambda is within ``tol`` of a
    branch there and at each of its axis neighbours, so that lines and other
    null level sets crossing the grid are not mistaken for positive measure.
    Candidate values come from branches that agree to ``tol`` between
    neighbouring grid points and are clustered at radius 10 tol.  Values
    whose estimated measure exceeds one cell are reported."""
    sg = symbols(spec, nodes, grid)
    lam = sg.eigenvalues().reshape(*[a.size for a in sg.axes], -1)
    n = lam.ndim - 1
    cands = []
    for ax in range(n):
        a = np.moveaxis(lam, ax, 0)
        if a.shape[0] < 2:
            continue
        left, right = a[:-1], a[1:]
        close = np.abs(left[..., :, None] - right[..., None, :]) < tol
        hit = close.any(axis=-1)
        cands.append(left[hit])
    if not cands:
        return []
    values = np.concatenate(cands)
    if values.size == 0:
        return []
    volume = float(np.prod([a[-1] - a[0] for a in sg.axes]))
    total = lam[..., 0].size
    out = []
    for v in _cluster(values, 10 * tol):
        near = (np.abs(lam - v) < tol).any(axis=-1)
        full = near.copy()
        for ax in range(n):
            prev = np.ones_like(near)
            nxt = np.ones_like(near)
            sl_a = [slice(None)] * n
            sl_b = [slice(None)] * n
            sl_a[ax], sl_b[ax] = slice(1, None), slice(None, -1)
            prev[tuple(sl_a)] = near[tuple(sl_b)]
            nxt[tuple(sl_b)] = near[tuple(sl_a)]
            full &= prev & nxt
        count = int(full.sum())
        if count > 1:
            out.append(PointSpectrumCandidate(v, count / total * volume, count))
    return out


# --------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class Property:
    holds: bool
    value: float  # violation magnitude, or the reported extremum
    witness_s: list

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ClassificationReport:
    tol: float
    self_adjoint: Property
    positive: Property  # value = minimum real eigenvalue
    unitary: Property
    invertible: Property  # value = min |det Phi|
    nonzero: Property  # value = max |lambda|

    def to_dict(self) -> dict:
        return {
            "tol": self.tol,
            "self_adjoint": self.self_adjoint.to_dict(),
            "positive": self.positive.to_dict(),
            "unitary": self.unitary.to_dict(),
            "invertible": self.invertible.to_dict(),
            "nonzero": self.nonzero.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def classify(spec: OperatorSpec, nodes: NodeSet, grid=None, tol: float = 1e-6) -> ClassificationReport:
    sg = symbols(spec, nodes, grid)
    pts = np.concatenate([sg.points(), sg.far_points]) if len(sg.far_points) else sg.points()
    C = np.concatenate([sg.flat_coeffs(), sg.far_coeffs]) if len(sg.far_points) else sg.flat_coeffs()
    lam = wht(C)

    # Phi - Phi^* is again an XOR matrix with coefficients c - conj(c)
    skew = np.abs(wht(C - np.conj(C))).max(axis=1)
    k_sa = int(np.argmax(skew))
    self_adjoint = Property(bool(skew[k_sa] <= tol), float(skew[k_sa]), _tolist(pts[k_sa]))

    re = lam.real.min(axis=1)
    k_pos = int(np.argmin(re))
    positive = Property(bool(self_adjoint.holds and re[k_pos] >= -tol), float(re[k_pos]), _tolist(pts[k_pos]))

    udef = np.abs(np.abs(lam) ** 2 - 1.0).max(axis=1)
    k_u = int(np.argmax(udef))
    unitary = Property(bool(udef[k_u] <= tol), float(udef[k_u]), _tolist(pts[k_u]))

    det = np.prod(np.abs(lam), axis=1)
    k_d = _pick(det, pts, largest=False)
    dmin, dwhere = float(det[k_d]), pts[k_d]
    if k_d < sg.coeffs[..., 0].size and _grid_step(sg) > 0:
        dmin, dwhere = _polish(nodes, lambda l: np.prod(np.abs(l)), pts[k_d], _grid_step(sg), largest=False)
    invertible = Property(bool(dmin > tol), float(dmin), _tolist(dwhere))

    mag = np.abs(lam).max(axis=1)
    k_m = int(np.argmax(mag))
    nonzero = Property(bool(mag[k_m] > tol), float(mag[k_m]), _tolist(pts[k_m]))
    return ClassificationReport(tol, self_adjoint, positive, unitary, invertible, nonzero)


# --------------------------------------------------------------------------
# noncompactness


def noncompactness_probe(spec: OperatorSpec, nodes: NodeSet, sizes=(32, 64, 128), threshold: float = 0.5, loggrid=None) -> dict:
    """Counts of Galerkin singular values above ``threshold``; a sequence that
    keeps growing with the basis size is consistent with noncompactness."""
    loggrid = loggrid or LogGrid.default(spec.n)
    counts = []
    for N in sizes:
        sv = np.linalg.svd(galerkin_matrix(spec, nodes, int(N), loggrid), compute_uv=False)
        counts.append(int(np.sum(sv > threshold)))
    increasing = all(b > a for a, b in zip(counts, counts[1:]))
    return {"sizes": [int(N) for N in sizes], "threshold": threshold, "counts": counts, "strictly_increasing": increasing}


def spectral_radius_check(est: SpectrumEstimate, norm: float) -> float:
    """Largest excess of |lambda| over ``norm`` (non-positive when contained)."""
    return float(np.max(np.abs(est.all_samples())) - norm) if est.all_samples().size else -math.inf
