"""Discretisation of the parameter measure into weighted nodes.

Interval measures use composite Gauss-Legendre panels.  Panels are refined
until the L1 integrand |K| |det A|^(-1/2) is resolved, geometrically graded
towards declared singular endpoints, and finally split so that the phase
``s . log|a(u)|`` changes by a bounded amount across each panel for every
``|s_j| <= max_frequency``.  The last step is what lets a single node set
evaluate the oscillatory symbol integrals on a whole frequency grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .expr import DomainError, ExprError
from .octants import ZeroEigenvalueError, xor_class
from .spec_model import AtomList, Counting, IntervalLebesgue, OperatorSpec


class QuadratureError(ValueError):
    pass


class NonIntegrableError(QuadratureError):
    pass


@dataclass(frozen=True)
class QuadConfig:
    order: int = 16
    tol: float = 1e-10
    depth: int = 80
    # frequency bound |s_j| the node set must resolve
    max_frequency: float = 40.0
    # cap on sum |K| |det A|^(-1/2) before the kernel counts as non-integrable
    bound_cap: float = 1e12

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("quadrature order must be >= 2")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.max_frequency < 0:
            raise ValueError("max_frequency must be non-negative")

    @property
    def phase_per_panel(self) -> float:
        return 0.375 * self.order


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Weighted nodes of a discretised measure with per-node cached values.

    Arrays are indexed by node; ``a`` and ``logabs`` have shape (n, N).
    """

    n: int
    u: np.ndarray
    w: np.ndarray
    K: np.ndarray
    a: np.ndarray
    logabs: np.ndarray
    absdet: np.ndarray
    delta: np.ndarray
    tail_bound: float = 0.0
    error_estimate: float = 0.0
    max_frequency: float = math.inf
    spec: OperatorSpec | None = field(default=None, repr=False)
    cfg: QuadConfig | None = field(default=None, repr=False)

    def __len__(self):
        return self.u.size

    @property
    def magnitude(self) -> np.ndarray:
        """Per-node contribution w |K| |det A|^(-1/2)."""
        return self.w * np.abs(self.K) * np.exp(-0.5 * self.logabs.sum(axis=0))

    @property
    def weighted_kernel(self) -> np.ndarray:
        return self.w * self.K

    def l1_bound(self) -> float:
        return float(np.sum(self.magnitude))

    def select(self, mask) -> "NodeSet":
        mask = np.asarray(mask)
        return replace(
            self,
            u=self.u[mask],
            w=self.w[mask],
            K=self.K[mask],
            a=self.a[:, mask],
            logabs=self.logabs[:, mask],
            absdet=self.absdet[mask],
            delta=self.delta[mask],
        )

    def refined(self, max_frequency: float) -> "NodeSet":
        """Node set resolving frequencies up to ``max_frequency``.

        Discrete measures are exact at every frequency and return ``self``.
        """
        if max_frequency <= self.max_frequency or self.spec is None:
            return self
        cfg = replace(self.cfg or QuadConfig(), max_frequency=float(max_frequency))
        return discretize_measure(self.spec, cfg)


def _node_values(spec: OperatorSpec, u: np.ndarray):
    try:
        K = np.broadcast_to(np.asarray(spec.kernel(u), dtype=float), u.shape).copy()
    except ExprError as exc:
        raise QuadratureError(f"kernel cannot be evaluated at quadrature nodes: {exc}") from exc
    keep = K != 0
    try:
        a = spec.dilations.values(u[keep]) if keep.any() else np.zeros((spec.n, 0))
    except ExprError as exc:
        raise QuadratureError(f"eigenvalue functions cannot be evaluated at quadrature nodes: {exc}") from exc
    return K, keep, a


def _build(spec, u, w, cfg, tail=0.0, err=0.0, freq=math.inf) -> NodeSet:
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    K, keep, a = _node_values(spec, u)
    zero = a == 0
    if zero.any():
        axis, k = (int(v[0]) for v in np.nonzero(zero))
        raise ZeroEigenvalueError(int(np.flatnonzero(keep)[k]), float(u[keep][k]), axis)
    with np.errstate(divide="ignore"):
        logabs = np.log(np.abs(a))
    ns = NodeSet(
        n=spec.n,
        u=u[keep],
        w=w[keep],
        K=K[keep],
        a=a,
        logabs=logabs,
        absdet=np.exp(logabs.sum(axis=0)),
        delta=xor_class(np.sign(a)) if a.size else np.zeros(0, dtype=np.int64),
        tail_bound=float(tail),
        error_estimate=float(err),
        max_frequency=freq,
        spec=spec,
        cfg=cfg,
    )
    bound = ns.l1_bound()
    if not np.isfinite(bound) or bound > cfg.bound_cap:
        raise NonIntegrableError(
            f"|K| |det A|^(-1/2) is not integrable on the discretised measure (sum = {bound:.3g})"
        )
    return ns


# --------------------------------------------------------------------------
# interval panels


class _PanelEvaluator:
    def __init__(self, spec: OperatorSpec, cfg: QuadConfig):
        self.spec = spec
        self.cfg = cfg
        self.x, self.wx = gauss_legendre(cfg.order)

    def nodes(self, lo, hi):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        u = mid[:, None] + half[:, None] * self.x[None, :]
        w = half[:, None] * self.wx[None, :]
        return u, w

    def magnitude_and_spread(self, lo, hi):
        """Per-panel integral of |K||det A|^(-1/2) and the spread of
        sum_j log|a_j| variation across the panel."""
        u, w = self.nodes(lo, hi)
        flat = u.ravel()
        K, keep, a = _node_values(self.spec, flat)
        mag = np.zeros(flat.size)
        spread = np.zeros(lo.size)
        if keep.any():
            absa = np.abs(a)
            if np.any(absa == 0):
                k = int(np.flatnonzero(np.any(absa == 0, axis=0))[0])
                axis = int(np.flatnonzero(absa[:, k] == 0)[0])
                raise ZeroEigenvalueError(int(np.flatnonzero(keep)[k]), float(flat[keep][k]), axis)
            logabs = np.log(absa)
            mag[keep] = np.abs(K[keep]) * np.exp(-0.5 * logabs.sum(axis=0))
            L = np.full((self.spec.n, flat.size), np.nan)
            L[:, keep] = logabs
            L = L.reshape(self.spec.n, lo.size, -1)
            with np.errstate(invalid="ignore"):
                rng = np.nanmax(L, axis=2) - np.nanmin(L, axis=2)
            rng = np.nan_to_num(rng, nan=0.0)
            # nodes sit strictly inside the panel; stretch to the full width
            span = (self.x[-1] - self.x[0]) / 2.0
            spread = rng.sum(axis=0) / span
        mags = (mag.reshape(lo.size, -1) * w).sum(axis=1)
        return mags, spread


def _grade(ev: _PanelEvaluator, e: float, c: float, cfg: QuadConfig):
    """Geometric panels towards the singular endpoint ``e`` of [e, c].

    Returns panel bounds and the geometric tail estimate of the dropped
    innermost piece."""
    levels = []
    mags = []
    k = 0
    L = c - e
    tail = math.inf
    while k < cfg.depth:
        ks = np.arange(k, min(k + 8, cfg.depth))
        p = e + L * np.power(2.0, -ks.astype(float))
        q = e + L * np.power(2.0, -(ks + 1).astype(float))
        lo, hi = np.minimum(p, q), np.maximum(p, q)
        # stop while the panel is still wide compared with the float spacing
        # near it; closer to a nonzero endpoint the nodes lose their offsets
        tiny = (hi - lo) < 4096 * np.spacing(np.maximum(np.abs(lo), np.abs(hi)))
        if np.any(tiny):
            cut = int(np.flatnonzero(tiny)[0])
            lo, hi, ks = lo[:cut], hi[:cut], ks[:cut]
            if not ks.size:
                break
        m, _ = ev.magnitude_and_spread(lo, hi)
        for j in range(ks.size):
            levels.append((lo[j], hi[j]))
            mags.append(m[j])
            if len(mags) >= 3 and mags[-2] > 0:
                r = mags[-1] / mags[-2]
                tail = mags[-1] * r / (1 - r) if r < 1 else math.inf
                if tail < 0.1 * cfg.tol or mags[-1] == 0:
                    return levels, max(tail, 0.0) if mags[-1] else 0.0
        k += ks.size
        if ks.size < 8:
            break
    if len(mags) >= 2 and mags[-1] == 0:
        return levels, 0.0
    if not tail < math.sqrt(cfg.tol):
        raise NonIntegrableError(
            f"refinement towards singular endpoint {e} did not converge within depth {cfg.depth}"
        )
    return levels, tail


def _adapt_magnitude(ev, lo, hi, total_len, cfg):
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    level = np.zeros(lo.size, dtype=int)
    done_lo, done_hi, err = [], [], 0.0
    while lo.size:
        mid = 0.5 * (lo + hi)
        m, _ = ev.magnitude_and_spread(lo, hi)
        ml, _ = ev.magnitude_and_spread(lo, mid)
        mr, _ = ev.magnitude_and_spread(mid, hi)
        diff = np.abs(m - (ml + mr))
        local = cfg.tol * np.maximum((hi - lo) / total_len, 1e-3)
        split = (diff > local) & (level < cfg.depth) & (mid > lo) & (mid < hi)
        done_lo.append(lo[~split])
        done_hi.append(hi[~split])
        err += float(diff[~split].sum())
        lo, hi, level = (
            np.concatenate([lo[split], mid[split]]),
            np.concatenate([mid[split], hi[split]]),
            np.concatenate([level[split], level[split]]) + 1,
        )
    return np.concatenate(done_lo), np.concatenate(done_hi), err


def _finite_log_at(spec, points):
    try:
        a = spec.dilations.values(np.asarray(points, float))
    except (ExprError, DomainError):
        return np.zeros(len(points), dtype=bool)
    return np.all(np.isfinite(a) & (a != 0), axis=0)


def _adapt_phase(ev, lo, hi, cfg):
    if cfg.max_frequency == 0:
        return lo, hi
    theta = cfg.phase_per_panel
    out_lo, out_hi = [], []
    level = np.zeros(lo.size, dtype=int)
    while lo.size:
        mags, spread = ev.magnitude_and_spread(lo, hi)
        need = np.ceil(spread * cfg.max_frequency / theta).astype(np.int64)
        ok = (need <= 1) | (mags < 1e-3 * cfg.tol) | (level >= cfg.depth)
        out_lo.append(lo[ok])
        out_hi.append(hi[ok])
        lo, hi, need, level = lo[~ok], hi[~ok], need[~ok], level[~ok]
        if not lo.size:
            break
        # panels touching a point where log|a| diverges are bisected,
        # everything else is split uniformly
        finite = _finite_log_at(ev.spec, lo) & _finite_log_at(ev.spec, hi)
        need = np.where(finite, np.minimum(need, 1 << 16), 2)
        reps = need
        starts = np.repeat(lo, reps)
        widths = np.repeat((hi - lo) / need, reps)
        idx = np.concatenate([np.arange(r) for r in reps])
        new_lo = starts + idx * widths
        new_hi = np.where(idx == np.repeat(need, reps) - 1, np.repeat(hi, reps), new_lo + widths)
        lo, hi = new_lo, new_hi
        level = np.repeat(level, reps) + 1
        good = hi > lo
        lo, hi, level = lo[good], hi[good], level[good]
    return np.concatenate(out_lo), np.concatenate(out_hi)


def _discretize_interval(spec: OperatorSpec, m: IntervalLebesgue, cfg: QuadConfig) -> NodeSet:
    ev = _PanelEvaluator(spec, cfg)
    a, b = m.a, m.b
    sing = set(m.singular_endpoints)
    pieces = []
    tail = 0.0
    if a in sing and b in sing:
        mid = 0.5 * (a + b)
        segs = [(a, mid), (b, mid)]
    elif a in sing:
        segs = [(a, b)]
    elif b in sing:
        segs = [(b, a)]
    else:
        segs = []
        pieces.append((a, b))
    for e, c in segs:
        levels, t = _grade(ev, e, c, cfg)
        pieces.extend(levels)
        tail += t
    lo = np.array([p[0] for p in pieces])
    hi = np.array([p[1] for p in pieces])
    lo, hi, err = _adapt_magnitude(ev, lo, hi, b - a, cfg)
    lo, hi = _adapt_phase(ev, lo, hi, cfg)
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    u, w = ev.nodes(lo, hi)
    return _build(spec, u.ravel(), w.ravel(), cfg, tail=0.0, err=err + tail, freq=cfg.max_frequency)


def discretize_measure(spec: OperatorSpec, cfg: QuadConfig | None = None) -> NodeSet:
    """Turn the spec's measure into a :class:`NodeSet`."""
    cfg = cfg or QuadConfig()
    m = spec.measure
    if isinstance(m, IntervalLebesgue):
        return _discretize_interval(spec, m, cfg)
    if isinstance(m, Counting):
        k = np.arange(m.start, m.truncate + 1, dtype=float)
        ns = _build(spec, k, np.ones_like(k), cfg)
        KN = abs(float(spec.kernel(float(m.truncate))))
        aN = spec.dilations.values(np.array([float(m.truncate)]))[:, 0]
        last = KN * float(np.prod(np.abs(aN))) ** -0.5 if KN else 0.0
        tail = last * m.tail_ratio / (1 - m.tail_ratio)
        return replace(ns, tail_bound=tail, error_estimate=tail, spec=None)
    if isinstance(m, AtomList):
        u = np.array([p[0] for p in m.points])
        w = np.array([p[1] for p in m.points])
        ns = _build(spec, u, w, cfg)
        return replace(ns, tail_bound=spec.inherited_tail, error_estimate=spec.inherited_tail, spec=None)
    raise TypeError(f"unsupported measure {type(m).__name__}")


def integrate(nodes: NodeSet, g) -> complex:
    """Sum of w_k g(u_k) in node order; ``g`` is an array over nodes or a
    callable receiving the node set."""
    vals = g(nodes) if callable(g) else g
    vals = np.broadcast_to(np.asarray(vals, dtype=complex), nodes.u.shape)
    if not np.all(np.isfinite(vals)):
        k = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise QuadratureError(f"non-finite integrand at node {k} (u={nodes.u[k]!r})")
    return complex(np.sum(nodes.w * vals))
