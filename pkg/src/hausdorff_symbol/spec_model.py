"""Operator specifications: measure, kernel, dilation eigenvalues, conjugator.

Spec documents are JSON; see ``docs/spec_format.md`` for the schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .expr import Expr, ExprError, evaluate, parse_expr


class SpecError(ValueError):
    """A spec document violates the schema or an invariant.

    ``path`` is a JSON-pointer-like location of the offending field.
    """

    def __init__(self, path: str, message: str, source: str | None = None):
        self.path = path
        self.source = source
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}{path}: {message}")


ORTHOGONALITY_TOL = 1e-12


@dataclass(frozen=True)
class IntervalLebesgue:
    a: float
    b: float
    open_endpoints: tuple[bool, bool] = (True, True)
    singular_endpoints: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.a < self.b:
            raise SpecError("/measure", f"interval requires a < b, got a={self.a}, b={self.b}")
        for e in self.singular_endpoints:
            if e not in (self.a, self.b):
                raise SpecError("/measure/singular_endpoints", f"{e} is not an endpoint of [{self.a}, {self.b}]")


@dataclass(frozen=True)
class Counting:
    start: int
    truncate: int
    tail_ratio: float

    def __post_init__(self):
        if not 0 < self.tail_ratio < 1:
            raise SpecError("/measure/tail_ratio", f"tail ratio must lie in (0, 1), got {self.tail_ratio}")
        if self.truncate < self.start:
            raise SpecError("/measure/truncate", "truncation index below start index")


@dataclass(frozen=True)
class AtomList:
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        us = [p[0] for p in self.points]
        if len(set(us)) != len(us):
            raise SpecError("/measure/points", "atom nodes must be distinct")
        for k, (_, w) in enumerate(self.points):
            if not w > 0:
                raise SpecError(f"/measure/points/{k}", f"atom weight must be positive, got {w}")


MeasureSpec = Union[IntervalLebesgue, Counting, AtomList]


class Table:
    """Function tabulated on a finite set of nodes; stands in for an
    expression on materialised atom measures (e.g. composed operators)."""

    def __init__(self, nodes, values, label: str = "table"):
        self.nodes = np.asarray(nodes, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.label = label
        self._index = {float(u): k for k, u in enumerate(self.nodes)}

    def __call__(self, u):
        u_arr = np.atleast_1d(np.asarray(u, dtype=float))
        try:
            idx = np.array([self._index[float(x)] for x in u_arr], dtype=int)
        except KeyError as exc:
            raise ExprError(f"{self.label} not tabulated at u={exc.args[0]}") from None
        out = self.values[idx]
        return float(out[0]) if np.ndim(u) == 0 else out.reshape(np.shape(u))

    def __str__(self):
        return f"<{self.label}: {len(self.nodes)} values>"

    def __eq__(self, other):
        return (
            isinstance(other, Table)
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


Function = Union[Expr, Table, Callable]


def _is_orthogonal(C: np.ndarray) -> float:
    return float(np.max(np.abs(C.T @ C - np.eye(C.shape[0]))))


@dataclass(frozen=True, eq=False)
class DilationFamily:
    """Simultaneously diagonalised dilations: A(u) = C diag(a_1(u),...,a_n(u)) C^T."""

    eigenvalues: tuple[Function, ...]
    C: np.ndarray = None

    def __post_init__(self):
        n = len(self.eigenvalues)
        if n < 1:
            raise SpecError("/eigenvalues", "at least one eigenvalue function required")
        C = np.eye(n) if self.C is None else np.array(self.C, dtype=float)
        if C.shape != (n, n):
            raise SpecError("/C", f"conjugator must be {n}x{n}, got shape {C.shape}")
        defect = _is_orthogonal(C)
        if defect > ORTHOGONALITY_TOL:
            raise SpecError("/C", f"conjugator is not orthogonal (max |C^T C - I| = {defect:.3g})")
        C.setflags(write=False)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def values(self, u) -> np.ndarray:
        """Eigenvalues at nodes ``u``; shape ``(n, len(u))``."""
        u = np.asarray(u, dtype=float)
        return np.stack([np.broadcast_to(np.asarray(a(u), dtype=float), u.shape) for a in self.eigenvalues])

    def matrix(self, u: float) -> np.ndarray:
        a = self.values(np.array([u]))[:, 0]
        return self.C @ np.diag(a) @ self.C.T


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    name: str
    n: int
    measure: MeasureSpec
    kernel: Function
    dilations: DilationFamily
    # truncation error already baked into a materialised atom measure
    inherited_tail: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dilations.n != self.n:
            raise SpecError("/eigenvalues", f"expected {self.n} eigenvalue expressions, got {self.dilations.n}")

    @property
    def C(self) -> np.ndarray:
        return self.dilations.C


@dataclass(frozen=True, eq=False)
class FunctionSpec:
    """Test function given per hyperoctant by an expression in x1..xn (``x``
    for n = 1) together with a support box in log coordinates t = log|x|."""

    n: int
    pieces: dict  # octant index -> (Expr, ((tmin, tmax), ...))

    def __post_init__(self):
        for i, (_, box) in self.pieces.items():
            if not 0 <= i < 2**self.n:
                raise SpecError(f"/octants/{i}", "octant index out of range")
            if len(box) != self.n:
                raise SpecError(f"/octants/{i}/support", f"support box needs {self.n} intervals")
            for lo, hi in box:
                if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                    raise SpecError(f"/octants/{i}/support", "support must be a bounded box in log coordinates")

    def evaluate(self, octant: int, t: np.ndarray) -> np.ndarray:
        """Values at log-coordinates ``t`` (shape ``(n, ...)``) on ``octant``;
        zero outside the support box."""
        t = np.asarray(t, dtype=float)
        if octant not in self.pieces:
            return np.zeros(t.shape[1:])
        e, box = self.pieces[octant]
        inside = np.ones(t.shape[1:], dtype=bool)
        for l, (lo, hi) in enumerate(box):
            inside &= (t[l] >= lo) & (t[l] <= hi)
        out = np.zeros(t.shape[1:])
        if not inside.any():
            return out
        sign = [(-1.0 if (octant >> l) & 1 else 1.0) for l in range(self.n)]
        env = {}
        for l in range(self.n):
            x = sign[l] * np.exp(t[l][inside])
            env[f"x{l + 1}"] = x
            if self.n == 1:
                env["x"] = x
        out[inside] = np.asarray(evaluate(e, **env), dtype=float)
        return out


def function_variables(n: int) -> tuple[str, ...]:
    names = tuple(f"x{l + 1}" for l in range(n))
    return names + (("x",) if n == 1 else ())


# --------------------------------------------------------------------------
# document parsing


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise SpecError(f"{path}/{key}", "missing required field")
    return doc[key]


def _number(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecError(path, f"expected a number, got {type(v).__name__}")
    return float(v)


def _expr(text, path: str, variables=("u",)) -> Expr:
    if not isinstance(text, str):
        raise SpecError(path, "expected an expression string")
    try:
        return parse_expr(text, variables)
    except ExprError as exc:
        raise SpecError(path, str(exc)) from None


def _parse_measure(m) -> MeasureSpec:
    if not isinstance(m, dict):
        raise SpecError("/measure", "expected an object")
    kind = _require(m, "type", "/measure")
    if kind == "interval":
        a = _number(_require(m, "a", "/measure"), "/measure/a")
        b = _number(_require(m, "b", "/measure"), "/measure/b")
        sing = []
        for k, e in enumerate(m.get("singular_endpoints", [])):
            if e == "a":
                sing.append(a)
            elif e == "b":
                sing.append(b)
            else:
                sing.append(_number(e, f"/measure/singular_endpoints/{k}"))
        opened = m.get("open", [True, True])
        return IntervalLebesgue(a, b, tuple(bool(x) for x in opened), tuple(sing))
    if kind == "counting":
        start = m.get("start", 0)
        trunc = _require(m, "truncate", "/measure")
        for key, v in (("start", start), ("truncate", trunc)):
            if isinstance(v, bool) or not isinstance(v, int):
                raise SpecError(f"/measure/{key}", "expected an integer")
        r = _number(_require(m, "tail_ratio", "/measure"), "/measure/tail_ratio")
        return Counting(start, trunc, r)
    if kind == "atoms":
        pts = _require(m, "points", "/measure")
        if not isinstance(pts, list) or not pts:
            raise SpecError("/measure/points", "expected a non-empty list of [u, w] pairs")
        pairs = []
        for k, p in enumerate(pts):
            if not isinstance(p, list) or len(p) != 2:
                raise SpecError(f"/measure/points/{k}", "expected [u, w]")
            pairs.append((_number(p[0], f"/measure/points/{k}/0"), _number(p[1], f"/measure/points/{k}/1")))
        return AtomList(tuple(pairs))
    raise SpecError("/measure/type", f"unknown measure type {kind!r}")


def parse_config(document, source: str | None = None) -> OperatorSpec:
    """Build a validated :class:`OperatorSpec` from a JSON string or dict."""
    try:
        if isinstance(document, (str, bytes)):
            try:
                doc = json.loads(document)
            except json.JSONDecodeError as exc:
                raise SpecError("/", f"invalid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}") from None
        else:
            doc = document
        if not isinstance(doc, dict):
            raise SpecError("/", "spec document must be a JSON object")
        name = _require(doc, "name", "")
        if not isinstance(name, str):
            raise SpecError("/name", "expected a string")
        n = _require(doc, "n", "")
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise SpecError("/n", "dimension must be a positive integer")
        measure = _parse_measure(_require(doc, "measure", ""))
        kernel = _expr(_require(doc, "kernel", ""), "/kernel")
        eig = _require(doc, "eigenvalues", "")
        if not isinstance(eig, list):
            raise SpecError("/eigenvalues", "expected a list of expression strings")
        if len(eig) != n:
            raise SpecError("/eigenvalues", f"dimension mismatch: n={n} but {len(eig)} eigenvalue expressions")
        eigen = tuple(_expr(t, f"/eigenvalues/{k}") for k, t in enumerate(eig))
        C = doc.get("C")
        if C is not None:
            try:
                C = np.array(C, dtype=float)
            except (TypeError, ValueError):
                raise SpecError("/C", "expected a numeric n x n array") from None
        dil = DilationFamily(eigen, C)
        return OperatorSpec(name=name, n=n, measure=measure, kernel=kernel, dilations=dil)
    except SpecError as exc:
        if source and exc.source is None:
            raise SpecError(exc.path, str(exc).split(": ", 1)[-1], source) from None
        raise


def load_spec(path) -> OperatorSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError("/", f"cannot read spec file: {exc}", str(path)) from None
    return parse_config(text, source=str(path))


def parse_function(document, n: int | None = None) -> FunctionSpec:
    """Parse a test-function document::

        {"n": 1, "octants": {"0": {"expr": "x^(-0.5)", "support": [[0, 1]]}}}
    """
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SpecError("/", f"invalid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}") from None
    else:
        doc = document
    if not isinstance(doc, dict):
        raise SpecError("/", "function document must be a JSON object")
    nn = doc.get("n", n)
    if nn is None:
        raise SpecError("/n", "missing dimension")
    if n is not None and nn != n:
        raise SpecError("/n", f"function dimension {nn} does not match operator dimension {n}")
    pieces = {}
    octs = _require(doc, "octants", "")
    for key, piece in octs.items():
        i = int(key)
        e = _expr(_require(piece, "expr", f"/octants/{key}"), f"/octants/{key}/expr", function_variables(nn))
        box = tuple(tuple(float(v) for v in iv) for iv in _require(piece, "support", f"/octants/{key}"))
        pieces[i] = (e, box)
    return FunctionSpec(nn, pieces)
