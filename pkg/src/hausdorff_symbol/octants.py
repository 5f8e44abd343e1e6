"""Canonical hyperoctant enumeration.

Octant ``i`` in R^n is encoded by its bits: bit ``l`` of ``i`` is 0 when
coordinate ``l`` is positive and 1 when it is negative.  With this encoding
the reflection carrying U_i onto U_j is ``(-1)^(bits(i) XOR bits(j))``, and a
node whose eigenvalue signs have negative-pattern ``delta`` belongs to the set
Omega_ij exactly when ``delta == i ^ j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class HyperplaneError(ValueError):
    """A point lies on a coordinate hyperplane."""


class ZeroEigenvalueError(ValueError):
    def __init__(self, node_index: int, u: float, axis: int):
        self.node_index = node_index
        self.u = u
        self.axis = axis
        super().__init__(f"eigenvalue a_{axis + 1} vanishes at node {node_index} (u={u!r}) where K != 0")


def count(n: int) -> int:
    return 1 << n


def sign_vector(i: int, n: int) -> np.ndarray:
    """Sign pattern of octant ``i`` as a vector of +-1."""
    return np.array([-1.0 if (i >> l) & 1 else 1.0 for l in range(n)])


def epsilon(i: int, j: int, n: int) -> np.ndarray:
    """Sign vector e with e * U_i = U_j."""
    N = count(n)
    if not (0 <= i < N and 0 <= j < N):
        raise ValueError(f"octant indices must lie in [0, {N})")
    return sign_vector(i ^ j, n)


def octant_of_point(x) -> int:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x == 0):
        raise HyperplaneError(f"point {x.tolist()} lies on a coordinate hyperplane")
    return int(sum(1 << l for l in range(x.size) if x[l] < 0))


def octants_of_points(X: np.ndarray) -> np.ndarray:
    """Vectorised :func:`octant_of_point` for points stored as rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if np.any(X == 0):
        bad = int(np.flatnonzero(np.any(X == 0, axis=1))[0])
        raise HyperplaneError(f"point {X[bad].tolist()} lies on a coordinate hyperplane")
    bits = (X < 0).astype(np.int64)
    return bits @ (1 << np.arange(X.shape[1], dtype=np.int64))


def xor_class(signs: np.ndarray) -> np.ndarray:
    """Integer-coded negative pattern of sign rows ``signs`` (shape (n, K))."""
    signs = np.asarray(signs)
    n = signs.shape[0]
    return ((signs < 0).astype(np.int64).T @ (1 << np.arange(n, dtype=np.int64))).astype(np.int64)


def bits(delta: int, n: int) -> tuple[int, ...]:
    return tuple((delta >> l) & 1 for l in range(n))


@dataclass(frozen=True)
class NodeSignature:
    node: int
    signs: tuple[float, ...]
    delta: int

    def in_omega(self, i: int, j: int) -> bool:
        return self.delta == (i ^ j)


def classify_nodes(u, a_values, kernel_values=None) -> list[NodeSignature]:
    """Assign each node its XOR class from eigenvalue values ``a_values``
    (shape (n, K)).  Zero eigenvalues are an error where the kernel is nonzero."""
    a_values = np.atleast_2d(np.asarray(a_values, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    K = np.ones(u.size) if kernel_values is None else np.asarray(kernel_values, dtype=float)
    zero = (a_values == 0) & (K != 0)[None, :]
    if zero.any():
        axis, k = (int(v[0]) for v in np.nonzero(zero))
        raise ZeroEigenvalueError(k, float(u[k]), axis)
    signs = np.sign(a_values)
    deltas = xor_class(signs)
    return [NodeSignature(k, tuple(signs[:, k].tolist()), int(deltas[k])) for k in range(u.size)]


def block_permutation(mask: int, n: int) -> np.ndarray:
    """Order of canonical indices in which octant ``2^(n-1) + p`` of the new
    order is the reflection of octant ``p`` by the sign pattern ``mask``.

    With this ordering an XOR-block symbol supported on {0, mask} takes the
    two-by-two block form [[c0 I, cm I], [cm I, c0 I]].
    """
    if mask == 0:
        raise ValueError("mask must be nonzero")
    top = mask.bit_length() - 1
    first = [i for i in range(count(n)) if not (i >> top) & 1]
    return np.array(first + [i ^ mask for i in first])
