"""Sparse undirected covariate graph and precision-structured linear algebra.

The penalty-smoothing precision matrix associated with a graph and a vector
of nonnegative edge weights ``w`` is

    Omega = I + L_w,

where ``L_w`` is the weighted graph Laplacian: ``Omega[j, j] = 1 + sum of
incident weights`` and ``Omega[j, k] = -w_jk`` on edges.  Everything in this
module runs in O(p + |E|) time and memory; a dense p-by-p matrix is only ever
materialized by :func:`omega_dense`, which is reserved for small problems
(tests, full-Newton steps).

Edge weights are plain float arrays aligned with ``SparseGraph.edges``; use
:func:`validate_edge_weights` at trust boundaries.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import GraphInputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SparseGraph:
    """Immutable undirected graph on nodes ``0..p-1``.

    Attributes
    ----------
    p : int
        Number of nodes.
    edges : ndarray of shape (m, 2), int64
        Unique edges with ``edges[i, 0] < edges[i, 1]``, sorted
        lexicographically.
    degrees : ndarray of shape (p,), int64
        Number of edges incident to each node.
    """

    p: int
    edges: np.ndarray
    degrees: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise GraphInputError("edges must satisfy j < k")
            if edges.min() < 0 or edges.max() >= self.p:
                raise GraphInputError("edge endpoint outside 0..p-1")
            order = np.lexsort((edges[:, 1], edges[:, 0]))
            edges = edges[order]
            dup = np.all(edges[1:] == edges[:-1], axis=1)
            if np.any(dup):
                raise GraphInputError("duplicate edges are not allowed")
        object.__setattr__(self, "edges", edges)
        deg = np.bincount(edges.ravel(), minlength=self.p).astype(np.int64)
        object.__setattr__(self, "degrees", deg)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @classmethod
    def empty(cls, p: int) -> "SparseGraph":
        """Graph with no edges (identity Omega)."""
        return cls(p=p, edges=np.empty((0, 2), dtype=np.int64))

    @classmethod
    def from_edge_array(cls, p: int, pairs) -> "SparseGraph":
        """Build from an (m, 2) array of 0-based node pairs.

        Pairs are canonicalized to j < k and deduplicated; self-loops are
        rejected.
        """
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if pairs.size:
            if np.any(pairs[:, 0] == pairs[:, 1]):
                raise GraphInputError("self-loops are not allowed")
            lo = np.minimum(pairs[:, 0], pairs[:, 1])
            hi = np.maximum(pairs[:, 0], pairs[:, 1])
            if lo.min() < 0 or hi.max() >= p:
                raise GraphInputError("edge endpoint outside 0..p-1")
            pairs = np.unique(np.column_stack([lo, hi]), axis=0)
        return cls(p=p, edges=pairs)


def load_edge_list(text: str, p: int) -> SparseGraph:
    """Parse a 1-based edge-list document into a :class:`SparseGraph`.

    Each nonempty line holds two node ids in ``1..p`` separated by whitespace
    or commas.  Lines starting with ``#`` are ignored.  Duplicate edges
    (in either orientation) are merged with a warning; self-loops and
    out-of-range ids raise :class:`GraphInputError` naming the line.
    """
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.replace(",", " ").split()
        if len(tokens) != 2:
            raise GraphInputError(
                f"line {lineno}: expected two node ids, got {len(tokens)} tokens"
            )
        try:
            j, k = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise GraphInputError(
                f"line {lineno}: unparseable node id in {tokens!r}"
            ) from None
        for node in (j, k):
            if node < 1 or node > p:
                raise GraphInputError(
                    f"line {lineno}: node id {node} outside 1..{p}"
                )
        if j == k:
            raise GraphInputError(f"line {lineno}: self-loop on node {j}")
        rows.append((min(j, k) - 1, max(j, k) - 1))
    if rows:
        arr = np.array(rows, dtype=np.int64)
        unique = np.unique(arr, axis=0)
        if unique.shape[0] < arr.shape[0]:
            logger.warning(
                "edge list: merged %d duplicate edge(s)",
                arr.shape[0] - unique.shape[0],
            )
        arr = unique
    else:
        arr = np.empty((0, 2), dtype=np.int64)
    return SparseGraph(p=p, edges=arr)


def validate_edge_weights(g: SparseGraph, w: np.ndarray) -> np.ndarray:
    """Check that ``w`` is a nonnegative per-edge weight vector for ``g``."""
    w = np.asarray(w, dtype=np.float64).ravel()
    if w.shape[0] != g.n_edges:
        raise ValueError(
            f"expected {g.n_edges} edge weights, got {w.shape[0]}"
        )
    if w.size and w.min() < 0:
        raise ValueError("edge weights must be nonnegative")
    return w


def _check_vector(g: SparseGraph, v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.shape[0] != g.p:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {g.p}")
    return v


def omega_apply(g: SparseGraph, w: np.ndarray, v) -> np.ndarray:
    """Matrix-vector product ``Omega @ v`` in O(p + |E|).

    ``result[j] = (1 + sum_{k~j} w_jk) v[j] - sum_{k~j} w_jk v[k]``.
    """
    w = validate_edge_weights(g, w)
    v = _check_vector(g, v, "v")
    if g.n_edges == 0:
        return v.copy()
    js, ks = g.edges[:, 0], g.edges[:, 1]
    wsum = np.bincount(js, weights=w, minlength=g.p)
    wsum += np.bincount(ks, weights=w, minlength=g.p)
    out = (1.0 + wsum) * v
    out -= np.bincount(js, weights=w * v[ks], minlength=g.p)
    out -= np.bincount(ks, weights=w * v[js], minlength=g.p)
    return out


def omega_diagonal(g: SparseGraph, w: np.ndarray) -> np.ndarray:
    """Diagonal of Omega: ``1 + sum of incident edge weights``."""
    w = validate_edge_weights(g, w)
    diag = np.ones(g.p)
    if g.n_edges:
        diag += np.bincount(g.edges[:, 0], weights=w, minlength=g.p)
        diag += np.bincount(g.edges[:, 1], weights=w, minlength=g.p)
    return diag


def omega_quadratic_form(g: SparseGraph, w: np.ndarray, a, m) -> float:
    """Quadratic form ``(a - m)' Omega (a - m)``.

    Evaluated as ``sum_j (a_j - m_j)^2 + sum_edges w_jk (d_j - d_k)^2`` with
    ``d = a - m``, which is nonnegative for nonnegative weights and never
    builds a dense matrix.
    """
    w = validate_edge_weights(g, w)
    a = _check_vector(g, a, "a")
    m = _check_vector(g, m, "m")
    d = a - m
    total = float(d @ d)
    if g.n_edges:
        gaps = d[g.edges[:, 0]] - d[g.edges[:, 1]]
        total += float(w @ (gaps * gaps))
    return total


def omega_dense(g: SparseGraph, w: np.ndarray) -> np.ndarray:
    """Dense p-by-p Omega; only for small p (tests, full Newton steps)."""
    w = validate_edge_weights(g, w)
    omega = np.diag(omega_diagonal(g, w))
    if g.n_edges:
        js, ks = g.edges[:, 0], g.edges[:, 1]
        omega[js, ks] = -w
        omega[ks, js] = -w
    return omega
