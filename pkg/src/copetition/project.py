"""One-mode projections of the actor/item graph and their significance weights.

Two same-side nodes are linked when at least one opposite-side node touches
both; ``co_count`` is the number of such shared neighbors (tweet multiplicity
is ignored). Edge weights are normalized pointwise mutual information with
ordered-endpoint marginals::

    N = 2W,  P(x,y) = c(x,y)/N,  P(x) = s(x)/N
    weight = log2(P(x,y) / (P(x) P(y))) / -log2 P(x,y)

where ``W`` is the total co-count over unordered pairs and ``s(x)`` the
node strength. With this convention every weight lies in (-1, 1] and equals 1
exactly for a pair that only co-occurs with itself.
"""
from __future__ import annotations

import csv
import logging
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .bigraph import BipartiteGraph, CacheError, _pack_strings, _Reader, check_header

log = logging.getLogger(__name__)

SIDES = ("item", "actor")
MAGIC = b"CPP1"
VERSION = 1
DEFAULT_MAX_DEGREE_WARNING = 50_000
# target number of candidate pair entries materialized per row block
_BLOCK_PAIRS = 4_000_000


@dataclass(frozen=True, eq=False)
class Projection:
    """Weighted undirected one-mode graph over one side of a BipartiteGraph.

    ``a``/``b``/``co_count``/``weight`` are parallel edge arrays with
    ``a < b`` and rows sorted lexicographically by ``(a, b)``. ``weight`` is
    ``None`` until :func:`weigh` runs. ``total_co_mass`` and ``strength``
    always describe the unfiltered projection the weights were computed on.
    ``nodes`` lists the dense ids present (all of them unless isolated nodes
    were dropped by :func:`filter_edges`).
    """
    side: str
    labels: tuple[str, ...]
    nodes: np.ndarray
    a: np.ndarray
    b: np.ndarray
    co_count: np.ndarray
    weight: np.ndarray | None
    total_co_mass: int
    strength: np.ndarray

    @property
    def n_edges(self) -> int:
        return int(self.a.size)

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.size)

    def equals(self, other: "Projection") -> bool:
        if (self.side, self.labels, self.total_co_mass) != (other.side, other.labels, other.total_co_mass):
            return False
        if (self.weight is None) != (other.weight is None):
            return False
        arrays = ["nodes", "a", "b", "co_count", "strength"] + ([] if self.weight is None else ["weight"])
        return all(np.array_equal(getattr(self, n), getattr(other, n)) for n in arrays)


@dataclass(frozen=True)
class FilterSpec:
    quantile: float
    drop_isolated: bool = False

    def __post_init__(self):
        q = self.quantile
        if isinstance(q, bool) or not isinstance(q, (int, float)) or not (0.0 < q <= 1.0):
            raise ValueError(f"quantile must lie in (0, 1], got {q!r}")


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("COPETITION_THREADS", "1")))
    except ValueError:
        return 1


def _upper_pairs(left: sp.csr_matrix, right_t: sp.csr_matrix, r0: int, r1: int):
    """Strictly-upper entries of rows r0:r1 of left @ left.T."""
    block = (left[r0:r1] @ right_t).tocsr()
    block.sort_indices()
    rows = np.repeat(np.arange(r0, r1, dtype=np.int64), np.diff(block.indptr))
    cols = block.indices.astype(np.int64)
    keep = cols > rows
    return rows[keep].astype(np.int32), cols[keep].astype(np.int32), block.data[keep].astype(np.int64)


def project(graph: BipartiteGraph, side: str,
            max_degree_warning: int = DEFAULT_MAX_DEGREE_WARNING) -> Projection:
    """Unweighted co-count projection onto ``side`` ("item" or "actor").

    Co-counts come from a binary sparse product computed in row blocks, so
    memory follows the number of projected edges plus the graph size.
    """
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}, got {side!r}")
    if side == "actor":
        left = graph.incidence_matrix(binary=True)
        opposite_degree = graph.item_degree()
        labels = graph.actor_ids
    else:
        left = graph.incidence_matrix_t(binary=True)
        opposite_degree = graph.actor_degree()
        labels = graph.item_ids
    n = left.shape[0]
    heavy = int(np.count_nonzero(opposite_degree > max_degree_warning))
    if heavy:
        log.warning("%d opposite-side nodes exceed degree %d (max %d); projection cost grows "
                    "quadratically in their degree", heavy, max_degree_warning, int(opposite_degree.max()))
    right_t = left.T.tocsr()

    # block boundaries chosen so each block's candidate pair volume is bounded
    per_row = np.zeros(n, dtype=np.float64)
    if left.nnz:
        per_row = np.asarray(left @ opposite_degree.astype(np.float64)).ravel()
    cum = np.cumsum(per_row)
    cuts = np.searchsorted(cum, np.arange(_BLOCK_PAIRS, cum[-1] if n else 0, _BLOCK_PAIRS), side="right")
    bounds = np.unique(np.concatenate([[0], cuts, [n]])).tolist() if n else [0]
    chunks = list(zip(bounds[:-1], bounds[1:]))

    if _threads() > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(_threads()) as pool:
            parts = list(pool.map(lambda c: _upper_pairs(left, right_t, *c), chunks))
    else:
        parts = [_upper_pairs(left, right_t, *c) for c in chunks]
    if parts:
        a = np.concatenate([p[0] for p in parts])
        b = np.concatenate([p[1] for p in parts])
        c = np.concatenate([p[2] for p in parts])
    else:
        a = b = np.zeros(0, dtype=np.int32)
        c = np.zeros(0, dtype=np.int64)
    del parts
    strength = (np.bincount(a, weights=c, minlength=n) + np.bincount(b, weights=c, minlength=n))
    return Projection(
        side=side, labels=tuple(labels), nodes=np.arange(n, dtype=np.int64),
        a=a, b=b, co_count=c, weight=None,
        total_co_mass=int(c.sum()), strength=strength.astype(np.int64),
    )


def npmi(co_count, strength_a, strength_b, total_co_mass):
    """Normalized PMI weight for arrays of co-counts and endpoint strengths."""
    N = 2.0 * total_co_mass
    pxy = np.asarray(co_count, dtype=np.float64) / N
    px = np.asarray(strength_a, dtype=np.float64) / N
    py = np.asarray(strength_b, dtype=np.float64) / N
    return np.log2(pxy / (px * py)) / -np.log2(pxy)


def weigh(proj: Projection) -> Projection:
    """Attach significance weights to every stored edge."""
    if proj.total_co_mass <= 0:
        raise ValueError("cannot weigh a projection without edges (W = 0)")
    # N = 2W bounds P(x,y) by 1/2, so the denominator is at least 1
    assert int(proj.co_count.max()) <= proj.total_co_mass
    w = npmi(proj.co_count, proj.strength[proj.a], proj.strength[proj.b], proj.total_co_mass)
    return replace(proj, weight=w)


def keep_count(quantile: float, n_edges: int) -> int:
    """ceil(q * E), robust to binary floating-point noise in q * E."""
    return min(n_edges, math.ceil(round(quantile * n_edges, 9)))


def filter_edges(proj: Projection, spec: FilterSpec) -> Projection:
    """Keep the ceil(q*E) highest-weight edges.

    Ties at the threshold weight are resolved in favour of lexicographically
    smaller ``(a, b)``; edges are stored in that order already, so the first
    tied edges in storage order win.
    """
    if proj.weight is None:
        raise ValueError("projection has no weights; call weigh() first")
    E = proj.n_edges
    k = keep_count(spec.quantile, E)
    if k >= E:
        keep = np.ones(E, dtype=bool)
    elif k == 0:
        keep = np.zeros(E, dtype=bool)
    else:
        w = proj.weight
        thr = np.partition(w, E - k)[E - k]
        keep = w > thr
        need = k - int(keep.sum())
        tied = np.flatnonzero(w == thr)[:need]
        keep[tied] = True
    a, b = proj.a[keep], proj.b[keep]
    nodes = proj.nodes
    if spec.drop_isolated:
        present = np.zeros(len(proj.labels), dtype=bool)
        present[a] = True
        present[b] = True
        nodes = nodes[present[nodes]]
    return replace(proj, nodes=nodes, a=a, b=b, co_count=proj.co_count[keep], weight=proj.weight[keep])


def positive_edges(proj: Projection):
    """Edges with weight > 0 as ``(a, b, w)`` plus the number dropped.

    Unweighted projections fall back to co-counts.
    """
    w = proj.weight if proj.weight is not None else proj.co_count.astype(np.float64)
    keep = w > 0
    return proj.a[keep], proj.b[keep], w[keep], int(w.size - keep.sum())


def compact_adjacency(proj: Projection) -> tuple[sp.csr_matrix, int]:
    """Symmetric CSR matrix over ``proj.nodes`` (positive weights only) and the dropped-edge count."""
    a, b, w, dropped = positive_edges(proj)
    n = proj.n_nodes
    pos = np.full(len(proj.labels), -1, dtype=np.int64)
    pos[proj.nodes] = np.arange(n)
    ia, ib = pos[a], pos[b]
    if np.any(ia < 0) or np.any(ib < 0):
        raise ValueError("edge endpoint missing from node list")
    A = sp.coo_matrix((np.concatenate([w, w]), (np.concatenate([ia, ib]), np.concatenate([ib, ia]))),
                      shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A, dropped


# --- export -----------------------------------------------------------------

def write_csv(proj: Projection, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("node_a", "node_b", "co_count", "weight"))
        weights = proj.weight if proj.weight is not None else np.full(proj.n_edges, np.nan)
        labels = proj.labels
        for x, y, c, wt in zip(proj.a.tolist(), proj.b.tolist(), proj.co_count.tolist(), weights.tolist()):
            w.writerow((labels[x], labels[y], c, repr(wt)))


def dumps(proj: Projection) -> bytes:
    has_w = proj.weight is not None
    parts = [
        MAGIC, struct.pack("<I", VERSION),
        struct.pack("<BB", SIDES.index(proj.side), int(has_w)),
        struct.pack("<QQQQ", len(proj.labels), proj.n_nodes, proj.n_edges, proj.total_co_mass),
        _pack_strings(proj.labels),
        proj.strength.astype("<u8").tobytes(),
        proj.nodes.astype("<u4").tobytes(),
        proj.a.astype("<u4").tobytes(),
        proj.b.astype("<u4").tobytes(),
        proj.co_count.astype("<u8").tobytes(),
    ]
    if has_w:
        parts.append(proj.weight.astype("<f8").tobytes())
    return b"".join(parts)


def loads(buf: bytes) -> Projection:
    r = _Reader(buf)
    check_header(r, MAGIC, VERSION)
    side_code, has_w = struct.unpack("<BB", r.take(2))
    if side_code >= len(SIDES) or has_w > 1:
        raise CacheError("corrupt projection header")
    n_labels, n_nodes, n_edges, W = (r.u64() for _ in range(4))
    labels = r.strings(n_labels)
    strength = r.array("<u8", n_labels).astype(np.int64)
    nodes = r.array("<u4", n_nodes).astype(np.int64)
    a = r.array("<u4", n_edges).astype(np.int32)
    b = r.array("<u4", n_edges).astype(np.int32)
    co = r.array("<u8", n_edges).astype(np.int64)
    weight = r.array("<f8", n_edges).astype(np.float64) if has_w else None
    r.done()
    return Projection(SIDES[side_code], labels, nodes, a, b, co, weight, int(W), strength)


def save_cache(proj: Projection, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(proj))


def load_cache(path) -> Projection:
    with open(path, "rb") as fh:
        return loads(fh.read())
