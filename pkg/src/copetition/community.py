"""Weighted Louvain community detection and modularity on projections.

Only edges with positive weight take part: below-chance NPMI edges would
make the null model ill-defined. The number of dropped edges is reported on
the assignment.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .bigraph import BipartiteGraph
from .ingest import Dataset
from .project import Projection, compact_adjacency
from .stats import word_freq

TOL = 1e-9
# slack for the per-sweep monotonicity check (floating-point accumulation only)
_MONO_SLACK = 1e-10


class NoEdgesError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CommunityAssignment:
    """Cluster label per node; ``nodes[i]`` (dense id) belongs to ``labels[i]``."""
    nodes: np.ndarray
    labels: np.ndarray
    modularity: float
    resolution: float
    n_levels: int
    n_passes: int
    dropped_edges: int = 0
    history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_clusters)

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.nodes.tolist(), self.labels.tolist()))


def renumber(labels) -> np.ndarray:
    """Relabel to 0..k-1 in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inv.ravel()]


def matrix_modularity(A: sp.csr_matrix, labels, resolution: float = 1.0) -> float:
    """Q = (1/2m) sum_ij [A_ij - r k_i k_j / 2m] delta(c_i, c_j) for symmetric ``A``."""
    labels = np.asarray(labels)
    two_m = float(A.sum())
    if two_m <= 0:
        return 0.0
    A = A.tocoo()
    internal = float(A.data[labels[A.row] == labels[A.col]].sum())
    k = np.asarray(A.sum(axis=1)).ravel()
    tot = np.bincount(labels, weights=k)
    return internal / two_m - resolution * float(np.dot(tot, tot)) / (two_m * two_m)


def modularity(proj: Projection, assignment, resolution: float = 1.0) -> float:
    """Weighted modularity of a partition of ``proj.nodes``.

    ``assignment`` is a CommunityAssignment or an array of labels aligned
    with ``proj.nodes``. Edges of weight <= 0 are ignored.
    """
    labels = assignment.labels if isinstance(assignment, CommunityAssignment) else np.asarray(assignment)
    if labels.shape != (proj.n_nodes,):
        raise ValueError("assignment must cover every node of the projection")
    A, _ = compact_adjacency(proj)
    return matrix_modularity(A, labels, resolution)


def _local_moves(A: sp.csr_matrix, resolution: float, rng, tol: float, history: list):
    n = A.shape[0]
    indptr = A.indptr.tolist()
    indices = A.indices.tolist()
    data = A.data.tolist()
    k = np.asarray(A.sum(axis=1)).ravel()
    two_m = float(k.sum())
    k = k.tolist()
    comm = list(range(n))
    tot = list(k)
    order = list(range(n)) if rng is None else rng.permutation(n).tolist()
    scale = resolution / two_m
    # a move must raise Q by more than tol; Q gain = delta / m
    threshold = tol * two_m / 2.0
    q_prev = history[-1]
    moved_any = False
    passes = 0
    while True:
        passes += 1
        moved = 0
        for i in order:
            ci = comm[i]
            ki = k[i]
            kin: dict[int, float] = {}
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j != i:
                    c = comm[j]
                    kin[c] = kin.get(c, 0.0) + data[p]
            tot[ci] -= ki
            best = ci
            best_gain = kin.get(ci, 0.0) - tot[ci] * ki * scale
            stay_gain = best_gain
            for c, w in kin.items():
                g = w - tot[c] * ki * scale
                if g > best_gain:
                    best, best_gain = c, g
            if best != ci and best_gain - stay_gain > threshold:
                moved += 1
            else:
                best = ci
            tot[best] += ki
            comm[i] = best
        q = matrix_modularity(A, np.asarray(comm), resolution)
        assert q >= q_prev - _MONO_SLACK, f"modularity decreased in sweep: {q_prev} -> {q}"
        history.append(q)
        q_prev = q
        if moved == 0:
            break
        moved_any = True
    return np.asarray(comm, dtype=np.int64), moved_any, passes


def louvain_matrix(A: sp.csr_matrix, resolution: float = 1.0, seed: int | None = 0,
                   tol: float = TOL, max_levels: int = 100):
    """Louvain on a symmetric non-negative CSR matrix.

    Returns ``(labels, history, n_levels, n_passes)``; ``history`` holds the
    modularity after every sweep, starting from the singleton partition.
    """
    A = sp.csr_matrix(A, dtype=np.float64)
    A.sum_duplicates()
    A.sort_indices()
    n = A.shape[0]
    rng = None if seed is None else np.random.default_rng(seed)
    membership = np.arange(n, dtype=np.int64)
    history = [matrix_modularity(A, membership, resolution)]
    levels = passes = 0
    cur = A
    while levels < max_levels:
        comm, moved, p = _local_moves(cur, resolution, rng, tol, history)
        passes += p
        levels += 1
        comm = renumber(comm)
        membership = comm[membership]
        n_comm = int(comm.max()) + 1
        if not moved or n_comm == cur.shape[0]:
            break
        S = sp.csr_matrix((np.ones(cur.shape[0]), (np.arange(cur.shape[0]), comm)),
                          shape=(cur.shape[0], n_comm))
        cur = (S.T @ cur @ S).tocsr()
        cur.sort_indices()
    return renumber(membership), history, levels, passes


def louvain(proj: Projection, resolution: float = 1.0, seed: int | None = 0,
            tol: float = TOL) -> CommunityAssignment:
    """Louvain communities of a weighted projection.

    ``seed=None`` sweeps nodes in ascending dense-id order; an integer seed
    shuffles the sweep order reproducibly at every level.

    Raises
    ------
    NoEdgesError
        If the projection has no positive-weight edge.
    """
    A, dropped = compact_adjacency(proj)
    if A.nnz == 0:
        raise NoEdgesError("no edges")
    labels, history, levels, passes = louvain_matrix(A, resolution, seed, tol)
    q = matrix_modularity(A, labels, resolution)
    # the tracked value and a from-scratch recomputation must agree
    assert abs(q - history[-1]) <= 1e-9, (q, history[-1])
    return CommunityAssignment(
        nodes=proj.nodes.copy(), labels=labels, modularity=q, resolution=resolution,
        n_levels=levels, n_passes=passes, dropped_edges=dropped, history=tuple(history),
    )


def _node_texts(graph: BipartiteGraph, dataset: Dataset, side: str) -> list[str]:
    if side == "item":
        return [dataset.item(i).title for i in graph.item_ids]
    bio: dict[str, str] = {}
    for s in dataset.matched_shares():
        bio.setdefault(s.actor_id, s.bio)
    return [bio.get(a, "") for a in graph.actor_ids]


def cluster_profile(assignment: CommunityAssignment, graph: BipartiteGraph, dataset: Dataset,
                    top_k: int = 20, side: str = "actor") -> list[dict]:
    """Per-cluster size and most frequent tokens of member bios (or item titles)."""
    texts = _node_texts(graph, dataset, side)
    members: list[list[str]] = [[] for _ in range(assignment.n_clusters)]
    for node, lab in zip(assignment.nodes.tolist(), assignment.labels.tolist()):
        members[lab].append(texts[node])
    out = []
    for c, docs in enumerate(members):
        freq = word_freq(docs)
        out.append({
            "cluster": c,
            "size": len(docs),
            "tokens": [[tok, cnt] for tok, (cnt, _) in list(freq.items())[:top_k]],
        })
    return out


def write_assignment_csv(assignment: CommunityAssignment, labels, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("node_id", "cluster_id"))
        for node, c in zip(assignment.nodes.tolist(), assignment.labels.tolist()):
            w.writerow((labels[node], c))


def write_profile_json(profile: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(profile, fh, indent=2, ensure_ascii=False)
        fh.write("\n")
