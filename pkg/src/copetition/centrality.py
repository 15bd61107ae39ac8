"""PageRank on weighted undirected projections."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .bigraph import BipartiteGraph
from .ingest import Dataset
from .project import Projection, compact_adjacency

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CentralityScores:
    nodes: np.ndarray
    scores: np.ndarray
    damping: float
    iterations: int
    residual: float
    converged: bool
    dropped_edges: int = 0

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.nodes.tolist(), self.scores.tolist()))


def pagerank_matrix(A: sp.csr_matrix, damping: float = 0.85, tol: float = 1e-10,
                    max_iter: int = 200):
    """Power iteration for a symmetric non-negative weight matrix.

    Each undirected edge is walked in both directions with probability
    proportional to its weight. Mass sitting on a node without edges is
    teleported uniformly, so isolated nodes only ever receive teleport mass.
    Returns ``(scores, iterations, residual, converged)``.
    """
    n = A.shape[0]
    if n == 0:
        raise ValueError("empty graph")
    out = np.asarray(A.sum(axis=1)).ravel()
    dangling = out <= 0
    inv = np.zeros(n)
    inv[~dangling] = 1.0 / out[~dangling]
    # column-stochastic transpose: x_new[j] = sum_i x[i] * A[i, j] / out[i]
    T = (sp.diags(inv) @ A).T.tocsr()
    x = np.full(n, 1.0 / n)
    residual = np.inf
    it = 0
    while it < max_iter:
        it += 1
        leak = x[dangling].sum()
        nxt = damping * (T @ x) + (damping * leak + (1.0 - damping)) / n
        nxt /= nxt.sum()
        residual = float(np.abs(nxt - x).sum())
        x = nxt
        if residual < tol:
            return x, it, residual, True
    return x, it, residual, False


def pagerank(proj: Projection, damping: float = 0.85, tol: float = 1e-10,
             max_iter: int = 200) -> CentralityScores:
    """PageRank over ``proj.nodes`` using positive edge weights.

    A run that hits ``max_iter`` still returns its scores, with
    ``converged=False`` and a logged warning.
    """
    if not 0.0 <= damping < 1.0:
        raise ValueError(f"damping must lie in [0, 1), got {damping}")
    if proj.n_nodes == 0:
        raise ValueError("projection has no nodes")
    A, dropped = compact_adjacency(proj)
    x, it, res, ok = pagerank_matrix(A, damping, tol, max_iter)
    if not ok:
        log.warning("PageRank stopped after %d iterations with residual %.3g", it, res)
    return CentralityScores(proj.nodes.copy(), x, damping, it, res, ok, dropped)


TOP_ACTOR_COLUMNS = (
    "rank", "node_id", "pagerank", "bio", "followers", "following", "verified",
    "top_item_title", "favorites_received", "retweets_received", "tweets", "unique_items",
)


def top_nodes(scores: CentralityScores, k: int, graph: BipartiteGraph | None = None,
              dataset: Dataset | None = None, side: str = "actor") -> list[dict]:
    """The ``k`` highest scores, ties broken by smaller dense id.

    With a graph and dataset on the actor side, each row is joined with the
    actor's profile and sharing activity; ``top_item_title`` is the item the
    actor tweeted most.
    """
    if k <= 0:
        return []
    order = np.lexsort((scores.nodes, -scores.scores))[:k]
    rows = [{"rank": r + 1, "node": int(scores.nodes[i]), "pagerank": float(scores.scores[i])}
            for r, i in enumerate(order)]
    if graph is None:
        return rows
    labels = graph.actor_ids if side == "actor" else graph.item_ids
    for row in rows:
        row["node_id"] = labels[row["node"]]
    if dataset is None or side != "actor":
        return rows
    wanted = {row["node_id"] for row in rows}
    prof: dict[str, dict] = {}
    for s in dataset.matched_shares():
        if s.actor_id not in wanted:
            continue
        p = prof.setdefault(s.actor_id, {
            "bio": s.bio, "followers": s.follower_count, "following": s.following_count,
            "verified": s.verified, "favorites_received": 0, "retweets_received": 0, "tweets": 0,
            "per_item": {},
        })
        p["favorites_received"] += s.favorite_count
        p["retweets_received"] += s.retweet_count
        p["tweets"] += 1
        p["per_item"][s.item_id] = p["per_item"].get(s.item_id, 0) + 1
    for row in rows:
        p = prof[row["node_id"]]
        per_item = p.pop("per_item")
        top_item = max(per_item, key=per_item.get)  # first seen wins ties
        row.update(p)
        row["unique_items"] = len(per_item)
        row["top_item_title"] = dataset.item(top_item).title
    return rows


def write_scores_csv(scores: CentralityScores, labels, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("node_id", "score"))
        for node, s in zip(scores.nodes.tolist(), scores.scores.tolist()):
            w.writerow((labels[node], repr(s)))
