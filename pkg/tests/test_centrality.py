import itertools

import numpy as np
import pytest

from copetition import bigraph, centrality as ce, project as pj
from copetition.ingest import join_dataset

from conftest import graph_from_pairs, item, share, weighted_projection
from oracles import dense_pagerank


def random_weighted(seed, n, p=0.2):
    rng = np.random.default_rng(seed)
    A = np.zeros((n, n))
    ew = {}
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < p:
            A[i, j] = A[j, i] = ew[(i, j)] = float(rng.uniform(0.05, 1.0))
    return A, ew


@pytest.mark.parametrize("n", [2, 3, 7, 20])
def test_complete_graph_uniform(n):
    p = weighted_projection({e: 1.0 for e in itertools.combinations(range(n), 2)}, n)
    s = ce.pagerank(p)
    assert np.abs(s.scores - 1.0 / n).max() <= 1e-10
    assert s.converged


def test_single_edge():
    s = ce.pagerank(weighted_projection({(0, 1): 0.3}))
    assert s.scores == pytest.approx([0.5, 0.5], abs=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_matches_dense_power_iteration(seed):
    n = 10 + 5 * seed
    A, ew = random_weighted(seed, n, p=0.15)
    if not ew:
        pytest.skip("empty draw")
    s = ce.pagerank(weighted_projection(ew, n), tol=1e-13, max_iter=2000)
    ref = dense_pagerank(A)
    assert np.abs(s.scores - ref).sum() < 1e-8
    assert s.scores.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(s.scores > 0)


def test_isolated_nodes_get_teleport_only():
    # node 2 and 3 have no edges
    s = ce.pagerank(weighted_projection({(0, 1): 1.0}, 4), damping=0.85)
    assert s.scores.sum() == pytest.approx(1.0, abs=1e-12)
    assert s.scores[2] == pytest.approx(s.scores[3])
    assert s.scores[0] > s.scores[2] > 0


def test_sum_to_one_each_iteration():
    A, ew = random_weighted(5, 30, p=0.2)
    p = weighted_projection(ew, 30)
    for it in range(1, 15):
        s = ce.pagerank(p, max_iter=it, tol=0.0)
        assert s.scores.sum() == pytest.approx(1.0, abs=1e-10)


def test_nonconvergence_flag(caplog):
    A, ew = random_weighted(2, 25, p=0.3)
    s = ce.pagerank(weighted_projection(ew, 25), max_iter=2)
    assert not s.converged and s.iterations == 2
    assert "stopped after 2" in caplog.text


@pytest.mark.parametrize("seed", range(4))
def test_high_damping_tracks_strength(seed):
    n = 12
    rng = np.random.default_rng(seed)
    ew = {(i, i + 1): float(rng.uniform(0.2, 1)) for i in range(n - 1)}  # path keeps it connected
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < 0.3:
            ew[(i, j)] = float(rng.uniform(0.2, 1))
    p = weighted_projection(ew, n)
    A, _ = pj.compact_adjacency(p)
    k = np.asarray(A.sum(axis=1)).ravel()
    s = ce.pagerank(p, damping=0.999, tol=1e-14, max_iter=200_000)
    assert np.abs(s.scores - k / k.sum()).sum() < 0.01


def test_scale_invariance():
    _, ew = random_weighted(9, 25, p=0.25)
    a = ce.pagerank(weighted_projection(ew, 25), tol=1e-12)
    b = ce.pagerank(weighted_projection({e: 37.5 * w for e, w in ew.items()}, 25), tol=1e-12)
    assert np.abs(a.scores - b.scores).sum() < 1e-10


def test_negative_weights_excluded():
    s = ce.pagerank(weighted_projection({(0, 1): 1.0, (1, 2): -0.5}))
    assert s.dropped_edges == 1
    ref = ce.pagerank(weighted_projection({(0, 1): 1.0}, 3))
    assert np.allclose(s.scores, ref.scores, atol=1e-14)


def test_bad_damping():
    with pytest.raises(ValueError):
        ce.pagerank(weighted_projection({(0, 1): 1.0}), damping=1.0)


def test_top_zero_and_overflow():
    s = ce.pagerank(weighted_projection({(0, 1): 1.0, (1, 2): 1.0}))
    assert ce.top_nodes(s, 0) == []
    rows = ce.top_nodes(s, 10)
    assert [r["node"] for r in rows] == [1, 0, 2]
    assert [r["rank"] for r in rows] == [1, 2, 3]


def test_top_uniform_ties_by_dense_id():
    s = ce.CentralityScores(np.arange(6), np.full(6, 1 / 6), 0.85, 1, 0.0, True)
    assert [r["node"] for r in ce.top_nodes(s, 4)] == [0, 1, 2, 3]


def test_planted_hub_ranks_first():
    rng = np.random.default_rng(0)
    shares = []
    items = []
    spoke = 0
    for i in range(40):
        items.append(item(f"p{i}", title=f"petition {i}"))
        shares.append(share(f"h{i}", "hub", f"p{i}", followers=900, bio="bot", retweet_count=1))
        for _ in range(int(rng.integers(1, 4))):
            shares.append(share(f"s{spoke}", f"u{spoke}", f"p{i}", followers=3))
            spoke += 1
    shares.append(share("hx", "hub", "p7", followers=900, bio="bot"))
    ds = join_dataset(shares, items)
    g = bigraph.build(ds)
    p = pj.weigh(pj.project(g, "actor"))
    s = ce.pagerank(p)
    top = ce.top_nodes(s, 3, g, ds)
    assert top[0]["node_id"] == "hub"
    row = top[0]
    assert (row["tweets"], row["unique_items"], row["followers"], row["bio"]) == (41, 40, 900, "bot")
    assert row["top_item_title"] == "petition 7"
    assert row["retweets_received"] == 40
    assert set(ce.TOP_ACTOR_COLUMNS) <= set(row)


def test_scores_csv(tmp_path):
    p = weighted_projection({(0, 1): 1.0})
    ce.write_scores_csv(ce.pagerank(p), p.labels, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "node_id,score" and lines[1].startswith("n0,0.5")
