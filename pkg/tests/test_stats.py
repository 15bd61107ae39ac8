import math
from collections import defaultdict
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from copetition import bigraph, project as pj, stats
from copetition.ingest import join_dataset
from copetition.stats import RankDeficientError
from copetition.synth import PlantedSpec, generate

from conftest import item, share, weighted_projection
from oracles import two_pass_pearson

DAY = 86_400


def table(sig, tweets=None, users=None, **cols):
    n = len(sig)
    z = np.zeros(n, dtype=np.int64)
    tweets = np.asarray(tweets if tweets is not None else z)
    return stats.PetitionStats(
        item_ids=tuple(f"p{k}" for k in range(n)), signatures=np.asarray(sig, dtype=np.int64),
        tweets=tweets, users=np.asarray(users if users is not None else tweets),
        unique_audience=cols.get("unique_audience", z), total_exposure=cols.get("total_exposure", z),
        retweets=np.asarray(cols.get("retweets", z)), favorites=np.asarray(cols.get("favorites", z)),
        verified_tweets=np.asarray(cols.get("verified_tweets", z)),
        departments=tuple(cols.get("departments", [""] * n)), created_at=z)


def _stats(shares, items):
    ds = join_dataset(shares, items)
    return stats.petition_stats(bigraph.build(ds), ds)


# --- audience ---------------------------------------------------------------

def test_audience_single_tweet():
    st_ = _stats([share("t1", "u", "p", followers=100)], [item("p")])
    assert (st_.unique_audience[0], st_.total_exposure[0]) == (100, 100)


def test_audience_repeat_tweets():
    st_ = _stats([share(f"t{k}", "u", "p", followers=100) for k in range(3)], [item("p")])
    assert (st_.unique_audience[0], st_.total_exposure[0]) == (100, 300)
    assert (st_.tweets[0], st_.users[0]) == (3, 1)


def test_audience_against_recount(rng):
    shares = []
    for n in range(800):
        a, i = int(rng.integers(60)), int(rng.integers(25))
        shares.append(share(f"t{n}", f"u{a}", f"p{i}", followers=int(rng.integers(0, 10_000)),
                            retweet_count=int(rng.integers(0, 5)), verified=bool(rng.random() < 0.1)))
    st_ = _stats(shares, [item(f"p{i}") for i in range(25)])
    uniq, expo, tw, rt, ver = (defaultdict(int) for _ in range(5))
    first = {}
    for s in shares:
        expo[s.item_id] += s.follower_count
        tw[s.item_id] += 1
        rt[s.item_id] += s.retweet_count
        ver[s.item_id] += s.verified
        first.setdefault((s.actor_id, s.item_id), s.follower_count)
    for (a, i), f in first.items():
        uniq[i] += f
    users = defaultdict(int)
    for (_, i) in first:
        users[i] += 1
    for k, iid in enumerate(st_.item_ids):
        assert st_.unique_audience[k] == uniq[iid] <= st_.total_exposure[k] == expo[iid]
        assert st_.users[k] == users[iid] <= st_.tweets[k] == tw[iid]
        assert st_.retweets[k] == rt[iid] and st_.verified_tweets[k] == ver[iid]


# --- correlations -----------------------------------------------------------

def test_loglog_identity_and_constant():
    x = [0, 3, 10, 200]
    assert stats.loglog_corr(x, x) == pytest.approx(1.0, abs=1e-15)
    assert stats.loglog_corr(x, [5, 5, 5, 5]) is None
    assert stats.loglog_corr([1], [2]) is None


def test_loglog_against_two_pass(rng):
    x = rng.integers(0, 100_000, 1000)
    y = rng.integers(0, 1000, 1000)
    ref = two_pass_pearson([math.log1p(v) for v in x], [math.log1p(v) for v in y])
    assert stats.loglog_corr(x, y) == pytest.approx(ref, abs=1e-12)


@given(st.lists(st.tuples(st.integers(0, 10**6), st.integers(0, 10**6)), min_size=3, max_size=50),
       st.integers(1, 4))
@settings(max_examples=80, deadline=None)
def test_loglog_symmetric_and_duplication_invariant(pairs, reps):
    x = [p[0] for p in pairs]
    y = [p[1] for p in pairs]
    r = stats.loglog_corr(x, y)
    assert r == stats.loglog_corr(y, x) or abs(r - stats.loglog_corr(y, x)) < 1e-12
    r2 = stats.loglog_corr(x * reps, y * reps)
    if r is None:
        assert r2 is None
    else:
        assert r2 == pytest.approx(r, abs=1e-9)


# --- OLS --------------------------------------------------------------------

def test_ols_exact_line():
    x = np.arange(20, dtype=float)
    res = stats.ols(np.column_stack([np.ones(20), x]), 2 + 3 * x, ["intercept", "x"])
    assert res.coef == pytest.approx([2, 3], abs=1e-12)
    assert res.r_squared == pytest.approx(1.0, abs=1e-12)
    assert res["x"] == pytest.approx(3)


def test_ols_orthogonal():
    x = np.array([-1.0, 1.0, -1.0, 1.0])
    y = np.array([1.0, 1.0, 2.0, 2.0])
    res = stats.ols(np.column_stack([np.ones(4), x]), y)
    assert res.coef[1] == pytest.approx(0.0, abs=1e-12)
    assert res.r_squared == pytest.approx(0.0, abs=1e-12)


def test_ols_planted_elasticity():
    rng = np.random.default_rng(7)
    lx = rng.uniform(0, 8, 10_000)
    ly = 1 + 1.13 * lx + 0.1 * rng.standard_normal(10_000)
    res = stats.ols(np.column_stack([np.ones_like(lx), lx]), ly)
    assert 1.11 <= res.coef[1] <= 1.15
    # residuals orthogonal to every column; R^2 in range
    X = np.column_stack([np.ones_like(lx), lx])
    assert np.all(np.abs(X.T @ res.residuals) < 1e-8 * lx.size)
    assert 0 <= res.r_squared <= 1


def test_ols_standard_errors_match_textbook(rng):
    X = np.column_stack([np.ones(50), rng.normal(size=50), rng.normal(size=50)])
    y = X @ [1.0, 2.0, -0.5] + rng.normal(size=50)
    res = stats.ols(X, y)
    beta = np.linalg.solve(X.T @ X, X.T @ y)
    s2 = np.sum((y - X @ beta) ** 2) / (50 - 3)
    se = np.sqrt(np.diag(s2 * np.linalg.inv(X.T @ X)))
    assert res.coef == pytest.approx(beta, abs=1e-10)
    assert res.stderr == pytest.approx(se, rel=1e-8)


def test_ols_collinear_names_columns():
    t = np.array([1, 4, 2, 9, 30, 5])
    with pytest.raises(RankDeficientError) as err:
        stats.signature_regressions(table([100, 900, 200, 5000, 40000, 800], tweets=t, users=t))
    assert err.value.columns == ["ln_tweets", "ln_users"]
    assert "ln_tweets" in str(err.value) and "ln_users" in str(err.value)


def test_ols_needs_more_rows():
    with pytest.raises(ValueError):
        stats.ols(np.ones((2, 2)), np.ones(2))


def test_elasticity_response():
    assert stats.elasticity_response(1.13) == pytest.approx(11.37, abs=0.01)
    assert math.log(1.114) / math.log(1.10) == pytest.approx(1.13, abs=0.005)


def test_regressions_recover_planted_elasticity():
    spec = PlantedSpec(k=4, actors_per_community=60, items_per_community=250, p_in=0.05, p_out=0.002,
                       sigma=0.1, seed=1)
    ds, truth = generate(spec)
    st_ = stats.petition_stats(bigraph.build(ds), ds)
    r1 = stats.signature_regressions(st_)["R1"]
    assert abs(r1["ln_tweets"] - 1.13) <= 0.02


def test_regressions_sigma_zero_exact():
    spec = PlantedSpec(k=2, actors_per_community=50, items_per_community=30, sigma=0.0, seed=2)
    ds, truth = generate(spec)
    g = bigraph.build(ds)
    st_ = stats.petition_stats(g, ds)
    y = np.array([truth.log1p_signatures[i] for i in st_.item_ids])
    X = np.column_stack([np.ones(len(st_)), np.log1p(st_.tweets)])
    res = stats.ols(X, y)
    assert res.coef == pytest.approx([spec.alpha, spec.beta], abs=1e-10)


def test_single_department_r5_equals_r2(rng):
    t = rng.integers(1, 500, 40)
    u = np.maximum(1, t - rng.integers(0, 5, 40))
    sig = rng.integers(10, 10**5, 40)
    aud = t * rng.integers(1, 300, 40)
    out = stats.signature_regressions(table(sig, tweets=t, users=u, departments=["Home Office"] * 40,
                                        unique_audience=aud, total_exposure=aud * 2 + 1))
    assert out["R5"].names == out["R2"].names
    assert out["R5"].coef == pytest.approx(out["R2"].coef, abs=1e-12)


def test_department_dummies_reference():
    names, cols = stats.department_dummies(["b", "a", "b", "c", "a", "b"])
    assert names == ["dept[a]", "dept[c]"]
    assert cols.tolist() == [[0, 0], [1, 0], [0, 0], [0, 1], [1, 0], [0, 0]]
    # ties go to the alphabetically first department
    assert stats.department_dummies(["y", "x"])[0] == ["dept[y]"]


# --- histograms -------------------------------------------------------------

def test_delay_at_creation_instant():
    ds = join_dataset([share("t", "u", "p", posted=1000)], [item("p", created=1000)])
    d = stats.delay_histogram(ds)
    assert d.delays.tolist() == [0] and d.histogram.counts[0] == 1


def test_delay_one_day_single_bin():
    shares = [share(f"t{k}", f"u{k}", f"p{k % 3}", posted=5000 + k % 3 + DAY) for k in range(9)]
    ds = join_dataset(shares, [item(f"p{i}", created=5000 + i) for i in range(3)])
    h = stats.delay_histogram(ds).histogram
    assert np.count_nonzero(h.counts) == 1
    assert h.edges[h.bin_of(DAY)] <= DAY < h.edges[h.bin_of(DAY) + 1]


def test_delay_exclusions_counted():
    shares = [share("t1", "u", "p", posted=900), share("t2", "u", "p", posted=2000),
              share("t3", "u", "zz", posted=2000)]
    d = stats.delay_histogram(join_dataset(shares, [item("p", created=1000)]))
    assert d.histogram.excluded == {"unmatched": 1, "before_item_creation": 1}
    assert d.histogram.total == 1 == 3 - 2


def test_delay_bimodal_mixture():
    ds, truth = generate(PlantedSpec(seed=11))
    d = stats.delay_histogram(ds)
    modes = d.modes
    assert len(modes) == 2
    lo, hi = (d.histogram.edges[m] for m in modes)
    assert lo < 3600 and hi > 10 * DAY


@given(st.lists(st.integers(0, 10**9), max_size=200), st.integers(1, 6))
@settings(max_examples=60, deadline=None)
def test_histogram_totals(values, d):
    h = stats.log_histogram(values, d)
    assert h.counts.sum() == h.total == len(values)
    for v in values[:20]:
        b = h.bin_of(v)
        assert h.edges[b] <= v < h.edges[b + 1]


def test_local_maxima_plateau():
    assert stats.local_maxima([0, 2, 2, 2, 0, 1, 0]) == [2, 5]
    assert stats.local_maxima([0, 0, 0]) == []


def test_threshold_single_petition():
    ds = join_dataset([share(f"t{k}", "u", "p") for k in range(4)], [item("p", sigs=500)])
    assert stats.threshold_profile(ds).median == 500


def test_threshold_two_petitions():
    shares = [share(f"a{k}", "u", "p1") for k in range(10)] + [share(f"b{k}", "u", "p2") for k in range(10)]
    tp = stats.threshold_profile(join_dataset(shares, [item("p1", 9000), item("p2", 110_000)]))
    assert tp.median == 59_500
    h = tp.histogram
    occupied = np.flatnonzero(h.counts)
    assert occupied.size == 2
    assert h.edges[occupied[0]] <= 9000 < 10_000 and 100_000 <= h.edges[occupied[1]] + 1e-9 or \
        h.edges[occupied[1]] <= 110_000
    assert tp.fraction_between(1e4, 1.5e5) == 0.5


def test_threshold_fraction_matches_generator():
    ds, truth = generate(PlantedSpec(seed=4, sigma=1.5))
    tp = stats.threshold_profile(ds)
    sig = {it.item_id: int(max(0, round(math.expm1(truth.log1p_signatures[it.item_id])))) for it in ds.items}
    per_tweet = [sig[s.item_id] for s in ds.matched_shares()]
    expect = sum(1e4 <= v <= 1.5e5 for v in per_tweet) / len(per_tweet)
    assert tp.fraction_between(1e4, 1.5e5) == pytest.approx(expect, abs=1e-12)
    assert 0 < expect < 1


def test_write_histogram(tmp_path):
    h = stats.log_histogram([0, 1, 5, 50], 1)
    stats.write_histogram(h, tmp_path / "h.tsv", "delay")
    rows = (tmp_path / "h.tsv").read_text().splitlines()
    assert rows[0] == "# delay_bin_left count"
    assert [r.split() for r in rows[1:]] == [["0.0", "1"], ["1.0", "2"], ["10.0", "1"], ["100.0", "0"]]


# --- text -------------------------------------------------------------------

def test_word_freq_cases():
    assert stats.word_freq([]) == {}
    assert stats.word_freq(["Dog dog DOG!"]) == {"dog": (3, math.log(4))}
    assert stats.word_freq(["the a of I x 7"]) == {}


def test_word_freq_planted_vocabulary():
    vocab = ("badger", "fox", "hunting")
    ds, _ = generate(PlantedSpec(k=1, vocabularies=(vocab,), p_out=0.0, seed=1))
    freq = stats.word_freq(s.bio for s in ds.shares)
    assert set(list(freq)[:3]) == set(vocab) and len(freq) == 3


# --- temporal ----------------------------------------------------------------

def test_temporal_no_boundaries(small_dataset):
    assert stats.temporal_split(small_dataset, []) == [small_dataset]


def test_temporal_one_boundary():
    shares = [share("t1", "u", "p1"), share("t2", "u", "p2"), share("t3", "v", "p2")]
    ds = join_dataset(shares, [item("p1", created=100), item("p2", created=300)])
    a, b = stats.temporal_split(ds, [200])
    assert [i.item_id for i in a.items] == ["p1"] and [s.tweet_id for s in a.shares] == ["t1"]
    assert [i.item_id for i in b.items] == ["p2"] and len(b.shares) == 2


def test_temporal_recount(rng):
    items = [item(f"p{i}", created=int(rng.integers(0, 3000))) for i in range(50)]
    shares = [share(f"t{n}", f"u{n % 7}", f"p{int(rng.integers(50))}") for n in range(400)]
    parts = stats.temporal_split(join_dataset(shares, items), [1000, 2000])
    created = {it.item_id: it.created_at for it in items}
    bucket = lambda c: (c >= 1000) + (c >= 2000)
    for k, part in enumerate(parts):
        assert len(part.items) == sum(bucket(it.created_at) == k for it in items)
        assert len(part.shares) == sum(bucket(created[s.item_id]) == k for s in shares)
        assert part.n_unmatched == 0
    with pytest.raises(ValueError):
        stats.temporal_split(join_dataset(shares, items), [5, 5])


# --- correlation battery -----------------------------------------------------

def test_correlates_single_edge_undefined():
    tbl = table([10, 20], tweets=[1, 2])
    p = pj.weigh(weighted_projection({(0, 1): 1.0}, side="item"))
    out = stats.scalar_correlates(tbl, item_projection=p)
    assert out["edge_weight_vs_signature_product"] == {"value": None, "n": 1}


def test_correlates_scores_equal_signatures():
    sig = np.array([5, 50, 20_000, 70_000, 900_000])
    scores = SimpleNamespace(nodes=np.arange(5), scores=sig.astype(float))
    out = stats.scalar_correlates(table(sig, tweets=[1, 2, 3, 4, 5]), item_scores=scores)
    assert out["pagerank_vs_signatures"]["value"] == pytest.approx(1.0)
    assert out["pagerank_vs_signatures_10k"] == {"value": pytest.approx(1.0), "n": 3}
    assert list(out) == sorted(out)


def test_correlates_undersized_subset():
    scores = SimpleNamespace(nodes=np.arange(3), scores=np.array([0.2, 0.3, 0.5]))
    out = stats.scalar_correlates(table([5, 50, 20_000], tweets=[1, 2, 3]), item_scores=scores)
    assert out["pagerank_vs_signatures_10k"] == {"value": None, "n": 1}


def test_correlates_planted_rho():
    rng = np.random.default_rng(21)
    n, rho = 10_000, 0.5
    z = rng.standard_normal((n, 2))
    z[:, 1] = rho * z[:, 0] + math.sqrt(1 - rho * rho) * z[:, 1]
    sig = np.rint(np.expm1(8 + z[:, 0])).astype(np.int64)
    rt = np.rint(np.expm1(6 + z[:, 1])).astype(np.int64)
    out = stats.scalar_correlates(table(sig, tweets=np.ones(n, dtype=np.int64) + (np.arange(n) % 3),
                                        retweets=rt))
    assert out["retweets_vs_signatures"]["value"] == pytest.approx(rho, abs=0.03)
    assert out["delay_vs_tweets"] == {"value": None, "n": 0}
