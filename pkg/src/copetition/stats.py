"""Per-petition statistics, log-log correlations, OLS and the histogram battery.

All count variables enter correlations and regressions as ``ln(1 + x)`` so
that zero counts stay finite.
"""
from __future__ import annotations

import csv
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.linalg import solve_triangular

from .bigraph import BipartiteGraph
from .ingest import Dataset, join_dataset

RESPONSE_THRESHOLD = 10_000
DEBATE_THRESHOLD = 100_000

# values observed on the original Twitter data; documentation only
REFERENCE = {
    "signatures_vs_tweets": 0.70,
    "signatures_vs_users": 0.72,
    "edge_weight_vs_signature_product": 0.04,
    "pagerank_vs_signatures": 0.1322,
    "pagerank_vs_signatures_10k": 0.4915,
    "delay_vs_tweets": 0.5219,
    "retweets_vs_signatures": 0.1527,
    "verified_tweets_vs_signatures": 0.0043,
    "median_signatures_per_tweet": 104_000,
    "R5_r_squared": 0.536,
    # percent response in signatures to a 10 percent predictor increase
    "R1_response_pct": 11.4, "R2_users_response_pct": 14.9,
    "R3_response_pct": 4.8, "R4_response_pct": 4.6,
}


class RankDeficientError(ValueError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__("design matrix is rank deficient; collinear columns: " + ", ".join(self.columns))


# --- per-item table ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PetitionStats:
    """Column-oriented per-item statistics, rows aligned with ``graph.item_ids``.

    ``unique_audience`` sums follower counts over distinct sharers (each
    taken at the sharer's first tweet of the item); ``total_exposure`` sums
    them over every tweet.
    """
    item_ids: tuple[str, ...]
    signatures: np.ndarray
    tweets: np.ndarray
    users: np.ndarray
    unique_audience: np.ndarray
    total_exposure: np.ndarray
    retweets: np.ndarray
    favorites: np.ndarray
    verified_tweets: np.ndarray
    departments: tuple[str, ...]
    created_at: np.ndarray

    def __len__(self) -> int:
        return len(self.item_ids)


def petition_stats(graph: BipartiteGraph, dataset: Dataset) -> PetitionStats:
    P = graph.n_items
    pos = {iid: k for k, iid in enumerate(graph.item_ids)}
    unique = np.zeros(P, dtype=np.int64)
    exposure = np.zeros(P, dtype=np.int64)
    retweets = np.zeros(P, dtype=np.int64)
    favorites = np.zeros(P, dtype=np.int64)
    verified = np.zeros(P, dtype=np.int64)
    seen: set[tuple[str, str]] = set()
    for s in dataset.matched_shares():
        k = pos[s.item_id]
        exposure[k] += s.follower_count
        retweets[k] += s.retweet_count
        favorites[k] += s.favorite_count
        verified[k] += s.verified
        if (s.actor_id, s.item_id) not in seen:
            seen.add((s.actor_id, s.item_id))
            unique[k] += s.follower_count
    items = [dataset.item(i) for i in graph.item_ids]
    return PetitionStats(
        item_ids=graph.item_ids,
        signatures=np.array([it.signature_count for it in items], dtype=np.int64),
        tweets=graph.item_tweets(),
        users=graph.item_degree().astype(np.int64),
        unique_audience=unique,
        total_exposure=exposure,
        retweets=retweets,
        favorites=favorites,
        verified_tweets=verified,
        departments=tuple(it.department for it in items),
        created_at=np.array([it.created_at for it in items], dtype=np.int64),
    )


# --- correlation and regression ----------------------------------------------

def pearson(x, y) -> float | None:
    """Pearson correlation, or ``None`` if either series has zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("series must be one-dimensional and of equal length")
    if x.size < 2:
        return None
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0 or np.all(x == x[0]) or np.all(y == y[0]):
        return None
    return float(dx @ dy) / math.sqrt(sxx * syy)


def loglog_corr(x, y) -> float | None:
    """Pearson correlation of ln(1+x) against ln(1+y); ``None`` when undefined."""
    return pearson(np.log1p(np.asarray(x, dtype=np.float64)), np.log1p(np.asarray(y, dtype=np.float64)))


@dataclass(frozen=True, eq=False)
class RegressionResult:
    names: tuple[str, ...]
    coef: np.ndarray
    stderr: np.ndarray
    r_squared: float
    n: int
    residuals: np.ndarray = field(repr=False)

    def __getitem__(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "r_squared": self.r_squared,
            "coefficients": {k: float(v) for k, v in zip(self.names, self.coef)},
            "stderr": {k: float(v) for k, v in zip(self.names, self.stderr)},
        }


def _collinear(X: np.ndarray, names) -> list[str]:
    norms = np.linalg.norm(X, axis=0)
    zero = norms == 0
    Xs = X / np.where(zero, 1.0, norms)
    _, s, vt = np.linalg.svd(Xs, full_matrices=True)
    p = X.shape[1]
    s_full = np.zeros(p)
    s_full[:s.size] = s
    tol = max(X.shape) * np.finfo(float).eps * 1e3 * (s_full[0] if s_full[0] > 0 else 1.0)
    null = vt[s_full <= tol]
    if null.size == 0 and not zero.any():
        return []
    involved = zero.copy()
    if null.size:
        involved |= np.any(np.abs(null) > 1e-6, axis=0)
    return [n for n, flag in zip(names, involved) if flag]


def ols(X, y, names=None) -> RegressionResult:
    """Least squares via QR, standard errors from the residual variance.

    ``X`` must already contain an intercept column if one is wanted; R² is
    ``1 - SSR/SST`` with SST taken about the mean of ``y``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(p))
    if len(names) != p or y.shape != (n,):
        raise ValueError("shape mismatch between design, response and names")
    if n <= p:
        raise ValueError(f"need more observations ({n}) than coefficients ({p})")
    bad = _collinear(X, names)
    if bad:
        raise RankDeficientError(bad)
    Q, R = np.linalg.qr(X)
    coef = solve_triangular(R, Q.T @ y)
    resid = y - X @ coef
    ssr = float(resid @ resid)
    dy = y - y.mean()
    sst = float(dy @ dy)
    r2 = 1.0 - ssr / sst if sst > 0 else float("nan")
    sigma2 = ssr / (n - p)
    Rinv = solve_triangular(R, np.eye(p))
    se = np.sqrt(sigma2 * np.sum(Rinv * Rinv, axis=1))
    return RegressionResult(names, coef, se, r2, n, resid)


def elasticity_response(beta: float, pct: float = 10.0) -> float:
    """Percent change in the outcome for a ``pct`` percent predictor rise."""
    return 100.0 * ((1.0 + pct / 100.0) ** beta - 1.0)


def department_dummies(departments) -> tuple[list[str], np.ndarray]:
    """One-hot department columns minus the most frequent (ties: alphabetical first)."""
    counts = Counter(departments)
    if len(counts) <= 1:
        return [], np.zeros((len(departments), 0))
    ref = min(counts, key=lambda d: (-counts[d], d))
    levels = sorted(d for d in counts if d != ref)
    dep = np.asarray(departments, dtype=object)
    cols = np.column_stack([(dep == d).astype(np.float64) for d in levels])
    return [f"dept[{d}]" for d in levels], cols


def signature_regressions(st: PetitionStats) -> dict[str, RegressionResult]:
    """Regressions R1..R5 on log-transformed per-item statistics."""
    y = np.log1p(st.signatures)
    one = np.ones(len(st))
    lt, lu = np.log1p(st.tweets), np.log1p(st.users)
    out = {
        "R1": ols(np.column_stack([one, lt]), y, ["intercept", "ln_tweets"]),
        "R2": ols(np.column_stack([one, lt, lu]), y, ["intercept", "ln_tweets", "ln_users"]),
        "R3": ols(np.column_stack([one, np.log1p(st.unique_audience)]), y,
                  ["intercept", "ln_unique_audience"]),
        "R4": ols(np.column_stack([one, np.log1p(st.total_exposure)]), y,
                  ["intercept", "ln_total_exposure"]),
    }
    dnames, dcols = department_dummies(st.departments)
    out["R5"] = ols(np.column_stack([one, lt, lu, dcols]), y,
                    ["intercept", "ln_tweets", "ln_users", *dnames])
    return out


# --- histograms -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    total: int
    log_scale: bool = True
    excluded: dict = field(default_factory=dict)

    def __post_init__(self):
        assert int(self.counts.sum()) == self.total
        assert np.all(np.diff(self.edges) > 0)

    def bin_of(self, value: float) -> int:
        return int(np.searchsorted(self.edges, value, side="right") - 1)


def log_edges(max_value: float, per_decade: int = 4) -> np.ndarray:
    """Bin edges ``0, 1, 10**(1/d), 10**(2/d), ...`` reaching past ``max_value``.

    The first bin ``[0, 1)`` holds zeros.
    """
    top = max(1.0, float(max_value))
    k = int(math.floor(math.log10(top) * per_decade)) + 1
    powers = 10.0 ** (np.arange(k + 1) / per_decade)
    while powers[-1] <= top:
        powers = np.append(powers, 10.0 ** (powers.size / per_decade))
    return np.concatenate([[0.0], powers])


def log_histogram(values, per_decade: int = 4, excluded: dict | None = None) -> Histogram:
    values = np.asarray(values, dtype=np.float64)
    if values.size and values.min() < 0:
        raise ValueError("log histogram needs non-negative values")
    edges = log_edges(values.max() if values.size else 1.0, per_decade)
    idx = np.searchsorted(edges, values, side="right") - 1
    counts = np.bincount(idx, minlength=edges.size - 1)
    return Histogram(edges, counts.astype(np.int64), int(values.size), True, dict(excluded or {}))


def smooth3(counts) -> np.ndarray:
    """Centered three-bin moving average, zero padded."""
    return np.convolve(np.asarray(counts, dtype=np.float64), np.ones(3) / 3.0, mode="same")


def local_maxima(values) -> list[int]:
    """Indices of strict local maxima; a flat top counts once (its middle bin)."""
    v = np.asarray(values, dtype=np.float64)
    peaks = []
    i, n = 0, v.size
    while i < n:
        j = i
        while j + 1 < n and v[j + 1] == v[i]:
            j += 1
        left = v[i - 1] if i > 0 else -np.inf
        right = v[j + 1] if j + 1 < n else -np.inf
        if v[i] > 0 and v[i] > left and v[i] > right:
            peaks.append((i + j) // 2)
        i = j + 1
    return peaks


@dataclass(frozen=True, eq=False)
class DelayAnalysis:
    histogram: Histogram
    delays: np.ndarray
    item_ids: tuple[str, ...]
    median_delay: np.ndarray
    tweet_count: np.ndarray

    @property
    def modes(self) -> list[int]:
        return local_maxima(smooth3(self.histogram.counts))

    @property
    def correlation(self) -> float | None:
        return loglog_corr(self.median_delay, self.tweet_count)


def delay_histogram(dataset: Dataset, per_decade: int = 4) -> DelayAnalysis:
    """Seconds from item creation to each matched tweet, log-binned.

    Unmatched tweets and tweets that predate their item are excluded and
    counted in ``histogram.excluded``.
    """
    per_item: dict[str, list[int]] = {}
    delays = []
    early = 0
    for s in dataset.matched_shares():
        d = s.posted_at - dataset.item(s.item_id).created_at
        if d < 0:
            early += 1
            continue
        delays.append(d)
        per_item.setdefault(s.item_id, []).append(d)
    hist = log_histogram(delays, per_decade,
                         {"unmatched": dataset.n_unmatched, "before_item_creation": early})
    ids = tuple(per_item)
    return DelayAnalysis(
        histogram=hist,
        delays=np.asarray(delays, dtype=np.int64),
        item_ids=ids,
        median_delay=np.array([np.median(per_item[i]) for i in ids], dtype=np.float64),
        tweet_count=np.array([len(per_item[i]) for i in ids], dtype=np.int64),
    )


@dataclass(frozen=True, eq=False)
class ThresholdProfile:
    histogram: Histogram
    signatures: np.ndarray
    median: float | None
    markers: tuple[int, int] = (RESPONSE_THRESHOLD, DEBATE_THRESHOLD)

    def fraction_between(self, lo: float, hi: float) -> float | None:
        if self.signatures.size == 0:
            return None
        s = self.signatures
        return float(np.count_nonzero((s >= lo) & (s <= hi)) / s.size)


def threshold_profile(dataset: Dataset, per_decade: int = 4) -> ThresholdProfile:
    """Distribution of the final signature count of each tweet's item."""
    sig = np.array([dataset.item(s.item_id).signature_count for s in dataset.matched_shares()],
                   dtype=np.int64)
    hist = log_histogram(sig, per_decade, {"unmatched": dataset.n_unmatched})
    return ThresholdProfile(hist, sig, float(np.median(sig)) if sig.size else None)


def write_histogram(hist: Histogram, path, label: str = "value") -> None:
    """Two-column ``left_edge count`` table; the final row closes the last bin."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {label}_bin_left count\n")
        for lo, c in zip(hist.edges[:-1].tolist(), hist.counts.tolist()):
            fh.write(f"{lo!r} {c}\n")
        fh.write(f"{float(hist.edges[-1])!r} 0\n")


# --- text -------------------------------------------------------------------

_TOKEN = re.compile(r"[a-z0-9]+")


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    text = resources.files("copetition").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip() and not w.startswith("#"))


def tokenize(text: str) -> list[str]:
    stop = stopwords()
    return [t for t in _TOKEN.findall(text.lower()) if len(t) >= 2 and t not in stop]


def word_freq(texts) -> dict[str, tuple[int, float]]:
    """token -> (count, ln(1+count)), most frequent first, ties alphabetical."""
    c = Counter()
    for t in texts:
        c.update(tokenize(t or ""))
    return {tok: (n, math.log1p(n)) for tok, n in sorted(c.items(), key=lambda kv: (-kv[1], kv[0]))}


# --- temporal splits --------------------------------------------------------

def temporal_split(dataset: Dataset, boundaries) -> list[Dataset]:
    """Partition items by creation time into [-inf, b1), [b1, b2), ..., [bk, inf).

    Shares follow their item; unmatched shares belong to no bucket.
    """
    boundaries = list(boundaries)
    if any(b2 <= b1 for b1, b2 in zip(boundaries, boundaries[1:])):
        raise ValueError("boundaries must be strictly increasing")
    if not boundaries:
        return [dataset]
    bucket_of = {it.item_id: int(np.searchsorted(boundaries, it.created_at, side="right"))
                 for it in dataset.items}
    items = [[] for _ in range(len(boundaries) + 1)]
    shares = [[] for _ in range(len(boundaries) + 1)]
    for it in dataset.items:
        items[bucket_of[it.item_id]].append(it)
    for s in dataset.matched_shares():
        shares[bucket_of[s.item_id]].append(s)
    return [join_dataset(sh, its) for sh, its in zip(shares, items)]


# --- correlation battery ----------------------------------------------------

def _entry(value, n):
    return {"value": value, "n": int(n)}


def scalar_correlates(st: PetitionStats, item_scores=None, item_projection=None,
                      delays: DelayAnalysis | None = None) -> dict:
    """All log-log correlations reported for the petition side.

    ``item_scores`` is a CentralityScores (or any object with ``nodes`` and
    ``scores``) over item dense ids; ``item_projection`` a weighted item
    projection. Missing inputs and undersized subsets yield ``None`` values.
    """
    sig = st.signatures
    out = {
        "signatures_vs_tweets": _entry(loglog_corr(sig, st.tweets) if len(st) >= 2 else None, len(st)),
        "signatures_vs_users": _entry(loglog_corr(sig, st.users) if len(st) >= 2 else None, len(st)),
        "retweets_vs_signatures": _entry(loglog_corr(st.retweets, sig) if len(st) >= 2 else None, len(st)),
        "favorites_vs_signatures": _entry(loglog_corr(st.favorites, sig) if len(st) >= 2 else None, len(st)),
        "verified_tweets_vs_signatures": _entry(
            loglog_corr(st.verified_tweets, sig) if len(st) >= 2 else None, len(st)),
    }
    if item_projection is not None and item_projection.weight is not None:
        p = item_projection
        prod = sig[p.a].astype(np.float64) * sig[p.b].astype(np.float64)
        ok = p.n_edges >= 2
        out["edge_weight_vs_signature_product"] = _entry(
            loglog_corr(p.weight, prod) if ok else None, p.n_edges)
    else:
        out["edge_weight_vs_signature_product"] = _entry(None, 0)
    if item_scores is not None:
        nodes = np.asarray(item_scores.nodes)
        sc = np.asarray(item_scores.scores, dtype=np.float64)
        s = sig[nodes]
        out["pagerank_vs_signatures"] = _entry(loglog_corr(sc, s) if nodes.size >= 2 else None, nodes.size)
        big = s >= RESPONSE_THRESHOLD
        nb = int(big.sum())
        out["pagerank_vs_signatures_10k"] = _entry(loglog_corr(sc[big], s[big]) if nb >= 2 else None, nb)
    else:
        out["pagerank_vs_signatures"] = _entry(None, 0)
        out["pagerank_vs_signatures_10k"] = _entry(None, 0)
    if delays is not None:
        n = len(delays.item_ids)
        out["delay_vs_tweets"] = _entry(delays.correlation if n >= 2 else None, n)
    else:
        out["delay_vs_tweets"] = _entry(None, 0)
    return dict(sorted(out.items()))


def write_petition_stats(st: PetitionStats, path) -> None:
    cols = ("item_id", "signatures", "tweets", "users", "unique_audience", "total_exposure",
            "retweets", "favorites", "verified_tweets", "department", "created_at")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for k in range(len(st)):
            w.writerow((st.item_ids[k], st.signatures[k], st.tweets[k], st.users[k],
                        st.unique_audience[k], st.total_exposure[k], st.retweets[k],
                        st.favorites[k], st.verified_tweets[k], st.departments[k], st.created_at[k]))
