"""Synthetic share/item data with planted structure.

Every random draw comes from one ``numpy.random.Generator`` backed by the
PCG64 bit generator (O'Neill's permuted congruential generator, 128-bit
state, XSL-RR output) seeded with ``PlantedSpec.seed``. Draws happen in a
fixed order, so a spec and seed always give the same records on a given
numpy version.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .bigraph import BipartiteGraph, from_incidences
from .ingest import Dataset, ItemRecord, ShareRecord, join_dataset, write_items, write_shares

DAY = 86_400
# 2013-07-01 and 2015-03-31, UTC
DEFAULT_START = 1_372_636_800
DEFAULT_END = 1_427_760_000

_WORD_BANK = (
    "animal wildlife dogs cats rescue welfare vegan badger fox hunting "
    "football liverpool student fans justice hillsborough grassroots club "
    "christian church faith prayer family mother father wife "
    "muslim islam community peace cycling motorsport racing outdoors fishing "
    "london leicester britain england scotland wales nhs health nurse doctor "
    "teacher school education pension tax benefits housing veteran army "
    "climate energy fracking green transport rail cannabis music festival"
).split()


@dataclass(frozen=True)
class PlantedSpec:
    k: int = 4
    actors_per_community: int = 100
    items_per_community: int = 25
    p_in: float = 0.3
    p_out: float = 0.01
    repeat_rate: float = 0.2
    vocabularies: tuple[tuple[str, ...], ...] | None = None
    bio_length: int = 5
    title_length: int = 4
    alpha: float = 5.0
    beta: float = 1.13
    sigma: float = 0.1
    fast_fraction: float = 0.5
    fast_median: float = 600.0
    slow_median: float = 60.0 * DAY
    delay_sigma: float = 0.6
    follower_mu: float = 5.0
    follower_sigma: float = 1.5
    verified_prob: float = 0.01
    retweet_mean: float = 1.0
    favorite_mean: float = 1.5
    orphan_fraction: float = 0.0
    departments: tuple[str, ...] = ("Home Office", "Department of Health", "DEFRA",
                                    "Department for Education", "HM Treasury")
    start: int = DEFAULT_START
    end: int = DEFAULT_END
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not (0.0 <= self.p_out < self.p_in <= 1.0):
            raise ValueError("need 0 <= p_out < p_in <= 1")
        if self.sigma < 0 or self.delay_sigma < 0 or self.follower_sigma < 0:
            raise ValueError("noise scales must be non-negative")
        if not (0.0 <= self.fast_fraction <= 1.0 and 0.0 <= self.orphan_fraction <= 1.0):
            raise ValueError("fractions must lie in [0, 1]")
        if self.vocabularies is not None and len(self.vocabularies) != self.k:
            raise ValueError("need one vocabulary per community")
        if self.end < self.start:
            raise ValueError("end precedes start")

    def vocabulary(self, c: int) -> tuple[str, ...]:
        if self.vocabularies is not None:
            return tuple(self.vocabularies[c])
        size = max(3, len(_WORD_BANK) // self.k)
        words = [_WORD_BANK[(c * size + j) % len(_WORD_BANK)] for j in range(size)]
        if c * size + size > len(_WORD_BANK):
            words = [f"{w}{c}" for w in words]
        return tuple(words)


@dataclass
class GroundTruth:
    actor_community: dict[str, int]
    item_community: dict[str, int]
    alpha: float
    beta: float
    log1p_signatures: dict[str, float]
    fast_component: dict[str, bool]
    orphan_tweets: list[str] = field(default_factory=list)
    spec: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1)


def _lognormal_median(rng, median: float, sigma: float, size: int) -> np.ndarray:
    return np.exp(math.log(median) + sigma * rng.standard_normal(size))


def generate(spec: PlantedSpec) -> tuple[Dataset, GroundTruth]:
    """Draw a dataset whose community, signature and delay structure is known."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    U = spec.k * spec.actors_per_community
    P = spec.k * spec.items_per_community
    actor_comm = np.repeat(np.arange(spec.k), spec.actors_per_community)
    item_comm = np.repeat(np.arange(spec.k), spec.items_per_community)
    actor_ids = [f"u{a:06d}" for a in range(U)]
    item_ids = [f"p{i:05d}" for i in range(P)]

    pairs_a, pairs_i = [], []
    for a in range(U):
        prob = np.where(item_comm == actor_comm[a], spec.p_in, spec.p_out)
        hit = np.flatnonzero(rng.random(P) < prob)
        pairs_a.append(np.full(hit.size, a))
        pairs_i.append(hit)
    pa = np.concatenate(pairs_a) if pairs_a else np.zeros(0, dtype=np.int64)
    pi = np.concatenate(pairs_i) if pairs_i else np.zeros(0, dtype=np.int64)
    mult = 1 + rng.poisson(spec.repeat_rate, pa.size)
    tweets_per_item = np.bincount(pi, weights=mult, minlength=P)

    log_sig = spec.alpha + spec.beta * np.log1p(tweets_per_item) + spec.sigma * rng.standard_normal(P)
    signatures = np.maximum(0, np.rint(np.expm1(log_sig))).astype(np.int64)
    created = rng.integers(spec.start, spec.end + 1, P)
    dept_idx = rng.integers(0, len(spec.departments), P)
    items = []
    for i in range(P):
        vocab = spec.vocabulary(int(item_comm[i]))
        words = rng.choice(len(vocab), spec.title_length)
        items.append(ItemRecord(
            item_id=item_ids[i], title=" ".join(vocab[w] for w in words),
            created_at=int(created[i]), signature_count=int(signatures[i]),
            department=spec.departments[dept_idx[i]],
        ))

    followers = np.floor(np.exp(spec.follower_mu + spec.follower_sigma * rng.standard_normal(U))).astype(np.int64)
    following = np.floor(np.exp(spec.follower_mu + spec.follower_sigma * rng.standard_normal(U))).astype(np.int64)
    verified = rng.random(U) < spec.verified_prob
    account_created = spec.start - rng.integers(DAY, 2000 * DAY, U)
    bios = []
    for a in range(U):
        vocab = spec.vocabulary(int(actor_comm[a]))
        words = rng.choice(len(vocab), spec.bio_length)
        bios.append(" ".join(vocab[w] for w in words))

    n_tweets = int(mult.sum())
    t_actor = np.repeat(pa, mult)
    t_item = np.repeat(pi, mult)
    fast = rng.random(n_tweets) < spec.fast_fraction
    delay = np.where(fast,
                     _lognormal_median(rng, spec.fast_median, spec.delay_sigma, n_tweets),
                     _lognormal_median(rng, spec.slow_median, spec.delay_sigma, n_tweets))
    posted = created[t_item] + np.floor(delay).astype(np.int64)
    retweets = rng.poisson(spec.retweet_mean, n_tweets)
    favorites = rng.poisson(spec.favorite_mean, n_tweets)
    order = np.lexsort((np.arange(n_tweets), posted))

    n_orphans = int(round(spec.orphan_fraction * n_tweets))
    orphan_rank = set(rng.choice(n_tweets, n_orphans, replace=False).tolist()) if n_orphans else set()

    shares = []
    fast_map: dict[str, bool] = {}
    orphans = []
    for rank, t in enumerate(order.tolist()):
        tid = f"t{rank:08d}"
        a = int(t_actor[t])
        item_id = item_ids[int(t_item[t])]
        if rank in orphan_rank:
            item_id = f"orphan{len(orphans):06d}"
            orphans.append(tid)
        fast_map[tid] = bool(fast[t])
        shares.append(ShareRecord(
            tweet_id=tid, actor_id=actor_ids[a], item_id=item_id, posted_at=int(posted[t]),
            retweet_count=int(retweets[t]), favorite_count=int(favorites[t]),
            follower_count=int(followers[a]), following_count=int(following[a]),
            verified=bool(verified[a]), bio=bios[a], account_created_at=int(account_created[a]),
        ))
    truth = GroundTruth(
        actor_community={actor_ids[a]: int(actor_comm[a]) for a in range(U)},
        item_community={item_ids[i]: int(item_comm[i]) for i in range(P)},
        alpha=spec.alpha, beta=spec.beta,
        log1p_signatures={item_ids[i]: float(log_sig[i]) for i in range(P)},
        fast_component=fast_map,
        orphan_tweets=orphans,
        spec={k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(spec).items()},
    )
    return join_dataset(shares, items), truth


def write_synth(dataset: Dataset, truth: GroundTruth, outdir) -> dict[str, str]:
    """Write ``shares.jsonl``, ``items.csv`` and ``ground_truth.json`` under ``outdir``."""
    os.makedirs(outdir, exist_ok=True)
    paths = {name: os.path.join(outdir, name)
             for name in ("shares.jsonl", "items.csv", "ground_truth.json")}
    with open(paths["shares.jsonl"], "w", encoding="utf-8", newline="\n") as fh:
        write_shares(dataset.shares, fh)
    with open(paths["items.csv"], "w", encoding="utf-8", newline="") as fh:
        write_items(dataset.items, fh)
    with open(paths["ground_truth.json"], "w", encoding="utf-8") as fh:
        fh.write(truth.to_json())
        fh.write("\n")
    return paths


def random_incidence(n_actors: int, n_items: int, n_tweets: int, seed: int = 0) -> BipartiteGraph:
    """Uniformly random actor/item graph straight from arrays (no record objects).

    Meant for scale tests, where building a record-level Dataset would
    dominate the run time.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    a = rng.integers(0, n_actors, n_tweets)
    i = rng.integers(0, n_items, n_tweets)
    return from_incidences(a, i, [f"u{x}" for x in range(n_actors)], [f"p{x}" for x in range(n_items)])


def ari(labels_a, labels_b) -> float:
    """Adjusted Rand index from the contingency table of two labelings."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape:
        raise ValueError("labelings must have equal length")
    n = a.size
    if n < 2:
        return 1.0
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia.ravel(), ib.ravel()), 1)

    def comb2(x):
        x = np.asarray(x, dtype=np.float64)
        return float(np.sum(x * (x - 1) / 2.0))

    index = comb2(table)
    sa = comb2(table.sum(axis=1))
    sb = comb2(table.sum(axis=0))
    expected = sa * sb / (n * (n - 1) / 2.0)
    maximum = (sa + sb) / 2.0
    if maximum == expected:
        return 1.0
    return (index - expected) / (maximum - expected)
