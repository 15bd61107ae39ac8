"""Immutable actor/item incidence graph in compressed sparse form, both directions."""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .ingest import Dataset

MAGIC = b"CPB1"
VERSION = 1


class CacheError(ValueError):
    """Raised when a binary cache cannot be decoded."""


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """Actor<->item incidences with tweet multiplicity.

    Dense ids follow first appearance among matched shares. ``fwd_*`` arrays
    hold actor->item adjacency, ``rev_*`` the transpose; both have neighbor
    lists sorted ascending.
    """
    actor_ids: tuple[str, ...]
    item_ids: tuple[str, ...]
    fwd_offsets: np.ndarray
    fwd_items: np.ndarray
    fwd_mult: np.ndarray
    rev_offsets: np.ndarray
    rev_actors: np.ndarray
    rev_mult: np.ndarray
    n_unmatched: int = 0

    @property
    def n_actors(self) -> int:
        return len(self.actor_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_incidences(self) -> int:
        return int(self.fwd_items.size)

    @property
    def n_tweets(self) -> int:
        return int(self.fwd_mult.sum())

    def actor_degree(self) -> np.ndarray:
        return np.diff(self.fwd_offsets)

    def item_degree(self) -> np.ndarray:
        return np.diff(self.rev_offsets)

    def items_of(self, actor: int) -> np.ndarray:
        return self.fwd_items[self.fwd_offsets[actor]:self.fwd_offsets[actor + 1]]

    def actors_of(self, item: int) -> np.ndarray:
        return self.rev_actors[self.rev_offsets[item]:self.rev_offsets[item + 1]]

    def item_tweets(self) -> np.ndarray:
        """Tweets per item (multiplicity included)."""
        return np.bincount(self.fwd_items, weights=self.fwd_mult,
                           minlength=self.n_items).astype(np.int64)

    def actor_tweets(self) -> np.ndarray:
        owner = np.repeat(np.arange(self.n_actors), self.actor_degree())
        return np.bincount(owner, weights=self.fwd_mult, minlength=self.n_actors).astype(np.int64)

    def incidence_matrix(self, binary: bool = True) -> sp.csr_matrix:
        """Actor x item CSR matrix; ones if ``binary`` else multiplicities."""
        data = np.ones(self.n_incidences, dtype=np.int64) if binary else self.fwd_mult
        return sp.csr_matrix((data, self.fwd_items, self.fwd_offsets),
                             shape=(self.n_actors, self.n_items))

    def incidence_matrix_t(self, binary: bool = True) -> sp.csr_matrix:
        data = np.ones(self.n_incidences, dtype=np.int64) if binary else self.rev_mult
        return sp.csr_matrix((data, self.rev_actors, self.rev_offsets),
                             shape=(self.n_items, self.n_actors))

    def equals(self, other: "BipartiteGraph") -> bool:
        if self.actor_ids != other.actor_ids or self.item_ids != other.item_ids:
            return False
        if self.n_unmatched != other.n_unmatched:
            return False
        names = ("fwd_offsets", "fwd_items", "fwd_mult", "rev_offsets", "rev_actors", "rev_mult")
        return all(np.array_equal(getattr(self, n), getattr(other, n)) for n in names)


def from_incidences(actor_idx, item_idx, actor_ids, item_ids, n_unmatched: int = 0
                    ) -> BipartiteGraph:
    """Build from parallel arrays of dense (actor, item) ids, one entry per tweet."""
    actor_idx = np.asarray(actor_idx, dtype=np.int64)
    item_idx = np.asarray(item_idx, dtype=np.int64)
    U, P = len(actor_ids), len(item_ids)
    if actor_idx.size:
        if actor_idx.min() < 0 or actor_idx.max() >= U or item_idx.min() < 0 or item_idx.max() >= P:
            raise ValueError("incidence id out of range")
    key = actor_idx * max(P, 1) + item_idx
    uniq, mult = np.unique(key, return_counts=True)
    a = (uniq // max(P, 1)).astype(np.int64)
    i = (uniq % max(P, 1)).astype(np.int64)
    fwd_offsets = np.zeros(U + 1, dtype=np.int64)
    np.cumsum(np.bincount(a, minlength=U), out=fwd_offsets[1:])
    # unique() already sorted by (actor, item)
    order = np.lexsort((a, i))
    rev_offsets = np.zeros(P + 1, dtype=np.int64)
    np.cumsum(np.bincount(i, minlength=P), out=rev_offsets[1:])
    return BipartiteGraph(
        actor_ids=tuple(actor_ids), item_ids=tuple(item_ids),
        fwd_offsets=fwd_offsets, fwd_items=i.astype(np.int32), fwd_mult=mult.astype(np.int64),
        rev_offsets=rev_offsets, rev_actors=a[order].astype(np.int32),
        rev_mult=mult[order].astype(np.int64), n_unmatched=int(n_unmatched),
    )


def build(dataset: Dataset) -> BipartiteGraph:
    """Intern matched shares into a BipartiteGraph; unmatched shares are only counted."""
    actors: dict[str, int] = {}
    items: dict[str, int] = {}
    a_idx, i_idx = [], []
    for s in dataset.matched_shares():
        a_idx.append(actors.setdefault(s.actor_id, len(actors)))
        i_idx.append(items.setdefault(s.item_id, len(items)))
    return from_incidences(a_idx, i_idx, list(actors), list(items), dataset.n_unmatched)


def degree_profile(graph: BipartiteGraph, dataset: Dataset | None = None) -> dict:
    """Median and max of signatures, tweets and users per item.

    Entries are ``None`` when the graph has no items.
    """
    tweets = graph.item_tweets()
    users = graph.item_degree()
    cols = {"tweets": tweets, "users": users}
    if dataset is not None:
        cols["signatures"] = np.array(
            [dataset.item(i).signature_count for i in graph.item_ids], dtype=np.int64)
    out = {}
    for name, v in cols.items():
        if v.size == 0:
            out[name] = {"median": None, "max": None}
        else:
            out[name] = {"median": float(np.median(v)), "max": int(v.max())}
    return out


# --- binary cache -----------------------------------------------------------

def _pack_strings(strings) -> bytes:
    blobs = [s.encode("utf-8") for s in strings]
    offsets = np.zeros(len(blobs) + 1, dtype="<u8")
    np.cumsum([len(b) for b in blobs], out=offsets[1:])
    return struct.pack("<Q", int(offsets[-1])) + offsets.tobytes() + b"".join(blobs)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if self.pos + n > len(self.buf):
            raise CacheError("truncated cache")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def array(self, dtype: str, n: int) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * n), dtype=dt).copy()

    def strings(self, n: int) -> tuple[str, ...]:
        total = self.u64()
        offsets = self.array("<u8", n + 1)
        if offsets[-1] != total or np.any(np.diff(offsets.astype(np.int64)) < 0):
            raise CacheError("corrupt string table")
        blob = bytes(self.take(total))
        try:
            return tuple(blob[offsets[k]:offsets[k + 1]].decode("utf-8") for k in range(n))
        except UnicodeDecodeError as exc:
            raise CacheError(f"corrupt string table: {exc}") from exc

    def done(self):
        if self.pos != len(self.buf):
            raise CacheError("trailing bytes in cache")


def check_header(r: _Reader, magic: bytes, version: int) -> None:
    got = bytes(r.take(4))
    if got != magic:
        raise CacheError(f"bad magic {got!r}, expected {magic!r}")
    ver = struct.unpack("<I", r.take(4))[0]
    if ver != version:
        raise CacheError(f"unsupported cache version {ver}, expected {version}")


def dumps(graph: BipartiteGraph) -> bytes:
    parts = [
        MAGIC, struct.pack("<I", VERSION),
        struct.pack("<QQQQ", graph.n_actors, graph.n_items, graph.n_incidences, graph.n_unmatched),
        _pack_strings(graph.actor_ids),
        _pack_strings(graph.item_ids),
        graph.fwd_offsets.astype("<u8").tobytes(),
        graph.fwd_items.astype("<u4").tobytes(),
        graph.fwd_mult.astype("<u8").tobytes(),
        graph.rev_offsets.astype("<u8").tobytes(),
        graph.rev_actors.astype("<u4").tobytes(),
    ]
    return b"".join(parts)


def loads(buf: bytes) -> BipartiteGraph:
    r = _Reader(buf)
    check_header(r, MAGIC, VERSION)
    U, P, nnz, n_unmatched = (r.u64() for _ in range(4))
    actor_ids = r.strings(U)
    item_ids = r.strings(P)
    fwd_offsets = r.array("<u8", U + 1).astype(np.int64)
    fwd_items = r.array("<u4", nnz).astype(np.int32)
    fwd_mult = r.array("<u8", nnz).astype(np.int64)
    rev_offsets = r.array("<u8", P + 1).astype(np.int64)
    rev_actors = r.array("<u4", nnz).astype(np.int32)
    r.done()
    if fwd_offsets[-1] != nnz or rev_offsets[-1] != nnz:
        raise CacheError("offset table inconsistent with incidence count")
    # reverse multiplicities are implied by the forward arrays
    actor_of = np.repeat(np.arange(U, dtype=np.int64), np.diff(fwd_offsets))
    order = np.lexsort((actor_of, fwd_items))
    if not np.array_equal(actor_of[order], rev_actors):
        raise CacheError("reverse adjacency is not the transpose of forward adjacency")
    return BipartiteGraph(actor_ids, item_ids, fwd_offsets, fwd_items, fwd_mult,
                          rev_offsets, rev_actors, fwd_mult[order], int(n_unmatched))


def save_cache(graph: BipartiteGraph, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(graph))


def load_cache(path) -> BipartiteGraph:
    with open(path, "rb") as fh:
        return loads(fh.read())
