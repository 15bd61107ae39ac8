"""Parsing, validation and joining of share (tweet) and item (petition) records.

Shares arrive as JSON lines, items as CSV. Malformed input lines are never
dropped silently: each one produces a ``Rejection`` carrying its 1-based line
number and a reason.
"""
from __future__ import annotations

import csv
import io
import json
import os
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import IO, Iterable, Iterator

SHARE_FIELDS = (
    "tweet_id", "actor_id", "item_id", "posted_at", "retweets", "favorites",
    "followers", "following", "verified", "bio", "account_created_at",
)
ITEM_FIELDS = ("item_id", "title", "created_at", "signatures", "department")


class IngestError(Exception):
    """Fatal ingest failure (unreadable stream, duplicate item ids)."""


@dataclass(frozen=True)
class ShareRecord:
    tweet_id: str
    actor_id: str
    item_id: str
    posted_at: int
    retweet_count: int = 0
    favorite_count: int = 0
    follower_count: int = 0
    following_count: int = 0
    verified: bool = False
    bio: str = ""
    account_created_at: int | None = None


@dataclass(frozen=True)
class ItemRecord:
    item_id: str
    title: str
    created_at: int
    signature_count: int
    department: str = ""


@dataclass(frozen=True)
class Rejection:
    line_no: int
    reason: str


_FRACTION = re.compile(r"(?<=\d\d:\d\d:\d\d)[.,]\d+")


def parse_timestamp(value) -> int:
    """Epoch seconds (int, float or numeric string) or ISO-8601 -> UTC epoch seconds.

    Sub-second precision is truncated toward negative infinity. Naive ISO
    timestamps are taken as UTC.
    """
    if isinstance(value, bool):
        raise ValueError("boolean is not a timestamp")
    if isinstance(value, (int, float)):
        return _floor(value)
    if not isinstance(value, str) or not value.strip():
        raise ValueError(f"bad timestamp {value!r}")
    text = value.strip()
    try:
        return _floor(float(text))
    except ValueError:
        pass
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    # fractional seconds are discarded anyway; 3.10's fromisoformat is picky about them
    text = _FRACTION.sub("", text)
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return _floor(dt.timestamp())


def _floor(x) -> int:
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError("non-finite timestamp")
    i = int(x)
    return i - 1 if i > x else i


def _count(obj: dict, key: str) -> int:
    v = obj.get(key, 0)
    if v is None:
        return 0
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ValueError(f"{key}: not a count")
    if isinstance(v, str):
        v = v.strip() or "0"
    f = float(v)
    if f != int(f):
        raise ValueError(f"{key}: not an integer")
    if f < 0:
        raise ValueError(f"{key}: negative")
    return int(f)


def _flag(obj: dict, key: str) -> bool:
    v = obj.get(key, False)
    if isinstance(v, bool):
        return v
    if v is None:
        return False
    if isinstance(v, (int, float)) and v in (0, 1):
        return bool(v)
    if isinstance(v, str) and v.strip().lower() in ("true", "false", "1", "0", ""):
        return v.strip().lower() in ("true", "1")
    raise ValueError(f"{key}: not a boolean")


def _ident(obj: dict, key: str) -> str:
    v = obj.get(key)
    if isinstance(v, bool) or v is None:
        raise ValueError(f"missing {key}")
    if isinstance(v, int):
        v = str(v)
    if not isinstance(v, str) or not v.strip():
        raise ValueError(f"missing {key}")
    return v.strip()


def share_from_dict(obj: dict) -> ShareRecord:
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    posted = obj.get("posted_at")
    if posted is None:
        raise ValueError("missing posted_at")
    created = obj.get("account_created_at")
    rec = ShareRecord(
        tweet_id=_ident(obj, "tweet_id"),
        actor_id=_ident(obj, "actor_id"),
        item_id=_ident(obj, "item_id"),
        posted_at=parse_timestamp(posted),
        retweet_count=_count(obj, "retweets"),
        favorite_count=_count(obj, "favorites"),
        follower_count=_count(obj, "followers"),
        following_count=_count(obj, "following"),
        verified=_flag(obj, "verified"),
        bio=obj.get("bio") or "",
        account_created_at=None if created in (None, "") else parse_timestamp(created),
    )
    if not isinstance(rec.bio, str):
        raise ValueError("bio: not text")
    if rec.account_created_at is not None and rec.posted_at < rec.account_created_at:
        raise ValueError("posted_at precedes account_created_at")
    return rec


def share_to_dict(rec: ShareRecord) -> dict:
    return {
        "tweet_id": rec.tweet_id,
        "actor_id": rec.actor_id,
        "item_id": rec.item_id,
        "posted_at": rec.posted_at,
        "retweets": rec.retweet_count,
        "favorites": rec.favorite_count,
        "followers": rec.follower_count,
        "following": rec.following_count,
        "verified": rec.verified,
        "bio": rec.bio,
        "account_created_at": rec.account_created_at,
    }


def _lines(stream) -> Iterator[str]:
    try:
        if isinstance(stream, (str, os.PathLike)):
            with open(stream, encoding="utf-8") as fh:
                yield from fh
        else:
            yield from stream
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestError(f"unreadable stream: {exc}") from exc


def parse_shares(stream: IO[str] | Iterable[str] | str | os.PathLike
                 ) -> tuple[list[ShareRecord], list[Rejection]]:
    """Parse JSON-lines shares.

    Returns records in input order plus a rejection log. Every input line
    ends up in exactly one of the two lists; a repeated ``tweet_id`` keeps
    the first occurrence and rejects the rest.
    """
    records: list[ShareRecord] = []
    rejections: list[Rejection] = []
    seen: set[str] = set()
    for line_no, line in enumerate(_lines(stream), start=1):
        text = line.strip()
        if not text:
            rejections.append(Rejection(line_no, "blank line"))
            continue
        try:
            rec = share_from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            rejections.append(Rejection(line_no, f"invalid JSON: {exc.msg}"))
            continue
        except (ValueError, TypeError, OverflowError) as exc:
            rejections.append(Rejection(line_no, str(exc)))
            continue
        if rec.tweet_id in seen:
            rejections.append(Rejection(line_no, f"duplicate tweet_id {rec.tweet_id}"))
            continue
        seen.add(rec.tweet_id)
        records.append(rec)
    return records, rejections


def write_shares(records: Iterable[ShareRecord], stream: IO[str]) -> None:
    for rec in records:
        stream.write(json.dumps(share_to_dict(rec), ensure_ascii=False, sort_keys=False))
        stream.write("\n")


def parse_items(stream: IO[str] | Iterable[str] | str | os.PathLike
                ) -> tuple[list[ItemRecord], list[Rejection]]:
    """Parse the item CSV. Line numbers count the header as line 1."""
    lines = _lines(stream)
    reader = csv.reader(lines)
    items: list[ItemRecord] = []
    rejections: list[Rejection] = []
    try:
        header = next(reader)
    except StopIteration:
        return items, rejections
    header = [h.strip() for h in header]
    missing = [f for f in ITEM_FIELDS if f not in header]
    if missing:
        raise IngestError(f"item CSV header lacks {', '.join(missing)}")
    col = {name: header.index(name) for name in ITEM_FIELDS}
    for row in reader:
        line_no = reader.line_num
        if not row or not any(c.strip() for c in row):
            rejections.append(Rejection(line_no, "blank line"))
            continue
        if len(row) != len(header):
            rejections.append(Rejection(line_no, f"expected {len(header)} fields, got {len(row)}"))
            continue
        try:
            item_id = row[col["item_id"]].strip()
            if not item_id:
                raise ValueError("missing item_id")
            sig = _count({"signatures": row[col["signatures"]]}, "signatures")
            items.append(ItemRecord(
                item_id=item_id,
                title=row[col["title"]],
                created_at=parse_timestamp(row[col["created_at"]]),
                signature_count=sig,
                department=row[col["department"]].strip(),
            ))
        except (ValueError, TypeError, OverflowError) as exc:
            rejections.append(Rejection(line_no, str(exc)))
    return items, rejections


def write_items(items: Iterable[ItemRecord], stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(ITEM_FIELDS)
    for it in items:
        w.writerow([it.item_id, it.title, it.created_at, it.signature_count, it.department])


def write_rejections(rejections: Iterable[Rejection], stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(("line_no", "reason"))
    for r in rejections:
        w.writerow((r.line_no, r.reason))


@dataclass(frozen=True)
class Dataset:
    """Shares linked to items. Immutable once built.

    ``matched[i]`` tells whether ``shares[i]`` refers to a known item;
    unmatched shares are kept so that callers exclude them explicitly.
    """
    shares: tuple[ShareRecord, ...]
    items: tuple[ItemRecord, ...]
    matched: tuple[bool, ...]
    item_index: dict[str, int] = field(repr=False)

    @property
    def n_matched(self) -> int:
        return sum(self.matched)

    @property
    def n_unmatched(self) -> int:
        return len(self.shares) - self.n_matched

    @property
    def unmatched_fraction(self) -> float:
        return self.n_unmatched / len(self.shares) if self.shares else 0.0

    @property
    def unmatched_item_ids(self) -> list[str]:
        """Distinct missing item ids, in order of first appearance."""
        out: dict[str, None] = {}
        for s, ok in zip(self.shares, self.matched):
            if not ok:
                out.setdefault(s.item_id)
        return list(out)

    def item(self, item_id: str) -> ItemRecord | None:
        i = self.item_index.get(item_id)
        return None if i is None else self.items[i]

    def matched_shares(self) -> Iterator[ShareRecord]:
        return (s for s, ok in zip(self.shares, self.matched) if ok)


def join_dataset(shares: Iterable[ShareRecord], items: Iterable[ItemRecord]) -> Dataset:
    items = tuple(items)
    index: dict[str, int] = {}
    for i, it in enumerate(items):
        if it.item_id in index:
            raise IngestError(f"duplicate item_id {it.item_id}")
        index[it.item_id] = i
    shares = tuple(shares)
    matched = tuple(s.item_id in index for s in shares)
    return Dataset(shares=shares, items=items, matched=matched, item_index=index)


def load_dataset(shares_path, items_path) -> tuple[Dataset, list[Rejection], list[Rejection]]:
    """Read both inputs from disk and join them."""
    shares, share_rej = parse_shares(shares_path)
    items, item_rej = parse_items(items_path)
    return join_dataset(shares, items), share_rej, item_rej


def dumps_shares(records: Iterable[ShareRecord]) -> str:
    buf = io.StringIO()
    write_shares(records, buf)
    return buf.getvalue()
