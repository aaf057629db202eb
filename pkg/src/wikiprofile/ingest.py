"""Streaming reader for MediaWiki ``pages-meta-history`` XML exports.

Revisions are pulled out of the dump with an expat push parser fed in fixed
size chunks, so revision text is never held in memory. Events are then folded
into per-contributor histories.
"""

from __future__ import annotations

import bz2
import gzip
import io
import json
import logging
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import BinaryIO
from xml.parsers import expat

log = logging.getLogger(__name__)

CHUNK_SIZE = 1 << 16
HISTORIES_SCHEMA = "wikiprofile.histories"
HISTORIES_VERSION = 1

_TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


class DumpParseError(Exception):
    """Malformed XML. ``offset`` is the byte position in the decompressed stream."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class SchemaError(ValueError):
    """A stage file does not match its documented layout."""


@dataclass(frozen=True, order=True)
class ContributorRef:
    """Who made an edit.

    ``kind`` is ``"registered"`` (``user_id`` and/or ``name`` set) or
    ``"anonymous"`` (``ip`` set). Anonymous editors are never bots.
    """

    kind: str
    user_id: int | None = None
    name: str | None = None
    ip: str | None = None
    bot: bool = False

    def __post_init__(self):
        if self.kind == "registered":
            if self.ip is not None:
                raise ValueError("registered contributor cannot carry an ip")
            if self.name is not None and not self.name:
                raise ValueError("registered contributor name must be non-empty")
            if self.user_id is None and not self.name:
                raise ValueError("registered contributor needs an id or a name")
        elif self.kind == "anonymous":
            if not self.ip or self.user_id is not None or self.name is not None:
                raise ValueError("anonymous contributor must carry only an ip")
            if self.bot:
                raise ValueError("anonymous contributor cannot be a bot")
        else:
            raise ValueError(f"unknown contributor kind {self.kind!r}")

    @classmethod
    def registered(cls, user_id: int | None, name: str | None, bot: bool = False) -> ContributorRef:
        return cls("registered", user_id=user_id, name=name, bot=bot)

    @classmethod
    def anonymous(cls, ip: str) -> ContributorRef:
        return cls("anonymous", ip=ip)

    @property
    def is_anonymous(self) -> bool:
        return self.kind == "anonymous"

    @property
    def key(self) -> str:
        """Identity key: numeric id when known, else the user name, else the ip."""
        if self.kind == "anonymous":
            return f"ip:{self.ip}"
        if self.user_id is not None:
            return f"id:{self.user_id}"
        return f"name:{self.name}"

    @property
    def sort_key(self) -> tuple:
        if self.kind == "anonymous":
            return (2, 0, self.ip)
        if self.user_id is not None:
            return (0, self.user_id, "")
        return (1, 0, self.name)

    @property
    def label(self) -> str:
        return self.ip if self.kind == "anonymous" else (self.name or str(self.user_id))


@dataclass(frozen=True)
class RevisionEvent:
    page_id: int
    namespace: int
    timestamp: datetime
    contributor: ContributorRef
    minor: bool = False


@dataclass
class ContributorHistory:
    contributor: ContributorRef
    monthly_counts: dict[int, int]
    first_edit: datetime
    last_edit: datetime
    distinct_articles: int

    @property
    def total_edits(self) -> int:
        return sum(self.monthly_counts.values())

    @property
    def active_months(self) -> list[int]:
        return sorted(self.monthly_counts)

    def validate(self) -> None:
        if not self.monthly_counts:
            raise ValueError("monthly_counts is empty")
        if any(c < 1 for c in self.monthly_counts.values()):
            raise ValueError("monthly counts must be >= 1")
        if self.first_edit > self.last_edit:
            raise ValueError("first_edit is after last_edit")
        if month_index(self.first_edit) != min(self.monthly_counts):
            raise ValueError("first_edit month does not match earliest active month")
        if month_index(self.last_edit) != max(self.monthly_counts):
            raise ValueError("last_edit month does not match latest active month")
        if self.distinct_articles < 1:
            raise ValueError("distinct_articles must be >= 1")


@dataclass
class IngestConfig:
    namespaces: frozenset[int] | None = None  # None keeps every namespace
    bot_list: frozenset[str] = frozenset()

    @classmethod
    def from_paths(cls, namespaces: Iterable[int] | None = None,
                   bot_list_path: str | Path | None = None) -> IngestConfig:
        bots = load_bot_list(bot_list_path) if bot_list_path else frozenset()
        ns = frozenset(namespaces) if namespaces is not None else None
        return cls(namespaces=ns, bot_list=bots)


@dataclass
class IngestStats:
    pages: int = 0
    revisions: int = 0
    events: int = 0
    bad_timestamps: int = 0
    missing_contributor: int = 0
    filtered_namespace: int = 0
    errors: list[str] = field(default_factory=list)


def month_index(ts: datetime) -> int:
    return ts.year * 12 + ts.month - 1


def month_label(index: int) -> str:
    return f"{index // 12:04d}-{index % 12 + 1:02d}"


def parse_timestamp(text: str) -> datetime:
    return datetime.strptime(text, _TIMESTAMP_FORMAT).replace(tzinfo=timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime(_TIMESTAMP_FORMAT)


def classify_bot(name: str, bot_list: Iterable[str] = ()) -> bool:
    if not name:
        raise ValueError("name must be non-empty")
    return name in bot_list or name.lower().endswith("bot")


def load_bot_list(path: str | Path) -> frozenset[str]:
    names = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                names.add(line)
    return frozenset(names)


def open_dump(path: str | Path) -> BinaryIO:
    """Open a dump file, transparently unwrapping gzip or bzip2 by magic bytes."""
    raw = open(path, "rb")
    return wrap_compressed(raw)


def wrap_compressed(raw: BinaryIO) -> BinaryIO:
    buffered = raw if hasattr(raw, "peek") else io.BufferedReader(raw)
    magic = buffered.peek(3)[:3]
    if magic[:2] == b"\x1f\x8b":
        return gzip.GzipFile(fileobj=buffered)
    if magic == b"BZh":
        return bz2.BZ2File(buffered)
    return buffered


class _RevisionCollector:
    """expat callbacks. Accumulates character data only for the few short
    elements we read; everything else, including ``<text>``, is dropped."""

    _CAPTURE = {
        ("page", "ns"), ("page", "id"),
        ("revision", "timestamp"),
        ("contributor", "username"), ("contributor", "id"), ("contributor", "ip"),
    }

    def __init__(self, config: IngestConfig, stats: IngestStats):
        self.config = config
        self.stats = stats
        self.ready: list[RevisionEvent] = []
        self._stack: list[str] = []
        self._buf: list[str] | None = None
        self._page: dict[str, str] = {}
        self._rev: dict[str, str] = {}
        self._contrib: dict[str, str] = {}
        self._minor = False
        self._contrib_deleted = False

    def start(self, name: str, attrs: dict) -> None:
        parent = self._stack[-1] if self._stack else None
        self._stack.append(name)
        if name == "page":
            self._page = {}
            self.stats.pages += 1
        elif name == "revision" and parent == "page":
            self._rev, self._contrib = {}, {}
            self._minor = False
            self._contrib_deleted = False
        elif name == "contributor" and parent == "revision":
            self._contrib_deleted = "deleted" in attrs
        elif name == "minor" and parent == "revision":
            self._minor = True
        if (parent, name) in self._CAPTURE:
            self._buf = []

    def end(self, name: str) -> None:
        self._stack.pop()
        parent = self._stack[-1] if self._stack else None
        if self._buf is not None:
            text = "".join(self._buf).strip()
            self._buf = None
            if parent == "page":
                self._page[name] = text
            elif parent == "revision":
                self._rev[name] = text
            elif parent == "contributor":
                self._contrib[name] = text
        elif name == "revision" and parent == "page":
            self._emit()

    def data(self, text: str) -> None:
        if self._buf is not None:
            self._buf.append(text)

    def _emit(self) -> None:
        stats = self.stats
        stats.revisions += 1
        try:
            ns = int(self._page.get("ns", "0"))
            page_id = int(self._page["id"])
        except (KeyError, ValueError):
            stats.errors.append(f"revision {stats.revisions}: page without a valid id/ns")
            return
        if self.config.namespaces is not None and ns not in self.config.namespaces:
            stats.filtered_namespace += 1
            return
        try:
            ts = parse_timestamp(self._rev.get("timestamp", ""))
        except ValueError:
            stats.bad_timestamps += 1
            stats.errors.append(f"page {page_id}: bad timestamp {self._rev.get('timestamp')!r}")
            return
        contributor = self._contributor()
        if contributor is None:
            stats.missing_contributor += 1
            return
        stats.events += 1
        self.ready.append(RevisionEvent(page_id, ns, ts, contributor, self._minor))

    def _contributor(self) -> ContributorRef | None:
        c = self._contrib
        if self._contrib_deleted:
            return None
        if c.get("ip"):
            return ContributorRef.anonymous(c["ip"])
        name = c.get("username") or None
        uid = int(c["id"]) if c.get("id", "").lstrip("-").isdigit() else None
        if uid is not None and uid <= 0:
            # some exports write id 0 for ip editors whose <ip> went missing
            uid = None
        if name is None and uid is None:
            return None
        bot = classify_bot(name, self.config.bot_list) if name else False
        return ContributorRef.registered(uid, name, bot)


def parse_dump(source: BinaryIO, config: IngestConfig | None = None,
               stats: IngestStats | None = None) -> Iterator[RevisionEvent]:
    """Yield one event per ``<revision>`` in document order.

    Revisions with an unparseable timestamp or no identifiable contributor are
    skipped and counted in ``stats``. Malformed XML raises ``DumpParseError``.
    """
    config = config or IngestConfig()
    stats = stats if stats is not None else IngestStats()
    collector = _RevisionCollector(config, stats)
    parser = expat.ParserCreate()
    parser.buffer_text = True
    parser.StartElementHandler = collector.start
    parser.EndElementHandler = collector.end
    parser.CharacterDataHandler = collector.data

    def feed(chunk: bytes, final: bool) -> None:
        try:
            parser.Parse(chunk, final)
        except expat.ExpatError as exc:
            raise DumpParseError(expat.errors.messages[exc.code], parser.CurrentByteIndex) from None

    while True:
        chunk = source.read(CHUNK_SIZE)
        if not chunk:
            break
        feed(chunk, False)
        if collector.ready:
            yield from collector.ready
            collector.ready.clear()
    feed(b"", True)
    yield from collector.ready
    collector.ready.clear()


def aggregate_histories(events: Iterable[RevisionEvent]) -> dict[ContributorRef, ContributorHistory]:
    """Fold events into one history per contributor identity.

    Anonymous and bot contributors are kept; filtering is a later stage. When a
    registered user appears under several names, the name of the latest edit
    wins (ties broken by the larger name) so the result does not depend on
    event order.
    """
    acc: dict[str, _Accumulator] = {}
    for ev in events:
        key = ev.contributor.key
        a = acc.get(key)
        if a is None:
            a = acc[key] = _Accumulator()
        a.add(ev)
    return _finish(acc)


def merge_shards(shards: Iterable[Iterable[RevisionEvent]]) -> dict[ContributorRef, ContributorHistory]:
    """Aggregate each shard separately and combine; equals aggregating the union."""
    acc: dict[str, _Accumulator] = {}
    for shard in shards:
        part: dict[str, _Accumulator] = {}
        for ev in shard:
            part.setdefault(ev.contributor.key, _Accumulator()).add(ev)
        for key, a in part.items():
            if key in acc:
                acc[key].merge(a)
            else:
                acc[key] = a
    return _finish(acc)


class _Accumulator:
    __slots__ = ("months", "first", "last", "pages", "ident", "ident_rank")

    def __init__(self):
        self.months: dict[int, int] = {}
        self.first: datetime | None = None
        self.last: datetime | None = None
        self.pages: set[int] = set()
        self.ident: ContributorRef | None = None
        self.ident_rank: tuple | None = None

    def add(self, ev: RevisionEvent) -> None:
        m = month_index(ev.timestamp)
        self.months[m] = self.months.get(m, 0) + 1
        if self.first is None or ev.timestamp < self.first:
            self.first = ev.timestamp
        if self.last is None or ev.timestamp > self.last:
            self.last = ev.timestamp
        self.pages.add(ev.page_id)
        self._offer(ev.contributor, (ev.timestamp, ev.contributor.name or "", ev.contributor.bot))

    def _offer(self, ref: ContributorRef, rank: tuple) -> None:
        if self.ident_rank is None or rank > self.ident_rank:
            self.ident, self.ident_rank = ref, rank

    def merge(self, other: _Accumulator) -> None:
        for m, c in other.months.items():
            self.months[m] = self.months.get(m, 0) + c
        self.first = min(self.first, other.first)
        self.last = max(self.last, other.last)
        self.pages |= other.pages
        self._offer(other.ident, other.ident_rank)


def _finish(acc: dict[str, _Accumulator]) -> dict[ContributorRef, ContributorHistory]:
    out = {}
    for a in sorted(acc.values(), key=lambda a: a.ident.sort_key):
        ref = a.ident
        hist = ContributorHistory(ref, dict(sorted(a.months.items())), a.first, a.last, len(a.pages))
        out[ref] = hist
    return out


# -- JSON-lines serialization -------------------------------------------------

def history_to_record(h: ContributorHistory) -> dict:
    c = h.contributor
    return {
        "key": c.key,
        "kind": c.kind,
        "user_id": c.user_id,
        "name": c.name,
        "ip": c.ip,
        "bot": c.bot,
        "monthly_counts": [[m, n] for m, n in sorted(h.monthly_counts.items())],
        "first_edit": format_timestamp(h.first_edit),
        "last_edit": format_timestamp(h.last_edit),
        "distinct_articles": h.distinct_articles,
    }


def record_to_history(rec: dict, line: int = 0) -> ContributorHistory:
    def need(name, types):
        if name not in rec:
            raise SchemaError(f"line {line}: missing field {name!r}")
        value = rec[name]
        if not isinstance(value, types) or (isinstance(value, bool) and types is not bool):
            raise SchemaError(f"line {line}: field {name!r} has invalid value {value!r}")
        return value

    kind = need("kind", str)
    try:
        if kind == "anonymous":
            ref = ContributorRef.anonymous(need("ip", str))
        else:
            ref = ContributorRef.registered(rec.get("user_id"), rec.get("name"), bool(rec.get("bot", False)))
    except ValueError as exc:
        raise SchemaError(f"line {line}: field 'kind': {exc}") from None
    counts = {}
    for pair in need("monthly_counts", list):
        if (not isinstance(pair, list) or len(pair) != 2
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in pair)):
            raise SchemaError(f"line {line}: field 'monthly_counts' has invalid entry {pair!r}")
        counts[pair[0]] = counts.get(pair[0], 0) + pair[1]
    try:
        first = parse_timestamp(need("first_edit", str))
        last = parse_timestamp(need("last_edit", str))
    except ValueError as exc:
        raise SchemaError(f"line {line}: field 'first_edit'/'last_edit': {exc}") from None
    hist = ContributorHistory(ref, counts, first, last, need("distinct_articles", int))
    try:
        hist.validate()
    except ValueError as exc:
        raise SchemaError(f"line {line}: {exc}") from None
    return hist


def write_histories(histories: Iterable[ContributorHistory], fh) -> int:
    """Write the JSON-lines file: a schema header line, then one contributor per line."""
    fh.write(json.dumps({"schema": HISTORIES_SCHEMA, "version": HISTORIES_VERSION}) + "\n")
    n = 0
    for h in sorted(histories, key=lambda h: h.contributor.sort_key):
        fh.write(json.dumps(history_to_record(h), ensure_ascii=False, sort_keys=True) + "\n")
        n += 1
    return n


def read_histories(fh) -> list[ContributorHistory]:
    header = fh.readline()
    try:
        meta = json.loads(header)
    except json.JSONDecodeError:
        raise SchemaError("line 1: header is not JSON") from None
    if not isinstance(meta, dict) or meta.get("schema") != HISTORIES_SCHEMA:
        raise SchemaError(f"line 1: field 'schema' must be {HISTORIES_SCHEMA!r}")
    if meta.get("version") != HISTORIES_VERSION:
        raise SchemaError(f"line 1: unsupported field 'version' {meta.get('version')!r}")
    out = []
    for lineno, line in enumerate(fh, start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise SchemaError(f"line {lineno}: record must be an object")
        out.append(record_to_history(rec, lineno))
    return out
