"""Conversation corpus: types, JSONL input/output, basic counts.

A conversation is one parent tweet, the posting account's profile and
the direct replies the parent received.  Nested reply threads are not
modelled; ingestion drops anything below the first reply level and
reports how much it dropped.

JSON Lines is the canonical storage format.  A flattened CSV import is
also accepted: one row per reply, parent/account columns repeated, and
consecutive rows sharing an id merged into one conversation.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path

from .errors import ParseError, SchemaError


class Label(str, Enum):
    """Reply label.  Replies are UNLABELED until the labeler runs."""

    ABUSIVE = "abusive"
    NEUTRAL = "neutral"
    FLAG_MANUAL = "flag"
    UNLABELED = "unlabeled"


class Provenance(str, Enum):
    INGESTED = "ingested"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class AccountProfile:
    """Profile of the account that posted the parent tweet.

    Counts are nonnegative; time_zone is an opaque string or None.
    """

    friends_count: int = 0
    followers_count: int = 0
    listed_count: int = 0
    favourites_count: int = 0
    statuses_count: int = 0
    geo_enabled: bool = False
    verified: bool = False
    contributors_enabled: bool = False
    is_translator: bool = False
    is_translation_enabled: bool = False
    has_extended_profile: bool = False
    default_profile: bool = True
    default_profile_image: bool = False
    following: bool = False
    follow_request_sent: bool = False
    notifications: bool = False
    time_zone: str | None = None

    def __post_init__(self) -> None:
        for name in ("friends_count", "followers_count", "listed_count",
                     "favourites_count", "statuses_count"):
            if getattr(self, name) < 0:
                raise SchemaError(f"account.{name} must be nonnegative")


@dataclass(frozen=True)
class ParentTweet:
    """The tweet whose replies we model.

    num_retweets/num_favorites exist only after posting; None marks a
    pre-post draft or an ingest source that lacked them.
    """

    id: str
    text: str
    hashtag_count: int = 0
    symbol_count: int = 0
    mention_count: int = 0
    url_count: int = 0
    is_quote_status: bool = False
    possibly_sensitive: bool = False
    num_retweets: int | None = None
    num_favorites: int | None = None

    def __post_init__(self) -> None:
        for name in ("hashtag_count", "symbol_count", "mention_count", "url_count"):
            if getattr(self, name) < 0:
                raise SchemaError(f"parent.{name} must be nonnegative")


@dataclass(frozen=True)
class Reply:
    id: str
    text: str
    label: Label = Label.UNLABELED


@dataclass(frozen=True)
class Conversation:
    id: str
    parent: ParentTweet
    account: AccountProfile
    replies: tuple[Reply, ...]

    def __post_init__(self) -> None:
        if not self.replies:
            raise SchemaError(f"conversation {self.id} has no replies")
        seen = set()
        for r in self.replies:
            if r.id in seen:
                raise SchemaError(f"duplicate reply id {r.id} in conversation {self.id}")
            seen.add(r.id)

    @property
    def y(self) -> int:
        """Abusive reply volume: the regression target."""
        return sum(1 for r in self.replies if r.label is Label.ABUSIVE)


@dataclass(frozen=True)
class Corpus:
    """Equality compares conversations only; provenance and seed are
    bookkeeping and do not survive a save/load round trip."""

    conversations: tuple[Conversation, ...]
    provenance: Provenance = field(default=Provenance.INGESTED, compare=False)
    seed: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        seen = set()
        for c in self.conversations:
            if c.id in seen:
                raise SchemaError(f"duplicate conversation id {c.id}")
            seen.add(c.id)

    def __len__(self) -> int:
        return len(self.conversations)


@dataclass(frozen=True)
class IngestReport:
    n_conversations: int
    n_replies: int
    dropped_deep_replies: int
    defaulted_fields: int
    warnings: tuple[str, ...]


def abuse_volume(conversation: Conversation) -> int:
    return conversation.y


_ACCOUNT_FIELDS = {f.name: f for f in fields(AccountProfile)}

_PARENT_OPTIONAL = {
    "hashtag_count": 0,
    "symbol_count": 0,
    "mention_count": 0,
    "url_count": 0,
    "is_quote_status": False,
    "possibly_sensitive": False,
    "num_retweets": None,
    "num_favorites": None,
}


def _parse_account(obj: dict, where: str, notes: list[str]) -> tuple[AccountProfile, int]:
    kwargs = {}
    defaulted = 0
    for name, spec_field in _ACCOUNT_FIELDS.items():
        if name in obj:
            kwargs[name] = obj[name]
        else:
            defaulted += 1
    if defaulted:
        notes.append(f"{where}: {defaulted} account field(s) defaulted")
    try:
        return AccountProfile(**kwargs), defaulted
    except TypeError as exc:
        raise SchemaError(f"{where}: bad account object: {exc}") from None


def _parse_conversation(obj: dict, lineno: int, notes: list[str]) -> tuple[Conversation, int, int]:
    where = f"line {lineno}"
    for key in ("id", "parent", "account", "replies"):
        if key not in obj:
            raise SchemaError(f"{where}: missing '{key}'")
    pobj = obj["parent"]
    if not isinstance(pobj, dict) or "id" not in pobj or "text" not in pobj:
        raise SchemaError(f"{where}: parent needs 'id' and 'text'")
    pkw = {"id": str(pobj["id"]), "text": str(pobj["text"])}
    defaulted = 0
    # absent counts default to zero; absent engagement fields stay
    # None, which downstream reads as a pre-post record
    for name in _PARENT_OPTIONAL:
        if name in pobj:
            pkw[name] = pobj[name]
    parent = ParentTweet(**pkw)

    account, acc_defaulted = _parse_account(obj["account"], where, notes)
    defaulted += acc_defaulted

    replies = []
    dropped = 0
    if not isinstance(obj["replies"], list) or not obj["replies"]:
        raise SchemaError(f"{where}: replies must be a non-empty list")
    for robj in obj["replies"]:
        if "id" not in robj or "text" not in robj:
            raise SchemaError(f"{where}: reply needs 'id' and 'text'")
        nested = robj.get("replies")
        if isinstance(nested, list):
            dropped += len(nested)
        label = Label.UNLABELED
        if "label" in robj and robj["label"] is not None:
            try:
                label = Label(robj["label"])
            except ValueError:
                raise SchemaError(f"{where}: unknown label {robj['label']!r}") from None
        replies.append(Reply(id=str(robj["id"]), text=str(robj["text"]), label=label))
    conv = Conversation(
        id=str(obj["id"]), parent=parent, account=account, replies=tuple(replies)
    )
    return conv, dropped, defaulted


def _read_jsonl_objects(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise SchemaError(f"line {lineno}: expected an object")
            yield lineno, obj


_CSV_BOOLS = {"true": True, "1": True, "false": False, "0": False}

_PARENT_CSV_INT = ("hashtag_count", "symbol_count", "mention_count", "url_count",
                   "num_retweets", "num_favorites")
_PARENT_CSV_BOOL = ("is_quote_status", "possibly_sensitive")


def _csv_cell(row: dict, key: str) -> str | None:
    value = (row.get(key) or "").strip()
    return value or None


def _csv_int(row: dict, key: str, lineno: int):
    cell = _csv_cell(row, key)
    if cell is None:
        return None
    try:
        return int(cell)
    except ValueError:
        raise SchemaError(f"line {lineno}: column {key!r} is not an integer") from None


def _csv_bool(row: dict, key: str, lineno: int):
    cell = _csv_cell(row, key)
    if cell is None:
        return None
    try:
        return _CSV_BOOLS[cell.lower()]
    except KeyError:
        raise SchemaError(f"line {lineno}: column {key!r} is not a boolean") from None


def _read_csv_objects(path: Path):
    """Re-nest flattened reply rows; consecutive rows with one id merge."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "id" not in reader.fieldnames:
            raise SchemaError("line 1: CSV needs a header with an 'id' column")
        current: dict | None = None
        start_line = 0
        for lineno, row in enumerate(reader, start=2):
            cid = _csv_cell(row, "id")
            if cid is None:
                raise SchemaError(f"line {lineno}: missing 'id'")
            if current is None or cid != current["id"]:
                if current is not None:
                    yield start_line, current
                parent: dict = {"id": _csv_cell(row, "parent_id"),
                                "text": row.get("parent_text", "")}
                for key in _PARENT_CSV_INT:
                    value = _csv_int(row, key, lineno)
                    if value is not None:
                        parent[key] = value
                for key in _PARENT_CSV_BOOL:
                    value = _csv_bool(row, key, lineno)
                    if value is not None:
                        parent[key] = value
                if parent["id"] is None:
                    parent.pop("id")
                account: dict = {}
                for name, spec_field in _ACCOUNT_FIELDS.items():
                    if spec_field.type in ("int", int):
                        value = _csv_int(row, name, lineno)
                    elif name == "time_zone":
                        value = _csv_cell(row, name)
                    else:
                        value = _csv_bool(row, name, lineno)
                    if value is not None:
                        account[name] = value
                current = {"id": cid, "parent": parent, "account": account,
                           "replies": []}
                start_line = lineno
            reply: dict = {"id": _csv_cell(row, "reply_id"),
                           "text": row.get("reply_text", "")}
            label = _csv_cell(row, "reply_label")
            if label is not None:
                reply["label"] = label
            if reply["id"] is None:
                raise SchemaError(f"line {lineno}: missing 'reply_id'")
            current["replies"].append(reply)
        if current is not None:
            yield start_line, current


def read_corpus(path: str | Path, format: str = "jsonl") -> tuple[Corpus, IngestReport]:
    """Read a corpus file and report what ingestion had to fix."""
    if format not in ("jsonl", "csv"):
        raise SchemaError(f"unknown corpus format {format!r}")
    reader = _read_jsonl_objects if format == "jsonl" else _read_csv_objects
    conversations = []
    notes: list[str] = []
    dropped = 0
    defaulted = 0
    n_replies = 0
    for lineno, obj in reader(Path(path)):
        conv, conv_dropped, conv_defaulted = _parse_conversation(obj, lineno, notes)
        conversations.append(conv)
        dropped += conv_dropped
        defaulted += conv_defaulted
        n_replies += len(conv.replies)
    corpus = Corpus(conversations=tuple(conversations), provenance=Provenance.INGESTED)
    report = IngestReport(
        n_conversations=len(conversations),
        n_replies=n_replies,
        dropped_deep_replies=dropped,
        defaulted_fields=defaulted,
        warnings=tuple(notes),
    )
    return corpus, report


def load_corpus(path: str | Path, format: str = "jsonl") -> Corpus:
    corpus, _ = read_corpus(path, format)
    return corpus


def _parent_to_obj(p: ParentTweet) -> dict:
    obj = {
        "id": p.id,
        "text": p.text,
        "hashtag_count": p.hashtag_count,
        "symbol_count": p.symbol_count,
        "mention_count": p.mention_count,
        "url_count": p.url_count,
        "is_quote_status": p.is_quote_status,
        "possibly_sensitive": p.possibly_sensitive,
    }
    if p.num_retweets is not None:
        obj["num_retweets"] = p.num_retweets
    if p.num_favorites is not None:
        obj["num_favorites"] = p.num_favorites
    return obj


def _account_to_obj(a: AccountProfile) -> dict:
    obj = {name: getattr(a, name) for name in _ACCOUNT_FIELDS}
    if obj["time_zone"] is None:
        del obj["time_zone"]
    return obj


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write JSONL, one conversation per line, deterministic bytes."""
    with open(path, "w", encoding="utf-8") as fh:
        for conv in corpus.conversations:
            robjs = []
            for r in conv.replies:
                robj = {"id": r.id, "text": r.text}
                if r.label is not Label.UNLABELED:
                    robj["label"] = r.label.value
                robjs.append(robj)
            obj = {
                "id": conv.id,
                "parent": _parent_to_obj(conv.parent),
                "account": _account_to_obj(conv.account),
                "replies": robjs,
            }
            fh.write(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")


def relabel(conversation: Conversation, labels: list[Label]) -> Conversation:
    """Copy of the conversation with replies relabeled positionally."""
    if len(labels) != len(conversation.replies):
        raise SchemaError("label count does not match reply count")
    new_replies = tuple(
        replace(r, label=lab) for r, lab in zip(conversation.replies, labels)
    )
    return replace(conversation, replies=new_replies)
