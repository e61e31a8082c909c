"""Lexicon loading, phrase matching and threshold labeling.

Lexicon entries are preprocessed with the same pipeline as the text
they match against, so matching happens entirely in stemmed space.
The label rule compares hits/token_count to the threshold as exact
rationals: a reply sitting exactly on the threshold is flagged for
manual review instead of being called either way.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from importlib import resources
from pathlib import Path

from .corpus import Conversation, Corpus, Label, relabel
from .errors import EmptyLexiconError, EmptyTextError
from .textprep import StopwordSet, TokenStream, preprocess

MAX_ENTRY_TOKENS = 3
DEFAULT_THRESHOLD = 0.1


@dataclass(frozen=True)
class Lexicon:
    """Named set of stemmed entries, each 1..3 tokens long."""

    name: str
    entries: tuple[tuple[str, ...], ...]
    source_digest: str

    def __post_init__(self) -> None:
        if not self.entries:
            raise EmptyLexiconError(f"lexicon {self.name!r} has no usable entries")

    def __len__(self) -> int:
        return len(self.entries)

    @cached_property
    def entry_set(self) -> frozenset[tuple[str, ...]]:
        return frozenset(self.entries)


def _parse_lexicon_text(text: str, name: str, stopwords: StopwordSet | None) -> Lexicon:
    entries: list[tuple[str, ...]] = []
    seen: set[tuple[str, ...]] = set()
    for line in text.splitlines():
        raw = line.split("#", 1)[0].strip()
        if not raw:
            continue
        stream = preprocess(raw, stopwords)
        toks = stream.tokens
        # entries that stem to nothing, or to more tokens than the
        # matcher scans, are unusable and silently skipped
        if not toks or len(toks) > MAX_ENTRY_TOKENS:
            continue
        if toks not in seen:
            seen.add(toks)
            entries.append(toks)
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return Lexicon(name=name, entries=tuple(entries), source_digest=digest)


def load_lexicon(path: str | Path, name: str | None = None,
                 stopwords: StopwordSet | None = None) -> Lexicon:
    """Load one entry per line ('#' comments), preprocessed and deduped."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return _parse_lexicon_text(text, name or path.stem, stopwords)


@dataclass(frozen=True)
class LexiconRegistry:
    abusive: Lexicon
    hate: Lexicon
    positive: Lexicon
    negative: Lexicon

    @cached_property
    def abuse_union(self) -> Lexicon:
        """Union of abusive and hate entries, used for scoring."""
        merged = sorted(set(self.abusive.entries) | set(self.hate.entries))
        digest = hashlib.sha256(
            (self.abusive.source_digest + self.hate.source_digest).encode()
        ).hexdigest()
        return Lexicon(name="abuse_union", entries=tuple(merged), source_digest=digest)

    def digest(self) -> str:
        parts = [self.abusive.source_digest, self.hate.source_digest,
                 self.positive.source_digest, self.negative.source_digest]
        return hashlib.sha256("".join(parts).encode()).hexdigest()


def load_registry(manifest_path: str | Path,
                  stopwords: StopwordSet | None = None) -> LexiconRegistry:
    """Manifest JSON maps role -> lexicon file, relative to the manifest."""
    manifest_path = Path(manifest_path)
    mapping = json.loads(manifest_path.read_text(encoding="utf-8"))
    kwargs = {}
    for role in ("abusive", "hate", "positive", "negative"):
        if role not in mapping:
            raise EmptyLexiconError(f"lexicon manifest missing role {role!r}")
        kwargs[role] = load_lexicon(manifest_path.parent / mapping[role], role, stopwords)
    return LexiconRegistry(**kwargs)


def built_in_registry() -> LexiconRegistry:
    base = resources.files("abuse_forecast.data").joinpath("lexicons")
    kwargs = {}
    for role in ("abusive", "hate", "positive", "negative"):
        text = base.joinpath(f"{role}.txt").read_text(encoding="utf-8")
        kwargs[role] = _parse_lexicon_text(text, role, None)
    return LexiconRegistry(**kwargs)


def count_hits(stream: TokenStream, lexicon: Lexicon) -> int:
    """Longest-match, non-overlapping scan with a window of 3 tokens.

    At each position the trigram is tried first, then the bigram, then
    the single token; a hit consumes its tokens.
    """
    toks = stream.tokens
    entry_set = lexicon.entry_set
    hits = 0
    i = 0
    n = len(toks)
    while i < n:
        matched = 0
        for width in (3, 2, 1):
            if i + width <= n and toks[i : i + width] in entry_set:
                matched = width
                break
        if matched:
            hits += 1
            i += matched
        else:
            i += 1
    return hits


@dataclass(frozen=True)
class AbuseScore:
    hits: int
    token_count: int

    @property
    def value(self) -> float:
        return self.hits / self.token_count


def abuse_score(stream: TokenStream, registry: LexiconRegistry) -> AbuseScore:
    """Fraction of the preprocessed stream consumed by abuse terms."""
    if len(stream) == 0:
        raise EmptyTextError("cannot score an empty token stream")
    return AbuseScore(hits=count_hits(stream, registry.abuse_union),
                      token_count=len(stream))


def classify(score: AbuseScore, threshold: float | str | Fraction = DEFAULT_THRESHOLD) -> Label:
    """Compare against the threshold as exact rationals.

    The cutoff is parsed from its decimal spelling (0.1 means 1/10, not
    the nearest binary double), so a ten-token reply with one hit sits
    exactly on the boundary and comes back FLAG_MANUAL.
    """
    cutoff = threshold if isinstance(threshold, Fraction) else Fraction(str(threshold))
    ratio = Fraction(score.hits, score.token_count)
    if ratio > cutoff:
        return Label.ABUSIVE
    if ratio == cutoff:
        return Label.FLAG_MANUAL
    return Label.NEUTRAL


def label_corpus(corpus: Corpus, registry: LexiconRegistry,
                 threshold: float | str | Fraction = DEFAULT_THRESHOLD,
                 stopwords: StopwordSet | None = None) -> Corpus:
    """Label every reply by its abuse score.

    Replies whose text preprocesses to nothing carry no signal and are
    labeled NEUTRAL.  Idempotent: labels depend only on reply text.
    """
    relabeled: list[Conversation] = []
    for conv in corpus.conversations:
        labels = []
        for r in conv.replies:
            stream = preprocess(r.text, stopwords)
            if len(stream) == 0:
                labels.append(Label.NEUTRAL)
            else:
                labels.append(classify(abuse_score(stream, registry), threshold))
        relabeled.append(relabel(conv, labels))
    return Corpus(conversations=tuple(relabeled), provenance=corpus.provenance,
                  seed=corpus.seed)
