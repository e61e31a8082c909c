"""Text normalisation pipeline: strip, tokenize, de-stopword, stem.

The four stages always run in that order.  Stripping happens on raw
text, so counts that need the original surface form (punctuation,
capitalised words, ...) must be taken before calling into this module.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from importlib import resources

from .porter import porter_stem

# Platform noise tokens that survive character stripping: mojibake
# fragments (ct/us/ud/ua/ut/uc/ue/uk), entity remnants (amp), template
# words (name/user) and contraction shards (re/im/it).
CUSTOM_STOPWORDS = frozenset(
    [
        "is", "at", "the", "re", "name", "user", "ct", "us", "ud",
        "ua", "ut", "amp", "uc", "ue", "uk", "it", "im",
    ]
)

_NON_LETTER = re.compile(r"[^A-Za-z\s]+")


@dataclass(frozen=True)
class TokenStream:
    """Ordered tokens plus the character count of the source text."""

    tokens: tuple[str, ...]
    source_char_count: int

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class StopwordSet:
    words: frozenset[str]

    def __contains__(self, token: str) -> bool:
        return token in self.words


def _read_stopword_lines(lines) -> set[str]:
    words: set[str] = set()
    for line in lines:
        token = line.split("#", 1)[0].strip().lower()
        if token:
            words.add(token)
    return words


def load_stopwords(path=None) -> StopwordSet:
    """Load a stopword file (one token per line, '#' comments).

    With no path, the bundled English list is used.  The hand-picked
    platform noise list is unioned in either way.
    """
    if path is None:
        text = (
            resources.files("abuse_forecast.data")
            .joinpath("stopwords.txt")
            .read_text(encoding="utf-8")
        )
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return StopwordSet(words=frozenset(_read_stopword_lines(text.splitlines()) | CUSTOM_STOPWORDS))


DEFAULT_STOPWORDS = load_stopwords()


def strip_special(text: str) -> str:
    """Remove non-ASCII, punctuation, digits and single-letter words.

    Disallowed characters become spaces (so "@you" -> "you" and
    "we're" -> "we re"), runs of whitespace collapse, and the result is
    trimmed.  Idempotent: a stripped text passes through unchanged.
    """
    ascii_only = text.encode("ascii", "ignore").decode("ascii")
    lettered = _NON_LETTER.sub(" ", ascii_only)
    return " ".join(w for w in lettered.split() if len(w) > 1)


def tokenize(text: str, source_char_count: int | None = None) -> TokenStream:
    """Lowercase and split on whitespace."""
    count = len(text) if source_char_count is None else source_char_count
    return TokenStream(tokens=tuple(text.lower().split()), source_char_count=count)


def remove_stopwords(stream: TokenStream, stopwords: StopwordSet) -> TokenStream:
    kept = tuple(t for t in stream.tokens if t not in stopwords)
    return replace(stream, tokens=kept)


def stem(stream: TokenStream) -> TokenStream:
    return replace(stream, tokens=tuple(porter_stem(t) for t in stream.tokens))


def preprocess(text: str, stopwords: StopwordSet | None = None) -> TokenStream:
    """strip_special -> tokenize -> remove_stopwords -> stem.

    source_char_count on the result is the length of the raw input.
    """
    sw = DEFAULT_STOPWORDS if stopwords is None else stopwords
    stripped = strip_special(text)
    stream = tokenize(stripped, source_char_count=len(text))
    return stem(remove_stopwords(stream, sw))
