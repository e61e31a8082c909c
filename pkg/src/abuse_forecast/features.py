"""Feature extraction: four families behind one fixed-order schema.

Families:
  Te  parent text (bag-of-words + sentiment + entity/POS counts)
  Mt  meta-text counts taken from the raw surface form
  Tw  tweet-level fields plus abuse/hate lexicon counts
  Ac  posting account profile

Every column carries an availability stage.  PrePost keeps only what
exists while a draft is being written; PostHoc adds reply-derived
aggregates and engagement counts.  PrePost columns are a strict subset
of PostHoc columns for any mask.
"""
from __future__ import annotations

import re
import string
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, lru_cache

import numpy as np

from .corpus import AccountProfile, Conversation, ParentTweet
from .errors import EmptyCorpusError, InsufficientDataError, MissingVocabError, WidthMismatchError
from .lexicons import LexiconRegistry, count_hits
from .textprep import DEFAULT_STOPWORDS, StopwordSet, TokenStream, preprocess


class Stage(str, Enum):
    PRE_POST = "prepost"
    POST_HOC = "posthoc"


class Family(str, Enum):
    TE = "te"
    MT = "mt"
    TW = "tw"
    AC = "ac"


@dataclass(frozen=True)
class FeatureMask:
    te: bool = False
    mt: bool = False
    tw: bool = False
    ac: bool = False

    def __post_init__(self) -> None:
        if not (self.te or self.mt or self.tw or self.ac):
            raise ValueError("mask must select at least one family")

    def families(self) -> tuple[Family, ...]:
        out = []
        for fam, on in ((Family.TE, self.te), (Family.MT, self.mt),
                        (Family.TW, self.tw), (Family.AC, self.ac)):
            if on:
                out.append(fam)
        return tuple(out)

    def to_string(self) -> str:
        return ",".join(f.value for f in self.families())

    @classmethod
    def from_string(cls, text: str) -> "FeatureMask":
        parts = [p.strip().lower() for p in text.split(",") if p.strip()]
        valid = {f.value for f in Family}
        bad = [p for p in parts if p not in valid]
        if bad:
            raise ValueError(f"unknown feature families: {bad}")
        return cls(**{p: True for p in parts})


# Table order: singles, pairs, triples, then all four.
TABLE_MASKS: tuple[FeatureMask, ...] = (
    FeatureMask(te=True),
    FeatureMask(mt=True),
    FeatureMask(tw=True),
    FeatureMask(ac=True),
    FeatureMask(te=True, mt=True),
    FeatureMask(te=True, tw=True),
    FeatureMask(te=True, ac=True),
    FeatureMask(mt=True, tw=True),
    FeatureMask(mt=True, ac=True),
    FeatureMask(tw=True, ac=True),
    FeatureMask(te=True, mt=True, tw=True),
    FeatureMask(te=True, mt=True, ac=True),
    FeatureMask(te=True, tw=True, ac=True),
    FeatureMask(mt=True, tw=True, ac=True),
    FeatureMask(te=True, mt=True, tw=True, ac=True),
)


@dataclass(frozen=True)
class FeatureColumn:
    name: str
    family: Family
    availability: Stage  # PRE_POST means available in both stages


_TE_COLUMNS = (
    FeatureColumn("Parent_Negative Sentiment Score", Family.TE, Stage.PRE_POST),
    FeatureColumn("Parent_Positive Sentiment Score", Family.TE, Stage.PRE_POST),
    FeatureColumn("Parent_Neutral Sentiment Score", Family.TE, Stage.PRE_POST),
    FeatureColumn("ParentNamed Entity Count", Family.TE, Stage.PRE_POST),
    FeatureColumn("Parent JJ - Adjective", Family.TE, Stage.PRE_POST),
    FeatureColumn("Parent NNP - Proper Noun, Singular", Family.TE, Stage.PRE_POST),
    FeatureColumn("Parent NN - Noun, Singular", Family.TE, Stage.PRE_POST),
    FeatureColumn("DirectReply_Negative Sentiment Score", Family.TE, Stage.POST_HOC),
    FeatureColumn("DirectReply_Positive Sentiment Score", Family.TE, Stage.POST_HOC),
    FeatureColumn("DirectReply_Neutral Sentiment Score", Family.TE, Stage.POST_HOC),
    FeatureColumn("DirectReply_Named Entity Count", Family.TE, Stage.POST_HOC),
)

_MT_NAMES = (
    "length_parent_tweet",
    "Parent_Word Count",
    "Parent_Character Count",
    "Parent_Sentence Count",
    "Parent_Average Word Length",
    "Parent_Stopword Count",
    "Parent_Hashtag Count",
    "Parent_Mention Count",
    "Parent_URL Count",
    "Parent_Capitalized Word Count",
    "Parent_Punctuation Count",
    "Parent_Average Sentence Length",
)

_MT_REPLY_NAMES = (
    "length_direct_reply",
    "DirectReply_Word Count",
    "DirectReply_Character Count",
    "DirectReply_Sentence Count",
    "DirectReply_Average Word Length",
    "DirectReply_Stopword Count",
    "DirectReply_Hashtag Count",
    "DirectReply_Mention Count",
    "DirectReply_URL Count",
    "DirectReply_Capitalized Word Count",
    "DirectReply_Punctuation Count",
    "DirectReply_Average Sentence Length",
)

_MT_COLUMNS = tuple(
    [FeatureColumn(n, Family.MT, Stage.PRE_POST) for n in _MT_NAMES]
    + [FeatureColumn(n, Family.MT, Stage.POST_HOC) for n in _MT_REPLY_NAMES]
)

_TW_COLUMNS = (
    FeatureColumn("Parent tweet hashtags", Family.TW, Stage.PRE_POST),
    FeatureColumn("Parent tweet symbols", Family.TW, Stage.PRE_POST),
    FeatureColumn("Parent tweet user mentions", Family.TW, Stage.PRE_POST),
    FeatureColumn("Parent tweet URLs", Family.TW, Stage.PRE_POST),
    FeatureColumn("Parent quote status", Family.TW, Stage.PRE_POST),
    FeatureColumn("Parent possibly sensitive", Family.TW, Stage.PRE_POST),
    FeatureColumn("Parent tweet abusive word count", Family.TW, Stage.PRE_POST),
    FeatureColumn("Parent tweet hate word count", Family.TW, Stage.PRE_POST),
    FeatureColumn("Parent tweet num retweets", Family.TW, Stage.POST_HOC),
    FeatureColumn("Parent tweet num favorites", Family.TW, Stage.POST_HOC),
)

_AC_COLUMNS = tuple(
    FeatureColumn(n, Family.AC, Stage.PRE_POST)
    for n in (
        "friends_count", "followers_count", "listed_count", "favourites_count",
        "time_zone", "geo_enabled", "verified", "statuses_count",
        "contributors_enabled", "is_translator", "is_translation_enabled",
        "has_extended_profile", "default_profile", "default_profile_image",
        "following", "follow_request_sent", "notifications",
    )
)

_FAMILY_COLUMNS = {
    Family.TE: _TE_COLUMNS,
    Family.MT: _MT_COLUMNS,
    Family.TW: _TW_COLUMNS,
    Family.AC: _AC_COLUMNS,
}


def schema(mask: FeatureMask, stage: Stage) -> tuple[FeatureColumn, ...]:
    """Dense columns for a mask and stage, in assembly order."""
    out: list[FeatureColumn] = []
    for fam in mask.families():
        for col in _FAMILY_COLUMNS[fam]:
            if stage is Stage.POST_HOC or col.availability is Stage.PRE_POST:
                out.append(col)
    return tuple(out)


# ---------------------------------------------------------------------------
# bag of words

@dataclass(frozen=True)
class BoWVocabulary:
    terms: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.terms)

    @cached_property
    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.terms)}


def fit_bow(train_streams: list[TokenStream], cap: int = 5000) -> BoWVocabulary:
    """Keep the `cap` most frequent terms; ties break lexicographically."""
    counts: dict[str, int] = {}
    any_tokens = False
    for ts in train_streams:
        for tok in ts.tokens:
            any_tokens = True
            counts[tok] = counts.get(tok, 0) + 1
    if not any_tokens:
        raise EmptyCorpusError("cannot fit a vocabulary on empty streams")
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return BoWVocabulary(terms=tuple(t for t, _ in ordered[:cap]))


def bow_vector(ts: TokenStream, vocab: BoWVocabulary) -> dict[int, int]:
    """Sparse in-vocabulary counts; unknown tokens are ignored."""
    index = vocab.index
    out: dict[int, int] = {}
    for tok in ts.tokens:
        i = index.get(tok)
        if i is not None:
            out[i] = out.get(i, 0) + 1
    return out


# ---------------------------------------------------------------------------
# sentiment and POS-ish counts

def sentiment_scores(ts: TokenStream, registry: LexiconRegistry) -> tuple[float, float, float]:
    """(negative, positive, neutral) lexicon-hit ratios; sums stay <= 1
    via the neutral floor."""
    denom = max(1, len(ts))
    neg = count_hits(ts, registry.negative) / denom
    pos = count_hits(ts, registry.positive) / denom
    return (neg, pos, max(0.0, 1.0 - neg - pos))


# Small closed adjective list backing the heuristic tagger; suffix rules
# catch the derived forms.
_ADJ_WORDS = frozenset(
    """
    quick slow good bad big small bright dark happy sad angry calm quiet loud
    strong weak fast new old young hot cold brown red blue green black white
    grey tall short long wide deep shallow clean dirty rich poor early late
    easy hard soft rough smooth sharp blunt warm cool fresh stale
    """.split()
)
_ADJ_SUFFIXES = ("ous", "ful", "ive", "able", "ible", "less", "ish")

_SENT_SPLIT = re.compile(r"[.!?]+")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def _surface_tokens(raw_text: str) -> list[tuple[str, bool]]:
    """(token, sentence_initial) pairs with edge punctuation stripped."""
    out: list[tuple[str, bool]] = []
    for segment in _SENT_SPLIT.split(raw_text):
        first = True
        for w in segment.split():
            core = w.strip(string.punctuation)
            if core:
                out.append((core, first))
                first = False
    return out


class HeuristicTagger:
    """Deterministic suffix/list tagger.

    Capitalized tokens away from a sentence start are proper nouns;
    adjectives come from a closed list plus suffix rules; -ing/-ed
    forms count as verbs; remaining alphabetic content words are nouns.
    """

    name = "heuristic-v1"

    def tag(self, raw_text: str) -> list[tuple[str, str]]:
        tagged: list[tuple[str, str]] = []
        for core, first in _surface_tokens(raw_text):
            if not core.replace("-", "").isalpha():
                tagged.append((core, "SYM"))
                continue
            if core[0].isupper() and not first:
                tagged.append((core, "NNP"))
                continue
            low = core.lower()
            if low in DEFAULT_STOPWORDS:
                tagged.append((core, "IN"))
            elif low in _ADJ_WORDS or low.endswith(_ADJ_SUFFIXES):
                tagged.append((core, "JJ"))
            elif len(low) > 4 and low.endswith(("ing", "ed")):
                tagged.append((core, "VB"))
            else:
                tagged.append((core, "NN"))
        return tagged


_DEFAULT_TAGGER = HeuristicTagger()


def aux_text_features(raw_text: str, tagger=None) -> tuple[int, int, int, int]:
    """(named_entity_count, jj, nnp, nn).

    Named entities are maximal runs of NNP tokens, which by the tagger
    definition never start at a sentence boundary.
    """
    tagger = tagger or _DEFAULT_TAGGER
    tags = [t for _, t in tagger.tag(raw_text)]
    entities = 0
    prev_nnp = False
    for t in tags:
        if t == "NNP" and not prev_nnp:
            entities += 1
        prev_nnp = t == "NNP"
    return (
        entities,
        sum(1 for t in tags if t == "JJ"),
        sum(1 for t in tags if t == "NNP"),
        sum(1 for t in tags if t == "NN"),
    )


# ---------------------------------------------------------------------------
# meta-text counts

def meta_text_features(raw_text: str, stopwords: StopwordSet | None = None) -> tuple[float, ...]:
    """Twelve surface counts in schema order.

    All counts come from the raw text: punctuation, capitalisation and
    prefixes are gone after stripping, so this runs before textprep.
    """
    sw = stopwords or DEFAULT_STOPWORDS
    words = raw_text.split()
    n_words = len(words)
    sentences = [s for s in _SENT_SPLIT.split(raw_text) if s.strip()]
    n_sentences = len(sentences) if sentences else (1 if raw_text.strip() else 0)
    char_count = sum(1 for ch in raw_text if not ch.isspace())
    avg_word_len = (sum(len(w) for w in words) / n_words) if n_words else 0.0
    stop_count = sum(1 for w in words if w.translate(_PUNCT_TABLE).lower() in sw)
    hashtag = sum(1 for w in words if w.startswith("#") and len(w) > 1)
    mention = sum(1 for w in words if w.startswith("@") and len(w) > 1)
    url = sum(1 for w in words if w.startswith(("http://", "https://", "www.")))
    caps = sum(1 for w in words if (c := w.strip(string.punctuation)) and c[0].isupper())
    punct = sum(1 for ch in raw_text if ch in string.punctuation)
    avg_sentence_len = (n_words / n_sentences) if n_sentences else 0.0
    return (
        float(len(raw_text)), float(n_words), float(char_count), float(n_sentences),
        float(avg_word_len), float(stop_count), float(hashtag), float(mention),
        float(url), float(caps), float(punct), float(avg_sentence_len),
    )


# ---------------------------------------------------------------------------
# tweet and account blocks

def tweet_features(p: ParentTweet, stage: Stage, registry: LexiconRegistry,
                   stopwords: StopwordSet | None = None) -> tuple[float, ...]:
    """Stored tweet fields plus abuse/hate lexicon counts on the text."""
    stream = _pp(p.text, stopwords)
    base = (
        float(p.hashtag_count), float(p.symbol_count), float(p.mention_count),
        float(p.url_count), float(p.is_quote_status), float(p.possibly_sensitive),
        float(count_hits(stream, registry.abusive)),
        float(count_hits(stream, registry.hate)),
    )
    if stage is Stage.POST_HOC:
        base = base + (float(p.num_retweets or 0), float(p.num_favorites or 0))
    return base


def account_features(a: AccountProfile) -> tuple[float, ...]:
    return (
        float(a.friends_count), float(a.followers_count), float(a.listed_count),
        float(a.favourites_count), float(a.time_zone is not None),
        float(a.geo_enabled), float(a.verified), float(a.statuses_count),
        float(a.contributors_enabled), float(a.is_translator),
        float(a.is_translation_enabled), float(a.has_extended_profile),
        float(a.default_profile), float(a.default_profile_image),
        float(a.following), float(a.follow_request_sent), float(a.notifications),
    )


# ---------------------------------------------------------------------------
# assembly

@lru_cache(maxsize=1 << 17)
def _pp_default(text: str) -> TokenStream:
    return preprocess(text)


def _pp(text: str, stopwords: StopwordSet | None) -> TokenStream:
    if stopwords is None:
        return _pp_default(text)
    return preprocess(text, stopwords)


@dataclass(frozen=True)
class FeatureVector:
    """Dense schema block plus a sparse bag-of-words tail."""

    dense: np.ndarray
    bow: dict[int, int] | None = None

    @property
    def width(self) -> int:
        return int(self.dense.shape[0])


def _reply_mean(values: list[tuple[float, ...]], width: int) -> tuple[float, ...]:
    if not values:
        return (0.0,) * width
    arr = np.asarray(values, dtype=float)
    return tuple(arr.mean(axis=0))


def te_dense_block(c: Conversation, stage: Stage, registry: LexiconRegistry,
                   stopwords: StopwordSet | None = None, tagger=None) -> tuple[float, ...]:
    neg, pos, neu = sentiment_scores(_pp(c.parent.text, stopwords), registry)
    ne, jj, nnp, nn = aux_text_features(c.parent.text, tagger)
    block = (neg, pos, neu, float(ne), float(jj), float(nnp), float(nn))
    if stage is Stage.POST_HOC:
        per_reply = []
        for r in c.replies:
            rneg, rpos, rneu = sentiment_scores(_pp(r.text, stopwords), registry)
            rne = aux_text_features(r.text, tagger)[0]
            per_reply.append((rneg, rpos, rneu, float(rne)))
        block = block + _reply_mean(per_reply, 4)
    return block


def mt_block(c: Conversation, stage: Stage,
             stopwords: StopwordSet | None = None) -> tuple[float, ...]:
    block = meta_text_features(c.parent.text, stopwords)
    if stage is Stage.POST_HOC:
        per_reply = [meta_text_features(r.text, stopwords) for r in c.replies]
        block = block + _reply_mean(per_reply, 12)
    return block


def tw_block(c: Conversation, stage: Stage, registry: LexiconRegistry,
             stopwords: StopwordSet | None = None) -> tuple[float, ...]:
    return tweet_features(c.parent, stage, registry, stopwords)


def ac_block(c: Conversation) -> tuple[float, ...]:
    return account_features(c.account)


def assemble(c: Conversation, mask: FeatureMask, stage: Stage,
             vocab: BoWVocabulary | None, registry: LexiconRegistry,
             stopwords: StopwordSet | None = None, tagger=None) -> FeatureVector:
    """Concatenate the selected family blocks in Te, Mt, Tw, Ac order."""
    if mask.te and vocab is None:
        raise MissingVocabError("mask includes te but no vocabulary was fitted")
    parts: list[float] = []
    bow: dict[int, int] | None = None
    if mask.te:
        bow = bow_vector(_pp(c.parent.text, stopwords), vocab)
        parts.extend(te_dense_block(c, stage, registry, stopwords, tagger))
    if mask.mt:
        parts.extend(mt_block(c, stage, stopwords))
    if mask.tw:
        parts.extend(tw_block(c, stage, registry, stopwords))
    if mask.ac:
        parts.extend(ac_block(c))
    return FeatureVector(dense=np.asarray(parts, dtype=float), bow=bow)


def feature_manifest(mask: FeatureMask, stage: Stage,
                     vocab: BoWVocabulary | None) -> dict:
    """Ordered schema description embedded in artifacts and reports."""
    cols = [
        {"name": col.name, "family": col.family.value,
         "availability": col.availability.value}
        for col in schema(mask, stage)
    ]
    return {
        "mask": mask.to_string(),
        "stage": stage.value,
        "columns": cols,
        "bow_terms": list(vocab.terms) if (mask.te and vocab is not None) else [],
    }


# ---------------------------------------------------------------------------
# scaling

@dataclass(frozen=True)
class ScalerState:
    mean: np.ndarray
    std: np.ndarray  # population std; 0 marks a constant column


def fit_scaler(train_vectors: list[FeatureVector]) -> ScalerState:
    if len(train_vectors) < 2:
        raise InsufficientDataError("scaler needs at least 2 training vectors")
    widths = {v.width for v in train_vectors}
    if len(widths) != 1:
        raise WidthMismatchError(f"mixed dense widths: {sorted(widths)}")
    X = np.stack([v.dense for v in train_vectors])
    return fit_scaler_matrix(X)


def fit_scaler_matrix(X: np.ndarray) -> ScalerState:
    if X.shape[0] < 2:
        raise InsufficientDataError("scaler needs at least 2 training rows")
    mean = X.mean(axis=0)
    std = X.std(axis=0)  # population std, ddof=0
    return ScalerState(mean=mean, std=std)


def apply_scaler(v: FeatureVector, s: ScalerState) -> FeatureVector:
    if v.width != s.mean.shape[0]:
        raise WidthMismatchError(
            f"vector width {v.width} != scaler width {s.mean.shape[0]}")
    return FeatureVector(dense=apply_scaler_matrix(v.dense[None, :], s)[0], bow=v.bow)


def apply_scaler_matrix(X: np.ndarray, s: ScalerState) -> np.ndarray:
    safe = np.where(s.std > 0, s.std, 1.0)
    out = (X - s.mean) / safe
    return np.where(s.std > 0, out, 0.0)


def to_matrix(vectors: list[FeatureVector], vocab_size: int = 0) -> np.ndarray:
    """Stack dense blocks, appending dense BoW columns when present."""
    if not vectors:
        raise EmptyCorpusError("no vectors to stack")
    dense = np.stack([v.dense for v in vectors])
    if vocab_size == 0 or vectors[0].bow is None:
        return dense
    bow = np.zeros((len(vectors), vocab_size))
    for i, v in enumerate(vectors):
        for j, count in (v.bow or {}).items():
            bow[i, j] = count
    return np.hstack([dense, bow])
