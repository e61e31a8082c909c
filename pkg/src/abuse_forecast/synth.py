"""Seeded synthetic conversation generator.

Texts are template-generated (slot-filled token lists, no linguistic
realism).  Each conversation draws an abusive/neutral class flag first;
abusive conversations get provocation drivers planted in the parent
(hashtags, exclamation runs, insult terms, mentions, cashtags) and an
abuse volume that is a noisy monotone function of those drivers, so
feature families carry a recoverable signal:

  * meta-text: hashtag tokens and exclamation runs,
  * tweet-object: stored entity counts and lexicon hits,
  * account: off by default (signal_ac = 0), keeping the account family
    independent of the target.

Abusive replies embed exactly two insult unigrams among at least three
filler tokens, so their lexicon score is >= 2/12 and never exactly 0.1;
neutral replies draw from a pool whose stems avoid the abuse lexicons
entirely.  Reply labels are left Unlabeled for the labeler to fill in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import (
    AccountProfile,
    Conversation,
    Corpus,
    ParentTweet,
    Provenance,
    Reply,
)
from .errors import ConfigError


@dataclass(frozen=True)
class SynthConfig:
    n_conversations: int = 1000
    abusive_conversation_rate: float = 0.2
    # per-family contribution of the planted drivers to abuse volume
    signal_mt: float = 1.0
    signal_tw: float = 1.0
    signal_ac: float = 0.0
    noise_sd: float = 0.5
    # mean of the geometric neutral-reply tail
    neutral_reply_mean: float = 2.0

    def __post_init__(self) -> None:
        if self.n_conversations < 1:
            raise ConfigError("n_conversations must be >= 1")
        if not 0.0 <= self.abusive_conversation_rate <= 1.0:
            raise ConfigError("abusive_conversation_rate must be in [0, 1]")
        if min(self.signal_mt, self.signal_tw, self.signal_ac) < 0:
            raise ConfigError("signal weights must be nonnegative")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be nonnegative")
        if self.neutral_reply_mean <= 0:
            raise ConfigError("neutral_reply_mean must be positive")


# single-word entries of the abusive lexicon used verbatim in templates
INSULTS = ("idiot", "moron", "loser", "clown", "fool", "jerk", "dunce", "buffoon")

NEGATIVE_WORDS = ("bad", "awful", "angry", "furious", "nasty")
POSITIVE_WORDS = ("good", "great", "lovely", "wonderful", "brilliant")

# class-specific parent vocabularies, disjoint so per-class top words
# separate cleanly
ABUSIVE_PARENT_POOL = (
    "debate", "policy", "senate", "referendum", "tariff", "lawsuit",
    "election", "congress", "minister", "parliament", "budget", "pipeline",
    "merger", "stadium", "transfer", "referee", "penalty", "contract",
    "headline", "broadcast", "interview", "rally", "verdict", "regime",
)
NEUTRAL_PARENT_POOL = (
    "tomato", "basil", "sourdough", "compost", "seedling", "trellis",
    "watercolor", "quilt", "crochet", "birdsong", "maple", "acorn",
    "kayak", "campfire", "telescope", "cinnamon", "gingerbread", "teapot",
    "hammock", "terrace", "lighthouse", "driftwood", "seashell", "orchard",
)
SHARED_POOL = ("today", "morning", "weekend", "thread", "update", "story",
               "photo", "video", "moment", "note")

# reply fillers; stems must stay clear of the abusive/hate lexicons
# (pinned by a test)
REPLY_POOL = (
    "sunset", "harbor", "coffee", "garden", "recipe", "bicycle", "weather",
    "museum", "melody", "lantern", "meadow", "pottery", "sketch", "novel",
    "puzzle", "picnic", "breeze", "canyon", "valley", "window",
)

NAMES = ("Alice", "Omar", "Priya", "Chen", "Maria", "Kwame", "Lena", "Ravi")
ADJECTIVES = ("colorful", "spacious", "flexible", "reddish")
TIME_ZONES = ("UTC", "EST", "CET", "IST", "PST")


def _account(rng: np.random.Generator) -> AccountProfile:
    return AccountProfile(
        friends_count=int(rng.lognormal(5.0, 1.2)),
        followers_count=int(rng.lognormal(5.0, 1.5)),
        listed_count=int(rng.poisson(3)),
        favourites_count=int(rng.lognormal(6.0, 1.5)),
        statuses_count=int(rng.lognormal(7.0, 1.3)),
        time_zone=None if rng.random() < 0.5 else str(rng.choice(TIME_ZONES)),
        geo_enabled=bool(rng.random() < 0.3),
        verified=bool(rng.random() < 0.05),
        contributors_enabled=bool(rng.random() < 0.02),
        is_translator=bool(rng.random() < 0.03),
        is_translation_enabled=bool(rng.random() < 0.03),
        has_extended_profile=bool(rng.random() < 0.4),
        default_profile=bool(rng.random() < 0.6),
        default_profile_image=bool(rng.random() < 0.1),
        following=False,
        follow_request_sent=bool(rng.random() < 0.01),
        notifications=bool(rng.random() < 0.02),
    )


def _pick(rng: np.random.Generator, pool: tuple[str, ...], n: int) -> list[str]:
    if n <= 0:
        return []
    return [pool[i] for i in rng.integers(0, len(pool), size=n)]


def _parent_text(rng, abusive, h, m, sym, url, terms, excl, neg, pos):
    pool = ABUSIVE_PARENT_POOL if abusive else NEUTRAL_PARENT_POOL
    tokens = _pick(rng, pool, int(rng.integers(4, 8)))
    tokens += _pick(rng, SHARED_POOL, int(rng.integers(0, 3)))
    tokens += _pick(rng, NEGATIVE_WORDS, neg)
    tokens += _pick(rng, POSITIVE_WORDS, pos)
    tokens += _pick(rng, INSULTS, terms)
    tokens += _pick(rng, ADJECTIVES, int(rng.integers(0, 3)))
    if rng.random() < 0.5:
        tokens += _pick(rng, NAMES, 1)
    tokens += ["#" + w for w in _pick(rng, pool, h)]
    tokens += [f"@user{rng.integers(0, 50)}" for _ in range(m)]
    tokens += ["$" for _ in range(sym)]
    tokens += [f"https://t.co/x{rng.integers(0, 1000)}" for _ in range(url)]
    if excl > 0:
        tokens.append("!" * excl)
    order = rng.permutation(len(tokens))
    return " ".join([tokens[i] for i in order] + ["."])


def _abusive_reply_text(rng) -> str:
    words = _pick(rng, INSULTS, 2) + _pick(rng, REPLY_POOL, int(rng.integers(3, 11)))
    order = rng.permutation(len(words))
    return " ".join(words[i] for i in order) + "."


def _neutral_reply_text(rng) -> str:
    words = _pick(rng, REPLY_POOL, int(rng.integers(3, 11)))
    return " ".join(words) + "."


def synth_corpus(config: SynthConfig, seed: int) -> Corpus:
    rng = np.random.default_rng(seed)
    tail_p = 1.0 / (1.0 + config.neutral_reply_mean)
    conversations = []
    for i in range(config.n_conversations):
        abusive = rng.random() < config.abusive_conversation_rate
        if abusive:
            h = 1 + int(rng.binomial(4, 0.55))
            m = 1 + int(rng.binomial(3, 0.5))
            sym = 1 + int(rng.binomial(2, 0.4))
            terms = 1 + int(rng.poisson(1.2))
            excl = 1 + int(rng.binomial(5, 0.5))
            neg = 1 + int(rng.binomial(3, 0.55))
        else:
            h = int(rng.binomial(2, 0.2))
            m = int(rng.binomial(2, 0.25))
            sym = int(rng.binomial(1, 0.1))
            terms = 0
            excl = int(rng.binomial(2, 0.15))
            neg = int(rng.binomial(1, 0.1))
        pos = int(rng.binomial(2, 0.3))
        url = int(rng.binomial(1, 0.3))
        account = _account(rng)

        if abusive:
            provocation = (
                config.signal_mt * (0.6 * h + 0.5 * excl)
                + config.signal_tw * (1.0 * terms + 0.35 * m + 0.3 * sym)
                + config.signal_ac * math.log1p(account.followers_count) / 5.0
            )
            k = max(1, round(provocation + rng.normal(0.0, config.noise_sd)))
            n_neutral = int(rng.geometric(tail_p)) - 1
        else:
            k = 0
            n_neutral = int(rng.geometric(tail_p))

        cid = f"s{seed}-c{i:05d}"
        replies = [
            Reply(id=f"{cid}-r{j:03d}", text=_abusive_reply_text(rng))
            for j in range(k)
        ]
        replies += [
            Reply(id=f"{cid}-r{k + j:03d}", text=_neutral_reply_text(rng))
            for j in range(n_neutral)
        ]
        parent = ParentTweet(
            id=f"{cid}-p",
            text=_parent_text(rng, abusive, h, m, sym, url, terms, excl, neg, pos),
            hashtag_count=h,
            symbol_count=sym,
            mention_count=m,
            url_count=url,
            is_quote_status=bool(rng.random() < 0.25),
            possibly_sensitive=bool(rng.random() < (0.7 if terms > 0 else 0.05)),
            num_retweets=int(rng.lognormal(2.0, 1.5)),
            num_favorites=int(rng.lognormal(2.5, 1.5)),
        )
        conversations.append(Conversation(id=cid, parent=parent, account=account,
                                          replies=tuple(replies)))
    return Corpus(conversations=tuple(conversations),
                  provenance=Provenance.SYNTHETIC, seed=seed)
