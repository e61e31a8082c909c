"""Porter suffix-stripping stemmer, original 1980 rule set.

Implements the algorithm exactly as published: steps 1a through 5b with
the original condition tables, no later "departure" rules (so e.g.
``logi`` is not rewritten) and no special casing of short words beyond
what the rules themselves do.  Within a step the first matching suffix
is consumed even when its condition fails; later rules in that step are
then skipped.  That matching discipline is what the reference
implementation's switch blocks encode and several outputs depend on it.

Only lowercase ASCII words are expected; callers lowercase first.
"""
from __future__ import annotations

from functools import lru_cache

_VOWELS = frozenset("aeiou")


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        # y after a consonant acts as a vowel (syzygy), otherwise not (toy)
        if i == 0:
            return True
        return not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of vowel-consonant transitions, the paper's m."""
    m = 0
    prev_cons = None
    for i in range(len(stem)):
        cons = _is_consonant(stem, i)
        if prev_cons is False and cons:
            m += 1
        prev_cons = cons
    return m


def _contains_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def _ends_cvc(stem: str) -> bool:
    return (
        len(stem) >= 3
        and _is_consonant(stem, len(stem) - 3)
        and not _is_consonant(stem, len(stem) - 2)
        and _is_consonant(stem, len(stem) - 1)
        and stem[-1] not in ("w", "x", "y")
    )


def _first_match(word: str, rules) -> str:
    """Apply the first rule whose suffix matches; stop either way."""
    for suffix, replacement, condition in rules:
        if word.endswith(suffix):
            stem = word[: len(word) - len(suffix)]
            if condition is None or condition(stem):
                return stem + replacement
            return word
    return word


def _step1a(word: str) -> str:
    return _first_match(
        word,
        [("sses", "ss", None), ("ies", "i", None), ("ss", "ss", None), ("s", "", None)],
    )


def _step1b(word: str) -> str:
    if word.endswith("eed"):
        stem = word[:-3]
        return word[:-1] if _measure(stem) > 0 else word
    for suffix in ("ed", "ing"):
        if word.endswith(suffix):
            stem = word[: len(word) - len(suffix)]
            if _contains_vowel(stem):
                return _step1b_cleanup(stem)
            break
    return word


def _step1b_cleanup(stem: str) -> str:
    if stem.endswith("at"):
        return stem + "e"
    if stem.endswith("bl"):
        return stem + "e"
    if stem.endswith("iz"):
        return stem + "e"
    if _ends_double_consonant(stem) and stem[-1] not in ("l", "s", "z"):
        return stem[:-1]
    if _measure(stem) == 1 and _ends_cvc(stem):
        return stem + "e"
    return stem


def _step1c(word: str) -> str:
    if word.endswith("y") and _contains_vowel(word[:-1]):
        return word[:-1] + "i"
    return word


_M_GT_0 = lambda stem: _measure(stem) > 0  # noqa: E731
_M_GT_1 = lambda stem: _measure(stem) > 1  # noqa: E731

_STEP2_RULES = [
    ("ational", "ate", _M_GT_0),
    ("tional", "tion", _M_GT_0),
    ("enci", "ence", _M_GT_0),
    ("anci", "ance", _M_GT_0),
    ("izer", "ize", _M_GT_0),
    ("abli", "able", _M_GT_0),
    ("alli", "al", _M_GT_0),
    ("entli", "ent", _M_GT_0),
    ("eli", "e", _M_GT_0),
    ("ousli", "ous", _M_GT_0),
    ("ization", "ize", _M_GT_0),
    ("ation", "ate", _M_GT_0),
    ("ator", "ate", _M_GT_0),
    ("alism", "al", _M_GT_0),
    ("iveness", "ive", _M_GT_0),
    ("fulness", "ful", _M_GT_0),
    ("ousness", "ous", _M_GT_0),
    ("aliti", "al", _M_GT_0),
    ("iviti", "ive", _M_GT_0),
    ("biliti", "ble", _M_GT_0),
]

_STEP3_RULES = [
    ("icate", "ic", _M_GT_0),
    ("ative", "", _M_GT_0),
    ("alize", "al", _M_GT_0),
    ("iciti", "ic", _M_GT_0),
    ("ical", "ic", _M_GT_0),
    ("ful", "", _M_GT_0),
    ("ness", "", _M_GT_0),
]

_STEP4_RULES = [
    ("al", "", _M_GT_1),
    ("ance", "", _M_GT_1),
    ("ence", "", _M_GT_1),
    ("er", "", _M_GT_1),
    ("ic", "", _M_GT_1),
    ("able", "", _M_GT_1),
    ("ible", "", _M_GT_1),
    ("ant", "", _M_GT_1),
    ("ement", "", _M_GT_1),
    ("ment", "", _M_GT_1),
    ("ent", "", _M_GT_1),
    ("ion", "", lambda stem: _measure(stem) > 1 and bool(stem) and stem[-1] in ("s", "t")),
    ("ou", "", _M_GT_1),
    ("ism", "", _M_GT_1),
    ("ate", "", _M_GT_1),
    ("iti", "", _M_GT_1),
    ("ous", "", _M_GT_1),
    ("ive", "", _M_GT_1),
    ("ize", "", _M_GT_1),
]


def _step5a(word: str) -> str:
    if word.endswith("e"):
        stem = word[:-1]
        m = _measure(stem)
        if m > 1:
            return stem
        if m == 1 and not _ends_cvc(stem):
            return stem
    return word


def _step5b(word: str) -> str:
    if word.endswith("ll") and _measure(word[:-1]) > 1:
        return word[:-1]
    return word


@lru_cache(maxsize=131072)
def porter_stem(word: str) -> str:
    """Stem one lowercase word.  Words of length <= 1 pass through."""
    if len(word) <= 1:
        return word
    word = _step1a(word)
    word = _step1b(word)
    word = _step1c(word)
    word = _first_match(word, _STEP2_RULES)
    word = _first_match(word, _STEP3_RULES)
    word = _first_match(word, _STEP4_RULES)
    word = _step5a(word)
    word = _step5b(word)
    return word
