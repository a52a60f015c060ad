"""Toy whitespace tokenizer with a hashed vocabulary.

Token ids come from crc32 so the mapping is stable across processes and
platforms (Python's builtin hash is salted per process).
"""

from __future__ import annotations

import re
import zlib

VOCAB_SIZE = 4096

STOPWORDS = frozenset(
    """a an the is are was were be been am do does did what which who whom
    whose where when why how of in on at to from by with and or not no nor
    it its this that these those there here you your i we they he she him
    her them us our their then than as if so for about into over under
    please look around describe everything answer see image picture tell
    me find question""".split()
)

_WORD_RE = re.compile(r"[a-z0-9']+")


def tokenize(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def token_id(word: str) -> int:
    return zlib.crc32(word.encode("utf-8")) % VOCAB_SIZE


def content_words(text: str) -> list[str]:
    """Question words that plausibly name objects: everything non-stopword."""
    seen = []
    for word in tokenize(text):
        if word not in STOPWORDS and word not in seen:
            seen.append(word)
    return seen
