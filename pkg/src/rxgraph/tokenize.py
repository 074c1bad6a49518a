"""Tokenization shared by the BM25 index and the hashing text encoder.

The default tokenizer lowercases, splits on anything that is not a word
character, and additionally emits one token per CJK codepoint so that
unsegmented scripts still produce useful index terms. Both the retrieval
index and the encoder accept any ``callable[[str], list[str]]``, so a
different segmenter can be plugged in without touching either module.
"""

from __future__ import annotations

import re

_WORD_RUN = re.compile(r"\w+", re.UNICODE)

# Han ideographs plus kana; covers the scripts where whitespace splitting fails.
_CJK_RANGES = (
    (0x3040, 0x30FF),
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xF900, 0xFAFF),
)


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def tokenize(text: str) -> list[str]:
    """Split ``text`` into lowercase tokens.

    Runs of word characters become one token each; runs containing CJK
    codepoints additionally contribute one single-character token per CJK
    codepoint, preserving order.
    """
    tokens: list[str] = []
    for run in _WORD_RUN.findall(text.lower()):
        tokens.append(run)
        if len(run) > 1 and any(_is_cjk(ch) for ch in run):
            tokens.extend(ch for ch in run if _is_cjk(ch))
    return tokens
