"""Deterministic text kernels shared by the engine and its analysis pipelines:
hashed character-trigram embeddings, edit distance, and the translation /
spelling-correction transforms."""

from __future__ import annotations

import re
import zlib

import numpy as np


def tokenize(text: str) -> list[str]:
    return text.split()


def rule_label(text: str, positive_patterns, override_patterns) -> int:
    """Expert-rule weak label: 1 iff any positive pattern matches and no
    override pattern does."""
    if any(re.search(p, text) for p in positive_patterns):
        if not any(re.search(p, text) for p in override_patterns):
            return 1
    return 0


def embed_text(text: str, dim: int) -> tuple[float, ...]:
    """L2-normalized hashed character-trigram term-frequency vector.

    Empty or sub-trigram texts fall back to the text itself as the single
    term; the empty string yields an all-zero vector.
    """
    v = np.zeros(dim, dtype=np.float64)
    if len(text) >= 3:
        grams = (text[i : i + 3] for i in range(len(text) - 2))
    elif text:
        grams = (text,)
    else:
        grams = ()
    for g in grams:
        v[zlib.crc32(g.encode("utf-8")) % dim] += 1.0
    norm = float(np.linalg.norm(v))
    if norm > 0.0:
        v /= norm
    return tuple(float(x) for x in v)


def cosine(a, b) -> float:
    return float(np.dot(np.asarray(a), np.asarray(b)))


def damerau_levenshtein(a: str, b: str, cutoff: int | None = None) -> int:
    """Edit distance with adjacent transpositions (optimal string alignment).

    With ``cutoff`` set, returns cutoff+1 as soon as the distance is known to
    exceed it.
    """
    if a == b:
        return 0
    la, lb = len(a), len(b)
    if cutoff is not None and abs(la - lb) > cutoff:
        return cutoff + 1
    prev2: list[int] | None = None
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        cur = [i] + [0] * lb
        for j in range(1, lb + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            d = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                d = min(d, prev2[j - 2] + 1)
            cur[j] = d
        if cutoff is not None and min(cur) > cutoff:
            return cutoff + 1
        prev2, prev = prev, cur
    return prev[lb]


def translate_text(text: str, reverse_map: dict[str, str]) -> str:
    """Map every known token through the reverse dictionary; unknown tokens
    pass through unchanged."""
    return " ".join(reverse_map.get(t, t) for t in tokenize(text))


class SpellChecker:
    """Corrects out-of-vocabulary tokens to the nearest vocabulary word
    within edit distance 2 (ties broken lexicographically). Corrections are
    memoized per vocabulary instance."""

    def __init__(self, vocabulary) -> None:
        self.vocabulary = frozenset(vocabulary)
        self._by_length: dict[int, list[str]] = {}
        for w in sorted(self.vocabulary):
            self._by_length.setdefault(len(w), []).append(w)
        self._memo: dict[str, str] = {}

    def correct_token(self, token: str) -> str:
        if token in self.vocabulary:
            return token
        hit = self._memo.get(token)
        if hit is not None:
            return hit
        best: tuple[int, str] | None = None
        for length in range(max(1, len(token) - 2), len(token) + 3):
            for w in self._by_length.get(length, ()):
                d = damerau_levenshtein(token, w, cutoff=2)
                if d <= 2 and (best is None or (d, w) < best):
                    best = (d, w)
        corrected = best[1] if best is not None else token
        self._memo[token] = corrected
        return corrected

    def correct_text(self, text: str) -> tuple[str, bool]:
        """Returns the corrected text and whether the row needed work (had
        at least one out-of-vocabulary token)."""
        tokens = tokenize(text)
        needed = False
        out = []
        for t in tokens:
            if t in self.vocabulary:
                out.append(t)
            else:
                needed = True
                out.append(self.correct_token(t))
        return " ".join(out), needed
