"""Character-trigram blocking: BM25 and overlap-coefficient scorers over actor labels."""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from typing import NamedTuple, Protocol, Sequence

from .ingest import normalize_label
from .kg import ActorRegistry

DEFAULT_K1 = 1.5
DEFAULT_B = 0.75


def trigrams(text: str) -> list[str]:
    """Sliding width-3 window over the normalized, case-folded string.

    Strings shorter than three characters become a single token.
    """
    s = unicodedata.normalize("NFC", normalize_label(text).casefold())
    if not s:
        return []
    if len(s) < 3:
        return [s]
    return [s[i:i + 3] for i in range(len(s) - 2)]


class ScoredCandidate(NamedTuple):
    actor_id: str
    score: float


class Scorer(Protocol):
    name: str
    doc_ids: Sequence[str]

    def scores(self, query: str) -> dict[int, float]:
        """Positive scores keyed by document position; absent docs score 0."""


class Bm25Index:
    name = "bm25_3"

    def __init__(self, doc_ids: Sequence[str], labels: Sequence[str],
                 k1: float = DEFAULT_K1, b: float = DEFAULT_B):
        if len(doc_ids) != len(labels):
            raise ValueError("doc_ids and labels differ in length")
        if k1 <= 0 or not 0 <= b <= 1:
            raise ValueError("need k1 > 0 and 0 <= b <= 1")
        self.k1 = k1
        self.b = b
        self.doc_ids = list(doc_ids)
        self._pos = {d: i for i, d in enumerate(self.doc_ids)}
        self.doc_tokens = [trigrams(label) for label in labels]
        self.doc_len = [len(t) for t in self.doc_tokens]
        n = len(self.doc_ids)
        self.avgdl = sum(self.doc_len) / n if n else 0.0
        self.doc_freq: Counter[str] = Counter()
        self._postings: dict[str, list[tuple[int, int]]] = {}
        for i, toks in enumerate(self.doc_tokens):
            for tok, tf in Counter(toks).items():
                self.doc_freq[tok] += 1
                self._postings.setdefault(tok, []).append((i, tf))

    @property
    def params(self) -> tuple[float, float]:
        return self.k1, self.b

    def __len__(self) -> int:
        return len(self.doc_ids)

    def idf(self, token: str) -> float:
        n_docs = len(self.doc_ids)
        df = self.doc_freq.get(token, 0)
        return math.log((n_docs - df + 0.5) / (df + 0.5) + 1.0)

    def _term(self, tf: int, dl: int) -> float:
        norm = self.k1 * (1.0 - self.b + self.b * dl / self.avgdl) if self.avgdl else self.k1
        return tf * (self.k1 + 1.0) / (tf + norm)

    def score(self, query: Sequence[str], doc_id: str) -> float:
        """BM25 of one document; repeated query tokens count once."""
        try:
            i = self._pos[doc_id]
        except KeyError:
            raise KeyError(f"document {doc_id!r} is not indexed") from None
        tf = Counter(self.doc_tokens[i])
        total = 0.0
        for tok in dict.fromkeys(query):
            f = tf.get(tok, 0)
            if f:
                total += self.idf(tok) * self._term(f, self.doc_len[i])
        return total

    def scores(self, query: str) -> dict[int, float]:
        out: dict[int, float] = {}
        for tok in dict.fromkeys(trigrams(query)):
            postings = self._postings.get(tok)
            if not postings:
                continue
            w = self.idf(tok)
            for i, tf in postings:
                out[i] = out.get(i, 0.0) + w * self._term(tf, self.doc_len[i])
        return out


def overlap3(a: str, b: str) -> float:
    """|A ∩ B| / min(|A|, |B|) over trigram sets; 0 when either set is empty."""
    sa, sb = set(trigrams(a)), set(trigrams(b))
    if not sa or not sb:
        return 0.0
    return len(sa & sb) / min(len(sa), len(sb))


class OverlapIndex:
    name = "overlap_3"

    def __init__(self, doc_ids: Sequence[str], labels: Sequence[str]):
        if len(doc_ids) != len(labels):
            raise ValueError("doc_ids and labels differ in length")
        self.doc_ids = list(doc_ids)
        self.doc_sets = [frozenset(trigrams(label)) for label in labels]
        self._postings: dict[str, list[int]] = {}
        for i, s in enumerate(self.doc_sets):
            for tok in s:
                self._postings.setdefault(tok, []).append(i)

    def __len__(self) -> int:
        return len(self.doc_ids)

    def scores(self, query: str) -> dict[int, float]:
        q = set(trigrams(query))
        if not q:
            return {}
        shared: Counter[int] = Counter()
        for tok in q:
            shared.update(self._postings.get(tok, ()))
        return {i: c / min(len(q), len(self.doc_sets[i])) for i, c in shared.items()}


BLOCKERS = ("bm25_3", "overlap_3")


def build_index(registry: ActorRegistry, k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> Bm25Index:
    return Bm25Index(registry.ids, [a.label for a in registry], k1, b)


def build_overlap(registry: ActorRegistry) -> OverlapIndex:
    return OverlapIndex(registry.ids, [a.label for a in registry])


def build_scorer(registry: ActorRegistry, blocker: str = "bm25_3", **params) -> Scorer:
    if blocker == "bm25_3":
        return build_index(registry, **params)
    if blocker == "overlap_3":
        return build_overlap(registry)
    raise ValueError(f"unknown blocker {blocker!r}; expected one of {BLOCKERS}")


def top_k(scorer: Scorer, query: str, k: int, allowed: set[str] | None = None) -> list[ScoredCandidate]:
    """Best ``k`` documents by score, ties broken by id.

    ``allowed`` masks the full-corpus ranking; zero-score documents only pad
    the result when fewer than ``k`` positive ones remain.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ids = scorer.doc_ids
    ranked = sorted(
        ((ids[i], s) for i, s in scorer.scores(query).items()
         if s > 0 and (allowed is None or ids[i] in allowed)),
        key=lambda c: (-c[1], c[0]),
    )
    out = [ScoredCandidate(a, s) for a, s in ranked[:k]]
    if len(out) < k:
        have = {c.actor_id for c in out}
        for doc_id in sorted(ids):
            if len(out) >= k:
                break
            if doc_id not in have and (allowed is None or doc_id in allowed):
                out.append(ScoredCandidate(doc_id, 0.0))
    return out
