"""Naive reference implementations used as test oracles.

Deliberately written without importing the code under test: pairwise loops,
direct formula evaluation, full sorts.
"""

from __future__ import annotations

import math
import re
import unicodedata


def naive_trigrams(text):
    s = unicodedata.normalize("NFC", text)
    s = re.sub(r"\s+", " ", s).strip().casefold()
    s = unicodedata.normalize("NFC", s)
    if len(s) == 0:
        return []
    if len(s) <= 2:
        return [s]
    out = []
    for i in range(len(s) - 2):
        out.append(s[i] + s[i + 1] + s[i + 2])
    return out


def naive_bm25_scores(docs, query, k1=1.5, b=0.75):
    """Score every doc against the query by evaluating the BM25 sum term by term."""
    toks = [naive_trigrams(d) for d in docs]
    n_docs = len(toks)
    avgdl = sum(len(t) for t in toks) / n_docs
    q = []
    for t in naive_trigrams(query):
        if t not in q:
            q.append(t)
    scores = []
    for d in toks:
        total = 0.0
        for qi in q:
            n_qi = sum(1 for other in toks if qi in other)
            idf = math.log((n_docs - n_qi + 0.5) / (n_qi + 0.5) + 1)
            f = d.count(qi)
            total += idf * (f * (k1 + 1)) / (f + k1 * (1 - b + b * len(d) / avgdl))
        scores.append(total)
    return scores


def naive_overlap(a, b):
    sa, sb = set(naive_trigrams(a)), set(naive_trigrams(b))
    if not sa or not sb:
        return 0.0
    return len(sa & sb) / min(len(sa), len(sb))


def naive_rank(ids, scores, k):
    pairs = list(zip(ids, scores))
    pairs.sort(key=lambda p: p[0])
    pairs.sort(key=lambda p: p[1], reverse=True)  # stable: equal scores keep id order
    return pairs[:k]


def reachability_related(parent, c):
    """Concepts x with x == c, x an ancestor of c, or c an ancestor of x (pairwise chain walks)."""

    def is_ancestor(a, x):
        p = parent[x]
        while p is not None:
            if p == a:
                return True
            p = parent[p]
        return False

    return {x for x in parent if x == c or is_ancestor(x, c) or is_ancestor(c, x)}


def reference_confusion(y_true, y_pred):
    """Accuracy and macro P/R/F1 from an explicit confusion matrix.

    Per-class values are exact ratios and the macro sums are exactly rounded,
    so results are comparable with ``==``.
    """
    sentinel = "__none__"
    t = [sentinel if v is None else v for v in y_true]
    p = [sentinel if v is None else v for v in y_pred]
    classes = sorted(set(t) | set(p))
    matrix = {(a, b): 0 for a in classes for b in classes}
    for a, b in zip(t, p):
        matrix[(a, b)] += 1
    precs, recs, f1s = [], [], []
    for c in classes:
        tp = matrix[(c, c)]
        col = sum(matrix[(a, c)] for a in classes)
        row = sum(matrix[(c, b)] for b in classes)
        prec = tp / col if col else 0.0
        rec = tp / row if row else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        precs.append(prec)
        recs.append(rec)
        f1s.append(f1)
    n = len(t)
    acc = sum(matrix[(c, c)] for c in classes) / n if n else 0.0
    m = len(classes)
    return {
        "accuracy": acc,
        "macro_precision": math.fsum(precs) / m if m else 0.0,
        "macro_recall": math.fsum(recs) / m if m else 0.0,
        "macro_f1": math.fsum(f1s) / m if m else 0.0,
    }


def first_integer(text):
    """First run of decimal digits, with a sign directly before it, by manual scan."""
    for i, ch in enumerate(text):
        if ch.isdecimal():
            j = i
            while j < len(text) and text[j].isdecimal():
                j += 1
            sign = text[i - 1] if i > 0 and text[i - 1] in "+-" else ""
            return int(sign + text[i:j])
    return None
