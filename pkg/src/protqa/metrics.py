"""Corpus-level BLEU-2 and ROUGE-1/2/L.

Tokenization is fixed and documented: lowercase, then maximal alphanumeric
runs ([a-z0-9]+); punctuation acts only as a boundary and is dropped. Scores
are therefore comparable within this artifact, not across papers.
"""

from __future__ import annotations

import math
import re
from collections import Counter

from .errors import ContractError

_TOKEN = re.compile(r"[a-z0-9]+")


def metric_tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu2(candidates: list[str], references: list[str]) -> float:
    """Corpus BLEU with uniform 1/2-gram weights, clipped counts and brevity
    penalty exp(1 - r/c) when the candidate corpus is shorter."""
    if len(candidates) != len(references):
        raise ContractError("candidate/reference counts differ")
    if not candidates:
        raise ContractError("empty corpus")
    matched = [0, 0]
    total = [0, 0]
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        c = metric_tokenize(cand)
        r = metric_tokenize(ref)
        cand_len += len(c)
        ref_len += len(r)
        for n in (1, 2):
            cg = _ngrams(c, n)
            rg = _ngrams(r, n)
            matched[n - 1] += sum(min(count, rg[g]) for g, count in cg.items())
            total[n - 1] += max(len(c) - n + 1, 0)
    if cand_len == 0 or matched[0] == 0 or matched[1] == 0 or total[1] == 0:
        return 0.0
    p1 = matched[0] / total[0]
    p2 = matched[1] / total[1]
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return 100.0 * bp * math.exp(0.5 * (math.log(p1) + math.log(p2)))


def sentence_bleu2(candidate: str, reference: str) -> float:
    """Sentence-level helper with add-one smoothing on 2-grams (kept separate
    from the unsmoothed corpus score)."""
    c = metric_tokenize(candidate)
    r = metric_tokenize(reference)
    if not c:
        return 0.0
    cg1, rg1 = _ngrams(c, 1), _ngrams(r, 1)
    m1 = sum(min(v, rg1[g]) for g, v in cg1.items())
    if m1 == 0:
        return 0.0
    p1 = m1 / len(c)
    cg2, rg2 = _ngrams(c, 2), _ngrams(r, 2)
    m2 = sum(min(v, rg2[g]) for g, v in cg2.items())
    p2 = (m2 + 1.0) / (max(len(c) - 1, 0) + 1.0)
    bp = 1.0 if len(c) > len(r) else math.exp(1.0 - len(r) / len(c))
    return 100.0 * bp * math.exp(0.5 * (math.log(p1) + math.log(p2)))


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def rouge_n(candidate: str, reference: str, n: int) -> float:
    """n-gram overlap F1 in [0, 100]; 0 when either side has no n-grams."""
    if n not in (1, 2):
        raise ContractError("rouge_n supports n in {1, 2}")
    c = _ngrams(metric_tokenize(candidate), n)
    r = _ngrams(metric_tokenize(reference), n)
    overlap = sum(min(v, r[g]) for g, v in c.items())
    c_total = sum(c.values())
    r_total = sum(r.values())
    if c_total == 0 or r_total == 0:
        return 0.0
    return 100.0 * _f1(overlap / c_total, overlap / r_total)


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> float:
    """Longest-common-subsequence F1 in [0, 100]."""
    c = metric_tokenize(candidate)
    r = metric_tokenize(reference)
    if not c or not r:
        return 0.0
    lcs = _lcs_length(c, r)
    return 100.0 * _f1(lcs / len(c), lcs / len(r))


def corpus_report(candidates: list[str], references: list[str]) -> dict:
    """Aggregate metrics plus per-sample rows for the evaluation report."""
    per_sample = [
        {
            "bleu2": sentence_bleu2(c, r),
            "rouge1": rouge_n(c, r, 1),
            "rouge2": rouge_n(c, r, 2),
            "rougeL": rouge_l(c, r),
        }
        for c, r in zip(candidates, references)
    ]
    n = max(len(per_sample), 1)
    return {
        "corpus": {
            "bleu2": bleu2(candidates, references),
            "rouge1": sum(s["rouge1"] for s in per_sample) / n,
            "rouge2": sum(s["rouge2"] for s in per_sample) / n,
            "rougeL": sum(s["rougeL"] for s in per_sample) / n,
            "count": len(per_sample),
        },
        "per_sample": per_sample,
    }
