"""Syntactic re-ranking of retrieval hits.

The score S(Q,C) = (B + R + T + F) / 4 averages four cheap similarity
signals over a query function Q and candidate C:

  B  BLEU over normalized token sequences (n-grams up to 4, add-one
     smoothed precisions, standard brevity penalty)
  R  ROUGE-L, the LCS-based F1 over the same sequences
  T  intersection-over-union of the two declared type sets
  F  cosine over the control-flow keyword sub-vectors

All four live in [0,1], so S does too. Higher is more similar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .bow import BowVector, NormalizedTokens, embed_bow, normalize
from .extract import FunctionRecord

FLOW_KEYWORDS = frozenset(
    """
    for while do if else switch case break continue goto return try catch
    """.split()
)

_NO_STOPLIST: frozenset[str] = frozenset()


@dataclass(frozen=True)
class RankedCandidate:
    """One re-ranked retrieval hit with its score breakdown."""

    id: str
    ann_distance: float
    b: float
    r: float
    t: float
    f: float
    s: float

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "ann_distance": self.ann_distance,
            "b": self.b,
            "r": self.r,
            "t": self.t,
            "f": self.f,
            "s": self.s,
        }


class ScoreComponents(NamedTuple):
    b: float
    r: float
    t: float
    f: float
    s: float


def _ngram_counts(seq: Sequence[str], n: int) -> dict[tuple[str, ...], int]:
    counts: dict[tuple[str, ...], int] = {}
    for i in range(len(seq) - n + 1):
        gram = tuple(seq[i : i + n])
        counts[gram] = counts.get(gram, 0) + 1
    return counts


def bleu(q: NormalizedTokens, c: NormalizedTokens, max_n: int = 4) -> float:
    """BLEU of candidate c against single reference q.

    Every n-gram precision is smoothed by adding one to both the clipped
    match count and the candidate total, which keeps short or partially
    matching candidates off the zero floor while leaving exact matches at
    exactly 1.0.
    """
    if not c:
        return 0.0
    if not q:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand = _ngram_counts(c, n)
        ref = _ngram_counts(q, n)
        matches = sum(min(v, ref.get(g, 0)) for g, v in cand.items())
        total = sum(cand.values())
        log_sum += math.log((matches + 1) / (total + 1))
    score = math.exp(log_sum / max_n)
    if len(c) > len(q):
        bp = 1.0
    else:
        bp = math.exp(1.0 - len(q) / len(c))
    return bp * score


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length, two-row DP."""
    if not a or not b:
        return 0
    if len(b) > len(a):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                curr.append(prev[j - 1] + 1)
            else:
                curr.append(max(prev[j], curr[j - 1]))
        prev = curr
    return prev[-1]


def rouge_l(q: NormalizedTokens, c: NormalizedTokens) -> float:
    """ROUGE-L F1 (beta=1). Two empty sequences count as a perfect match."""
    if not q and not c:
        return 1.0
    if not q or not c:
        return 0.0
    lcs = lcs_length(q, c)
    if lcs == 0:
        return 0.0
    precision = lcs / len(c)
    recall = lcs / len(q)
    return 2.0 * precision * recall / (precision + recall)


def type_overlap(tq: frozenset[str], tc: frozenset[str]) -> float:
    """Intersection over union of declared type names.

    The max(...,1) guard sends the both-empty case to 0 rather than raising;
    a pair of functions that declare no types gives the score no evidence.
    """
    union = len(tq | tc)
    return len(tq & tc) / max(union, 1)


def flow_cosine(q_bow: BowVector, c_bow: BowVector) -> float:
    """Cosine of the two vectors restricted to control-flow keywords.

    If either side uses no flow keywords at all there is nothing to compare,
    so the component contributes 0.
    """
    qf = q_bow.restrict(FLOW_KEYWORDS)
    cf = c_bow.restrict(FLOW_KEYWORDS)
    if qf.is_zero or cf.is_zero:
        return 0.0
    return qf.cosine(cf)


def _flow_vector(record: FunctionRecord) -> BowVector:
    # Embed with an empty stoplist: the default stoplist drops "return",
    # which is a flow keyword this component must see.
    return embed_bow(normalize(record.tokens), _NO_STOPLIST)


def syntactic_score(q: FunctionRecord, c: FunctionRecord) -> ScoreComponents:
    """All four components plus their mean for one query/candidate pair."""
    nq = normalize(q.tokens)
    nc = normalize(c.tokens)
    b = bleu(nq, nc)
    r = rouge_l(nq, nc)
    t = type_overlap(frozenset(q.type_set), frozenset(c.type_set))
    f = flow_cosine(_flow_vector(q), _flow_vector(c))
    return ScoreComponents(b, r, t, f, (b + r + t + f) / 4.0)


def rank(
    query: FunctionRecord,
    candidates: Iterable[tuple[FunctionRecord, float]],
) -> list[RankedCandidate]:
    """Score every (record, ann_distance) pair and sort.

    Descending by s; ties broken by ascending ANN distance, then id, so
    the order is total and reproducible.
    """
    out = []
    for record, ann_distance in candidates:
        comps = syntactic_score(query, record)
        out.append(
            RankedCandidate(
                id=record.id,
                ann_distance=ann_distance,
                b=comps.b,
                r=comps.r,
                t=comps.t,
                f=comps.f,
                s=comps.s,
            )
        )
    out.sort(key=lambda rc: (-rc.s, rc.ann_distance, rc.id))
    return out
