"""Ranking metric tests.

The BLEU and LCS oracles here are written from the definitions with
different mechanics (exact fractions, list-removal clipping, memoized
recursion) so agreement with the implementations is evidence, not an echo.
"""

import math
import random
from fractions import Fraction
from functools import lru_cache

import pytest

from perfopt.bow import BowVector, embed_bow, normalize
from perfopt.extract import annotate_types, extract_functions
from perfopt.lexer import lex
from perfopt.ranking import (
    bleu,
    flow_cosine,
    lcs_length,
    rank,
    rouge_l,
    syntactic_score,
    type_overlap,
)

# ------------------------------------------------------------- oracles

def _oracle_bleu(ref, cand):
    if not ref or not cand:
        return 0.0
    prod = Fraction(1)
    for n in range(1, 5):
        ref_ngrams = [tuple(ref[i : i + n]) for i in range(len(ref) - n + 1)]
        cand_ngrams = [tuple(cand[i : i + n]) for i in range(len(cand) - n + 1)]
        pool = list(ref_ngrams)
        hits = 0
        for g in cand_ngrams:
            if g in pool:
                pool.remove(g)
                hits += 1
        prod *= Fraction(hits + 1, len(cand_ngrams) + 1)
    geo = float(prod) ** 0.25
    bp = 1.0 if len(cand) > len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return bp * geo


def _oracle_lcs(a, b):
    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))

    return go(0, 0)


def _oracle_rouge(ref, cand):
    if not ref and not cand:
        return 1.0
    if not ref or not cand:
        return 0.0
    lcs = _oracle_lcs(tuple(ref), tuple(cand))
    if lcs == 0:
        return 0.0
    p, r = lcs / len(cand), lcs / len(ref)
    return 2 * p * r / (p + r)


def _flow_vec(source):
    # Empty stoplist: "return" is a flow keyword and must stay countable.
    return embed_bow(normalize(lex(source)), frozenset())


# ------------------------------------------------- frozen worked values

def test_bleu_worked_example():
    got = bleu(["a", "b", "c", "d"], ["a", "b", "c", "e"])
    # precisions 4/5, 3/4, 2/3, 1/2 -> (0.2)^(1/4)
    assert got == pytest.approx(0.2 ** 0.25, abs=1e-9)
    assert got == pytest.approx(0.6687403, abs=1e-6)


def test_rouge_worked_example():
    assert rouge_l(["a", "b", "c", "d"], ["a", "c", "d"]) == pytest.approx(6 / 7, abs=1e-9)


def test_flow_worked_example():
    q = BowVector({"for": 1.0, "if": 1.0})
    c = BowVector({"for": 1.0})
    assert flow_cosine(q, c) == pytest.approx(1 / math.sqrt(2), abs=1e-9)


def test_flow_from_embedded_source():
    a = _flow_vec("for (;;) {}")
    b = _flow_vec("for (;;) { if (x) {} }")
    assert flow_cosine(a, b) == pytest.approx(1 / math.sqrt(2), abs=1e-9)


def test_flow_restriction_ignores_non_flow_terms():
    q = BowVector({"for": 2.0, "if": 1.0, "id0": 40.0, "<num>": 7.0})
    c = BowVector({"for": 2.0, "if": 1.0, "id9": 3.0})
    assert flow_cosine(q, c) == pytest.approx(1.0, abs=1e-12)


def test_type_overlap_examples():
    assert type_overlap(frozenset({"int", "vector"}), frozenset({"int", "map"})) == pytest.approx(1 / 3)
    assert type_overlap(frozenset({"vector", "string"}), frozenset({"vector"})) == 0.5
    assert type_overlap(frozenset(), frozenset()) == 0.0
    assert type_overlap(frozenset({"int"}), frozenset({"int"})) == 1.0


# --------------------------------------------------- oracle agreement

def test_bleu_matches_oracle_on_random_pairs():
    rng = random.Random(99)
    alphabet = list("abcdefg")
    for _ in range(100):
        ref = [rng.choice(alphabet) for _ in range(rng.randint(1, 15))]
        cand = [rng.choice(alphabet) for _ in range(rng.randint(1, 15))]
        assert bleu(ref, cand) == pytest.approx(_oracle_bleu(ref, cand), abs=1e-6)


def test_rouge_matches_oracle_on_random_pairs():
    rng = random.Random(77)
    alphabet = list("abcd")
    for _ in range(100):
        ref = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
        cand = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
        assert rouge_l(ref, cand) == pytest.approx(_oracle_rouge(ref, cand), abs=1e-9)


def test_lcs_matches_oracle():
    rng = random.Random(13)
    for _ in range(60):
        a = [rng.choice("abc") for _ in range(rng.randint(0, 10))]
        b = [rng.choice("abc") for _ in range(rng.randint(0, 10))]
        assert lcs_length(a, b) == _oracle_lcs(tuple(a), tuple(b))


# ----------------------------------------------------- metric behavior

def test_bleu_empty_cases():
    assert bleu(["a"], []) == 0.0
    assert bleu([], ["a"]) == 0.0
    assert bleu([], []) == 0.0


def test_bleu_identity_is_one():
    seq = ["int", "id0", "(", ")", "{", "}"]
    assert bleu(seq, seq) == 1.0
    assert bleu(["x"], ["x"]) == 1.0  # shorter than max_n still exact


def test_bleu_brevity_penalizes_short_candidates():
    ref = list("abcdefgh")
    assert bleu(ref, list("abcd")) < bleu(ref, list("abcdefgh"))


def test_rouge_empty_and_identity():
    assert rouge_l([], []) == 1.0
    assert rouge_l(["a"], []) == 0.0
    assert rouge_l(["a", "b"], ["a", "b"]) == 1.0


def test_flow_empty_and_disjoint():
    # No flow keywords on either side: nothing to compare, scores 0.
    assert flow_cosine(_flow_vec("x = y;"), _flow_vec("a = b;")) == 0.0
    assert flow_cosine(_flow_vec("for (;;) {}"), _flow_vec("x = y;")) == 0.0
    assert flow_cosine(_flow_vec("while (a) {}"), _flow_vec("if (b) {}")) == 0.0


def test_flow_return_counts():
    assert flow_cosine(_flow_vec("return x;"), _flow_vec("return y + z;")) == pytest.approx(1.0)


def test_flow_shared_keyword_never_decreases():
    q = BowVector({"for": 1.0, "if": 2.0})
    c = BowVector({"for": 3.0})
    before = flow_cosine(q, c)
    q2 = BowVector({"for": 1.0, "if": 2.0, "while": 1.0})
    c2 = BowVector({"for": 3.0, "while": 1.0})
    assert flow_cosine(q2, c2) >= before - 1e-12


# ------------------------------------------------- whole-score behavior

_BODIES = [
    "int s = 0; for (int i = 0; i < a; ++i) { s += i; } return s;",
    "if (a > b) { return a; } return b;",
    "int acc = a; while (acc < b) { acc *= 2; } return acc;",
    "int t = a * b; return t + 1;",
    "for (int i = 0; i < a; ++i) { if (i % 2) { b += i; } } return b;",
]


def _make_records(count, seed):
    rng = random.Random(seed)
    records = []
    for i in range(count):
        body = rng.choice(_BODIES)
        src = f"int fn{i}(int a, int b) {{ {body} }}"
        rec = annotate_types(extract_functions(src, f"gen{i}.cc")[0])
        assert rec.type_set  # identity score needs a nonempty type set
        records.append(rec)
    return records


def test_self_score_is_one_for_50_fixtures():
    for rec in _make_records(50, seed=5):
        comps = syntactic_score(rec, rec)
        assert comps.s == pytest.approx(1.0, abs=1e-12)
        assert comps.b == pytest.approx(1.0, abs=1e-12)
        assert comps.r == pytest.approx(1.0, abs=1e-12)
        assert comps.t == 1.0
        assert comps.f == pytest.approx(1.0, abs=1e-12)


def test_score_is_mean_of_components():
    records = _make_records(12, seed=21)
    for q in records[:4]:
        for c in records:
            comps = syntactic_score(q, c)
            assert comps.s == pytest.approx((comps.b + comps.r + comps.t + comps.f) / 4, abs=1e-9)


def test_components_and_score_bounded_10k():
    rng = random.Random(31)
    alphabet = list("abcdef")
    for _ in range(10_000):
        ref = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
        cand = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
        b = bleu(ref, cand)
        r = rouge_l(ref, cand)
        assert 0.0 <= b <= 1.0 + 1e-12
        assert 0.0 <= r <= 1.0 + 1e-12


def test_pairwise_scores_bounded():
    records = _make_records(20, seed=8)
    for q in records[:5]:
        for c in records:
            comps = syntactic_score(q, c)
            for val in comps:
                assert 0.0 <= val <= 1.0 + 1e-12


def test_alpha_renamed_twin_outranks_stranger():
    q = annotate_types(
        extract_functions(
            "int total(int n) { int s = 0; for (int i = 0; i < n; ++i) { s += i; } return s; }",
            "q.cc",
        )[0]
    )
    twin = annotate_types(
        extract_functions(
            "int sum(int m) { int acc = 0; for (int j = 0; j < m; ++j) { acc += j; } return acc; }",
            "twin.cc",
        )[0]
    )
    stranger = annotate_types(
        extract_functions(
            'std::string greet(const std::string& who) { return "hi " + who; }',
            "s.cc",
        )[0]
    )
    ranked = rank(q, [(stranger, 0.1), (twin, 0.4)])
    assert ranked[0].id == twin.id
    assert ranked[0].s > ranked[1].s


def test_rank_sorted_and_tie_chain():
    records = _make_records(10, seed=3)
    pairs = [(rec, 0.05 * i) for i, rec in enumerate(records)]
    ranked = rank(records[0], pairs)
    scores = [rc.s for rc in ranked]
    assert scores == sorted(scores, reverse=True)
    for a, b in zip(ranked, ranked[1:]):
        if a.s == b.s:
            assert (a.ann_distance, a.id) <= (b.ann_distance, b.id)


def test_rank_tie_prefers_smaller_ann_distance():
    src = "int f(int a, int b) { if (a > b) { return a; } return b; }"
    near = annotate_types(extract_functions(src, "near.cc")[0])
    far = annotate_types(extract_functions(src, "far.cc")[0])
    q = annotate_types(extract_functions(src, "q.cc")[0])
    ranked = rank(q, [(far, 0.9), (near, 0.1)])
    assert ranked[0].s == ranked[1].s
    assert ranked[0].id == near.id


def test_rank_tie_equal_distance_falls_to_id():
    src = "int f(int a, int b) { if (a > b) { return a; } return b; }"
    alpha = annotate_types(extract_functions(src, "alpha.cc")[0])
    beta = annotate_types(extract_functions(src, "beta.cc")[0])
    q = annotate_types(extract_functions(src, "q.cc")[0])
    ranked = rank(q, [(beta, 0.5), (alpha, 0.5)])
    assert [rc.id for rc in ranked] == sorted([alpha.id, beta.id])


def test_rank_deterministic():
    records = _make_records(12, seed=4)
    pairs = [(rec, 0.01 * i) for i, rec in enumerate(records[1:])]
    a = rank(records[0], pairs)
    b = rank(records[0], pairs)
    assert a == b
