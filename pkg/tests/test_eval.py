"""Retrieval evaluation: AP/MAP math and the seeded corpus."""

import random
from fractions import Fraction

import pytest

from perfopt.evaluation import (
    EvalQuery,
    QueryKind,
    average_precision_at_k,
    build_eval_index,
    build_seeded_corpus,
    build_seeded_corpus_with_diffs,
    map_at_k,
    prepare_diff_queries,
    prepare_function_queries,
    retrieve,
    run_eval,
    run_eval_prepared,
)


def _oracle_ap(ranked, relevant, k):
    # Independent re-computation: precision at each rank by rescanning
    # the whole prefix, plain float arithmetic.
    precisions = []
    for i in range(1, min(k, len(ranked)) + 1):
        if ranked[i - 1] in relevant:
            hits = sum(1 for x in ranked[:i] if x in relevant)
            precisions.append(hits / i)
    return sum(precisions) / min(len(relevant), k)


# ------------------------------------------------------------------- AP


def test_ap_single_relevant_at_rank_one():
    assert average_precision_at_k(["a", "b", "c"], frozenset({"a"}), 5) == 1.0


def test_ap_worked_example():
    # relevant at ranks 1 and 3, |relevant| = 2: (1 + 2/3) / 2 = 5/6
    ap = average_precision_at_k(["r1", "x", "r2", "y", "z"], frozenset({"r1", "r2"}), 5)
    assert ap == float(Fraction(5, 6))
    assert ap == pytest.approx(0.8333, abs=5e-5)


def test_ap_no_relevant_in_top_k():
    assert average_precision_at_k(["x", "y"], frozenset({"r"}), 5) == 0.0


def test_ap_normalizes_by_min_of_relevant_and_k():
    # 3 relevant, k=2, both retrieved slots relevant: denominator is 2.
    ap = average_precision_at_k(["r1", "r2", "x"], frozenset({"r1", "r2", "r3"}), 2)
    assert ap == 1.0


def test_ap_requires_positive_k():
    with pytest.raises(ValueError):
        average_precision_at_k(["a"], frozenset({"a"}), 0)


def test_ap_matches_prefix_oracle_on_1000_rankings():
    rng = random.Random(99)
    ids = [f"f{i}" for i in range(30)]
    for _ in range(1000):
        ranked = rng.sample(ids, rng.randint(5, 30))
        relevant = frozenset(rng.sample(ids, rng.randint(1, 8)))
        k = rng.randint(1, 25)
        got = average_precision_at_k(ranked, relevant, k)
        assert abs(got - _oracle_ap(ranked, relevant, k)) < 1e-9


def test_ap_invariant_under_tail_permutation():
    rng = random.Random(7)
    ids = [f"f{i}" for i in range(20)]
    relevant = frozenset({"f1", "f4", "f9"})
    for _ in range(200):
        ranked = rng.sample(ids, 20)
        k = rng.randint(1, 10)
        baseline = average_precision_at_k(ranked, relevant, k)
        tail = ranked[k:]
        rng.shuffle(tail)
        assert average_precision_at_k(ranked[:k] + tail, relevant, k) == baseline


# ------------------------------------------------------------------ MAP


def test_map_averages_ap():
    queries = [
        EvalQuery("q1", QueryKind.FUNCTION, frozenset({"a"})),
        EvalQuery("q2", QueryKind.FUNCTION, frozenset({"b"})),
    ]
    rankings = {"q1": ["a", "x"], "q2": ["x", "y"]}
    assert map_at_k(queries, rankings, 5) == 0.5


def test_map_of_single_query_is_its_ap():
    q = EvalQuery("q1", QueryKind.FUNCTION, frozenset({"a", "b"}))
    rankings = {"q1": ["a", "x", "b"]}
    expected = average_precision_at_k(rankings["q1"], q.relevant_ids, 5)
    assert map_at_k([q], rankings, 5) == expected


def test_map_requires_queries():
    with pytest.raises(ValueError):
        map_at_k([], {}, 5)


def test_query_validation():
    with pytest.raises(ValueError):
        EvalQuery("q", QueryKind.FUNCTION, frozenset())
    with pytest.raises(ValueError):
        EvalQuery("q", QueryKind.FUNCTION, frozenset({"q", "other"}))


def test_code_diff_kind_exists():
    q = EvalQuery("d1", QueryKind.CODE_DIFF, frozenset({"a", "b", "c", "d"}))
    assert q.query_kind.value == "CodeDiff"


# ----------------------------------------------------------- seeded corpus


@pytest.fixture(scope="module")
def corpus():
    return build_seeded_corpus(seed=0)


def test_corpus_size(corpus):
    database, queries = corpus
    assert len(database) == 60
    assert len(queries) == 12
    assert len({r.id for r in database}) == 60


def test_each_relevant_set_has_category_minus_one(corpus):
    _, queries = corpus
    for q in queries:
        assert len(q.relevant_ids) == 3
        assert q.query_id not in q.relevant_ids


def test_distractors_never_relevant(corpus):
    database, queries = corpus
    distractors = {
        r.id for r in database if r.id.startswith(("decoy_", "filler_"))
    }
    assert len(distractors) == 48
    for q in queries:
        assert not (q.relevant_ids & distractors)


def test_relevant_ids_share_category_prefix(corpus):
    _, queries = corpus
    for q in queries:
        prefix = q.query_id.rsplit("_", 1)[0]
        assert all(r.rsplit("_", 1)[0] == prefix for r in q.relevant_ids)


def test_members_parse_with_types(corpus):
    database, _ = corpus
    for record in database:
        assert record.tokens, record.id
        if not record.id.startswith("filler_"):
            assert "int" in record.type_set, record.id


def test_corpus_is_deterministic_per_seed():
    db_a, q_a = build_seeded_corpus(seed=3)
    db_b, q_b = build_seeded_corpus(seed=3)
    assert [r.to_json() for r in db_a] == [r.to_json() for r in db_b]
    assert q_a == q_b
    db_c, _ = build_seeded_corpus(seed=4)
    assert [r.source() for r in db_a] != [r.source() for r in db_c]


def test_counts_below_two_rejected():
    with pytest.raises(ValueError):
        build_seeded_corpus({"Copy": 1})
    with pytest.raises(ValueError):
        build_seeded_corpus({"Sort": 4})


def test_custom_counts_shape():
    database, queries = build_seeded_corpus({"Map": 2, "Vector": 3}, distractor_count=6)
    assert len(database) == 2 + 3 + 6
    assert len(queries) == 5
    sizes = sorted(len(q.relevant_ids) for q in queries)
    assert sizes == [1, 1, 2, 2, 2]


# -------------------------------------------------------------- retrieval


def test_self_hit_excluded(corpus):
    database, queries = corpus
    index = build_eval_index(database)
    by_id = {r.id: r for r in database}
    for prepared in prepare_function_queries(database, queries[:4]):
        for ranked in (True, False):
            ids = retrieve(index, by_id, prepared, 20, ranked)
            assert prepared.query.query_id not in ids
            assert len(ids) == 20


def test_ranked_beats_unranked_at_map5(corpus):
    database, queries = corpus
    ranked = run_eval(database, queries, ranked=True)
    unranked = run_eval(database, queries, ranked=False)
    assert ranked[5] > unranked[5]


def test_diff_queries_at_least_match_function_queries(corpus):
    database, fn_queries, diff_queries, diff_texts = build_seeded_corpus_with_diffs(
        seed=0
    )
    fn_prep = prepare_function_queries(database, fn_queries)
    diff_prep = prepare_diff_queries(diff_queries, diff_texts)
    for ranked in (True, False):
        fn_map = run_eval_prepared(database, fn_prep, ranked=ranked)[5]
        diff_map = run_eval_prepared(database, diff_prep, ranked=ranked)[5]
        assert diff_map >= fn_map


def test_diff_query_shape():
    _, _, diff_queries, diff_texts = build_seeded_corpus_with_diffs(seed=0)
    assert len(diff_queries) == 12
    for q in diff_queries:
        assert q.query_kind is QueryKind.CODE_DIFF
        assert len(q.relevant_ids) == 4
        assert q.query_id in diff_texts
        assert diff_texts[q.query_id].startswith("--- ")


def test_ranked_map_non_increasing_in_k(corpus):
    database, queries = corpus
    scores = run_eval(database, queries, ks=(5, 10, 20), ranked=True)
    assert scores[5] >= scores[10] >= scores[20]


def test_eval_is_deterministic(corpus):
    database, queries = corpus
    assert run_eval(database, queries) == run_eval(database, queries)
