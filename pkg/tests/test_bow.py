"""Normalization and embedding tests."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perfopt.bow import (
    DEFAULT_STOPLIST,
    BowVector,
    EmptyDiff,
    embed_bow,
    embed_diff_query,
    embed_source,
    normalize,
)
from perfopt.lexer import lex


def test_normalize_basic():
    toks = lex('int foo(int bar) { return bar + 1; } // note')
    # foo -> id0, bar -> id1; comment dropped; 1 -> <num>; all else literal.
    assert normalize(toks) == [
        "int", "id0", "(", "int", "id1", ")", "{",
        "return", "id1", "+", "<num>", ";", "}",
    ]


def test_normalize_declaration_example():
    toks = lex("int count = 0;")
    assert normalize(toks) == ["int", "id0", "=", "<num>", ";"]


def test_normalize_string_and_number_placeholders():
    toks = lex('log("msg", 42, 3.14);')
    assert normalize(toks) == ["id0", "(", "<str>", ",", "<num>", ",", "<num>", ")", ";"]


def test_normalize_placeholder_order_is_first_occurrence():
    toks = lex("b(a); a(b);")
    assert normalize(toks) == ["id0", "(", "id1", ")", ";", "id1", "(", "id0", ")", ";"]


def test_normalize_comment_and_string_never_survive():
    toks = lex('/* gone */ call("payload"); // also gone')
    norm = normalize(toks)
    assert norm == ["id0", "(", "<str>", ")", ";"]
    assert not any("payload" in t or "gone" in t for t in norm)


def test_embed_drops_stoplist_and_punct():
    norm = normalize(lex("for (x) return;"))
    vec = embed_bow(norm, DEFAULT_STOPLIST)
    assert vec.counts == {"for": 1, "id0": 1}


def test_embed_empty_stoplist_keeps_return():
    norm = normalize(lex("return 0;"))
    vec = embed_bow(norm, frozenset())
    assert vec.counts == {"return": 1, "<num>": 1}


def test_embed_counts_and_norm():
    norm = ["id0", "id0", "id0"]
    vec = embed_bow(norm, frozenset())
    assert vec.counts == {"id0": 3}
    assert vec.l2_norm == pytest.approx(3.0)


def test_embed_all_punct_is_zero():
    vec = embed_source("{ ; } ( )")
    assert vec.is_zero
    assert vec.l2_norm == 0.0


def test_norm_cache_matches_recomputation():
    vec = embed_source("int f() { int x = 0; return x + x; }")
    norm = math.sqrt(sum(v * v for v in vec.counts.values()))
    assert vec.l2_norm == pytest.approx(norm, abs=1e-9)


def test_alpha_renaming_preserves_embedding():
    a = embed_source("int sum(int n) { int acc = 0; return acc + n; }")
    b = embed_source("int total(int k) { int r = 0; return r + k; }")
    assert a.counts == b.counts


def test_cosine_identity_and_bounds():
    a = embed_source("for (int i = 0; i < n; ++i) { v.push_back(i); }")
    b = embed_source("while (x) { x = next(x); }")
    assert a.cosine(a) == pytest.approx(1.0, abs=1e-12)
    assert a.distance(a) == pytest.approx(0.0, abs=1e-12)
    assert 0.0 <= a.distance(b) <= 1.0
    assert a.cosine(b) == pytest.approx(b.cosine(a))


def test_restrict():
    vec = embed_source("for (;;) { if (x) { y(); } }", frozenset())
    flow = vec.restrict({"for", "if", "while"})
    assert flow.counts == {"for": 1, "if": 1}


def test_vector_json_round_trip():
    vec = embed_source("if (a) { b(); } else { c(); }")
    back = BowVector.from_json(vec.to_json())
    assert back.counts == vec.counts
    assert back.l2_norm == pytest.approx(vec.l2_norm)


DIFF = """\
Here is the change you asked for:

```diff
--- a/loop.cc
+++ b/loop.cc
@@ -1,4 +1,5 @@
 void fill(std::vector<int>& v, int n) {
+  v.reserve(n);
   for (int i = 0; i < n; ++i) {
     v.push_back(i);
   }
```
"""


def test_embed_diff_query_uses_before_side_only():
    vec = embed_diff_query(DIFF)
    assert not vec.is_zero
    assert "for" in vec.counts
    # Before-side identifiers are fill/std::vector/v/n/i/push_back, so exactly
    # id0..id5.  If the added line leaked, "reserve" would mint an id6.
    id_terms = {t for t in vec.counts if t.startswith("id")}
    assert id_terms == {"id0", "id1", "id2", "id3", "id4", "id5"}


def test_embed_diff_query_removed_lines_count():
    diff = "@@ -1,2 +1,2 @@\n-int waste = compute();\n+int frugal = cheap();\n context_here();\n"
    vec = embed_diff_query(diff)
    # waste/compute from the removed line embed; frugal/cheap do not.
    assert sum(vec.counts.values()) >= 3


def test_embed_diff_query_rejects_prose():
    with pytest.raises(EmptyDiff):
        embed_diff_query("I think the function is fine as written.")


def test_embed_diff_query_rejects_whitespace_only():
    with pytest.raises(EmptyDiff):
        embed_diff_query("@@ -1,1 +1,1 @@\n- \n+\t\n")


def test_embed_diff_query_accepts_example_object():
    class Example:
        diff = DIFF

    assert not embed_diff_query(Example()).is_zero


_RENAMES = st.permutations(["alpha", "beta", "gamma", "delta"])


@given(_RENAMES, _RENAMES)
@settings(max_examples=40, deadline=None)
def test_alpha_invariance_property(names_a, names_b):
    template = "int {0}(int {1}) {{ int {2} = {1}; return {2}; }}"
    src_a = template.format(*names_a[:3])
    src_b = template.format(*names_b[:3])
    va, vb = embed_source(src_a), embed_source(src_b)
    assert va.counts == vb.counts
    assert va.cosine(vb) == pytest.approx(1.0, abs=1e-9)


@given(st.sampled_from([
    "int f() { return 1; }",
    "for (;;) { break; }",
    "std::map<int,int> m; m[0] = 1;",
    "auto s = \"str\"; int n = 42;",
]))
@settings(max_examples=20, deadline=None)
def test_embedding_deterministic(src):
    assert embed_source(src).counts == embed_source(src).counts
