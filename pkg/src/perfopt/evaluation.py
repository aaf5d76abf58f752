"""Seeded retrieval evaluation: MAP@K over ranked and unranked configs.

The corpus is synthesized, so relevance labels are ground truth by
construction: category members are alpha-renamed, lightly padded variants
of one template, and every other record is a distractor. Each category
also ships "scrambled" decoys that share the template's token counts but
not its statement order; bag-of-words retrieval cannot tell them from the
real siblings, syntactic re-ranking can. That is the effect the direction
tests measure.

AP normalizes by min(|relevant|, k). Published MAP tables that normalize
differently are not directly comparable.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .bow import BowVector, diff_before_lines, embed_tokens
from .diffs import make_diff
from .extract import FunctionRecord, annotate_types, extract_functions
from .index import IndexConfig, VectorIndex, build_index
from .lexer import lex
from .ranking import rank

DEFAULT_CATEGORY_COUNTS = {"Copy": 4, "Map": 4, "Vector": 4}
DEFAULT_DISTRACTORS = 48
DEFAULT_KS = (5, 10, 20)
DEFAULT_RERANK_POOL = 50


class QueryKind(Enum):
    FUNCTION = "Function"
    CODE_DIFF = "CodeDiff"


@dataclass(frozen=True)
class EvalQuery:
    query_id: str
    query_kind: QueryKind
    relevant_ids: frozenset[str]

    def __post_init__(self):
        if not self.relevant_ids:
            raise ValueError("relevant_ids must be non-empty")
        if self.query_id in self.relevant_ids:
            raise ValueError("a query is never relevant to itself")


# -------------------------------------------------------------- AP / MAP

def _ap_fraction(ranked_ids: Sequence[str], relevant: frozenset, k: int) -> Fraction:
    if k < 1:
        raise ValueError("k must be at least 1")
    hits = 0
    total = Fraction(0)
    for i, ident in enumerate(ranked_ids[:k], start=1):
        if ident in relevant:
            hits += 1
            total += Fraction(hits, i)
    return total / min(len(relevant), k)


def average_precision_at_k(
    ranked_ids: Sequence[str], relevant: frozenset, k: int
) -> float:
    """AP@k = sum of precision@i at relevant ranks / min(|relevant|, k)."""
    return float(_ap_fraction(ranked_ids, relevant, k))


def map_at_k(
    queries: Sequence[EvalQuery],
    rankings: Mapping[str, Sequence[str]],
    k: int,
) -> float:
    """Mean AP@k over queries; rankings keyed by query_id."""
    if not queries:
        raise ValueError("need at least one query")
    total = Fraction(0)
    for q in queries:
        total += _ap_fraction(rankings[q.query_id], q.relevant_ids, k)
    return float(total / len(queries))


# ------------------------------------------------------- corpus synthesis

_NAME_POOL = [
    "count", "total", "value", "entry", "limit", "cursor", "bucket", "width",
    "offset", "weight", "score", "index", "items", "accum", "probe", "level",
    "batch", "chunk", "local", "scale", "delta", "round", "token", "field",
]

# Each template is a function over fresh identifier names; {pad} receives
# variant-specific filler statements so siblings differ slightly in their
# token counts (otherwise every sibling would sit at cosine distance zero
# and unranked retrieval would be trivially perfect).

def _vector_member(names, pad):
    v, n, i, j, t, fn = names
    return f"""
int {fn}(int {n}) {{
    std::vector<int> {v};
    for (int {i} = 0; {i} < {n}; ++{i}) {{
        {v}.push_back({i} * 2);
    }}
    int {t} = 0;
    for (int {j} = 0; {j} < {n}; ++{j}) {{
        {t} += {v}[{j}];
    }}
{pad}    return {t};
}}
"""


def _vector_decoys(names):
    v, n, i, j, t, fn = names
    # Same ingredients as the template (two for loops, one vector, the
    # same token counts to within a whisker) in a thoroughly different
    # order: loop headers rephrased, accesses fused into other statements,
    # declarations shuffled. Bag-of-words cannot tell these from the real
    # siblings; order-sensitive scoring can.
    return [
        f"""
int {fn}(int {n}) {{
    int {t} = 0;
    int {i} = 0;
    std::vector<int> {v};
    for (; {n} > {i}; {i}++) {{
        {t} += {i} * 2;
    }}
    for (int {j} = 0; {n} > {j}; {j}++) {{
        {v}.push_back({t});
    }}
    return {v}[0] + {t};
}}
""",
        f"""
int {fn}(int {n}) {{
    std::vector<int> {v};
    int {t} = {n} * 2;
    int {j} = 0;
    for (int {i} = 0; {i} != {t}; {i}++) {{
        {v}.push_back({n});
    }}
    for (; {j} < {n}; ++{j}) {{
        {t} += {v}[{j}] + {j};
    }}
    return {t} + 0;
}}
""",
        f"""
int {fn}(int {n}) {{
    std::vector<int> {v};
    int {t} = 0;
    for (int {i} = {n}; {i} > 0; --{i}) {{
        for (int {j} = 0; {j} != 2; {j}++) {{
            {t} += {j};
        }}
    }}
    {v}.push_back({t} * {n});
    return 0 + {v}[0];
}}
""",
    ]


def _copy_member(names, pad):
    s, k, acc, c, lim, fn = names
    return f"""
int {fn}(std::string {s}, int {k}) {{
    int {acc} = 0;
    int {lim} = {k} * 3;
    for (char {c} : {s}) {{
        if ({c} == 'x') {{
            {acc} += {lim};
        }}
    }}
{pad}    return {acc};
}}
"""


def _copy_decoys(names):
    s, k, acc, c, lim, fn = names
    return [
        f"""
int {fn}(std::string {s}, int {k}) {{
    int {lim} = 3 * {k};
    int {acc} = {lim};
    for (char {c} : {s}) {{
        if ('x' != {c}) {{
            {acc} += 0;
        }}
        {lim} = {acc};
    }}
    return {lim};
}}
""",
        f"""
int {fn}(std::string {s}, int {k}) {{
    int {acc} = {k};
    if ('x' == {acc}) {{
        {acc} = 3;
    }}
    int {lim} = 0;
    for (char {c} : {s}) {{
        {lim} += {c} * {acc};
    }}
    return {lim} + 0;
}}
""",
        f"""
int {fn}(std::string {s}, int {k}) {{
    for (char {c} : {s}) {{
        {k} += 'x' == {c};
    }}
    int {lim} = {k} + 0;
    int {acc} = 3 * {lim};
    if ({lim} < {acc}) {{
        return {acc} + 0;
    }}
    return {lim};
}}
""",
    ]


def _map_member(names, pad):
    m, key, hits, fallback, miss, fn = names
    return f"""
int {fn}(std::map<std::string, int>& {m}, const std::string& {key}) {{
    int {hits} = 0;
    int {fallback} = -1;
    if ({m}.count({key}) > 0) {{
        {hits} = {m}[{key}];
    }} else {{
        {hits} = {fallback};
    }}
{pad}    return {hits};
}}
"""


def _map_decoys(names):
    m, key, hits, fallback, miss, fn = names
    return [
        f"""
int {fn}(std::map<std::string, int>& {m}, const std::string& {key}) {{
    int {hits} = -1;
    int {fallback} = {m}.count({key});
    if (0 < {fallback}) {{
        {fallback} = {m}[{key}];
    }} else {{
        {fallback} = {hits};
    }}
    return 0 + {fallback};
}}
""",
        f"""
int {fn}(std::map<std::string, int>& {m}, const std::string& {key}) {{
    if (0 == {m}.count({key})) {{
        int {hits} = -1;
        return {hits};
    }} else {{
        int {fallback} = 0;
        {fallback} += {m}[{key}];
        return {fallback};
    }}
}}
""",
        f"""
int {fn}(std::map<std::string, int>& {m}, const std::string& {key}) {{
    int {fallback} = {m}[{key}] + {m}.count({key});
    int {hits} = 0;
    if ({fallback} != {hits}) {{
        {hits} = {fallback} - 1;
    }} else {{
        {hits} = 0;
    }}
    return {hits};
}}
""",
    ]


def _vector_fix(source, names):
    v, n, i, j, t, fn = names
    return source.replace(
        f"std::vector<int> {v};", f"std::vector<int> {v};\n    {v}.reserve({n});", 1
    )


def _copy_fix(source, names):
    s, k, acc, c, lim, fn = names
    return source.replace(f"(std::string {s},", f"(const std::string& {s},", 1)


def _map_fix(source, names):
    m, key, hits, fallback, miss, fn = names
    return source.replace(
        f"{hits} = {m}[{key}];", f"{hits} = {m}.find({key})->second;", 1
    )


_TEMPLATES = {
    "Vector": (_vector_member, _vector_decoys, _vector_fix),
    "Copy": (_copy_member, _copy_decoys, _copy_fix),
    "Map": (_map_member, _map_decoys, _map_fix),
}

_FILLER_SHAPES = [
    """
int {fn}(int {a}, int {b}) {{
    int {r} = {a};
    while ({r} > {b}) {{
        {r} -= {b} + 1;
    }}
    return {r};
}}
""",
    """
double {fn}(double {a}) {{
    if ({a} < 0.0) {{
        return -{a};
    }}
    double {r} = {a} * 0.5;
    double {b} = {r} + 1.0;
    return {r} / {b};
}}
""",
    """
long {fn}(long {a}, long {b}, long {r}) {{
    switch ({a} % 4) {{
        case 0: return {b};
        case 1: return {r};
        case 2: return {a} + {b};
        default: break;
    }}
    return {a} - {r};
}}
""",
    """
unsigned {fn}(unsigned {a}) {{
    unsigned {r} = 1;
    unsigned {b} = {a};
    do {{
        {r} = {r} * 2 + 1;
        {b} = {b} / 2;
    }} while ({b} > 0);
    return {r};
}}
""",
    """
bool {fn}(int {a}, int {b}, int {r}) {{
    if ({a} == {b}) {{
        return true;
    }}
    if ({b} == {r}) {{
        return false;
    }}
    int {c} = {a} + {b} * {r};
    return {c} % 2 == 0;
}}
""",
]


def _record_from_source(source: str, ident: str) -> FunctionRecord:
    records = extract_functions(source, f"{ident}.cc")
    if len(records) != 1:
        raise ValueError(f"template for {ident} produced {len(records)} functions")
    return replace(annotate_types(records[0]), id=ident)


def _pick_names(rng: random.Random, count: int, fn_name: str) -> tuple:
    return tuple(rng.sample(_NAME_POOL, count - 1)) + (fn_name,)


def _synthesize(
    category_counts: Optional[Mapping[str, int]],
    distractor_count: int,
    seed: int,
) -> tuple[list[FunctionRecord], list[EvalQuery], list[EvalQuery], dict[str, str]]:
    counts = dict(category_counts or DEFAULT_CATEGORY_COUNTS)
    for cat, n in counts.items():
        if cat not in _TEMPLATES:
            raise ValueError(f"no template for category {cat!r}")
        if n < 2:
            raise ValueError("each category needs at least 2 members")
    rng = random.Random(seed)

    database: list[FunctionRecord] = []
    fn_queries: list[EvalQuery] = []
    diff_queries: list[EvalQuery] = []
    diff_texts: dict[str, str] = {}
    decoy_budget = 0

    for cat in sorted(counts):
        member_tpl, decoy_tpl, fix = _TEMPLATES[cat]
        n = counts[cat]
        member_ids = [f"{cat.lower()}_{i}" for i in range(n)]
        for i, ident in enumerate(member_ids):
            names = _pick_names(rng, 6, f"{cat.lower()}_fn_{i}")
            pad_lines = "".join(
                f"    int {name}_{p} = {p};\n"
                for p, name in enumerate(rng.sample(_NAME_POOL, i))
            )
            source = member_tpl(names, pad_lines)
            database.append(_record_from_source(source, ident))
            # The matching diff pairs this "before" function with its fix;
            # the diff's relevant set is the whole category, the before
            # function included, since the diff itself is not a database row.
            # Function-scoped diffs keep the entire function as context, the
            # same unit the example store works in.
            diff_id = f"diff_{ident}"
            diff_texts[diff_id] = make_diff(
                source, fix(source, names), context=len(source.splitlines()), path=ident
            )
            diff_queries.append(
                EvalQuery(diff_id, QueryKind.CODE_DIFF, frozenset(member_ids))
            )
        for ident in member_ids:
            siblings = frozenset(m for m in member_ids if m != ident)
            fn_queries.append(EvalQuery(ident, QueryKind.FUNCTION, siblings))
        decoys = decoy_tpl(_pick_names(rng, 6, f"{cat.lower()}_decoy"))
        for j, src in enumerate(decoys):
            if decoy_budget >= distractor_count:
                break
            database.append(_record_from_source(src, f"decoy_{cat.lower()}_{j}"))
            decoy_budget += 1

    filler_needed = distractor_count - decoy_budget
    for f in range(filler_needed):
        shape = _FILLER_SHAPES[f % len(_FILLER_SHAPES)]
        a, b, r, c = rng.sample(_NAME_POOL, 4)
        src = shape.format(fn=f"filler_fn_{f}", a=a, b=b, r=r, c=c)
        database.append(_record_from_source(src, f"filler_{f:02d}"))

    return database, fn_queries, diff_queries, diff_texts


def build_seeded_corpus(
    category_counts: Optional[Mapping[str, int]] = None,
    distractor_count: int = DEFAULT_DISTRACTORS,
    seed: int = 0,
) -> tuple[list[FunctionRecord], list[EvalQuery]]:
    """Synthesize (database, queries) with ground-truth relevance.

    Each category contributes `count` sibling variants; every sibling also
    serves as a query whose relevant set is the other siblings. Distractors
    are the per-category scrambled decoys plus generic fillers, and never
    appear in a relevant set.
    """
    database, fn_queries, _, _ = _synthesize(category_counts, distractor_count, seed)
    return database, fn_queries


def build_seeded_corpus_with_diffs(
    category_counts: Optional[Mapping[str, int]] = None,
    distractor_count: int = DEFAULT_DISTRACTORS,
    seed: int = 0,
) -> tuple[list[FunctionRecord], list[EvalQuery], list[EvalQuery], dict[str, str]]:
    """Like build_seeded_corpus, plus one diff query per category member.

    Returns (database, function_queries, diff_queries, diff_texts) where
    diff_texts maps each diff query id to its unified diff.
    """
    return _synthesize(category_counts, distractor_count, seed)


# ---------------------------------------------------------- driving a run

@dataclass(frozen=True)
class PreparedQuery:
    """One query lowered to what retrieval actually consumes."""

    query: EvalQuery
    vector: BowVector                 # goes to the ANN index
    record: FunctionRecord            # scored by the syntactic re-ranker
    exclude: frozenset[str]           # ids dropped from results (self-hits)


def prepare_function_queries(
    database: Sequence[FunctionRecord], queries: Sequence[EvalQuery]
) -> list[PreparedQuery]:
    by_id = {r.id: r for r in database}
    out = []
    for q in queries:
        record = by_id[q.query_id]
        out.append(
            PreparedQuery(q, embed_tokens(record.tokens), record, frozenset({q.query_id}))
        )
    return out


def snippet_record(text: str, ident: str = "query") -> FunctionRecord:
    """Wrap free-standing code in an annotated query record.

    Annotation matters: database vectors embed annotated tokens (type
    names kept literal), so queries must pass through the same pipeline
    or their vectors live in a different vocabulary.
    """
    return annotate_types(
        FunctionRecord(
            id=ident,
            name=ident,
            file=f"{ident}.cc",
            span=(1, 1),
            tokens=tuple(lex(text)),
        )
    )


def diff_query_record(diff_text: str, ident: str = "query") -> FunctionRecord:
    """Annotated record over the before side of a unified diff."""
    return snippet_record("\n".join(diff_before_lines(diff_text)), ident)


def prepare_diff_queries(
    queries: Sequence[EvalQuery], diff_texts: Mapping[str, str]
) -> list[PreparedQuery]:
    """Lower diff queries: embed the before side, re-rank on its tokens.

    Everything derives from the diff text alone; the database rows the
    diff came from are never consulted.
    """
    out = []
    for q in queries:
        record = diff_query_record(diff_texts[q.query_id], q.query_id)
        out.append(PreparedQuery(q, embed_tokens(record.tokens), record, frozenset()))
    return out


def build_eval_index(
    database: Sequence[FunctionRecord], config: IndexConfig = IndexConfig()
) -> VectorIndex:
    entries = [(r.id, embed_tokens(r.tokens), None) for r in database]
    return build_index(entries, config)


def retrieve(
    index: VectorIndex,
    database_by_id: Mapping[str, FunctionRecord],
    prepared: PreparedQuery,
    k: int,
    ranked: bool,
    rerank_pool: int = DEFAULT_RERANK_POOL,
    exact: bool = True,
) -> list[str]:
    """Top-k ids for one prepared query, excluded ids dropped.

    Unranked returns raw bag-of-words nearest neighbors; ranked rescoring
    pulls a wider pool first, then orders it by syntactic score.
    """
    pool = max(rerank_pool, k + len(prepared.exclude) + 1)
    hits = [
        (ident, dist)
        for ident, dist in index.query_topk(prepared.vector, k=pool, exact=exact)
        if ident not in prepared.exclude
    ]
    if not ranked:
        return [ident for ident, _ in hits[:k]]
    pairs = [(database_by_id[ident], dist) for ident, dist in hits]
    return [rc.id for rc in rank(prepared.record, pairs)[:k]]


def run_eval_prepared(
    database: Sequence[FunctionRecord],
    prepared: Sequence[PreparedQuery],
    ks: Sequence[int] = DEFAULT_KS,
    ranked: bool = True,
    rerank_pool: int = DEFAULT_RERANK_POOL,
    exact: bool = True,
) -> dict[int, float]:
    """MAP@k for each k under one retrieval configuration."""
    index = build_eval_index(database)
    by_id = {r.id: r for r in database}
    max_k = max(ks)
    rankings = {
        p.query.query_id: retrieve(index, by_id, p, max_k, ranked, rerank_pool, exact)
        for p in prepared
    }
    queries = [p.query for p in prepared]
    return {k: map_at_k(queries, rankings, k) for k in ks}


def run_eval(
    database: Sequence[FunctionRecord],
    queries: Sequence[EvalQuery],
    ks: Sequence[int] = DEFAULT_KS,
    ranked: bool = True,
    rerank_pool: int = DEFAULT_RERANK_POOL,
    exact: bool = True,
) -> dict[int, float]:
    """MAP@k over function queries drawn from the database itself."""
    prepared = prepare_function_queries(database, queries)
    return run_eval_prepared(database, prepared, ks, ranked, rerank_pool, exact)
