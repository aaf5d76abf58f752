"""CodeBLEU-style edit similarity.

Equal-weight mean of four signals between an original function and an
edited version of it:

  1. BLEU over raw token texts (comments dropped)
  2. keyword-weighted unigram BLEU: C++ keywords and builtin type names
     count five to one against everything else
  3. LCS match ratio over the token-kind sequences, a cheap stand-in for
     AST subtree matching
  4. overlap of def-use pairs, a cheap stand-in for dataflow matching

A text that fails to lex scores 0 against anything: proposals that break
the token stream should never look attractive.
"""

from __future__ import annotations

import math

from . import PerfOptError
from .extract import find_declarations
from .lexer import BUILTIN_TYPES, Token, TokenKind, lex
from .ranking import bleu, lcs_length

KEYWORD_WEIGHT = 5.0


def _code_tokens(source: str) -> list[Token]:
    return [t for t in lex(source) if t.kind is not TokenKind.COMMENT]


def _token_weight(tok: Token) -> float:
    if tok.kind is TokenKind.KEYWORD or tok.text in BUILTIN_TYPES:
        return KEYWORD_WEIGHT
    return 1.0


def keyword_weighted_bleu(ref: list[Token], cand: list[Token]) -> float:
    """Unigram precision with keyword weighting and add-one smoothing."""
    if not cand or not ref:
        return 0.0
    ref_counts: dict[str, int] = {}
    for t in ref:
        ref_counts[t.text] = ref_counts.get(t.text, 0) + 1
    cand_counts: dict[str, tuple[int, float]] = {}
    for t in cand:
        n, w = cand_counts.get(t.text, (0, _token_weight(t)))
        cand_counts[t.text] = (n + 1, w)
    matched = 0.0
    total = 0.0
    for text, (n, w) in cand_counts.items():
        matched += min(n, ref_counts.get(text, 0)) * w
        total += n * w
    precision = (matched + 1.0) / (total + 1.0)
    if len(cand) > len(ref):
        bp = 1.0
    else:
        bp = math.exp(1.0 - len(ref) / len(cand))
    return bp * precision


def kind_sequence_ratio(ref: list[Token], cand: list[Token]) -> float:
    """LCS over token-kind sequences, scaled by the longer side."""
    if not ref and not cand:
        return 1.0
    if not ref or not cand:
        return 0.0
    a = [t.kind.value for t in ref]
    b = [t.kind.value for t in cand]
    return lcs_length(a, b) / max(len(a), len(b))


def def_use_pairs(tokens: list[Token]) -> frozenset[tuple[str, str, int]]:
    """(base_type, positional_var, use_ordinal) triples.

    Variables are renamed by declaration order so the pairs survive
    alpha-renaming, mirroring what a dataflow match would tolerate.
    """
    decls: dict[str, str] = {}
    for var, types in find_declarations(tokens):
        if var and types and var not in decls:
            decls[var] = types[0]
    alpha = {var: f"var{i}" for i, var in enumerate(decls)}
    uses: dict[str, int] = {}
    pairs = set()
    seen_decl: set[str] = set()
    for tok in tokens:
        if tok.kind is not TokenKind.IDENTIFIER or tok.text not in decls:
            continue
        name = tok.text
        if name not in seen_decl:
            seen_decl.add(name)  # first occurrence is the definition site
            continue
        uses[name] = uses.get(name, 0) + 1
        pairs.add((decls[name], alpha[name], uses[name]))
    return frozenset(pairs)


def def_use_overlap(ref: list[Token], cand: list[Token]) -> float:
    a = def_use_pairs(ref)
    b = def_use_pairs(cand)
    if not a and not b:
        return 1.0
    union = a | b
    return len(a & b) / len(union)


def codebleu(original: str, edited: str) -> float:
    """Similarity of edited code to its original, in [0,1]."""
    try:
        ref = _code_tokens(original)
        cand = _code_tokens(edited)
    except PerfOptError:
        return 0.0
    if not ref and not cand:
        return 1.0
    b = bleu([t.text for t in ref], [t.text for t in cand])
    w = keyword_weighted_bleu(ref, cand)
    k = kind_sequence_ratio(ref, cand)
    d = def_use_overlap(ref, cand)
    return (b + w + k + d) / 4.0
