"""Command line front end: one subcommand per pipeline stage.

Output is machine-readable JSON on stdout (sorted keys, so identical
inputs give identical bytes); --pretty switches to indented JSON, or a
text table where one is more useful. Exit codes: 0 success, 1 domain
error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from . import PerfOptError
from .bow import embed_tokens
from .completion import CompletionClient, HttpClient, ReplayClient
from .config import PipelineConfig, load_config
from .editgen import (
    DEFAULT_INSTRUCTION,
    NoViableProposal,
    PromptKind,
    PromptRecipe,
    generate_proposals,
    react_loop,
    select_conservative,
)
from .evaluation import (
    build_seeded_corpus_with_diffs,
    diff_query_record,
    prepare_diff_queries,
    prepare_function_queries,
    run_eval_prepared,
    snippet_record,
)
from .extract import extract_file, read_records, write_records
from .index import VectorIndex, build_index
from .mining import (
    build_examples,
    ingest_curated,
    read_examples,
    scan_commits,
    write_examples,
)
from .profile import (
    PruneConfig,
    apply_shared_table,
    attribute_and_report,
    load_call_tree,
    parse_folded_stacks,
)
from .ranking import rank
from .verify import (
    BenchResult,
    EditOutcome,
    OutcomeLedger,
    OutcomeStatus,
    check_valid,
    measure_speedup,
)

_RECIPES = {
    "zero-shot": PromptKind.ZEROSHOT,
    "few-shot": PromptKind.FEWSHOT,
    "cot": PromptKind.COT,
    "react": PromptKind.REACT,
}


def _emit(payload, pretty: bool) -> None:
    print(json.dumps(payload, sort_keys=True, indent=2 if pretty else None))


def _cfg(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return PipelineConfig()


# ------------------------------------------------------------ subcommands

def _cmd_mine(args) -> dict:
    hits = scan_commits(args.repo, rules=args.rules)
    if args.curated:
        hits = list(hits) + list(ingest_curated(args.curated, args.repo))
    examples = build_examples(hits)
    write_examples(args.out, examples)
    return {"hits": len(hits), "examples": len(examples), "out": args.out}


def _cmd_extract(args) -> dict:
    records = []
    for src in args.src:
        records.extend(extract_file(src))
    if args.out:
        write_records(records, args.out)
        return {"functions": len(records), "out": args.out}
    return {"functions": len(records), "records": [r.to_json() for r in records]}


def _cmd_prune(args) -> dict:
    cfg = _cfg(args).prune_config()
    if args.cmin is not None or args.cmax is not None or args.shared_threshold is not None:
        cfg = PruneConfig(
            c_min=args.cmin if args.cmin is not None else cfg.c_min,
            c_max=args.cmax if args.cmax is not None else cfg.c_max,
            shared_binary_threshold=(
                args.shared_threshold
                if args.shared_threshold is not None
                else cfg.shared_binary_threshold
            ),
        )
    if args.profile.endswith(".json"):
        tree = load_call_tree(args.profile)
    else:
        tree = parse_folded_stacks(Path(args.profile).read_text(encoding="utf-8"))
    if args.shared_table:
        with open(args.shared_table, encoding="utf-8") as fh:
            apply_shared_table(tree, json.load(fh), cfg)
    report = attribute_and_report(tree, cfg)
    return {"costly": [{"fn": fn, "pct": pct} for fn, pct in report]}


def _index_entries(records):
    return [
        (
            r.id,
            embed_tokens(r.tokens),
            r.cost.cycles_pct if r.cost is not None else None,
        )
        for r in records
    ]


def _cmd_index(args) -> dict:
    cfg = _cfg(args).index_config()
    records = read_records(args.records)
    index = build_index(_index_entries(records), cfg)
    index.save(args.out)
    return {
        "indexed": len(index),
        "excluded": sorted(index.excluded_ids),
        "partitions": len(index.centroids),
        "out": args.out,
    }


def _query_vector(args):
    if args.diff:
        record = diff_query_record(Path(args.diff).read_text(), "query")
    else:
        record = snippet_record(Path(args.source).read_text(), "query")
    return record, embed_tokens(record.tokens)


def _cmd_query(args) -> dict:
    index = VectorIndex.load(args.index)
    _, vec = _query_vector(args)
    hits = index.query_topk(vec, k=args.k, exact=args.exact)
    return {"hits": [{"id": i, "distance": d} for i, d in hits]}


def _cmd_rank(args) -> dict:
    cfg = _cfg(args)
    records = read_records(args.records)
    by_id = {r.id: r for r in records}
    index = build_index(_index_entries(records), cfg.index_config())
    record, vec = _query_vector(args)
    pool = max(cfg.rerank_pool, args.k)
    hits = index.query_topk(vec, k=pool, exact=args.exact)
    ranked = rank(record, [(by_id[i], d) for i, d in hits])
    return {"ranked": [rc.to_json() for rc in ranked[: args.k]]}


def _completion_client(args, cfg: PipelineConfig) -> CompletionClient:
    replay = args.replay or cfg.replay_path
    if replay:
        return ReplayClient(replay)
    endpoint = args.endpoint or cfg.completion_endpoint
    if endpoint:
        return HttpClient(endpoint)
    raise PerfOptError("no completion source: pass --replay or --endpoint")


def _cmd_gen_edit(args) -> dict:
    cfg = _cfg(args)
    client = _completion_client(args, cfg)
    target_code = Path(args.target).read_text()
    kind = _RECIPES[args.recipe]
    shots = tuple(read_examples(args.shots)) if args.shots else ()
    recipe = PromptRecipe(kind=kind, shots=shots, instruction_template=DEFAULT_INSTRUCTION)
    if kind is PromptKind.REACT:
        # ReAct is a single interactive session, not independent samples.
        workspace = {Path(args.target).name: target_code}
        proposals = [
            react_loop(
                client,
                workspace,
                target=Path(args.target).name,
                category=args.category,
                max_steps=args.max_steps,
                recipe=recipe,
            )
        ]
    else:
        proposals = generate_proposals(
            client, recipe, target_code, args.category, samples=args.samples
        )
    try:
        selected = select_conservative(proposals)
        selected_idx: Optional[int] = selected.sample_idx
        proposals = [selected if p.sample_idx == selected.sample_idx else p for p in proposals]
        edited = selected.edited_text
    except NoViableProposal:
        selected_idx = None
        edited = ""
    return {
        "proposals": [p.to_json() for p in proposals],
        "selected": selected_idx,
        "edited_text": edited,
    }


def _cmd_verify(args) -> dict:
    cfg = _cfg(args)
    outcome = check_valid(
        args.workspace,
        build_cmd=args.build_cmd or cfg.build_cmd,
        test_cmd=args.test_cmd or cfg.test_cmd,
        timeout_s=args.timeout,
    )
    return {"outcome": outcome.to_json() if outcome else None}


def _cmd_bench(args) -> dict:
    cfg = _cfg(args)
    baseline = args.baseline_cmd or cfg.bench_baseline_cmd
    if not baseline:
        raise PerfOptError("bench needs --baseline-cmd (or bench_baseline_cmd in config)")
    result: BenchResult = measure_speedup(
        baseline_cmd=baseline,
        edited_cmd=args.edited_cmd or cfg.bench_edited_cmd,
        runs=args.runs,
        cwd=args.cwd,
    )
    return result.to_json()


def _cmd_eval_map(args) -> dict:
    ks = tuple(int(x) for x in args.k.split(","))
    rows = []
    database, fn_q, diff_q, diff_texts = build_seeded_corpus_with_diffs(seed=args.seed)
    prepared = {
        "Function": prepare_function_queries(database, fn_q),
        "CodeDiff": prepare_diff_queries(diff_q, diff_texts),
    }
    for query_kind, prep in prepared.items():
        for ranked in (False, True):
            scores = run_eval_prepared(database, prep, ks=ks, ranked=ranked)
            rows.append(
                {
                    "model": "BOW",
                    "query": query_kind,
                    "ranked": ranked,
                    "map": {str(k): scores[k] for k in ks},
                }
            )
    return {"ks": list(ks), "rows": rows, "seed": args.seed}


def _render_eval_table(payload: dict) -> str:
    ks = payload["ks"]
    header = ["Model", "Query", "Ranked"] + [f"MAP@{k}" for k in ks]
    lines = ["  ".join(f"{h:<9}" for h in header).rstrip()]
    for row in payload["rows"]:
        cells = [row["model"], row["query"], "yes" if row["ranked"] else "no"]
        cells += [f"{row['map'][str(k)]:.4f}" for k in ks]
        lines.append("  ".join(f"{c:<9}" for c in cells).rstrip())
    return "\n".join(lines)


def _cmd_outcome(args) -> dict:
    ledger = OutcomeLedger(args.ledger)
    if args.action == "record":
        if not args.edit_id or not args.status:
            raise PerfOptError("outcome record needs --edit-id and --status")
        status = OutcomeStatus(args.status)
        entry = ledger.record(args.edit_id, EditOutcome(status, args.note))
        return {"recorded": entry}
    summary = ledger.summarize()
    return {"entries": len(ledger.entries()), "percent": summary}


# ----------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perfopt", description="Profile-guided anti-pattern optimization pipeline"
    )
    parser.add_argument("--config", help="pipeline config file (.toml or .json)")
    parser.add_argument("--pretty", action="store_true", help="indent JSON output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", help="mine performance commits into examples")
    p.add_argument("--repo", required=True)
    p.add_argument("--rules", help="keyword/regex rules file")
    p.add_argument("--curated", help="curated commit feed file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mine)

    p = sub.add_parser("extract", help="extract functions from C++ sources")
    p.add_argument("--src", nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("prune", help="profile-driven costly-function report")
    p.add_argument("--profile", required=True, help="folded stacks file")
    p.add_argument("--cmin", type=float)
    p.add_argument("--cmax", type=float)
    p.add_argument("--shared-threshold", type=int)
    p.add_argument("--shared-table", help="JSON map of fn name -> binary count")
    p.set_defaults(func=_cmd_prune)

    p = sub.add_parser("index", help="build and save the retrieval index")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("query", help="ANN top-k against a saved index")
    p.add_argument("--index", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--source", help="file with a code snippet query")
    src.add_argument("--diff", help="file with a unified diff query")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--exact", action="store_true")
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("rank", help="retrieve then re-rank by syntactic score")
    p.add_argument("--records", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--source")
    src.add_argument("--diff")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--exact", action="store_true")
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("gen-edit", help="sample edit proposals and select one")
    p.add_argument("--target", required=True, help="file to optimize")
    p.add_argument("--category", default="Other")
    p.add_argument("--recipe", choices=sorted(_RECIPES), default="zero-shot")
    p.add_argument("--samples", type=int, default=5)
    p.add_argument("--max-steps", type=int, default=8)
    p.add_argument("--shots", help="examples JSONL for few-shot")
    p.add_argument("--replay", help="replay fixture dir or file")
    p.add_argument("--endpoint", help="completion service URL")
    p.set_defaults(func=_cmd_gen_edit)

    p = sub.add_parser("verify", help="build/test an edited workspace")
    p.add_argument("--workspace", required=True)
    p.add_argument("--build-cmd")
    p.add_argument("--test-cmd")
    p.add_argument("--timeout", type=float, default=300.0)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("bench", help="median-of-runs speedup measurement")
    p.add_argument("--baseline-cmd")
    p.add_argument("--edited-cmd")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--cwd")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("eval", help="retrieval evaluation")
    eval_sub = p.add_subparsers(dest="eval_command", required=True)
    pm = eval_sub.add_parser("map", help="MAP@K table on the seeded corpus")
    pm.add_argument("--k", default="5,10,20")
    pm.add_argument("--seed", type=int, default=0)
    pm.set_defaults(func=_cmd_eval_map)

    p = sub.add_parser("outcome", help="record or summarize edit outcomes")
    p.add_argument("action", choices=["record", "summary"])
    p.add_argument("--ledger", required=True)
    p.add_argument("--edit-id")
    p.add_argument("--status", choices=[s.value for s in OutcomeStatus])
    p.add_argument("--note", default="")
    p.set_defaults(func=_cmd_outcome)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        payload = args.func(args)
    except (PerfOptError, OSError, ValueError, KeyError) as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 1
    if args.pretty and args.command == "eval":
        print(_render_eval_table(payload))
    else:
        _emit(payload, args.pretty)
    return 0


if __name__ == "__main__":
    sys.exit(main())
