#!/usr/bin/env python3
"""Reproduce the retrieval comparison table on the seeded corpus.

For each seed this builds the planted Copy/Map/Vector corpus, runs both
query modes (whole functions and unified diffs) with and without the
syntactic re-ranker, and prints MAP@k per configuration. The expected
direction: ranked beats unranked, and diff queries do at least as well
as function queries at k=5.

Usage:
    python3 scripts/run_retrieval_eval.py --seeds 0,1,2
"""

from __future__ import annotations

import argparse
import time

from perfopt.evaluation import (
    build_seeded_corpus_with_diffs,
    prepare_diff_queries,
    prepare_function_queries,
    run_eval_prepared,
)


def parse_args() -> argparse.Namespace:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", default="0,1,2", help="comma-separated corpus seeds")
    ap.add_argument("--ks", default="5,10,20", help="comma-separated cutoffs")
    ap.add_argument("--distractors", type=int, default=48)
    return ap.parse_args()


def main() -> int:
    args = parse_args()
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    ks = [int(s) for s in args.ks.split(",") if s.strip()]

    header = f"{'seed':>4}  {'queries':<8} {'ranked':<6}" + "".join(
        f"  MAP@{k:<4}" for k in ks
    )
    print(header)
    print("-" * len(header))

    trend_hits = 0
    for seed in seeds:
        t0 = time.time()
        database, fn_queries, diff_queries, diff_texts = build_seeded_corpus_with_diffs(
            distractor_count=args.distractors, seed=seed
        )
        prepared = {
            "Function": prepare_function_queries(database, fn_queries),
            "CodeDiff": prepare_diff_queries(diff_queries, diff_texts),
        }
        scores = {}
        for kind, pq in prepared.items():
            for ranked in (False, True):
                scores[kind, ranked] = run_eval_prepared(database, pq, ks, ranked=ranked)
                cells = "".join(f"  {scores[kind, ranked][k]:<8.4f}" for k in ks)
                print(f"{seed:>4}  {kind:<8} {'yes' if ranked else 'no':<6}{cells}")
        k0 = ks[0]
        ranked_wins = scores["Function", True][k0] > scores["Function", False][k0]
        diff_holds = scores["CodeDiff", True][k0] >= scores["Function", True][k0]
        if ranked_wins and diff_holds:
            trend_hits += 1
        print(
            f"      trend: ranked>unranked={ranked_wins}"
            f" diff>=fn={diff_holds} ({time.time() - t0:.1f}s)"
        )

    print(f"\ntrend held on {trend_hits}/{len(seeds)} seeds")
    return 0 if trend_hits * 3 >= len(seeds) * 2 else 1


if __name__ == "__main__":
    raise SystemExit(main())
