"""Partitioned nearest-neighbor index over code embeddings.

Spherical k-means splits the corpus into inverted lists; a query scans only
the nprobe partitions whose centroids sit closest, trading a little recall
for a large scan reduction. An exhaustive path stays available for oracle
comparisons and tiny corpora. Results are (id, cosine distance) pairs,
ascending, so distance 0 means an identical direction.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import PerfOptError
from .bow import BowVector


class EmptyIndex(PerfOptError):
    """No usable vectors to build or query."""


class ZeroQueryVector(PerfOptError):
    """Query vector has no weight anywhere."""


@dataclass(frozen=True)
class IndexConfig:
    num_partitions: int = 16
    nprobe: int = 4
    top_k: int = 500
    min_cost_pct: float = 0.01
    seed: int = 0
    max_iters: int = 25

    def __post_init__(self):
        if self.num_partitions < 1 or self.nprobe < 1:
            raise ValueError("num_partitions and nprobe must be >= 1")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.min_cost_pct < 0:
            raise ValueError("min_cost_pct must be >= 0")

    def to_json(self) -> dict:
        return {
            "num_partitions": self.num_partitions,
            "nprobe": self.nprobe,
            "top_k": self.top_k,
            "min_cost_pct": self.min_cost_pct,
            "seed": self.seed,
            "max_iters": self.max_iters,
        }


# An index entry: (function id, embedding, inclusive cycles percent or None
# when no profile covers the function).
IndexEntry = tuple[str, BowVector, Optional[float]]


def _sparse_mean(vectors: Sequence[BowVector]) -> BowVector:
    sums: dict[str, float] = {}
    for vec in vectors:
        for term, w in vec.counts.items():
            sums[term] = sums.get(term, 0.0) + w
    n = len(vectors)
    return BowVector({t: v / n for t, v in sums.items()})


class VectorIndex:
    def __init__(
        self,
        ids: list[str],
        vectors: list[BowVector],
        costs: list[Optional[float]],
        centroids: list[BowVector],
        lists: list[list[int]],
        config: IndexConfig,
        excluded_ids: Optional[list[str]] = None,
    ):
        self.ids = ids
        self.vectors = vectors
        self.costs = costs
        self.centroids = centroids
        self.lists = lists
        self.config = config
        self.excluded_ids = excluded_ids or []

    def __len__(self) -> int:
        return len(self.ids)

    def _ranked(self, query: BowVector, candidates, k: int) -> list[tuple[str, float]]:
        scored = [(query.distance(self.vectors[i]), self.ids[i]) for i in candidates]
        scored.sort()
        return [(ident, dist) for dist, ident in scored[:k]]

    def query_topk(
        self, query: BowVector, k: int = 10, exact: bool = False
    ) -> list[tuple[str, float]]:
        """Top-k (id, cosine distance) pairs, nearest first; ties by id."""
        if query.is_zero:
            raise ZeroQueryVector("query embeds to the zero vector")
        if not self.ids:
            raise EmptyIndex("index holds no vectors")
        if exact or not self.centroids:
            return self._ranked(query, range(len(self.vectors)), k)
        ranked_parts = sorted(
            range(len(self.centroids)),
            key=lambda p: (query.distance(self.centroids[p]), p),
        )
        candidates: list[int] = []
        for p in ranked_parts[: self.config.nprobe]:
            candidates.extend(self.lists[p])
        if not candidates:
            return self._ranked(query, range(len(self.vectors)), k)
        return self._ranked(query, candidates, k)

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "ids": self.ids,
            "vectors": [v.to_json() for v in self.vectors],
            "costs": self.costs,
            "centroids": [c.to_json() for c in self.centroids],
            "lists": self.lists,
            "excluded_ids": self.excluded_ids,
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @staticmethod
    def load(path: str | Path) -> "VectorIndex":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        return VectorIndex(
            ids=list(obj["ids"]),
            vectors=[BowVector.from_json(v) for v in obj["vectors"]],
            costs=list(obj["costs"]),
            centroids=[BowVector.from_json(c) for c in obj["centroids"]],
            lists=[list(part) for part in obj["lists"]],
            config=IndexConfig(**obj["config"]),
            excluded_ids=list(obj.get("excluded_ids", [])),
        )


def build_index(
    entries: Sequence[IndexEntry], config: IndexConfig = IndexConfig()
) -> VectorIndex:
    """Cluster embeddings into inverted lists.

    Entries whose cost sits below min_cost_pct are excluded (cold functions
    are not worth retrieving); entries with no cost at all stay in. Zero
    vectors cannot participate in cosine search and are excluded likewise.
    Every exclusion is recorded by id. Nothing usable raises EmptyIndex.
    """
    excluded: list[str] = []
    kept: list[tuple[str, BowVector, Optional[float]]] = []
    for ident, vec, cost in entries:
        if vec.is_zero or (cost is not None and cost < config.min_cost_pct):
            excluded.append(ident)
        else:
            kept.append((ident, vec, cost))
    if not kept:
        raise EmptyIndex("no entries with nonzero vectors above the cost floor")

    ids = [ident for ident, _, _ in kept]
    vectors = [vec for _, vec, _ in kept]
    costs = [cost for _, _, cost in kept]

    k = min(config.num_partitions, len(vectors))
    rng = random.Random(config.seed)
    centroids = [vectors[i] for i in rng.sample(range(len(vectors)), k)]
    assignment = [-1] * len(vectors)

    for _ in range(config.max_iters):
        changed = False
        for vi, vec in enumerate(vectors):
            best = min(range(k), key=lambda p: (vec.distance(centroids[p]), p))
            if assignment[vi] != best:
                assignment[vi] = best
                changed = True
        if not changed:
            break
        members: list[list[BowVector]] = [[] for _ in range(k)]
        for vi, part in enumerate(assignment):
            members[part].append(vectors[vi])
        for p in range(k):
            if members[p]:
                centroids[p] = _sparse_mean(members[p])
            else:
                # Re-seed an empty partition so the partition count holds.
                centroids[p] = vectors[rng.randrange(len(vectors))]

    lists: list[list[int]] = [[] for _ in range(k)]
    for vi, part in enumerate(assignment):
        lists[part].append(vi)
    return VectorIndex(ids, vectors, costs, centroids, lists, config, excluded)
