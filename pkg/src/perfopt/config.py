"""Pipeline configuration: one file drives every subcommand.

TOML and JSON are both accepted; the suffix decides the parser. Unknown
keys fail loudly because a silently ignored typo in a threshold name is
worse than an error. Paths named by the config must exist at load time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Union

try:
    import tomllib
except ModuleNotFoundError:  # 3.10 and earlier
    import tomli as tomllib

from .index import IndexConfig
from .profile import PruneConfig


@dataclass(frozen=True)
class PipelineConfig:
    # corpus and profile inputs
    corpus_paths: tuple[str, ...] = ()
    profile_path: Optional[str] = None
    # pruning thresholds
    c_min: float = 0.1
    c_max: float = 25.0
    shared_binary_threshold: int = 10
    # retrieval index
    num_partitions: int = 16
    nprobe: int = 4
    top_k: int = 500
    min_cost_pct: float = 0.01
    index_seed: int = 0
    # ranking
    ranked: bool = True
    rerank_pool: int = 50
    # edit generation
    recipe: str = "zero-shot"
    samples: int = 5
    completion_endpoint: Optional[str] = None
    replay_path: Optional[str] = None
    # verification and benchmarking
    build_cmd: Optional[str] = None
    test_cmd: Optional[str] = None
    bench_baseline_cmd: Optional[str] = None
    bench_edited_cmd: Optional[str] = None
    ledger_path: str = "outcomes.jsonl"

    def __post_init__(self):
        # Constructing the sub-configs runs their invariant checks.
        self.prune_config()
        self.index_config()
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.rerank_pool < 1:
            raise ValueError("rerank_pool must be >= 1")

    def prune_config(self) -> PruneConfig:
        return PruneConfig(
            c_min=self.c_min,
            c_max=self.c_max,
            shared_binary_threshold=self.shared_binary_threshold,
        )

    def index_config(self) -> IndexConfig:
        return IndexConfig(
            num_partitions=self.num_partitions,
            nprobe=self.nprobe,
            top_k=self.top_k,
            min_cost_pct=self.min_cost_pct,
            seed=self.index_seed,
        )

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)} | {
            "corpus_paths": list(self.corpus_paths)
        }


def _parse(path: Path) -> dict:
    if path.suffix == ".toml":
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    if path.suffix == ".json":
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    raise ValueError(f"config must be .toml or .json, got {path.suffix!r}")


def load_config(path: Union[str, Path]) -> PipelineConfig:
    """Read, validate, and path-check a pipeline config file."""
    path = Path(path)
    raw = _parse(path)
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "corpus_paths" in raw:
        raw["corpus_paths"] = tuple(raw["corpus_paths"])
    cfg = PipelineConfig(**raw)

    base = path.parent
    missing = []
    for p in cfg.corpus_paths:
        if not (base / p).exists() and not Path(p).exists():
            missing.append(p)
    for p in (cfg.profile_path, cfg.replay_path):
        if p is not None and not (base / p).exists() and not Path(p).exists():
            missing.append(p)
    if missing:
        raise FileNotFoundError(f"config references missing paths: {missing}")
    return cfg
