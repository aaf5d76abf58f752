"""Profile-driven candidate pruning.

A CPU profile arrives as collapsed-stack text or a JSON call tree. Candidate
selection walks the tree once: a function survives when its inclusive cycle
share sits inside [c_min, c_max], it is not shared across binaries, and no
descendant already captured the cost. Nodes directly under an over-budget
parent are kept regardless, so a hot subtree always attributes its cycles to
something optimizable below the giant frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

from . import PerfOptError


class MalformedLine(PerfOptError):
    """A collapsed-stack line did not parse."""


ROOT_NAME = "<root>"


@dataclass(frozen=True)
class PruneConfig:
    c_min: float = 0.1
    c_max: float = 25.0
    shared_binary_threshold: int = 10

    def __post_init__(self):
        if not 0.0 <= self.c_min < self.c_max <= 100.0:
            raise ValueError("need 0 <= c_min < c_max <= 100")
        if self.shared_binary_threshold < 1:
            raise ValueError("shared_binary_threshold must be >= 1")


@dataclass
class CallTreeNode:
    fn_name: str
    children: list["CallTreeNode"] = field(default_factory=list)
    self_cycles: int = 0
    inclusive_pct: float = 0.0  # percent of binary total cycles
    shared: bool = False

    def walk(self) -> Iterable["CallTreeNode"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def to_json(self) -> dict:
        return {
            "fn_name": self.fn_name,
            "self_cycles": self.self_cycles,
            "inclusive_pct": self.inclusive_pct,
            "shared": self.shared,
            "children": [c.to_json() for c in self.children],
        }

    @staticmethod
    def from_json(obj: dict) -> "CallTreeNode":
        return CallTreeNode(
            fn_name=obj["fn_name"],
            children=[CallTreeNode.from_json(c) for c in obj.get("children", [])],
            self_cycles=int(obj.get("self_cycles", 0)),
            inclusive_pct=float(obj.get("inclusive_pct", 0.0)),
            shared=bool(obj.get("shared", False)),
        )


def parse_folded_stacks(text: str) -> CallTreeNode:
    """Build a call tree from collapsed-stack lines ("a;b;c 42").

    Sample counts land as self_cycles on the line's leaf frame; inclusive
    percentages fall out of the totals under a synthetic 100% root. Blank
    lines and '#' comments are skipped; anything else unparseable raises
    MalformedLine with its line number.
    """
    samples: list[tuple[list[str], int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        stack_part, sep, count_part = line.rpartition(" ")
        if not sep or not stack_part:
            raise MalformedLine(f"line {lineno}: expected 'frame;frame count'")
        try:
            count = int(count_part)
        except ValueError:
            raise MalformedLine(f"line {lineno}: bad sample count {count_part!r}") from None
        if count <= 0:
            raise MalformedLine(f"line {lineno}: sample count must be positive")
        frames = [f.strip() for f in stack_part.split(";")]
        if any(not f for f in frames):
            raise MalformedLine(f"line {lineno}: empty frame name")
        samples.append((frames, count))

    total = sum(c for _, c in samples)
    root = CallTreeNode(ROOT_NAME, inclusive_pct=100.0 if total else 0.0)
    if total == 0:
        return root

    inclusive: dict[int, int] = {id(root): total}
    index: dict[int, dict[str, CallTreeNode]] = {}
    for frames, count in samples:
        node = root
        for frame in frames:
            kids = index.setdefault(id(node), {})
            child = kids.get(frame)
            if child is None:
                child = CallTreeNode(frame)
                kids[frame] = child
                node.children.append(child)
            inclusive[id(child)] = inclusive.get(id(child), 0) + count
            node = child
        node.self_cycles += count

    for node in root.walk():
        if node is not root:
            node.inclusive_pct = 100.0 * inclusive[id(node)] / total
    return root


def load_call_tree(path: str | Path) -> CallTreeNode:
    """Read a call-tree JSON file ({fn_name, self_cycles, shared?, children})."""
    with open(path, encoding="utf-8") as fh:
        root = CallTreeNode.from_json(json.load(fh))
    if root.inclusive_pct == 0.0 and any(n.self_cycles for n in root.walk()):
        annotate_inclusive_pct(root)
    return root


def annotate_inclusive_pct(root: CallTreeNode) -> None:
    """Fill inclusive_pct from self_cycles when the JSON omitted it."""

    def subtree_cycles(node: CallTreeNode) -> int:
        return node.self_cycles + sum(subtree_cycles(c) for c in node.children)

    total = subtree_cycles(root)
    if total == 0:
        return
    for node in root.walk():
        node.inclusive_pct = 100.0 * subtree_cycles(node) / total


def classify_shared(
    fn_name: str, binaries_containing: Mapping[str, int], cfg: PruneConfig
) -> bool:
    """Shared iff the function ships in at least the threshold many binaries.

    Names missing from the table count as application-specific.
    """
    return binaries_containing.get(fn_name, 0) >= cfg.shared_binary_threshold


def apply_shared_table(
    root: CallTreeNode, binaries_containing: Mapping[str, int], cfg: PruneConfig
) -> None:
    for node in root.walk():
        node.shared = classify_shared(node.fn_name, binaries_containing, cfg)


def should_prune(
    f: CallTreeNode, parent: Optional[CallTreeNode], cfg: PruneConfig
) -> bool:
    """Guards evaluated strictly in order: over-budget parent protects the
    child; shared functions go; costs outside [c_min, c_max] go."""
    if parent is not None and parent.inclusive_pct > cfg.c_max:
        return False
    if f.shared:
        return True
    if f.inclusive_pct < cfg.c_min or f.inclusive_pct > cfg.c_max:
        return True
    return False


def get_costly_fns(
    f: CallTreeNode,
    parent: Optional[CallTreeNode] = None,
    cfg: PruneConfig = PruneConfig(),
) -> list[CallTreeNode]:
    """Collect candidate nodes under f.

    Leaves speak for themselves; an interior node only enters the result when
    no descendant made the cut and the node itself survives pruning. Returned
    nodes therefore sit on disjoint subtrees.
    """
    if not f.children:
        return [] if should_prune(f, parent, cfg) else [f]
    result: list[CallTreeNode] = []
    for child in f.children:
        result.extend(get_costly_fns(child, f, cfg))
    if not result and not should_prune(f, parent, cfg):
        result = [f]
    return result


def attribute_and_report(
    tree: CallTreeNode, cfg: PruneConfig = PruneConfig()
) -> list[tuple[str, float]]:
    """Run the pruning walk from the root and aggregate per function name.

    The synthetic root acts as the 100% parent of every top-level frame and
    never appears in the report itself. A function selected at several call
    sites has its disjoint inclusive percentages summed.
    """
    selected: list[CallTreeNode] = []
    for child in tree.children:
        selected.extend(get_costly_fns(child, tree, cfg))
    totals: dict[str, float] = {}
    for node in selected:
        totals[node.fn_name] = totals.get(node.fn_name, 0.0) + node.inclusive_pct
    return sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
