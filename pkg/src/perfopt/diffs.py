"""Unified-diff handling for model-proposed edits.

Model output wraps diffs in prose and markdown fences and frequently gets
the @@ header arithmetic wrong, so parsing scavenges every recognizable hunk
and records whether its body agrees with its header. Application matches on
content: the header line number is only a starting hint, with a small search
window around it.
"""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass
from typing import Optional, Sequence

MAX_FUZZ = 3

_HUNK_RE = re.compile(r"^@@\s*-(\d+)(?:,(\d+))?\s+\+(\d+)(?:,(\d+))?\s*@@")


@dataclass(frozen=True)
class DiffHunk:
    old_start: int  # 1-based; 0 means "insert before the first line"
    old_count: int
    new_start: int
    new_count: int
    lines: tuple[tuple[str, str], ...]  # (tag, text), tag in " -+"

    @property
    def removed(self) -> list[str]:
        return [text for tag, text in self.lines if tag == "-"]

    @property
    def added(self) -> list[str]:
        return [text for tag, text in self.lines if tag == "+"]

    @property
    def before(self) -> list[str]:
        return [text for tag, text in self.lines if tag in " -"]

    @property
    def after(self) -> list[str]:
        return [text for tag, text in self.lines if tag in " +"]

    @property
    def well_formed(self) -> bool:
        return len(self.before) == self.old_count and len(self.after) == self.new_count


def parse_diff(text: str) -> list[DiffHunk]:
    """Collect hunks from possibly prose-wrapped diff text.

    Pure prose yields an empty list, never an error. Hunks whose body
    disagrees with the header survive with well_formed=False; the body is
    what counts downstream.
    """
    hunks: list[DiffHunk] = []
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        m = _HUNK_RE.match(lines[i])
        if not m:
            i += 1
            continue
        old_start = int(m.group(1))
        old_count = int(m.group(2)) if m.group(2) is not None else 1
        new_start = int(m.group(3))
        new_count = int(m.group(4)) if m.group(4) is not None else 1
        i += 1
        body: list[tuple[str, str]] = []
        seen_old = seen_new = 0
        while i < len(lines):
            raw = lines[i]
            if raw.startswith("\\"):  # "\ No newline at end of file"
                i += 1
                continue
            if raw[:1] in ("+", "-", " ") and not raw.startswith(("+++", "---")):
                tag, payload = raw[0], raw[1:]
            elif raw == "" and (seen_old < old_count or seen_new < new_count):
                tag, payload = " ", ""
            else:
                break
            body.append((tag, payload))
            if tag in (" ", "-"):
                seen_old += 1
            if tag in (" ", "+"):
                seen_new += 1
            i += 1
        if body:
            hunks.append(
                DiffHunk(old_start, old_count, new_start, new_count, tuple(body))
            )
    return hunks


@dataclass(frozen=True)
class HunkResult:
    applied: bool
    position: Optional[int] = None  # 0-based line where the match landed
    fuzz: Optional[int] = None      # distance from the hinted position


@dataclass(frozen=True)
class ApplyResult:
    text: str
    results: tuple[HunkResult, ...]

    @property
    def applied(self) -> int:
        return sum(1 for r in self.results if r.applied)

    @property
    def failed(self) -> int:
        return len(self.results) - self.applied


def _match_at(source: Sequence[str], pos: int, window: Sequence[str]) -> bool:
    if pos < 0 or pos + len(window) > len(source):
        return False
    return all(source[pos + k] == w for k, w in enumerate(window))


def apply_hunks(source: str, hunks: Sequence[DiffHunk]) -> ApplyResult:
    """Apply hunks to source text, each one independently.

    A hunk lands where its before-image matches, searching the hinted
    position first and then nearby offsets up to +/-MAX_FUZZ. Failed hunks
    are reported, not fatal; surviving hunks still apply.
    """
    out = source.splitlines()
    results: list[HunkResult] = []
    delta = 0
    for hunk in hunks:
        before = hunk.before
        after = hunk.after
        hint = (hunk.old_start - 1 if hunk.old_count > 0 else hunk.old_start) + delta
        if not before:
            pos = min(max(hint, 0), len(out))
            out[pos:pos] = after
            delta += len(after)
            results.append(HunkResult(True, pos, 0))
            continue
        landed = None
        for fuzz in range(0, MAX_FUZZ + 1):
            for pos in ({hint + fuzz, hint - fuzz} if fuzz else {hint}):
                if _match_at(out, pos, before):
                    landed = (pos, fuzz)
                    break
            if landed:
                break
        if landed is None:
            results.append(HunkResult(False))
            continue
        pos, fuzz = landed
        out[pos : pos + len(before)] = after
        delta += len(after) - len(before)
        results.append(HunkResult(True, pos, fuzz))
    text = "\n".join(out)
    if source.endswith("\n") and text:
        text += "\n"
    return ApplyResult(text, tuple(results))


def make_diff(old: str, new: str, context: int = 3, path: str = "file") -> str:
    """Render a unified diff between two texts."""
    lines = difflib.unified_diff(
        old.splitlines(),
        new.splitlines(),
        fromfile=f"a/{path}",
        tofile=f"b/{path}",
        n=context,
        lineterm="",
    )
    return "\n".join(lines)


def to_text(hunks: Sequence[DiffHunk], path: str = "file") -> str:
    """Render hunks back into unified-diff form with recomputed headers."""
    parts = [f"--- a/{path}", f"+++ b/{path}"]
    for h in hunks:
        old_count, new_count = len(h.before), len(h.after)
        parts.append(f"@@ -{h.old_start},{old_count} +{h.new_start},{new_count} @@")
        parts.extend(tag + text for tag, text in h.lines)
    return "\n".join(parts)


def modified_line_count(hunks: Sequence[DiffHunk]) -> int:
    """Edit-size measure over the hunks given (callers pass the applied ones).

    Pairing removals with additions, a hunk contributes changed + leftover
    pure-removal + leftover pure-addition lines, which is max(r, a).
    """
    return sum(max(len(h.removed), len(h.added)) for h in hunks)
