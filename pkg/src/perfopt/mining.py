"""Anti-pattern mining from git history.

Two sources feed the database: keyword scans over commit messages, and a
curated feed file of known-good commit ids. Both produce CommitHit records
carrying before/after snapshots of every C++ file the commit touched;
build_examples then extracts functions from both sides, pairs them by
qualified name, and emits one AntiPatternExample per changed function.

Example ids hash the commit and both function bodies, so re-mining the
same history reproduces the same ids and the database can be rebuilt or
merged without bookkeeping.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import subprocess
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, NamedTuple, Optional, Sequence, Union

from . import PerfOptError
from .diffs import apply_hunks, make_diff, parse_diff
from .extract import FunctionRecord, annotate_types, extract_functions
from .lexer import TokenKind, lex

log = logging.getLogger(__name__)

# Configurable starting point; matches message fragments like "2x faster",
# "reduce CPU cost", "fewer allocations".
DEFAULT_KEYWORDS = (
    "speedup",
    "faster",
    "optimiz",
    "reduce cpu",
    "cpu cost",
    "memory reduction",
    "benchmark",
    "perf",
    "allocation",
)

CPP_SUFFIXES = frozenset({".cc", ".cpp", ".cxx", ".c++", ".h", ".hh", ".hpp", ".hxx"})


class NotAGitRepo(PerfOptError):
    pass


class RuleParseError(PerfOptError):
    def __init__(self, line_no: int, detail: str):
        super().__init__(f"rule line {line_no}: {detail}")
        self.line_no = line_no


class Category(Enum):
    ALLOC = "Alloc"
    ARGS = "Args"
    COPY = "Copy"
    MAP = "Map"
    MOVE = "Move"
    SORT = "Sort"
    VECTOR = "Vector"
    OTHER = "Other"


class FileChange(NamedTuple):
    path: str
    before: str
    after: str


@dataclass(frozen=True)
class CommitHit:
    commit_id: str
    message: str
    matched_keywords: tuple[str, ...]
    files: tuple[FileChange, ...]
    # Curated feeds may pin the category up front; keyword hits leave it to
    # the rule table in build_examples.
    category: Optional[Category] = None


@dataclass(frozen=True)
class AntiPatternExample:
    id: str
    category: Category
    before_fn: FunctionRecord
    after_fn: FunctionRecord
    diff: str
    commit_id: str

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "category": self.category.value,
            "before_fn": self.before_fn.to_json(),
            "after_fn": self.after_fn.to_json(),
            "diff": self.diff,
            "commit_id": self.commit_id,
        }

    @staticmethod
    def from_json(obj: dict) -> "AntiPatternExample":
        return AntiPatternExample(
            id=obj["id"],
            category=Category(obj["category"]),
            before_fn=FunctionRecord.from_json(obj["before_fn"]),
            after_fn=FunctionRecord.from_json(obj["after_fn"]),
            diff=obj["diff"],
            commit_id=obj["commit_id"],
        )


# ----------------------------------------------------------------- rules

Rule = tuple[str, Callable[[str], bool]]


def compile_rule(line: str, line_no: int = 0) -> Rule:
    if line.startswith("re:"):
        pattern = line[3:]
        try:
            rx = re.compile(pattern, re.IGNORECASE)
        except re.error as exc:
            raise RuleParseError(line_no, f"bad regex {pattern!r}: {exc}") from exc
        return (line, lambda msg: rx.search(msg) is not None)
    needle = line.lower()
    if not needle:
        raise RuleParseError(line_no, "empty rule")
    return (line, lambda msg: needle in msg.lower())


def parse_rules(path: Union[str, Path]) -> list[Rule]:
    """One rule per line: plain lines match as case-insensitive substrings,
    "re:..." lines as regexes. Blank lines and # comments are skipped."""
    rules: list[Rule] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            rules.append(compile_rule(line, line_no))
    return rules


def _as_rules(rules: Union[None, str, Path, Sequence[str]]) -> list[Rule]:
    if rules is None:
        return [compile_rule(k) for k in DEFAULT_KEYWORDS]
    if isinstance(rules, (str, Path)):
        return parse_rules(rules)
    return [compile_rule(k, i + 1) for i, k in enumerate(rules)]


def match_message(message: str, rules: Sequence[Rule]) -> list[str]:
    return [label for label, pred in rules if pred(message)]


# ------------------------------------------------------------- git access

def _git(repo: Union[str, Path], *args: str) -> str:
    proc = subprocess.run(
        ["git", "-C", str(repo), *args],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise subprocess.CalledProcessError(
            proc.returncode, proc.args, proc.stdout, proc.stderr
        )
    return proc.stdout


def _require_repo(repo: Union[str, Path]):
    try:
        _git(repo, "rev-parse", "--git-dir")
    except (subprocess.CalledProcessError, FileNotFoundError) as exc:
        raise NotAGitRepo(f"{repo} is not a git repository") from exc


def _show_file(repo, rev: str, path: str) -> str:
    try:
        return _git(repo, "show", f"{rev}:{path}")
    except subprocess.CalledProcessError:
        return ""  # added/deleted file or root commit: one side is empty


def _changed_cpp_files(repo, commit_id: str) -> tuple[FileChange, ...]:
    out = _git(
        repo, "diff-tree", "--no-commit-id", "--name-status", "-r", "--root", commit_id
    )
    changes = []
    for line in out.splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        status = parts[0]
        if status.startswith(("R", "C")) and len(parts) >= 3:
            old_path, new_path = parts[1], parts[2]
        else:
            old_path = new_path = parts[1]
        if Path(new_path).suffix not in CPP_SUFFIXES:
            continue
        before = "" if status.startswith("A") else _show_file(repo, f"{commit_id}^", old_path)
        after = "" if status.startswith("D") else _show_file(repo, commit_id, new_path)
        changes.append(FileChange(new_path, before, after))
    return tuple(changes)


def _iter_commits(repo) -> list[tuple[str, str]]:
    out = _git(repo, "log", "-z", "--pretty=format:%H%n%B")
    pairs = []
    for record in out.split("\x00"):
        if not record.strip():
            continue
        sha, _, message = record.partition("\n")
        pairs.append((sha.strip(), message))
    return pairs


def scan_commits(
    repo_path: Union[str, Path],
    rules: Union[None, str, Path, Sequence[str]] = None,
) -> list[CommitHit]:
    """Walk the full history and keep commits whose message matches a rule."""
    _require_repo(repo_path)
    compiled = _as_rules(rules)
    hits = []
    for sha, message in _iter_commits(repo_path):
        matched = match_message(message, compiled)
        if not matched:
            continue
        hits.append(
            CommitHit(
                commit_id=sha,
                message=message,
                matched_keywords=tuple(matched),
                files=_changed_cpp_files(repo_path, sha),
            )
        )
    return hits


def ingest_curated(
    feed_file: Union[str, Path], repo_path: Union[str, Path]
) -> list[CommitHit]:
    """Resolve a feed of commit ids (with optional category tags) to hits.

    Feed lines look like "<sha>" or "<sha> Vector". Unresolvable ids are
    logged and skipped; a curation typo should not sink the run.
    """
    _require_repo(repo_path)
    hits = []
    with open(feed_file, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            sha = fields[0]
            category = None
            if len(fields) > 1:
                try:
                    category = Category(fields[1])
                except ValueError:
                    log.warning("feed line %d: unknown category %r", line_no, fields[1])
            try:
                out = _git(repo_path, "log", "-1", "--pretty=format:%H%n%B", sha)
            except subprocess.CalledProcessError:
                log.warning("feed line %d: cannot resolve commit %r", line_no, sha)
                continue
            full_sha, _, message = out.partition("\n")
            hits.append(
                CommitHit(
                    commit_id=full_sha.strip(),
                    message=message,
                    matched_keywords=(),
                    files=_changed_cpp_files(repo_path, full_sha.strip()),
                    category=category,
                )
            )
    return hits


# --------------------------------------------------------- example assembly

def _change_texts(code: str) -> list[str]:
    """Token texts of a change fragment; falls back to whitespace words so
    an unlexable fragment still classifies rather than erroring."""
    try:
        return [t.text for t in lex(code) if t.kind is not TokenKind.COMMENT]
    except PerfOptError:
        return code.split()


def _member_call(ts: list[str], name: str) -> bool:
    return any(
        ts[i] == name
        and i + 1 < len(ts)
        and ts[i + 1] == "("
        and i > 0
        and ts[i - 1] in (".", "->")
        for i in range(len(ts))
    )


def _call(ts: list[str], name: str) -> bool:
    return any(t == name and i + 1 < len(ts) and ts[i + 1] == "(" for i, t in enumerate(ts))


def _adjacent(ts: list[str], a: str, b: str) -> bool:
    return any(ts[i] == a and ts[i + 1] == b for i in range(len(ts) - 1))


def _const_ref_count(ts: list[str]) -> int:
    n = 0
    for i, t in enumerate(ts):
        if t != "const":
            continue
        for j in range(i + 1, min(i + 4, len(ts))):
            if ts[j] == "&":
                n += 1
                break
            if ts[j] in (";", ")", ",", "="):
                break
    return n


def classify_change(added: str, removed: str) -> Category:
    """Transparent category table over a change's added/removed lines.

    Matching runs over token sequences, so it reads both raw source and the
    spaced token-source form diffs are rendered from. First rule wins.
    """
    a = _change_texts(added)
    r = _change_texts(removed)
    if _member_call(a, "reserve"):
        return Category.VECTOR
    if _call(a, "std::move"):
        return Category.MOVE
    if _call(a, "std::sort") or _call(a, "absl::c_sort") or _member_call(a, "sort"):
        return Category.SORT
    if _adjacent(a, "->", "second") or _member_call(a, "try_emplace") or _member_call(a, "find"):
        return Category.MAP
    if any("string_view" in t for t in a):
        return Category.ARGS
    if _const_ref_count(a) > _const_ref_count(r):
        return Category.COPY
    if any("make_unique" in t or "make_shared" in t for t in a) or "new" in r:
        return Category.ALLOC
    return Category.OTHER


def _example_id(commit_id: str, before_src: str, after_src: str) -> str:
    digest = hashlib.sha256()
    for part in (commit_id, before_src, after_src):
        digest.update(part.encode("utf-8"))
        digest.update(b"\x00")
    return digest.hexdigest()[:16]


def _functions_by_key(source: str, path: str) -> dict[tuple[str, str], FunctionRecord]:
    try:
        records = extract_functions(source, path)
    except PerfOptError as exc:
        log.debug("skipping %s: %s", path, exc)
        return {}
    out = {}
    for rec in records:
        key = (path, rec.name)
        if key in out:
            # Overload sets collapse to the first definition; pairing by
            # name alone cannot tell overloads apart.
            continue
        out[key] = annotate_types(rec)
    return out


def build_examples(hits: Sequence[CommitHit]) -> list[AntiPatternExample]:
    """Pair changed functions across each hit and emit examples."""
    examples = []
    seen_ids = set()
    for hit in hits:
        for change in hit.files:
            before_fns = _functions_by_key(change.before, change.path)
            after_fns = _functions_by_key(change.after, change.path)
            for key, before_fn in before_fns.items():
                after_fn = after_fns.get(key)
                if after_fn is None:
                    log.debug("unpaired function %s in %s", key[1], hit.commit_id)
                    continue
                before_src = before_fn.source()
                after_src = after_fn.source()
                if before_src == after_src:
                    continue
                diff = make_diff(before_src, after_src, path=change.path)
                hunks = parse_diff(diff)
                added = "\n".join(ln for h in hunks for ln in h.added)
                removed = "\n".join(ln for h in hunks for ln in h.removed)
                category = hit.category or classify_change(added, removed)
                ex_id = _example_id(hit.commit_id, before_src, after_src)
                if ex_id in seen_ids:
                    continue
                seen_ids.add(ex_id)
                examples.append(
                    AntiPatternExample(
                        id=ex_id,
                        category=category,
                        before_fn=before_fn,
                        after_fn=after_fn,
                        diff=diff,
                        commit_id=hit.commit_id,
                    )
                )
    return examples


def verify_round_trip(example: AntiPatternExample) -> bool:
    """Check that the stored diff rebuilds the after text from the before."""
    result = apply_hunks(example.before_fn.source(), parse_diff(example.diff))
    return result.text == example.after_fn.source()


# ------------------------------------------------------------- persistence

def write_examples(path: Union[str, Path], examples: Sequence[AntiPatternExample]):
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_json(), sort_keys=True) + "\n")


def read_examples(path: Union[str, Path]) -> list[AntiPatternExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(AntiPatternExample.from_json(json.loads(line)))
    return out
