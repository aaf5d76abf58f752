"""Edit generation: prompts, proposals, and conservative selection.

Four prompt recipes target the same completion interface. ZeroShot,
FewShot, and CoT are single-turn (ask for a unified diff); ReAct runs a
multi-turn session against an in-memory workspace with three permitted
actions (cat, patch, finish) and no filesystem or shell access.

Every model answer becomes an EditProposal: hunks parsed out of the raw
text, applied to the original, and scored against it. Selection is
deliberately conservative: the highest-scoring proposal is the one most
similar to the original, which biases toward small targeted edits over
wholesale rewrites.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

from . import PerfOptError
from .codebleu import codebleu
from .completion import (
    CompletionClient,
    CompletionRequest,
    DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
    ServiceError,
    Timeout,
)
from .diffs import DiffHunk, apply_hunks, make_diff, modified_line_count, parse_diff
from .lexer import TokenKind, lex
from .mining import AntiPatternExample

DEFAULT_SAMPLES = 5
DEFAULT_MAX_STEPS = 8

DEFAULT_INSTRUCTION = (
    "Optimize the following C++ function to reduce CPU cost without changing "
    "its observable behavior. The code exhibits a {category} anti-pattern."
)

_DIFF_ASK = (
    "Reply with a unified diff (@@ hunks) that applies to the code above. "
    "Output only the diff."
)

_COT_DIRECTIVE = (
    "Think step by step: first identify the anti-pattern, then explain the "
    "fix, and finally give the diff."
)


class MissingShots(PerfOptError):
    """A FewShot recipe was rendered without any shots."""


class DisallowedAction(PerfOptError):
    def __init__(self, name: str):
        super().__init__(f"action {name!r} is not allowed (use cat, patch, or finish)")
        self.name = name


class NoViableProposal(PerfOptError):
    """Every proposal was empty, build-breaking, or applied nothing."""


class PromptKind(Enum):
    ZEROSHOT = "ZeroShot"
    FEWSHOT = "FewShot"
    COT = "CoT"
    REACT = "ReAct"


class ProposalStatus(Enum):
    CANDIDATE = "Candidate"
    REJECTED_BUILD = "RejectedBuild"
    REJECTED_EMPTY = "RejectedEmpty"
    SELECTED = "Selected"


@dataclass(frozen=True)
class PromptRecipe:
    kind: PromptKind
    shots: tuple[AntiPatternExample, ...] = ()
    instruction_template: str = DEFAULT_INSTRUCTION

    def __post_init__(self):
        if self.kind is not PromptKind.FEWSHOT and self.shots:
            raise ValueError(f"{self.kind.value} recipes take no shots")


@dataclass(frozen=True)
class EditProposal:
    sample_idx: int
    raw_text: str
    hunks: tuple[DiffHunk, ...]
    valid_hunks: int
    invalid_hunks: int
    modified_lines: int
    codebleu_vs_baseline: float
    status: ProposalStatus
    edited_text: str = ""
    note: str = ""

    def __post_init__(self):
        if self.sample_idx < 0:
            raise ValueError("sample_idx must be non-negative")

    def to_json(self) -> dict:
        return {
            "sample_idx": self.sample_idx,
            "raw_text": self.raw_text,
            "hunks": [
                {
                    "old_start": h.old_start,
                    "old_count": h.old_count,
                    "new_start": h.new_start,
                    "new_count": h.new_count,
                    "lines": [[tag, text] for tag, text in h.lines],
                }
                for h in self.hunks
            ],
            "valid_hunks": self.valid_hunks,
            "invalid_hunks": self.invalid_hunks,
            "modified_lines": self.modified_lines,
            "codebleu_vs_baseline": self.codebleu_vs_baseline,
            "status": self.status.value,
            "edited_text": self.edited_text,
            "note": self.note,
        }


# ------------------------------------------------------------- prompting

def _shot_block(idx: int, shot: AntiPatternExample) -> str:
    return (
        f"Example {idx} ({shot.category.value} anti-pattern):\n"
        "```cpp\n"
        f"{shot.before_fn.source()}\n"
        "```\n"
        "Diff:\n"
        "```diff\n"
        f"{shot.diff}\n"
        "```\n"
    )


def render_prompt(recipe: PromptRecipe, target_code: str, category: str) -> str:
    """Fill one of the four templates. ReAct prompts end mid-scaffold,
    awaiting the model's first Thought."""
    if not target_code.strip():
        raise ValueError("target_code must be non-empty")
    instruction = recipe.instruction_template.format(category=category)
    code_block = f"```cpp\n{target_code}\n```"

    if recipe.kind is PromptKind.ZEROSHOT:
        return f"{instruction}\n\n{code_block}\n\n{_DIFF_ASK}\n"

    if recipe.kind is PromptKind.FEWSHOT:
        if not recipe.shots:
            raise MissingShots("FewShot recipe needs at least one shot")
        shots = "\n".join(_shot_block(i + 1, s) for i, s in enumerate(recipe.shots))
        return f"{instruction}\n\n{shots}\nNow the target:\n{code_block}\n\n{_DIFF_ASK}\n"

    if recipe.kind is PromptKind.COT:
        return f"{instruction}\n\n{code_block}\n\n{_COT_DIRECTIVE}\n{_DIFF_ASK}\n"

    return (
        f"{instruction}\n\n"
        "You interact with a workspace holding the target file. Permitted actions:\n"
        "  cat(<path>)   show a file\n"
        "  patch         apply the unified diff that follows the action line\n"
        "  finish        submit the accumulated change\n\n"
        "Respond with:\n"
        "Thought: <your reasoning>\n"
        "Action: <one action>\n\n"
        "After each action you receive an Observation.\n"
        f"The target file is `target.cc`:\n{code_block}\n\n"
        "Thought:"
    )


# ------------------------------------------------------------- proposals

def _normalized_stream(text: str) -> Optional[list[tuple[str, str]]]:
    try:
        return [(t.text, t.kind.value) for t in lex(text) if t.kind is not TokenKind.COMMENT]
    except PerfOptError:
        return None


def is_formatting_only(original: str, edited: str) -> bool:
    """True when the two texts carry the same non-comment token stream."""
    a = _normalized_stream(original)
    b = _normalized_stream(edited)
    if a is None or b is None:
        return False  # cannot prove emptiness for unlexable text
    return a == b


def build_proposal(original: str, raw_text: str, sample_idx: int) -> EditProposal:
    """Parse, apply, and score one model answer."""
    hunks = tuple(parse_diff(raw_text))
    result = apply_hunks(original, hunks)
    applied_hunks = [h for h, r in zip(hunks, result.results) if r.applied]
    status = ProposalStatus.CANDIDATE
    note = ""
    if is_formatting_only(original, result.text):
        status = ProposalStatus.REJECTED_EMPTY
        note = "no code modification beyond formatting"
    return EditProposal(
        sample_idx=sample_idx,
        raw_text=raw_text,
        hunks=hunks,
        valid_hunks=result.applied,
        invalid_hunks=result.failed,
        modified_lines=modified_line_count(applied_hunks),
        codebleu_vs_baseline=codebleu(original, result.text),
        status=status,
        edited_text=result.text,
        note=note,
    )


def _error_proposal(sample_idx: int, note: str) -> EditProposal:
    return EditProposal(
        sample_idx=sample_idx,
        raw_text="",
        hunks=(),
        valid_hunks=0,
        invalid_hunks=0,
        modified_lines=0,
        codebleu_vs_baseline=0.0,
        status=ProposalStatus.REJECTED_BUILD,
        edited_text="",
        note=note,
    )


def generate_proposals(
    client: CompletionClient,
    recipe: PromptRecipe,
    target_code: str,
    category: str,
    samples: int = DEFAULT_SAMPLES,
    temperature: float = DEFAULT_TEMPERATURE,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> list[EditProposal]:
    """Sample the model `samples` times on the same prompt.

    Service failures become RejectedBuild proposals so one flaky call
    cannot sink the run; aggregation stays ordered by sample_idx.
    """
    if recipe.kind is PromptKind.REACT:
        raise ValueError("ReAct recipes run through react_loop, not sampling")
    prompt = render_prompt(recipe, target_code, category)
    proposals = []
    for idx in range(samples):
        req = CompletionRequest(prompt=prompt, temperature=temperature, max_tokens=max_tokens)
        try:
            resp = client.complete(req)
        except (Timeout, ServiceError) as exc:
            proposals.append(_error_proposal(idx, f"completion failed: {exc}"))
            continue
        proposals.append(build_proposal(target_code, resp.text, idx))
    return proposals


# ----------------------------------------------------------------- ReAct

_ACTION_RE = re.compile(r"^Action:\s*(\w+)\s*(?:\(\s*(.*?)\s*\))?\s*$", re.MULTILINE)


def _run_action(
    name: str, arg: str, tail: str, workspace: dict[str, str], target: str
) -> str:
    if name == "cat":
        path = arg or target
        if path not in workspace:
            return f"error: no such file {path!r}"
        return workspace[path]
    if name == "patch":
        diff_text = arg if arg.strip().startswith(("@@", "---")) else tail
        hunks = parse_diff(diff_text)
        if not hunks:
            return "error: no hunks found in patch"
        result = apply_hunks(workspace[target], hunks)
        workspace[target] = result.text
        return f"patch applied: {result.applied} hunk(s) ok, {result.failed} failed"
    raise DisallowedAction(name)


def react_loop(
    client: CompletionClient,
    workspace: dict[str, str],
    target: str = "target.cc",
    category: str = "Other",
    max_steps: int = DEFAULT_MAX_STEPS,
    recipe: Optional[PromptRecipe] = None,
    temperature: float = DEFAULT_TEMPERATURE,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> EditProposal:
    """Alternate model Thought/Action with executor Observation.

    The session ends on a `finish` action or after max_steps; either way
    the proposal is the workspace delta. Disallowed actions are reported
    in the observation and the loop continues.
    """
    if target not in workspace:
        raise KeyError(f"workspace has no target file {target!r}")
    original = workspace[target]
    recipe = recipe or PromptRecipe(kind=PromptKind.REACT)
    transcript = render_prompt(recipe, original, category)
    finished = False
    for _ in range(max_steps):
        req = CompletionRequest(prompt=transcript, temperature=temperature, max_tokens=max_tokens)
        try:
            resp = client.complete(req)
        except (Timeout, ServiceError) as exc:
            return _error_proposal(0, f"completion failed mid-session: {exc}")
        match = _ACTION_RE.search(resp.text)
        if match is None:
            observation = "error: no Action line found"
        else:
            name = match.group(1)
            arg = match.group(2) or ""
            tail = resp.text[match.end():]
            if name == "finish":
                finished = True
                transcript += f"{resp.text}\n"
                break
            try:
                observation = _run_action(name, arg, tail, workspace, target)
            except DisallowedAction as exc:
                observation = f"error: {exc}"
        transcript += f"{resp.text}\nObservation: {observation}\nThought:"
    final = workspace[target]
    if final == original:
        return EditProposal(
            sample_idx=0,
            raw_text="",
            hunks=(),
            valid_hunks=0,
            invalid_hunks=0,
            modified_lines=0,
            codebleu_vs_baseline=1.0,
            status=ProposalStatus.REJECTED_EMPTY,
            edited_text=original,
            note="session ended without changes" if finished else "max_steps exhausted without changes",
        )
    diff = make_diff(original, final, path=target)
    return build_proposal(original, diff, 0)


# -------------------------------------------------------------- selection

def select_conservative(proposals: Sequence[EditProposal]) -> EditProposal:
    """Pick the viable proposal most similar to the baseline.

    Formatting-only and zero-valid-hunk proposals are out; among the rest
    the max codebleu wins, ties going to the smaller edit and then the
    earlier sample.
    """
    viable = [
        p
        for p in proposals
        if p.status is ProposalStatus.CANDIDATE and p.valid_hunks > 0
    ]
    if not viable:
        raise NoViableProposal(f"none of {len(proposals)} proposals is usable")
    best = min(
        viable,
        key=lambda p: (-p.codebleu_vs_baseline, p.modified_lines, p.sample_idx),
    )
    return replace(best, status=ProposalStatus.SELECTED)


# ------------------------------------------------------------ self-review

REVIEW_QUESTIONS = (
    "Does the edit preserve the function's observable behavior?",
    "Is the edited code valid C++ that should still compile?",
    "Does the edit change more than formatting or comments?",
)


def render_review_prompt(original: str, proposal: EditProposal) -> str:
    questions = "\n".join(f"{i + 1}. {q}" for i, q in enumerate(REVIEW_QUESTIONS))
    return (
        "Review this proposed edit.\n\n"
        f"Original:\n```cpp\n{original}\n```\n\n"
        f"Edited:\n```cpp\n{proposal.edited_text}\n```\n\n"
        f"Answer each question with yes or no, one per line:\n{questions}\n"
    )


def self_review(
    client: CompletionClient, original: str, proposal: EditProposal
) -> EditProposal:
    """One extra completion pass over fixed yes/no questions.

    Any "no" downgrades the proposal to RejectedBuild; review never edits
    code. Service failures leave the proposal as it was.
    """
    req = CompletionRequest(prompt=render_review_prompt(original, proposal))
    try:
        resp = client.complete(req)
    except (Timeout, ServiceError):
        return proposal
    answers = [
        ln.strip().lower()
        for ln in resp.text.splitlines()
        if ln.strip()
    ]
    flagged = any(re.search(r"\bno\b", a) for a in answers)
    if flagged:
        return replace(
            proposal,
            status=ProposalStatus.REJECTED_BUILD,
            note="self-review flagged the edit",
        )
    return proposal
