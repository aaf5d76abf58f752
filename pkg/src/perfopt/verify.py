"""Edit validation, Table-2-style metrics, speedup measurement, outcomes.

Validation runs configured build/test commands in a scratch directory and
maps failures onto the outcome taxonomy. Speedups come from a benchmark
protocol where the program prints one cycles/op number per line; the
median of 10 runs per variant keeps desk-machine noise out of the ratio.
Rejected edits score a speedup of exactly 1.0, bitwise, because an edit
that never ships changes nothing.
"""

from __future__ import annotations

import json
import shutil
import subprocess
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from fractions import Fraction
from pathlib import Path
from statistics import median
from typing import Mapping, Optional, Sequence, Union

from . import PerfOptError
from .editgen import EditProposal, ProposalStatus

DEFAULT_TIMEOUT_S = 300.0
DEFAULT_RUNS = 10


class BenchParseError(PerfOptError):
    """Benchmark output did not contain usable cycles/op numbers."""


class OutcomeStatus(Enum):
    S_PROD = "S_PROD"      # submitted to production
    S_USER = "S_USER"      # accepted after human edits
    R_REVERT = "R_REVERT"  # landed, then reverted on regression
    R_TEST = "R_TEST"      # failed build or tests
    R_USER = "R_USER"      # rejected by human review
    R_EMPTY = "R_EMPTY"    # no modification beyond formatting
    R_OTHER = "R_OTHER"    # timeouts, service failures, everything else


# Statuses a human assigns through the annotation command; the pipeline
# never infers these on its own.
REVIEW_STATUSES = frozenset(
    {OutcomeStatus.S_USER, OutcomeStatus.R_USER, OutcomeStatus.R_REVERT}
)


@dataclass(frozen=True)
class EditOutcome:
    status: OutcomeStatus
    note: str = ""

    def to_json(self) -> dict:
        return {"status": self.status.value, "note": self.note}


@dataclass(frozen=True)
class BenchResult:
    baseline_cycles_per_op: float
    edited_cycles_per_op: Optional[float]
    speedup: float
    runs: int = DEFAULT_RUNS

    def __post_init__(self):
        if self.baseline_cycles_per_op <= 0:
            raise ValueError("baseline cycles/op must be positive")
        if self.edited_cycles_per_op is not None and self.edited_cycles_per_op <= 0:
            raise ValueError("edited cycles/op must be positive")

    def to_json(self) -> dict:
        return {
            "baseline_cycles_per_op": self.baseline_cycles_per_op,
            "edited_cycles_per_op": self.edited_cycles_per_op,
            "speedup": self.speedup,
            "runs": self.runs,
        }


# ------------------------------------------------------------- validation

def _run_command(cmd: str, cwd, timeout_s: float) -> subprocess.CompletedProcess:
    return subprocess.run(
        cmd,
        shell=True,
        cwd=cwd,
        capture_output=True,
        text=True,
        timeout=timeout_s,
    )


def apply_edit_to_scratch(
    source_dir: Union[str, Path],
    rel_path: str,
    edited_text: str,
    scratch_dir: Union[str, Path],
) -> Path:
    """Copy a workspace and overwrite one file with the edited version."""
    src = Path(source_dir)
    scratch = Path(scratch_dir)
    if scratch.exists():
        shutil.rmtree(scratch)
    shutil.copytree(src, scratch)
    target = scratch / rel_path
    target.write_text(edited_text)
    return scratch


def check_valid(
    workspace: Union[str, Path],
    build_cmd: Optional[str] = None,
    test_cmd: Optional[str] = None,
    timeout_s: float = DEFAULT_TIMEOUT_S,
) -> Optional[EditOutcome]:
    """Run build and tests in an already-edited workspace.

    Returns None when everything passes (the edit stays a candidate and
    moves on to review); otherwise the rejecting outcome. Timeouts map to
    R_OTHER, failures to R_TEST. No configured commands means a vacuous
    pass.
    """
    for label, cmd in (("build", build_cmd), ("test", test_cmd)):
        if not cmd:
            continue
        try:
            proc = _run_command(cmd, workspace, timeout_s)
        except subprocess.TimeoutExpired:
            return EditOutcome(
                OutcomeStatus.R_OTHER, f"{label} command timed out after {timeout_s}s"
            )
        if proc.returncode != 0:
            detail = (proc.stderr or proc.stdout).strip().splitlines()
            head = detail[0] if detail else f"exit {proc.returncode}"
            return EditOutcome(OutcomeStatus.R_TEST, f"{label} failed: {head}")
    return None


def outcome_for_proposal(proposal: EditProposal) -> Optional[EditOutcome]:
    """Terminal outcome already implied by the proposal itself, if any."""
    if proposal.status is ProposalStatus.REJECTED_EMPTY:
        return EditOutcome(OutcomeStatus.R_EMPTY, proposal.note)
    if proposal.status is ProposalStatus.REJECTED_BUILD:
        return EditOutcome(OutcomeStatus.R_OTHER, proposal.note)
    return None


# ---------------------------------------------------------------- metrics

@dataclass(frozen=True)
class MetricsRow:
    mod_ln: float   # mean modified lines
    val_ed: float   # mean valid hunks
    inv_ed: float   # mean invalid hunks
    rej: float      # fraction of samples rejected before validation

    def to_json(self) -> dict:
        return {
            "ModLn": self.mod_ln,
            "ValEd": self.val_ed,
            "InvEd": self.inv_ed,
            "Rej": self.rej,
        }


def _exact_mean(values: Sequence[int]) -> float:
    return float(Fraction(sum(values), len(values)))


def edit_metrics(
    proposals_by_kind: Mapping[str, Sequence[EditProposal]]
) -> dict[str, MetricsRow]:
    """Per-recipe means over the sampled proposals.

    Sums are exact (integer/Fraction) with a single rounding at the end,
    so tables do not drift with sample count. Rej counts proposals that
    never reached validation because the service call failed.
    """
    table = {}
    for kind, proposals in proposals_by_kind.items():
        if not proposals:
            raise ValueError(f"no proposals for {kind}")
        n = len(proposals)
        rejected = sum(
            1 for p in proposals if p.status is ProposalStatus.REJECTED_BUILD
        )
        table[kind] = MetricsRow(
            mod_ln=_exact_mean([p.modified_lines for p in proposals]),
            val_ed=_exact_mean([p.valid_hunks for p in proposals]),
            inv_ed=_exact_mean([p.invalid_hunks for p in proposals]),
            rej=float(Fraction(rejected, n)),
        )
    return table


# ---------------------------------------------------------------- speedup

def _collect_runs(cmd: str, runs: int, cwd, timeout_s: float) -> list[float]:
    """Invoke `cmd` until `runs` cycles/op numbers have been printed.

    A program may print all its runs in one invocation or one number per
    invocation; both satisfy the one-number-per-line protocol.
    """
    values: list[float] = []
    while len(values) < runs:
        try:
            proc = _run_command(cmd, cwd, timeout_s)
        except subprocess.TimeoutExpired as exc:
            raise BenchParseError(f"benchmark timed out: {cmd}") from exc
        if proc.returncode != 0:
            raise BenchParseError(
                f"benchmark exited {proc.returncode}: {(proc.stderr or '').strip()[:200]}"
            )
        got_any = False
        for line in proc.stdout.splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError as exc:
                raise BenchParseError(f"unparseable benchmark line: {line!r}") from exc
            got_any = True
            if len(values) >= runs:
                break
        if not got_any:
            raise BenchParseError(f"benchmark produced no numbers: {cmd}")
    return values[:runs]


def measure_speedup(
    baseline_cmd: str,
    edited_cmd: Optional[str] = None,
    runs: int = DEFAULT_RUNS,
    cwd: Optional[Union[str, Path]] = None,
    timeout_s: float = DEFAULT_TIMEOUT_S,
) -> BenchResult:
    """Median-of-runs speedup of the edited command over the baseline.

    No edited command means the edit was rejected or absent: the baseline
    is still characterized but the speedup is exactly 1.0.
    """
    baseline = median(_collect_runs(baseline_cmd, runs, cwd, timeout_s))
    if edited_cmd is None:
        return BenchResult(
            baseline_cycles_per_op=baseline,
            edited_cycles_per_op=None,
            speedup=1.0,
            runs=runs,
        )
    edited = median(_collect_runs(edited_cmd, runs, cwd, timeout_s))
    return BenchResult(
        baseline_cycles_per_op=baseline,
        edited_cycles_per_op=edited,
        speedup=baseline / edited,
        runs=runs,
    )


# ----------------------------------------------------------------- ledger

class OutcomeLedger:
    """Append-only JSONL of finalized edit outcomes."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    def record(self, edit_id: str, outcome: EditOutcome) -> dict:
        entry = {
            "edit_id": edit_id,
            "status": outcome.status.value,
            "note": outcome.note,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
        return entry

    def entries(self) -> list[dict]:
        if not self.path.exists():
            return []
        out = []
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    out.append(json.loads(line))
        return out

    def summarize(self) -> dict[str, float]:
        """Percentage of entries per status; exact fractions, one rounding."""
        entries = self.entries()
        if not entries:
            return {}
        counts: dict[str, int] = {}
        for entry in entries:
            counts[entry["status"]] = counts.get(entry["status"], 0) + 1
        total = len(entries)
        return {
            status: float(Fraction(100 * n, total)) for status, n in sorted(counts.items())
        }
