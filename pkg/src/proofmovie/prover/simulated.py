"""Deterministic stand-in for a Coq-style prover with state numbers.

The simulator exists to exercise the driver, not to check logic.  It keeps
the one piece of bookkeeping the driver depends on: a state counter that
starts at 1 and increases by one per successful command, plus a journal that
knows which states lie inside which proof.  Backtracking honors the real
tool's quirk that a finished proof cannot be re-entered: asking for a state
inside one lands just before the proof was opened, with a warning naming the
state actually reached.

Proof-closing commands ("Qed.", "Admitted.") succeed without bumping the
counter, matching the observed tool transcripts rather than the nominal
one-per-command rule.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from typing import Optional

UNDEFINED = -1

OPENS = "opens_proof"
CLOSES = "closes_proof"
NEUTRAL = "neutral"

#: Tactics the simulator accepts inside a proof; the second set also
#: discharges the goal, after which only a closer makes sense.
_TACTICS = {"intros", "auto", "trivial", "exact", "apply", "reflexivity", "split"}
_SOLVERS = {"auto", "trivial", "exact", "reflexivity"}

_LEMMA_RE = re.compile(r"^Lemma\s+([A-Za-z_][\w']*)\s*:\s*(.+?)\s*\.$", re.DOTALL)
_BACKTO_RE = re.compile(r"^BackTo\s+(\d+)\s*\.$")
_COMMENT_RE = re.compile(r"\(\*.*?\*\)", re.DOTALL)


def strip_comments(command: str) -> str:
    """Remove (possibly nested) comments; good enough for recognition."""
    prev = None
    text = command
    while prev != text:
        prev = text
        text = _COMMENT_RE.sub(" ", text)
    return text


def normalize(command: str) -> str:
    return " ".join(strip_comments(command).split())


def is_closing_command(command: str) -> bool:
    return normalize(command) in ("Qed.", "Admitted.")


@dataclass(frozen=True)
class ProverReply:
    response: str
    new_state: int
    ok: bool
    warning: Optional[str] = None


@dataclass(frozen=True)
class _ProofCtx:
    name: str
    goal: str
    opened_at_state: int  # state reported after the opening command
    solved: bool = False


@dataclass(frozen=True)
class JournalEntry:
    state: int
    command: str
    marker: str  # OPENS / CLOSES / NEUTRAL
    proof_after: Optional[_ProofCtx]


@dataclass
class ProverSession:
    """Journal of successfully executed commands with their state numbers."""

    journal: list[JournalEntry] = field(default_factory=list)
    current_state: int = 1
    proof: Optional[_ProofCtx] = None

    @property
    def in_proof(self) -> bool:
        return self.proof is not None

    def record(self, command: str, marker: str) -> None:
        self.journal.append(JournalEntry(self.current_state, command, marker, self.proof))


class SimulatedProver:
    """In-process prover backend with deterministic replies.

    ``latency_s`` injects a per-command delay so tests can exercise the
    server while a computation is visibly in flight.
    """

    def __init__(self, latency_s: float = 0.0):
        self.session = ProverSession()
        self.latency_s = latency_s

    @property
    def current_state(self) -> int:
        return self.session.current_state

    def close(self) -> None:
        pass

    def execute(self, command: str) -> ProverReply:
        if self.latency_s:
            time.sleep(self.latency_s)
        text = normalize(command)
        backto = _BACKTO_RE.match(text)
        if backto:
            return self.backto(int(backto.group(1)))
        session = self.session

        lemma = _LEMMA_RE.match(text)
        if lemma:
            if session.in_proof:
                return self._error("Error: Nested proofs are not supported.")
            session.current_state += 1
            session.proof = _ProofCtx(lemma.group(1), lemma.group(2), session.current_state)
            session.record(command, OPENS)
            return self._ok(f"1 subgoal\n\n  ============================\n   {lemma.group(2)}")

        if text in ("Qed.", "Admitted."):
            proof = session.proof
            if proof is None:
                return self._error("Error: No focused proof (No proof-editing in progress).")
            if text == "Qed." and not proof.solved:
                return self._error("Error: Attempt to save an incomplete proof.")
            # Closers leave the state counter where it is; the tool cannot
            # backtrack into the finished proof afterwards.
            session.proof = None
            session.record(command, CLOSES)
            return self._ok(f"{proof.name} is defined")

        head = text.split(" ", 1)[0].rstrip(".")
        if head in _TACTICS and text.endswith("."):
            proof = session.proof
            if proof is None:
                return self._error("Error: No focused proof (No proof-editing in progress).")
            if proof.solved:
                return self._error("Error: No such goal.")
            session.current_state += 1
            solved = head in _SOLVERS
            session.proof = _ProofCtx(proof.name, proof.goal, proof.opened_at_state, solved)
            session.record(command, NEUTRAL)
            if solved:
                return self._ok("No more subgoals.")
            return self._ok(f"1 subgoal\n\n  ============================\n   {proof.goal}")

        return self._error(f'Error: Unknown command "{text.split(" ", 1)[0]}".')

    def backto(self, n: int) -> ProverReply:
        """Backtrack to state ``n``, overshooting out of any closed proof.

        Requesting a state that lies inside a proof that has since been
        closed reverts to the state just before that proof was opened and
        reports the state actually reached in the warning.
        """
        session = self.session
        if n < 1 or n > session.current_state:
            return self._error("Error: Invalid backtrack target.")
        if n == session.current_state:
            return self._ok("")

        journal = session.journal
        idx = max(i for i, e in enumerate(journal) if e.state == n) if n > 1 else -1
        ctx = journal[idx].proof_after if idx >= 0 else None
        closed_later = ctx is not None and any(
            e.marker == CLOSES for e in journal[idx + 1 :]
        )
        if closed_later:
            opener_idx = next(
                i for i in range(idx, -1, -1)
                if journal[i].marker == OPENS and journal[i].state == ctx.opened_at_state
            )
            session.journal = journal[:opener_idx]
            m = ctx.opened_at_state - 1
        else:
            session.journal = journal[: idx + 1]
            m = n
        last = session.journal[-1] if session.journal else None
        session.current_state = last.state if last else 1
        session.proof = last.proof_after if last else None
        if m != n:
            return ProverReply("", m, True, warning=f"Actually back to state {m}.")
        return self._ok("")

    def _ok(self, response: str) -> ProverReply:
        return ProverReply(response, self.session.current_state, True)

    def _error(self, response: str) -> ProverReply:
        return ProverReply(response, self.session.current_state, False)
