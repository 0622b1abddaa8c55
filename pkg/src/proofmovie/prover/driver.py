"""Drives a prover backend over the movie, reusing work via backtracking.

The driver owns three cells per command frame: the prover's response, the
state number reached after the frame ran, and a correctness verdict.  The
reached-state cells double as the driver's own bookkeeping: when frames are
invalidated by an edit, the highest state recorded before the edit is where
the prover gets rewound to, and only the frames from the edit onward are
re-executed.  Rewinding can overshoot out of an already-closed proof; the
frames whose recorded states fall in the overshot gap are replayed to
restore the prover's context before new work starts.

Comment frames are skipped outright and never receive prover cells.
"""

from __future__ import annotations

import logging
import threading
from typing import Protocol

from ..movie import (
    CELL_CORRECTNESS,
    CELL_DEPENDENCIES,
    CELL_REACHED_STATE,
    CELL_RESPONSE,
    COMMAND_KIND,
)
from ..scheduler import ToolDescriptor, ToolRun
from .external import ProverBackendError
from .simulated import ProverReply

log = logging.getLogger(__name__)

VALID = "valid"
INVALID = "invalid"
UNPROCESSED = "unprocessed"


class ProverBackend(Protocol):
    @property
    def current_state(self) -> int: ...

    def execute(self, command: str) -> ProverReply: ...

    def backto(self, n: int) -> ProverReply: ...

    def close(self) -> None: ...


class ProverDriver:
    """Scheduled tool filling response/reached_state/correctness cells.

    One run at a time: the prover session is a single sequential resource,
    so a run for a new generation waits for the cancelled one to notice and
    release it.
    """

    TOOL_NAME = "prover"

    def __init__(self, backend: ProverBackend):
        self.backend = backend
        self._session_lock = threading.Lock()

    def descriptor(self) -> ToolDescriptor:
        return ToolDescriptor(
            name=self.TOOL_NAME,
            requires=frozenset({"command", CELL_DEPENDENCIES}),
            provides=frozenset({CELL_RESPONSE, CELL_REACHED_STATE, CELL_CORRECTNESS}),
            run=self.run,
        )

    def run(self, ctx: ToolRun) -> None:
        with self._session_lock:
            if ctx.cancelled:
                return
            try:
                self._drive(ctx)
            except ProverBackendError:
                log.warning("prover backend unavailable; frames left unprocessed")

    # -- algorithm ---------------------------------------------------------

    def _drive(self, ctx: ToolRun) -> None:
        frames = [f for f in ctx.movie.frames if f.kind == COMMAND_KIND]
        recorded = {
            f.id: f.cells[CELL_REACHED_STATE]
            for f in frames
            if CELL_REACHED_STATE in f.cells
        }
        pending = [f for f in frames if f.id not in recorded]
        if not pending:
            return

        if recorded or self.backend.current_state > 1:
            earliest = pending[0]
            deps = [f for f in frames if f.range.start < earliest.range.start]
            n = max((recorded[f.id] for f in deps if f.id in recorded), default=1)
            if ctx.cancelled:
                return
            reply = self.backend.backto(min(n, self.backend.current_state))
            m = reply.new_state
            # Restore context the rewind overshot past: replay every frame
            # whose recorded state sits in (m, n], in document order.
            for frame in frames:
                state = recorded.get(frame.id)
                if state is None or not (m < state <= n):
                    continue
                if ctx.cancelled:
                    return
                replayed = self.backend.execute(frame.text)
                if not replayed.ok:
                    # Context drift: surface the failure on the replayed frame.
                    ctx.submit(frame.id, {
                        CELL_RESPONSE: replayed.response,
                        CELL_REACHED_STATE: replayed.new_state,
                        CELL_CORRECTNESS: INVALID,
                    })

        for frame in pending:
            if ctx.cancelled:
                return
            reply = self.backend.execute(frame.text)
            accepted = ctx.submit(frame.id, {
                CELL_RESPONSE: reply.response,
                CELL_REACHED_STATE: reply.new_state,
                CELL_CORRECTNESS: VALID if reply.ok else INVALID,
            })
            if not accepted:
                return
