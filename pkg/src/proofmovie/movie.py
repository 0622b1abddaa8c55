"""Movie document model: frames keyed by contiguous line-character ranges.

A movie is the server-side representation of one prover script.  It holds an
ordered sequence of frames, each covering a half-open text range and carrying
a map of named cells.  The "command" cell always holds the exact source slice
of the frame's range; every other cell is tool-computed data that gets cleared
when the frame is invalidated by an edit.

Frame ranges tile the document: each frame starts where the previous one
ends, the first starts at (0, 0) and the last ends at end-of-text.  Position
lookup exploits this with a binary search over range starts.
"""

from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

COMMAND = "command"
COMMENT_KIND = "comment"
COMMAND_KIND = "command"

#: Cells owned by the system rather than by a registered tool.
CELL_COMMAND = "command"
CELL_DEPENDENCIES = "dependencies"
CELL_RESPONSE = "response"
CELL_REACHED_STATE = "reached_state"
CELL_CORRECTNESS = "correctness"
CELL_LINKS = "links"


class OutOfBoundsError(Exception):
    """A position or range lies outside the document text."""


class ContiguityError(Exception):
    """Frame ranges passed to a splice do not tile the document."""


class Position(NamedTuple):
    """Zero-based (line, char) text position; orders lexicographically."""

    line: int
    char: int


class Range(NamedTuple):
    """Half-open span: ``start`` inclusive, ``end`` exclusive."""

    start: Position
    end: Position

    def contains(self, pos: Position) -> bool:
        return self.start <= pos < self.end

    def is_empty(self) -> bool:
        return self.start == self.end


def advance(pos: Position, text: str) -> Position:
    """Position reached after laying out ``text`` starting at ``pos``."""
    nl = text.count("\n")
    if nl == 0:
        return Position(pos.line, pos.char + len(text))
    return Position(pos.line + nl, len(text) - text.rfind("\n") - 1)


_frame_ids = itertools.count(1)


def next_frame_id() -> int:
    return next(_frame_ids)


@dataclass
class Frame:
    """One command or comment span plus all tool-computed data about it.

    ``id`` is stable across re-indexing so tools and the client can correlate
    results while ranges shift.  Structural fields (id, range, kind) are fixed
    after construction; ``cells`` grows as tools submit data.
    """

    id: int
    range: Range
    kind: str  # COMMAND_KIND or COMMENT_KIND
    cells: dict[str, object] = field(default_factory=dict)

    @property
    def text(self) -> str:
        return self.cells[CELL_COMMAND]  # type: ignore[return-value]

    def copy(self) -> Frame:
        return Frame(self.id, self.range, self.kind, dict(self.cells))

    def stripped(self, range_: Range) -> Frame:
        """Same frame re-keyed to ``range_`` with tool cells cleared."""
        return Frame(self.id, range_, self.kind, {CELL_COMMAND: self.text})


def make_frame(range_: Range, kind: str, text: str) -> Frame:
    return Frame(next_frame_id(), range_, kind, {CELL_COMMAND: text})


@dataclass(frozen=True)
class Movie:
    """Immutable snapshot of the document: tiles of frames plus a generation.

    Mutating operations return a new ``Movie`` with the generation counter
    incremented; exactly one writer (the server's update path) may do so.
    Tool cells inside frames are filled in place by the scheduler after the
    snapshot is taken, which is the one sanctioned form of sharing: cells
    only ever grow between generations.
    """

    frames: tuple[Frame, ...]
    text: str
    generation: int = 0

    @staticmethod
    def empty() -> Movie:
        return Movie(frames=(), text="", generation=0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_by_id", {f.id: f for f in self.frames})
        object.__setattr__(self, "_starts", [f.range.start for f in self.frames])

    def frame_by_id(self, frame_id: int) -> Optional[Frame]:
        return self._by_id.get(frame_id)  # type: ignore[attr-defined]

    @property
    def end_of_text(self) -> Position:
        return self.frames[-1].range.end if self.frames else Position(0, 0)

    def lookup_frame(self, pos: Position) -> Optional[Frame]:
        """The unique frame whose range contains ``pos``, if any.

        Binary search over range starts; contiguity makes the candidate with
        the greatest start <= pos the only one that can contain pos.
        """
        starts = self._starts  # type: ignore[attr-defined]
        i = bisect.bisect_right(starts, pos) - 1
        if i < 0:
            return None
        frame = self.frames[i]
        return frame if frame.range.contains(pos) else None

    def affected_frames(self, edit_span: Range) -> tuple[list[Frame], list[Frame]]:
        """Frames intersecting ``edit_span`` and all frames strictly after.

        An empty span is an insertion point: it selects the frame owning that
        position (ranges are start-inclusive, so a boundary belongs to the
        frame after it); an insertion at end-of-text selects the last frame.
        """
        eot = self.end_of_text
        if edit_span.start > edit_span.end or edit_span.end > eot:
            raise OutOfBoundsError(f"edit span {edit_span} outside text bounds")
        if not self.frames:
            return [], []
        if edit_span.is_empty():
            owner = self.lookup_frame(edit_span.start)
            if owner is None:  # insertion at end-of-text
                owner = self.frames[-1]
            idx = self.frames.index(owner)
            return [owner], list(self.frames[idx + 1 :])
        changed = [
            f
            for f in self.frames
            if f.range.start < edit_span.end and f.range.end > edit_span.start
        ]
        if not changed:
            raise OutOfBoundsError(f"edit span {edit_span} hits no frame")
        last = self.frames.index(changed[-1])
        return changed, list(self.frames[last + 1 :])

    def splice_frames(
        self,
        changed: list[Frame],
        following: list[Frame],
        new_frames: list[Frame],
    ) -> Movie:
        """Replace ``changed`` with ``new_frames`` and re-key what follows.

        Preceding frames keep all their cells; new frames and following
        frames come out with only their command cell, since any tool data
        computed against the old text is stale.  Following frames keep their
        ids, which is what lets the client correlate marks across edits.
        """
        if changed:
            pre_end = self.frames.index(changed[0])
        elif following:
            pre_end = self.frames.index(following[0])
        else:
            pre_end = len(self.frames)
        preceding = [f.copy() for f in self.frames[:pre_end]]

        cursor = preceding[-1].range.end if preceding else Position(0, 0)
        result: list[Frame] = preceding
        for frame in new_frames:
            if frame.range.start != cursor:
                raise ContiguityError(
                    f"new frame {frame.id} starts at {frame.range.start}, expected {cursor}"
                )
            expected_end = advance(cursor, frame.text)
            if frame.range.end != expected_end:
                raise ContiguityError(
                    f"new frame {frame.id} range end {frame.range.end} != text extent {expected_end}"
                )
            result.append(Frame(frame.id, frame.range, frame.kind, {CELL_COMMAND: frame.text}))
            cursor = frame.range.end
        for frame in following:
            end = advance(cursor, frame.text)
            result.append(frame.stripped(Range(cursor, end)))
            cursor = end

        text = "".join(f.text for f in result)
        movie = Movie(tuple(result), text, self.generation + 1)
        movie.check_invariants()
        return movie

    def check_invariants(self) -> None:
        """Raise ContiguityError if the frame tiling is inconsistent."""
        cursor = Position(0, 0)
        for frame in self.frames:
            if frame.range.start != cursor:
                raise ContiguityError(f"frame {frame.id} starts at {frame.range.start}, expected {cursor}")
            end = advance(frame.range.start, frame.text)
            if frame.range.end != end:
                raise ContiguityError(f"frame {frame.id} ends at {frame.range.end}, text implies {end}")
            if frame.range.start >= frame.range.end and frame.text:
                raise ContiguityError(f"frame {frame.id} has empty range but text {frame.text!r}")
            cursor = frame.range.end
        joined = "".join(f.text for f in self.frames)
        if joined != self.text:
            raise ContiguityError("frame texts do not concatenate to document text")


def frames_from_texts(parts: Iterable[tuple[str, str]]) -> list[Frame]:
    """Build a contiguous frame list from (kind, text) pairs starting at (0,0)."""
    cursor = Position(0, 0)
    frames = []
    for kind, text in parts:
        end = advance(cursor, text)
        frames.append(make_frame(Range(cursor, end), kind, text))
        cursor = end
    return frames


def movie_from_texts(parts: Iterable[tuple[str, str]], generation: int = 0) -> Movie:
    frames = frames_from_texts(parts)
    return Movie(tuple(frames), "".join(f.text for f in frames), generation)
