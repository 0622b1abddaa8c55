"""Rebuilds a movie from its old state and the full new text.

The camera path: extract the old text, diff it against the new text, locate
the frames the diff touches, re-scan just that region, and splice the fresh
frames back in.  The scanner is deliberately naive: a command ends at a '.'
followed by whitespace or end-of-text, "(* ... *)" comments nest, and
double-quoted strings are skipped opaquely.  That is enough to tokenize
Coq-style scripts without a real grammar.

Re-scanning a fragment in isolation can disagree with a from-scratch scan at
the fragment's edges (a deleted terminator merges frames, an unclosed comment
swallows everything after it), so the changed region is grown until its scan
is provably independent of the surrounding text.  Growing forward absorbs
following frames while the fragment's last token still depends on what comes
next; growing backward absorbs a preceding command whose '.' terminator was
validated by a character the edit just replaced.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .movie import (
    CELL_COMMAND,
    COMMAND_KIND,
    COMMENT_KIND,
    Frame,
    Movie,
    Position,
    Range,
    advance,
    make_frame,
)


class PatchApplicationError(Exception):
    """A patch operation falls outside the text it is applied to."""


class Token(NamedTuple):
    range: Range
    kind: str
    text: str


class PatchOp(NamedTuple):
    at: int
    delete_len: int
    insert: str


@dataclass(frozen=True)
class Patch:
    """Ordered, non-overlapping edit operations over character offsets."""

    ops: tuple[PatchOp, ...]

    def is_empty(self) -> bool:
        return not self.ops

    def span(self) -> tuple[int, int]:
        """Hull of touched offsets in the old text (start, end)."""
        return self.ops[0].at, max(op.at + op.delete_len for op in self.ops)


# How the last token of a scan relates to what might follow the scanned text.
_CLOSED_COMMENT = "closed_comment"  # extent fixed by content
_WS_ONLY = "ws_only"  # would merge into any following token
_OPEN_COMMENT = "open_comment"  # unmatched "(*" runs to end
_CMD_DOT_END = "cmd_dot_end"  # trailing '.', terminator only if next is ws/EOT
_CMD_UNTERMINATED = "cmd_unterminated"
_EMPTY = "empty"


class ScanResult(NamedTuple):
    tokens: list[Token]
    last_status: str


def _scan(text: str) -> ScanResult:
    tokens: list[Token] = []
    n = len(text)
    i = 0
    pos = Position(0, 0)
    last_status = _EMPTY

    def emit(start: Position, start_i: int, kind: str) -> None:
        nonlocal pos
        slice_ = text[start_i:i]
        end = advance(start, slice_)
        tokens.append(Token(Range(start, end), kind, slice_))
        pos = end

    while i < n:
        start, start_i = pos, i
        # Leading whitespace attaches to the token that follows it.
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            emit(start, start_i, COMMENT_KIND)
            last_status = _WS_ONLY
            break
        if text.startswith("(*", i):
            depth = 0
            while i < n:
                if text.startswith("(*", i):
                    depth += 1
                    i += 2
                elif text.startswith("*)", i):
                    depth -= 1
                    i += 2
                    if depth == 0:
                        break
                else:
                    i += 1
            emit(start, start_i, COMMENT_KIND)
            last_status = _CLOSED_COMMENT if depth == 0 else _OPEN_COMMENT
            continue
        # Command: runs to a '.' followed by whitespace or end-of-text.
        in_string = False
        depth = 0
        last_status = _CMD_UNTERMINATED
        while i < n:
            c = text[i]
            if in_string:
                if c == '"':
                    in_string = False
                i += 1
            elif depth > 0:
                if text.startswith("(*", i):
                    depth += 1
                    i += 2
                elif text.startswith("*)", i):
                    depth -= 1
                    i += 2
                else:
                    i += 1
            elif c == '"':
                in_string = True
                i += 1
            elif text.startswith("(*", i):
                depth += 1
                i += 2
            elif c == ".":
                i += 1
                if i >= n:
                    last_status = _CMD_DOT_END
                    break
                if text[i].isspace():
                    last_status = None  # solid terminator, never the last token
                    break
            else:
                i += 1
        emit(start, start_i, COMMAND_KIND)
    return ScanResult(tokens, last_status)


def scan_commands(text: str) -> list[Token]:
    """Tokenize ``text`` into contiguous command and comment tokens.

    Total: concatenating the token texts always reproduces the input.  A
    trailing fragment without a terminator is a command token (the prover
    will report its error); a whitespace-only tail is a comment token.
    """
    return _scan(text).tokens


def _self_contained(result: ScanResult, rest_first_char: Optional[str]) -> bool:
    """True if scanning the text with ``rest`` appended could not change the tokens."""
    if rest_first_char is None:
        return True  # scanned to real end-of-text
    status = result.last_status
    if status == _EMPTY or status == _CLOSED_COMMENT:
        return True
    if status == _CMD_DOT_END:
        return rest_first_char.isspace()
    return False  # ws_only, open_comment, cmd_unterminated


def text_diff(old: str, new: str) -> Patch:
    """Character-level patch turning ``old`` into ``new``.

    The contract is correctness of apply, not minimality; the matcher's
    output is good enough to localize edits to the frames they touch.
    """
    ops = []
    matcher = difflib.SequenceMatcher(a=old, b=new, autojunk=False)
    for tag, i1, i2, j1, j2 in matcher.get_opcodes():
        if tag == "equal":
            continue
        ops.append(PatchOp(at=i1, delete_len=i2 - i1, insert=new[j1:j2]))
    return Patch(tuple(ops))


def apply_patch(old: str, patch: Patch) -> str:
    """Apply ``patch`` ops in order; raises if any op exceeds the text."""
    parts = []
    cursor = 0
    for op in patch.ops:
        if op.at < cursor or op.at + op.delete_len > len(old):
            raise PatchApplicationError(f"op {op} out of bounds for text of length {len(old)}")
        parts.append(old[cursor : op.at])
        parts.append(op.insert)
        cursor = op.at + op.delete_len
    parts.append(old[cursor:])
    return "".join(parts)


def _offset_to_pos(text: str, offset: int) -> Position:
    line = text.count("\n", 0, offset)
    if line == 0:
        return Position(0, offset)
    return Position(line, offset - text.rfind("\n", 0, offset) - 1)


def _shift(pos: Position, origin: Position) -> Position:
    if pos.line == 0:
        return Position(origin.line, origin.char + pos.char)
    return Position(origin.line + pos.line, pos.char)


def camera(old_movie: Movie, new_text: str) -> tuple[Movie, list[int]]:
    """New movie for ``new_text`` plus the ids of frames needing recompute.

    Invalidated ids cover the freshly scanned frames and every following
    frame (their ranges shifted, so their tool cells were cleared); frames
    before the edit keep all their cells.
    """
    old_text = old_movie.text
    patch = text_diff(old_text, new_text)
    if patch.is_empty():
        # Identity edit: same frames, cells intact, generation still bumps
        # so stale tool runs from the previous generation stay excluded.
        frames = tuple(f.copy() for f in old_movie.frames)
        return Movie(frames, old_movie.text, old_movie.generation + 1), []

    span_start, span_end = patch.span()
    edit_span = Range(_offset_to_pos(old_text, span_start), _offset_to_pos(old_text, span_end))
    changed, following = old_movie.affected_frames(edit_span)

    frame_offsets = {}
    off = 0
    for f in old_movie.frames:
        frame_offsets[f.id] = off
        off += len(f.text)

    fragment_start_off = frame_offsets[changed[0].id] if changed else 0
    fragment_old = "".join(f.text for f in changed)
    local_ops = tuple(
        PatchOp(op.at - fragment_start_off, op.delete_len, op.insert) for op in patch.ops
    )
    fragment_new = apply_patch(fragment_old, Patch(local_ops))

    # Grow backward: a preceding command ending in '.' was only terminated
    # because the next character was whitespace; if the fragment now starts
    # with something else, that command's extent is no longer settled.
    while changed:
        idx = old_movie.frames.index(changed[0])
        if idx == 0:
            break
        prev = old_movie.frames[idx - 1]
        lookahead = fragment_new or "".join(f.text for f in following)
        if (
            prev.kind == COMMAND_KIND
            and prev.text.endswith(".")
            and lookahead
            and not lookahead[0].isspace()
        ):
            changed.insert(0, prev)
            fragment_new = prev.text + fragment_new
        else:
            break

    # Grow forward while the fragment's scan still depends on what follows.
    following = list(following)
    while True:
        result = _scan(fragment_new)
        rest_first = following[0].text[0] if following and following[0].text else None
        if _self_contained(result, rest_first):
            break
        absorbed = following.pop(0)
        changed.append(absorbed)
        fragment_new += absorbed.text

    origin = changed[0].range.start if changed else Position(0, 0)
    new_frames = [
        make_frame(
            Range(_shift(t.range.start, origin), _shift(t.range.end, origin)),
            t.kind,
            t.text,
        )
        for t in result.tokens
    ]
    new_movie = old_movie.splice_frames(changed, following, new_frames)
    invalidated = [f.id for f in new_frames] + [f.id for f in following]
    return new_movie, invalidated
