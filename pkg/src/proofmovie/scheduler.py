"""Runs registered tools against movie snapshots and collects their cells.

Tools follow the observer pattern: each update hands every tool the new
snapshot on its own thread.  A tool declares which cells it reads and which
it fills; provides sets must be pairwise disjoint so no two tools ever race
on a cell, and the requires/provides relation must stay acyclic so consumers
can always be fed.  Consumers are started together with producers but block
per frame until the cells they need exist (or their providers finish).

Results are merged under one lock and only if they were computed against the
current generation; anything older is dropped, which makes merges safe under
races between an update and a straggling tool.  Every merge bumps a data
marker the server uses to decide whether a polling client is current.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .movie import CELL_COMMAND, CELL_DEPENDENCIES, COMMAND_KIND, Frame, Movie

log = logging.getLogger(__name__)

#: Cells filled by the scheduler itself before any tool runs.
SYSTEM_CELLS = frozenset({CELL_COMMAND, CELL_DEPENDENCIES})


class ToolConflictError(Exception):
    """A tool claims a cell some registered tool already provides."""


class DependencyCycleError(Exception):
    """The requires/provides relation over registered tools has a cycle."""


class CellViolationError(Exception):
    """A tool submitted a cell outside its declared provides set."""


@dataclass
class ToolDescriptor:
    name: str
    requires: frozenset[str]
    provides: frozenset[str]
    run: Callable[["ToolRun"], None]

    def __post_init__(self) -> None:
        self.requires = frozenset(self.requires)
        self.provides = frozenset(self.provides)


@dataclass
class ToolResult:
    generation: int
    frame_id: int
    cells: dict[str, object]


class ToolRun:
    """Handle passed to a tool's entry point for one generation.

    Carries the snapshot, the invalidated frame ids and the generation the
    run is computing against, plus the submission and coordination surface.
    Runs are cancelled cooperatively: the tool checks ``cancelled`` between
    frames and simply returns; any results it submits anyway are rejected by
    the generation check.
    """

    def __init__(self, scheduler: Scheduler, tool: ToolDescriptor, movie: Movie,
                 invalidated: list[int], cancel: threading.Event):
        self._scheduler = scheduler
        self.tool = tool
        self.movie = movie
        self.invalidated = list(invalidated)
        self.generation = movie.generation
        self._cancel = cancel

    @property
    def cancelled(self) -> bool:
        return self._cancel.is_set()

    def submit(self, frame_id: int, cells: dict[str, object]) -> bool:
        return self._scheduler.submit_result(
            self, ToolResult(self.generation, frame_id, dict(cells))
        )

    def wait_for_cells(self, frame_id: int, names: Iterable[str]) -> Optional[dict[str, object]]:
        """Block until ``names`` are present on the frame, providers of the
        missing ones are done, or the run is cancelled (then None)."""
        return self._scheduler._wait_for_cells(self, frame_id, frozenset(names))

    def mark_done(self) -> None:
        self._scheduler._mark_done(self)


class Scheduler:
    """Per-document tool registry and run coordinator."""

    def __init__(self) -> None:
        self.condition = threading.Condition()
        self._tools: dict[str, ToolDescriptor] = {}
        self._movie: Movie = Movie.empty()
        self._cancel = threading.Event()
        self._runs: dict[str, ToolRun] = {}
        self._done: set[str] = set()
        self._marker = 0

    # -- registration ------------------------------------------------------

    def register_tool(self, desc: ToolDescriptor) -> ToolDescriptor:
        with self.condition:
            if CELL_COMMAND in desc.provides:
                raise ToolConflictError("the command cell is owned by the document")
            for other in self._tools.values():
                overlap = desc.provides & other.provides
                if overlap:
                    raise ToolConflictError(
                        f"{desc.name} and {other.name} both provide {sorted(overlap)}"
                    )
            candidate = dict(self._tools)
            candidate[desc.name] = desc
            self._check_acyclic(candidate)
            self._tools[desc.name] = desc
            return desc

    @staticmethod
    def _check_acyclic(tools: dict[str, ToolDescriptor]) -> list[str]:
        """Topological order of tool names; raises on a cycle."""
        provider_of = {}
        for t in tools.values():
            for cell in t.provides:
                provider_of[cell] = t.name
        deps = {
            name: {provider_of[c] for c in t.requires if c in provider_of and provider_of[c] != name}
            for name, t in tools.items()
        }
        order: list[str] = []
        seen: set[str] = set()
        while len(order) < len(tools):
            ready = [n for n in tools if n not in seen and deps[n] <= seen]
            if not ready:
                remaining = sorted(set(tools) - seen)
                raise DependencyCycleError(f"cell dependency cycle among {remaining}")
            for n in sorted(ready):
                order.append(n)
                seen.add(n)
        return order

    # -- update path -------------------------------------------------------

    def notify_update(self, movie: Movie, invalidated: list[int]) -> dict[str, ToolRun]:
        """Cancel stale runs, seed dependency cells, start one run per tool."""
        with self.condition:
            self._cancel.set()
            self._cancel = threading.Event()
            self._movie = movie
            self._seed_dependencies(movie)
            self._done = set()
            order = self._check_acyclic(self._tools)
            runs = {
                name: ToolRun(self, self._tools[name], movie, invalidated, self._cancel)
                for name in order
            }
            self._runs = runs
            threads = [
                threading.Thread(
                    target=self._run_tool, args=(runs[name],),
                    name=f"tool-{name}-g{movie.generation}", daemon=True,
                )
                for name in order  # providers first; consumers block on waits
            ]
            self.condition.notify_all()
        for t in threads:
            t.start()
        return runs

    @staticmethod
    def _seed_dependencies(movie: Movie) -> None:
        # Linear assignment: each command frame depends on the previous one.
        prev: Optional[Frame] = None
        for frame in movie.frames:
            if frame.kind != COMMAND_KIND:
                continue
            if CELL_DEPENDENCIES not in frame.cells:
                frame.cells[CELL_DEPENDENCIES] = [prev.id] if prev else []
            prev = frame

    def _run_tool(self, run: ToolRun) -> None:
        try:
            run.tool.run(run)
        except Exception:
            log.exception("tool %s failed at generation %d", run.tool.name, run.generation)
        finally:
            self._mark_done(run)

    # -- results -----------------------------------------------------------

    def submit_result(self, run: ToolRun, result: ToolResult) -> bool:
        extra = set(result.cells) - run.tool.provides
        if extra:
            raise CellViolationError(
                f"{run.tool.name} submitted cells outside its provides set: {sorted(extra)}"
            )
        with self.condition:
            if result.generation != self._movie.generation:
                return False
            frame = self._movie.frame_by_id(result.frame_id)
            if frame is None:
                return False
            frame.cells.update(result.cells)
            self._marker += 1
            self.condition.notify_all()
            return True

    def _wait_for_cells(self, run: ToolRun, frame_id: int, names: frozenset[str]):
        with self.condition:
            while True:
                if run.cancelled or run.generation != self._movie.generation:
                    return None
                frame = self._movie.frame_by_id(frame_id)
                if frame is None:
                    return None
                missing = names - set(frame.cells)
                if not missing:
                    return {n: frame.cells[n] for n in names}
                providers = {
                    t.name for t in self._tools.values() if t.provides & missing
                }
                if providers <= self._done:
                    return {n: frame.cells[n] for n in names if n in frame.cells}
                self.condition.wait()

    def _mark_done(self, run: ToolRun) -> None:
        with self.condition:
            if run.generation == self._movie.generation:
                self._done.add(run.tool.name)
                self.condition.notify_all()

    # -- queries -----------------------------------------------------------

    def all_done(self) -> bool:
        with self.condition:
            return set(self._tools) <= self._done

    def get_data(self, frame_id: int) -> dict[str, object]:
        """Union of all tool-submitted cells for the frame so far."""
        with self.condition:
            frame = self._movie.frame_by_id(frame_id)
            if frame is None:
                return {}
            return {k: v for k, v in frame.cells.items() if k != CELL_COMMAND}

    @property
    def movie(self) -> Movie:
        with self.condition:
            return self._movie

    @property
    def marker(self) -> int:
        with self.condition:
            return self._marker

    def join(self, timeout: float = 10.0) -> bool:
        """Wait until every tool is done for the current generation."""
        deadline = time.monotonic() + timeout
        with self.condition:
            while not (set(self._tools) <= self._done):
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                self.condition.wait(remaining)
            return True
