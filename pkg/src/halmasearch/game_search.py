"""Shortest cooperative games by breadth-first iterative deepening A*.

Each pass expands whole level sets of game positions, dropping any position
``P`` at level ``i`` with ``i + h(P) > m`` where ``h`` is
:func:`halmasearch.bounds.remaining_game_bound`.  Passes run for increasing
thresholds ``m`` until one contains a win.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .board import BLUE, RED, ArmyPreset, Position, symmetry_invariant
from .checkpoint import Checkpointer
from .bounds import game_lower_bound, remaining_game_bound, winner
from .engine import Engine, LevelStats
from .errors import ResourceLimitError
from .metrics import cell_centroid
from .movegen import Move, apply_move, legal_moves

log = logging.getLogger(__name__)

MODES = ("prove-none", "find-one", "count-all")
FILTERS = frozenset({1, 4, 5})


@dataclass
class GameSearchConfig:
    preset: ArmyPreset
    max_length: int
    mode: str = "find-one"
    filters: frozenset[int] = frozenset()
    iterative: bool | None = None
    memory_cap: int | None = None
    threads: int | None = None
    checkpoint: str | None = None
    resume: bool = False

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.filters = frozenset(self.filters)
        if self.filters and self.mode == "prove-none":
            raise ValueError("solution-property filters are not allowed when proving")
        if not self.filters <= FILTERS:
            raise ValueError(f"unknown filters {sorted(self.filters - FILTERS)}")
        if self.max_length < 0:
            raise ValueError("negative length")


@dataclass
class GameOutcome:
    verdict: str  # "found", "none", "inconclusive"
    max_length: int
    shortest: int | None = None
    winner: str | None = None
    witness: list[Move] | None = None
    count: int | None = None
    count_saturated: bool = False
    levels: list[LevelStats] = field(default_factory=list)
    passes: list[dict] = field(default_factory=list)
    error: str | None = None
    runtime_ms: int = 0


def critical_move(length: int, army_size: int) -> int:
    """The move after which the winner's men all still have to cross."""
    return length - 2 * (army_size - 1)


def game_winner_for_length(length: int) -> str:
    """Blue moves first, so the side making move ``length`` is fixed by parity."""
    return RED if length % 2 == 0 else BLUE


def p5_range(preset: ArmyPreset) -> tuple[int, int]:
    """Diagonals strictly between the two bases."""
    lo = max(cell_centroid(c) for c in preset.board.blue_base) + 1
    hi = min(cell_centroid(c) for c in preset.board.red_base) - 1
    return lo, hi


def property_check(p: Position, move: Move, n: int, length: int, preset: ArmyPreset,
                   filters) -> int | None:
    """First property violated by playing ``move`` as move ``n`` into ``p``.

    ``p`` is the position after the move.  Returns the property number, or
    None if every enabled filter passes.
    """
    alpha = critical_move(length, preset.size)
    win = game_winner_for_length(length)
    mover = BLUE if n % 2 == 1 else RED
    if 1 in filters and mover == win and move.is_step:
        return 1
    if 4 in filters and mover == win and n >= alpha:
        target = preset.board.red_base if win == BLUE else preset.board.blue_base
        if len(p.army(win) & target) < (n - alpha) // 2 + 1:
            return 4
    if 5 in filters and alpha / 2 <= n <= alpha:
        lo, hi = p5_range(preset)
        seen = {cell_centroid(c) for c in p.occupied}
        if any(k not in seen for k in range(lo, hi + 1)):
            return 5
    return None


class _Pass:
    """One threshold pass; keeps every sealed level for reconstruction."""

    def __init__(self, engine: Engine, cfg: GameSearchConfig, threshold: int):
        self.e = engine
        self.cfg = cfg
        self.m = threshold
        self.levels: list[np.ndarray] = []
        self.stats: list[LevelStats] = []

    def retained(self) -> int:
        return sum(k.nbytes for k in self.levels)

    def run(self, start: Position):
        """Returns (win level or None, counts at the last level, win mask)."""
        e, cfg, m = self.e, self.cfg, self.m
        p = cfg.preset
        run = {"kind": "game", "problem": p.name, "rules": p.rules.kind, "threshold": m,
               "mode": cfg.mode, "filters": sorted(cfg.filters)}
        ck = Checkpointer(cfg.checkpoint, cfg.resume)
        h0 = remaining_game_bound(start, p.board, p.rules)
        loaded = ck.begin(run)
        if loaded:
            self.levels = [rows for rows, _ in loaded]
            self.stats = [LevelStats(i, len(r), extra={"resumed": True})
                          for i, r in enumerate(self.levels)]
            keys, counts = loaded[-1][0], loaded[-1][1]
            depth0 = len(loaded) - 1
            if depth0 > 0 and cfg.mode != "count-all":
                wins = e.wins(keys, (depth0 - 1) % 2)
                if wins.any():
                    return depth0, counts, wins
        else:
            keys = e.rows([start])
            counts = np.ones(len(keys), np.uint64)
            self.levels.append(keys)
            self.stats.append(LevelStats(0, 1, extra={"h": h0}))
            ck.level(run, 0, keys, counts)
            depth0 = 0
        if h0 > m:
            return None, counts, None
        alpha = critical_move(m, p.size)
        win_side = 1 if game_winner_for_length(m) == RED else 0
        p5 = p5_range(p) if 5 in cfg.filters else None
        for depth in range(depth0, m):
            if len(keys) == 0:
                break
            n = depth + 1
            mover = depth % 2
            winner_moves = mover == win_side
            keys, counts, st = e.expand_game(
                keys, counts, depth=depth, max_len=m, prune=True, lookahead=True,
                jumps_only=1 in cfg.filters and winner_moves,
                p4_need=((n - alpha) // 2 + 1) if (4 in cfg.filters and winner_moves
                                                   and n >= alpha) else 0,
                p5=p5 if (p5 is not None and alpha / 2 <= n <= alpha) else None,
                retained=self.retained())
            wins = e.wins(keys, mover)
            st.extra["wins"] = int(wins.sum())
            self.stats.append(st)
            log.info("threshold %d level %d size %d pruned %d", m, n, st.size, st.pruned)
            if cfg.mode == "count-all" and n < m:
                keys, counts = keys[~wins], counts[~wins]
            self.levels.append(keys)
            ck.level(run, n, keys, counts)
            if cfg.mode == "count-all":
                if n == m:
                    return (n if wins.any() else None), counts, wins
            elif wins.any():
                return n, counts, wins
        return None, counts, None


def _reconstruct(engine: Engine, preset: ArmyPreset, levels: list[np.ndarray], final: Position
                 ) -> list[Move]:
    """Walk back from ``final`` through the stored levels, one reverse move at a time."""
    board, rules = preset.board, preset.rules
    cur = final
    moves: list[Move] = []
    for i in range(len(levels) - 2, -1, -1):
        mover = BLUE if i % 2 == 0 else RED
        for back in legal_moves(cur, board, rules, mover):
            prev = apply_move(cur, back, board, rules, mover, validate=False)
            if engine.find(levels[i], engine.canonical_row(prev)) >= 0:
                moves.append(back.reversed())
                cur = prev
                break
        else:
            raise RuntimeError(f"reconstruction failed at level {i}")
    moves.reverse()
    return moves


def search_game(cfg: GameSearchConfig) -> GameOutcome:
    """Shortest game up to ``cfg.max_length`` moves (see module docstring)."""
    t0 = time.perf_counter()
    preset = cfg.preset
    board = preset.board
    start = preset.game_start()
    canon = symmetry_invariant(board, board.blue_base, board.red_base)
    engine = Engine(board, preset.rules, game=True, canonicalize=canon,
                    mirror_kind=preset.mirror, memory_cap=cfg.memory_cap, threads=cfg.threads)
    out = GameOutcome("none", cfg.max_length)
    h0 = remaining_game_bound(start, board, preset.rules)
    iterative = cfg.iterative if cfg.iterative is not None else cfg.mode == "find-one"
    if cfg.mode == "count-all" or not iterative:
        thresholds = [cfg.max_length]
    else:
        thresholds = list(range(min(h0, cfg.max_length), cfg.max_length + 1))
    try:
        for m in thresholds:
            ps = _Pass(engine, cfg, m)
            level, counts, wins = ps.run(start)
            out.levels = ps.stats
            out.passes.append({"threshold": m, "levels": len(ps.levels) - 1,
                               "nodes": int(sum(s.size for s in ps.stats))})
            if level is None:
                continue
            keys = ps.levels[-1]
            idx = int(np.flatnonzero(wins)[0])
            final = engine.position(keys[idx])
            w = winner(final, board)
            out.verdict = "found"
            out.shortest = level
            out.winner = w
            if cfg.mode == "count-all":
                total = counts[wins].astype(object).sum()
                sat = bool((counts[wins] == np.iinfo(np.uint64).max).any())
                out.count = int(total)
                out.count_saturated = sat
            out.witness = _reconstruct(engine, preset, ps.levels, final)
            break
    except ResourceLimitError as exc:
        out.verdict = "inconclusive"
        out.error = str(exc)
        out.passes.append({"threshold": None, "partial": exc.stats})
    out.runtime_ms = int((time.perf_counter() - t0) * 1000)
    return out


def level_counts(preset: ArmyPreset, depth: int, memory_cap: int | None = None
                 ) -> list[tuple[int, int]]:
    """(distinct positions, move sequences) per level of the unpruned game tree.

    Positions are deduplicated up to the board's start/goal-preserving
    reflection when the instance allows it; sequence counts saturate.
    """
    board = preset.board
    canon = symmetry_invariant(board, board.blue_base, board.red_base)
    e = Engine(board, preset.rules, game=True, canonicalize=canon, mirror_kind=preset.mirror,
               memory_cap=memory_cap)
    keys = e.rows([preset.game_start()])
    counts = np.ones(len(keys), np.uint64)
    out = []
    for d in range(depth):
        keys, counts, _ = e.expand_game(keys, counts, depth=d, max_len=depth, prune=False)
        out.append((len(keys), int(counts.astype(object).sum())))
    return out


def shortest_game_bfs(preset: ArmyPreset, max_length: int) -> int | None:
    """Plain unpruned breadth-first search over explicit positions (oracle)."""
    board, rules = preset.board, preset.rules
    start = preset.game_start()
    seen = {start}
    frontier = [start]
    for n in range(1, max_length + 1):
        nxt = []
        for p in frontier:
            for m in legal_moves(p, board, rules):
                q = apply_move(p, m, board, rules, validate=False)
                if winner(q, board) is not None:
                    return n
                if q not in seen:
                    seen.add(q)
                    nxt.append(q)
        frontier = nxt
        if not frontier:
            break
    return None


def lower_bound(preset: ArmyPreset) -> int:
    return game_lower_bound(preset.start, preset.goal, preset.rules)
