"""Shortest army transfers.

Prove modes grow untruncated level sets from the start to the half-way level
``N`` and meet in the middle: the reversed second half of a solution, mirrored,
is itself a forward path of the same problem.  Positions are pruned when their
centroid plus the n-move centroid bound cannot reach ``K - C`` where ``C`` is
the largest level-``N`` centroid and ``K = c(P) + c(mirror(P))``.  ``C`` comes
from a beam estimate and is raised until the run is self-consistent.

Find modes truncate every level to the best ``M`` positions by
``c + beta * sym``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import Checkpointer
from .board import ArmyPreset, Position, mirror, symmetry_invariant
from .engine import Engine, LevelStats, spill
from .errors import ResourceLimitError
from .metrics import army_symmetry, centroid
from .movegen import Move, apply_move, jump_paths, legal_moves

log = logging.getLogger(__name__)

MODES = ("prove", "forward-prove", "find", "palindrome-prove", "palindrome-find")
DEFAULT_ESTIMATE_BEAM = 10 ** 6


@dataclass
class TransferConfig:
    preset: ArmyPreset
    length: int | None = None
    mode: str = "prove"
    jumps_only: bool = False
    beam: int | None = None
    beta: int = 0
    cmax: int | None = None
    estimate_beam: int = DEFAULT_ESTIMATE_BEAM
    strict_middle: bool = True
    max_levels: int = 200
    memory_cap: int | None = None
    threads: int | None = None
    checkpoint: str | None = None
    resume: bool = False

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        proving = self.mode in ("prove", "forward-prove", "palindrome-prove")
        if proving and self.beam is not None:
            raise ValueError("prove modes do not allow beam truncation")
        if proving and (self.length is None or self.length < 0):
            raise ValueError("prove modes need a nonnegative target length")
        if not proving and (self.beam is None or self.beam < 1):
            raise ValueError("find modes need a beam width M >= 1")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.estimate_beam < 1:
            raise ValueError("estimate beam must be positive")


@dataclass
class CmaxRecord:
    N: int
    value: int
    self_consistent: bool
    observed: int | None = None
    clamped: bool = False

    def as_dict(self) -> dict:
        return {"N": self.N, "value": self.value, "selfConsistent": self.self_consistent,
                "observed": self.observed, "clamped": self.clamped}


@dataclass
class TransferOutcome:
    mode: str
    length: int | None
    verdict: str  # "solution", "none", "inconclusive", "failed"
    solution: list[Move] | None = None
    levels: list[LevelStats] = field(default_factory=list)
    cmax_trail: list[CmaxRecord] = field(default_factory=list)
    palindromic_meets: int | None = None
    error: str | None = None
    runtime_ms: int = 0


def mirror_constant(preset: ArmyPreset) -> int:
    """``K`` with ``c(mirror(P)) = K - c(P)`` for every army ``P`` of this size."""
    return centroid(preset.start) + centroid(mirror(preset.start, preset.board, preset.mirror))


def symmetry_floor(size: int, length: int, level: int) -> int:
    """Least ``sym`` a palindromic solution of ``length`` can have at ``level``."""
    n, odd = divmod(length, 2)
    t = size - 1 if odd else size
    return t - 2 * (n - level)


def _engine(cfg: TransferConfig, canonical_ok: bool = True) -> Engine:
    p = cfg.preset
    canon = canonical_ok and symmetry_invariant(p.board, p.start, p.goal)
    return Engine(p.board, p.rules, canonicalize=canon, mirror_kind=p.mirror,
                  memory_cap=cfg.memory_cap, threads=cfg.threads)


def _check_mirror_goal(p: ArmyPreset) -> None:
    if mirror(p.start, p.board, p.mirror) != p.goal:
        raise ValueError("meet-in-the-middle needs goal = mirror(start)")


def _retained(levels) -> int:
    # spilled levels are read-only maps and do not count
    return sum(k.nbytes for k in levels if k.flags.writeable)


def _push(levels: list[np.ndarray], keys: np.ndarray) -> None:
    if levels:
        levels[-1] = spill(levels[-1])
    levels.append(keys)


# --- reconstruction ------------------------------------------------------------


def _walk_back(engine: Engine, p: ArmyPreset, levels: list[np.ndarray], final: Position,
               jumps_only: bool) -> list[Move]:
    """Moves leading from the start to ``final`` through the stored levels."""
    cur = final
    moves = []
    for i in range(len(levels) - 2, -1, -1):
        for back in legal_moves(cur, p.board, p.rules, jumps_only=jumps_only):
            prev = apply_move(cur, back, p.board, p.rules, validate=False)
            if engine.find(levels[i], engine.canonical_row(prev)) >= 0:
                moves.append(back.reversed())
                cur = prev
                break
        else:
            raise RuntimeError(f"reconstruction failed at level {i}")
    moves.reverse()
    return moves


def _mirrored_tail(p: ArmyPreset, head: list[Move]) -> list[Move]:
    """Second half for a first half ``head``: mirrored moves in reverse order."""
    return [m.reversed().map(lambda c: mirror(c, p.board, p.mirror)) for m in reversed(head)]


def _join(engine, p, levels, first: Position, second: Position, middle: Move | None,
          jumps_only: bool) -> list[Move]:
    """Start -> first (+ middle) -> ... -> goal, where mirror(second) reaches the goal."""
    head = _walk_back(engine, p, levels, first, jumps_only)
    back = _walk_back(engine, p, levels, second, jumps_only)
    return head + ([middle] if middle is not None else []) + _mirrored_tail(p, back)


def _find_move(pos: Position, origin, dest, p: ArmyPreset, jumps_only: bool) -> Move:
    for m in legal_moves(pos, p.board, p.rules, jumps_only=jumps_only):
        if m.origin == origin and m.destination == dest:
            return m
    raise RuntimeError("middle move vanished")


def _even_meet(engine, p, levels, jumps_only):
    hits = engine.mirror_hits(levels[-1])
    if len(hits) == 0:
        return None
    pos = engine.position(levels[-1][hits[0]])
    return _join(engine, p, levels, pos, mirror(pos, p.board, p.mirror), None, jumps_only)


def _odd_meet(engine, p, levels, jumps_only):
    meets = engine.odd_meets(levels[-1], jumps_only, limit=1)
    if len(meets) == 0:
        return None
    i, o, d = (int(v) for v in meets[0])
    pos = engine.position(levels[-1][i])
    mid = _find_move(pos, engine.cells[o], engine.cells[d], p, jumps_only)
    q = apply_move(pos, mid, p.board, p.rules, validate=False)
    return _join(engine, p, levels, pos, mirror(q, p.board, p.mirror), mid, jumps_only)


# --- palindromic middles -------------------------------------------------------------


def palindromic_middle(pos: Position, p: ArmyPreset, strict: bool = True,
                       jumps_only: bool = False) -> Move | None:
    """A move ``pos -> mirror(pos)``; strict mode wants a self-mirror path.

    Only positions whose men are all matched but one qualify; the lone man
    ``o`` must travel to ``mirror(o)``.
    """
    board, kind = p.board, p.mirror
    def m(c):
        return mirror(c, board, kind)
    army = pos.blue
    lone = [c for c in army if m(c) not in army]
    if len(lone) != 1:
        return None
    o = lone[0]
    target = m(o)
    dirs = p.rules.directions
    if not jumps_only and (target.x - o.x, target.y - o.y) in dirs:
        return Move((o, target))
    paths = jump_paths(o, army, board, p.rules)
    if not strict:
        return Move(paths[target]) if target in paths else None
    rest = army - {o}
    reach = {o: (o,)} | paths
    for c in sorted(reach):
        path = reach[c]
        if c != o and m(c) == c:
            return Move(path + tuple(m(x) for x in reversed(path[:-1])))
        mc = m(c)
        dx, dy = mc.x - c.x, mc.y - c.y
        if dx % 2 == 0 and dy % 2 == 0 and (dx // 2, dy // 2) in dirs:
            mid = type(c)(c.x + dx // 2, c.y + dy // 2)
            if mid in rest and mc not in rest:
                return Move(path + tuple(m(x) for x in reversed(path)))
    return None


def _palindrome_meets(engine, p, level: np.ndarray, odd: bool, strict: bool, jumps_only: bool,
                      limit: int | None = None):
    """(row index, middle move or None) for every row that closes a palindrome."""
    _, sym = engine.row_stats(level, True)
    want = p.size - 1 if odd else p.size
    out = []
    for i in np.flatnonzero(sym == want):
        pos = engine.position(level[i])
        if not odd:
            out.append((int(i), None))
        else:
            mv = palindromic_middle(pos, p, strict, jumps_only)
            if mv is not None:
                out.append((int(i), mv))
        if limit is not None and len(out) >= limit:
            break
    return out


def _palindrome_solution(engine, p, levels, hit, jumps_only):
    i, mv = hit
    pos = engine.position(levels[-1][i])
    head = _walk_back(engine, p, levels, pos, jumps_only)
    return head + ([mv] if mv is not None else []) + _mirrored_tail(p, head)


# --- searches ------------------------------------------------------------------------


def _beam_levels(engine: Engine, cfg: TransferConfig, depth: int, beam: int, beta: int,
                 on_level=None):
    """Truncated forward search; ``on_level(levels)`` may return a result to stop."""
    levels = [engine.rows([cfg.preset.transfer_start()])]
    stats = [LevelStats(0, 1, cmax=centroid(cfg.preset.start))]
    if on_level is not None:
        r = on_level(levels)
        if r is not None:
            return levels, stats, r
    for n in range(1, depth + 1):
        keys, st = engine.expand_transfer(levels[-1], depth=n, jumps_only=cfg.jumps_only,
                                          beam=beam, beta=beta, retained=_retained(levels))
        st.cmax = engine.max_centroid(keys)
        _push(levels, keys)
        stats.append(st)
        if len(keys) == 0:
            break
        if on_level is not None:
            r = on_level(levels)
            if r is not None:
                return levels, stats, r
    return levels, stats, None


def estimate_cmax(cfg: TransferConfig, N: int, M: int | None = None) -> CmaxRecord:
    """Largest level-``N`` centroid seen by a centroid-truncated search of width ``M``."""
    M = M or cfg.estimate_beam
    if M < 1:
        raise ValueError("M must be positive")
    engine = _engine(cfg)
    levels, stats, _ = _beam_levels(engine, cfg, N, M, 0)
    if len(levels) <= N:
        return CmaxRecord(N, -(1 << 30), False)
    return CmaxRecord(N, stats[N].cmax, False)


def _mcc_run(engine, cfg, N: int, extra: int, C: int, palindrome_len: int | None):
    """Forward MCC levels 0..N; returns (levels, stats, observed level-N max)."""
    p = cfg.preset
    thresh = mirror_constant(p) - C
    run = {"kind": "transfer", "problem": p.name, "rules": p.rules.kind, "N": N, "extra": extra,
           "C": C, "palindrome": palindrome_len, "jumpsOnly": cfg.jumps_only}
    ck = Checkpointer(cfg.checkpoint, cfg.resume)
    levels = [rows for rows, _ in ck.begin(run)]
    stats = []
    for n, keys in enumerate(levels):
        stats.append(LevelStats(n, len(keys), cmax=engine.max_centroid(keys),
                                extra={"resumed": True}))
    if not levels:
        levels = [engine.rows([p.transfer_start()])]
        stats = [LevelStats(0, 1, cmax=centroid(p.start))]
        ck.level(run, 0, levels[0])
    for n in range(len(levels), N + 1):
        if len(levels[-1]) == 0:
            break
        sym_min = None
        if palindrome_len is not None:
            floor = symmetry_floor(p.size, palindrome_len, n)
            sym_min = floor if floor > 0 else None
        keys, st = engine.expand_transfer(
            levels[-1], depth=n, jumps_only=cfg.jumps_only, mcc=True, thresh=thresh,
            remaining=N - n + extra, sym_min=sym_min, retained=_retained(levels))
        st.cmax = engine.max_centroid(keys)
        log.info("N=%d C=%d level %d size %d pruned %d", N, C, n, st.size, st.pruned)
        _push(levels, keys)
        stats.append(st)
        ck.level(run, n, keys)
    observed = stats[-1].cmax if len(levels) == N + 1 else None
    return levels, stats, observed


def _self_consistent(engine, cfg, N, extra, palindrome_len, out: TransferOutcome):
    """C^max loop; returns the final level sets."""
    p = cfg.preset
    K = mirror_constant(p)
    floor = -(-K // 2)
    if cfg.cmax is not None:
        C = cfg.cmax
    elif N == 0:
        C = centroid(p.start)
    else:
        C = estimate_cmax(cfg, N).value
    clamped = C < floor
    C = max(C, floor)
    while True:
        levels, stats, observed = _mcc_run(engine, cfg, N, extra, C, palindrome_len)
        ok = observed is None or observed <= C
        out.cmax_trail.append(CmaxRecord(N, C, ok, observed, clamped))
        out.levels = stats
        if ok:
            return levels
        log.info("C^max_%d raised from %d to %d, restarting", N, C, observed)
        C, clamped = observed, False


def mcc_prove(cfg: TransferConfig) -> TransferOutcome:
    """Does a transfer of exactly ``cfg.length`` moves exist?"""
    t0 = time.perf_counter()
    p = cfg.preset
    _check_mirror_goal(p)
    L = cfg.length
    N, odd = divmod(L, 2)
    out = TransferOutcome("prove", L, "none")
    engine = _engine(cfg)
    try:
        levels = _self_consistent(engine, cfg, N, odd, None, out)
        if len(levels) == N + 1:
            sol = (_odd_meet if odd else _even_meet)(engine, p, levels, cfg.jumps_only)
            if sol is not None:
                out.verdict, out.solution = "solution", sol
    except ResourceLimitError as exc:
        out.verdict, out.error = "inconclusive", str(exc)
    out.runtime_ms = int((time.perf_counter() - t0) * 1000)
    return out


def palindrome_prove(cfg: TransferConfig, count: bool = True) -> TransferOutcome:
    """Is there a palindromic transfer of exactly ``cfg.length`` moves?

    ``palindromic_meets`` counts the distinct level-``N`` positions (up to the
    dedup symmetry) that close a palindrome.
    """
    t0 = time.perf_counter()
    p = cfg.preset
    _check_mirror_goal(p)
    L = cfg.length
    N, odd = divmod(L, 2)
    out = TransferOutcome("palindrome-prove", L, "none")
    engine = _engine(cfg)
    try:
        if odd:
            levels = _self_consistent(engine, cfg, N, 1, L, out)
        else:
            # a mirror-symmetric half-way position has centroid exactly K / 2
            K = mirror_constant(p)
            C = K - K // 2
            levels, out.levels, observed = _mcc_run(engine, cfg, N, 0, C, L)
            out.cmax_trail.append(CmaxRecord(N, C, True, observed))
        if len(levels) == N + 1:
            hits = _palindrome_meets(engine, p, levels[-1], bool(odd), cfg.strict_middle,
                                     cfg.jumps_only, None if count else 1)
            out.palindromic_meets = len(hits)
            if hits:
                out.verdict = "solution"
                out.solution = _palindrome_solution(engine, p, levels, hits[0], cfg.jumps_only)
        else:
            out.palindromic_meets = 0
    except ResourceLimitError as exc:
        out.verdict, out.error = "inconclusive", str(exc)
    out.runtime_ms = int((time.perf_counter() - t0) * 1000)
    return out


def forward_prove(cfg: TransferConfig) -> TransferOutcome:
    """One-directional search to level ``L`` with the goal-centroid prune."""
    t0 = time.perf_counter()
    p = cfg.preset
    L = cfg.length
    out = TransferOutcome("forward-prove", L, "none")
    engine = _engine(cfg)
    goal = centroid(p.goal)
    levels = [engine.rows([p.transfer_start()])]
    out.levels = [LevelStats(0, 1, cmax=centroid(p.start))]
    try:
        for n in range(1, L + 1):
            keys, st = engine.expand_transfer(levels[-1], depth=n, jumps_only=cfg.jumps_only,
                                              mcc=True, thresh=goal, remaining=L - n,
                                              retained=_retained(levels))
            st.cmax = engine.max_centroid(keys)
            _push(levels, keys)
            out.levels.append(st)
            if len(keys) == 0:
                break
        if len(levels) == L + 1:
            goal_pos = Position(p.goal)
            if engine.find(levels[-1], engine.canonical_row(goal_pos)) >= 0:
                out.verdict = "solution"
                out.solution = _walk_back(engine, p, levels, goal_pos, cfg.jumps_only)
    except ResourceLimitError as exc:
        out.verdict, out.error = "inconclusive", str(exc)
    out.runtime_ms = int((time.perf_counter() - t0) * 1000)
    return out


def beam_find(cfg: TransferConfig) -> TransferOutcome:
    """Truncated search for any solution; failure proves nothing.

    After each level ``n`` the goal is looked up directly (length ``n``) and,
    when the goal is the mirrored start, the level is also met with its own
    mirror image (lengths ``2n`` and ``2n + 1``).  ``palindrome-find`` accepts
    only palindromic meets.  ``cfg.length`` caps the solution length.
    """
    t0 = time.perf_counter()
    p = cfg.preset
    palin = cfg.mode == "palindrome-find"
    mirrored = mirror(p.start, p.board, p.mirror) == p.goal
    if palin:
        _check_mirror_goal(p)
    cap = cfg.length if cfg.length is not None else 2 * cfg.max_levels + 1
    engine = _engine(cfg)
    goal_row = engine.canonical_row(Position(p.goal))

    def on_level(levels):
        n = len(levels) - 1
        if n > cap:
            return "stop"
        if not palin and engine.find(levels[-1], goal_row) >= 0:
            return n, None
        if not mirrored:
            return None
        for odd in (0, 1):
            if 2 * n + odd > cap:
                break
            if palin:
                hits = _palindrome_meets(engine, p, levels[-1], bool(odd), cfg.strict_middle,
                                         cfg.jumps_only, 1)
                if hits:
                    return 2 * n + odd, hits[0]
            else:
                meet = (_odd_meet if odd else _even_meet)(engine, p, levels, cfg.jumps_only)
                if meet is not None:
                    return 2 * n + odd, meet
        return None

    out = TransferOutcome(cfg.mode, None, "failed")
    try:
        depth = min(cfg.max_levels, cap)
        levels, out.levels, found = _beam_levels(engine, cfg, depth, cfg.beam, cfg.beta, on_level)
        if found is not None and found != "stop":
            length, what = found
            if what is None:
                sol = _walk_back(engine, p, levels, Position(p.goal), cfg.jumps_only)
            elif palin:
                sol = _palindrome_solution(engine, p, levels, what, cfg.jumps_only)
            else:
                sol = what
            out.verdict, out.solution, out.length = "solution", sol, length
    except ResourceLimitError as exc:
        out.verdict, out.error = "inconclusive", str(exc)
    out.runtime_ms = int((time.perf_counter() - t0) * 1000)
    return out


def run_transfer(cfg: TransferConfig) -> TransferOutcome:
    if cfg.mode == "prove":
        return mcc_prove(cfg)
    if cfg.mode == "forward-prove":
        return forward_prove(cfg)
    if cfg.mode == "palindrome-prove":
        return palindrome_prove(cfg)
    return beam_find(cfg)


# --- oracles ---------------------------------------------------------------------------


def exact_levels_bfs(preset: ArmyPreset, depth: int, jumps_only: bool = False):
    """Unpruned level sets (positions reachable in exactly ``i`` moves)."""
    board, rules = preset.board, preset.rules
    level = {Position(preset.start)}
    out = [level]
    for _ in range(depth):
        level = {apply_move(q, m, board, rules, validate=False)
                 for q in level for m in legal_moves(q, board, rules, jumps_only=jumps_only)}
        out.append(level)
    return out


def transfer_exists_bfs(preset: ArmyPreset, length: int, jumps_only: bool = False) -> bool:
    """Plain bidirectional test on unpruned level sets."""
    board = preset.board
    N, odd = divmod(length, 2)
    levels = exact_levels_bfs(preset, N, jumps_only)
    LN = levels[-1]
    mirrored = {mirror(q, board, preset.mirror) for q in LN}
    if not odd:
        return bool(LN & mirrored)
    for q in LN:
        for m in legal_moves(q, board, preset.rules, jumps_only=jumps_only):
            if apply_move(q, m, board, preset.rules, validate=False) in mirrored:
                return True
    return False


def palindrome_exists_bfs(preset: ArmyPreset, length: int, strict: bool = True,
                          jumps_only: bool = False) -> bool:
    """Palindromic existence from unpruned level sets."""
    N, odd = divmod(length, 2)
    LN = exact_levels_bfs(preset, N, jumps_only)[-1]
    for q in LN:
        if not odd:
            if army_symmetry(q.blue, preset.board, preset.mirror) == preset.size:
                return True
        elif palindromic_middle(q, preset, strict, jumps_only) is not None:
            return True
    return False


def cmax_bfs(preset: ArmyPreset, N: int, jumps_only: bool = False) -> int:
    return max(centroid(q.blue) for q in exact_levels_bfs(preset, N, jumps_only)[-1])


def shortest_transfer_bfs(preset: ArmyPreset, max_length: int, jumps_only: bool = False):
    """Shortest transfer by plain forward BFS with a global visited set."""
    board, rules = preset.board, preset.rules
    start, goal = Position(preset.start), Position(preset.goal)
    if start == goal:
        return 0
    seen = {start}
    frontier = [start]
    for n in range(1, max_length + 1):
        nxt = []
        for q in frontier:
            for m in legal_moves(q, board, rules, jumps_only=jumps_only):
                r = apply_move(q, m, board, rules, validate=False)
                if r == goal:
                    return n
                if r not in seen:
                    seen.add(r)
                    nxt.append(r)
        frontier = nxt
    return None
