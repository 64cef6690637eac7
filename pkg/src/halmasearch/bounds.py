"""Admissible length bounds and sound centroid-increase bounds."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .board import BLUE, PLAYERS, Board, Cell, Position, RuleSet, other
from .metrics import army_distance, cell_centroid


@dataclass(frozen=True)
class BoundReport:
    kind: str
    value: int
    inputs: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value, "inputs": self.inputs}


def game_lower_bound(blue: Iterable[Cell], red: Iterable[Cell], rules: RuleSet) -> int:
    """``max(0, d(B, R) - 2) + 2s - 1`` for equal armies of size ``s``."""
    blue, red = frozenset(blue), frozenset(red)
    if len(blue) != len(red) or not blue:
        raise ValueError("game bound needs two nonempty armies of equal size")
    return max(0, army_distance(blue, red, rules) - 2) + 2 * len(blue) - 1


def winner(p: Position, board: Board) -> str | None:
    """The player whose men fill the opposing base, if any."""
    if p.blue and p.blue == board.red_base:
        return BLUE
    if p.red and p.red == board.blue_base:
        return "red"
    return None


def _base_of_opponent(player: str, board: Board) -> frozenset[Cell]:
    return board.red_base if player == BLUE else board.blue_base


def remaining_game_bound(p: Position, board: Board, rules: RuleSet) -> int:
    """Lower bound on the moves left before either side fills the opposing base.

    For a candidate winner ``w`` with ``s'`` men outside the opposing base,
    ``h_w = max(0, d - 2) + 2 s' - 1`` where ``d`` is the distance from ``w``'s
    army to the union of the opponent's army and the opposing base; the bound
    is the smaller of the two ``h_w``.  Before any man leaves its base that
    union is just the opposing army, so the start value equals
    :func:`game_lower_bound`.
    """
    if winner(p, board) is not None:
        return 0
    best = None
    for w in PLAYERS:
        mine = p.army(w)
        target = _base_of_opponent(w, board)
        outside = len(mine - target)
        d = army_distance(mine, p.army(other(w)) | target, rules)
        h = max(0, d - 2) + 2 * outside - 1
        best = h if best is None else min(best, h)
    return best


def centroid_step_bound(army: Iterable[Cell], rules: RuleSet) -> int:
    """Largest possible one-move change of the army centroid."""
    cs = [cell_centroid(c) for c in army]
    if not cs:
        raise ValueError("empty army")
    return max(cs) - min(cs) + rules.ell


def n_move_bound(delta: int, n: int, ell: int) -> int:
    """``n * delta + ell * n (n - 1) / 2``."""
    if n < 0:
        raise ValueError("negative move count")
    return n * delta + ell * n * (n - 1) // 2


def centroid_n_move_bound(army: Iterable[Cell], n: int, rules: RuleSet) -> int:
    """Upper bound on the centroid gain over any ``n`` moves.

    Move ``k`` (1-based) lands a man at most ``ell * k`` beyond the initial
    leading man, and every moved man started no lower than the initial trailing
    man, so summing per-man net gains gives the closed form.
    """
    return n_move_bound(centroid_step_bound(army, rules), n, rules.ell)


def transfer_lower_bound(army: Iterable[Cell], goal: Iterable[Cell], rules: RuleSet) -> int:
    army, goal = frozenset(army), frozenset(goal)
    if len(army) != len(goal) or not army:
        raise ValueError("army and goal must be nonempty and of equal size")
    return army_distance(army, goal, rules) + len(army) - 1


def preset_bounds(preset) -> list[BoundReport]:
    """Every bound that makes sense at the start of a preset."""
    r = preset.rules
    start, goal = preset.start, preset.goal
    d = army_distance(start, goal, r)
    reports = [
        BoundReport("gameLower", game_lower_bound(start, goal, r),
                    {"d": d, "s": len(start), "rules": r.kind}),
        BoundReport("transferLower", transfer_lower_bound(start, goal, r),
                    {"d": d, "s": len(start), "rules": r.kind}),
        BoundReport("centroidStep", centroid_step_bound(start, r),
                    {"ell": r.ell, "rules": r.kind}),
    ]
    if preset.board.blue_base and preset.board.red_base:
        reports.insert(1, BoundReport(
            "remainingLower", remaining_game_bound(preset.game_start(), preset.board, r),
            {"rules": r.kind}))
    return reports
