"""Reference move generation over ``Position`` values.

This is the readable, set-based implementation.  The heavy searches use the
compiled kernels in :mod:`halmasearch.engine`; the two are cross-checked in
the test suite.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable

from .board import BLUE, Board, Cell, Position, RuleSet, other
from .errors import IllegalMoveError, ResourceLimitError


@dataclass(frozen=True)
class Move:
    path: tuple[Cell, ...]

    def __post_init__(self) -> None:
        if len(self.path) < 2:
            raise ValueError("a move needs at least two cells")

    @property
    def origin(self) -> Cell:
        return self.path[0]

    @property
    def destination(self) -> Cell:
        return self.path[-1]

    @property
    def is_step(self) -> bool:
        return len(self.path) == 2 and max(
            abs(self.path[1].x - self.path[0].x), abs(self.path[1].y - self.path[0].y)) == 1

    @property
    def kind(self) -> str:
        return "step" if self.is_step else "jump"

    def reversed(self) -> "Move":
        return Move(tuple(reversed(self.path)))

    def map(self, f) -> "Move":
        return Move(tuple(f(c) for c in self.path))


def _shift(c: Cell, d, k: int = 1) -> Cell:
    return Cell(c.x + k * d[0], c.y + k * d[1])


def jump_paths(origin: Cell, occupied: frozenset[Cell], board: Board,
               rules: RuleSet) -> dict[Cell, tuple[Cell, ...]]:
    """Every landing cell reachable by a chain from ``origin``, with one path.

    Occupancy is static except that the origin counts as empty.  The origin
    itself is reachable but is not returned.
    """
    occ = occupied - {origin}
    parent: dict[Cell, Cell | None] = {origin: None}
    queue = deque([origin])
    while queue:
        c = queue.popleft()
        for d in rules.directions:
            mid, land = _shift(c, d), _shift(c, d, 2)
            if mid in occ and land in board.cells and land not in occ and land not in parent:
                parent[land] = c
                queue.append(land)
    out = {}
    for dest in parent:
        if dest == origin:
            continue
        path = [dest]
        while parent[path[-1]] is not None:
            path.append(parent[path[-1]])
        out[dest] = tuple(reversed(path))
    return out


def legal_moves(p: Position, board: Board, rules: RuleSet, mover: str | None = None,
                jumps_only: bool = False) -> list[Move]:
    """All (origin, destination) moves of ``mover`` with one witness path each.

    ``mover`` defaults to the side to move (games) or the blue army (transfers).
    The result is sorted by (origin, destination) for reproducibility.
    """
    mover = mover or p.to_move or BLUE
    occupied = p.occupied
    moves = []
    for o in sorted(p.army(mover)):
        if not jumps_only:
            for d in rules.directions:
                t = _shift(o, d)
                if t in board.cells and t not in occupied:
                    moves.append(Move((o, t)))
        for path in jump_paths(o, occupied, board, rules).values():
            moves.append(Move(path))
    moves.sort(key=lambda m: (m.origin, m.destination))
    return moves


def check_move(p: Position, move: Move, board: Board, rules: RuleSet,
               mover: str | None = None) -> None:
    """Raise :class:`IllegalMoveError` naming the first violated condition."""
    mover = mover or p.to_move or BLUE
    path = move.path
    for c in path:
        if c not in board.cells:
            raise IllegalMoveError("off-board", c)
    origin = path[0]
    if origin not in p.army(mover):
        raise IllegalMoveError("origin empty" if origin not in p.occupied
                               else "origin holds the other army", origin)
    occ = p.occupied - {origin}
    dirs = set(rules.directions)
    if path[-1] == origin:
        raise IllegalMoveError("null move", origin)
    if len(path) == 2:
        delta = (path[1].x - origin.x, path[1].y - origin.y)
        if delta in dirs:
            if path[1] in occ:
                raise IllegalMoveError("destination occupied", path[1])
            return
    for a, b in zip(path, path[1:]):
        delta = (b.x - a.x, b.y - a.y)
        if delta[0] % 2 or delta[1] % 2 or (delta[0] // 2, delta[1] // 2) not in dirs:
            raise IllegalMoveError("bad displacement", b)
        mid = Cell((a.x + b.x) // 2, (a.y + b.y) // 2)
        if mid not in occ:
            raise IllegalMoveError("missing jumped man", mid)
        if b in occ:
            raise IllegalMoveError("destination occupied", b)


def apply_move(p: Position, move: Move, board: Board, rules: RuleSet,
               mover: str | None = None, validate: bool = True) -> Position:
    mover = mover or p.to_move or BLUE
    if validate:
        check_move(p, move, board, rules, mover)
    army = (p.army(mover) - {move.origin}) | {move.destination}
    q = p.with_army(mover, army)
    if p.to_move is not None:
        q = Position(q.blue, q.red, other(p.to_move))
    return q


def successors(p: Position, board: Board, rules: RuleSet, mover: str | None = None,
               jumps_only: bool = False) -> Iterable[tuple[Move, Position]]:
    for m in legal_moves(p, board, rules, mover, jumps_only):
        yield m, apply_move(p, m, board, rules, mover, validate=False)


@dataclass(frozen=True)
class LevelSet:
    depth: int
    positions: frozenset[Position]

    def __len__(self) -> int:
        return len(self.positions)


def expand_level(level: LevelSet, board: Board, rules: RuleSet,
                 mover: Callable[[int], str | None] | None = None,
                 pruner: Callable[[Position, int], bool] | None = None,
                 normalize: Callable[[Position], Position] | None = None,
                 jumps_only: bool = False, max_positions: int | None = None) -> LevelSet:
    """Successors of every member, normalized, minus pruned ones, deduplicated.

    ``mover(depth)`` names the army that moves from ``depth`` (``None`` means
    the position's own side to move); ``pruner(position, depth)`` returns True
    to drop a successor at the new depth; ``normalize`` is usually
    :func:`halmasearch.board.canonical` or the identity.
    """
    depth = level.depth + 1
    out: set[Position] = set()
    who = mover(level.depth) if mover else None
    for p in level.positions:
        for _, q in successors(p, board, rules, who, jumps_only):
            if normalize is not None:
                q = normalize(q)
            if pruner is not None and pruner(q, depth):
                continue
            out.add(q)
            if max_positions is not None and len(out) > max_positions:
                raise ResourceLimitError(
                    f"level {depth} exceeded {max_positions} positions",
                    {"depth": depth, "partial_size": len(out)})
    return LevelSet(depth, frozenset(out))
