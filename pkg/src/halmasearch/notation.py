"""Move notation: parsing, palindrome expansion, formatting, replay, rendering.

A move is written as the cells it visits joined by ``-`` (``a3-c3-e3``).
Moves are separated by commas or whitespace.  ``(reflect)`` closes a
palindromic half solution, and a final move ending in ``-`` is a half middle
move completed by its own mirrored reverse.  ``# key: value`` header lines
carry metadata.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .board import BLUE, RED, ArmyPreset, Board, Cell, Position, make_preset, mirror, other
from .bounds import winner
from .errors import IllegalMoveError, NotationError
from .metrics import army_symmetry, centroid
from .movegen import Move, apply_move, check_move

_TOKEN = re.compile(r"\(\s*(reflect|red wins|blue wins)\s*\)|[^\s,()]+", re.IGNORECASE)
_CELL = re.compile(r"^[a-zA-Z]\d+$")


@dataclass(frozen=True)
class MoveToken:
    cells: tuple[str, ...]
    half_middle: bool = False

    def __str__(self) -> str:
        return "-".join(self.cells) + ("-" if self.half_middle else "")


@dataclass
class Solution:
    moves: list[Move]
    problem: str | None = None
    rules: int | None = None
    kind: str = "transfer"  # or "game"
    jumps_only: bool = False
    palindromic: bool = False
    claimed_winner: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def players(self) -> list[str]:
        if self.kind != "game":
            return [BLUE] * len(self.moves)
        return [BLUE if i % 2 == 0 else RED for i in range(len(self.moves))]

    def __len__(self) -> int:
        return len(self.moves)


# --- parsing ------------------------------------------------------------------


def tokenize(body: str) -> tuple[list[MoveToken], bool, str | None]:
    """Split move text into tokens; returns (tokens, reflect flag, claimed winner)."""
    tokens: list[MoveToken] = []
    reflect = False
    claim = None
    for m in _TOKEN.finditer(body):
        if m.group(1):
            word = m.group(1).lower()
            if word == "reflect":
                if reflect:
                    raise NotationError("duplicate (reflect)")
                reflect = True
            else:
                claim = word.split()[0]
            continue
        if reflect:
            raise NotationError(f"move {m.group(0)!r} after (reflect)")
        text = m.group(0)
        half = text.endswith("-")
        parts = text[:-1].split("-") if half else text.split("-")
        for p in parts:
            if not _CELL.match(p):
                raise NotationError(f"malformed cell {p!r} in move {text!r}")
        if not half and len(parts) < 2:
            raise NotationError(f"move {text!r} needs at least two cells")
        tokens.append(MoveToken(tuple(p.lower() for p in parts), half))
    for t in tokens[:-1]:
        if t.half_middle:
            raise NotationError(f"half move {t} must be the last move")
    if tokens and tokens[-1].half_middle and not reflect:
        raise NotationError(f"dangling half move {tokens[-1]} without (reflect)")
    return tokens, reflect, claim


def _contiguous(path: tuple[Cell, ...]) -> bool:
    """Rule-independent geometry: one king step, or hops of exactly two cells."""
    if len(path) == 2:
        dx, dy = path[1].x - path[0].x, path[1].y - path[0].y
        if max(abs(dx), abs(dy)) == 1:
            return True
    for a, b in zip(path, path[1:]):
        dx, dy = b.x - a.x, b.y - a.y
        if dx % 2 or dy % 2 or max(abs(dx), abs(dy)) != 2:
            return False
    return True


def complete_half(path: tuple[Cell, ...], board: Board, kind: str = "xy") -> tuple[Cell, ...]:
    """Full middle move from its first half.

    If the half ends on the mirror axis the mirrored cells continue from the
    one before it; otherwise the last hop crosses the axis to the mirror of
    the last cell.
    """
    m = [mirror(c, board, kind) for c in path]
    if m[-1] == path[-1]:
        return path + tuple(reversed(m[:-1]))
    return path + tuple(reversed(m))


def expand(moves: list[Move], half: tuple[Cell, ...] | None, board: Board,
           kind: str = "xy") -> list[Move]:
    """Half solution -> full palindromic solution."""
    tail = [mv.reversed().map(lambda c: mirror(c, board, kind)) for mv in reversed(moves)]
    mid = [Move(complete_half(half, board, kind))] if half is not None else []
    return list(moves) + mid + tail


def read_header(text: str) -> tuple[dict, str]:
    meta, body = {}, []
    for line in text.splitlines():
        s = line.strip()
        if s.startswith("#"):
            kv = s[1:].split(":", 1)
            if len(kv) == 2 and re.fullmatch(r"[\w-]+", kv[0].strip()):
                meta[kv[0].strip().lower()] = kv[1].strip()
            continue
        body.append(line)
    return meta, "\n".join(body)


def preset_for(meta: dict, preset: ArmyPreset | None = None) -> ArmyPreset:
    if preset is not None:
        return preset
    if "preset" not in meta:
        raise NotationError("no preset given and none named in the header")
    return make_preset(meta["preset"], int(meta["rules"]) if "rules" in meta else None)


def parse_solution(text: str, preset: ArmyPreset | None = None, kind: str | None = None
                   ) -> Solution:
    """Parse (and palindrome-expand) a solution.

    ``preset`` supplies the board and mirror; without it the header must
    name one.  ``kind`` defaults to the header value, else ``transfer``.
    """
    meta, body = read_header(text)
    preset = preset_for(meta, preset)
    board = preset.board
    tokens, reflect, claim = tokenize(body)
    moves: list[Move] = []
    half = None
    for t in tokens:
        try:
            path = tuple(board.parse_cell(c) for c in t.cells)
        except ValueError as exc:
            raise NotationError(f"{exc} in move {t}") from None
        if t.half_middle:
            if len(path) > 1 and not _contiguous(path):
                raise NotationError(f"non-contiguous path {t}")
            half = path
            continue
        if not _contiguous(path):
            raise NotationError(f"non-contiguous path {t}")
        moves.append(Move(path))
    if reflect:
        full = expand(moves, half, board, preset.mirror)
        if half is not None and not _contiguous(full[len(moves)].path):
            raise NotationError("completed middle move is not contiguous")
    else:
        full = moves
    kind = kind or meta.get("kind", "transfer")
    if kind not in ("game", "transfer"):
        raise NotationError(f"unknown kind {kind!r}")
    jumps = meta.get("jumps-only", "no").lower() in ("yes", "true", "1")
    return Solution(full, preset.name, preset.rules.kind, kind, jumps, reflect, claim, meta)


def format_solution(sol: Solution, board: Board, kind: str = "xy", compress: bool = False,
                    per_line: int = 6) -> str:
    """Notation text; ``compress`` writes a palindrome as its half plus ``(reflect)``."""
    names = [_move_text(m, board) for m in sol.moves]
    suffix = ""
    if compress and is_palindromic(sol.moves, board, kind):
        n, odd = divmod(len(sol.moves), 2)
        names = names[:n]
        if odd:
            mid = sol.moves[n].path
            names.append("-".join(board.cell_name(c) for c in mid[: (len(mid) + 1) // 2]) + "-")
        suffix = " (reflect)"
    lines = [", ".join(names[i:i + per_line]) for i in range(0, len(names), per_line)]
    text = ",\n".join(lines) + suffix
    if sol.kind == "game" and sol.claimed_winner:
        text += f"\n({sol.claimed_winner} wins)"
    return text


def _move_text(m: Move, board: Board) -> str:
    return "-".join(board.cell_name(c) for c in m.path)


def is_palindromic(moves: list[Move], board: Board, kind: str = "xy") -> bool:
    """Second half equals the mirrored reverse of the first, move by move."""
    L = len(moves)
    for k in range(L - 1, (L - 1) // 2, -1):
        mirrored = moves[L - 1 - k].reversed().map(lambda c: mirror(c, board, kind))
        if moves[k].path != mirrored.path:
            return False
    if L % 2:
        mid = moves[L // 2]
        if mid.reversed().map(lambda c: mirror(c, board, kind)).path != mid.path:
            return False
    return True


# --- verification ------------------------------------------------------------------


@dataclass
class VerificationReport:
    legal: bool
    moves: int
    final: Position
    goal_reached: bool = False
    winner: str | None = None
    error: str | None = None
    error_index: int | None = None
    error_cell: str | None = None
    error_reason: str | None = None
    centroids: list[int] = field(default_factory=list)
    symmetry: list[int] = field(default_factory=list)
    steps: dict = field(default_factory=dict)
    jumps: dict = field(default_factory=dict)
    palindromic: bool = False
    claim_ok: bool = True

    @property
    def ok(self) -> bool:
        return self.legal and self.claim_ok and self.goal_reached

    def as_dict(self, board: Board) -> dict:
        d = {"legal": self.legal, "moves": self.moves, "goalReached": self.goal_reached,
             "winner": self.winner, "palindromic": self.palindromic,
             "steps": self.steps, "jumps": self.jumps,
             "centroidTrace": self.centroids, "symmetryTrace": self.symmetry}
        if self.error:
            d["error"] = {"message": self.error, "move": self.error_index,
                          "cell": self.error_cell, "reason": self.error_reason}
        return d


def verify_solution(preset: ArmyPreset, sol: Solution) -> VerificationReport:
    """Replay every hop against the occupancy at that moment.

    For games the side to move alternates from blue and play must stop at the
    first win.  Traces hold the mover's centroid and symmetry after each move
    (the blue army for transfers), starting with the initial position.
    """
    board, rules = preset.board, preset.rules
    game = sol.kind == "game"
    pos = preset.game_start() if game else preset.transfer_start()
    sides = (BLUE, RED) if game else (BLUE,)
    steps = {s: 0 for s in sides}
    jumps = {s: 0 for s in sides}
    rep = VerificationReport(True, len(sol.moves), pos, steps=steps, jumps=jumps,
                             palindromic=is_palindromic(sol.moves, board, preset.mirror))
    rep.centroids.append(centroid(pos.blue))
    rep.symmetry.append(army_symmetry(pos.blue, board, preset.mirror))
    mover = BLUE
    for i, mv in enumerate(sol.moves, 1):
        try:
            if game and winner(pos, board) is not None:
                raise IllegalMoveError("game already won", mv.origin)
            if sol.jumps_only and mv.is_step:
                raise IllegalMoveError("step in a jumps-only solution", mv.origin)
            check_move(pos, mv, board, rules, mover)
        except IllegalMoveError as exc:
            rep.legal = False
            rep.error_index = i
            rep.error_reason = exc.reason
            rep.error_cell = board.cell_name(exc.cell) if exc.cell in board.cells else None
            rep.error = f"move {i} ({_move_text(mv, board)}): {exc.reason}"
            break
        pos = apply_move(pos, mv, board, rules, mover, validate=False)
        (steps if mv.is_step else jumps)[mover] += 1
        army = pos.army(mover)
        rep.centroids.append(centroid(army))
        rep.symmetry.append(army_symmetry(army, board, preset.mirror))
        if game:
            mover = other(mover)
    rep.final = pos
    if game:
        rep.winner = winner(pos, board) if rep.legal else None
        rep.goal_reached = rep.winner is not None
        if sol.claimed_winner is not None:
            rep.claim_ok = rep.winner == sol.claimed_winner
    else:
        rep.goal_reached = rep.legal and pos.blue == preset.goal
    return rep


# --- rendering -----------------------------------------------------------------------


def render_position(p: Position, board: Board) -> str:
    """ASCII board, top row first: 'B'/'R' men, 'b'/'r' empty base cells, '.' empty."""
    lines = []
    width = len(str(board.height))
    for y in reversed(range(board.height)):
        row = []
        for x in range(board.width):
            c = Cell(x, y)
            if c not in board.cells:
                ch = " "
            elif c in p.blue:
                ch = "B"
            elif c in p.red:
                ch = "R"
            elif c in board.blue_base:
                ch = "b"
            elif c in board.red_base:
                ch = "r"
            else:
                ch = "."
            row.append(ch)
        lines.append(f"{board.height - y:>{width}} " + " ".join(row))
    lines.append(" " * (width + 1) + " ".join(chr(ord("a") + x) for x in range(board.width)))
    return "\n".join(lines)


# --- corpus --------------------------------------------------------------------------


def corpus_names() -> list[str]:
    root = resources.files(__package__) / "corpus"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".txt"))


def corpus_text(name: str) -> str:
    fname = name if name.endswith(".txt") else name + ".txt"
    return (resources.files(__package__) / "corpus" / fname).read_text(encoding="utf-8")


def load_solution(path: str | Path, preset: ArmyPreset | None = None) -> Solution:
    """Parse a file, falling back to the bundled corpus for ``corpus/<name>``."""
    path = Path(path)
    if path.exists():
        text = path.read_text(encoding="utf-8")
    else:
        try:
            text = corpus_text(path.name)
        except FileNotFoundError:
            raise FileNotFoundError(f"cannot read solution file {str(path)!r}") from None
    return parse_solution(text, preset)
