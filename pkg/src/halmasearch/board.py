"""Board geometry, rule sets, army presets and positions.

Cells live on an integer lattice: ``x`` grows to the right, ``y`` grows
upward.  Display names put the column letter first and count rows from the
top, so on a 9x9 board ``a1`` is ``(0, 8)`` and ``i9`` is ``(8, 0)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Union

BLUE = "blue"
RED = "red"
PLAYERS = (BLUE, RED)


def other(player: str) -> str:
    return RED if player == BLUE else BLUE


class Cell(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class RuleSet:
    """Legal unit displacements plus the per-move centroid bonus ``ell``."""

    kind: int
    directions: tuple[tuple[int, int], ...]
    ell: int

    @property
    def name(self) -> str:
        return f"{self.kind}-move"


_ORTHO = ((1, 0), (-1, 0), (0, 1), (0, -1))

FOUR_MOVE = RuleSet(4, _ORTHO, 1)
SIX_MOVE = RuleSet(6, _ORTHO + ((1, 1), (-1, -1)), 1)
EIGHT_MOVE = RuleSet(8, _ORTHO + ((1, 1), (-1, -1), (1, -1), (-1, 1)), 2)

_RULES = {4: FOUR_MOVE, 6: SIX_MOVE, 8: EIGHT_MOVE}


def rules_for(kind: Union[int, str, RuleSet]) -> RuleSet:
    """Look up a rule set by 4/6/8 (ints, ``"6"`` or ``"6-move"`` all work)."""
    if isinstance(kind, RuleSet):
        return kind
    key = str(kind).lower().removesuffix("-move").removesuffix("move").strip()
    try:
        return _RULES[int(key)]
    except (ValueError, KeyError):
        raise ValueError(f"unknown rule set {kind!r}; expected 4, 6 or 8") from None


@dataclass(frozen=True)
class Board:
    """A rectangular window of the lattice with a validity mask and two bases."""

    width: int
    height: int
    cells: frozenset[Cell]
    blue_base: frozenset[Cell] = frozenset()
    red_base: frozenset[Cell] = frozenset()

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("board dimensions must be positive")
        if self.width > 26:
            raise ValueError("at most 26 columns are supported")
        for c in self.cells:
            if not (0 <= c.x < self.width and 0 <= c.y < self.height):
                raise ValueError(f"cell {c} outside the {self.width}x{self.height} window")
        if not (self.blue_base <= self.cells and self.red_base <= self.cells):
            raise ValueError("bases must lie on the board")
        if self.blue_base & self.red_base:
            raise ValueError("bases overlap")

    @classmethod
    def rectangle(cls, width: int, height: int, blue_base=(), red_base=()) -> "Board":
        cells = frozenset(Cell(x, y) for x in range(width) for y in range(height))
        return cls(width, height, cells, frozenset(blue_base), frozenset(red_base))

    @property
    def is_square(self) -> bool:
        return self.width == self.height

    @cached_property
    def ordered_cells(self) -> tuple[Cell, ...]:
        """Valid cells in bit order: row by row from ``y = 0``."""
        return tuple(sorted(self.cells, key=lambda c: (c.y, c.x)))

    @cached_property
    def _index(self) -> dict[Cell, int]:
        return {c: i for i, c in enumerate(self.ordered_cells)}

    def __contains__(self, cell: object) -> bool:
        return cell in self.cells

    def index(self, cell: Cell) -> int:
        return self._index[cell]

    def mask(self, cells: Iterable[Cell]) -> int:
        m = 0
        for c in cells:
            m |= 1 << self._index[c]
        return m

    def cells_of(self, mask: int) -> frozenset[Cell]:
        out = []
        cells = self.ordered_cells
        i = 0
        while mask:
            if mask & 1:
                out.append(cells[i])
            mask >>= 1
            i += 1
        return frozenset(out)

    def cell_name(self, cell: Cell) -> str:
        return f"{chr(ord('a') + cell.x)}{self.height - cell.y}"

    def parse_cell(self, name: str) -> Cell:
        name = name.strip()
        if len(name) < 2 or not name[0].isalpha() or not name[1:].isdigit():
            raise ValueError(f"malformed cell name {name!r}")
        cell = Cell(ord(name[0].lower()) - ord("a"), self.height - int(name[1:]))
        if cell not in self.cells:
            raise ValueError(f"cell {name!r} is not on the board")
        return cell

    def to_ascii(self) -> str:
        """Serialize the mask: '.' empty, '#' off-board, 'B'/'R' base cells.

        The first line is the top row (largest ``y``), matching display names.
        """
        rows = []
        for y in reversed(range(self.height)):
            row = []
            for x in range(self.width):
                c = Cell(x, y)
                if c not in self.cells:
                    row.append("#")
                elif c in self.blue_base:
                    row.append("B")
                elif c in self.red_base:
                    row.append("R")
                else:
                    row.append(".")
            rows.append("".join(row))
        return "\n".join(rows)

    @classmethod
    def from_ascii(cls, text: str) -> "Board":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        height, width = len(lines), len(lines[0])
        if any(len(ln) != width for ln in lines):
            raise ValueError("ragged board mask")
        cells, blue, red = set(), set(), set()
        for r, ln in enumerate(lines):
            y = height - 1 - r
            for x, ch in enumerate(ln):
                if ch == "#":
                    continue
                if ch not in ".BR":
                    raise ValueError(f"bad mask character {ch!r}")
                c = Cell(x, y)
                cells.add(c)
                if ch == "B":
                    blue.add(c)
                elif ch == "R":
                    red.add(c)
        return cls(width, height, frozenset(cells), frozenset(blue), frozenset(red))


@dataclass(frozen=True)
class Position:
    """Occupancy by one army (transfer) or two armies plus side to move (game)."""

    blue: frozenset[Cell]
    red: frozenset[Cell] = frozenset()
    to_move: str | None = None

    def __post_init__(self) -> None:
        if self.blue & self.red:
            raise ValueError("armies overlap")

    @property
    def occupied(self) -> frozenset[Cell]:
        return self.blue | self.red

    @property
    def is_game(self) -> bool:
        return self.to_move is not None

    def army(self, player: str) -> frozenset[Cell]:
        return self.blue if player == BLUE else self.red

    def with_army(self, player: str, cells: frozenset[Cell]) -> "Position":
        if player == BLUE:
            return Position(cells, self.red, self.to_move)
        return Position(self.blue, cells, self.to_move)


# --- symmetry transforms --------------------------------------------------

Transformable = Union[Cell, Iterable[Cell], Position]


def _require_square(board: Board) -> None:
    if not board.is_square:
        raise ValueError(f"reflection needs a square board, got {board.width}x{board.height}")


def _apply(obj: Transformable, f):
    if isinstance(obj, Cell):
        return f(obj)
    if isinstance(obj, Position):
        return Position(frozenset(map(f, obj.blue)), frozenset(map(f, obj.red)), obj.to_move)
    return frozenset(map(f, obj))


def reflect_xy(obj: Transformable, board: Board):
    """Mirror across the line x = y; armies keep their colours."""
    _require_square(board)
    return _apply(obj, lambda c: Cell(c.y, c.x))


def reflect_x_minus_y(obj: Transformable, board: Board):
    """Mirror across the anti-diagonal through the blue and red corners."""
    _require_square(board)
    w, h = board.width, board.height
    return _apply(obj, lambda c: Cell(w - 1 - c.y, h - 1 - c.x))


def rotate180(obj: Transformable, board: Board):
    w, h = board.width, board.height
    return _apply(obj, lambda c: Cell(w - 1 - c.x, h - 1 - c.y))


MIRRORS = {"xy": reflect_xy, "rot180": rotate180}


def mirror(obj: Transformable, board: Board, kind: str = "xy"):
    """The start/goal exchanging symmetry: reflect_xy, or rotate180 on boards
    that are not symmetric across x = y."""
    return MIRRORS[kind](obj, board)


def type_label(cell: Cell, board: Board) -> int:
    """Parity class 0..3, counted from the board's ``a1`` corner.

    Column parity is the low bit and display-row parity the high bit.  Jumps
    keep the label, steps always change it.
    """
    return (cell.x & 1) | (((board.height - 1 - cell.y) & 1) << 1)


def position_key(p: Position, board: Board) -> tuple[int, int]:
    """Total order used by canonicalization (and by the search kernels)."""
    return board.mask(p.blue), board.mask(p.red)


def symmetry_invariant(board: Board, *cell_sets: Iterable[Cell]) -> bool:
    """True if the board and every given set are fixed by reflect_x_minus_y."""
    if not board.is_square:
        return False
    if reflect_x_minus_y(board.cells, board) != board.cells:
        return False
    return all(reflect_x_minus_y(frozenset(s), board) == frozenset(s) for s in cell_sets)


def canonical(p: Position, board: Board) -> Position:
    """Smaller of ``p`` and its reflect_x_minus_y image under ``position_key``."""
    if not symmetry_invariant(board, board.blue_base, board.red_base):
        raise ValueError("instance is not invariant under reflect_x_minus_y")
    q = reflect_x_minus_y(p, board)
    return q if position_key(q, board) < position_key(p, board) else p


# --- presets -----------------------------------------------------------------


@dataclass(frozen=True)
class ArmyPreset:
    name: str
    board: Board
    rules: RuleSet
    start: frozenset[Cell]
    goal: frozenset[Cell]
    mirror: str = "xy"
    description: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if len(self.start) != len(self.goal):
            raise ValueError("start and goal sizes differ")
        if not (self.start <= self.board.cells and self.goal <= self.board.cells):
            raise ValueError("army cells must be on the board")

    @property
    def size(self) -> int:
        return len(self.start)

    def game_start(self) -> Position:
        return Position(self.start, self.goal, BLUE)

    def transfer_start(self) -> Position:
        return Position(self.start)

    def with_rules(self, rules) -> "ArmyPreset":
        return ArmyPreset(self.name, self.board, rules_for(rules), self.start,
                          self.goal, self.mirror, self.description)


def _named(height: int, names: str) -> list[Cell]:
    return [Cell(ord(n[0]) - ord("a"), height - int(n[1:])) for n in names.split()]


_TRIANGLE10 = "a1 b1 c1 d1 a2 b2 c2 a3 b3 a4"
_TRIANGLE15 = _TRIANGLE10 + " e1 d2 c3 b4 a5"
_HALMA19 = ("a1 a2 a3 a4 a5 b1 b2 b3 b4 b5 c1 c2 c3 c4 d1 d2 d3 e1 e2")

# name -> (width, height, start cells, default rules, description)
_SQUARE_PRESETS = {
    "cc10": (9, 9, _TRIANGLE10, 6, "Chinese Checkers, 10-man triangle"),
    "cc15": (9, 9, _TRIANGLE15, 6, "Chinese Checkers, 15-man triangle"),
    "cc6": (9, 9, "a1 b1 c1 a2 b2 a3", 6, "6-man triangle"),
    "square4": (9, 9, "a1 b1 a2 b2", 8, "2x2 square army"),
    "square9": (9, 9, "a1 b1 c1 a2 b2 c2 a3 b3 c3", 8, "3x3 square army"),
    "halma19": (16, 16, _HALMA19, 8, "Halma 19-man camp"),
    "grasshopper10": (8, 8, _TRIANGLE10, 8, "Grasshopper: 10-man triangle on 8x8"),
}

ALIASES = {"triangle6": "cc6", "triangle10": "cc10", "triangle15": "cc15", "checkers": "checkers12"}

PRESET_NAMES = tuple(sorted(_SQUARE_PRESETS)) + ("checkers12",)


def checkers_board() -> tuple[Board, frozenset[Cell], frozenset[Cell]]:
    """The 32 dark squares of a checkerboard turned 45 degrees.

    Dark square (col i, row j) with i + j odd maps to
    ``((i + j - 1) / 2, (i - j + 7) / 2)`` in a 7x8 window.  Diagonal checkers
    steps become orthogonal, forward progress is +x / -y, and the 180 degree
    board rotation is ``rotate180`` of the window.
    """
    def cell(i, j):
        return Cell((i + j - 1) // 2, (i - j + 7) // 2)

    dark = [(i, j) for i in range(8) for j in range(8) if (i + j) % 2 == 1]
    cells = frozenset(cell(i, j) for i, j in dark)
    start = frozenset(cell(i, j) for i, j in dark if j <= 2)
    goal = frozenset(cell(i, j) for i, j in dark if j >= 5)
    return Board(7, 8, cells, start, goal), start, goal


def make_preset(name: str, rules=None) -> ArmyPreset:
    """Build a named preset, optionally overriding its default rule set."""
    key = ALIASES.get(name.lower(), name.lower())
    if key == "checkers12":
        board, start, goal = checkers_board()
        rs = rules_for(rules if rules is not None else 4)
        return ArmyPreset(key, board, rs, start, goal, "rot180", "checkers, 12 men")
    try:
        width, height, names, default_rules, desc = _SQUARE_PRESETS[key]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}") from None
    proto = Board.rectangle(width, height)
    start = frozenset(_named(height, names))
    goal = reflect_xy(start, proto)
    board = Board.rectangle(width, height, start, goal)
    rs = rules_for(rules if rules is not None else default_rules)
    return ArmyPreset(key, board, rs, start, goal, "xy", desc)
