"""Scalar measures over cells and armies."""

from __future__ import annotations

from fractions import Fraction
from math import comb, factorial
from typing import Iterable, Union

from .board import Board, Cell, RuleSet, mirror, type_label

Number = Union[int, Fraction]


def norm(dx: Number, dy: Number, rules: RuleSet) -> Number:
    """Step distance of the displacement ``(dx, dy)`` under ``rules``.

    Works verbatim on exact rationals.
    """
    ax, ay = abs(dx), abs(dy)
    if rules.kind == 8:
        return max(ax, ay)
    if rules.kind == 4:
        return ax + ay
    total = ax + ay + abs(dx - dy)
    return total // 2 if isinstance(total, int) else total / 2


def norm_by_sign(dx: Number, dy: Number) -> Number:
    """Six-move norm through the sign case split (max if signs agree)."""
    def sgn(v):
        return (v > 0) - (v < 0)
    if sgn(dx) == sgn(dy):
        return max(abs(dx), abs(dy))
    return abs(dx) + abs(dy)


def distance(a: Cell, b: Cell, rules: RuleSet) -> int:
    return norm(a.x - b.x, a.y - b.y, rules)


def army_distance(a: Iterable[Cell], b: Iterable[Cell], rules: RuleSet) -> int:
    a, b = list(a), list(b)
    if not a or not b:
        raise ValueError("army distance of an empty set")
    return min(distance(p, q, rules) for p in a for q in b)


def cell_centroid(c: Cell) -> int:
    return c.x - c.y


def centroid(army: Iterable[Cell]) -> int:
    return sum(c.x - c.y for c in army)


def army_symmetry(army: Iterable[Cell], board: Board, transform: str = "xy") -> int:
    """Number of men whose mirror cell is held by the same army."""
    army = frozenset(army)
    return sum(1 for c in army if mirror(c, board, transform) in army)


def center_of_mass(army: Iterable[Cell]) -> tuple[Fraction, Fraction]:
    army = list(army)
    if not army:
        raise ValueError("center of mass of an empty army")
    n = len(army)
    return Fraction(sum(c.x for c in army), n), Fraction(sum(c.y for c in army), n)


def speed(a: Iterable[Cell], b: Iterable[Cell], moves: int, rules: RuleSet) -> Fraction:
    """Center-of-mass displacement (rule-set norm) per move, exactly."""
    a, b = list(a), list(b)
    if len(a) != len(b) or not a:
        raise ValueError("armies must be nonempty and of equal size")
    if moves <= 0:
        raise ValueError("move count must be positive")
    (ax, ay), (bx, by) = center_of_mass(a), center_of_mass(b)
    return Fraction(norm(ax - bx, ay - by, rules)) / moves


def type_census(army: Iterable[Cell], board: Board) -> tuple[int, int, int, int]:
    counts = [0, 0, 0, 0]
    for c in army:
        counts[type_label(c, board)] += 1
    return tuple(counts)


def balance_deviation(army: Iterable[Cell], board: Board) -> int:
    census = type_census(army, board)
    return max(census) - min(census)


def is_balanced(army: Iterable[Cell], board: Board) -> bool:
    return balance_deviation(army, board) <= 1


def state_space_size(board: Board, army_size: int, two_armies: bool = True) -> int:
    n = len(board.cells)
    if army_size < 0 or (2 * army_size if two_armies else army_size) > n:
        raise ValueError("armies do not fit on the board")
    if not two_armies:
        return comb(n, army_size)
    s = army_size
    return factorial(n) // (factorial(s) * factorial(s) * factorial(n - 2 * s))
