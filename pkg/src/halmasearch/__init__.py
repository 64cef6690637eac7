"""Shortest games and army transfers for Halma-family jump games."""

from .board import (BLUE, EIGHT_MOVE, FOUR_MOVE, PRESET_NAMES, RED, SIX_MOVE, ArmyPreset, Board,
                    Cell, Position, RuleSet, canonical, make_preset, mirror, reflect_x_minus_y,
                    reflect_xy, rotate180, rules_for, type_label)
from .errors import IllegalMoveError, NotationError, ResourceLimitError
from .movegen import Move, apply_move, legal_moves

__version__ = "0.1.0"

__all__ = [
    "BLUE", "RED", "FOUR_MOVE", "SIX_MOVE", "EIGHT_MOVE", "PRESET_NAMES", "ArmyPreset", "Board",
    "Cell", "Position", "RuleSet", "Move", "canonical", "make_preset", "mirror",
    "reflect_x_minus_y", "reflect_xy", "rotate180", "rules_for", "type_label", "apply_move",
    "legal_moves", "IllegalMoveError", "NotationError", "ResourceLimitError",
]
