"""JSON result documents with a fixed set of top-level fields."""

from __future__ import annotations

import json

from .board import ArmyPreset
from .bounds import preset_bounds
from .movegen import Move

FIELDS = ("problem", "rules", "board", "mode", "length", "verdict", "solution", "levels",
          "cmaxTrail", "bounds", "runtimeMs", "threads")


def board_info(preset: ArmyPreset) -> dict:
    b = preset.board
    return {"width": b.width, "height": b.height, "cells": len(b.cells),
            "armySize": preset.size, "mirror": preset.mirror}


def bounds_dict(preset: ArmyPreset) -> dict:
    return {r.kind: r.value for r in preset_bounds(preset)}


def solution_text(moves: list[Move] | None, preset: ArmyPreset) -> list[str]:
    if not moves:
        return []
    return ["-".join(preset.board.cell_name(c) for c in m.path) for m in moves]


def make_report(preset: ArmyPreset, mode: str, length, verdict: str, *, solution=None,
                levels=(), cmax_trail=(), runtime_ms: int = 0, threads: int = 1,
                extra: dict | None = None) -> dict:
    doc = {
        "problem": preset.name,
        "rules": preset.rules.kind,
        "board": board_info(preset),
        "mode": mode,
        "length": length,
        "verdict": verdict,
        "solution": solution_text(solution, preset),
        "levels": [s.as_dict() for s in levels],
        "cmaxTrail": [c.as_dict() for c in cmax_trail],
        "bounds": bounds_dict(preset),
        "runtimeMs": runtime_ms,
        "threads": threads,
    }
    if extra:
        doc.update(extra)
    return doc


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False)
