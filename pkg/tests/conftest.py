import os

import pytest

from halmasearch.board import ArmyPreset, Board, Cell, reflect_xy, rules_for

os.environ.setdefault("HALMA_MEMORY_CAP", "2G")


def toy(size: int, cells, rules: int, name: str = "toy") -> ArmyPreset:
    """A square board with the given army in the a1 corner and its mirror as goal."""
    proto = Board.rectangle(size, size)
    start = frozenset(Cell(x, size - 1 - r) for x, r in cells)
    goal = reflect_xy(start, proto)
    board = Board.rectangle(size, size, start, goal)
    return ArmyPreset(f"{name}{size}", board, rules_for(rules), start, goal)


# (board size, cells as (column, display row - 1))
TOYS = [
    (4, [(0, 0), (1, 0)]),
    (4, [(0, 0), (1, 0), (0, 1)]),
    (4, [(0, 0), (1, 0), (0, 1), (1, 1)]),
    (5, [(0, 0), (1, 0), (0, 1)]),
    (5, [(0, 0), (1, 0), (0, 1), (1, 1)]),
    (5, [(0, 0), (1, 0), (2, 0), (0, 1)]),
    (6, [(0, 0), (1, 0), (0, 1)]),
    (6, [(0, 0), (1, 0), (0, 1), (1, 1)]),
]


# --- acceptance summary ------------------------------------------------------------

_RESULTS: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _RESULTS.setdefault(mark.args[0], []).append(rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        res = _RESULTS[n]
        if "failed" in res:
            status = "FAIL"
        elif all(r == "skipped" for r in res):
            status = "SKIP"
        else:
            status = "PASS"
        counts = ", ".join(f"{res.count(k)} {k}" for k in ("passed", "failed", "skipped")
                           if res.count(k))
        terminalreporter.write_line(f"criterion {n}: {status} ({counts})")
