"""Acceptance checks, one group per criterion.

Every test carries ``@pytest.mark.criterion(n)``; ``conftest.py`` prints one
PASS/FAIL/SKIP line per criterion at the end of the run.  Criteria 5 and 6 are
long proofs gated behind ``HALMA_MEDIUM=1`` and ``HALMA_FLAGSHIP=1``.
"""

import os
import random
import time
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from conftest import TOYS, toy
from halmasearch.board import make_preset
from halmasearch.bounds import (
    centroid_n_move_bound, centroid_step_bound, game_lower_bound, preset_bounds,
    remaining_game_bound, transfer_lower_bound, winner,
)
from halmasearch.engine import Engine
from halmasearch.game_search import (
    GameSearchConfig, level_counts, search_game, shortest_game_bfs,
)
from halmasearch.metrics import centroid, speed, state_space_size, type_census
from halmasearch.movegen import Move, apply_move, legal_moves
from halmasearch.notation import corpus_names, load_solution, verify_solution
from halmasearch.transfer_search import (
    TransferConfig, palindrome_exists_bfs, run_transfer, shortest_transfer_bfs,
    transfer_exists_bfs,
)

medium = pytest.mark.skipif(os.environ.get("HALMA_MEDIUM") != "1",
                            reason="medium tier: set HALMA_MEDIUM=1")
flagship = pytest.mark.skipif(os.environ.get("HALMA_FLAGSHIP") != "1",
                              reason="flagship tier: set HALMA_FLAGSHIP=1")


def report(n, ok, detail):
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


# --- 1. corpus replay ----------------------------------------------------------------

CORPUS = {
    # name: (moves, outcome or (steps, jumps))
    "fabian": (30, "red"),
    "cc15_game": (36, "red"),
    "levenspiel": (27, (10, 17)),
    "levenspiel_alt": (27, (8, 19)),
    "cc10_8move": (20, None),
    "cc10_4move": (30, None),
    "square9": (16, None),
    "jumps_only": (35, (0, 35)),
    "cc15_transfer": (31, None),
    "halma19": (47, None),
}


def _replay(name):
    sol = load_solution(f"corpus/{name}")
    preset = make_preset(sol.problem, sol.rules)
    return sol, preset, verify_solution(preset, sol)


@pytest.mark.criterion(1)
def test_corpus_replay():
    t0 = time.perf_counter()
    assert sorted(CORPUS) == corpus_names()
    problems = []
    for name, (length, expect) in CORPUS.items():
        sol, preset, rep = _replay(name)
        if not rep.ok or len(sol) != length:
            problems.append(f"{name}: ok={rep.ok} len={len(sol)} {rep.error}")
            continue
        if sol.kind == "game" and rep.winner != expect:
            problems.append(f"{name}: winner {rep.winner}")
        if isinstance(expect, tuple) and (rep.steps["blue"], rep.jumps["blue"]) != expect:
            problems.append(f"{name}: steps/jumps {rep.steps} {rep.jumps}")
    sol, preset, rep = _replay("cc10_4move")
    c = preset.board.parse_cell
    back = [i for i, m in enumerate(sol.moves) if m.path == (c("d1"), c("c1"))]
    if not back or rep.centroids[back[0] + 1] >= rep.centroids[back[0]]:
        problems.append("4-move solution lacks the backward step to c1")
    sol, preset, rep = _replay("jumps_only")
    if not rep.centroids[10] < rep.centroids[9]:
        problems.append("jumps-only move 10 does not decrease the centroid")
    if not all(not m.is_step for m in sol.moves):
        problems.append("jumps-only solution contains a step")
    elapsed = time.perf_counter() - t0
    if elapsed >= 1.0:
        problems.append(f"runtime {elapsed:.2f}s")
    report(1, not problems, "; ".join(problems) or f"10 solutions verified in {elapsed:.3f}s")


# --- 2. level-set counts -----------------------------------------------------------------


@pytest.mark.criterion(2)
def test_level_counts():
    level_counts(make_preset("cc10"), 1)  # load the compiled kernels outside the timing
    t0 = time.perf_counter()
    sizes = [s for s, _ in level_counts(make_preset("cc10"), 3)]
    elapsed = time.perf_counter() - t0
    report(2, sizes == [7, 98, 1253] and elapsed < 1.0, f"|L1..L3| = {sizes} in {elapsed:.3f}s")


# --- 3. bounds ---------------------------------------------------------------------------


@pytest.mark.criterion(3)
def test_bounds_table():
    t0 = time.perf_counter()
    table = [("cc10", 6), ("cc15", 6), ("halma19", 8), ("grasshopper10", 8), ("cc10", 8)]
    games = [game_lower_bound(p.start, p.goal, p.rules)
             for p in (make_preset(n, r) for n, r in table)]
    cc10, halma = make_preset("cc10"), make_preset("halma19")
    transfers = [transfer_lower_bound(p.start, p.goal, p.rules) for p in (cc10, halma)]
    from math import factorial
    size = state_space_size(cc10.board, 10)
    exact = factorial(81) // (factorial(10) ** 2 * factorial(61))
    lead = f"{size:.3e}"
    elapsed = time.perf_counter() - t0
    ok = (games == [27, 35, 45, 21, 22] and transfers == [19, 28] and size == exact
          and lead.startswith("8.67") and size // 10**23 == 8 and elapsed < 1.0)
    report(3, ok, f"game {games}, transfer {transfers}, states {lead} in {elapsed:.3f}s")


# --- 4. small-instance optimality ------------------------------------------------------


def _optimum(name, rules, L, jumps_only=False):
    """Outcomes of proofs at L-2, L-1 and L; an optimum needs none, none, solution.

    A solution of length k extends to k + 2 by stepping a man out and back, so
    ruling out L-1 and L-2 rules out every shorter length.  If the proof at L
    runs out of memory, existence at L may instead come from a beam-search
    witness of exactly L moves, replayed like any other.
    """
    from halmasearch.notation import Solution
    p = make_preset(name, rules)
    outs = [run_transfer(TransferConfig(p, n, "prove", jumps_only=jumps_only))
            for n in (L - 2, L - 1, L)]
    if outs[-1].verdict == "inconclusive":
        outs.append(run_transfer(TransferConfig(p, L, "find", jumps_only=jumps_only,
                                                beam=10**5)))
    ok = [o.verdict for o in outs[:2]] == ["none", "none"] and outs[-1].verdict == "solution"
    if ok:
        sol = outs[-1].solution
        rep = verify_solution(p, Solution(sol, p.name, p.rules.kind, jumps_only=jumps_only))
        ok = rep.ok and len(sol) == L
    return ok, outs


def _cmax(outs, N):
    recs = [r for o in outs for r in o.cmax_trail if r.N == N and r.self_consistent]
    return recs[-1].value if recs else None


@pytest.mark.criterion(4)
@pytest.mark.parametrize("name,rules,L", [
    ("square4", 4, 15), ("square4", 6, 15), ("square4", 8, 12),
    ("cc6", 4, 25), ("cc6", 6, 23), ("cc6", 8, 16),
])
def test_small_optimality(name, rules, L):
    ok, outs = _optimum(name, rules, L)
    report(4, ok, f"{name} {rules}-move optimum {L}: {[o.verdict for o in outs]}")


# --- 5. medium tier ------------------------------------------------------------------------


@medium
@pytest.mark.criterion(5)
@pytest.mark.parametrize("name,rules,L,jumps,cmax", [
    ("cc10", 6, 27, False, {13: 5}),
    ("cc10", 8, 20, False, {10: 12}),
    ("cc10", 4, 30, False, {14: 5, 15: 11}),
    ("square9", 8, 16, False, {8: 10}),
    ("cc10", 6, 35, True, {17: 8}),
    ("checkers12", 4, 20, False, {}),
    ("checkers12", 6, 16, False, {}),
    ("checkers12", 8, 16, False, {}),
])
def test_medium_transfer_optimality(name, rules, L, jumps, cmax):
    ok, outs = _optimum(name, rules, L, jumps)
    got = {N: _cmax(outs, N) for N in cmax}
    ok = ok and got == cmax
    report(5, ok, f"{name} {rules}-move{' jumps-only' if jumps else ''} optimum {L}: "
                  f"{[o.verdict for o in outs]}, C^max {got}")


@medium
@pytest.mark.criterion(5)
@pytest.mark.parametrize("name,rules,L", [("grasshopper10", 8, 24), ("cc10", 8, 24)])
def test_medium_games(name, rules, L):
    out = search_game(GameSearchConfig(make_preset(name, rules), L, "find-one"))
    report(5, out.verdict == "found" and out.shortest == L,
           f"{name} {rules}-move shortest game {out.shortest} ({out.verdict}, {out.error})")


# --- 6. flagship tier ----------------------------------------------------------------------


@flagship
@pytest.mark.criterion(6)
@pytest.mark.parametrize("name,L", [("cc10", 30), ("cc15", 36)])
def test_flagship_games(name, L):
    out = search_game(GameSearchConfig(make_preset(name), L, "find-one"))
    passes = [p["threshold"] for p in out.passes]
    report(6, out.verdict == "found" and out.shortest == L,
           f"{name} shortest game {out.shortest} after thresholds {passes} ({out.error})")


@flagship
@pytest.mark.criterion(6)
def test_flagship_palindromes():
    p = make_preset("cc15")
    o31 = run_transfer(TransferConfig(p, 31, "palindrome-prove"))
    o30 = run_transfer(TransferConfig(p, 30, "palindrome-prove"))
    ok = o31.palindromic_meets == 2 and o30.verdict == "none" and o31.verdict == "solution"
    report(6, ok, f"palindromic 31: {o31.palindromic_meets} ({o31.verdict}); 30: {o30.verdict}")


# --- 7. oracle equivalence -----------------------------------------------------------------

TRANSFER_CASES = [(size, cells, r) for size, cells in TOYS for r in (4, 6, 8)]


@pytest.mark.criterion(7)
@pytest.mark.parametrize("size,cells,rules", TRANSFER_CASES)
def test_transfer_modes_match_bfs(size, cells, rules):
    p = toy(size, cells, rules)
    opt = shortest_transfer_bfs(p, 40)
    mismatches = []
    for L in range(max(0, opt - 2), opt + 3):
        truth = transfer_exists_bfs(p, L)
        for mode in ("prove", "forward-prove"):
            got = run_transfer(TransferConfig(p, L, mode)).verdict
            if got != ("solution" if truth else "none"):
                mismatches.append((mode, L, got, truth))
        pal = palindrome_exists_bfs(p, L)
        got = run_transfer(TransferConfig(p, L, "palindrome-prove")).verdict
        if got != ("solution" if pal else "none"):
            mismatches.append(("palindrome-prove", L, got, pal))
    report(7, not mismatches, f"transfer {size}x{size}/{len(cells)} {rules}-move opt {opt}: "
                              f"{mismatches or 'all modes agree'}")


GAME_CASES = [(3, [(0, 0)], r) for r in (4, 6, 8)] + \
    [(4, [(0, 0), (1, 0)], r) for r in (4, 6, 8)] + \
    [(4, [(0, 0), (1, 0), (0, 1)], r) for r in (4, 6, 8)]


@pytest.mark.criterion(7)
@pytest.mark.parametrize("size,cells,rules", GAME_CASES)
def test_game_modes_match_bfs(size, cells, rules):
    p = toy(size, cells, rules)
    truth = shortest_game_bfs(p, 60)
    found = search_game(GameSearchConfig(p, 60, "find-one"))
    below = search_game(GameSearchConfig(p, truth - 1, "prove-none"))
    at = search_game(GameSearchConfig(p, truth, "prove-none"))
    ok = (found.shortest == truth and below.verdict == "none" and at.verdict == "found"
          and len(found.witness) == truth)
    report(7, ok, f"game {size}x{size}/{len(cells)} {rules}-move: bfs {truth}, "
                  f"find {found.shortest}, prove {below.verdict}/{at.verdict}")


# --- 8. bound soundness ------------------------------------------------------------------

WALK_PRESETS = [("cc10", 6), ("cc10", 4), ("cc10", 8), ("square9", 8), ("cc15", 6),
                ("checkers12", 4), ("grasshopper10", 8), ("halma19", 8)]
_ENGINES = {}


def _walk(name, rules, seed, steps):
    p = make_preset(name, rules)
    rng = random.Random(seed)
    pos = p.transfer_start()
    for _ in range(steps):
        moves = legal_moves(pos, p.board, p.rules)
        pos = apply_move(pos, rng.choice(moves), p.board, p.rules, validate=False)
    return p, pos


walks = st.tuples(st.sampled_from(WALK_PRESETS), st.integers(0, 2**32 - 1), st.integers(0, 25))


@pytest.mark.criterion(8)
@settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(walks)
def test_centroid_n_move_bound(w):
    (name, rules), seed, steps = w
    p, pos = _walk(name, rules, seed, steps)
    if (name, rules) not in _ENGINES:
        _ENGINES[name, rules] = Engine(p.board, p.rules, mirror_kind=p.mirror)
    e = _ENGINES[name, rules]
    c0 = centroid(pos.blue)
    level = e.row(pos)[None, :]
    for n in (1, 2, 3):
        level, _ = e.expand_transfer(level, depth=n)
        cents, _ = e.row_stats(level)
        assert int(cents.max()) - c0 <= centroid_n_move_bound(pos.blue, n, p.rules)


@pytest.mark.criterion(8)
@settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(walks)
def test_centroid_step_bound(w):
    (name, rules), seed, steps = w
    p, pos = _walk(name, rules, seed, steps)
    c0 = centroid(pos.blue)
    bound = centroid_step_bound(pos.blue, p.rules)
    for m in legal_moves(pos, p.board, p.rules):
        q = apply_move(pos, m, p.board, p.rules, validate=False)
        assert abs(centroid(q.blue) - c0) <= bound


def _solve_game(preset):
    """Exact moves-to-win for every reachable game position that can still win."""
    from collections import deque
    board, rules = preset.board, preset.rules
    start = preset.game_start()
    succ, seen, q = {}, {start}, deque([start])
    while q:
        p = q.popleft()
        succ[p] = [] if winner(p, board) else [
            apply_move(p, m, board, rules, validate=False) for m in legal_moves(p, board, rules)]
        for n in succ[p]:
            if n not in seen:
                seen.add(n)
                q.append(n)
    pred = {p: [] for p in succ}
    for p, ns in succ.items():
        for n in ns:
            pred[n].append(p)
    dist = {p: 0 for p in succ if winner(p, board)}
    q = deque(dist)
    while q:
        n = q.popleft()
        for p in pred[n]:
            if p not in dist:
                dist[p] = dist[n] + 1
                q.append(p)
    return dist


@pytest.mark.criterion(8)
@pytest.mark.parametrize("size,cells,rules", [(3, [(0, 0)], r) for r in (4, 6, 8)]
                         + [(4, [(0, 0), (1, 0)], r) for r in (4, 6, 8)]
                         + [(4, [(0, 0), (0, 1)], 8)])
def test_remaining_bound_on_solved_toys(size, cells, rules):
    p = toy(size, cells, rules)
    dist = _solve_game(p)
    bad = [(q, d) for q, d in dist.items() if remaining_game_bound(q, p.board, p.rules) > d]
    report(8, not bad, f"{size}x{size}/{len(cells)} {rules}-move: {len(dist)} solved positions, "
                       f"{len(bad)} violations")


# --- 9. metrics ----------------------------------------------------------------------------


@pytest.mark.criterion(9)
def test_metrics_exact():
    t0 = time.perf_counter()
    want = {"levenspiel": Fraction(4, 9), "cc10_8move": Fraction(3, 10),
            "cc10_4move": Fraction(2, 5), "square9": Fraction(3, 8),
            "jumps_only": Fraction(12, 35), "cc15_transfer": Fraction(32, 93),
            "halma19": Fraction(225, 893)}
    got = {}
    for name in want:
        sol, p, rep = _replay(name)
        got[name] = speed(p.start, rep.final.blue, len(sol), p.rules)
    cc, halma = make_preset("cc10"), make_preset("halma19")
    census = (type_census(cc.start, cc.board), type_census(cc.goal, cc.board),
              type_census(halma.start, halma.board), type_census(halma.goal, halma.board))
    ends = (centroid(cc.start), centroid(cc.goal))
    b = cc.board
    after = apply_move(cc.transfer_start(), Move((b.parse_cell("d1"), b.parse_cell("d2"))),
                       b, cc.rules)
    balance = (type_census(cc.start, b), type_census(after.blue, b))
    elapsed = time.perf_counter() - t0
    ok = (got == want and census == ((3, 3, 3, 1), (3, 3, 3, 1), (6, 5, 5, 3), (3, 5, 5, 6))
          and ends == (-60, 60) and balance == ((3, 3, 3, 1), (3, 2, 3, 2)) and elapsed < 1.0)
    report(9, ok, f"speeds {sorted(str(v) for v in got.values())}, census {census}, "
                  f"centroids {ends}, balance {balance}, {elapsed:.3f}s")


# --- 10. desk-scale limits -------------------------------------------------------------------


@pytest.mark.criterion(10)
def test_cc15_beam_find():
    p = make_preset("cc15")
    out = run_transfer(TransferConfig(p, 31, "find", beam=50000, beta=2))
    ok = out.verdict == "solution" and len(out.solution) <= 31
    if ok:
        from halmasearch.notation import Solution
        ok = verify_solution(p, Solution(out.solution, p.name, p.rules.kind)).ok
    report(10, ok, f"cc15 beam find (M=50000, beta=2): {out.verdict}, "
                   f"{len(out.solution or [])} moves")


@pytest.mark.criterion(10)
def test_halma_witness_and_bounds():
    sol, p, rep = _replay("halma19")
    bounds = {b.kind: b.value for b in preset_bounds(p)}
    ok = rep.ok and len(sol) == 47 and bounds["transferLower"] == 28 and bounds["gameLower"] == 45
    report(10, ok, f"halma19 witness {len(sol)} moves verified={rep.ok}, bounds {bounds}")
