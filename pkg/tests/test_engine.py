import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from halmasearch import checkpoint
from halmasearch.board import canonical, make_preset
from halmasearch.engine import Engine, HashLevel, parse_size, sort_rows
from halmasearch.errors import ResourceLimitError
from halmasearch.metrics import army_symmetry, centroid
from halmasearch.movegen import apply_move, legal_moves

PRESETS = [("cc10", 6), ("cc10", 4), ("cc10", 8), ("square9", 8), ("checkers12", 4),
           ("halma19", 8), ("cc15", 6)]


def _random_position(p, seed, steps, game):
    rng = random.Random(seed)
    pos = p.game_start() if game else p.transfer_start()
    for _ in range(steps):
        moves = legal_moves(pos, p.board, p.rules)
        if not moves:
            break
        pos = apply_move(pos, rng.choice(moves), p.board, p.rules, validate=False)
    return pos


positions = st.tuples(st.sampled_from(PRESETS), st.integers(0, 2**32 - 1), st.integers(0, 30),
                      st.booleans())


@settings(max_examples=200, deadline=None)
@given(positions, st.booleans())
def test_kernel_successors_match_reference(case, jumps_only):
    (name, rules), seed, steps, canon = case
    p = make_preset(name, rules)
    pos = _random_position(p, seed, steps, False)
    canon = canon and name != "checkers12"
    e = Engine(p.board, p.rules, canonicalize=canon)
    got, st_ = e.expand_transfer(e.row(pos)[None, :], depth=1, jumps_only=jumps_only)
    norm = (lambda q: canonical(q, p.board)) if canon else (lambda q: q)
    want = {norm(apply_move(pos, m, p.board, p.rules, validate=False))
            for m in legal_moves(pos, p.board, p.rules, jumps_only=jumps_only)}
    assert {e.position(r) for r in got} == want
    assert st_.generated == len(legal_moves(pos, p.board, p.rules, jumps_only=jumps_only))
    assert np.array_equal(got, got[sort_rows(got, e.nw)])


@settings(max_examples=100, deadline=None)
@given(positions)
def test_game_kernel_matches_reference(case):
    (name, rules), seed, steps, _ = case
    p = make_preset(name, rules)
    if 2 * p.size > len(p.board.cells) - 10:
        return
    pos = _random_position(p, seed, steps, True)
    depth = 0 if pos.to_move == "blue" else 1  # only the parity selects the mover
    e = Engine(p.board, p.rules, game=True)
    keys, vals, _ = e.expand_game(e.row(pos)[None, :], np.ones(1, np.uint64), depth=depth,
                                  max_len=10**6, prune=False)
    want = [apply_move(pos, m, p.board, p.rules, validate=False)
            for m in legal_moves(pos, p.board, p.rules)]
    got = {e.position(r, want[0].to_move if want else None) for r in keys}
    assert got == set(want)
    assert int(vals.sum()) == len(want)


def test_row_stats_match_metrics():
    p = make_preset("cc10")
    e = Engine(p.board, p.rules)
    rows = e.rows([_random_position(p, s, 12, False) for s in range(50)])
    c, s = e.row_stats(rows, want_sym=True)
    for r, ci, si in zip(rows, c, s):
        army = e.position(r).blue
        assert ci == centroid(army)
        assert si == army_symmetry(army, p.board)


def test_thread_count_does_not_change_levels():
    p = make_preset("cc10")
    results = []
    for threads in (1, 3, 4):
        e = Engine(p.board, p.rules, canonicalize=True)
        e.threads = threads  # force chunking even on a single-core machine
        lv = e.rows([p.transfer_start()])
        for d in range(1, 6):
            lv, _ = e.expand_transfer(lv, depth=d, beam=20000, beta=2)
        results.append(lv)
    assert all(np.array_equal(results[0], r) for r in results[1:])


def test_thread_count_does_not_change_game_counts():
    p = make_preset("cc10")
    out = []
    for threads in (1, 4):
        e = Engine(p.board, p.rules, game=True, canonicalize=True)
        e.threads = threads
        lv = e.rows([p.game_start()])
        cnt = np.ones(len(lv), np.uint64)
        for d in range(4):
            lv, cnt, _ = e.expand_game(lv, cnt, depth=d, max_len=10**6, prune=False)
        out.append((lv, cnt))
    assert np.array_equal(out[0][0], out[1][0]) and np.array_equal(out[0][1], out[1][1])


def test_beam_keeps_best_rows():
    p = make_preset("cc10")
    e = Engine(p.board, p.rules, canonicalize=True)
    lv = e.rows([p.transfer_start()])
    for d in range(1, 4):
        lv, _ = e.expand_transfer(lv, depth=d)
    full, _ = e.expand_transfer(lv, depth=4)
    cut, st_ = e.expand_transfer(lv, depth=4, beam=500, beta=1)
    assert len(cut) == 500 and st_.extra["truncated"] > 0
    c, s = e.row_stats(full, True)
    score = np.sort(c + s)[::-1]
    c2, s2 = e.row_stats(cut, True)
    assert np.array_equal(np.sort(c2 + s2)[::-1], score[:500])


def test_memory_cap_raises_with_partial_stats():
    p = make_preset("cc10")
    e = Engine(p.board, p.rules, memory_cap=1 << 20)
    lv = e.rows([p.transfer_start()])
    with pytest.raises(ResourceLimitError) as info:
        for d in range(1, 8):
            lv, _ = e.expand_transfer(lv, depth=d)
    assert info.value.stats["memoryCap"] == 1 << 20
    assert "depth" in info.value.stats


def test_hash_level_grow_keeps_entries():
    t = HashLevel(1, 16)
    rows = np.arange(1, 40, dtype=np.uint64)[:, None]
    t.reset_with(rows[:8])
    t.grow()
    keys, _ = t.sealed(1)
    assert np.array_equal(keys[:, 0], rows[:8, 0])


def test_parse_size():
    assert parse_size("4G") == 4 << 30
    assert parse_size("512m") == 512 << 20
    assert parse_size("1000") == 1000
    with pytest.raises(ValueError):
        parse_size("lots")


def test_checkpoint_round_trip(tmp_path):
    path = tmp_path / "ck.gz"
    rows = np.arange(12, dtype=np.uint64).reshape(6, 2)
    counts = np.arange(6, dtype=np.uint64)
    run = {"kind": "test"}
    ck = checkpoint.Checkpointer(path)
    assert ck.begin(run) == []
    ck.level(run, 0, rows[:1], counts[:1])
    ck.level(run, 1, rows, counts)
    ck.level({"kind": "other"}, 0, rows, None)
    got = checkpoint.Checkpointer(path, resume=True).begin(run)
    assert len(got) == 2
    assert np.array_equal(got[1][0], rows) and np.array_equal(got[1][1], counts)
    assert checkpoint.Checkpointer(path, resume=True).begin({"kind": "none"}) == []


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 2), st.integers(1, 2), st.integers(0, 3000), st.integers(0, 2**32 - 1),
       st.booleans())
def test_sealed_matches_lexsort(nw, blocks, n, seed, small):
    rng = np.random.default_rng(seed)
    kw = nw * blocks
    hi = 4 if small else 2**63
    rows = np.unique(rng.integers(1, hi, size=(n, kw), dtype=np.uint64), axis=0)
    t = HashLevel(kw, 2 * len(rows) + 16, with_values=blocks == 2)
    vals = np.arange(len(rows), dtype=np.uint64)
    t.reset_with(rows, vals if blocks == 2 else None)
    keys, got_vals = t.sealed(nw)
    order = sort_rows(rows, nw)
    assert np.array_equal(keys, rows[order])
    if blocks == 2:
        assert np.array_equal(got_vals, vals[order])


@pytest.mark.parametrize("threads", [1, 3])
def test_spilled_runs_match_direct(monkeypatch, threads):
    from halmasearch.engine import SpillRuns
    p = make_preset("cc10")
    e = Engine(p.board, p.rules, canonicalize=True)
    lv = e.rows([p.transfer_start()])
    for d in range(1, 5):
        lv, _ = e.expand_transfer(lv, depth=d)
    full, st_full = e.expand_transfer(lv, depth=5)
    merged = []
    orig = SpillRuns.merge

    def spy(self, *a):
        merged.append(len(self.bounds))
        return orig(self, *a)

    monkeypatch.setattr(SpillRuns, "merge", spy)
    # room for the rows, not for a table holding all of them
    e.memory_cap = lv.nbytes + 2 * full.nbytes
    e.threads = threads
    got, st_got = e.expand_transfer(lv, depth=5, retained=lv.nbytes)
    assert merged and merged[0] > 1
    assert np.array_equal(full, got)
    assert (st_full.size, st_full.generated, st_full.pruned) == \
        (st_got.size, st_got.generated, st_got.pruned)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), max_size=30),
                min_size=1, max_size=6),
       st.integers(1, 3))
def test_merge_runs_is_sorted_union(runs, nw):
    from halmasearch.engine import SpillRuns
    kw = 2 * nw if nw > 1 else 2
    sp = SpillRuns(kw)
    everything = []
    for r in runs:
        rows = np.array([[a, b] + [0] * (kw - 2) for a, b in r], np.uint64).reshape(-1, kw)
        rows = np.unique(rows, axis=0)
        if len(rows):
            rows = rows[sort_rows(rows, nw)]
        sp.add(rows)
        everything.extend(map(tuple, rows))
    if not sp.rows:
        return
    out = sp.merge(nw, sp.rows)
    want = np.unique(np.array(everything, np.uint64), axis=0)
    want = want[sort_rows(want, nw)]
    assert np.array_equal(out, want)


def test_spilled_levels_give_same_search(monkeypatch):
    from halmasearch import engine
    from halmasearch.transfer_search import TransferConfig, run_transfer
    p = make_preset("square4", 8)
    base = run_transfer(TransferConfig(p, 12, "prove"))
    monkeypatch.setattr(engine, "SPILL_MIN", 0)
    again = run_transfer(TransferConfig(p, 12, "prove"))
    assert base.verdict == again.verdict
    assert base.solution == again.solution and len(base.solution) == 12


def test_merge_runs_reports_overflow():
    from halmasearch.engine import SpillRuns
    sp = SpillRuns(2)
    sp.add(np.array([[1, 0], [2, 0]], np.uint64))
    sp.add(np.array([[1, 0], [3, 0]], np.uint64))
    assert sp.merge(1, 2) is None
    sp = SpillRuns(2)
    sp.add(np.array([[1, 0], [2, 0]], np.uint64))
    sp.add(np.array([[1, 0], [2, 0]], np.uint64))
    assert sp.merge(1, 2).tolist() == [[1, 0], [2, 0]]
