import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from halmasearch.board import (
    Board, Cell, make_preset, rules_for,
)
from halmasearch.bounds import (
    centroid_step_bound, game_lower_bound, n_move_bound,
    remaining_game_bound, transfer_lower_bound, winner,
)
from halmasearch.engine import Engine
from halmasearch.metrics import (
    army_distance, balance_deviation, centroid, distance, is_balanced, norm, norm_by_sign,
    speed, state_space_size, type_census,
)
from halmasearch.movegen import apply_move, legal_moves

ints = st.integers(-20, 20)


@given(ints, ints)
def test_norms_agree(dx, dy):
    r6 = rules_for(6)
    assert norm(dx, dy, r6) == norm_by_sign(dx, dy)
    assert norm(Fraction(dx, 3), Fraction(dy, 3), r6) == norm_by_sign(Fraction(dx, 3),
                                                                      Fraction(dy, 3))
    assert norm(dx, dy, rules_for(4)) == abs(dx) + abs(dy)
    assert norm(dx, dy, rules_for(8)) == max(abs(dx), abs(dy))


def test_six_move_norm_cases():
    r6 = rules_for(6)
    assert norm(3, 3, r6) == 3
    assert norm(3, -3, r6) == 6
    assert norm(2, -1, r6) == 3


def test_army_distance_is_closest_pair():
    r = rules_for(4)
    a = [Cell(0, 0), Cell(1, 0)]
    assert army_distance(a, [Cell(4, 0), Cell(4, 3)], r) == 3
    assert army_distance(a, [Cell(1, 0), Cell(2, 0)], r) == 0
    assert distance(Cell(0, 0), Cell(4, 2), r) == 6
    assert distance(Cell(0, 0), Cell(4, 2), rules_for(8)) == 4


def test_centroid_and_census():
    p = make_preset("cc10")
    assert centroid(p.start) == -60
    assert centroid(p.goal) == 60
    assert type_census(p.start, p.board) == (3, 3, 3, 1)
    assert balance_deviation(p.start, p.board) == 2
    assert not is_balanced(p.start, p.board)


def test_speed_is_exact():
    p = make_preset("square4")
    v = speed(p.start, p.goal, 12, p.rules)
    assert isinstance(v, Fraction) and v == Fraction(7 * 4, 12 * 4)


def test_state_space():
    b = Board.rectangle(3, 3)
    assert state_space_size(b, 1) == 9 * 8
    assert state_space_size(b, 2, two_armies=False) == 36
    with pytest.raises(ValueError):
        state_space_size(b, 5)


def test_closed_forms():
    assert n_move_bound(5, 0, 1) == 0
    assert n_move_bound(5, 1, 1) == 5
    assert n_move_bound(5, 3, 2) == 21
    p = make_preset("cc10")
    assert centroid_step_bound(p.start, p.rules) == 4
    assert transfer_lower_bound(p.start, p.goal, p.rules) == 19
    assert game_lower_bound(p.start, p.goal, p.rules) == 27
    assert remaining_game_bound(p.game_start(), p.board, p.rules) == 27
    with pytest.raises(ValueError):
        n_move_bound(1, -1, 1)
    with pytest.raises(ValueError):
        game_lower_bound(p.start, [], p.rules)


# --- kernel bound --------------------------------------------------------------


@pytest.mark.parametrize("name,rules", [("cc10", 6), ("cc10", 4), ("square9", 8)])
def test_kernel_prune_threshold_matches_python_bound(name, rules):
    # A successor at depth i survives a pass with threshold m iff i + h <= m.
    p = make_preset(name, rules)
    e = Engine(p.board, p.rules, game=True)
    rng = random.Random(11)
    pos = p.game_start()
    for depth in range(30):
        moves = legal_moves(pos, p.board, p.rules)
        nxt = apply_move(pos, rng.choice(moves), p.board, p.rules, validate=False)
        if winner(nxt, p.board) is not None:
            break
        h = remaining_game_bound(nxt, p.board, p.rules)
        row = e.row(nxt)
        parent = e.row(pos)[None, :]
        ones = np.ones(1, np.uint64)
        for m, present in ((depth + 1 + h, True), (depth + h, False)):
            keys, _, _ = e.expand_game(parent, ones, depth=depth, max_len=m)
            assert (e.find(keys, row) >= 0) == present
        pos = nxt
