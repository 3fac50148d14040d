import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import BLOCK, GLIDER, MOVE_GLIDER, naive_moore_sums, naive_step, place
from lifelab import engine
from lifelab._accel import rule_tables, step_numpy
from lifelab.rules import RuleSet, parse_rule_string

LIFE = parse_rule_string("B3/S23")
MOVE = parse_rule_string("B368/S245")


def random_rule(rng):
    birth = tuple(int(d) for d in range(9) if rng.random() < 0.3)
    survival = tuple(int(d) for d in range(9) if rng.random() < 0.3)
    return RuleSet(birth, survival)


def test_moore_sums_single_cell_wraps():
    g = place(8, 8, np.ones((1, 1), np.uint8), 0, 0)
    sums = engine.moore_sums(g)[0, 0]
    assert sums[0, 0] == 0
    for r, c in [(7, 7), (7, 0), (7, 1), (0, 7), (0, 1), (1, 7), (1, 0), (1, 1)]:
        assert sums[r, c] == 1
    assert sums.sum() == 8


def test_moore_sums_full_three_by_three():
    g = np.ones((1, 1, 3, 3), np.uint8)
    assert (engine.moore_sums(g) == 8).all()


def test_moore_sums_matches_reference(rng):
    g = (rng.random((1, 1, 16, 16)) < 0.4).astype(np.uint8)
    assert np.array_equal(engine.moore_sums(g)[0, 0],
                          naive_moore_sums(g[0, 0]))


def test_step_blinker_period_two():
    g = place(8, 8, np.ones((1, 3), np.uint8), 4, 3)
    g1 = engine.step(g, LIFE)
    expected = place(8, 8, np.ones((3, 1), np.uint8), 3, 4)
    assert np.array_equal(g1, expected)
    assert np.array_equal(engine.step(g1, LIFE), g)


def test_step_empty_stays_empty_without_b0():
    g = engine.make_grid(2, 16, 16)
    assert engine.step(g, LIFE).sum() == 0


def test_step_block_still_life():
    g = place(8, 8, BLOCK, 3, 3)
    assert np.array_equal(engine.step(g, LIFE), g)


def test_step_b0_ignites_empty_grid():
    rule = parse_rule_string("B0/S")
    g = engine.make_grid(1, 5, 5)
    g1 = engine.step(g, rule)
    assert (g1 == 1).all()
    assert (engine.step(g1, rule) == 0).all()


def test_move_glider_translates():
    # 6-cell spaceship under B368/S245: period 7, displacement (-1,-1)
    g = place(24, 24, MOVE_GLIDER, 10, 10)
    g7 = engine.step(g, MOVE, steps=7)
    assert np.array_equal(g7, np.roll(g, (-1, -1), axis=(2, 3)))


def test_step_matches_reference_many_rules(rng):
    for _ in range(15):
        h = int(rng.integers(3, 40))
        w = int(rng.integers(3, 40))
        g = (rng.random((1, 1, h, w)) < 0.4).astype(np.uint8)
        rule = random_rule(rng)
        got = engine.step(g, rule)
        want = naive_step(g[0, 0], set(rule.birth), set(rule.survival))
        assert np.array_equal(got[0, 0], want), (h, w, rule)


def test_multi_word_widths_match_reference(rng):
    # widths straddling the 64-bit word boundary
    for w in (63, 64, 65, 127, 128, 129):
        g = (rng.random((1, 1, 9, w)) < 0.4).astype(np.uint8)
        got = engine.step(g, LIFE)
        want = naive_step(g[0, 0], {3}, {2, 3})
        assert np.array_equal(got[0, 0], want), w


def test_steps_argument_composes(rng):
    g = (rng.random((1, 1, 20, 20)) < 0.4).astype(np.uint8)
    five = engine.step(g, LIFE, steps=5)
    loop = g
    for _ in range(5):
        loop = engine.step(loop, LIFE)
    assert np.array_equal(five, loop)


def test_batch_independence(rng):
    batch = (rng.random((4, 1, 16, 16)) < 0.4).astype(np.uint8)
    stepped = engine.step(batch, LIFE)
    for i in range(4):
        single = engine.step(batch[i:i + 1], LIFE)
        assert np.array_equal(stepped[i], single[0])


def test_translation_equivariance(rng):
    g = (rng.random((1, 1, 17, 23)) < 0.4).astype(np.uint8)
    for dr, dc in [(1, 0), (0, 1), (5, 9), (-3, 7)]:
        shifted = np.roll(g, (dr, dc), axis=(2, 3))
        assert np.array_equal(engine.step(shifted, LIFE),
                              np.roll(engine.step(g, LIFE), (dr, dc), axis=(2, 3)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(-40, 40), st.integers(-40, 40),
       st.sets(st.integers(0, 8)), st.sets(st.integers(0, 8)))
def test_translation_equivariance_property(seed, dr, dc, birth, survival):
    rule = RuleSet(tuple(birth), tuple(survival))
    g = (np.random.default_rng(seed).random((1, 1, 11, 19)) < 0.4).astype(np.uint8)
    shifted = np.roll(g, (dr, dc), axis=(2, 3))
    assert np.array_equal(engine.step(shifted, rule),
                          np.roll(engine.step(g, rule), (dr, dc), axis=(2, 3)))


def test_determinism(rng):
    g = (rng.random((2, 1, 32, 32)) < 0.4).astype(np.uint8)
    a = engine.step(g, MOVE, steps=3)
    b = engine.step(g, MOVE, steps=3)
    assert np.array_equal(a, b)


def test_backends_agree(rng):
    for _ in range(8):
        h = int(rng.integers(3, 50))
        w = int(rng.integers(3, 100))
        g = (rng.random((2, 1, h, w)) < 0.4).astype(np.uint8)
        rule = random_rule(rng)
        lut = rule_tables(rule.birth, rule.survival)
        fallback = step_numpy(g, lut, 3)
        assert np.array_equal(engine.step(g, rule, steps=3), fallback)


def test_make_grid_validates():
    with pytest.raises(ValueError):
        engine.make_grid(0, 8, 8)
    with pytest.raises(ValueError):
        engine.make_grid(1, 2, 8)


def test_validate_grid_rejects_nonbinary():
    g = engine.make_grid(1, 4, 4)
    g[0, 0, 0, 0] = 2
    with pytest.raises(ValueError):
        engine.validate_grid(g)


def test_benchmark_reports_throughput():
    res = engine.benchmark(16, 16, LIFE, duration=0.05)
    assert res["updates_per_second"] > 0
    assert res["cell_updates_per_second"] == pytest.approx(
        res["updates_per_second"] * 256)
    with pytest.raises(ValueError):
        engine.benchmark(16, 16, LIFE, duration=0)


def test_benchmark_empty_rule_grid_empties():
    # B/S kills everything after one step; throughput is still reported
    res = engine.benchmark(3, 3, parse_rule_string("B/S"), duration=0.02)
    assert res["updates_per_second"] > 0
