import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sectorlearn.errors import EmptyWindow, LengthMismatch
from sectorlearn.metrics import (
    TRACE_COLUMNS, TraceWindow, am, am_reward_equivalent, asd, compute_metrics, error_band, read_trace,
    window_metrics, windows, write_metrics, write_trace_row,
)


def window(agent_r, oracle_r, agent_a=None, oracle_a=None):
    n = len(agent_r)
    agent_a = agent_a if agent_a is not None else [(0,)] * n
    oracle_a = oracle_a if oracle_a is not None else [(0,)] * n
    return TraceWindow(agent_r, oracle_r, agent_a, oracle_a)


# -- ASD


def test_asd_examples():
    assert asd(window([5, 6, 7], [5, 6, 7])) == 0.0
    assert asd(window([9] * 10, [10] * 10)) == 1.0
    assert asd(window([10, 8], [10, 10])) == 2.0


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        TraceWindow([1, 2], [1], [(0,), (0,)], [(0,), (0,)])
    with pytest.raises(LengthMismatch):
        am(TraceWindow([1], [1], [(0, 1)], [(0,)]))


def test_empty_window():
    with pytest.raises(EmptyWindow):
        TraceWindow([], [], [], [])


# -- AM


def test_am_examples():
    n = 200
    same = [(1,)] * n
    assert am(window([0] * n, [0] * n, same, same)) == 0.0
    alt = [(1,) if i % 2 else (2,) for i in range(n)]
    assert am(window([0] * n, [0] * n, alt, same)) == 0.5
    assert am(window([0] * n, [0] * n, [(0,)] * n, same)) == 1.0


def test_am_per_sector_and_joint():
    agent = [(0, 1), (0, 0), (1, 1), (0, 1)]
    oracle = [(0, 1)] * 4
    w = window([3] * 4, [3] * 4, agent, oracle)
    np.testing.assert_array_equal(am(w, per_sector=True), [0.25, 0.25])
    assert am(w) == 0.5


def test_reward_equivalent_am():
    agent = [(1,), (1,), (0,)]
    oracle = [(0,)] * 3
    w = window([10, 9, 10], [10, 10, 10], agent, oracle)
    assert am(w) == pytest.approx(2 / 3)
    assert am_reward_equivalent(w) == pytest.approx(1 / 3)


# -- error band


def test_error_band_examples():
    assert error_band([3, 3, 3]) == (3.0, 0.0)
    assert error_band([0, 4]) == (2.0, 2.0)
    assert error_band([1, 2, 3, 10]) == (4.0, 6.0)
    with pytest.raises(EmptyWindow):
        error_band([])


# -- properties

rewards = st.lists(st.integers(0, 100), min_size=1, max_size=60)


@st.composite
def traces(draw, M=2):
    n = draw(st.integers(1, 60))
    ints = st.integers(0, 3)
    r = draw(st.lists(st.integers(0, 100), min_size=n, max_size=n))
    o = draw(st.lists(st.integers(0, 100), min_size=n, max_size=n))
    a = draw(st.lists(st.tuples(*[ints] * M), min_size=n, max_size=n))
    b = draw(st.lists(st.tuples(*[ints] * M), min_size=n, max_size=n))
    return r, o, a, b


@given(traces(), st.randoms(use_true_random=False))
def test_permutation_invariance(tr, rnd):
    r, o, a, b = tr
    idx = list(range(len(r)))
    rnd.shuffle(idx)
    w = TraceWindow(r, o, a, b)
    p = TraceWindow([r[i] for i in idx], [o[i] for i in idx], [a[i] for i in idx], [b[i] for i in idx])
    assert asd(w) == pytest.approx(asd(p), rel=1e-12)
    assert am(w) == pytest.approx(am(p), rel=1e-12)
    np.testing.assert_allclose(am(w, True), am(p, True), rtol=1e-12)


@given(traces())
def test_reward_equivalent_never_exceeds_strict(tr):
    w = TraceWindow(*tr)
    assert am_reward_equivalent(w) <= am(w)
    assert np.all(am_reward_equivalent(w, True) <= am(w, True))


@given(traces())
def test_zero_iff_identical(tr):
    r, o, a, b = tr
    w = TraceWindow(r, o, a, b)
    assert (asd(w) == 0) == (list(r) == list(o))
    assert (am(w) == 0) == (list(a) == list(b))
    assert asd(w) >= 0 and 0 <= am(w) <= 1


# -- windows and files


def test_windows_are_disjoint_and_complete():
    assert windows(450, 200) == [(0, 200), (200, 400)]
    assert windows(199, 200) == []
    with pytest.raises(ValueError):
        windows(10, 0)


def _trace(n):
    rng = np.random.default_rng(0)
    buf = io.StringIO()
    buf.write(",".join(TRACE_COLUMNS) + "\n")
    for t in range(n):
        a = tuple(int(x) for x in rng.integers(0, 3, 2))
        write_trace_row(buf, t, f"s{t % 2 + 1}", 0.5 ** t, a, int(rng.integers(0, 50)), 40, (1, 2))
    buf.seek(0)
    return buf


def test_trace_round_trip():
    tr = read_trace(_trace(5))
    assert tr["step"] == [0, 1, 2, 3, 4]
    assert tr["scenario_id"][:2] == ["s1", "s2"]
    assert tr["epsilon"][3] == 0.125
    assert tr["oracle_actions"][0] == (1, 2)
    assert all(len(a) == 2 for a in tr["actions"])


def test_trace_header_checked():
    with pytest.raises(ValueError):
        read_trace(io.StringIO("step,reward\n0,1\n"))


def test_metrics_file_columns():
    tr = read_trace(_trace(10))
    rows = compute_metrics(tr, 4)
    assert [r.window_start for r in rows] == [0, 4]
    buf = io.StringIO()
    write_metrics(rows, 2, buf)
    header, *body = buf.getvalue().splitlines()
    assert header.split(",")[:5] == ["window_start", "asd", "asd_maxdev", "am_sector_0", "am_sector_1"]
    assert len(body) == 2
    first = window_metrics(tr, 0, 4)
    sq = (np.array(tr["reward"][:4]) - 40.0) ** 2
    assert first.asd == pytest.approx(sq.mean())
    assert first.asd_maxdev == pytest.approx(np.max(np.abs(sq - sq.mean())))
