import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sectorlearn.array_beams import ArrayConfig, BeamSpec, build_pool, steering_vector
from sectorlearn.channel import LinkPaths, PathRecord, ScenarioSnapshot
from sectorlearn.coverage import (
    RadioConstants, coverage_from_powers, decode_frame, discounted_return, encode_state, evaluate, rx_power,
    write_report,
)
from sectorlearn.errors import DimensionMismatch, MissingLink

CFG = ArrayConfig()


def test_rx_power_examples():
    f = np.zeros(16, dtype=complex)
    f[0] = 1.0
    h = np.zeros(16, dtype=complex)
    h[0] = 1.0
    assert rx_power(h, f) == 1.0
    assert rx_power(np.zeros(16), f) == 0.0
    a = steering_vector(CFG, 0, 0)
    assert rx_power(a, np.conj(a) / 4.0) == pytest.approx(16.0, rel=1e-14)


def test_rx_power_uses_plain_transpose():
    a = steering_vector(CFG, 20.0, 5.0)
    assert rx_power(a, np.conj(a) / 4.0) == pytest.approx(16.0, rel=1e-12)
    assert rx_power(a, a / 4.0) < 16.0 - 1e-3  # a conjugating product would give 16 here


def test_rx_power_length_check():
    with pytest.raises(DimensionMismatch):
        rx_power(np.ones(4), np.ones(16))


def _report(P, noise_dbm=-95.0, T=-6.0):
    return coverage_from_powers(np.atleast_2d(P), RadioConstants(noise_dbm, T))


def test_equal_power_and_noise_connects():
    noise_mw = 10 ** (-95 / 10)
    r = _report([[noise_mw]])
    assert r.sinr_db[0] == pytest.approx(0.0, abs=1e-12)
    assert r.connected_count == 1


def test_threshold_counts():
    P = 10 ** (np.array([0.0, -7.0, -6.0]) / 10)  # noise 0 dBm, so these are the SINRs
    probe = coverage_from_powers(P[None], RadioConstants(0.0, -6.0))
    T = float(probe.sinr_db[2])  # -6 dB exactly as the pipeline computes it
    assert T == pytest.approx(-6.0, abs=1e-12)
    r = coverage_from_powers(P[None], RadioConstants(0.0, T))
    np.testing.assert_array_equal(r.connection, [1, 0, 0])
    assert r.connected_count == 1


def test_boundary_is_disconnected():
    # serving power equal to noise gives SINR exactly 0 dB
    r = coverage_from_powers(np.array([[1.0]]), RadioConstants(noise_power_dbm=0.0, sinr_threshold_db=0.0))
    assert r.sinr_db[0] == 0.0
    assert r.connection[0] == 0 and r.connected_count == 0


def test_association_max_rsrp_lowest_index_on_tie():
    P = np.array([[1.0, 2.0, 3.0], [1.0, 5.0, 3.0]])
    r = _report(P, noise_dbm=0.0)
    np.testing.assert_array_equal(r.serving_sector, [0, 1, 0])
    assert r.sinr_db[1] == pytest.approx(10 * math.log10(5.0 / 3.0))


@given(arrays(float, (3, 7), elements=st.floats(0, 1e-6)), st.floats(-110, -80), st.floats(-15, 10))
def test_count_matches_popcount(P, noise, T):
    r = _report(P, noise, T)
    assert r.connected_count == int(r.connection.sum())
    np.testing.assert_array_equal(r.connection, (r.sinr_db > T).astype(np.uint8))
    assert set(np.unique(r.connection)) <= {0, 1}


@given(arrays(float, (1, 20), elements=st.floats(0, 1e-6)), st.floats(1.0, 1e3))
def test_single_sector_monotone_in_power(P, gain):
    base = _report(P)
    boosted = _report(P * gain)
    assert boosted.connected_count >= base.connected_count
    assert np.all(boosted.connection >= base.connection)


def _snapshot(losses, n_sectors):
    K = len(losses[0])
    links = {(m, k): LinkPaths(m, k, (PathRecord(0.0, 5.0, losses[m][k], 0.0),)) for m in range(n_sectors)
             for k in range(K)}
    return ScenarioSnapshot(0, "s", [(0.0, 0.0, 0.0)] * K, links, n_sectors=n_sectors)


def test_evaluate_end_to_end():
    pools = [build_pool(CFG, [BeamSpec(27, 9, 5.0)])] * 2
    snap = _snapshot([[100.0, 130.0], [130.0, 100.0]], 2)
    r = evaluate(snap, pools, (0, 0), RadioConstants(-95.0, -6.0), CFG)
    np.testing.assert_array_equal(r.serving_sector, [0, 1])
    # both beams aim at the path, so gain is 16 and SINR is the 30 dB loss gap less noise
    sig = 16 * 10 ** (-10.0)
    want = 10 * math.log10(sig / (16 * 10 ** (-13.0) + 10 ** (-9.5)))
    np.testing.assert_allclose(r.sinr_db, [want, want], atol=1e-9)
    assert r.connected_count == 2


def test_evaluate_requires_every_link():
    pools = [build_pool(CFG, [BeamSpec(27, 9, 0)])] * 2
    snap = _snapshot([[100.0], [100.0]], 2)
    del snap.links[(1, 0)]
    with pytest.raises(MissingLink):
        evaluate(snap, pools, (0, 0), RadioConstants(), CFG)


def test_evaluate_rejects_bad_beam_index():
    pools = [build_pool(CFG, [BeamSpec(27, 9, 0)])]
    with pytest.raises(IndexError):
        evaluate(_snapshot([[100.0]], 1), pools, (1,), RadioConstants(), CFG)


def test_blocked_ue_is_disconnected():
    pools = [build_pool(CFG, [BeamSpec(27, 9, 0)])]
    snap = _snapshot([[100.0, 100.0]], 1)
    snap.links[(0, 1)] = LinkPaths(0, 1, ())
    r = evaluate(snap, pools, (0,), RadioConstants(), CFG)
    assert list(r.connection) == [1, 0]


# -- state encoding


def test_encode_full_frame_shape():
    hist = [np.ones(400, dtype=np.uint8)] * 4
    assert encode_state(hist, 100).shape == (4, 4, 100)


def test_single_state_repeats():
    bits = np.array([1, 0, 1, 1, 0], dtype=np.uint8)
    s = encode_state([bits], 5)
    assert s.shape == (4, 1, 5)
    for f in s:
        np.testing.assert_array_equal(f[0], bits)


def test_padding_arithmetic():
    bits = np.ones(7, dtype=np.uint8)
    s = encode_state([bits], 3)
    assert s.shape == (4, 3, 3)
    assert s[-1].sum() == 7
    np.testing.assert_array_equal(s[-1].ravel()[7:], [0, 0])


def test_newest_frame_last_and_window_of_four():
    hist = [np.full(3, i % 2, dtype=np.uint8) for i in range(6)]
    s = encode_state(hist, 3)
    np.testing.assert_array_equal(s[:, 0, 0], [0, 1, 0, 1])  # states 2..5
    hist[-1] = np.array([1, 0, 1], dtype=np.uint8)
    np.testing.assert_array_equal(encode_state(hist, 3)[-1, 0], [1, 0, 1])


@given(st.lists(st.integers(0, 1), min_size=1, max_size=250), st.integers(1, 120))
def test_encode_decode_round_trip(bits, C):
    b = np.array(bits, dtype=np.uint8)
    np.testing.assert_array_equal(decode_frame(encode_state([b], C), len(b)), b)


# -- discounted return


def test_discounted_return_examples():
    assert discounted_return([1.0] * 50, 0.5) == pytest.approx(2.0, abs=1e-12)
    assert discounted_return([3, 4], 1.0) == 7
    assert discounted_return([10, 0, 0], 1e-4) == pytest.approx(10.0, abs=1e-12)


def test_report_rows():
    r = _report([[1e-9, 1e-12]])
    buf = io.StringIO()
    write_report(r, 7, buf, header=True)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "step,ue_id,serving_sector,sinr_db,connected"
    assert lines[1].startswith("7,0,0,") and lines[1].endswith(",1")
    assert lines[2].endswith(",0")
