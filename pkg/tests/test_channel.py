import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sectorlearn.array_beams import ArrayConfig, steering_vector
from sectorlearn.channel import (
    SPEED_OF_LIGHT, LinkPaths, PathRecord, ScenarioSnapshot, SectorSite, SynthChannelParams, channel_matrix,
    channel_vector, departure_angles, fspl_db, load_location_history, load_raytrace, snapshots_from_history,
    synth_links, write_location_history, write_raytrace,
)
from sectorlearn.errors import DegenerateGeometry, EmptyDataset, LinkIndexError, MissingLink, ParseError

CFG = ArrayConfig()
HEADER = "timestamp,scenario_id,sector_id,ue_id,ue_x,ue_y,ue_z,aod_az_deg,aod_elev_deg,pathloss_db,phase_deg\n"

paths_st = st.lists(
    st.builds(PathRecord, st.floats(-90, 90), st.floats(-90, 90), st.floats(0, 150), st.floats(0, 360)),
    max_size=4,
)


# -- channel_vector


def test_single_broadside_path_is_steering_vector():
    h = channel_vector(CFG, LinkPaths(0, 0, (PathRecord(0.0, 0.0, 0.0, 0.0),)))
    np.testing.assert_allclose(h, steering_vector(CFG, 0.0, 0.0), atol=1e-15)


def test_opposite_phases_cancel():
    link = LinkPaths(0, 0, (PathRecord(0, 0, 3.0, 0.0), PathRecord(0, 0, 3.0, 180.0)))
    np.testing.assert_allclose(channel_vector(CFG, link), 0.0, atol=1e-15)


def test_two_path_sum():
    link = LinkPaths(0, 0, (PathRecord(0, 0, 0.0, 0.0), PathRecord(0, 0, 6.02, 0.0)))
    want = (1 + 10 ** (-6.02 / 20)) * steering_vector(CFG, 0, 0)
    np.testing.assert_allclose(channel_vector(CFG, link), want, atol=1e-15)
    assert abs(channel_vector(CFG, link)[0]) == pytest.approx(1.5, abs=2e-4)


def test_empty_path_list_is_zero():
    np.testing.assert_array_equal(channel_vector(CFG, LinkPaths(0, 0, ())), np.zeros(16))


@given(paths_st, paths_st)
def test_linearity_over_path_lists(a, b):
    whole = channel_vector(CFG, LinkPaths(0, 0, tuple(a + b)))
    parts = channel_vector(CFG, LinkPaths(0, 0, tuple(a))) + channel_vector(CFG, LinkPaths(0, 0, tuple(b)))
    np.testing.assert_allclose(whole, parts, atol=1e-12, rtol=0)


@given(paths_st.filter(bool), st.floats(0, 40))
def test_extra_loss_scales_norm(paths, c):
    h = channel_vector(CFG, LinkPaths(0, 0, tuple(paths)))
    shifted = tuple(PathRecord(p.aod_az_deg, p.aod_elev_deg, p.pathloss_db + c, p.phase_deg) for p in paths)
    h2 = channel_vector(CFG, LinkPaths(0, 0, shifted))
    if np.linalg.norm(h) > 1e-300:
        assert np.linalg.norm(h2) == pytest.approx(np.linalg.norm(h) * 10 ** (-c / 20), rel=1e-9)


def test_negative_loss_rejected():
    with pytest.raises(ValueError):
        PathRecord(0, 0, -1.0, 0)


# -- synth_links


def test_los_path_matches_hand_fspl():
    f = 2.0e9
    d = 10 ** (80 / 20) * SPEED_OF_LIGHT / (4 * math.pi * f)  # distance giving exactly 80 dB
    site = SectorSite(0.0, 0.0, 35.0)
    ue = (d, 0.0, 35.0)
    links = synth_links([site], [ue], SynthChannelParams(carrier_freq_hz=f), np.random.default_rng(0))
    (path,) = links[(0, 0)].paths
    assert path.pathloss_db == pytest.approx(80.0, abs=1e-9)
    assert path.aod_az_deg == pytest.approx(0.0, abs=1e-12)
    assert path.aod_elev_deg == pytest.approx(0.0, abs=1e-12)


def test_departure_geometry():
    site = SectorSite(0.0, 0.0, 35.0, azimuth_deg=90.0)
    az, el, dist = departure_angles(site, (0.0, 100.0, 0.0))
    assert az == pytest.approx(0.0, abs=1e-12)  # straight along boresight
    assert el == pytest.approx(math.degrees(math.atan2(35, 100)))  # below the horizon
    assert dist == pytest.approx(math.hypot(100, 35))


def test_doubling_distance_adds_six_db():
    site = SectorSite(0.0, 0.0, 0.0)
    links = synth_links([site], [(100.0, 0, 0), (200.0, 0, 0)], SynthChannelParams(), np.random.default_rng(0))
    diff = links[(0, 1)].paths[0].pathloss_db - links[(0, 0)].paths[0].pathloss_db
    assert diff == pytest.approx(20 * math.log10(2), abs=1e-12)
    assert diff == pytest.approx(6.02, abs=1e-3)


def test_synth_is_seed_deterministic():
    params = SynthChannelParams(n_nlos_paths=3, shadowing_sigma_db=6, los_blockage_prob=0.3)
    sites = [SectorSite(0, 0, 35), SectorSite(500, 0, 35, 180)]
    ues = [(100.0 + 10 * k, 5.0 * k, 1.5) for k in range(20)]
    a = synth_links(sites, ues, params, np.random.default_rng(7))
    b = synth_links(sites, ues, params, np.random.default_rng(7))
    assert a == b


def test_path_counts_and_blockage():
    sites = [SectorSite(0, 0, 35), SectorSite(500, 0, 35, 180)]
    ues = [(200.0, 0.0, 1.5)] * 3
    links = synth_links(sites, ues, SynthChannelParams(n_nlos_paths=0), np.random.default_rng(0))
    assert len(links) == 6 and all(len(l.paths) == 1 for l in links.values())
    blocked = synth_links(sites, ues, SynthChannelParams(n_nlos_paths=2, los_blockage_prob=1.0),
                          np.random.default_rng(0))
    for l in blocked.values():
        assert len(l.paths) == 2
        assert all(p.pathloss_db > fspl_db(200, 2e9) - 1e-9 for p in l.paths)


def test_colocated_ue_rejected():
    with pytest.raises(DegenerateGeometry):
        synth_links([SectorSite(1, 2, 3)], [(1.0, 2.0, 3.0)], SynthChannelParams(), np.random.default_rng(0))


def test_channel_matrix_missing_link():
    snap = ScenarioSnapshot(0, "s", [(1.0, 0, 0)], {})
    with pytest.raises(MissingLink):
        channel_matrix(CFG, snap, 1)


# -- ray-trace file


def test_two_rows_one_link():
    text = HEADER + "0,s1,0,0,10,0,1.5,0,0,80,0\n0,s1,0,0,10,0,1.5,5,1,90,45\n"
    (snap,) = load_raytrace(text.encode())
    assert snap.scenario_id == "s1"
    assert list(snap.links) == [(0, 0)]
    assert snap.links[(0, 0)].paths == (PathRecord(0, 0, 80, 0), PathRecord(5, 1, 90, 45))


def test_non_numeric_loss_names_line():
    text = HEADER + "0,s1,0,0,10,0,1.5,0,0,80,0\n0,s1,0,0,10,0,1.5,0,0,abc,0\n"
    with pytest.raises(ParseError) as err:
        load_raytrace(text.encode())
    assert err.value.line == 3
    assert "line 3" in str(err.value)


def test_wrong_column_count():
    with pytest.raises(ParseError):
        load_raytrace((HEADER + "0,s1,0,0,10,0,1.5,0,0,80\n").encode())


def test_sector_out_of_declared_range():
    text = "# n_sectors=2 n_ues=1\n" + HEADER + "0,s1,5,0,10,0,1.5,0,0,80,0\n"
    with pytest.raises(IndexError):
        load_raytrace(text.encode())
    with pytest.raises(LinkIndexError):
        load_raytrace((HEADER + "0,s1,5,0,10,0,1.5,0,0,80,0\n").encode(), n_sectors=2)


def test_empty_dataset():
    with pytest.raises(EmptyDataset):
        load_raytrace(HEADER.encode())
    with pytest.raises(EmptyDataset):
        load_raytrace(b"")


def test_round_trip_with_blocked_links():
    rng = np.random.default_rng(3)
    sites = [SectorSite(0, 0, 35), SectorSite(900, 0, 35, 180)]
    params = SynthChannelParams(n_nlos_paths=2, shadowing_sigma_db=5, los_blockage_prob=0.5)
    snaps = []
    for ts in range(3):
        ues = [tuple(map(float, rng.uniform([100, -50, 0], [800, 50, 20]))) for _ in range(4)]
        snaps.append(ScenarioSnapshot(ts, f"s{ts % 2}", ues, synth_links(sites, ues, params, rng), n_sectors=2))
    # force one link with no paths at all
    snaps[0].links[(1, 2)] = LinkPaths(1, 2, ())
    buf = io.StringIO()
    write_raytrace(snaps, buf, n_sectors=2)
    back = load_raytrace(io.BytesIO(buf.getvalue().encode()))
    assert len(back) == 3
    for a, b in zip(snaps, back):
        assert (a.timestamp, a.scenario_id, a.ue_positions, a.n_sectors) == (b.timestamp, b.scenario_id,
                                                                              b.ue_positions, b.n_sectors)
        assert a.links == b.links


def test_location_history_round_trip():
    rows = [(0, 0, 1.0, 2.0, 3.0), (0, 1, 4.0, 5.0, 6.0), (1, 0, 7.5, 8.25, 9.0), (1, 1, 0.1, 0.2, 0.3)]
    buf = io.StringIO()
    write_location_history(rows, buf)
    hist = load_location_history(io.BytesIO(buf.getvalue().encode()))
    assert hist == {0: [(1.0, 2.0, 3.0), (4.0, 5.0, 6.0)], 1: [(7.5, 8.25, 9.0), (0.1, 0.2, 0.3)]}
    snaps = snapshots_from_history(hist, [SectorSite(-100, 0, 35)], SynthChannelParams(), seed=1)
    assert [s.timestamp for s in snaps] == [0, 1]
    assert all(len(s.links) == 2 for s in snaps)
