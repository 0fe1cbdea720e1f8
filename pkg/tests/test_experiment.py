import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fockchip.chip import C0, C1, T0, T1, V_B, ChipReflectivities, chip_unitary
from fockchip.errors import DomainError, StreamOrderError
from fockchip.experiment import (
    CoincidenceReport, SourceModel, TimeTagStream, accidental_rate, count_coincidences,
    estimate_rates, generate_stream, run_phase_sweep_experiment,
)
from fockchip.gate import LogicalEncoding, prob_table
from oracles import closed_form_gate

ENC = LogicalEncoding.chip()
DESIGN = ChipReflectivities.design()
LOSSLESS = SourceModel(coupling=1.0, multipair_prob=0.0, duty_cycle=None)


def _stream(pairs, duration=1.0):
    # pairs of (channel, timestamp in ns)
    pairs = sorted(pairs, key=lambda p: p[1])
    return TimeTagStream([c for c, _ in pairs], [round(t * 1000) for _, t in pairs],
                         duration, duration)


def test_source_validation():
    with pytest.raises(DomainError):
        SourceModel(pair_rate=-1)
    with pytest.raises(DomainError):
        SourceModel(coupling=1.2)
    with pytest.raises(DomainError):
        SourceModel(coincidence_window=0)
    with pytest.raises(DomainError):
        SourceModel(duty_cycle=(0.0, 5.0))
    assert SourceModel(coupling=[0.5] * 6).coupling == (0.5,) * 6


def test_duty_cycle_time_accounting():
    src = SourceModel()
    assert src.live_time(6.0) == 1.0
    assert src.live_time(13.5) == 3.0
    assert src.wall_time(3.0) == 13.0
    assert src.wall_time(2.5) == 12.5
    assert src.live_time(src.wall_time(2.5)) == pytest.approx(2.5)
    assert SourceModel(duty_cycle=None).live_time(7.0) == 7.0


def test_source_dict_round_trip():
    for src in (SourceModel(), SourceModel.with_background(), SourceModel(coupling=(0.1,) * 6, duty_cycle=None)):
        assert SourceModel.from_dict(json.loads(json.dumps(src.to_dict()))) == src


def test_zero_detector_efficiency_gives_empty_stream():
    src = SourceModel(detector_efficiency=0.0, detector_in_pair_rate=False)
    s = generate_stream(src, chip_unitary(DESIGN, 0.0), (C1, T0), seed=1, duration=6.0)
    assert len(s) == 0


def test_identity_chip_lossless():
    s = generate_stream(LOSSLESS, np.eye(6), (C0, T1), seed=3, duration=2.0)
    singles = s.singles()
    assert set(singles) == {C0, T1}
    assert singles[C0] == singles[T1]
    rep = count_coincidences(s, 4e-9)
    assert rep.coincidences(C0, T1) == singles[C0]


def test_stream_is_sorted_with_grid_timestamps():
    s = generate_stream(SourceModel.with_background(), chip_unitary(DESIGN, 0.3), (C1, T0), seed=2, duration=6.0)
    assert s.is_sorted()
    assert np.all(s.timestamps % 100 == 0)
    assert s.channels.max() < 16


def test_events_only_in_pulse_on_windows():
    s = generate_stream(SourceModel(), np.eye(6), (C0, T1), seed=4, duration=18.0)
    phase = (s.timestamps / 1e12) % 6.0
    assert np.all(phase <= 1.0 + 1e-10)
    assert s.live_time == 3.0


def test_reproducible_by_seed():
    u = chip_unitary(DESIGN, 1.0)
    a = generate_stream(SourceModel.with_background(), u, (C1, T0), seed=9, duration=6.0)
    b = generate_stream(SourceModel.with_background(), u, (C1, T0), seed=9, duration=6.0)
    c = generate_stream(SourceModel.with_background(), u, (C1, T0), seed=10, duration=6.0)
    assert np.array_equal(a.timestamps, b.timestamps) and np.array_equal(a.channels, b.channels)
    assert not np.array_equal(a.timestamps, c.timestamps[: len(a)])


def test_design_chip_zero_phase_input_10():
    u = chip_unitary(DESIGN, 0.0)
    s = generate_stream(LOSSLESS, u, ENC.input_modes("10"), seed=5, duration=1e5 / 11000)
    rep = count_coincidences(s, 4e-9)
    row = [rep.coincidences(*ENC.output_modes(k)) for k in range(4)]
    assert row[3] > 0.999 * sum(row)


def test_design_chip_half_pi_row_within_binomial_bounds():
    phi = math.pi / 2
    u = chip_unitary(DESIGN, phi)
    s = generate_stream(LOSSLESS, u, ENC.input_modes("10"), seed=6, duration=1e5 / 11000)
    rep = count_coincidences(s, 4e-9)
    row = np.array([rep.coincidences(*ENC.output_modes(k)) for k in range(4)])
    n = row.sum()
    p = prob_table(u, ENC).row("10")
    sigma = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(row - n * p) <= 3 * sigma + 3)
    # About one pair in nine is post-selected.
    assert n == pytest.approx(1e5 / 9, rel=0.05)


def test_count_examples():
    assert count_coincidences(_stream([(0, 0.0), (1, 2.0)]), 4e-9).coincidences(0, 1) == 1
    assert count_coincidences(_stream([(0, 0.0), (1, 10.0)]), 4e-9).coincidences(0, 1) == 0
    # Window is full width: 2 ns separation sits on the edge of a 4 ns window.
    assert count_coincidences(_stream([(0, 0.0), (1, 2.1)]), 4e-9).coincidences(0, 1) == 0


def test_greedy_matching_uses_each_click_once():
    rep = count_coincidences(_stream([(0, 0.0), (1, 1.0), (1, 1.5)]), 4e-9)
    assert rep.coincidences(0, 1) == 1
    rep = count_coincidences(_stream([(0, 0.0), (0, 0.5), (1, 1.0), (1, 1.5)]), 4e-9)
    assert rep.coincidences(0, 1) == 2


def test_count_rejects_unsorted_and_bad_window():
    s = TimeTagStream([0, 1], [2000, 1000], 1.0, 1.0)
    with pytest.raises(StreamOrderError):
        count_coincidences(s, 4e-9)
    with pytest.raises(DomainError):
        count_coincidences(_stream([(0, 0.0)]), 0.0)


def test_channel_range_checked():
    with pytest.raises(ValueError):
        TimeTagStream([16], [0], 1.0, 1.0)


def test_accidentals_between_independent_channels():
    rng = np.random.default_rng(12)
    r1, r2, w, T = 50_000.0, 40_000.0, 4e-9, 20.0
    t1 = np.sort(rng.integers(0, int(T * 1e12), rng.poisson(r1 * T)))
    t2 = np.sort(rng.integers(0, int(T * 1e12), rng.poisson(r2 * T)))
    key = np.sort(np.concatenate([t1 * 16, t2 * 16 + 1]))
    s = TimeTagStream(key % 16, key // 16, T, T)
    measured = count_coincidences(s, w).coincidences(0, 1)
    expected = accidental_rate(r1, r2, w) * T
    assert abs(measured - expected) <= 3 * math.sqrt(expected)


def test_partition_additivity():
    s = generate_stream(SourceModel.with_background(), chip_unitary(DESIGN, 0.7), (C1, T0), seed=8, duration=12.0)
    # Cut in the pulse-off gap so no coincidence straddles it.
    cut = int(np.searchsorted(s.timestamps, 3 * 10**12))
    a = TimeTagStream(s.channels[:cut], s.timestamps[:cut], 6.0, 1.0)
    b = TimeTagStream(s.channels[cut:], s.timestamps[cut:], 6.0, 1.0)
    whole = count_coincidences(s, 4e-9)
    merged = count_coincidences(a, 4e-9) + count_coincidences(b, 4e-9)
    assert merged.counts == whole.counts and merged.singles == whole.singles
    assert merged.live_time == whole.live_time


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 200)), max_size=60))
def test_coincidences_bounded_by_singles(events):
    s = _stream([(c, float(t)) for c, t in events])
    rep = count_coincidences(s, 4e-9)
    for (a, b), n in rep.counts.items():
        assert 0 <= n <= min(rep.singles[a], rep.singles[b])


def test_report_round_trip():
    rep = count_coincidences(_stream([(0, 0.0), (1, 1.0), (3, 50.0)]), 4e-9)
    back = CoincidenceReport.from_dict(json.loads(json.dumps(rep.to_dict())))
    assert back == rep


def test_stream_csv_round_trip(tmp_path):
    s = generate_stream(SourceModel.with_background(), chip_unitary(DESIGN, 0.2), (C1, T0), seed=1, duration=6.0)
    s = TimeTagStream(s.channels[:2000], s.timestamps[:2000], s.duration, s.live_time, s.metadata)
    path = tmp_path / "tags.csv"
    sidecar = s.write(path)
    assert path.read_text().splitlines()[0] == "channel,timestamp_ns"
    assert json.loads(sidecar.read_text())["events"] == 2000
    back = TimeTagStream.read(path)
    assert np.array_equal(back.channels, s.channels)
    assert np.array_equal(back.timestamps, s.timestamps)
    assert back.live_time == s.live_time and back.metadata == s.metadata


def test_estimate_rates_chip_hom_path():
    u = chip_unitary(DESIGN, 0.0)
    est = estimate_rates(SourceModel(), u, (C1, V_B), distinguishable=True)
    assert est.coincidence(T0, T1) == pytest.approx(11000 * 0.65**2 * 2 / 9, abs=1e-9)
    assert est.coincidence(T0, T1) == pytest.approx(1032.78, abs=0.01)
    assert estimate_rates(SourceModel(), u, (C1, V_B)).coincidence(T0, T1) < 1e-9


def test_estimate_rates_identity_lossless():
    est = estimate_rates(LOSSLESS, np.eye(6), (C0, T1))
    assert est.coincidence(C0, T1) == pytest.approx(11000)
    assert est.singles[C0] == pytest.approx(11000) and est.singles[T0] == 0


def test_estimate_rates_logical_rate():
    src = SourceModel()
    for phi in (0.0, 1.3):
        est = estimate_rates(src, chip_unitary(DESIGN, phi), ENC.input_modes("01"), encoding=ENC)
        assert est.logical_rate == pytest.approx(11000 * 0.65**2 / 9, rel=1e-10)


def test_coupling_scaling():
    base = estimate_rates(SourceModel(coupling=0.3), np.eye(6), (C0, T1))
    double = estimate_rates(SourceModel(coupling=0.6), np.eye(6), (C0, T1))
    assert double.coincidence(C0, T1) == pytest.approx(4 * base.coincidence(C0, T1))
    assert double.singles[C0] == pytest.approx(2 * base.singles[C0])


def test_simulated_rates_match_estimate():
    src = SourceModel.with_background(duty_cycle=None)
    u = np.eye(6)
    s = generate_stream(src, u, (C0, T1), seed=21, duration=5.0)
    est = estimate_rates(src, u, (C0, T1))
    rep = count_coincidences(s, src.coincidence_window)
    for m in (C0, T1):
        n = est.singles[m] * 5.0
        assert abs(rep.singles[m] - n) < 4 * math.sqrt(n) + 0.005 * n
    n = (est.coincidence(C0, T1) + est.accidentals[(C0, T1)]) * 5.0
    assert abs(rep.coincidences(C0, T1) - n) < 4 * math.sqrt(n) + 0.005 * n * 1.1


def test_analytic_sweep_equals_prob_table():
    phis = [2 * math.pi * k / 16 for k in range(16)]
    for pt in run_phase_sweep_experiment(SourceModel(), DESIGN, phis, 1000, seed=0, analytic=True):
        assert np.allclose(pt.table.values, np.abs(closed_form_gate(pt.phi).T) ** 2, atol=1e-10)
        assert not pt.degenerate


def test_sweep_reproducible_and_order_independent():
    phis = [0.0, 1.0, 2.0]
    a = run_phase_sweep_experiment(SourceModel(), DESIGN, phis, 5000, seed=3)
    b = run_phase_sweep_experiment(SourceModel(), DESIGN, phis[::-1], 5000, seed=3)
    for pa, pb in zip(a, b[::-1]):
        assert pa.phi == pb.phi
        assert np.array_equal(pa.counts, pb.counts)


def test_sweep_degenerate_flag():
    src = SourceModel(coupling=(1, 1, 1, 0, 0, 1))
    pts = run_phase_sweep_experiment(src, DESIGN, [0.0], 1000, seed=0, analytic=True)
    assert pts[0].degenerate
    pts = run_phase_sweep_experiment(src, DESIGN, [0.0], 2000, seed=0)
    assert pts[0].degenerate and np.all(pts[0].counts == 0)


def test_monte_carlo_converges_to_prob_table():
    # ~1e5 post-selected events per input row; every entry within 4 sigma.
    phi = math.pi / 2
    expected = prob_table(chip_unitary(DESIGN, phi), ENC).values
    src = SourceModel(coupling=1.0, multipair_prob=0.0)
    for seed in range(3):
        pt = run_phase_sweep_experiment(src, DESIGN, [phi], 900_000, seed=seed)[0]
        n = pt.counts.sum(axis=1, keepdims=True)
        assert np.all(n > 9e4)
        sigma = np.sqrt(expected * (1 - expected) / n)
        assert np.all(np.abs(pt.table.values - expected) <= 4 * sigma + 1e-4)
