import json

import numpy as np
import pytest

import vvdlab


def test_spread_modulate_roundtrip():
    rng = np.random.default_rng(7)
    psdu = rng.integers(0, 256, vvdlab.PSDU_BYTES, dtype=np.uint8)
    chips = vvdlab.spread(psdu)
    assert chips.shape == (vvdlab.PSDU_CHIPS,)
    back = vvdlab.demodulate(vvdlab.modulate(chips))
    np.testing.assert_array_equal(back, chips)


def test_despread_corrects_two_chip_errors():
    psdu = np.full(vvdlab.PSDU_BYTES, 0x3C, dtype=np.uint8)
    seq = vvdlab.spread(psdu)[:32].copy()
    seq[[3, 17]] ^= 1
    symbol, margin = vvdlab.despread(seq)
    assert symbol == 0xC
    assert margin > 0


def test_ls_estimate_matches_numpy_lstsq():
    rng = np.random.default_rng(1)
    x = rng.normal(size=64) + 1j * rng.normal(size=64)
    h = rng.normal(size=11) + 1j * rng.normal(size=11)
    y = np.convolve(x, h) + 1e-3 * (rng.normal(size=74) + 1j * rng.normal(size=74))
    X = np.column_stack([np.concatenate([np.zeros(j), x, np.zeros(10 - j)]) for j in range(11)])
    expected = np.linalg.lstsq(X, y, rcond=None)[0]
    np.testing.assert_allclose(vvdlab.ls_estimate(x, y, 11), expected, atol=1e-10)


def test_ls_estimate_rejects_rank_deficient_pilot():
    with pytest.raises(vvdlab.SingularityError):
        vvdlab.ls_estimate(np.zeros(32, complex), np.zeros(42, complex), 11)


def test_zf_residual_shrinks_with_length():
    short = vvdlab.design_zf(np.array([1.0, 0.5]), 5)[2]
    long = vvdlab.design_zf(np.array([1.0, 0.5]), 41)[2]
    assert long < 1e-5 < short


def test_phase_correct_undoes_rotation():
    h = np.array([0.2, 1.0 + 0.3j, -0.1j])
    theta, rotated = vvdlab.phase_correct(h * np.exp(0.8j), h)
    assert theta == pytest.approx(0.8, abs=1e-12)  # the detected rotation
    np.testing.assert_allclose(rotated, h, atol=1e-12)


def test_generate_trace_is_seeded():
    a = vvdlab.generate_trace(seed=3, set_id=2, n_packets=3)
    b = vvdlab.generate_trace(seed=3, set_id=2, n_packets=3)
    c = vvdlab.generate_trace(seed=4, set_id=2, n_packets=3)
    assert len(a["records"]) == 3
    np.testing.assert_array_equal(a["records"][2]["rx_waveform"], b["records"][2]["rx_waveform"])
    assert not np.array_equal(a["records"][2]["rx_waveform"], c["records"][2]["rx_waveform"])


def test_set_combinations_cover_every_set_once():
    combos = vvdlab.set_combinations()
    assert combos[0]["validation"] == 6 and combos[0]["test"] == 8
    assert sorted(c["test"] for c in combos) == list(range(1, 16))


def test_compare_small_run():
    csv, summary = vvdlab.compare(seed=2, n_sets=3, n_packets=6, techniques=["ground_truth", "genie"])
    assert csv.startswith("combination,technique,metric,value\n")
    means = json.loads(summary)["mean_over_combinations"]
    assert means["ground_truth"]["mse"] == 0.0
    assert means["genie"]["mse"] > 0.0


def test_compare_rejects_unknown_technique():
    with pytest.raises(ValueError, match="unknown technique"):
        vvdlab.compare(n_sets=3, n_packets=4, techniques=["psychic"])


def test_aging_csv_has_requested_ages():
    text = vvdlab.aging(seed=5, n_sets=3, n_packets=30, score_decoding=False, ages_ms=[100, 500])
    rows = [line.split(",") for line in text.strip().splitlines()[1:]]
    assert {r[2] for r in rows} == {"100", "500"}


def test_estimate_file_roundtrip(tmp_path):
    path = tmp_path / "set01_vvd_test.vvdest"
    cir = np.linspace(0, 1, 11) * (1 - 0.5j)
    vvdlab.write_estimates(path, [
        {"seq_no": 0, "technique": "vvd_test", "cir": cir},
        {"seq_no": 1, "technique": "vvd_test", "cir": None},
    ])
    recs = vvdlab.read_estimates(path)
    np.testing.assert_array_equal(recs[0]["cir"], cir)
    assert recs[1]["cir"] is None


def test_corrupt_trace_raises_parse_error(tmp_path):
    path = tmp_path / "bad.vvdtrace"
    path.write_bytes(b"not a trace at all")
    with pytest.raises(vvdlab.ParseError):
        vvdlab.read_trace(path)
