import json

import numpy as np
import pytest

from conftest import make_bundle
from trajtopo import errors
from trajtopo.bundle import load_bundle, validate_bundle, write_bundle


def test_round_trip_weights_only(tmp_path):
    b = make_bundle(t_pts=5000, dim=128, with_losses=False, with_losses01=False,
                    seed=3)
    write_bundle(b, tmp_path / "run")
    loaded = load_bundle(tmp_path / "run")
    assert np.array_equal(loaded.weights.matrix, b.weights.matrix)
    assert loaded.losses is None and loaded.losses01 is None
    assert np.array_equal(loaded.iteration_index, b.iteration_index)
    assert loaded.run_meta == b.run_meta
    assert loaded.risk_history == b.risk_history


def test_round_trip_losses01_only(tmp_path):
    b = make_bundle(with_weights=False, with_losses=False, seed=5)
    write_bundle(b, tmp_path / "run")
    loaded = load_bundle(tmp_path / "run")
    assert loaded.losses01.matrix.dtype == np.uint8
    assert np.array_equal(loaded.losses01.matrix, b.losses01.matrix)
    assert np.array_equal(loaded.losses01.sample_ids, b.losses01.sample_ids)


def test_round_trip_preserves_learning_rate_exactly(tmp_path):
    b = make_bundle(lr=1e-5)
    write_bundle(b, tmp_path / "run")
    assert load_bundle(tmp_path / "run").run_meta.learning_rate == 1e-5
    # and an awkward float with no short decimal form
    b = make_bundle(lr=0.1 + 0.2)
    write_bundle(b, tmp_path / "run2")
    assert load_bundle(tmp_path / "run2").run_meta.learning_rate == 0.1 + 0.2


def test_risk_history_recording_schedule(tmp_path):
    # tau=0, T=4999, eval every 100 iterations: the schedule oracle below
    # yields 50 records at 0, 100, ..., 4900
    tau, big_t, period = 0, 4999, 100
    expected_iters = [it for it in range(tau, big_t + 1) if (it - tau) % period == 0]
    assert len(expected_iters) == 50
    assert expected_iters[0] == 0 and expected_iters[-1] == 4900

    b = make_bundle(t_pts=5000, dim=2, with_losses=False, with_losses01=False,
                    tau=tau, risk_period=period)
    assert [r[0] for r in b.risk_history] == expected_iters
    write_bundle(b, tmp_path / "run")
    assert [r[0] for r in load_bundle(tmp_path / "run").risk_history] == expected_iters


def test_losses_extra_row_is_shape_mismatch(tmp_path):
    b = make_bundle(t_pts=6, m=4, with_weights=False, with_losses01=False)
    write_bundle(b, tmp_path / "run")
    with open(tmp_path / "run" / "losses.f64", "ab") as fh:
        fh.write(np.zeros(4).tobytes())  # one extra row
    with pytest.raises(errors.ShapeMismatch):
        load_bundle(tmp_path / "run")


def test_missing_bundle_and_missing_file(tmp_path):
    with pytest.raises(errors.MissingFile):
        load_bundle(tmp_path / "nope")
    b = make_bundle()
    write_bundle(b, tmp_path / "run")
    (tmp_path / "run" / "weights.f64").unlink()
    with pytest.raises(errors.MissingFile):
        load_bundle(tmp_path / "run")


def test_metadata_parse_error(tmp_path):
    b = make_bundle()
    write_bundle(b, tmp_path / "run")
    (tmp_path / "run" / "meta.json").write_text("{ not json")
    with pytest.raises(errors.MetadataParse):
        load_bundle(tmp_path / "run")


def test_non_finite_weights_rejected(tmp_path):
    b = make_bundle(with_losses=False, with_losses01=False)
    b.weights.matrix[3, 1] = np.nan
    write_bundle(b, tmp_path / "run")
    with pytest.raises(errors.NonFiniteEntry):
        load_bundle(tmp_path / "run")


def test_checksum_mismatch(tmp_path):
    b = make_bundle(with_losses=False, with_losses01=False)
    write_bundle(b, tmp_path / "run")
    raw = bytearray((tmp_path / "run" / "weights.f64").read_bytes())
    raw[0] ^= 0xFF
    (tmp_path / "run" / "weights.f64").write_bytes(bytes(raw))
    with pytest.raises(errors.ChecksumMismatch):
        load_bundle(tmp_path / "run")


def test_binary_values_outside_01_rejected(tmp_path):
    b = make_bundle(with_weights=False, with_losses=False)
    write_bundle(b, tmp_path / "run")
    path = tmp_path / "run" / "losses01.u8"
    raw = bytearray(path.read_bytes())
    raw[0] = 2
    path.write_bytes(bytes(raw))
    meta = json.loads((tmp_path / "run" / "meta.json").read_text())
    del meta["checksums"]["losses01.u8"]  # isolate the value check
    (tmp_path / "run" / "meta.json").write_text(json.dumps(meta))
    with pytest.raises(errors.ValueOutOfRange):
        load_bundle(tmp_path / "run")


def test_validate_clean_bundle_is_empty(tmp_path):
    report = validate_bundle(make_bundle())
    assert report.ok and report.violations == []


def test_validate_flags_loss_above_bound():
    b = make_bundle(loss_bound=1.0)
    b.losses.matrix[0, 0] = 1.5
    report = validate_bundle(b)
    assert not report.ok
    assert any("loss_bound" in v for v in report.violations)


def test_validate_flags_decreasing_risk_iterations():
    b = make_bundle()
    b.risk_history = [(10, 0.1, 0.2), (5, 0.1, 0.2)]
    report = validate_bundle(b)
    assert any("not strictly increasing" in v for v in report.violations)


def test_validate_flags_inconsistent_point_counts():
    b = make_bundle(t_pts=8)
    b.losses.matrix = b.losses.matrix[:5]
    report = validate_bundle(b)
    assert any("rows" in v for v in report.violations)


def test_validate_flags_empty_bundle():
    b = make_bundle(with_weights=False, with_losses=False, with_losses01=False)
    report = validate_bundle(b)
    assert any("no trajectory" in v for v in report.violations)


def test_validate_flags_out_of_window_iterations():
    b = make_bundle(tau=10, t_pts=5)
    b.iteration_index = b.iteration_index + 100  # past T
    report = validate_bundle(b)
    assert any("window" in v for v in report.violations)
