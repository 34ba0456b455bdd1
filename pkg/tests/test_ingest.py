"""Drop-file parsing, cleaning and batch normalization."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from encoviz.ingest import (
    IngestWarning,
    LineError,
    WarningKind,
    normalize_batch,
    parse_measurement_line,
    read_device_file,
)
from encoviz.model import DeviceId, DomainError, Measurement

D1 = DeviceId("d1")


class TestParseLine:
    def test_direct_field_mapping(self):
        m = parse_measurement_line("1672531200000,1500.0", D1)
        assert (m.device, m.timestamp_ms, m.power_w) == ("d1", 1672531200000, 1500.0)

    def test_zero_power_is_valid(self):
        assert parse_measurement_line("1672531200000,0", D1).power_w == 0.0

    def test_negative_value_has_its_own_kind(self):
        with pytest.raises(LineError) as err:
            parse_measurement_line("1672531200000,-5", D1)
        assert err.value.kind is WarningKind.NEGATIVE_VALUE

    def test_tolerates_surrounding_whitespace(self):
        m = parse_measurement_line("  1672531200000 ,  12.5 \r\n", D1)
        assert m.power_w == 12.5

    @pytest.mark.parametrize(
        "line", ["", "12345", "a,b", "1,2,3", "notanumber,5", "1000,watts", "1000,nan", "1000,inf"]
    )
    def test_malformed_lines(self, line):
        with pytest.raises(LineError) as err:
            parse_measurement_line(line, D1)
        assert err.value.kind is WarningKind.MALFORMED_LINE

    def test_fractional_watts_accepted(self):
        assert parse_measurement_line("1000,0.1", D1).power_w == 0.1


class TestReadDeviceFile:
    def test_device_id_from_filename_stem(self, tmp_path):
        path = tmp_path / "AABB01.csv"
        path.write_text("1672531200000,100\n1672531201000,200\n1672531202000,300\n")
        device, measurements, warnings = read_device_file(path)
        assert device == "AABB01"
        assert len(measurements) == 3
        assert warnings == []

    def test_header_line_skipped(self, tmp_path):
        path = tmp_path / "d1.csv"
        path.write_text("timestamp,value\n1672531200000,100\n")
        _device, measurements, warnings = read_device_file(path)
        assert len(measurements) == 1
        assert warnings == []

    def test_bad_filename_stem_rejected(self, tmp_path):
        path = tmp_path / "bad id!.csv"
        path.write_text("1,1\n")
        with pytest.raises(DomainError):
            read_device_file(path)

    def test_malformed_lines_warn_but_never_abort(self, tmp_path):
        path = tmp_path / "d1.csv"
        path.write_text("1672531200000,100\ngarbage line\n1672531202000,-3\n1672531203000,50\n")
        _device, measurements, warnings = read_device_file(path)
        assert [m.power_w for m in measurements] == [100.0, 50.0]
        assert [w.kind for w in warnings] == [
            WarningKind.MALFORMED_LINE,
            WarningKind.NEGATIVE_VALUE,
        ]
        assert [w.line_no for w in warnings] == [2, 3]

    def test_crlf_accepted(self, tmp_path):
        path = tmp_path / "d1.csv"
        path.write_bytes(b"1672531200000,100\r\n1672531201000,200\r\n")
        _device, measurements, _warnings = read_device_file(path)
        assert len(measurements) == 2

    def test_deterministic_over_same_bytes(self, tmp_path):
        payload = "1672531200000,100\nbroken\n1672531201000,200\n"
        a, b = tmp_path / "d1.csv", tmp_path / "d1_copy.csv"
        a.write_text(payload)
        out1 = read_device_file(a)
        out2 = read_device_file(a)
        assert out1 == out2
        b.write_text(payload)
        _dev, measurements, warnings = read_device_file(b)
        assert [m.power_w for m in measurements] == [m.power_w for m in out1[1]]
        assert [w.kind for w in warnings] == [w.kind for w in out1[2]]

    def test_unreadable_file_raises(self, tmp_path):
        with pytest.raises(OSError):
            read_device_file(tmp_path / "d1.csv")


class TestNormalizeBatch:
    def test_out_of_order_sorted_with_warning(self):
        batch = [Measurement(D1, 2000, 10.0), Measurement(D1, 1000, 5.0)]
        ordered, warnings = normalize_batch(batch)
        assert [m.timestamp_ms for m in ordered] == [1000, 2000]
        assert [w.kind for w in warnings] == [WarningKind.OUT_OF_ORDER]

    def test_duplicate_keeps_last_occurrence(self):
        batch = [Measurement(D1, 1000, 5.0), Measurement(D1, 1000, 7.0)]
        ordered, warnings = normalize_batch(batch)
        assert [(m.timestamp_ms, m.power_w) for m in ordered] == [(1000, 7.0)]
        assert [w.kind for w in warnings] == [WarningKind.DUPLICATE_TIMESTAMP]

    def test_clean_input_unchanged(self):
        batch = [Measurement(D1, 1000, 5.0), Measurement(D1, 2000, 10.0)]
        ordered, warnings = normalize_batch(batch)
        assert ordered == batch
        assert warnings == []

    def test_empty_batch(self):
        assert normalize_batch([]) == ([], [])

    def test_mixed_devices_rejected(self):
        batch = [Measurement(D1, 1000, 5.0), Measurement(DeviceId("d2"), 2000, 1.0)]
        with pytest.raises(DomainError):
            normalize_batch(batch)

    def test_idempotent(self):
        batch = [
            Measurement(D1, 3000, 1.0),
            Measurement(D1, 1000, 2.0),
            Measurement(D1, 1000, 3.0),
            Measurement(D1, 2000, 4.0),
        ]
        once, warnings_once = normalize_batch(batch)
        twice, warnings_twice = normalize_batch(once)
        assert warnings_once
        assert twice == once
        assert warnings_twice == []

    @given(
        st.lists(
            st.tuples(
                st.integers(min_value=0, max_value=10**12),
                st.floats(min_value=0, max_value=1e6, allow_nan=False),
            ),
            unique_by=lambda t: t[0],
            max_size=60,
        ),
        st.randoms(use_true_random=False),
    )
    def test_permutation_invariance_and_strict_order(self, pairs, rng):
        measurements = [Measurement(D1, ts, w) for ts, w in pairs]
        shuffled = measurements[:]
        rng.shuffle(shuffled)
        base, _ = normalize_batch(measurements)
        permuted, _ = normalize_batch(shuffled)
        assert permuted == base
        assert all(a.timestamp_ms < b.timestamp_ms for a, b in zip(base, base[1:]))
