import numpy as np
import pytest

import synth
from mfed.errors import ConfigError, NonMonotonicTimestamp, ParseError
from mfed.traceio import load_annotations, load_trace


class TestLoadTrace:
    def test_well_formed_rows(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("t_ms,ax,ay,az\n0,0.1,0.2,9.8\n40,0.2,0.3,9.7\n80,0.1,0.2,9.8\n120,0.0,0.1,9.9\n")
        series = load_trace(str(path), 25.0)
        assert len(series) == 4
        assert series.t[1] == pytest.approx(0.04)

    def test_decreasing_timestamp_carries_line(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("t_ms,ax,ay,az\n0,0,0,0\n40,0,0,0\n30,0,0,0\n")
        with pytest.raises(NonMonotonicTimestamp) as err:
            load_trace(str(path), 25.0)
        assert err.value.line == 4

    def test_bad_header(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("time,ax,ay,az\n0,0,0,0\n")
        with pytest.raises(ParseError) as err:
            load_trace(str(path), 25.0)
        assert err.value.line == 1

    def test_malformed_row(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("t_ms,ax,ay,az\n0,0,0,0\nforty,0,0,0\n")
        with pytest.raises(ParseError) as err:
            load_trace(str(path), 25.0)
        assert err.value.line == 3

    def test_wrong_field_count(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("t_ms,ax,ay,az\n0,0,0\n")
        with pytest.raises(ParseError):
            load_trace(str(path), 25.0)

    def test_rate_mismatch(self, tmp_path):
        path = tmp_path / "t.csv"
        rows = "\n".join(f"{i * 100},0,0,0" for i in range(50))  # 10 Hz data
        path.write_text("t_ms,ax,ay,az\n" + rows + "\n")
        with pytest.raises(ConfigError):
            load_trace(str(path), 25.0)
        assert len(load_trace(str(path), 10.0)) == 50

    def test_round_trip_with_synth_writer(self, tmp_path):
        rng = np.random.default_rng(0)
        series = synth.gesture_trace(rng, [10.0], duration=20.0)
        path = tmp_path / "t.csv"
        synth.write_trace_csv(str(path), series)
        loaded = load_trace(str(path), 25.0)
        assert len(loaded) == len(series)
        assert np.allclose(loaded.xyz, series.xyz, atol=1e-6)


class TestLoadAnnotations:
    def test_empty_file_is_valid(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("t_ms\n")
        assert load_annotations(str(path)) == []

    def test_reads_instants(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("t_ms\n1000\n2500\n")
        assert load_annotations(str(path)) == [1.0, 2.5]

    def test_unsorted_rejected_with_line(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("t_ms\n2000\n1000\n")
        with pytest.raises(NonMonotonicTimestamp) as err:
            load_annotations(str(path))
        assert err.value.line == 3
