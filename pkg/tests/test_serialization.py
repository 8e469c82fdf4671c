# tests/test_serialization.py
from pathlib import Path

import numpy as np
import pytest

from models.settings import AnalyzerSetting, JointSetting, Port
from utils.errors import InputFormatError
from utils.serialization import (
    HISTOGRAM_HEADER,
    dumps,
    read_histogram_csv,
    read_json,
    read_records,
    write_csv,
    write_histogram_csv,
    write_records,
    write_text,
)

from conftest import make_histogram, make_record

SETTING = JointSetting(alice=AnalyzerSetting(qwp_angle=0.2, hwp_angle=0.9, port=Port.V),
                       bob=AnalyzerSetting(qwp_angle=1.3, hwp_angle=0.1, port=Port.H))


class TestHistogramFiles:

    def test_written_histogram_reads_back(self, tmp_path, rng):
        h = make_histogram(rng.poisson(3, size=100), label=SETTING.label)
        path = write_histogram_csv(tmp_path / "h" / "000.csv", h)
        back = read_histogram_csv(path)
        np.testing.assert_array_equal(back.counts, h.counts)
        assert (back.bin_width, back.window_end, back.t_max) == (h.bin_width, h.window_end, h.t_max)
        assert back.label == SETTING.label

    def test_file_layout(self, tmp_path):
        path = write_histogram_csv(tmp_path / "h.csv", make_histogram(np.zeros(100, dtype=int)))
        lines = path.read_text().splitlines()
        assert lines[0] == HISTOGRAM_HEADER
        assert lines[1].startswith("# ")
        assert len(lines) == 102

    def test_bad_count_reports_line(self, tmp_path):
        path = write_histogram_csv(tmp_path / "h.csv", make_histogram(np.ones(100, dtype=int)))
        lines = path.read_text().splitlines()
        lines[3] = "three"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(InputFormatError) as info:
            read_histogram_csv(path)
        assert info.value.line == 4
        assert f"{path}:4:" in str(info.value)

    def test_missing_header_reported(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("1\n2\n")
        with pytest.raises(InputFormatError) as info:
            read_histogram_csv(path)
        assert info.value.line == 1

    def test_wrong_bin_count_reported(self, tmp_path):
        path = write_histogram_csv(tmp_path / "h.csv", make_histogram(np.ones(100, dtype=int)))
        path.write_text("\n".join(path.read_text().splitlines()[:-1]) + "\n")
        with pytest.raises(InputFormatError):
            read_histogram_csv(path)


class TestJson:

    def test_dumps_is_stable(self):
        assert dumps({"b": 1, "a": [1.5]}) == '{\n  "a": [\n    1.5\n  ],\n  "b": 1\n}\n'

    def test_records_file(self, tmp_path):
        records = [make_record(SETTING, 12.0, n_net=10.5, tau_acc=2e9, acquisition=3)]
        back = read_records(write_records(tmp_path / "records.json", records))
        assert back[0].n_net == 10.5
        assert back[0].acquisition == 3
        assert back[0].setting.label == SETTING.label

    def test_malformed_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "a": 1,\n  oops\n}\n')
        with pytest.raises(InputFormatError) as info:
            read_json(path)
        assert info.value.line == 3

    def test_csv_keeps_full_float_precision(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["x", "y"], [{"x": 0.1 + 0.2, "y": "a"}])
        assert path.read_text().splitlines() == ["x,y", "0.30000000000000004,a"]


class TestWriteRetry:

    def test_transient_failure_is_retried(self, tmp_path, mocker):
        real = Path.write_text
        calls = {"n": 0}

        def flaky(self, *args, **kwargs):
            calls["n"] += 1
            if calls["n"] == 1:
                raise OSError("device busy")
            return real(self, *args, **kwargs)

        mocker.patch.object(Path, "write_text", flaky)
        path = write_text(tmp_path / "out.txt", "ok\n")
        assert calls["n"] == 2
        assert path.read_text() == "ok\n"

    def test_persistent_failure_is_raised(self, tmp_path, mocker):
        mock = mocker.patch.object(Path, "write_text", side_effect=OSError("read-only"))
        with pytest.raises(OSError):
            write_text(tmp_path / "out.txt", "ok\n")
        assert mock.call_count == 3
