import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import (build_example1_system, example1_reference_gains,
                      example1_reference_params)
from it2mpc.simulation import DisturbanceModel, run_online_loop
from it2mpc.tracefile import (read_trace, sidecar_path, summarize_trace,
                              trace_columns, write_trace)


@pytest.fixture(scope="module")
def trace():
    return run_online_loop(
        build_example1_system(), example1_reference_params(),
        [np.array([1.0, -1.0])] * 3, 15,
        dist=DisturbanceModel(kind="uniform_ball", seed=7),
        resynth="once", gains=example1_reference_gains())


class TestColumns:
    def test_naming_convention(self, trace):
        cols = trace_columns(trace)
        assert cols[:2] == ["k", "t"]
        assert "x1_1" in cols and "x3_2" in cols
        assert "u2_1" in cols and "d3_1" in cols
        assert cols[-4:] == ["psi", "worst_margin", "feasible",
                             "resynthesized"]
        assert cols.count("V2") == 1 and cols.count("xi3") == 1

    def test_column_count_matches_rows(self, trace, tmp_path):
        write_trace(trace, tmp_path / "t.csv")
        back = read_trace(tmp_path / "t.csv")
        assert back["data"].shape == (trace.n_steps, len(back["columns"]))


class TestRoundTrip:
    def test_floats_come_back_bit_exact(self, trace, tmp_path):
        path = tmp_path / "t.csv"
        write_trace(trace, path)
        back = read_trace(path)
        cols = back["columns"]

        def col(name):
            return back["data"][:, cols.index(name)]

        for i in range(3):
            for c in range(2):
                want = np.array([trace.x[k][i][c] for k in range(15)])
                assert np.array_equal(col(f"x{i + 1}_{c + 1}"), want)
            want_u = np.array([trace.u[k][i][0] for k in range(15)])
            assert np.array_equal(col(f"u{i + 1}_1"), want_u)
            want_v = np.array([trace.V[k][i] for k in range(15)])
            assert np.array_equal(col(f"V{i + 1}"), want_v)
        assert np.array_equal(col("psi"), np.array(trace.psi))
        assert_allclose(col("t"), 0.2 * np.arange(15))
        assert np.array_equal(col("k"), np.arange(15.0))

    def test_flag_columns_are_binary(self, trace, tmp_path):
        path = tmp_path / "t.csv"
        write_trace(trace, path)
        back = read_trace(path)
        for name in ("feasible", "resynthesized"):
            vals = back["data"][:, back["columns"].index(name)]
            assert set(np.unique(vals)) <= {0.0, 1.0}

    def test_zero_step_trace_is_header_only(self, tmp_path):
        tr = run_online_loop(
            build_example1_system(), example1_reference_params(),
            [np.array([1.0, -1.0])] * 3, 0,
            resynth="once", gains=example1_reference_gains())
        path = tmp_path / "empty.csv"
        write_trace(tr, path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 1
        back = read_trace(path)
        assert back["data"].shape[0] == 0
        assert back["summary"]["n_steps"] == 0

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "none.csv"
        path.write_text("")
        with pytest.raises(ValueError, match="empty trace"):
            read_trace(path)


class TestSidecar:
    def test_path_convention(self):
        assert sidecar_path("runs/out.csv").name == "out.summary.json"

    def test_summary_contents(self, trace, tmp_path):
        path = tmp_path / "t.csv"
        side = write_trace(trace, path)
        assert side == sidecar_path(path)
        summary = json.loads(side.read_text())
        assert summary["n_steps"] == 15
        assert summary["n_subsystems"] == 3
        assert summary["solves"] == 0
        assert_allclose(summary["final_state_norm"],
                        [np.linalg.norm(x) for x in trace.x[-1]])
        assert summary["peak_state_norm"][0] >= summary["final_state_norm"][0]
        assert summary["resynth_count"] == 0
        assert summary["total_stage_cost"] == pytest.approx(sum(trace.psi))
        assert summary == summarize_trace(trace)

    def test_meta_is_carried_into_summary(self, trace):
        summary = summarize_trace(trace)
        assert "final_xi" in summary
        assert summary["supplied_gains"] is True

    def test_missing_sidecar_tolerated(self, trace, tmp_path):
        path = tmp_path / "t.csv"
        write_trace(trace, path)
        sidecar_path(path).unlink()
        assert read_trace(path)["summary"] is None
