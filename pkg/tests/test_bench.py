import numpy as np
import pytest

from snnball.bench import (
    BENCH_CSV_HEADER,
    bench,
    format_table,
    read_runs_csv,
    report_csv,
    summarize,
    trajectory_eval,
    write_runs_csv,
)
from snnball.events import DatasetBundle, DatasetMeta, Roi
from snnball.network import build_profile, init_weights
from snnball.synth import BallSim, NoiseModel, generate


def spiky_weights(spec, seed=3):
    w = init_weights(spec, seed=seed)
    w.layers[0].weight *= 10
    return w


class TestBench:
    def test_single_run_has_zero_std(self, tiny_bundles):
        _train, _val, test = tiny_bundles
        spec = build_profile("sinabs_like")
        report, records = bench(spec, spiky_weights(spec), test, runs=1)
        assert report.runs == 1
        assert report.err_std == 0.0
        assert report.fwd_ms_std == 0.0
        assert len(records) == 1

    def test_error_identical_across_runs_and_inference_nested(self, tiny_bundles):
        _train, _val, test = tiny_bundles
        spec = build_profile("sinabs_like")
        report, records = bench(spec, spiky_weights(spec), test, runs=4)
        errs = {r.err_mean for r in records}
        assert len(errs) == 1  # timing jitter must not touch accuracy
        for r in records:
            assert r.inf_ms <= r.fwd_ms
        assert report.inf_ms_mean <= report.fwd_ms_mean

    def test_summary_matches_recomputation_from_runs_csv(self, tiny_bundles, tmp_path):
        _train, _val, test = tiny_bundles
        spec = build_profile("sinabs_like")
        report, records = bench(spec, spiky_weights(spec), test, runs=5)
        path = tmp_path / "runs.csv"
        write_runs_csv(records, path)
        loaded = read_runs_csv(path)
        err = np.array([r.err_mean for r in loaded])
        fwd = np.array([r.fwd_ms for r in loaded])
        inf = np.array([r.inf_ms for r in loaded])
        assert abs(err.mean() - report.err_mean) <= 1e-9
        assert abs(err.std() - report.err_std) <= 1e-9
        assert abs(fwd.mean() - report.fwd_ms_mean) <= 1e-9
        assert abs(fwd.std() - report.fwd_ms_std) <= 1e-9
        assert abs(inf.mean() - report.inf_ms_mean) <= 1e-9
        assert abs(inf.std() - report.inf_ms_std) <= 1e-9

    def test_report_csv_layout(self, tiny_bundles):
        _train, _val, test = tiny_bundles
        spec = build_profile("sinabs_like")
        report, _ = bench(spec, spiky_weights(spec), test, runs=1)
        line = report_csv(report)
        assert BENCH_CSV_HEADER == (
            "profile,T,err_mean,err_std,fwd_ms_mean,fwd_ms_std,"
            "inf_ms_mean,inf_ms_std,synops,runs"
        )
        parts = line.split(",")
        assert parts[0] == "sinabs_like"
        assert parts[1] == "8"
        assert len(parts) == 10
        assert "sinabs_like" in format_table(report)

    def test_empty_dataset_rejected(self, geometry):
        bundle = DatasetBundle(
            events=np.empty((0, 4), dtype=np.int64),
            labels=[],
            meta=DatasetMeta(geometry=geometry),
        )
        spec = build_profile("sinabs_like")
        with pytest.raises(ValueError, match="empty"):
            bench(spec, init_weights(spec), bundle, runs=1)

    def test_runs_must_be_positive(self, tiny_bundles):
        spec = build_profile("sinabs_like")
        with pytest.raises(ValueError, match="runs"):
            bench(spec, init_weights(spec), tiny_bundles[2], runs=0)


class TestTrajectoryEval:
    def _events(self, geometry):
        sim = BallSim(start=(200.0, 200.0), velocity=(300.0, 100.0), accel=(0.0, 0.0),
                      radius=6.0, geometry=geometry)
        return generate(sim, NoiseModel(1.0, 0.0), windows=20, seed=5)

    def test_detections_and_determinism(self, geometry):
        events, labels = self._events(geometry)
        spec = build_profile("sinabs_like")
        w = spiky_weights(spec)
        start = Roi.from_center((labels[0][1], labels[0][2]), geometry)
        a = trajectory_eval(spec, w, events, labels, start, geometry)
        b = trajectory_eval(spec, w, events, labels, start, geometry)
        assert len(a.detections) == 20
        assert [d.global_xy for d in a.detections] == [d.global_xy for d in b.detections]
        assert a.stats == b.stats

    def test_silent_network_raises_track_lost_and_resets(self, geometry):
        events, labels = self._events(geometry)
        spec = build_profile("sinabs_like")
        w = init_weights(spec, seed=0)
        for lw in w.layers:
            if lw.weight is not None:
                lw.weight[:] = 0.0  # never spikes: every decode has zero confidence
        start = Roi.from_center((labels[0][1], labels[0][2]), geometry)
        result = trajectory_eval(spec, w, events, labels, start, geometry, lost_after=3)
        assert result.lost
        assert result.lost_at == 3  # the 4th consecutive zero-confidence window

    def test_needs_two_windows(self, geometry):
        events, labels = self._events(geometry)
        spec = build_profile("sinabs_like")
        with pytest.raises(ValueError, match="two windows"):
            trajectory_eval(spec, init_weights(spec), events, labels[:1],
                            Roi.from_center((200, 200), geometry), geometry, n_windows=1)


def test_summarize_population_std():
    from snnball.bench import RunRecord

    spec = build_profile("sinabs_like")
    records = [
        RunRecord(run=0, err_mean=1.0, fwd_ms=2.0, inf_ms=1.0, synops=10.0),
        RunRecord(run=1, err_mean=3.0, fwd_ms=4.0, inf_ms=2.0, synops=30.0),
    ]
    report = summarize(spec, records)
    assert report.err_mean == 2.0
    assert report.err_std == 1.0  # population convention
    assert report.synops_mean == 20.0
