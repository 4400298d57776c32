#!/usr/bin/env python3
"""Smoke test for the dagsched_py extension module.

Build and run:

    cargo build --release -p dagsched-py
    cp target/release/libdagsched_py.so dagsched_py.so   # .dylib on macOS
    python3 python/smoke_test.py
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

import dagsched_py as ds


def main() -> None:
    g1 = ds.Platform.builtin("G1")
    assert g1.pe_count == 16
    assert g1.cluster_names == ["LITTLE", "big", "MatMul", "FFT", "Decoder"]
    assert g1.comm_latency(3, 3, 100.0) == 0.0
    assert ds.Platform.from_text(g1.emit()).pe_count == 16
    print(f"platform ok: {g1!r}")

    suite = ds.App.suite()
    assert suite[:6] == ["WiFi-TX", "WiFi-RX", "RangeDet", "SC-TX", "SC-RX", "TempMit"]
    range_det = ds.App.builtin("RangeDet")
    assert range_det.task_count == 7
    assert range_det.validate() == []
    assert ds.App.builtin("PulseDoppler").task_count == 449
    print(f"apps ok: {range_det!r}")

    workload = ds.Workload.mix500(2.0, seed=42)
    assert workload.total_frames() == 500
    trace = workload.trace()
    assert len(trace) == 500
    sat = ds.saturation(g1, workload)
    assert sat > 0
    print(f"workload ok: saturation {sat:.1f} frames/ms")

    small = ds.Workload(
        [("RangeDet", 30), ("TempMit", 30), ("SC-RX", 30), ("WiFi-TX", 10)],
        injection_rate=0.15 * sat,
        seed=7,
    )
    oracle_report = ds.simulate(g1, small, "oracle:performance", seed=1)
    assert oracle_report.frames == 100
    assert oracle_report.decisions == 30 * 7 + 30 * 10 + 30 * 8 + 10 * 27
    again = ds.simulate(g1, small, "oracle:performance", seed=1)
    assert again.avg_latency_us == oracle_report.avg_latency_us, "determinism"
    print(f"oracle ok: {oracle_report!r}")

    rates = [0.10 * sat, 0.16 * sat, 0.23 * sat]
    dataset = ds.generate_dataset(g1, small, rates, seed=3)
    assert len(dataset) == 3 * (30 * 7 + 30 * 10 + 30 * 8 + 10 * 27)
    assert ds.Dataset.parse(dataset.emit()).holdout_accuracy() == dataset.holdout_accuracy()
    print(f"dataset ok: {len(dataset)} rows")

    policy = ds.train(dataset)
    assert policy.objective == "performance"
    assert ds.Policy.parse(policy.emit()).emit() == policy.emit()
    policy_report = ds.simulate(g1, small, policy, seed=1)
    per_frame, aggregate = ds.job_slowdown(policy_report, oracle_report)
    assert per_frame < 1.25, f"policy far from oracle: {per_frame}"
    print(f"policy ok: slowdown per-frame {per_frame:.4f}, aggregate {aggregate:.4f}")

    refined, stats = ds.dagger(policy, g1, small, rates, dataset, max_iters=3)
    assert 1 <= len(stats) <= 3
    refined_report = ds.simulate(g1, small, refined, seed=1)
    per_frame, _ = ds.job_slowdown(refined_report, oracle_report)
    print(f"dagger ok: {len(stats)} iteration(s), final slowdown {per_frame:.4f}")

    makespan, optimal = ds.exact_makespan(range_det, g1, time_limit_s=10.0)
    solo = ds.Workload([("RangeDet", 1)], injection_rate=1.0, arrival="periodic", seed=0)
    etf_single = ds.simulate(g1, solo, "oracle:performance").rows()[0]["latency_us"]
    assert makespan <= etf_single + 1e-9
    print(f"exact ok: makespan {makespan:.1f} µs (optimal={optimal}) <= ETF {etf_single:.1f} µs")

    print("smoke test passed")


if __name__ == "__main__":
    main()
