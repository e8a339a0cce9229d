"""Benchmark the jit and numpy kernel builds side by side.

Run: python benchmarks/bench_kernels.py [--minutes 10] [--repeats 5]
"""
import argparse
import time

import numpy as np

from mfed import _accel, kernels
from mfed import classifier as C
from mfed.signal_core import AccelSeries, DetectorConfig, detect_pois, smooth


def make_trace(minutes: float, rate: float = 25.0) -> AccelSeries:
    # slow oscillation so dips survive the 1 s smoothing
    rng = np.random.default_rng(0)
    n = int(minutes * 60 * rate)
    t = np.arange(n) / rate
    xyz = rng.normal(0.0, 0.3, (n, 3))
    xyz[:, 0] += -2.0 + 3.0 * np.sin(2 * np.pi * 0.08 * t)
    xyz[:, 1] += np.sin(2 * np.pi * 0.5 * t)
    return AccelSeries(rate, t, xyz)


def time_call(fn, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench_detector(series, repeats):
    cfg = DetectorConfig()
    smoothed = smooth(series, cfg.smooth_len)
    xs = np.ascontiguousarray(smoothed.xyz[:, 0])
    rows = []
    for name in ("jit", "numpy"):
        scan = kernels.VARIANTS[name]["poi_scan"]
        scan(smoothed.t, xs, smoothed.xyz, cfg.x_th, cfg.v_th, cfg.peak_min_gap, 74, 75)  # warm up
        secs, (idx, _) = time_call(
            lambda s=scan: s(smoothed.t, xs, smoothed.xyz, cfg.x_th, cfg.v_th, cfg.peak_min_gap, 74, 75),
            repeats,
        )
        rows.append((name, secs, len(idx)))
    return rows


def bench_forward(repeats):
    weights = C.init_weights(150, 25.0, np.random.default_rng(1))
    x = np.random.default_rng(2).normal(size=(150, 3))
    rows = []
    for name in ("jit", "numpy"):
        saved = {k: kernels.VARIANTS[name][k] for k in ("conv2d", "maxpool2")}
        conv, pool = saved["conv2d"], saved["maxpool2"]

        def run():
            x3 = np.ascontiguousarray(x.reshape(150, 3, 1))
            a1 = np.maximum(conv(x3, weights.conv1_w, weights.conv1_b), 0.0)
            p1, _ = pool(np.ascontiguousarray(a1))
            a2 = np.maximum(conv(np.ascontiguousarray(p1), weights.conv2_w, weights.conv2_b), 0.0)
            p2, _ = pool(np.ascontiguousarray(a2))
            flat = p2.reshape(-1)
            a3 = np.maximum(flat @ weights.dense1_w + weights.dense1_b, 0.0)
            a4 = np.maximum(a3 @ weights.dense2_w + weights.dense2_b, 0.0)
            return float((a4 @ weights.out_w)[0] + weights.out_b[0])

        run()  # warm up
        secs, _ = time_call(run, repeats)
        rows.append((name, secs))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--minutes", type=float, default=10.0, help="trace length to scan")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if not _accel.USING_NUMBA:
        print("numba is unavailable or disabled (MFED_NUMBA=0); jit rows run as plain python")

    series = make_trace(args.minutes)
    print(f"PoI scan over a {args.minutes:.0f} min trace ({len(series)} samples):")
    rows = bench_detector(series, args.repeats)
    for name, secs, n_pois in rows:
        print(f"  {name:6s} {secs * 1000:9.2f} ms   ({n_pois} PoIs)")
    if rows[1][1] > 0:
        print(f"  speedup {rows[1][1] / max(1e-12, rows[0][1]):.1f}x")

    print("forward pass, 150-row window:")
    rows = bench_forward(args.repeats)
    for name, secs in rows:
        print(f"  {name:6s} {secs * 1000:9.3f} ms")
    print(f"  speedup {rows[1][1] / max(1e-12, rows[0][1]):.1f}x")

    cfg = DetectorConfig()
    smoothed = smooth(series, cfg.smooth_len)
    t0 = time.perf_counter()
    pois = detect_pois(smoothed, cfg)
    print(f"active build ({kernels.ACTIVE}): full detect_pois {1000 * (time.perf_counter() - t0):.2f} ms, {len(pois)} PoIs")


if __name__ == "__main__":
    main()
