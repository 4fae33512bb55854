"""Association-loop cost of TCM + HMIoU relative to the all-off tracker.

    python scripts/timing_overhead.py --frames 1000 --objects 20 --repeats 5
"""
import argparse

import numpy as np

from hybridsort.config import TrackerConfig
from hybridsort.simulator import ScenarioSpec, generate
from hybridsort.tracker import make_tracker, run_sequence


def measure(frames: int, objects: int, repeats: int, seed: int = 0) -> dict[str, list[float]]:
    spec = ScenarioSpec(n_objects=objects, motions=("crossing", "weave", "linear"), frame_count=frames,
                        jitter_std=2.0, dropout_prob=0.2, seed=seed)
    _, dets = generate(spec)
    off = TrackerConfig().all_off()
    configs = {
        "all_off": off,
        "tcm+hmiou": off.with_toggle("tcm", True).with_toggle("hmiou", True),
        "full": TrackerConfig(),
    }
    times = {name: [] for name in configs}
    # interleave so slow drifts of the machine hit every config alike
    for _ in range(repeats):
        for name, cfg in configs.items():
            _, seconds = run_sequence(make_tracker(cfg), dets, frames)
            times[name].append(seconds)
    return times


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=1000)
    ap.add_argument("--objects", type=int, default=20)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    times = measure(args.frames, args.objects, args.repeats)
    base = min(times["all_off"])
    print(f"{'config':<12}{'min s':>9}{'median s':>10}{'overhead':>10}")
    for name, ts in times.items():
        print(f"{name:<12}{min(ts):>9.3f}{np.median(ts):>10.3f}{min(ts) / base - 1:>+10.1%}")


if __name__ == "__main__":
    main()
