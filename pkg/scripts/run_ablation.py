"""Reproduce the desk-scale ablation tables.

Runs the TCM on/off comparison on the crossing/weave suite, the similarity
comparison on the depth-stratified suite and the ROCM endpoint comparison,
then writes everything to one JSON file.

    python scripts/run_ablation.py --scenes 200 --out ablation.json
"""
import argparse
import json
import logging
import time

from hybridsort.ablation import ablate, make_suite
from hybridsort.config import TrackerConfig
from hybridsort.metrics import format_table

log = logging.getLogger("run_ablation")


def tables(n_scenes: int, seed: int):
    """(name, grid, scenes) for each table."""
    crossing = make_suite("crossing_weave", n_scenes, seed)
    depth = make_suite("depth", n_scenes, seed)
    full = TrackerConfig()
    byte = TrackerConfig(tracker="byte_two_stage").all_off()
    return [
        ("tcm", [("tcm=on", full), ("tcm=off", full.with_toggle("tcm", False))], crossing),
        ("similarity", [(f"similarity={s}", byte.replace(similarity=s)) for s in ("iou", "hmiou", "wmiou")], depth),
        ("rocm", [
            ("rocm=off", full.with_toggle("rocm", False)),
            ("rocm_anchor=newest", full),
            ("rocm_anchor=oldest", full.replace(rocm_anchor="oldest")),
        ], crossing),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenes", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    doc = {"scenes": args.scenes, "seed": args.seed, "tables": {}}
    for name, grid, scenes in tables(args.scenes, args.seed):
        t0 = time.perf_counter()
        rows = ablate(grid, scenes, args.jobs)
        print(f"\n[{name}]")
        print(format_table(rows, label="config"), end="")
        doc["tables"][name] = {label: rep.as_dict() for label, rep in rows}
        log.info("%s done in %.1fs", name, time.perf_counter() - t0)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
