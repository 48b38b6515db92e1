"""Command-line entry points.

    biasbench record    - simulate a grid-sampled corpus into a directory
    biasbench metrics   - score recordings (er / tracking / rfu), cache, heatmaps
    biasbench validity  - fraction of grid tuples passing a metric predicate
    biasbench train-bc  - build demonstrations and train the threshold policy
    biasbench tune      - one policy step from a start tuple
    biasbench serve     - HTTP service for the interactive console
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .core import BiasSettings, event_rate
from .env import MdpEnv
from .fileio import load_manifest, read_recording, save_manifest
from .grid import (
    BiasGrid,
    build_grid,
    desk_threshold_grid,
    led_board_grid,
    record_grid,
    spinning_dot_grid,
    vo_arm_grid,
)
from .scenes import make_scene
from .sim import SimConfig

GRID_PRESETS = {
    "spinning-dot": spinning_dot_grid,
    "led-board": led_board_grid,
    "vo-arm": vo_arm_grid,
    "desk": desk_threshold_grid,
}

# which direction means "valid" for each cached metric
METRIC_VALID_OP = {"tl": "gt", "tf": "lt", "n_tracklets": "lt", "er": "lt", "rfu_max": "lt", "ape": "lt"}


def _load_grid(spec: str) -> BiasGrid:
    """Preset name, or a JSON file mapping each bias axis to either an
    explicit value list or a {"start", "end", "count"} object."""
    if spec in GRID_PRESETS:
        return GRID_PRESETS[spec]()
    doc = json.loads(Path(spec).read_text())
    axes = doc.get("axes", doc)
    explicit: dict[str, list[int]] = {}
    ranges: dict[str, tuple[int, int, int]] = {}
    for name, v in axes.items():
        if isinstance(v, dict):
            ranges[name] = (int(v["start"]), int(v["end"]), int(v["count"]))
        else:
            explicit[name] = [int(x) for x in v]
    if ranges and explicit:
        built = build_grid({**ranges, **{n: (0, 0, 1) for n in explicit}}).as_dict()
        built.update(explicit)
        return BiasGrid.from_dict(built)
    if ranges:
        return build_grid(ranges)
    return BiasGrid.from_dict(explicit)


def _cmd_record(args) -> int:
    grid = _load_grid(args.grid)
    if args.scene_config:
        from .scenes import load_scene

        scene = load_scene(args.scene_config)
    else:
        scene = make_scene(args.scene, args.width, args.height)
    cfg = SimConfig(
        width=args.width,
        height=args.height,
        duration_us=args.duration_us,
        tick_us=args.tick_us,
        seed=args.seed,
    )
    manifest = record_grid(
        scene, grid, cfg, args.out, scene_id=args.scene, parallel=args.parallel, progress=True
    )
    print(f"recorded {len(manifest.entries)} grid points into {args.out}")
    return 0


def _cmd_metrics(args) -> int:
    mpath = Path(args.manifest)
    manifest = load_manifest(mpath)
    root = mpath.parent
    roi = tuple(int(v) for v in args.roi.split(",")) if args.roi else None
    for entry in manifest.entries:
        rec = read_recording(root / entry.path)
        if args.metric == "er":
            entry.metrics["er"] = event_rate(rec)
        elif args.metric == "tracking":
            from .metrics.tracking import (
                dot_expected_path,
                dot_tracker_config,
                track_spatters,
                tracking_metrics,
            )

            scene = make_scene(manifest.scene_id, rec.width, rec.height)
            tracklets = track_spatters(
                rec,
                args.window_us,
                roi=roi or scene.tracking_roi(),
                config=dot_tracker_config(scene, args.window_us),
            )
            path = dot_expected_path(scene, args.window_us, rec.duration_us // args.window_us)
            m = tracking_metrics(tracklets, path, r_dot=scene.dot_radius)
            entry.metrics.update({"tf": m.tf, "tl": m.tl, "n_tracklets": m.n_tracklets})
        elif args.metric == "rfu":
            from .metrics.frequency import board_rfu_report

            scene = make_scene(manifest.scene_id, rec.width, rec.height)
            fits, valid = board_rfu_report(rec, scene)
            entry.metrics.update(
                {
                    "rfu_max": max(f.rfu for f in fits),
                    "rfu_mean": float(np.mean([f.rfu for f in fits])),
                    "rfu_valid": valid,
                }
            )
        else:
            print(f"unknown metric {args.metric!r}", file=sys.stderr)
            return 2
        print(f"{entry.biases.as_tuple()}: {entry.metrics}")
    if args.cache:
        save_manifest(manifest, mpath)
        print(f"cached metrics into {mpath}")
    if args.heatmap:
        from .metrics.heatmap import metric_heatmap, render_heatmap_png, write_heatmap_csv

        axes = tuple(args.axes.split(","))
        key = {"er": "er", "tracking": "tl", "rfu": "rfu_mean"}[args.metric]
        grid2d, v0, v1 = metric_heatmap(manifest, key, axes)
        write_heatmap_csv(f"{args.heatmap}.csv", grid2d, v0, v1, axes)
        render_heatmap_png(f"{args.heatmap}.png", grid2d, v0, v1, axes, title=key)
        print(f"wrote {args.heatmap}.csv and {args.heatmap}.png")
    return 0


def _cmd_validity(args) -> int:
    from .grid import validity_summary

    manifest = load_manifest(args.manifest)
    op = args.op or METRIC_VALID_OP.get(args.metric, "lt")

    def predicate(metrics: dict) -> bool:
        v = float(metrics[args.metric])
        return v > args.threshold if op == "gt" else v < args.threshold

    frac = validity_summary(manifest, predicate)
    print(f"{frac * 100:.2f}% of settings valid ({args.metric} {op} {args.threshold})")
    return 0


def _cmd_train_bc(args) -> int:
    from .tuner.expert import DESK_OPTIMAL_RANGES, OptimalRange, build_demo_dataset
    from .tuner.features import FeatureConfig
    from .tuner.policy import save_policy, train_bc

    mpath = Path(args.manifest)
    manifest = load_manifest(mpath)
    if args.range:
        optimal = OptimalRange.from_json(json.loads(Path(args.range).read_text()))
    elif manifest.scene_id in DESK_OPTIMAL_RANGES:
        optimal = DESK_OPTIMAL_RANGES[manifest.scene_id]
    else:
        print("no --range file and no default range for this scene", file=sys.stderr)
        return 2
    feature_cfg = FeatureConfig(window_us=args.window_us)
    demos = build_demo_dataset(
        manifest, mpath.parent, optimal, args.n, seed=args.seed,
        feature_cfg=feature_cfg, max_step=args.max_step,
    )
    policy, history = train_bc(
        demos, epochs=args.epochs, seed=args.seed, batch_size=args.batch, lr_decay=args.lr_decay
    )
    save_policy(policy, args.out)
    print(
        f"trained on {len(demos)} demonstrations; "
        f"final train loss {history[-1]['train']:.4f}, val loss {history[-1]['val']:.4f}; "
        f"model written to {args.out}"
    )
    return 0


def _cmd_tune(args) -> int:
    from .tuner.features import FeatureConfig, extract_features
    from .tuner.policy import load_policy, policy_act

    mpath = Path(args.manifest)
    manifest = load_manifest(mpath)
    policy = load_policy(args.model)
    off, on = (int(v) for v in args.start.split(","))
    env = MdpEnv(manifest, mpath.parent, seed=args.seed, window_us=args.window_us)
    obs = env.reset(BiasSettings(diff_on=on, diff_off=off))
    print(f"start biases (snapped): {env.current.as_dict()}")
    action = policy_act(policy, extract_features(obs, FeatureConfig(window_us=args.window_us)))
    _, landed = env.step(action)
    print(f"proposed change: d_off={action.d_off}, d_on={action.d_on}")
    print(f"new biases (snapped): {landed.as_dict()}")
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    serve(args.manifest_dir, port=args.port, host=args.host, demo_log=args.demo_log)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="biasbench", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("record", help="simulate a grid-sampled corpus")
    r.add_argument("--scene", required=True)
    r.add_argument("--scene-config", help="JSON scene description overriding the preset")
    r.add_argument("--grid", required=True, help="preset name or JSON file")
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--parallel", type=int, default=1)
    r.add_argument("--width", type=int, default=128)
    r.add_argument("--height", type=int, default=128)
    r.add_argument("--duration-us", type=int, default=1_000_000)
    r.add_argument("--tick-us", type=int, default=100)
    r.set_defaults(fn=_cmd_record)

    m = sub.add_parser("metrics", help="score recordings in a manifest")
    m.add_argument("--manifest", required=True)
    m.add_argument("--metric", required=True, choices=["er", "tracking", "rfu"])
    m.add_argument("--roi", help="x0,y0,x1,y1 tracking region override")
    m.add_argument("--window-us", type=int, default=1000)
    m.add_argument("--cache", action="store_true", help="write metrics back into the manifest")
    m.add_argument("--heatmap", help="output prefix for CSV + PNG heat maps")
    m.add_argument("--axes", default="diff_off,diff_on")
    m.set_defaults(fn=_cmd_metrics)

    v = sub.add_parser("validity", help="fraction of tuples passing a predicate")
    v.add_argument("--manifest", required=True)
    v.add_argument("--metric", required=True)
    v.add_argument("--threshold", type=float, required=True)
    v.add_argument("--op", choices=["gt", "lt"])
    v.set_defaults(fn=_cmd_validity)

    t = sub.add_parser("train-bc", help="train the behavior-cloned policy")
    t.add_argument("--manifest", required=True)
    t.add_argument("--range", help="JSON file with optimal threshold ranges")
    t.add_argument("--n", type=int, default=10000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--epochs", type=int, default=200)
    t.add_argument("--batch", type=int, default=256)
    t.add_argument("--window-us", type=int, default=8000)
    t.add_argument("--max-step", type=int, default=125, help="expert per-axis step clamp")
    t.add_argument("--lr-decay", type=float, default=1.0)
    t.add_argument("--out", required=True)
    t.set_defaults(fn=_cmd_train_bc)

    u = sub.add_parser("tune", help="one policy adjustment from a start tuple")
    u.add_argument("--model", required=True)
    u.add_argument("--manifest", required=True)
    u.add_argument("--start", required=True, help="diff_off,diff_on")
    u.add_argument("--seed", type=int, default=0)
    u.add_argument("--window-us", type=int, default=8000)
    u.set_defaults(fn=_cmd_tune)

    s = sub.add_parser("serve", help="run the HTTP service")
    s.add_argument("--manifest-dir", required=True)
    s.add_argument("--port", type=int, default=8080)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--demo-log")
    s.set_defaults(fn=_cmd_serve)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
