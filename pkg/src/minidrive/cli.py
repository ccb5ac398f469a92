"""Command-line entry points.

Subcommands: simulate, plan, extract, score-prediction, make-fixtures,
eval-decisions.  A config file of ``key = value`` lines supplies defaults;
explicit flags win.  Every run directory gets a manifest.json written
before any work starts, and reruns with identical manifests produce
byte-identical reports.

Error lines are machine-parsable: ``E_<CODE>: message`` on stderr.
Exit codes: 0 success, 1 usage/config error, 2 per-scene failures
(report still written).
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__, losses, metrics, planner, scenario as scn_mod
from .errors import MinidriveError
from .policy import ExternalPolicy, ReplayPolicy, constant_velocity_policy
from .raster import (
    RasterSpec,
    from_binary,
    rasterize_static,
    render_frame,
    to_binary,
    to_png,
)
from .simulate import SimConfig, run_closed_loop
from .trajectory import PiecewiseQuintic
from .vehicle import VehicleParams

POLICIES = ("replay", "cv", "external")


def _fail(code: str, message: str, exit_code: int = 1):
    print(f"E_{code}: {message}", file=sys.stderr)
    raise SystemExit(exit_code)


def _load_config(path) -> dict:
    cfg = {}
    try:
        with open(path) as fh:
            for i, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    _fail("CONFIG", f"{path}:{i}: expected key = value")
                key, val = (part.strip() for part in line.split("=", 1))
                try:
                    cfg[key.replace("-", "_")] = json.loads(val)
                except json.JSONDecodeError:
                    cfg[key.replace("-", "_")] = val
    except OSError as exc:
        _fail("CONFIG", f"cannot read config file: {exc}")
    return cfg


def _write_manifest(out_dir, args, scenario_ids, outputs):
    os.makedirs(out_dir, exist_ok=True)
    cfg = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in ("func", "config") and isinstance(v, (str, int, float, bool, type(None)))
    }
    manifest = {
        "version": __version__,
        "config": cfg,
        "scenarios": scenario_ids,
        "seed": getattr(args, "seed", 0),
        "outputs": outputs,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        fh.write(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return path


def _sim_config(args) -> SimConfig:
    return SimConfig(
        duration=args.horizon,
        bounds=VehicleParams(),
        render_rasters=bool(args.png),
        bounds_mode=args.bounds_mode,
    )


def _make_policy(name, cmd, scenario):
    if name == "replay":
        return ReplayPolicy(scenario), None
    if name == "cv":
        return constant_velocity_policy, None
    ext = ExternalPolicy(cmd)
    return ext, ext


def _write_trace(trace, out_dir, png):
    traces_dir = os.path.join(out_dir, "traces")
    os.makedirs(traces_dir, exist_ok=True)
    path = os.path.join(traces_dir, f"{trace.scenario_id}.jsonl")
    with open(path, "w") as fh:
        fh.write(
            json.dumps(
                {
                    "scenario_id": trace.scenario_id,
                    "aborted": trace.aborted,
                    "diagnostic": trace.diagnostic,
                },
                sort_keys=True,
            )
            + "\n"
        )
        for f in trace.frames:
            fh.write(
                json.dumps(
                    {
                        "t": round(f.t, 6),
                        "ego": {
                            "px": f.state.px,
                            "py": f.state.py,
                            "theta": f.state.theta,
                            "v": f.state.v,
                        },
                        "plan_id": f.plan_id,
                        "events": f.events,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    if png:
        frames_dir = os.path.join(out_dir, "frames", trace.scenario_id)
        os.makedirs(frames_dir, exist_ok=True)
        for i, f in enumerate(trace.frames):
            if f.raster is not None:
                to_png(f.raster, os.path.join(frames_dir, f"{i:04d}.png"))
    return path


def _simulate_one(scn, args):
    config = _sim_config(args)
    policy, ext = _make_policy(args.policy, args.cmd, scn)
    try:
        trace = run_closed_loop(scn, policy, config)
    finally:
        if ext is not None:
            ext.close()
    _write_trace(trace, args.out, args.png)
    return trace


def _simulate_worker(payload):
    scn, ns_dict = payload
    args = argparse.Namespace(**ns_dict)
    return _simulate_one(scn, args)


def cmd_simulate(args) -> int:
    if args.policy not in POLICIES:
        _fail("USAGE", f"unknown policy {args.policy!r} (choose from {POLICIES})")
    if args.policy == "external" and not args.cmd:
        _fail("USAGE", "--policy external requires --cmd")
    if args.horizon not in metrics.HORIZONS:
        _fail("USAGE", f"--horizon must be one of {metrics.HORIZONS}")
    try:
        scenarios = scn_mod.load_scenarios(args.scenarios)
    except (OSError, MinidriveError) as exc:
        _fail("SCENARIOS", str(exc))
    if not scenarios:
        _fail("SCENARIOS", f"no scenario files in {args.scenarios}")
    scenarios.sort(key=lambda s: s.id)
    outputs = {"report_json": "report.json", "report_csv": "report.csv"}
    _write_manifest(args.out, args, [s.id for s in scenarios], outputs)

    ns_dict = {
        k: v for k, v in vars(args).items() if k != "func"
    }
    jobs = max(1, args.jobs)
    if jobs == 1 or len(scenarios) == 1:
        traces = [_simulate_one(s, args) for s in scenarios]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            traces = list(pool.map(_simulate_worker, [(s, ns_dict) for s in scenarios]))

    failed = [t for t in traces if t.aborted]
    for t in failed:
        print(f"E_SCENE: {t.scenario_id}: {t.diagnostic}", file=sys.stderr)
    ok = [t for t in traces if not t.aborted]
    report = metrics.MetricReport(scene_count=len(ok), squared=args.squared)
    refs = {s.id: np.array([[st.px, st.py] for st in s.ego_log]) for s in scenarios}
    if ok:
        for h in metrics.HORIZONS:
            if h > args.horizon:
                continue
            l2, cr, orr = metrics.closed_loop_metrics(
                ok, [refs[t.scenario_id] for t in ok], h, squared=args.squared
            )
            report.set("L2", h, l2)
            report.set("CR", h, cr)
            report.set("OR", h, orr)
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        fh.write(report.to_json())
    report.write_csv(os.path.join(args.out, "report.csv"))
    return 2 if failed else 0


def cmd_eval_decisions(args) -> int:
    if args.policy not in POLICIES:
        _fail("USAGE", f"unknown policy {args.policy!r} (choose from {POLICIES})")
    if args.policy == "external" and not args.cmd:
        _fail("USAGE", "--policy external requires --cmd")
    try:
        scenarios = scn_mod.load_scenarios(args.scenarios)
    except (OSError, MinidriveError) as exc:
        _fail("SCENARIOS", str(exc))
    if not scenarios:
        _fail("SCENARIOS", f"no scenario files in {args.scenarios}")
    scenarios.sort(key=lambda s: s.id)
    _write_manifest(args.out, args, [s.id for s in scenarios], {"report_json": "report.json"})

    from .policy import Observation

    per_metric = {m: {h: [] for h in metrics.HORIZONS} for m in metrics.OPEN_LOOP_METRICS}
    for scn in scenarios:
        policy, ext = _make_policy(args.policy, args.cmd, scn)
        try:
            for f in range(0, scn.n_frames - scn_mod.TARGET_LEN - 1, args.stride):
                obs = Observation(history=((None, scn.ego_log[f]),), ego=scn.ego_log[f])
                decision = policy(obs, f)
                target = scn_mod.future_positions_ego_frame(scn, f)
                for h in metrics.HORIZONS:
                    hf = metrics.horizon_frames(h)
                    ade, fde = metrics.ade_fde(
                        decision.waypoints, target, hf, squared=args.squared
                    )
                    fdr, adr = metrics.fdr_adr(
                        decision.waypoints, target, hf, squared=args.squared
                    )
                    per_metric["ADE"][h].append(ade)
                    per_metric["FDE"][h].append(fde)
                    per_metric["FDR"][h].append(fdr)
                    per_metric["ADR"][h].append(adr)
        finally:
            if ext is not None:
                ext.close()
    report = metrics.MetricReport(scene_count=len(scenarios), squared=args.squared)
    for m, per in per_metric.items():
        for h, vals in per.items():
            if vals:
                report.set(m, h, float(np.mean(vals)))
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        fh.write(report.to_json())
    report.write_csv(os.path.join(args.out, "report.csv"))
    return 0


def cmd_plan(args) -> int:
    try:
        with open(args.problem) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        _fail("PROBLEM", f"cannot read problem file: {exc}")
    try:
        bounds = VehicleParams(**doc.get("bounds", {}))
        problem = planner.PlanningProblem(
            start=planner.BoundaryState(
                np.array(doc["start"]["position"]), np.array(doc["start"]["velocity"])
            ),
            end=planner.BoundaryState(
                np.array(doc["end"]["position"]), np.array(doc["end"]["velocity"])
            ),
            waypoints=np.array(doc.get("waypoints", [])).reshape(-1, 2),
            dt_piece=float(doc.get("dt_piece", 0.1)),
            bounds=bounds,
            p0=np.array(doc["p0"]) if "p0" in doc else None,
        )
        pt = planner.solve(problem)
        if doc.get("mode", "report") == "rescale" and not pt.feasible:
            pt = planner.check_and_enforce_bounds(pt, bounds, mode="rescale")
    except (KeyError, MinidriveError, ValueError) as exc:
        _fail("PLAN", str(exc))
    out = {
        "trajectory": pt.traj.to_json_dict(),
        "jerk_cost": pt.jerk_cost,
        "feasible": pt.feasible,
        "peak_speed": pt.peak_speed,
        "peak_accel": pt.peak_accel,
    }
    text = json.dumps(out, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_extract(args) -> int:
    try:
        scenarios = scn_mod.load_scenarios(args.scenarios)
    except (OSError, MinidriveError) as exc:
        _fail("SCENARIOS", str(exc))
    scenarios.sort(key=lambda s: s.id)
    _write_manifest(args.out, args, [s.id for s in scenarios], {"records": "records.jsonl"})
    for scn in scenarios:
        if scn.n_frames < scn_mod.MIN_FRAMES:
            print(
                f"warning: scenario {scn.id} has {scn.n_frames} < "
                f"{scn_mod.MIN_FRAMES} frames, dropped",
                file=sys.stderr,
            )
    records = scn_mod.filter_and_extract(scenarios)
    spec = RasterSpec()
    params = VehicleParams()
    by_id = {s.id: s for s in scenarios}
    raster_dir = os.path.join(args.out, "rasters")
    if args.rasters:
        os.makedirs(raster_dir, exist_ok=True)
    with open(os.path.join(args.out, "records.jsonl"), "w") as fh:
        for rec in records:
            if args.rasters:
                scn = by_id[rec.scenario_id]
                anchor = scn.ego_log[rec.frame]
                cur = render_frame(scn, rec.frame, spec, params)
                nxt = render_frame(scn, rec.frame + 1, spec, params, anchor_pose=anchor)
                nxt_env = rasterize_static(scn.static_map, anchor, spec)
                base = f"{rec.scenario_id}_{rec.frame:05d}"
                rec.current_bev = os.path.join("rasters", base + "_cur.bev")
                rec.next_bev = os.path.join("rasters", base + "_next.bev")
                rec.next_env = os.path.join("rasters", base + "_env.bev")
                to_binary(cur, os.path.join(args.out, rec.current_bev))
                to_binary(nxt, os.path.join(args.out, rec.next_bev))
                to_binary(nxt_env, os.path.join(args.out, rec.next_env))
            fh.write(
                json.dumps(
                    {
                        "scenario_id": rec.scenario_id,
                        "frame": rec.frame,
                        "target_positions": rec.target_positions.tolist(),
                        "current_bev": rec.current_bev,
                        "next_bev": rec.next_bev,
                        "next_env": rec.next_env,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    print(f"wrote {len(records)} records")
    return 0


def cmd_score_prediction(args) -> int:
    try:
        names = sorted(n for n in os.listdir(args.pred) if n.endswith(".bev"))
    except OSError as exc:
        _fail("SCORE", str(exc))
    if not names:
        _fail("SCORE", f"no .bev files in {args.pred}")
    per_frame = {}
    for name in names:
        try:
            pred = from_binary(os.path.join(args.pred, name))
            gt = from_binary(os.path.join(args.gt, name))
            env = from_binary(os.path.join(args.env, name))
        except (OSError, MinidriveError) as exc:
            _fail("SCORE", f"{name}: {exc}")
        per_frame[name] = {
            "prediction_loss": losses.prediction_loss(env, pred, gt),
            "finetune_loss": losses.finetune_loss(env, pred, gt),
        }
    out = {
        "frames": per_frame,
        "mean_prediction_loss": float(
            np.mean([v["prediction_loss"] for v in per_frame.values()])
        ),
        "mean_finetune_loss": float(
            np.mean([v["finetune_loss"] for v in per_frame.values()])
        ),
    }
    text = json.dumps(out, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_make_fixtures(args) -> int:
    try:
        paths = scn_mod.write_fixture_set(args.out, args.set)
    except ValueError as exc:
        _fail("USAGE", str(exc))
    for p in paths:
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minidrive")
    parser.add_argument("--config", help="key = value config file with flag defaults")
    sub = parser.add_subparsers(dest="command")

    sim = sub.add_parser("simulate", help="closed-loop simulation + metric report")
    sim.add_argument("--scenarios", required=True)
    sim.add_argument("--policy", default="replay")
    sim.add_argument("--cmd", default=None, help="external policy command line")
    sim.add_argument("--horizon", type=float, default=4.0)
    sim.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default="out")
    sim.add_argument("--png", action="store_true")
    sim.add_argument("--squared", action="store_true")
    sim.add_argument("--bounds-mode", default="report", choices=("report", "rescale"))
    sim.set_defaults(func=cmd_simulate)

    ev = sub.add_parser("eval-decisions", help="open-loop decision metrics")
    ev.add_argument("--scenarios", required=True)
    ev.add_argument("--policy", default="cv")
    ev.add_argument("--cmd", default=None)
    ev.add_argument("--stride", type=int, default=10)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--squared", action="store_true")
    ev.add_argument("--out", default="out")
    ev.set_defaults(func=cmd_eval_decisions)

    plan = sub.add_parser("plan", help="solve one planning problem JSON")
    plan.add_argument("--problem", required=True)
    plan.add_argument("--out", default=None)
    plan.set_defaults(func=cmd_plan)

    ext = sub.add_parser("extract", help="extract training records from scenarios")
    ext.add_argument("--scenarios", required=True)
    ext.add_argument("--out", default="out")
    ext.add_argument("--rasters", action="store_true", help="also render raster tensors")
    ext.add_argument("--seed", type=int, default=0)
    ext.set_defaults(func=cmd_extract)

    score = sub.add_parser("score-prediction", help="score predicted rasters")
    score.add_argument("--pred", required=True)
    score.add_argument("--gt", required=True)
    score.add_argument("--env", required=True)
    score.add_argument("--out", default=None)
    score.set_defaults(func=cmd_score_prediction)

    fix = sub.add_parser("make-fixtures", help="write synthetic scenario fixtures")
    fix.add_argument("--set", default="basic", choices=("basic", "paper-scenes"))
    fix.add_argument("--out", default="fixtures")
    fix.set_defaults(func=cmd_make_fixtures)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # pre-scan for --config so its values become subcommand defaults
    if "--config" in argv:
        cfg_path = argv[argv.index("--config") + 1]
        cfg = _load_config(cfg_path)
        for sub in parser._subparsers._group_actions[0].choices.values():
            known = {a.dest for a in sub._actions}
            sub.set_defaults(**{k: v for k, v in cfg.items() if k in known})
            for action in sub._actions:
                if action.dest in cfg:
                    action.required = False
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        raise SystemExit(1 if exc.code not in (0, None) else exc.code)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 1
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
