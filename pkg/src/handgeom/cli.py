"""Command line entry point: ``handgeom <command> ...``.

Exit codes: 0 success, 2 invalid input or configuration, 1 runtime failure.
Every command writes a JSON manifest (config, config hash, seed and sha256 of
inputs and outputs) next to its main output, or to ``--manifest``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .anatomy import ANGLE_IDS, AnatomyStats, AngleKind, fit_stats
from .crop import solve_localizer
from .errors import HandGeomError
from .gradcheck import run_suite
from .hand_model import DEFAULT_INTRINSICS, HandSample, random_fk_params
from .heatmap import extract_box, presence_score, render_gaussian
from .io import ingest, load_config, remap_tables, write_jsonl, write_manifest, write_samples
from .metrics import default_thresholds, evaluate
from .refine import refine_many

FINGER_NAMES = ("thumb", "index", "middle", "ring", "little")


def _config(args):
    overrides = {"seed": getattr(args, "seed", None), "threads": getattr(args, "threads", None)}
    return load_config(args.config, overrides=overrides)


def _manifest_path(args, main_output) -> Path:
    if args.manifest:
        return Path(args.manifest)
    p = Path(main_output)
    return p / "manifest.json" if p.is_dir() else p.with_name(p.name + ".manifest.json")


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def stats_table(stats: AnatomyStats) -> str:
    lines = ["finger lengths (middle = 10)"]
    lines.append("  " + "  ".join(f"{n:>7}" for n in FINGER_NAMES))
    lines.append("  " + "  ".join(f"{v:7.3f}" for v in stats.finger_lengths_norm))
    lines.append(f"mean ratio {stats.mean_ratio:.5f}   variance {stats.ratio_variance:.5f}")
    lines.append("angle ranges (deg)")
    for kind in AngleKind:
        row = [a for a in ANGLE_IDS if a.kind is kind]
        cells = []
        for a in row:
            name = FINGER_NAMES[a.finger]
            if kind is AngleKind.ABDUCTION:
                name += "-" + FINGER_NAMES[a.finger + 1]
            lo, hi = stats.angle_ranges[a]
            cells.append(f"{name} [{lo:.1f}, {hi:.1f}]")
        lines.append(f"  {kind.value:<9} " + "  ".join(cells))
    return "\n".join(lines)


def cmd_stats(args, argv):
    cfg = _config(args)
    samples = ingest(args.annotations, args.order)
    with_3d = [s for s in samples if s.has_3d]
    stats = fit_stats(with_3d)
    _write_json(args.out, stats.to_dict())
    print(f"{len(with_3d)} of {len(samples)} samples have 3D annotation")
    print(stats_table(stats))
    write_manifest(_manifest_path(args, args.out), "stats", argv, cfg, [args.annotations], [args.out])


def cmd_refine(args, argv):
    cfg = _config(args)
    samples = [s for s in ingest(args.annotations, args.order) if s.has_3d]
    stats = AnatomyStats.from_dict(json.loads(Path(args.stats).read_text(encoding="utf-8")))
    gts = None
    inputs = [args.annotations, args.stats]
    if args.gt:
        by_id = {s.id: s.pose for s in ingest(args.gt, args.order)}
        missing = [s.id for s in samples if s.id not in by_id]
        if missing:
            raise HandGeomError(f"no ground truth for {len(missing)} samples, e.g. {missing[0]}")
        gts = [by_id[s.id] for s in samples]
        inputs.append(args.gt)
    results = refine_many([s.pose for s in samples], stats, cfg.loss, gts, cfg.threads)
    write_jsonl(({"id": s.id, **rep.to_dict()} for s, (_, rep) in zip(samples, results)), args.report)
    outputs = [args.report]
    if args.out:
        write_samples((HandSample(s.id, p, s.intrinsics, True) for s, (p, _) in zip(samples, results)), args.out)
        outputs.append(args.out)
    if results:
        f0 = np.mean([r.initial_loss for _, r in results])
        f1 = np.mean([r.final_loss for _, r in results])
        print(f"refined {len(results)} poses; mean loss {f0:.6g} -> {f1:.6g}")
    write_manifest(_manifest_path(args, args.report), "refine", argv, cfg, inputs, outputs)


def cmd_eval(args, argv):
    cfg = _config(args)
    pred = {s.id: s for s in ingest(args.pred, args.order)}
    gt = ingest(args.gt, args.order)
    missing = [s.id for s in gt if s.id not in pred]
    if missing or len(pred) != len(gt):
        raise HandGeomError(f"prediction and ground-truth ids differ (e.g. {missing[:1]})")
    if args.space == "3d" and not all(s.has_3d and pred[s.id].has_3d for s in gt):
        raise HandGeomError("3D evaluation needs kp3d in both files")
    thresholds = default_thresholds(args.pck_min, args.pck_max, args.pck_steps)
    report, curve = evaluate([pred[s.id].pose for s in gt], [s.pose for s in gt], thresholds,
                             args.space, args.align_wrist)
    csv_path = args.csv or str(Path(args.out).with_suffix(".csv"))
    _write_json(args.out, report)
    Path(csv_path).write_text(curve.to_csv(), encoding="utf-8")
    print(f"EPE mean {report['epe_mean']:.4f}  median {report['epe_median']:.4f}  AUC {report['auc']:.4f}")
    write_manifest(_manifest_path(args, args.out), "eval", argv, cfg, [args.pred, args.gt], [args.out, csv_path])


def cmd_heatmap(args, argv):
    cfg = _config(args)
    samples = ingest(args.annotations, args.order)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sigma = cfg.loss.sigma if args.sigma is None else args.sigma
    pad = cfg.box_pad if args.pad is None else args.pad
    rows = []
    for s in samples:
        kp = s.pose.joints2d * args.scale
        stack = render_gaussian(kp, args.w, args.h, sigma, s.pose.visibility)
        np.save(out / f"{_safe(s.id)}.npy", stack)
        row = {"id": s.id, "presence": presence_score(stack)}
        row["present"] = row["presence"] >= cfg.loss.tau
        if np.any(stack > 0):
            box = extract_box(stack, pad)
            row["box"] = box.as_array().tolist()
            row["theta"] = solve_localizer(box, cfg.out_w, cfg.out_h).tolist()
        else:
            row["box"] = row["theta"] = None
        rows.append(row)
    write_jsonl(rows, out / "boxes.jsonl")
    print(f"rendered {len(samples)} stacks into {out}")
    write_manifest(_manifest_path(args, out), "heatmap", argv, cfg, [args.annotations],
                   [out / "boxes.jsonl"] + [out / f"{_safe(s.id)}.npy" for s in samples])


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def cmd_synth(args, argv):
    cfg = _config(args)
    if args.count < 0:
        raise HandGeomError("count must be >= 0")
    rng = np.random.default_rng(cfg.seed)
    samples = []
    for i in range(args.count):
        params = random_fk_params(rng)
        samples.append(HandSample(f"synth/{i:05d}", params.build(), DEFAULT_INTRINSICS))
    write_samples(samples, args.out)
    print(f"wrote {args.count} hands to {args.out}")
    write_manifest(_manifest_path(args, args.out), "synth", argv, cfg, [], [args.out])


def cmd_gradcheck(args, argv):
    cfg = _config(args)
    results = run_suite(cfg.seed, args.n)
    for r in results:
        status = "ok" if r.ok else "FAIL"
        print(f"{r.name:<18} {status:<4} checked {r.checked:>4} skipped {r.skipped:>3} "
              f"max rel err {r.max_rel_error:.2e}")
    write_manifest(Path(args.manifest or "gradcheck.manifest.json"), "gradcheck", argv, cfg)
    return 0 if all(r.ok for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="handgeom", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    orders = sorted(remap_tables())

    def common(sp, order=True):
        sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--manifest", help="manifest path (default: next to the output)")
        sp.add_argument("--threads", type=int)
        if order:
            sp.add_argument("--order", choices=orders, default="canonical",
                            help="joint order of the input files")

    s = sub.add_parser("stats", help="fit anatomy statistics to an annotation file")
    s.add_argument("annotations")
    s.add_argument("--out", required=True)
    common(s)
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("refine", help="refine 3D poses against anatomy statistics")
    s.add_argument("annotations")
    s.add_argument("--stats", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--out", help="write refined poses here")
    s.add_argument("--gt", help="ground truth file for EPE before/after")
    common(s)
    s.set_defaults(func=cmd_refine)

    s = sub.add_parser("eval", help="EPE, PCK/AUC and per-group errors")
    s.add_argument("pred")
    s.add_argument("gt")
    s.add_argument("--pck-min", type=float, default=20.0)
    s.add_argument("--pck-max", type=float, default=50.0)
    s.add_argument("--pck-steps", type=int, default=31)
    s.add_argument("--space", choices=("2d", "3d"), default="3d")
    s.add_argument("--align-wrist", action="store_true")
    s.add_argument("--out", default="eval.json")
    s.add_argument("--csv", help="PCK curve CSV (default: --out with .csv)")
    common(s)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("heatmap", help="render heatmaps, boxes and localizer transforms")
    s.add_argument("annotations")
    s.add_argument("--w", type=int, default=64)
    s.add_argument("--h", type=int, default=64)
    s.add_argument("--sigma", type=float, help="default: config sigma")
    s.add_argument("--pad", type=float, help="default: config box_pad")
    s.add_argument("--scale", type=float, default=1.0, help="multiply kp2d before rendering")
    s.add_argument("--out", required=True)
    common(s)
    s.set_defaults(func=cmd_heatmap)

    s = sub.add_parser("synth", help="generate forward-kinematics hands")
    s.add_argument("--count", type=int, default=100)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    common(s, order=False)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("gradcheck", help="finite-difference check of all loss gradients")
    s.add_argument("--seed", type=int)
    s.add_argument("--n", type=int, default=200, help="inputs per loss")
    common(s, order=False)
    s.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args, argv)
    except (HandGeomError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"handgeom {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"handgeom {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
