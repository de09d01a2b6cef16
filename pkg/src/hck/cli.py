"""Command-line entry point.

Every subcommand reads an optional ``--config`` JSON, takes ``--seed`` where
randomness is involved and writes its results under ``--out``. Failures print
one JSON object to stderr and exit with a nonzero status.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

log = logging.getLogger("hck")

EXIT_ERROR = 1
EXIT_USAGE = 2


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("usage", message, self.prog)
        sys.exit(EXIT_USAGE)


def _emit_error(kind: str, message: str, command: str = "") -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "command": command}) + "\n")


def _load_config(path) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise CliError(f"{path}: config must be a JSON object")
    return cfg


def _out_file(out: str, default_name: str) -> Path:
    """``--out`` may name a file (anything with a suffix) or a directory."""
    p = Path(out)
    if p.suffix:
        p.parent.mkdir(parents=True, exist_ok=True)
        return p
    p.mkdir(parents=True, exist_ok=True)
    return p / default_name


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _seed(args) -> int:
    s = args.seed if args.seed is not None else 0
    if not 0 <= s < 2 ** 64:
        raise CliError("seed must be an unsigned 64-bit integer")
    return s


# --- subcommands -------------------------------------------------------------------

def cmd_synth(args) -> dict:
    from .synthesis import (NoiseConfig, SynthConfig, default_assets, generate_dataset,
                            load_human_assets, load_scene_assets)
    cfg = _load_config(args.config)
    synth = dict(cfg.get("synth", {}))
    synth["rng_seed"] = _seed(args) if args.seed is not None else synth.get("rng_seed", 0)
    scfg = SynthConfig.from_dict(synth)
    noise_cfg = cfg.get("noise", {})
    noise = None if noise_cfg is None or args.no_noise else NoiseConfig(**noise_cfg)
    if args.assets:
        scenes = load_scene_assets(Path(args.assets) / "scenes")
        humans = load_human_assets(Path(args.assets) / "humans")
    else:
        scenes, humans = default_assets(int(cfg.get("asset_seed", 0)))
    n = args.scenes if args.scenes is not None else int(cfg.get("n_scenes", 1))
    manifest = generate_dataset(scenes, humans, scfg, noise, args.out, n, workers=args.workers)
    return {"clouds": len(manifest.clouds), "scenes": n, "manifest": str(Path(args.out) / "manifest.json")}


def cmd_pseudo_label(args) -> dict:
    from .formats import load_points, write_cloud
    from .labeling import LabelConfig, pseudo_label
    from .synthesis import load_scene_bodies
    cfg = LabelConfig(**_load_config(args.config))
    cloud = load_points(args.cloud)
    bodies = load_scene_bodies(args.bodies)
    if not bodies:
        raise CliError(f"{args.bodies}: no fitted bodies found")
    labeled = pseudo_label(cloud, bodies, bodies[0].taxonomy, cfg)
    path = _out_file(args.out, "labeled.hck")
    write_cloud(path, labeled)
    ids, counts = np.unique(labeled.instance[labeled.instance > 0], return_counts=True)
    return {"out": str(path), "points": len(labeled),
            "instances": {str(int(i)): int(c) for i, c in zip(ids, counts)}}


def cmd_noise(args) -> dict:
    from .geometry.camera import CameraModel
    from .geometry.imageio import read_depth, write_depth
    from .synthesis import NoiseConfig, simulate_kinect_noise
    cfg = NoiseConfig(**_load_config(args.config))
    cam = CameraModel.from_dict(json.loads(Path(args.camera).read_text()))
    depth = read_depth(args.depth)
    noisy = simulate_kinect_noise(depth, cam, cfg, np.random.default_rng(_seed(args)))
    path = _out_file(args.out, "noisy.depth")
    write_depth(path, noisy)
    return {"out": str(path), "valid_in": int(depth.valid.sum()), "valid_out": int(noisy.valid.sum())}


def cmd_cluster(args) -> dict:
    from .clustering import HdbscanParams, semantic_to_instances
    from .formats import load_points
    from .instances import predictions_to_json
    cfg = _load_config(args.config)
    cloud = load_points(args.input)
    if args.human_only:
        mask = cloud.semantic > 0
    else:
        mask = np.ones(len(cloud), dtype=bool)
    grid_s = args.sweep_min_samples or [args.min_samples or cfg.get("min_samples", 1200)]
    grid_c = args.sweep_min_cluster_size or [args.min_cluster_size or cfg.get("min_cluster_size", 1500)]
    runs = []
    for ms in grid_s:
        for mcs in grid_c:
            params = HdbscanParams(int(ms), int(mcs))
            preds = semantic_to_instances(cloud, mask, params)
            runs.append((params, preds))
    if len(runs) == 1:
        params, preds = runs[0]
        path = _out_file(args.out, "instances.json")
        path.write_text(predictions_to_json(preds))
        return {"out": str(path), "instances": len(preds), "params": vars(params)}
    out = _out_file(args.out, "sweep.json")
    rows = [{"min_samples": p.min_samples, "min_cluster_size": p.min_cluster_size,
             "instances": len(pr), "clustered_points": int(sum(x.mask.sum() for x in pr))}
            for p, pr in runs]
    _write_json(out, rows)
    return {"out": str(out), "runs": len(rows)}


def _read_gt_humans(doc):
    from .matching import GroundTruthHuman
    if "instance" in doc:
        inst = np.asarray(doc["instance"])
        part = np.asarray(doc.get("part", np.zeros_like(inst)))
        return [GroundTruthHuman.from_labels(inst, part, int(i)) for i in np.unique(inst) if i > 0]
    out = []
    for h in doc["humans"]:
        parts = h.get("parts", [])
        pm = np.asarray([p["mask"] for p in parts], dtype=float).reshape(len(parts), -1)
        out.append(GroundTruthHuman(np.asarray(h["mask"], dtype=float), pm,
                                    np.asarray([p["part_id"] for p in parts], dtype=np.int64)))
    return out


def cmd_match(args) -> dict:
    from .instances import InstancePrediction
    from .matching import MaskCostConfig, QueryBundle, mask_cost_matrix, two_stage_match
    cfg = MaskCostConfig(**_load_config(args.config))
    pdoc = json.loads(Path(args.preds).read_text())
    humans = [InstancePrediction.from_dict(d) for d in pdoc["humans"]]
    parts = [[InstancePrediction.from_dict(d) for d in g] for g in pdoc.get("parts", [[] for _ in humans])]
    bundle = QueryBundle(humans, parts)
    gts = _read_gt_humans(json.loads(Path(args.gt).read_text()))
    res = two_stage_match(bundle, gts, cfg)
    doc = res.to_dict()
    if gts and bundle.n_humans:
        hc = mask_cost_matrix(bundle.human_masks(), np.stack([g.mask for g in gts]), cfg)
        doc["human_pair_costs"] = [float(hc[q, g]) for q, g in res.humans]
        pc = {}
        for q, g in res.humans:
            if not res.parts.get(g):
                continue
            probs = bundle.part_probs(q)
            c = mask_cost_matrix(bundle.part_masks(q), gts[g].part_masks, cfg, probs,
                                 gts[g].part_ids if probs is not None else None)
            pc[str(g)] = [float(c[a, b]) for a, b in res.parts[g]]
        doc["part_pair_costs"] = pc
    path = _out_file(args.out, "assignment.json")
    _write_json(path, doc)
    return {"out": str(path), "human_pairs": len(res.humans)}


def cmd_eval(args) -> dict:
    from .evaluation import ApConfig, ap_suite, compare_label_sets, pr_curve_csv
    from .formats import read_cloud
    from .instances import HUMAN, masks_from_labels, predictions_from_json
    cfg = _load_config(args.config)
    ap_cfg = ApConfig(**{k: tuple(v) if k == "ap_thresholds" else v for k, v in cfg.items()})
    gt = read_cloud(args.gt)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.pred.endswith(".json"):
        preds = predictions_from_json(Path(args.pred).read_text())
        gts = masks_from_labels(gt.instance)
        ap, ap50, ap25 = ap_suite(preds, gts, ap_cfg)
        summary = {"ap": {str(HUMAN): ap}, "ap50": {str(HUMAN): ap50}, "ap25": {str(HUMAN): ap25}}
        table = f"class      AP    AP50    AP25\n{HUMAN:<5} {ap:7.2f} {ap50:7.2f} {ap25:7.2f}"
    else:
        from .instances import InstancePrediction
        cand = read_cloud(args.pred)
        report = compare_label_sets(cand.instance, gt.instance, ap_cfg, cand.part, gt.part)
        summary, table = report.to_dict(), report.table()
        preds = [InstancePrediction(m.astype(float)) for m in masks_from_labels(cand.instance)]
        gts = masks_from_labels(gt.instance)
    _write_json(outdir / "summary.json", summary)
    print(table)
    if args.pr_curve:
        (outdir / "pr_curve.csv").write_text(pr_curve_csv(preds, gts, ap_cfg.ap_thresholds))
    return {"out": str(outdir / "summary.json")}


def cmd_occlusion(args) -> dict:
    from .evaluation import OcclusionConfig, SceneOcclusion, bucket_counts, scene_occlusion
    from .formats import DatasetManifest, read_cloud
    from .geometry.camera import CameraModel
    from .synthesis import load_scene_bodies
    cfg = OcclusionConfig(**_load_config(args.config))
    root = Path(args.dataset)
    manifest = DatasetManifest.read(root / "manifest.json")
    rows = []
    for rec in sorted(manifest.clouds, key=lambda r: (r.scene, r.camera)):
        sdir = root / "scenes" / f"scene_{rec.scene:05d}"
        bodies = load_scene_bodies(sdir)
        if not bodies:
            continue
        cams = json.loads((sdir / "cameras.json").read_text())
        cam = CameraModel.from_dict(cams[rec.camera])
        cloud = read_cloud(root / rec.path)
        # only humans that are annotated in this view take part
        bodies = [b for b in bodies if np.any(cloud.instance == b.instance_id)]
        if not bodies:
            continue
        masks = [cloud.positions[cloud.instance == b.instance_id] for b in bodies]
        res = scene_occlusion(bodies, masks, cam, cfg)
        rows.append({"scene": rec.scene, "camera": rec.camera, **res.to_dict()})
    path = _out_file(args.out, "occlusion.json")
    counts = bucket_counts([SceneOcclusion(r["ratios"], r["min_ratio"], r["bucket"]) for r in rows])
    _write_json(path, {"scenes": rows, "buckets": counts})
    return {"out": str(path), "buckets": counts}


def cmd_split(args) -> dict:
    from .splits import SequenceRecord, subject_disjoint_split
    cfg = _load_config(args.config)
    doc = json.loads(Path(args.sequences).read_text())
    seqs = [SequenceRecord(d["id"], frozenset(d["subjects"]), int(d["frames"]), float(d["fps"])) for d in doc]
    targets = args.targets or cfg.get("targets")
    if not targets:
        raise CliError("split targets missing: pass --targets or set 'targets' in the config")
    spec = subject_disjoint_split(seqs, tuple(targets))
    path = _out_file(args.out, "split.json")
    _write_json(path, spec.to_dict())
    return {"out": str(path), "counts": list(spec.counts()), "removed": len(spec.removed)}


def cmd_lift2d(args) -> dict:
    from .formats import read_cloud, write_cloud
    from .geometry import dilate_labels, project_2d_mask_to_3d
    from .geometry.camera import CameraModel
    from .geometry.imageio import read_depth, read_index
    cfg = _load_config(args.config)
    cam = CameraModel.from_dict(json.loads(Path(args.camera).read_text()))
    mask = read_index(args.mask)
    dil = args.dilate if args.dilate is not None else int(cfg.get("dilate", 0))
    if dil:
        mask = dilate_labels(mask, dil)
    cloud = read_cloud(args.cloud)
    inst = project_2d_mask_to_3d(mask, read_depth(args.depth), cam, cloud)
    out = cloud.with_labels(semantic=(inst > 0).astype(np.int64), instance=inst,
                            part=np.zeros(len(cloud), dtype=np.int64))
    path = _out_file(args.out, "lifted.hck")
    write_cloud(path, out)
    return {"out": str(path), "labeled_points": int((inst > 0).sum())}


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hck", description="Human point-cloud labeling toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", required=True)
        sp.add_argument("-v", "--verbose", action="store_true")
        sp.set_defaults(func=fn)
        return sp

    sp = add("synth", cmd_synth, "generate a synthetic labeled dataset")
    sp.add_argument("--scenes", type=int)
    sp.add_argument("--assets", help="directory with humans/ and scenes/ subfolders")
    sp.add_argument("--workers", type=int)
    sp.add_argument("--no-noise", action="store_true")

    sp = add("pseudo-label", cmd_pseudo_label, "label a cloud from fitted body meshes")
    sp.add_argument("--cloud", required=True)
    sp.add_argument("--bodies", required=True, help="directory with body_<id>.obj and sidecars")

    sp = add("noise", cmd_noise, "apply Kinect-style noise to a depth image")
    sp.add_argument("--depth", required=True)
    sp.add_argument("--camera", required=True)

    sp = add("cluster", cmd_cluster, "HDBSCAN instances from a cloud")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--min-samples", type=int)
    sp.add_argument("--min-cluster-size", type=int)
    sp.add_argument("--human-only", action="store_true", help="cluster only points with semantic > 0")
    sp.add_argument("--sweep-min-samples", type=int, nargs="+")
    sp.add_argument("--sweep-min-cluster-size", type=int, nargs="+")

    sp = add("match", cmd_match, "two-stage human/part assignment")
    sp.add_argument("--preds", required=True)
    sp.add_argument("--gt", required=True)

    sp = add("eval", cmd_eval, "AP and part IoU against reference labels")
    sp.add_argument("--pred", required=True, help="labeled .hck cloud or predictions .json")
    sp.add_argument("--gt", required=True)
    sp.add_argument("--pr-curve", action="store_true")

    sp = add("occlusion", cmd_occlusion, "bucket generated scenes by occlusion")
    sp.add_argument("--dataset", required=True)

    sp = add("split", cmd_split, "subject-disjoint train/val/test split")
    sp.add_argument("--sequences", required=True)
    sp.add_argument("--targets", type=int, nargs=3)

    sp = add("lift2d", cmd_lift2d, "lift a 2D instance mask onto a cloud")
    sp.add_argument("--mask", required=True)
    sp.add_argument("--depth", required=True)
    sp.add_argument("--camera", required=True)
    sp.add_argument("--cloud", required=True)
    sp.add_argument("--dilate", type=int)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = args.func(args)
    except (CliError, ValueError, OSError, KeyError, TypeError, RuntimeError) as exc:
        _emit_error(type(exc).__name__, str(exc), args.command)
        return EXIT_ERROR
    if result is not None:
        log.info(json.dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
