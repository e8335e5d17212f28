"""``coraltk`` command line.

Every subcommand reads its inputs, computes everything in memory, and only
then writes its artifacts plus ``run_manifest.json`` into ``--out``. A
failed run leaves the output directory untouched.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .change import EmptySelectionError, dsm_diff, histogram, masked_stats, truncate, violin_data
from .mesh import load_palette, load_ply, project_mask, project_scalar, write_ply
from .raster import CLASS_IDS, CLASS_NAMES, AlignmentError, load_grid, load_mask, write_ascii_grid
from .report import (
    STATS_FIELDS, histogram_dict, sha256_bytes, sha256_file, stats_dict, stats_row, to_csv, to_json,
    violin_dict, write_outputs,
)
from .rugosity import DEFAULT_WINDOWS, KERNELS, vrm_multiscale
from .segmetrics import DEFAULT_MU, ce_loss, class_accuracy, class_iou, confusion, hybrid_loss, miou, mpa, soft_iou_loss
from .surveyqc import gcp_rmse, read_gcp_csv, rootsift
from .tiling import assign_folds, augment_plan, plan_manifest, tile_plan

log = logging.getLogger("coraltk")

COMMANDS = ("vrm", "diff", "stats", "tiles", "metrics", "project-mesh", "gcp-rmse", "rootsift")

DEFAULTS = {
    "windows": list(DEFAULT_WINDOWS),
    "kernel": "sat",
    "limit": 0.050,
    "tile": 448,
    "stride": 224,
    "folds": 5,
    "seed": 0,
    "mu": DEFAULT_MU,
    "bin_width": 0.001,
    "min_valid_fraction": 0.5,
    "block": None,
    "augment": 1,
    "class_id": None,
}
PATH_KEYS = ("dsm", "dsm_earlier", "dsm_later", "mask", "mesh", "gcp", "input", "out")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _windows(text):
    try:
        return [int(w) for w in text.split(",") if w.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    add = common.add_argument
    add("--dsm", help="DSM (or any meter grid) as an ESRI ASCII grid")
    add("--dsm-earlier", help="earlier-epoch DSM")
    add("--dsm-later", help="later-epoch DSM")
    add("--mask", help="class mask (0 background, 1 live, 2 dead, 255 nodata)")
    add("--class", dest="class_id", type=int, help="restrict to one class id")
    add("--windows", type=_windows, help="odd VRM window sizes in cells, e.g. 5,7,11")
    add("--kernel", choices=KERNELS, help="VRM window kernel")
    add("--limit", type=float, help="truncation / colour limit in meters")
    add("--tile", type=int, help="tile size in cells")
    add("--stride", type=int, help="tile stride in cells")
    add("--folds", type=int, help="number of cross-validation folds")
    add("--seed", type=int, help="RNG seed (unsigned 64-bit)")
    add("--mu", type=float, help="IoU weight in the hybrid loss")
    add("--mesh", help="ASCII PLY mesh")
    add("--palette", help="palette JSON map (file path or inline JSON)")
    add("--gcp", help="GCP CSV: id,mx,my,mz,rx,ry,rz")
    add("--out", help="output directory")
    add("--config", help="JSON config; flags override its values")

    p = _Parser(prog="coraltk", description="Coral reef DSM, rugosity and segmentation analysis.")
    p.add_argument("--version", action="version", version=f"coraltk {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    helps = {
        "vrm": "multiscale VRM maps and per-class violin data",
        "diff": "height-change map between two DSM epochs",
        "stats": "height-change statistics and histograms, optionally per class",
        "tiles": "tile, fold and augmentation plan",
        "metrics": "confusion matrix, mPA/mIoU and (for probability maps) losses",
        "project-mesh": "texture a mesh with a class mask and/or height changes",
        "gcp-rmse": "check-point RMSE",
        "rootsift": "RootSIFT transform of descriptors",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "metrics":
            sp.add_argument("input", nargs="?", help="prediction: class-mask .asc or (C,H,W) probability .npy")
        elif name == "rootsift":
            sp.add_argument("input", nargs="?", help="CSV of descriptors, 128 values per row")
    return p


def resolve(args):
    """Merge defaults, config file and flags into one parameter dict."""
    params = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as f:
                cfg = json.load(f)
        except OSError as e:
            raise DataError(f"cannot read config: {e}") from None
        except json.JSONDecodeError as e:
            raise UsageError(f"config is not valid JSON: {e}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        base = os.path.dirname(args.config)
        for k, v in cfg.items():
            k = k.replace("-", "_")
            if k == "class":
                k = "class_id"
            if k in PATH_KEYS and isinstance(v, str) and not os.path.isabs(v):
                v = os.path.join(base, v)
            params[k] = v
    for k, v in vars(args).items():
        if k in ("config", "command"):
            continue
        if v is not None:
            params[k] = v
    params["command"] = args.command
    validate(params)
    return params


def validate(p):
    ws = p["windows"]
    if isinstance(ws, str):
        ws = p["windows"] = _windows(ws)
    if not ws or any(int(w) != w or w < 3 or w % 2 == 0 for w in ws):
        raise UsageError(f"windows must be odd integers >= 3, got {ws}")
    if p["mu"] < 0:
        raise UsageError(f"mu must be >= 0, got {p['mu']}")
    if not 1 <= p["stride"] <= p["tile"]:
        raise UsageError(f"need tile >= stride >= 1, got tile={p['tile']}, stride={p['stride']}")
    if not 0 <= p["seed"] < 2 ** 64:
        raise UsageError("seed must be an unsigned 64-bit integer")
    if p["folds"] < 2:
        raise UsageError("folds must be >= 2")
    if not p["limit"] > 0:
        raise UsageError("limit must be > 0")
    if p["kernel"] not in KERNELS:
        raise UsageError(f"kernel must be one of {KERNELS}")


def _need(p, *keys):
    for k in keys:
        if not p.get(k):
            what = "an INPUT argument" if k == "input" else "--" + k.replace("_", "-")
            raise UsageError(f"{p['command']} needs {what}")


def _classes(p, mask):
    if p.get("class_id") is not None:
        return [p["class_id"]]
    return list(CLASS_IDS) if mask is not None else []


# -- subcommands ------------------------------------------------------------
# Each returns (artifacts, inputs, parameters).


def cmd_vrm(p):
    _need(p, "dsm")
    dsm = load_grid(p["dsm"])
    mask = load_mask(p["mask"]) if p.get("mask") else None
    grids = vrm_multiscale(dsm, p["windows"], p["kernel"], p["min_valid_fraction"])
    art = {}
    summary = []
    rows = []
    for w, g in grids.items():
        art[f"vrm_w{w}.asc"] = write_ascii_grid(g)
        entries = violin_data(g, None, [None], window=w)
        if mask is not None:
            entries += violin_data(g, mask, _classes(p, mask), window=w)
        for v in entries:
            summary.append(violin_dict(v))
            label = "all" if v.class_id is None else CLASS_NAMES.get(v.class_id, str(v.class_id))
            rows.append([label, w] + stats_row(v.samples_summary) + [v.bandwidth])
    art["vrm_summary.json"] = to_json({"results": summary, "median_convention": "lower"})
    art["vrm_summary.csv"] = to_csv(("class", "window") + STATS_FIELDS + ("bandwidth",), rows)
    inputs = {"dsm": p["dsm"], "mask": p.get("mask")}
    return art, inputs, {k: p[k] for k in ("windows", "kernel", "min_valid_fraction", "class_id")}


def _diff_from(p):
    if p.get("dsm_earlier") or p.get("dsm_later"):
        _need(p, "dsm_earlier", "dsm_later")
        later, earlier = load_grid(p["dsm_later"]), load_grid(p["dsm_earlier"])
        return dsm_diff(later, earlier), {"dsm_earlier": p["dsm_earlier"], "dsm_later": p["dsm_later"]}
    _need(p, "dsm")
    return load_grid(p["dsm"]), {"dsm": p["dsm"]}


def cmd_diff(p):
    _need(p, "dsm_earlier", "dsm_later")
    d, inputs = _diff_from(p)
    art = {
        "diff.asc": write_ascii_grid(d),
        "diff_truncated.asc": write_ascii_grid(truncate(d, p["limit"])),
    }
    return art, inputs, {"limit": p["limit"]}


def cmd_stats(p):
    d, inputs = _diff_from(p)
    mask = None
    if p.get("mask"):
        mask = load_mask(p["mask"])
        inputs["mask"] = p["mask"]
    selections = []
    if p.get("class_id") is None:
        selections.append(("all", None))
    selections += [(CLASS_NAMES.get(c, str(c)), c) for c in _classes(p, mask)]
    results, rows = [], []
    for label, cid in selections:
        try:
            s = masked_stats(d, mask if cid is not None else None, cid)
            h = histogram(d, p["bin_width"], mask if cid is not None else None, cid)
        except EmptySelectionError:
            if cid is None:
                raise
            s = h = None
        results.append({
            "class": label,
            "class_id": cid,
            "stats": None if s is None else stats_dict(s),
            "histogram": None if h is None else histogram_dict(h),
        })
        rows.append([label] + stats_row(s))
    doc = {"results": results, "units": "meters", "median_convention": "lower",
           "statistics_on": "untruncated differences"}
    art = {"stats.json": to_json(doc), "stats.csv": to_csv(("class",) + STATS_FIELDS, rows)}
    return art, inputs, {k: p[k] for k in ("bin_width", "class_id")}


def cmd_tiles(p):
    if p.get("dsm"):
        r, inputs = load_grid(p["dsm"]), {"dsm": p["dsm"]}
    else:
        _need(p, "mask")
        r, inputs = load_mask(p["mask"]), {"mask": p["mask"]}
    tiles = tile_plan(r.width, r.height, p["tile"], p["stride"])
    block = p["block"] or p["tile"]
    tiles = assign_folds(tiles, p["folds"], block, p["seed"])
    # one child seed per tile keeps plans independent of tile count
    seeds = np.random.SeedSequence(p["seed"]).spawn(len(tiles))
    aug = [augment_plan(t, p["augment"], s, r.width, r.height, p["stride"]) for t, s in zip(tiles, seeds)]
    doc = {"width": r.width, "height": r.height, "block": block, "tiles": plan_manifest(tiles, aug)}
    params = {k: p[k] for k in ("tile", "stride", "folds", "seed", "augment")}
    params["block"] = block
    return {"tiles.json": to_json(doc)}, inputs, params


def cmd_metrics(p):
    _need(p, "mask", "input")
    truth = load_mask(p["mask"])
    inputs = {"truth": p["mask"], "prediction": p["input"]}
    doc = {}
    if p["input"].endswith(".npy"):
        probs = np.load(p["input"], allow_pickle=False)
        if probs.ndim != 3 or probs.shape[1:] != truth.ids.shape:
            raise DataError(f"probability map shape {probs.shape} does not match mask {truth.ids.shape}")
        doc["losses"] = {
            "ce": ce_loss(probs, truth),
            "soft_iou": soft_iou_loss(probs, truth),
            "hybrid": hybrid_loss(probs, truth, p["mu"]),
        }
        pred = np.argmax(probs, axis=0)
        pred = np.where(truth.ids == 255, 255, pred)
        n_classes = probs.shape[0]
    else:
        pred = load_mask(p["input"])
        n_classes = 3
    m = confusion(pred, truth, n_classes)
    acc, iou = class_accuracy(m), class_iou(m)
    doc.update({
        "confusion": m.tolist(),
        "class_accuracy": acc.tolist(),
        "class_iou": iou.tolist(),
        "mpa": mpa(m),
        "miou": miou(m),
    })
    rows = [[CLASS_NAMES.get(c, str(c)), int(m[c].sum()), float(acc[c]) if acc[c] == acc[c] else None,
             float(iou[c]) if iou[c] == iou[c] else None] for c in range(n_classes)]
    rows.append(["mean", int(m.sum()), doc["mpa"], doc["miou"]])
    art = {"metrics.json": to_json(doc), "metrics.csv": to_csv(("class", "pixels", "pixel_accuracy", "iou"), rows)}
    return art, inputs, {"mu": p["mu"]}


def cmd_project_mesh(p):
    _need(p, "mesh")
    if not (p.get("mask") or p.get("dsm")):
        raise UsageError("project-mesh needs --mask and/or --dsm")
    mesh = load_ply(p["mesh"])
    inputs = {"mesh": p["mesh"]}
    pal = p.get("palette")
    palette = None
    if isinstance(pal, dict):
        palette = load_palette(pal)
    elif isinstance(pal, str):
        if pal.lstrip().startswith("{"):
            palette = load_palette(pal)
        else:
            with open(pal, encoding="utf-8") as f:
                palette = load_palette(f.read())
            inputs["palette"] = pal
    art = {}
    if p.get("mask"):
        inputs["mask"] = p["mask"]
        art["mesh_classes.ply"] = write_ply(project_mask(mesh, load_mask(p["mask"]), palette))
    if p.get("dsm"):
        inputs["values"] = p["dsm"]
        art["mesh_height.ply"] = write_ply(project_scalar(mesh, load_grid(p["dsm"]), p["limit"]))
    params = {"limit": p["limit"], "palette": palette and {str(k): list(v) for k, v in palette.items()}}
    return art, inputs, params


def cmd_gcp_rmse(p):
    _need(p, "gcp")
    with open(p["gcp"], encoding="utf-8") as f:
        rep = gcp_rmse(read_gcp_csv(f.read()))
    doc = dict(rep.as_dict(), units="meters")
    return {"gcp_rmse.json": to_json(doc)}, {"gcp": p["gcp"]}, {}


def cmd_rootsift(p):
    _need(p, "input")
    try:
        d = np.loadtxt(p["input"], delimiter=",", ndmin=2)
    except ValueError as e:
        raise DataError(f"cannot parse descriptors: {e}") from None
    out = rootsift(d)
    text = "".join(",".join(repr(v) for v in row) + "\n" for row in out.tolist())
    return {"rootsift.csv": text}, {"descriptors": p["input"]}, {}


HANDLERS = {
    "vrm": cmd_vrm, "diff": cmd_diff, "stats": cmd_stats, "tiles": cmd_tiles, "metrics": cmd_metrics,
    "project-mesh": cmd_project_mesh, "gcp-rmse": cmd_gcp_rmse, "rootsift": cmd_rootsift,
}


def run(p):
    _need(p, "out")
    artifacts, inputs, params = HANDLERS[p["command"]](p)
    manifest = {
        "tool": "coraltk",
        "version": __version__,
        "command": p["command"],
        "parameters": params,
        "inputs": {k: {"path": v, "sha256": sha256_file(v)} for k, v in sorted(inputs.items()) if v},
        "outputs": {
            name: sha256_bytes(data.encode("utf-8") if isinstance(data, str) else data)
            for name, data in sorted(artifacts.items())
        },
    }
    artifacts["run_manifest.json"] = to_json(manifest)
    write_outputs(p["out"], artifacts)
    return sorted(artifacts)


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        p = resolve(args)
        written = run(p)
    except UsageError as e:
        log.error("%s", e)
        return 1
    except (DataError, OSError, ValueError, AlignmentError) as e:
        log.error("%s", e)
        return 2
    log.info("wrote %s to %s", ", ".join(written), p["out"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
