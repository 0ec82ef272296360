"""Batch driver: ``srdl {cluster,sweep,kmeans,render,synth}``."""

import argparse
import csv
import hashlib
import json
import logging
import math
import re
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import hsi_io
from .baseline import kmeans_labels
from .evaluation import evaluate
from .graph import GraphError, dump_coo
from .labeling import SRDLConfig, cluster
from .modes import DensityError, dump_decision_graph
from .spectral import EigenError

log = logging.getLogger("srdl")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

PALETTE16 = [
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
    (210, 245, 60), (250, 190, 212), (0, 128, 128), (220, 190, 255),
    (170, 110, 40), (255, 250, 200), (128, 0, 0), (170, 255, 195),
]


class InputError(Exception):
    pass


def _radius(text):
    if str(text).strip().lower() in ("inf", "infinity", "none"):
        return math.inf
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("radius must be positive or 'inf'")
    return value


def _clusters(text):
    if text == "auto":
        return None
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("clusters must be >= 1 or 'auto'")
    return value


def _file_digest(cube):
    h = hashlib.sha256()
    h.update(np.asarray(cube.data.shape, dtype="<i8").tobytes())
    h.update(cube.data.astype("<f8").tobytes())
    if cube.gt is not None:
        h.update(cube.gt.astype("<i8").tobytes())
    return h.hexdigest()


def _json_value(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, Path):
        return str(v)
    return v


def run_config(args):
    """Resolved RunConfig as a plain dict (embedded verbatim in reports)."""
    keys = ["input", "format", "gt", "radius", "k", "t", "clusters", "sigma",
            "sigma_multiplier", "kde_neighbors", "kde_bandwidth", "consensus_radius",
            "consensus_threshold", "jitter_variance", "seed", "m_cap", "tau", "k_max",
            "allow_disconnected"]
    cfg = {k: _json_value(getattr(args, k, None)) for k in keys}
    if cfg["clusters"] is None:
        cfg["clusters"] = "auto"
    return cfg


def srdl_config(args, radius=None):
    return SRDLConfig(
        radius=args.radius if radius is None else radius,
        k=args.k, t=args.t, clusters=args.clusters, sigma=args.sigma,
        sigma_multiplier=args.sigma_multiplier, kde_neighbors=args.kde_neighbors,
        kde_bandwidth=args.kde_bandwidth, consensus_radius=args.consensus_radius,
        consensus_threshold=args.consensus_threshold, m_cap=args.m_cap, tau=args.tau,
        k_max=args.k_max, allow_disconnected=args.allow_disconnected)


def load_input(args):
    path = Path(args.input)
    fmt = args.format
    if fmt in (None, "native"):
        stem = hsi_io._native_stem(path)
        exists = Path(f"{stem}.json").exists()
    else:
        exists = path.exists()
    if not exists:
        raise InputError(f"input not found: {path}")
    if args.gt is not None and not Path(args.gt).exists():
        raise InputError(f"ground truth not found: {args.gt}")
    cube = hsi_io.load_cube(path, fmt, gt_path=args.gt)
    if args.jitter_variance:
        cube = hsi_io.jitter_duplicates(cube, args.jitter_variance, args.seed)
    return cube


def write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_label_outputs(out, labels, provenance=None):
    out.mkdir(parents=True, exist_ok=True)
    hsi_io.write_pgm16(labels, out / "labels.pgm")
    hsi_io.save_gt(labels, out / "labels.csv")
    if provenance is not None:
        with open(out / "provenance.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            for row in provenance:
                w.writerow(list(row))


def _dump_eigen(emb, path):
    header = {"rows": int(emb.phis.shape[0]), "cols": int(emb.M), "t": emb.t,
              "lambdas": [float(v) for v in emb.lambdas], "dtype": "f64le",
              "order": "row-major"}
    write_json(header, path.with_suffix(".json"))
    emb.phis.astype("<f8").tofile(path.with_suffix(".bin"))


def cluster_once(cube, args, out, radius=None):
    cfg = srdl_config(args, radius)
    res = cluster(cube, cfg)
    lm = res.labels
    write_label_outputs(out, lm.labels, lm.provenance_names())
    report = {
        "params": run_config(args) | {"radius": _json_value(cfg.radius)},
        "input_sha256": _file_digest(cube),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "shape": [cube.height, cube.width, cube.bands],
        "graph_sigma": res.graph.sigma,
        "M": int(res.embedding.M),
        "lambdas": [float(v) for v in res.embedding.lambdas],
        "modes": [int(m) for m in res.modes.modes],
        "k_hat": int(res.modes.k_hat),
        "n_clusters": int(len(res.modes.modes)),
    }
    if cube.gt is not None and np.any(cube.gt > 0):
        report |= evaluate(lm.labels, cube.gt)
    if getattr(args, "dump", False):
        dump_coo(res.graph.W, out / "W.coo.txt")
        dump_coo(res.graph.P, out / "P.coo.txt")
        _dump_eigen(res.embedding, out / "eigen")
        dump_decision_graph(res.modes, out / "modes.csv")
    write_json(report, out / "report.json")
    return report


def cmd_cluster(args):
    cube = load_input(args)
    report = cluster_once(cube, args, Path(args.output))
    if "oa" in report:
        log.info("OA %.4f  AA %.4f  kappa %.4f", report["oa"], report["aa"], report["kappa"])
    return EXIT_OK


def cmd_sweep(args):
    radii = args.radii
    if len(radii) < 2:
        raise InputError("a sweep needs at least two radii")
    cube = load_input(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for r in radii:
        tag = "inf" if math.isinf(r) else f"{r:g}"
        try:
            rep = cluster_once(cube, args, out / f"r_{tag}", radius=r)
            rows.append([tag, "ok", rep.get("oa", ""), rep.get("aa", ""), rep.get("kappa", ""), ""])
        except (GraphError, EigenError, DensityError, RuntimeError, ValueError) as exc:
            log.warning("radius %s failed: %s", tag, exc)
            rows.append([tag, "error", "", "", "", str(exc)])
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["radius", "status", "oa", "aa", "kappa", "message"])
        w.writerows(rows)
    return EXIT_OK if any(r[1] == "ok" for r in rows) else EXIT_NUMERIC


def cmd_kmeans(args):
    if args.clusters is None:
        raise InputError("kmeans needs an explicit --clusters")
    cube = load_input(args)
    out = Path(args.output)
    labels = kmeans_labels(cube, args.clusters, seed=args.seed)
    write_label_outputs(out, labels)
    report = {
        "params": run_config(args) | {"method": "kmeans"},
        "input_sha256": _file_digest(cube),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "shape": [cube.height, cube.width, cube.bands],
    }
    if cube.gt is not None and np.any(cube.gt > 0):
        report |= evaluate(labels, cube.gt)
    write_json(report, out / "report.json")
    return EXIT_OK


_HEX = re.compile(r"#?[0-9a-fA-F]{6}")


def read_palette(path):
    colors = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or (line.startswith("#") and not _HEX.fullmatch(line)):
            continue
        if "," in line:
            colors.append(tuple(int(v) for v in line.split(",")[:3]))
        else:
            h = line.lstrip("#")
            colors.append(tuple(int(h[i:i + 2], 16) for i in (0, 2, 4)))
    return colors


def render_ppm(labels, palette=None):
    """Binary PPM bytes for a label map; label 0 is black, label i uses palette[i-1]."""
    labels = np.asarray(labels)
    palette = PALETTE16 if palette is None else palette
    top = int(labels.max(initial=0))
    if top > len(palette):
        raise InputError(f"{top} labels exceed the {len(palette)}-colour palette; pass --palette")
    if labels.min(initial=0) < 0:
        raise InputError("negative labels")
    lut = np.zeros((len(palette) + 1, 3), dtype=np.uint8)
    lut[1:] = np.asarray(palette, dtype=np.uint8)
    H, W = labels.shape
    return f"P6\n{W} {H}\n255\n".encode("ascii") + lut[labels].tobytes()


def cmd_render(args):
    path = Path(args.labels)
    if not path.exists():
        raise InputError(f"label file not found: {path}")
    labels = hsi_io.load_labels(path)
    palette = read_palette(args.palette) if args.palette else None
    out = Path(args.output) if args.output else path.with_suffix(".ppm")
    out.write_bytes(render_ppm(labels, palette))
    return EXIT_OK


def cmd_synth(args):
    cube = hsi_io.synth_stripes(args.height, args.width, args.bands, args.classes,
                                args.noise, seed=args.seed)
    hsi_io.save_cube(cube, args.output)
    return EXIT_OK


def _add_input(p):
    p.add_argument("input", help="cube file (.json native, .hdr ENVI, .csv)")
    p.add_argument("--format", choices=["native", "envi", "csv"], default=None)
    p.add_argument("--gt", default=None, help="ground-truth CSV or PGM")
    p.add_argument("--jitter-variance", type=float, default=None,
                   help="add N(0, v) noise before clustering, v in (0, 1e-3]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", default="srdl_out")


def _add_pipeline(p):
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--t", type=int, default=30)
    p.add_argument("--clusters", type=_clusters, default=None, help="K, or 'auto'")
    p.add_argument("--sigma", type=float, default=None, help="fixed kernel scale")
    p.add_argument("--sigma-multiplier", type=float, default=1.0)
    p.add_argument("--kde-neighbors", type=int, default=20)
    p.add_argument("--kde-bandwidth", type=float, default=None)
    p.add_argument("--consensus-radius", type=_radius, default=None)
    p.add_argument("--consensus-threshold", type=float, default=0.5)
    p.add_argument("--m-cap", type=int, default=50)
    p.add_argument("--tau", type=float, default=1e-2)
    p.add_argument("--k-max", type=int, default=20)
    p.add_argument("--allow-disconnected", action="store_true")
    p.add_argument("--dump", action="store_true",
                   help="also write W/P coordinate lists, eigenpairs and decision graph")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="srdl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", parents=[common], help="run the spatially regularized pipeline")
    _add_input(p)
    _add_pipeline(p)
    p.add_argument("--radius", type=_radius, default=math.inf)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("sweep", parents=[common], help="cluster once per spatial radius")
    _add_input(p)
    _add_pipeline(p)
    p.add_argument("--radii", type=lambda s: [_radius(v) for v in s.split(",") if v.strip()],
                   required=True, help="comma-separated radii, e.g. 1,2,4,8,inf")
    p.set_defaults(func=cmd_sweep, radius=None)

    p = sub.add_parser("kmeans", parents=[common], help="K-means baseline on raw spectra")
    _add_input(p)
    p.add_argument("--clusters", type=_clusters, default=None)
    p.set_defaults(func=cmd_kmeans)

    p = sub.add_parser("render", parents=[common], help="label map to PPM")
    p.add_argument("labels")
    p.add_argument("--palette", default=None, help="file of r,g,b or hex lines")
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic stripe cube")
    p.add_argument("--height", type=int, default=40)
    p.add_argument("--width", type=int, default=40)
    p.add_argument("--bands", type=int, default=30)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", default="synth")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, FileNotFoundError, hsi_io.FormatError) as exc:
        print(f"srdl: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (GraphError, EigenError, DensityError, np.linalg.LinAlgError) as exc:
        print(f"srdl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"srdl: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
