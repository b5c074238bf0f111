"""Command-line pipelines: dataset synthesis, PH analysis, diagram tooling,
metric reports, and the verification suites.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O error.
All outputs are deterministic for a fixed config; files are written via a
temp file + atomic rename and embed (tool version, seed, config hash).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, cubical, diagram, field, grid, metrics, verify


# keys that pick where results go or how work is scheduled, not what is computed
_NON_CONTENT_KEYS = {"func", "out", "report", "threads"}


def _config_hash(args: argparse.Namespace) -> str:
    payload = json.dumps(
        {k: v for k, v in sorted(vars(args).items()) if k not in _NON_CONTENT_KEYS},
        sort_keys=True, default=str,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _provenance(args) -> dict:
    return {
        "tool_version": __version__,
        "seed": getattr(args, "seed", None),
        "config_hash": _config_hash(args),
    }


def _atomic_write_text(path, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_move(writer, path) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path, payload: dict) -> None:
    _atomic_write_text(path, json.dumps(payload, indent=1, sort_keys=True) + "\n")


def cmd_gen(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    res = args.res
    entries = []
    if args.preset:
        names = list(field.PRESETS) if args.preset == "all" else [args.preset]
        for name in names:
            if name not in field.PRESETS:
                print("unknown preset %r" % name, file=sys.stderr)
                return 2
            scene, betti = field.PRESETS[name]
            vol = field.rasterize(scene, (res, res, res))
            path = os.path.join(args.out, name + ".vgrd")
            _atomic_move(lambda p, v=vol: grid.write_vgrd(p, v), path)
            entries.append({
                "name": name, "file": os.path.basename(path), "betti": list(betti),
                "scene": field.scene_to_text(scene),
            })
    elif args.scene:
        with open(args.scene, encoding="utf-8") as f:
            scene = field.scene_from_text(f.read())
        vol = field.rasterize(scene, (res, res, res))
        name = os.path.splitext(os.path.basename(args.scene))[0]
        path = os.path.join(args.out, name + ".vgrd")
        _atomic_move(lambda p: grid.write_vgrd(p, vol), path)
        entries.append({"name": name, "file": os.path.basename(path),
                        "scene": field.scene_to_text(scene)})
    else:
        for i in range(args.random_csg):
            scene = field.random_csg(4, args.seed * 10_000 + i)
            vol = field.rasterize(scene, (res, res, res))
            name = "csg-%04d" % i
            path = os.path.join(args.out, name + ".vgrd")
            _atomic_move(lambda p, v=vol: grid.write_vgrd(p, v), path)
            entries.append({"name": name, "file": os.path.basename(path),
                            "scene": field.scene_to_text(scene)})
    manifest = {"provenance": _provenance(args), "resolution": res, "volumes": entries}
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    return 0


def _analyze_one(path, args):
    vol = grid.read_vgrd(path)
    cx = cubical.build_filtration(vol)
    pds = cubical.compute_persistence(cx)
    stem = os.path.splitext(path)[0]
    header = ["tool=%s config=%s" % (__version__, _config_hash(args))]
    _atomic_move(lambda p: cubical.write_diagram(p, pds, extra_header=header), stem + ".pd.tsv")
    if args.svg:
        finite = np.stack([pds.birth, np.where(np.isinf(pds.death),
                                               pds.value_range[1], pds.death)], axis=-1)
        _atomic_write_text(stem + ".pd.svg", diagram.diagram_svg(finite))
    if args.betti is not None:
        b = cubical.betti_at(pds, args.betti)
        print("%s\t%d %d %d" % (os.path.basename(path), *b))
    return stem + ".pd.tsv"


def cmd_analyze(args) -> int:
    paths = list(args.volumes)
    if args.threads > 1:
        with ThreadPoolExecutor(args.threads) as pool:
            list(pool.map(lambda p: _analyze_one(p, args), paths))
    else:
        for p in paths:
            _analyze_one(p, args)
    return 0


def cmd_pd(args) -> int:
    _, rows = cubical.read_diagram(args.diagram)
    dim_rows = rows[rows[:, 0] == args.dim] if len(rows) else rows
    finite = dim_rows[np.isfinite(dim_rows[:, 2])] if len(dim_rows) else dim_rows
    capped = ~np.isfinite(dim_rows[:, 2]) if len(dim_rows) else np.zeros(0, bool)
    cap_value = np.max(rows[np.isfinite(rows[:, 2])][:, 2]) if len(rows) and np.any(
        np.isfinite(rows[:, 2])) else 0.0
    deaths = np.where(np.isfinite(dim_rows[:, 2]), dim_rows[:, 2], cap_value)
    pts = np.stack([dim_rows[:, 1], deaths - dim_rows[:, 1]], axis=-1) if len(dim_rows) \
        else np.empty((0, 2))
    order = np.lexsort((pts[:, 0], -pts[:, 1])) if len(pts) else np.zeros(0, int)
    ps = diagram.PersistencePointSet(args.dim, pts[order], capped[order],
                                     np.zeros(len(pts), bool))
    if args.exclude_capped:
        keep = ~ps.capped
        ps = diagram.PersistencePointSet(args.dim, ps.points[keep], ps.capped[keep],
                                         ps.padded[keep])

    if args.op == "topk":
        out = diagram.top_k(ps, args.k)
        _atomic_move(lambda p: diagram.write_points_tsv(p, out), args.out)
    elif args.op == "edit":
        out = diagram.edit_toward_diagonal(ps, args.index, args.factor)
        _atomic_move(lambda p: diagram.write_points_tsv(p, out), args.out)
    elif args.op == "image":
        img = diagram.persistence_image(ps, (args.pi_res, args.pi_res), sigma=args.pi_sigma)
        _atomic_move(lambda p: grid.write_matrix_vgrd(p, img), args.out)
    elif args.op == "landscape":
        pts_real = ps.real_points()
        if len(pts_real):
            t0 = float(pts_real[:, 0].min())
            t1 = float((pts_real[:, 0] + pts_real[:, 1]).max())
        else:
            t0, t1 = 0.0, 1.0
        t = np.linspace(t0, t1, args.pl_samples)
        levels = diagram.persistence_landscape(ps, args.pl_levels, t)
        _atomic_move(lambda p: diagram.write_landscape_tsv(p, t, levels), args.out)
    return 0


def _load_point_dir(path):
    files = sorted(f for f in os.listdir(path) if f.endswith((".tsv", ".txt", ".xyz")))
    if not files:
        raise ValueError("no point-set files in %s" % path)
    return [np.loadtxt(os.path.join(path, f)).reshape(-1, 3) for f in files]


def cmd_metrics(args) -> int:
    report = {"provenance": _provenance(args), "metrics": {}}
    if args.fid_g and args.fid_r:
        feats_g = grid.read_matrix_vgrd(args.fid_g)
        feats_r = grid.read_matrix_vgrd(args.fid_r)
        report["metrics"]["fid"] = metrics.fid(
            metrics.FeatureStats.from_features(feats_g),
            metrics.FeatureStats.from_features(feats_r),
        )
    if args.generated and args.reference:
        s_g = _load_point_dir(args.generated)
        s_r = _load_point_dir(args.reference)
        which = args.metric
        if which in ("chamfer", "all"):
            report["metrics"]["chamfer_first_pair"] = metrics.chamfer(s_g[0], s_r[0])
        if which in ("1nna", "all"):
            report["metrics"]["one_nna_cd"] = metrics.one_nna(s_g, s_r, "cd")
        if which in ("cov", "all"):
            report["metrics"]["coverage_cd"] = metrics.coverage(s_g, s_r, "cd")
        if which in ("emd", "all") and all(len(a) == len(s_g[0]) for a in s_g + s_r):
            report["metrics"]["one_nna_emd"] = metrics.one_nna(s_g, s_r, "emd")
    _write_json(args.out, report)
    return 0


def cmd_verify(args) -> int:
    results = verify.run_suites(args.only)
    report = {"provenance": _provenance(args), "suites": results}
    for r in results:
        print("%-10s %s  %s" % (r["name"], "PASS" if r["passed"] else "FAIL", r["detail"]))
    if args.report:
        _write_json(args.report, report)
    return 0 if all(r["passed"] for r in results) else 1


def cmd_verify_kernels(args) -> int:
    args.only = ["kernels", "sampler"]
    return cmd_verify(args)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="topoforge")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="synthesize SDF volumes")
    g.add_argument("--preset", help="preset name or 'all'")
    g.add_argument("--scene", help="scene s-expression file")
    g.add_argument("--random-csg", type=int, default=0, help="number of random CSG scenes")
    g.add_argument("--res", type=int, default=64)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    a = sub.add_parser("analyze", help="persistence diagrams of VGRD volumes")
    a.add_argument("volumes", nargs="+")
    a.add_argument("--svg", action="store_true")
    a.add_argument("--betti", type=float, default=None, help="print Betti numbers at t")
    a.add_argument("--threads", type=int, default=1)
    a.set_defaults(func=cmd_analyze)

    p = sub.add_parser("pd", help="edit / vectorize persistence diagrams")
    p.add_argument("op", choices=["topk", "edit", "image", "landscape"])
    p.add_argument("diagram")
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--factor", type=float, default=1.0)
    p.add_argument("--pi-res", type=int, default=32)
    p.add_argument("--pi-sigma", type=float, default=0.02)
    p.add_argument("--pl-levels", type=int, default=3)
    p.add_argument("--pl-samples", type=int, default=128)
    p.add_argument("--exclude-capped", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pd)

    m = sub.add_parser("metrics", help="generative-evaluation metrics")
    m.add_argument("--generated", help="directory of point-set TSV files")
    m.add_argument("--reference", help="directory of point-set TSV files")
    m.add_argument("--metric", choices=["chamfer", "emd", "1nna", "cov", "all"], default="all")
    m.add_argument("--fid-g", help="feature matrix (planar VGRD) for generated set")
    m.add_argument("--fid-r", help="feature matrix (planar VGRD) for reference set")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_metrics)

    v = sub.add_parser("verify", help="run invariant suites")
    v.add_argument("--only", nargs="*", default=None)
    v.add_argument("--report", help="write JSON report here")
    v.set_defaults(func=cmd_verify)

    vk = sub.add_parser("verify-kernels", help="run the kernel invariant suites")
    vk.add_argument("--report", help="write JSON report here")
    vk.set_defaults(func=cmd_verify_kernels)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, IndexError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print("i/o error: %s" % exc, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
