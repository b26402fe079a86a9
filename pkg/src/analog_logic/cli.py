"""Command-line surface: data generation, training, the three inference
procedures, heatmap emission, and the fill-in-the-blank benchmark.

Artifacts are written atomically (temp file + rename) and depend only on
the flags and seed, so identical invocations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import inference, neural, scenes
from .predicates import TabularProvider, UniformProvider
from .statement import parse_statement, validate

CACHE_ENV = "CALM_CACHE_DIR"


def _atomic_write(path: str, data: bytes):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(doc) -> bytes:
    return (json.dumps(doc, sort_keys=True, indent=1) + "\n").encode("utf-8")


def _resolve_checkpoint(path: str) -> str:
    if os.path.exists(path):
        return path
    cache = os.environ.get(CACHE_ENV)
    if cache:
        alt = os.path.join(cache, path)
        if os.path.exists(alt):
            return alt
    return path


def load_provider(path: str, k: int = 2):
    """Load a provider: an MLP checkpoint, a tabular factor file, or the
    literal name 'uniform'."""
    if path == "uniform":
        return UniformProvider(k)
    path = _resolve_checkpoint(path)
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    kind = doc.get("provider", "tabular")
    if kind == "mlp":
        return neural.load_checkpoint(path)
    if kind == "tabular":
        return TabularProvider(doc.get("records", doc if isinstance(doc, list) else []))
    raise ValueError(f"unknown provider kind {kind!r} in {path}")


def _load_statement(args, bundle):
    text = args.statement or bundle.get("statement")
    if not text:
        raise ValueError("no statement given (use --statement or a scene file with one)")
    return validate(parse_statement(text), bundle["scene"])


# ---------------------------------------------------------------------------
# Commands


def cmd_gen_data(args):
    out = args.out
    os.makedirs(out, exist_ok=True)
    if args.demo:
        _write_demo(out, args.k)
        return 0
    cfg = scenes.GeneratorConfig(k=args.k)
    records = scenes.build_training_records(args.scenes, args.seed, cfg)
    tmp_records = []
    for rec in records:
        tmp_records.append(json.dumps(rec.to_json(), sort_keys=True))
    _atomic_write(os.path.join(out, "records.jsonl"), ("\n".join(tmp_records) + "\n").encode())
    meta = {
        "width": cfg.width,
        "height": cfg.height,
        "k": cfg.k,
        "scenes": args.scenes,
        "seed": args.seed,
        "records": len(records),
        "embedder": neural.EMBEDDER_VERSION,
    }
    _atomic_write(os.path.join(out, "meta.json"), _dump_json(meta))
    print(f"wrote {len(records)} decision records to {out}/records.jsonl")
    return 0


def _write_demo(out, k):
    """A small hand-specified scene + tabular factors for trying the
    eval/maximize/sample/heatmap commands without training."""
    demo_scene = scenes.Scene(
        8, 8,
        [
            scenes.SceneObject("oven", "oven", "constant", {"x": 4, "y": 2, "w": 2, "h": 2}),
            scenes.SceneObject("mw", "microwave", "variable", {"w": 2, "h": 2},
                               {"x": (0, 3), "y": (0, 3)}),
        ],
        bands={"wall": (0, 2), "counter": (3, 5), "floor": (6, 7)},
        k=k,
    )
    doc = scenes.scene_file_json(
        demo_scene,
        statement='category(mw; "Microwave", img) & leftof(mw, oven; img)',
        grounding={("mw", "x"): 2, ("mw", "y"): 0},
    )
    _atomic_write(os.path.join(out, "demo_scene.json"), _dump_json(doc))
    records = [
        {"pred": "leftof", "attr": "x", "path": [], "factors": [0.2, 0.8]},
        {"pred": "leftof", "attr": "x", "path": [0], "factors": [0.5, 0.5]},
        {"pred": "leftof", "attr": "x", "path": [1], "factors": [0.8, 0.2]},
        {"pred": "category", "attr": "x", "path": [], "factors": [0.4, 0.6]},
        {"pred": "category", "attr": "x", "path": [0], "factors": [0.5, 0.5]},
        {"pred": "category", "attr": "x", "path": [1], "factors": [0.5, 0.5]},
        {"pred": "category", "attr": "y", "path": [], "factors": [0.75, 0.25]},
        {"pred": "category", "attr": "y", "path": [0], "factors": [0.9, 0.1]},
        {"pred": "category", "attr": "y", "path": [1], "factors": [0.5, 0.5]},
    ]
    _atomic_write(os.path.join(out, "demo_factors.json"),
                  _dump_json({"provider": "tabular", "records": records}))
    print(f"wrote demo_scene.json and demo_factors.json to {out}")


def cmd_train(args):
    data_dir = args.data
    records_path = os.path.join(data_dir, "records.jsonl") if os.path.isdir(data_dir) else data_dir
    meta_path = os.path.join(os.path.dirname(records_path), "meta.json")
    with open(meta_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    records = neural.load_records(records_path)
    cfg = neural.TrainConfig(
        learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size, seed=args.seed
    )
    ranges = neural.attribute_ranges(meta["width"], meta["height"])
    report = neural.TrainReport()
    models = neural.train(records, cfg, k=meta["k"], ranges=ranges, report=report)
    out = args.out
    if not os.path.dirname(out) and os.environ.get(CACHE_ENV):
        out = os.path.join(os.environ[CACHE_ENV], out)
    neural.save_checkpoint(models, ranges, meta["k"], out, cfg)
    for pred in sorted(report.final_loss):
        print(f"{pred}: cross-entropy {report.initial_loss[pred]:.4f} -> {report.final_loss[pred]:.4f}")
    print(f"saved checkpoint to {out}")
    return 0


def cmd_eval(args):
    bundle = scenes.load_scene_file(args.scene)
    stmt = _load_statement(args, bundle)
    provider = load_provider(args.checkpoint, bundle["scene"].k)
    grounding = bundle.get("grounding") or {}
    truth = inference.evaluate(stmt, grounding, provider)
    print(f"{truth:.10g}")
    return 0


def cmd_maximize(args):
    bundle = scenes.load_scene_file(args.scene)
    stmt = _load_statement(args, bundle)
    provider = load_provider(args.checkpoint, bundle["scene"].k)
    result = inference.maximize(stmt, provider)
    for (ent, attr), v in result.grounding.items():
        print(f"{ent}.{attr} = {v}")
    print(f"truth = {result.truth:.10g}")
    if result.pruned:
        spans = ", ".join(
            f"{p.pair[0]}.{p.pair[1]}[{p.interval[0]},{p.interval[1]}]@{p.bound:.6g}" for p in result.pruned
        )
        print(f"pruned: {spans}")
    return 0


def cmd_sample(args):
    bundle = scenes.load_scene_file(args.scene)
    stmt = _load_statement(args, bundle)
    provider = load_provider(args.checkpoint, bundle["scene"].k)
    rng = np.random.default_rng(args.seed)
    if args.mode == "approx":
        samples = inference.sample_statement_approx(
            stmt, provider, args.proposals, rng, n_samples=args.samples
        )
    else:
        samples = inference.sample_statement_exact(stmt, provider, rng, n_samples=args.samples)
    if args.samples == 1:
        samples = [samples]
    lines = []
    for g in samples:
        by_ent = {}
        for (ent, attr), v in g.items():
            by_ent.setdefault(ent, {})[attr] = int(v)
        lines.append(json.dumps({e: dict(sorted(v.items())) for e, v in sorted(by_ent.items())}, sort_keys=True))
    payload = "\n".join(lines) + "\n"
    if args.out:
        _atomic_write(args.out, payload.encode())
        print(f"wrote {len(samples)} samples to {args.out}")
    else:
        sys.stdout.write(payload)
    return 0


def compute_heatmap(stmt, provider, var_id: str, resolution: int) -> np.ndarray:
    """Statement truth per grid cell, the cell's pixel center standing in
    for the variable entity's (x, y)."""
    scene = stmt.scene
    grid = np.zeros((resolution, resolution))
    for i in range(resolution):
        py = ((2 * i + 1) * scene.height) // (2 * resolution)
        for j in range(resolution):
            px = ((2 * j + 1) * scene.width) // (2 * resolution)
            grid[i, j] = inference.evaluate(stmt, {(var_id, "x"): px, (var_id, "y"): py}, provider)
    return grid


def cmd_heatmap(args):
    bundle = scenes.load_scene_file(args.scene)
    scene = bundle["scene"]
    variables = [o for o in scene.objects if o.kind == "variable"]
    if len(variables) != 1:
        raise ValueError(f"heatmaps need exactly one variable entity, found {len(variables)}")
    var = variables[0]
    probed = [
        scenes.SceneObject(o.id, o.category, o.kind,
                           {**o.box, "w": args.probe_w, "h": args.probe_h}, o.domains)
        if o.id == var.id else o
        for o in scene.objects
    ]
    bundle["scene"] = scenes.Scene(scene.width, scene.height, probed, scene.bands, scene.k)
    stmt = _load_statement(args, bundle)
    provider = load_provider(args.checkpoint, scene.k)
    grid = compute_heatmap(stmt, provider, var.id, args.resolution)

    os.makedirs(args.out, exist_ok=True)
    csv_lines = [",".join(f"{v:.9g}" for v in row) for row in grid]
    _atomic_write(os.path.join(args.out, "heatmap.csv"), ("\n".join(csv_lines) + "\n").encode())
    pgm = bytearray(f"P5\n{args.resolution} {args.resolution}\n255\n".encode("ascii"))
    pgm.extend(np.round(grid * 255).astype(np.uint8).tobytes())
    _atomic_write(os.path.join(args.out, "heatmap.pgm"), bytes(pgm))
    meta = {
        "statement": stmt.pretty(),
        "scene": args.scene,
        "entity": var.id,
        "resolution": args.resolution,
        "probe": {"w": args.probe_w, "h": args.probe_h},
    }
    _atomic_write(os.path.join(args.out, "heatmap.json"), _dump_json(meta))
    print(f"wrote heatmap.csv, heatmap.pgm, heatmap.json to {args.out}")
    return 0


def cmd_bench_fitb(args):
    provider = load_provider(args.checkpoint, args.k)
    fractions = [float(x) for x in args.f.split(",")]
    started = time.perf_counter()
    report = scenes.benchmark_fitb(args.scenes, fractions, provider, args.seed,
                                   scenes.GeneratorConfig(k=args.k))
    elapsed = time.perf_counter() - started
    os.makedirs(args.out, exist_ok=True)
    _atomic_write(os.path.join(args.out, "bench_report.json"), _dump_json(report))
    print(f"{'f':>5} {'calm obj':>9} {'calm scn':>9} {'fol obj':>8} {'fol scn':>8}")
    for key, entry in report["fractions"].items():
        print(
            f"{key:>5} {entry['calm']['object_accuracy']:>9.4f} {entry['calm']['scene_accuracy']:>9.4f}"
            f" {entry['fol']['object_accuracy']:>8.4f} {entry['fol']['scene_accuracy']:>8.4f}"
        )
    print(f"report written to {args.out}/bench_report.json", file=sys.stderr)
    print(f"elapsed: {elapsed:.1f}s", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="analog-logic",
                                description="Analog-truth logic over domain trees")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate scenes and training records")
    g.add_argument("--out", required=True)
    g.add_argument("--scenes", type=int, default=200)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--demo", action="store_true", help="write a small tabular demo instead")
    g.set_defaults(fn=cmd_gen_data)

    t = sub.add_parser("train", help="train truth-factor networks")
    t.add_argument("--data", required=True, help="gen-data output dir or records.jsonl")
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--epochs", type=int, default=200)
    t.add_argument("--batch-size", type=int, default=128)
    t.add_argument("--lr", type=float, default=2e-4)
    t.set_defaults(fn=cmd_train)

    for name, fn in (("eval", cmd_eval), ("maximize", cmd_maximize)):
        c = sub.add_parser(name)
        c.add_argument("--scene", required=True)
        c.add_argument("--statement", default=None)
        c.add_argument("--checkpoint", required=True)
        c.add_argument("--seed", type=int, default=0)
        c.set_defaults(fn=fn)

    s = sub.add_parser("sample", help="truth-proportional sampling")
    s.add_argument("--scene", required=True)
    s.add_argument("--statement", default=None)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--samples", type=int, default=1)
    mode = s.add_mutually_exclusive_group()
    mode.add_argument("--exact", dest="mode", action="store_const", const="exact")
    mode.add_argument("--approx", dest="mode", action="store_const", const="approx")
    s.add_argument("--proposals", type=int, default=64)
    s.add_argument("--out", default=None)
    s.set_defaults(fn=cmd_sample, mode="exact")

    h = sub.add_parser("heatmap", help="statement truth per grid cell")
    h.add_argument("--scene", required=True)
    h.add_argument("--statement", default=None)
    h.add_argument("--checkpoint", required=True)
    h.add_argument("--resolution", type=int, default=32)
    h.add_argument("--probe-w", type=int, default=16)
    h.add_argument("--probe-h", type=int, default=16)
    h.add_argument("--out", required=True)
    h.add_argument("--seed", type=int, default=0)
    h.set_defaults(fn=cmd_heatmap)

    b = sub.add_parser("bench-fitb", help="fill-in-the-blank benchmark")
    b.add_argument("--scenes", type=int, default=500)
    b.add_argument("--f", default="0,0.5,1.0")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--k", type=int, default=2)
    b.add_argument("--checkpoint", required=True)
    b.add_argument("--out", required=True)
    b.set_defaults(fn=cmd_bench_fitb)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
