"""Command-line pipeline: ``exmoves <subcommand> --config cfg.json ...``.

Failures print a single line ``error: <Kind>: <message>`` on stderr and exit 1.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .bench import bench_sliding
from .classifier import rfe_rank, select_c, train_ovr
from .codebook import fit_codebook, quantize
from .config import PipelineConfig
from .core import QuantizedVideo, Volume, histogram
from .descriptor import build_pyramid, extract_descriptor
from .errors import ExmovesError, FormatError
from .exemplar import ActiveEntry, ActiveSet, calibrate, train_exmove
from .synthetic import gen_synthetic


def _pmap(fn, items, workers: int):
    """Order-preserving map; results do not depend on the worker count."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _derived_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _videos_by_id(manifest):
    return {e["id"]: e for e in manifest}


def _load(entry) -> QuantizedVideo:
    return io.read_qpts(entry["path"], entry["id"])


# --- gen-synthetic ----------------------------------------------------------


def cmd_gen_synthetic(cfg: PipelineConfig, args) -> None:
    out = Path(args.out_dir)
    (out / "videos").mkdir(parents=True, exist_ok=True)
    ds = gen_synthetic(cfg.synthetic)
    entries = []
    exemplars = set(ds.exemplars)
    for i, (v, lab, vol, split) in enumerate(zip(ds.videos, ds.labels, ds.volumes, ds.splits)):
        io.write_qpts(out / "videos" / f"{v.id}.qpts", v)
        entries.append({
            "id": v.id, "path": f"videos/{v.id}.qpts", "label": lab, "split": split,
            "volume": list(vol.origin + vol.extent), "exemplar": i in exemplars,
        })
    io.write_manifest(out / "manifest.json", entries)
    print(f"wrote {len(entries)} videos ({len(exemplars)} exemplars) to {out}")


# --- train-exmove -----------------------------------------------------------


def _train_one(job):
    cfg, entry, neg_entries, seed = job
    positive = _load(entry)
    negatives = [_load(e) for e in neg_entries]
    vol = Volume(entry["volume"][:3], entry["volume"][3:])
    model, active = train_exmove(positive, vol, negatives, cfg.exmove_params(seed), exemplar_id=entry["id"])
    return model, active.entries


def cmd_train_exmove(cfg: PipelineConfig, args) -> None:
    manifest = io.read_manifest(args.manifest)
    chosen = [e for e in manifest if e["exemplar"]]
    if args.exemplar:
        wanted = set(args.exemplar)
        chosen = [e for e in chosen if e["id"] in wanted]
        missing = wanted - {e["id"] for e in chosen}
        if missing:
            raise FormatError(f"exemplars not in manifest: {sorted(missing)}")
    if not chosen:
        raise FormatError("manifest lists no exemplar videos")
    jobs = []
    for e in chosen:
        if e["volume"] is None:
            raise FormatError(f"exemplar {e['id']!r} has no annotated volume")
        negs = [n for n in manifest if n["label"] != e["label"] and n["split"] == "train"]
        index = manifest.index(e)
        jobs.append((cfg, e, negs, _derived_seed(cfg.seed, index)))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for (_, e, _, _), (model, entries) in zip(jobs, _pmap(_train_one, jobs, cfg.workers)):
        io.write_model(out / f"{e['id']}.model", model)
        io.write_active(out / f"{e['id']}.active", entries)
        meta = model.training_meta
        print(f"{e['id']}: iterations={meta['iterations']} converged={meta['converged']} "
              f"active={meta['active_size']}")


# --- calibrate --------------------------------------------------------------


def _calibrate_one(job):
    model_path, active_path, by_id = job
    model = io.read_model(model_path)
    active = ActiveSet()
    cache = {}
    for vid, vol, label in io.read_active(active_path):
        if vid not in cache:
            if vid not in by_id:
                raise FormatError(f"{active_path}: video {vid!r} is not in the manifest")
            cache[vid] = _load(by_id[vid])
        active.add(ActiveEntry(vid, vol, label, histogram(cache[vid], vol).normalized()))
    return calibrate(model, active)


def cmd_calibrate(cfg: PipelineConfig, args) -> None:
    by_id = _videos_by_id(io.read_manifest(args.manifest))
    models_dir = Path(args.models_dir)
    if args.models:
        names = args.models
    else:
        names = [e["id"] for e in by_id.values() if e["exemplar"]]
    jobs = [(models_dir / f"{n}.model", models_dir / f"{n}.active", by_id) for n in names]
    bank = _pmap(_calibrate_one, jobs, cfg.workers)
    io.write_bank(args.out, bank)
    for m in bank:
        print(f"{m.exemplar_id}: alpha={m.platt[0]:.4g} beta={m.platt[1]:.4g}")


# --- extract ----------------------------------------------------------------


def _extract_one(job):
    cfg, bank, path, vid, bank_id = job
    video = io.read_qpts(path, vid)
    pyramid = build_pyramid(video.dims, cfg.pyramid_levels, cfg.scales)
    return extract_descriptor(video, bank, pyramid, cfg.extract_stride, pool=cfg.pool, bank_id=bank_id)


def _select_videos(args):
    if args.manifest:
        entries = io.read_manifest(args.manifest)
        if args.split != "all":
            entries = [e for e in entries if e["split"] == args.split]
        return [(e["path"], e["id"]) for e in entries]
    return [(p, Path(p).stem) for p in args.videos]


def cmd_extract(cfg: PipelineConfig, args) -> None:
    bank = io.read_bank(args.bank)
    bank_id = Path(args.bank).stem
    videos = _select_videos(args)
    if not videos:
        raise FormatError("no videos selected for extraction")
    jobs = [(cfg, bank, p, vid, bank_id) for p, vid in videos]
    descs = _pmap(_extract_one, jobs, cfg.workers)
    layout = (len(bank), len(cfg.scales), build_pyramid((1, 1, 1), cfg.pyramid_levels).n_cells)
    io.write_descriptors(args.out, descs, layout, bank_id)
    n_a, n_s, n_p = layout
    print(f"descriptor length {n_a * n_s * n_p} = {n_a} x {n_s} x {n_p} for {len(descs)} videos")


# --- classifier -------------------------------------------------------------


def _labelled(desc_path, manifest_path):
    descs = io.read_descriptors(desc_path)
    by_id = _videos_by_id(io.read_manifest(manifest_path)) if manifest_path else {}
    labels = []
    for d in descs:
        if d.video_id not in by_id:
            raise FormatError(f"{desc_path}: video {d.video_id!r} has no label in the manifest")
        labels.append(by_id[d.video_id]["label"])
    X = np.vstack([d.values for d in descs]) if descs else np.zeros((0, 0))
    return descs, X, labels


def cmd_train_classifier(cfg: PipelineConfig, args) -> None:
    _, X, labels = _labelled(args.descriptors, args.manifest)
    C = cfg.classifier_C
    meta = {}
    if args.select_c:
        C, record = select_c(X, labels, cfg.classifier_C_grid, cfg.cv_folds, cfg.seed)
        meta["cv"] = {repr(k): v for k, v in record.items()}
    bank = train_ovr(X, labels, C)
    bank.training_meta.update(meta)
    io.write_classifier(args.out, bank)
    print(f"trained {len(bank.classes)} one-vs-rest classifiers, C={C:g}, "
          f"training accuracy {bank.accuracy(X, labels):.4f}")


def cmd_predict(cfg: PipelineConfig, args) -> None:
    bank = io.read_classifier(args.classifier)
    descs = io.read_descriptors(args.descriptors)
    X = np.vstack([d.values for d in descs])
    scores = bank.decision(X)
    pred = [bank.classes[i] for i in np.argmax(scores, axis=1)]
    lines = ["# video predicted " + " ".join(bank.classes)]
    for d, p, s in zip(descs, pred, scores):
        lines.append(f"{d.video_id} {p} " + " ".join(repr(float(v)) for v in s))
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if args.manifest:
        by_id = _videos_by_id(io.read_manifest(args.manifest))
        truth = [by_id[d.video_id]["label"] for d in descs]
        acc = float(np.mean([a == b for a, b in zip(pred, truth)]))
        print(f"accuracy {acc:.4f} on {len(descs)} videos")
    else:
        print(f"predicted {len(descs)} videos")


def cmd_rfe(cfg: PipelineConfig, args) -> None:
    descs, X, labels = _labelled(args.descriptors, args.manifest)
    heldout = None
    if args.heldout:
        _, hX, hy = _labelled(args.heldout, args.manifest)
        heldout = (hX, hy)
    layout = descs[0].layout
    ids = args.exemplar_ids.split(",") if args.exemplar_ids else None
    trace = rfe_rank(X, labels, layout, cfg.classifier_C, args.survivors, heldout=heldout, exemplar_ids=ids)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump({
            "elimination_order": trace.elimination_order,
            "accuracy_curve": trace.accuracy_curve,
            "remaining": trace.remaining,
            "survivors": trace.survivors,
            "full_accuracy": trace.full_accuracy,
        }, fh, indent=1)
        fh.write("\n")
    print(f"eliminated {len(trace.elimination_order)} exemplars; survivors: {' '.join(trace.survivors)}")


# --- quantize ---------------------------------------------------------------


def cmd_quantize(cfg: PipelineConfig, args) -> None:
    feats = [io.read_features(p) for p in args.features]
    K = len(feats[0][1])
    if any(len(f[1]) != K for f in feats):
        raise FormatError("feature files disagree on the number of channels")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.codebooks:
        books = [io.read_codebook(p) for p in args.codebooks]
        if len(books) != K:
            raise FormatError(f"need {K} codebooks, got {len(books)}")
    else:
        books = []
        for k in range(K):
            vecs = np.vstack([f[4][k][1] for f in feats])
            cb = fit_codebook(vecs, cfg.codebook_size, _derived_seed(cfg.seed, k), cfg.kmeans_max_iters, channel=k)
            io.write_codebook(out / f"codebook_{k}.txt", cb)
            books.append(cb)
    for path, (dims, _, xyz, chan, per_channel) in zip(args.features, feats):
        codes = np.zeros(len(xyz), dtype=np.int64)
        for k, (rows, vecs) in enumerate(per_channel):
            if len(rows):
                codes[rows] = quantize(books[k], vecs)
        pts = np.column_stack([xyz, chan, codes]) if len(xyz) else np.zeros((0, 5), dtype=np.int64)
        video = QuantizedVideo(dims, tuple(b.size for b in books), pts, Path(path).stem)
        io.write_qpts(out / f"{Path(path).stem}.qpts", video)
    print(f"quantized {len(feats)} files with codebook sizes {[b.size for b in books]}")


# --- bench / config ---------------------------------------------------------


def cmd_bench_sliding(cfg: PipelineConfig, args) -> None:
    res = bench_sliding(tuple(args.dims), tuple(args.extent), tuple(args.stride), args.density,
                        seed=cfg.seed, repeats=args.repeats)
    print(f"{'path':<10}{'seconds':>12}")
    print(f"{'naive':<10}{res['naive_seconds']:>12.4f}")
    print(f"{'integral':<10}{res['integral_seconds']:>12.4f}")
    print(f"positions {res['positions']}  mean points/volume {res['mean_points_per_volume']:.1f}")
    print(f"speedup {res['speedup']:.1f}x  scores match: {res['scores_match']}")
    if args.out:
        Path(args.out).write_text(json.dumps(res, indent=1) + "\n", encoding="utf-8")


def cmd_init_config(args) -> None:
    PipelineConfig(seed=args.seed).save(args.out)
    print(f"wrote {args.out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="exmoves", description="EXMOVE action-recognition pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="pipeline config JSON")
        return sp

    sp = sub.add_parser("init-config", help="write a default config file")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("gen-synthetic", "write a planted-motif synthetic dataset")
    sp.add_argument("--out-dir", required=True)

    sp = add("quantize", "fit codebooks and quantize raw feature files to .qpts")
    sp.add_argument("--features", nargs="+", required=True)
    sp.add_argument("--codebooks", nargs="*", help="existing codebook files, one per channel")
    sp.add_argument("--out-dir", required=True)

    sp = add("train-exmove", "train exemplar SVMs listed in a manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--exemplar", nargs="*", help="restrict to these exemplar ids")

    sp = add("calibrate", "fit Platt sigmoids and assemble a bank")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--models-dir", required=True)
    sp.add_argument("--models", nargs="*", help="model names (default: manifest exemplars)")
    sp.add_argument("--out", required=True)

    sp = add("extract", "compute EXMOVE descriptors")
    sp.add_argument("--bank", required=True)
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest")
    src.add_argument("--videos", nargs="+")
    sp.add_argument("--split", default="all", choices=["train", "test", "all"])
    sp.add_argument("--out", required=True)

    sp = add("train-classifier", "train one-vs-rest linear SVMs on descriptors")
    sp.add_argument("--descriptors", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--select-c", action="store_true", help="cross-validate C over the config grid")
    sp.add_argument("--out", required=True)

    sp = add("predict", "classify descriptors")
    sp.add_argument("--classifier", required=True)
    sp.add_argument("--descriptors", required=True)
    sp.add_argument("--manifest", help="report accuracy against these labels")
    sp.add_argument("--out", required=True)

    sp = add("rfe", "rank exemplars by recursive elimination")
    sp.add_argument("--descriptors", required=True)
    sp.add_argument("--heldout")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--survivors", type=int, required=True)
    sp.add_argument("--exemplar-ids", help="comma-separated ids in bank order")
    sp.add_argument("--out", required=True)

    sp = add("bench-sliding", "time integral-video vs naive sliding scoring")
    sp.add_argument("--dims", type=int, nargs=3, default=[64, 64, 64])
    sp.add_argument("--extent", type=int, nargs=3, default=[16, 16, 16])
    sp.add_argument("--stride", type=int, nargs=3, default=[2, 2, 3])
    sp.add_argument("--density", type=float, default=0.05)
    sp.add_argument("--repeats", type=int, default=1)
    sp.add_argument("--out")
    return p


COMMANDS = {
    "gen-synthetic": cmd_gen_synthetic,
    "quantize": cmd_quantize,
    "train-exmove": cmd_train_exmove,
    "calibrate": cmd_calibrate,
    "extract": cmd_extract,
    "train-classifier": cmd_train_classifier,
    "predict": cmd_predict,
    "rfe": cmd_rfe,
    "bench-sliding": cmd_bench_sliding,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "init-config":
            cmd_init_config(args)
        else:
            cfg = PipelineConfig.load(args.config)
            COMMANDS[args.command](cfg, args)
    except (ExmovesError, OSError, ValueError, KeyError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
