"""Command-line entry point: ingestion, preview, folds, sampling, anchor
search, tiling, evaluation and the end-to-end pipeline.

Every stochastic command requires ``--seed``; identical invocations produce
byte-identical artifacts.  Artifacts are written atomically (temp file +
rename) and each pipeline run emits a provenance record sufficient to
reproduce it: full config, seed, input digests and library versions.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .anchors import AnchorConfig, DeParams, optimize_scales
from .augment import PolicyConfig, TransformKind, augment, render_preview_grid
from .core import Label
from .errors import SchemaError, ToolkitError
from .evaluation import (
    MatchConfig,
    evaluate_dataset_at_threshold,
    optimize_threshold_dataset,
)
from .io_formats import atomic_write_text, dump_json, read_detections_jsonl, write_detections_jsonl
from .raster import load_image, save_image
from .rng import RandomStream
from .sampler import DatasetManifest, PatchSpec, load_manifest, make_folds, sample_patch
from .tiler import TilingConfig, make_ground_truth_detector, run_tiled

__all__ = ["RunConfig", "main"]


@dataclass(frozen=True)
class MockDetectorConfig:
    dropout: float = 0.0
    false_positive_rate: float = 0.0
    center_jitter: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    seed: int
    paths: dict = field(default_factory=dict)  # {"manifest": ..., "output": ...}
    policy: PolicyConfig = PolicyConfig()
    patch: PatchSpec = PatchSpec()
    tiling: TilingConfig = TilingConfig()
    match: MatchConfig = MatchConfig()
    de: DeParams = DeParams()
    detector: MockDetectorConfig = MockDetectorConfig()
    fold: int = 0
    n_folds: int = 5
    dedup_radius: float = 30.0
    workers: int = 1

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "paths": dict(self.paths),
            "policy": self.policy.to_dict(),
            "patch": asdict(self.patch),
            "tiling": asdict(self.tiling),
            "match": {"radius": self.match.radius, "class_filter": self.match.class_filter.value},
            "de": {
                "population": self.de.population,
                "mutation": list(self.de.mutation),
                "crossover": self.de.crossover,
                "max_generations": self.de.max_generations,
                "tolerance": self.de.tolerance,
                "bounds": [list(b) for b in self.de.bounds],
            },
            "detector": asdict(self.detector),
            "fold": self.fold,
            "n_folds": self.n_folds,
            "dedup_radius": self.dedup_radius,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        de = data.get("de", {})
        return cls(
            seed=int(data["seed"]),
            paths=dict(data.get("paths", {})),
            policy=PolicyConfig.from_dict(data.get("policy", {})),
            patch=PatchSpec(**data.get("patch", {})),
            tiling=TilingConfig(**data.get("tiling", {})),
            match=MatchConfig(
                radius=data.get("match", {}).get("radius", 30.0),
                class_filter=Label(data.get("match", {}).get("class_filter", "mitotic_figure")),
            ),
            de=DeParams(
                population=de.get("population", 15),
                mutation=tuple(de.get("mutation", (0.5, 1.0))),
                crossover=de.get("crossover", 0.7),
                max_generations=de.get("max_generations", 200),
                tolerance=de.get("tolerance", 1e-4),
                bounds=tuple(tuple(b) for b in de.get("bounds", ((0.4, 3.0),) * 3)),
            ),
            detector=MockDetectorConfig(**data.get("detector", {})),
            fold=int(data.get("fold", 0)),
            n_folds=int(data.get("n_folds", 5)),
            dedup_radius=float(data.get("dedup_radius", 30.0)),
            workers=int(data.get("workers", 1)),
        )


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _manifest_report(manifest: DatasetManifest) -> dict:
    per_scanner: dict[str, int] = {}
    for im in manifest.images:
        per_scanner[im.scanner] = per_scanner.get(im.scanner, 0) + 1
    per_class: dict[str, int] = {}
    for ann in manifest.annotations:
        per_class[ann.label.value] = per_class.get(ann.label.value, 0) + 1
    missing = sorted(
        im.id for im in manifest.images if not manifest.image_path(im.id).exists()
    )
    return {
        "images": len(manifest.images),
        "images_per_scanner": per_scanner,
        "annotations": len(manifest.annotations),
        "annotations_per_class": per_class,
        "missing_image_files": missing,
    }


# -- commands ----------------------------------------------------------------


def cmd_ingest(args) -> int:
    manifest = load_manifest(args.manifest)
    report = _manifest_report(manifest)
    if args.output:
        atomic_write_text(args.output, dump_json(report))
    print(dump_json(report), end="")
    for image_id in report["missing_image_files"]:
        print(f"warning: image file missing for id {image_id}", file=sys.stderr)
    if not manifest.annotations:
        print("warning: manifest has no annotations", file=sys.stderr)
    return 0


def cmd_preview(args) -> int:
    image = load_image(args.image)
    kinds = (
        [TransformKind(k) for k in args.kinds.split(",")]
        if args.kinds
        else list(TransformKind)
    )
    strengths = [float(s) for s in args.strengths.split(",")]
    grid = render_preview_grid(image, kinds, strengths, RandomStream(args.seed).derive(0x9E1D))
    save_image(grid, args.output)
    print(f"wrote {args.output} ({grid.width}x{grid.height}, {len(kinds)} kinds x {len(strengths)} strengths)")
    return 0


def cmd_split_folds(args) -> int:
    manifest = load_manifest(args.manifest)
    folds = make_folds(manifest, RandomStream(args.seed).derive(0xF01D), n_folds=args.folds)
    payload = {"seed": args.seed, "n_folds": args.folds, "folds": [f.to_dict() for f in folds]}
    atomic_write_text(args.output, dump_json(payload))
    print(f"wrote {args.output}")
    return 0


def _load_split(path: str, fold: int, which: str) -> set[int]:
    data = json.loads(Path(path).read_text())
    for f in data["folds"]:
        if f["fold_index"] == fold:
            return set(f[which])
    raise SchemaError(f"{path}: no fold {fold}")


def cmd_sample(args) -> int:
    manifest = load_manifest(args.manifest)
    if args.split_file:
        split = _load_split(args.split_file, args.fold, args.which)
    else:
        split = {im.id for im in manifest.images}
    spec = PatchSpec(size=args.patch_size, stratify_classes=args.stratify)
    policy = None
    if args.policy:
        policy = PolicyConfig.from_dict(json.loads(Path(args.policy).read_text()))
    elif args.augment:
        policy = PolicyConfig()
    root = RandomStream(args.seed).derive(0x5A3B)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    lines = []
    for idx in range(args.count):
        rng = root.derive(idx)
        patch, anns, prov = sample_patch(manifest, spec, split, rng)
        record = {
            "index": idx,
            "image_id": prov.image_id,
            "annotation_id": prov.annotation_id,
            "origin": list(prov.origin),
            "skipped_images": prov.skipped_images,
            "annotations": [
                {
                    "id": a.id,
                    "image_id": a.image_id,
                    "bbox": list(a.box),
                    "center": list(a.center),
                    "category": a.label.value,
                }
                for a in anns
            ],
        }
        if policy is not None:
            patch, anns_aug, log = augment(patch, anns, policy, rng.derive(0xA46))
            record["augmentation"] = log.to_dict()
            record["annotations_augmented"] = [
                {
                    "id": a.id,
                    "image_id": a.image_id,
                    "bbox": list(a.box),
                    "center": list(a.center),
                    "category": a.label.value,
                }
                for a in anns_aug
            ]
        save_image(patch, outdir / f"patch_{idx:05d}.png")
        lines.append(dump_json(record).rstrip("\n"))
    atomic_write_text(outdir / "patches.jsonl", "\n".join(lines) + ("\n" if lines else ""))
    print(f"wrote {args.count} patches under {outdir}")
    return 0


def cmd_optimize_anchors(args) -> int:
    manifest = load_manifest(args.manifest)
    boxes = [ann.box for ann in manifest.annotations]
    params = DeParams(
        population=args.population,
        max_generations=args.generations,
    )
    result = optimize_scales(
        boxes,
        AnchorConfig(),
        params,
        RandomStream(args.seed).derive(0xDE),
        objective=args.objective,
    )
    payload = {
        "scales": [float(s) for s in result.best],
        "fitness": result.fitness,
        "generations": result.generations,
        "history": result.history,
    }
    atomic_write_text(args.output, dump_json(payload))
    print(dump_json(payload), end="")
    return 0


def _detect_image(manifest, image_id, config: RunConfig, seed_rng: RandomStream):
    image = load_image(manifest.image_path(image_id))
    anns = manifest.annotations_of(image_id)
    det = config.detector
    detector = make_ground_truth_detector(
        anns,
        image,
        config.tiling,
        image_id=image_id,
        rng=seed_rng.derive(image_id),
        dropout=det.dropout,
        false_positive_rate=det.false_positive_rate,
        center_jitter=det.center_jitter,
    )
    return run_tiled(image, detector, config.tiling, config.dedup_radius, workers=config.workers)


def cmd_tile(args) -> int:
    manifest = load_manifest(args.manifest)
    config = RunConfig(
        seed=args.seed,
        tiling=TilingConfig(tile=args.tile, overlap=args.overlap),
        detector=MockDetectorConfig(args.dropout, args.fp_rate, args.jitter),
        dedup_radius=args.dedup_radius,
        workers=args.workers,
    )
    image_ids = [int(v) for v in args.image_ids.split(",")] if args.image_ids else [
        im.id for im in manifest.images
    ]
    rng = RandomStream(args.seed).derive(0x711E)
    records = []
    for image_id in sorted(image_ids):
        records.extend(_detect_image(manifest, image_id, config, rng))
    write_detections_jsonl(records, args.output)
    print(f"wrote {len(records)} detections to {args.output}")
    return 0


def _filtered_gts(manifest: DatasetManifest, image_ids: set[int]):
    return [a for a in manifest.annotations if a.image_id in image_ids]


def _eval_image_ids(args, manifest) -> set[int]:
    if args.split_file:
        return _load_split(args.split_file, args.fold, args.which)
    return {im.id for im in manifest.images}


def _per_scanner_reports(manifest, dets, gts, config: MatchConfig, optimize: bool, threshold: float):
    scanner_of = {im.id: im.scanner for im in manifest.images}
    out = {}
    for scanner in manifest.scanners():
        ids = {i for i, s in scanner_of.items() if s == scanner}
        d = [r for r in dets if r.image_id in ids]
        g = [a for a in gts if a.image_id in ids]
        if optimize:
            out[scanner] = optimize_threshold_dataset(d, g, config).to_dict()
        else:
            out[scanner] = evaluate_dataset_at_threshold(d, g, threshold, config).to_dict()
    return out


def cmd_evaluate(args) -> int:
    manifest = load_manifest(args.manifest)
    dets = read_detections_jsonl(args.detections)
    image_ids = _eval_image_ids(args, manifest)
    dets = [d for d in dets if d.image_id in image_ids]
    gts = _filtered_gts(manifest, image_ids)
    config = MatchConfig(radius=args.radius)
    report = evaluate_dataset_at_threshold(dets, gts, args.threshold, config)
    payload = report.to_dict()
    if args.per_scanner:
        payload = {
            "pooled": report.to_dict(),
            "per_scanner": _per_scanner_reports(manifest, dets, gts, config, False, args.threshold),
        }
    atomic_write_text(args.output, dump_json(payload))
    if args.breakdown:
        _write_breakdown(args.breakdown, dets, gts, report.threshold, config)
    print(dump_json(payload), end="")
    return 0


def cmd_optimize_threshold(args) -> int:
    manifest = load_manifest(args.manifest)
    dets = read_detections_jsonl(args.detections)
    image_ids = _eval_image_ids(args, manifest)
    dets = [d for d in dets if d.image_id in image_ids]
    gts = _filtered_gts(manifest, image_ids)
    config = MatchConfig(radius=args.radius)
    report = optimize_threshold_dataset(dets, gts, config)
    payload = report.to_dict()
    if args.per_scanner:
        payload = {
            "pooled": report.to_dict(),
            "per_scanner": _per_scanner_reports(manifest, dets, gts, config, True, 0.0),
        }
    atomic_write_text(args.output, dump_json(payload))
    if args.breakdown:
        _write_breakdown(args.breakdown, dets, gts, report.threshold, config)
    print(dump_json(payload), end="")
    return 0


def _write_breakdown(path, dets, gts, threshold, config: MatchConfig) -> None:
    image_ids = sorted({d.image_id for d in dets} | {g.image_id for g in gts})
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["image_id", "tp", "fp", "fn", "precision", "recall", "f1"])
    for image_id in image_ids:
        r = evaluate_dataset_at_threshold(
            [d for d in dets if d.image_id == image_id],
            [g for g in gts if g.image_id == image_id],
            threshold,
            config,
        )
        writer.writerow([image_id, r.tp, r.fp, r.fn, f"{r.precision:.6f}", f"{r.recall:.6f}", f"{r.f1:.6f}"])
    atomic_write_text(path, buf.getvalue())


def cmd_pipeline(args) -> int:
    if args.config:
        config = RunConfig.from_dict(json.loads(Path(args.config).read_text()))
    else:
        if args.seed is None:
            print("pipeline: --seed is required when no --config is given", file=sys.stderr)
            return 2
        config = RunConfig(seed=args.seed, paths={})
    overrides = {}
    if args.manifest:
        overrides["manifest"] = args.manifest
    if args.output:
        overrides["output"] = args.output
    paths = {**config.paths, **overrides}
    if "manifest" not in paths or "output" not in paths:
        print("pipeline: manifest and output paths are required", file=sys.stderr)
        return 2
    if args.seed is not None:
        config = RunConfig.from_dict({**config.to_dict(), "seed": args.seed, "paths": paths})
    else:
        config = RunConfig.from_dict({**config.to_dict(), "paths": paths})

    outdir = Path(paths["output"])
    outdir.mkdir(parents=True, exist_ok=True)
    stage = "ingest"
    try:
        manifest = load_manifest(paths["manifest"])

        stage = "folds"
        root = RandomStream(config.seed)
        folds = make_folds(manifest, root.derive(0xF01D), n_folds=config.n_folds)
        atomic_write_text(
            outdir / "folds.json",
            dump_json(
                {"seed": config.seed, "n_folds": config.n_folds, "folds": [f.to_dict() for f in folds]}
            ),
        )

        stage = "detect"
        test_ids = sorted(folds[config.fold].test)
        records = []
        tile_rng = root.derive(0x711E)
        for image_id in test_ids:
            records.extend(_detect_image(manifest, image_id, config, tile_rng))
        write_detections_jsonl(records, outdir / "detections.jsonl")

        stage = "evaluate"
        gts = _filtered_gts(manifest, set(test_ids))
        report = optimize_threshold_dataset(records, gts, config.match)
        atomic_write_text(outdir / "report.json", dump_json(report.to_dict()))

        stage = "provenance"
        provenance = {
            "config": config.to_dict(),
            "kernel_backend": _kernels.BACKEND,
            "versions": {
                "mitodg": __version__,
                "numpy": np.__version__,
                "python": sys.version.split()[0],
            },
            "inputs": {"manifest_sha256": _sha256_file(Path(paths["manifest"]))},
            "test_image_ids": test_ids,
        }
        atomic_write_text(outdir / "run-provenance.json", dump_json(provenance))
    except Exception as e:
        print(f"pipeline failed at stage {stage!r}: {e}", file=sys.stderr)
        return 2
    print(dump_json(report.to_dict()), end="")
    return 0


def cmd_serve(args) -> int:
    from .serve import serve

    return serve()


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mitodg",
        description="Deterministic data toolkit for scanner-robust mitosis detection",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a dataset manifest")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", default=None, help="also write the report JSON here")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("preview", help="render an augmentation preview grid")
    p.add_argument("image")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--kinds", default=None, help="comma-separated transform names (default: all 19)")
    p.add_argument("--strengths", default="0.25,0.5,0.75,1.0")
    p.set_defaults(fn=cmd_preview)

    p = sub.add_parser("split-folds", help="build per-scanner rotating folds")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--folds", type=int, default=5)
    p.set_defaults(fn=cmd_split_folds)

    p = sub.add_parser("sample", help="draw annotation-centered training patches")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, default=16)
    p.add_argument("--patch-size", type=int, default=448)
    p.add_argument("--split-file", default=None)
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--which", choices=["train", "val", "test"], default="train")
    p.add_argument("--stratify", action="store_true", help="50/50 class draw")
    p.add_argument("--augment", action="store_true", help="apply the default policy")
    p.add_argument("--policy", default=None, help="policy config JSON (implies --augment)")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("optimize-anchors", help="differential-evolution anchor scale search")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--population", type=int, default=15)
    p.add_argument("--generations", type=int, default=200)
    p.add_argument("--objective", choices=["mean_max_iou", "recall_at_50"], default="mean_max_iou")
    p.set_defaults(fn=cmd_optimize_anchors)

    p = sub.add_parser("tile", help="tiled mock detection over manifest images")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", required=True, help="detections JSONL")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--image-ids", default=None, help="comma-separated ids (default: all)")
    p.add_argument("--tile", type=int, default=448)
    p.add_argument("--overlap", type=int, default=64)
    p.add_argument("--dedup-radius", type=float, default=30.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--fp-rate", type=float, default=0.0)
    p.add_argument("--jitter", type=float, default=0.0)
    p.set_defaults(fn=cmd_tile)

    for name, fn in (("evaluate", cmd_evaluate), ("optimize-threshold", cmd_optimize_threshold)):
        p = sub.add_parser(name, help=f"{name.replace('-', ' ')} against manifest ground truth")
        p.add_argument("--detections", required=True)
        p.add_argument("--manifest", required=True)
        p.add_argument("-o", "--output", required=True)
        p.add_argument("--radius", type=float, default=30.0)
        p.add_argument("--split-file", default=None)
        p.add_argument("--fold", type=int, default=0)
        p.add_argument("--which", choices=["train", "val", "test"], default="test")
        p.add_argument("--per-scanner", action="store_true")
        p.add_argument("--breakdown", default=None, help="per-image CSV path")
        if name == "evaluate":
            p.add_argument("--threshold", type=float, default=0.0)
        p.set_defaults(fn=fn)

    p = sub.add_parser("pipeline", help="folds -> tiled mock detection -> threshold-optimized report")
    p.add_argument("--config", default=None, help="RunConfig JSON")
    p.add_argument("--manifest", default=None)
    p.add_argument("-o", "--output", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_pipeline)

    p = sub.add_parser("serve", help="framed-stdio worker exposing augment / sample_patch / optimize_threshold")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ToolkitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
