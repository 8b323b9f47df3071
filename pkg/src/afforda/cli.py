"""Command-line surface: annotate, direction, eval, predict, review-serve, export.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error. Batch
commands record per-item errors and keep going; command-level failures (bad
manifest, no output produced) abort.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import codecs, metrics
from .contact import AnnotateConfig, annotate_contact
from .errors import AffordanceError, BackendError
from .logs import JsonlWriter, read_jsonl
from .manifest import Manifest, load_manifest, save_manifest
from .motion import (
    DbscanConfig,
    direction_label,
    extract_motion_direction,
    parse_direction_label,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we map usage to 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="afforda",
                     description="egocentric affordance annotation toolkit")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("annotate", parents=[], help="contact heatmaps per clip")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--sigma", type=float, default=10.0)
    p.add_argument("--count", type=int, default=32)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("direction", help="discretized labels from trajectories")
    p.add_argument("paths", nargs="*", help="trajectory JSON files")
    p.add_argument("--manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--max-len", type=int, default=10)
    p.add_argument("--eps", type=float, default=None,
                   help="DBSCAN eps (default: 5%% of each trajectory's diagonal)")
    p.add_argument("--min-pts", type=int, default=3)
    p.set_defaults(func=cmd_direction)

    p = sub.add_parser("eval", help="score predictions against a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pred", required=True,
                   help="predictions.jsonl or the directory holding it")
    p.add_argument("--out", help="machine-readable per-sample report log")
    p.add_argument("--grid-step", type=int, default=16)
    p.add_argument("--sigma", type=float, default=10.0)
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="run the actor/verifier loop")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON config (backend, templates dir)")
    p.add_argument("--backend-url")
    p.add_argument("--model", default="gpt-4o")
    p.add_argument("--mode", choices=["coordinate", "som"], default=None)
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0,
                   help="seed recorded for stochastic backends; stub/replay "
                        "runs are deterministic regardless")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("review-serve", help="start the human review service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--decisions", required=True)
    p.add_argument("--annotations")
    p.add_argument("--static")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=cmd_review_serve)

    p = sub.add_parser("export", help="filtered manifest of accepted samples")
    p.add_argument("--manifest", required=True)
    p.add_argument("--decisions", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    return parser


def _fan_out(items, worker, max_workers: int):
    """Run worker over items with a bounded pool, preserving input order."""
    if max_workers <= 1 or len(items) <= 1:
        return [worker(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(worker, items))


def cmd_annotate(args) -> int:
    manifest = load_manifest(args.manifest)
    out = Path(args.out)
    (out / "heatmaps").mkdir(parents=True, exist_ok=True)
    config = AnnotateConfig(point_count=args.count, sigma=args.sigma,
                            seed=args.seed)
    log = JsonlWriter(out / "provenance.jsonl")

    def work(record):
        try:
            clip = record.load(manifest.root)
            amap, result = annotate_contact(clip, config)
            rel = f"heatmaps/{record.id}.png"
            codecs.save_heatmap_png(amap, out / rel)
            log.append({
                "clip_id": record.id,
                "heatmap": rel,
                "stop_index": result.stop_index,
                "dropped": result.dropped,
                "out_of_bounds": result.out_of_bounds,
                "valid_points": len(result.valid_points),
            })
            return None
        except AffordanceError as e:
            e.sample_id = e.sample_id or record.id
            log.append({"clip_id": record.id, "error": str(e)})
            return e

    errors = [e for e in _fan_out(manifest.clips, work, args.workers)
              if e is not None]
    log.close()
    done = len(manifest.clips) - len(errors)
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    print(f"annotated {done}/{len(manifest.clips)} clips -> {out}")
    if manifest.clips and done == 0:
        return EXIT_DATA
    return EXIT_OK


def cmd_direction(args) -> int:
    jobs: list[tuple[str, Path]] = []
    root = Path(".")
    if args.manifest:
        manifest = load_manifest(args.manifest)
        root = manifest.root
        for clip in manifest.clips:
            if clip.trajectories_path:
                jobs.append((clip.id, root / clip.trajectories_path))
    for path in args.paths:
        jobs.append((Path(path).stem, Path(path)))
    if not jobs:
        raise UsageError("direction needs trajectory files or --manifest")

    cfg = None
    if args.eps is not None:
        cfg = DbscanConfig(eps=args.eps, min_pts=args.min_pts)
    log = JsonlWriter(args.out)
    failures = 0
    for job_id, path in jobs:
        try:
            trajs = codecs.load_trajectories(path)
            estimate = extract_motion_direction(trajs, cfg, max_len=args.max_len)
            label = direction_label(estimate.discrete)
            log.append({
                "id": job_id,
                "label": label,
                "discrete": list(estimate.discrete.as_tuple()),
                "vector": [estimate.direction.x, estimate.direction.y,
                           estimate.direction.z],
                "used": estimate.used,
                "dropped": estimate.dropped,
            })
            print(f"{job_id}\t{label}")
        except AffordanceError as e:
            failures += 1
            e.sample_id = e.sample_id or job_id
            log.append({"id": job_id, "error": str(e)})
            print(f"error: {e}", file=sys.stderr)
    log.close()
    if failures == len(jobs):
        return EXIT_DATA
    return EXIT_OK


def _load_prediction(record: dict, pred_root: Path, grid_step: int, sigma: float):
    pred_map = None
    if "heatmap" in record:
        pred_map = codecs.load_heatmap(pred_root / record["heatmap"])
    elif "mask" in record:
        mask = codecs.load_grayscale_mask(pred_root / record["mask"])
        pred_map = metrics.mask_to_heatmap(mask, grid_step=grid_step, sigma=sigma)
    pred_dir = None
    if record.get("direction"):
        pred_dir = parse_direction_label(record["direction"])
    return pred_map, pred_dir


def _format_metric(value) -> str:
    return f"{value:.3f}" if value is not None else "-"


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    pred_path = Path(args.pred)
    if pred_path.is_dir():
        pred_path = pred_path / "predictions.jsonl"
    predictions = {r["sample_id"]: r for r in read_jsonl(pred_path)}
    pred_root = pred_path.parent

    def score(record):
        try:
            prediction = predictions.get(record.id)
            if prediction is None:
                raise AffordanceError("no prediction for sample",
                                      sample_id=record.id, stage="eval")
            sample = record.load(manifest.root)
            pred_map, pred_dir = _load_prediction(prediction, pred_root,
                                                  args.grid_step, args.sigma)
            return metrics.evaluate_sample(pred_map, pred_dir, sample), None
        except AffordanceError as e:
            e.sample_id = e.sample_id or record.id
            return None, (record.id, e)

    scored = _fan_out(manifest.samples, score, args.workers)
    reports = [report for report, _ in scored if report is not None]
    errors = [error for _, error in scored if error is not None]
    if not reports:
        for _, e in errors:
            print(f"error: {e}", file=sys.stderr)
        print("no sample could be scored", file=sys.stderr)
        return EXIT_DATA

    mean = metrics.aggregate_reports(reports)
    header = f"{'sample':<12}  {'SIM':>7}  {'NSS':>7}  {'AUC-J':>7}  {'CS':>7}"
    print(header)
    print("-" * len(header))
    for report in reports:
        print(f"{report.sample_id:<12}  {_format_metric(report.sim):>7}  "
              f"{_format_metric(report.nss):>7}  {_format_metric(report.auc_j):>7}  "
              f"{_format_metric(report.cs):>7}")
    print("-" * len(header))
    print(f"{'mean':<12}  {_format_metric(mean.sim):>7}  "
          f"{_format_metric(mean.nss):>7}  {_format_metric(mean.auc_j):>7}  "
          f"{_format_metric(mean.cs):>7}")
    for sample_id, e in errors:
        print(f"error: {e}", file=sys.stderr)

    if args.out:
        log = JsonlWriter(args.out)
        for report in reports:
            log.append({"sample_id": report.sample_id, "sim": report.sim,
                        "nss": report.nss, "auc_j": report.auc_j,
                        "cs": report.cs})
        log.append({"sample_id": "mean", "sim": mean.sim, "nss": mean.nss,
                    "auc_j": mean.auc_j, "cs": mean.cs,
                    "errors": [sid for sid, _ in errors]})
        log.close()
    return EXIT_OK


def _build_loop(args):
    # imported lazily so plain data commands stay fast
    from .loop import (
        Backends,
        LoopConfig,
        OpenAIChatBackend,
        ReplayModelBackend,
        StubSegmentation,
        load_templates_from_dir,
    )

    config_doc = {}
    config_dir = Path(".")
    if args.config:
        config_path = Path(args.config)
        config_doc = json.loads(config_path.read_text(encoding="utf-8"))
        config_dir = config_path.parent

    mode = args.mode or config_doc.get("mode", "coordinate")
    max_iterations = (args.max_iterations if args.max_iterations is not None
                      else config_doc.get("max_iterations", 3))
    templates_dir = config_doc.get("templates_dir")
    cfg_kwargs = dict(
        max_iterations=max_iterations,
        mode=mode,
        som_candidates=config_doc.get("som_candidates", 12),
    )
    if templates_dir:
        cfg_kwargs["templates"] = load_templates_from_dir(config_dir / templates_dir)
    cfg = LoopConfig(**cfg_kwargs)

    backend_doc = config_doc.get("backend", {})
    url = args.backend_url or backend_doc.get("url")
    if backend_doc.get("kind") == "replay":
        model = ReplayModelBackend.from_file(config_dir / backend_doc["path"])
        sequential = True
    elif url:
        model = OpenAIChatBackend(url, backend_doc.get("model", args.model))
        sequential = False
    else:
        raise UsageError("predict needs --backend-url or a config backend")
    return cfg, Backends(model=model, segmentation=StubSegmentation()), sequential


def cmd_predict(args) -> int:
    from .loop import run_sample, trace_records

    manifest = load_manifest(args.manifest)
    cfg, backends, sequential = _build_loop(args)
    out = Path(args.out)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    workers = 1 if sequential else args.workers
    if sequential and args.workers > 1:
        print("replay backend is sequential; using --workers 1", file=sys.stderr)

    traces = JsonlWriter(out / "traces.jsonl")
    predictions = JsonlWriter(out / "predictions.jsonl")
    samples = [record.load(manifest.root) for record in manifest.samples]

    def work(sample):
        mask, direction, sample_traces = run_sample(sample, cfg, backends,
                                                    workdir=out)
        return sample, mask, direction, sample_traces

    try:
        if workers <= 1:
            results = [work(s) for s in samples]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(work, samples))
    except BackendError:
        traces.close()
        predictions.close()
        raise

    for sample, mask, direction, sample_traces in results:
        rel = f"masks/{sample.id}.png"
        codecs.save_mask_png(mask, out / rel)
        for trace in sample_traces:
            for record in trace_records(sample.id, trace):
                traces.append(record)
        predictions.append({
            "sample_id": sample.id,
            "mask": rel,
            "direction": direction_label(direction),
        })
    traces.close()
    predictions.close()
    print(f"predicted {len(results)}/{len(samples)} samples -> {out}")
    return EXIT_OK


def cmd_review_serve(args) -> int:
    from .review import ReviewServiceConfig, serve

    config = ReviewServiceConfig(
        manifest_path=args.manifest,
        decisions_path=args.decisions,
        annotations_dir=args.annotations,
        static_dir=args.static,
    )
    print(f"review service on http://{args.host}:{args.port}/")
    serve(config, host=args.host, port=args.port)
    return EXIT_OK


def cmd_export(args) -> int:
    manifest = load_manifest(args.manifest)
    decisions_path = Path(args.decisions)
    effective: dict[str, dict] = {}
    if decisions_path.exists():
        for record in read_jsonl(decisions_path):
            effective[record["sample_id"]] = record
    accepted = {sid for sid, record in effective.items()
                if record.get("verdict") == "accept"}
    filtered = Manifest(
        version=manifest.version,
        samples=[s for s in manifest.samples if s.id in accepted],
        clips=list(manifest.clips),
        root=manifest.root,
    )
    # file references stay relative, so the export belongs next to its source
    out = Path(args.out)
    save_manifest(filtered, out)
    print(f"exported {len(filtered.samples)} accepted sample(s) -> {out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except BackendError as e:
        print(f"backend error: {e}", file=sys.stderr)
        return EXIT_BACKEND
    except (AffordanceError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as e:  # argparse --help
        return int(e.code or 0)


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
