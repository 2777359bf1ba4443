"""``tshaystack`` command line."""

from __future__ import annotations

import argparse
import dataclasses
import json
import multiprocessing
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ..annotate import AnnotateConfigError, AnnotateError, RationaleClient, annotate_records, load_client_config
from ..boutindex import NeedleUnavailable, index_corpus, slice_classification
from ..ingest import IngestError, Recording, load_corpus, load_label_map, resample, save_recording, split_participants, synth_corpus
from ..insertion import PlacementInfeasible
from ..qa.plotting import render_sample_plot
from ..score.baselines import random_baseline
from ..score.report import aggregate, score_records
from ..taskgen.answers import InconsistentTimeline, recompute_gold
from ..taskgen.context import Resample
from ..taskgen.dataset import Generation, SampleKey, plan_cells
from ..validate.detectability import run_validation
from .blobs import BlobError, read_blob, write_blob
from .config import ConfigError, RunConfig, dump_effective, load_config
from .records import atomic_write_text, read_jsonl, write_jsonl

EXIT_CONFIG = 2
EXIT_DATA = 3


class DataError(RuntimeError):
    pass


def load_recordings(cfg: RunConfig) -> list[Recording]:
    if cfg.corpus is not None:
        label_map = load_label_map(cfg.label_map) if cfg.label_map else None
        recs = load_corpus(cfg.corpus, label_map)
    else:
        recs = synth_corpus(cfg.synth_spec())
    if not recs:
        raise DataError("corpus holds no recordings")
    if cfg.rate is not None:
        recs = [resample(r, cfg.rate) for r in recs]
    return recs


def make_splits(cfg: RunConfig, recs: Sequence[Recording]):
    ids = [r.participant_id for r in recs]
    return split_participants(ids, cfg.split_counts(len(set(ids))), cfg.split_seed)


# -- generate -----------------------------------------------------------------
_WORKER: dict[str, Any] = {}


def _emit(key: SampleKey) -> dict[str, Any]:
    gen: Generation = _WORKER["gen"]
    out: Path = _WORKER["out"]
    sample = gen.sample(key)
    ref = f"series/{sample.id}.tshs"
    write_blob(out / ref, sample.series, sample.rate)
    if _WORKER["plots"]:
        render_sample_plot(sample, out / "plots" / f"{sample.id}.svg")
    record = sample.to_record(ref)
    if recompute_gold(record) != record["gold"]:
        raise InconsistentTimeline(f"{sample.id}: gold answer does not follow from the timeline")
    return record


def generate_dataset(
    cfg: RunConfig,
    recs: Sequence[Recording] | None = None,
    order_seed: int | None = None,
) -> list[dict[str, Any]]:
    """Generate every planned sample into ``cfg.out``; returns records in canonical order.

    ``order_seed`` shuffles the work schedule, which must not change any output byte.
    """
    recs = list(recs) if recs is not None else load_recordings(cfg)
    out = Path(cfg.out)
    (out / "series").mkdir(parents=True, exist_ok=True)
    if cfg.plots:
        (out / "plots").mkdir(parents=True, exist_ok=True)
    keys = plan_cells(cfg.tasks, cfg.contexts, cfg.counts)
    work = list(keys)
    if order_seed is not None:
        np.random.default_rng(order_seed).shuffle(work)
    _WORKER.update(gen=Generation(recs, make_splits(cfg, recs), cfg.seed, cfg.task_set(), cfg.counts), out=out, plots=cfg.plots)
    try:
        if cfg.jobs == 1:
            done = [_emit(k) for k in work]
        else:
            with multiprocessing.get_context("fork").Pool(cfg.jobs) as pool:
                done = pool.map(_emit, work, chunksize=max(1, len(work) // (8 * cfg.jobs)))
    finally:
        _WORKER.clear()
    by_id = {r["id"]: r for r in done}
    records = [by_id[k.id] for k in keys]
    write_jsonl(out / "samples.jsonl", records)
    dump_effective(cfg, out / "effective_config.yaml")
    return records


# -- commands -----------------------------------------------------------------
def cmd_synth(cfg: RunConfig, args) -> dict:
    target = Path(cfg.out) / "corpus"
    target.mkdir(parents=True, exist_ok=True)
    recs = synth_corpus(cfg.synth_spec())
    for rec in recs:
        save_recording(rec, target / f"{rec.participant_id}.csv")
    return {"recordings": len(recs), "dir": str(target)}


def cmd_index(cfg: RunConfig, args) -> dict:
    index = index_corpus(load_recordings(cfg))
    path = Path(cfg.out) / "bout_index.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    index.save(path)
    return {"classes": index.counts(), "path": str(path)}


def cmd_generate(cfg: RunConfig, args) -> dict:
    records = generate_dataset(cfg, order_seed=args.shuffle_seed)
    return {"samples": len(records), "path": str(Path(cfg.out) / "samples.jsonl")}


def cmd_validate(cfg: RunConfig, args) -> dict:
    rows = run_validation(load_recordings(cfg), cfg.validation_config())
    out = Path(cfg.out)
    atomic_write_text(out / "validation.json", json.dumps(rows, indent=2, sort_keys=True) + "\n")
    lines = ["context_s,auc_blended,auc_raw_control,n_train,n_test,seed"]
    lines += [f"{r['context_s']:g},{r['auc_blended']:.4f},{r['auc_raw_control']:.4f},{r['n_train']},{r['n_test']},{r['seed']}" for r in rows]
    atomic_write_text(out / "validation.csv", "\n".join(lines) + "\n")
    return {"rows": rows}


def cmd_slice(cfg: RunConfig, args) -> dict:
    recs = load_recordings(cfg)
    sc = cfg.slice_config()
    rate = recs[0].rate
    result = slice_classification(recs, make_splits(cfg, recs), int(round(sc.context_s * rate)), sc.budget, sc.seed, sc.threshold)
    out = Path(cfg.out) / "slices"
    summary = {}
    for split, res in result.items():
        rows = ["participant,start,length,label,coverage"]
        rows += [f"{w.participant_id},{w.start},{w.length},{w.label},{w.coverage:.6f}" for w in res.windows]
        atomic_write_text(out / f"{split}.csv", "\n".join(rows) + "\n")
        summary[split] = {"windows": len(res.windows), "pool": res.pool_size, "method": res.method}
    atomic_write_text(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _samples_path(cfg: RunConfig, args) -> Path:
    return Path(args.samples) if args.samples else Path(cfg.out) / "samples.jsonl"


def cmd_score(cfg: RunConfig, args) -> dict:
    if not args.transcripts:
        raise ConfigError("score needs --transcripts")
    records = list(read_jsonl(_samples_path(cfg, args)))
    transcripts = {}
    for row in read_jsonl(args.transcripts):
        if "sample_id" not in row or "transcript" not in row:
            raise DataError("transcript rows need 'sample_id' and 'transcript'")
        transcripts[row["sample_id"]] = row["transcript"]
    if args.split:
        records = [r for r in records if r["split"] == args.split]
    rule = cfg.scoring_rule()
    scores = score_records(records, transcripts, rule)
    tasks = [t for t in cfg.tasks if any(r["task"] == t for r in records)]
    ts = cfg.task_set()
    baselines = {t: random_baseline(t, ts.configs[t], cfg.baseline_draws, cfg.seed, rule) for t in tasks}
    report = aggregate(scores, baselines, tasks, sorted({float(r["context_s"]) for r in records}), rule)
    paths = report.write(cfg.out)
    sys.stdout.write(report.to_text())
    return {k: str(v) for k, v in paths.items()}


def cmd_annotate(cfg: RunConfig, args) -> dict:
    if not cfg.annotate:
        raise ConfigError("annotate needs an 'annotate' section in the config")
    section = dict(cfg.annotate)
    section.setdefault("audit_log", str(Path(cfg.out) / "annotate_audit.jsonl"))
    client = RationaleClient(load_client_config(section))
    path = _samples_path(cfg, args)
    records = list(read_jsonl(path))

    def load_series(rec) -> np.ndarray:
        series, _ = read_blob(path.parent / rec["series_ref"])
        return series

    try:
        errors = annotate_records(records, load_series, client, Path(cfg.out) / "rationales", force=args.force)
    finally:
        client.close()
    write_jsonl(path, records)
    return {"annotated": sum(1 for r in records if r.get("rationale")), "failed": errors}


COMMANDS = {
    "synth": cmd_synth,
    "index": cmd_index,
    "generate": cmd_generate,
    "validate": cmd_validate,
    "slice": cmd_slice,
    "score": cmd_score,
    "annotate": cmd_annotate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tshaystack", description="Needle-in-a-haystack benchmark for accelerometer time series.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="YAML run config")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--tasks", help="comma-separated task names")
    p.add_argument("--contexts", help="comma-separated context lengths in seconds")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, help="worker processes for generate")
    p.add_argument("--rule", help="time-range rule, e.g. iou:0.5 or tolerance:2")
    p.add_argument("--samples", help="samples.jsonl (score, annotate); defaults to OUT/samples.jsonl")
    p.add_argument("--transcripts", help="JSONL of {sample_id, transcript} (score)")
    p.add_argument("--split", choices=("train", "val", "test"), help="score only this split")
    p.add_argument("--force", action="store_true", help="re-annotate samples that already have rationales")
    p.add_argument("--shuffle-seed", type=int, help=argparse.SUPPRESS)
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    updates: dict[str, Any] = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.tasks:
        updates["tasks"] = [t.strip() for t in args.tasks.split(",") if t.strip()]
    if args.contexts:
        try:
            updates["contexts"] = [float(c) for c in args.contexts.split(",")]
        except ValueError:
            raise ConfigError(f"bad --contexts {args.contexts!r}") from None
    if args.out:
        updates["out"] = args.out
    if args.jobs is not None:
        updates["jobs"] = args.jobs
    if args.rule:
        updates["rule"] = args.rule
    try:
        return dataclasses.replace(cfg, **updates)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _fail(code: int, exc: BaseException) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        result = COMMANDS[args.command](cfg, args)
    except (ConfigError, AnnotateConfigError) as exc:
        return _fail(EXIT_CONFIG, exc)
    except (
        DataError,
        IngestError,
        NeedleUnavailable,
        PlacementInfeasible,
        Resample,
        InconsistentTimeline,
        BlobError,
        AnnotateError,
        FileNotFoundError,
        ValueError,
    ) as exc:
        return _fail(EXIT_DATA, exc)
    if args.command != "score":
        sys.stdout.write(json.dumps(result, sort_keys=True, default=str) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
