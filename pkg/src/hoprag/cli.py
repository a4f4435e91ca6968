"""Operator command line: index, qa, sample, warmup, emit-sft, eval, verify.

Every command is non-interactive and deterministic for a fixed config,
seed, and scripted backend; failures exit nonzero with one machine-readable
JSON object on stderr. Each run writes a manifest next to its outputs.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .boltzmann import format_report, load_landscape, report_grid
from .bm25 import Bm25Index, save_index
from .config import RunConfig, load_config, write_manifest
from .environments import (
    KgEnvironment,
    TextEnvironment,
    load_corpus_jsonl,
    load_dataset_json,
    load_kg_tsv,
)
from .episode import load_trajectories, run_episode, save_trajectories, score_trajectory
from .gateway import Endpoint, HttpBackend, ScriptedBackend, load_rules
from .metrics import EmptySetError, best_score
from .pipeline import (
    dedup_records,
    emit_sft,
    run_offline,
    run_online,
    select_training_units,
    warmup_select,
)


def _build_backend(cfg: RunConfig, temperature: float | None = None):
    b = cfg.backend
    if b.kind == "scripted":
        if b.script is None:
            raise ValueError("scripted backend requires backend.script")
        return ScriptedBackend(load_rules(b.script), seed=cfg.seed)
    if b.base_url is None:
        raise ValueError("http backend requires backend.base_url")
    endpoint = Endpoint(
        base_url=b.base_url, api_key_env=b.api_key_env, concurrency=b.concurrency
    )
    temp = b.temperature if temperature is None else temperature
    return HttpBackend(endpoint, model=b.model, temperature=temp, max_tokens=b.max_tokens)


def _build_env(cfg: RunConfig):
    if cfg.env_kind == "kg":
        if cfg.kg is None:
            raise ValueError("kg environment requires run.kg")
        return KgEnvironment(load_kg_tsv(cfg.kg, cfg.labels))
    if cfg.corpus is None:
        raise ValueError("text environment requires run.corpus")
    return TextEnvironment(load_corpus_jsonl(cfg.corpus))


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_index(cfg: RunConfig, args: argparse.Namespace) -> int:
    if cfg.corpus is None:
        raise ValueError("index requires run.corpus")
    corpus = load_corpus_jsonl(cfg.corpus)
    index = Bm25Index(corpus)
    out = _out_dir(cfg)
    save_index(index, out / "index.json")
    write_manifest(
        out / "index_manifest.json",
        "index",
        cfg,
        {"passages": index.n_docs, "terms": len(index.postings)},
    )
    print(json.dumps({"passages": index.n_docs, "terms": len(index.postings)}))
    return 0


def cmd_qa(cfg: RunConfig, args: argparse.Namespace) -> int:
    if cfg.dataset is None:
        raise ValueError("qa requires run.dataset")
    questions = load_dataset_json(cfg.dataset)
    if not questions:
        raise EmptySetError("dataset contains no questions")
    env = _build_env(cfg)
    llm = _build_backend(cfg, temperature=0.0)  # evaluation always decodes greedily
    out = _out_dir(cfg)
    rows = []
    for q in questions:
        traj = score_trajectory(
            run_episode(q, env, llm, cfg.limits, cfg.few_shot), q.gold_answers
        )
        prediction = traj.final_answer or ""
        score = best_score(prediction, list(q.gold_answers))
        rows.append(
            {
                "_id": q.id,
                "prediction": prediction,
                "em": score.em,
                "f1": score.f1,
                "iterations": traj.iterations_used,
                "worker_calls": len(traj.worker_calls),
            }
        )
    pred_path = out / "predictions.jsonl"
    with open(pred_path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    mean_em = round(sum(r["em"] for r in rows) / len(rows) * 100, 2)
    mean_f1 = round(sum(r["f1"] for r in rows) / len(rows) * 100, 2)
    write_manifest(out / "qa_manifest.json", "qa", cfg, {"questions": len(rows)})
    print(json.dumps({"em": mean_em, "f1": mean_f1}))
    return 0


def cmd_sample(cfg: RunConfig, args: argparse.Namespace) -> int:
    if cfg.dataset is None:
        raise ValueError("sample requires run.dataset")
    questions = load_dataset_json(cfg.dataset)
    env = _build_env(cfg)
    llm = _build_backend(cfg, temperature=cfg.sampler.temperature)
    out = _out_dir(cfg)
    if args.offline:
        data_path, report = run_offline(
            questions,
            env,
            llm,
            cfg.sampler,
            out,
            limits=cfg.limits,
            few_shot=cfg.few_shot,
        )
        reports = [report]
        outputs = {"dataset": str(data_path)}
    else:
        t_batches = args.batches or max(1, len(questions) // cfg.sampler.batch_size)
        reports = run_online(
            questions,
            t_batches,
            env,
            llm,
            cfg.sampler,
            out,
            trainer_hook=args.trainer_hook,
            seed=cfg.seed,
            limits=cfg.limits,
            few_shot=cfg.few_shot,
        )
        outputs = {"iterations": len(reports)}
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump([r.as_dict() for r in reports], fh, sort_keys=True, indent=2)
        fh.write("\n")
    counts = {
        "questions": len(questions),
        "attempted": sum(r.attempted for r in reports),
        "accepted": sum(r.accepted for r in reports),
        "k_trace": [r.k_after for r in reports],
    }
    counts.update(outputs)
    write_manifest(out / "sample_manifest.json", "sample", cfg, counts)
    print(json.dumps(counts))
    return 0


def cmd_warmup(cfg: RunConfig, args: argparse.Namespace) -> int:
    if cfg.dataset is None:
        raise ValueError("warmup requires run.dataset")
    questions = load_dataset_json(cfg.dataset)
    env = _build_env(cfg)
    llm = _build_backend(cfg, temperature=cfg.sampler.temperature)
    out = _out_dir(cfg)
    trajectories = []
    for q in questions:
        for _ in range(args.attempts):
            trajectories.append(
                score_trajectory(run_episode(q, env, llm, cfg.limits, cfg.few_shot), q.gold_answers)
            )
    records = warmup_select(trajectories, args.limit, seed=cfg.seed)
    data_path = out / "warmup_sft.jsonl"
    written = emit_sft(records, data_path)
    save_trajectories(trajectories, out / "warmup_trajectories.jsonl")
    write_manifest(
        out / "warmup_manifest.json",
        "warmup",
        cfg,
        {"trajectories": len(trajectories), "records": written, "limit": args.limit},
    )
    print(json.dumps({"records": written}))
    return 0


def cmd_emit_sft(cfg: RunConfig, args: argparse.Namespace) -> int:
    trajectories = load_trajectories(args.trajectories)
    records = []
    for traj in trajectories:
        records.extend(select_training_units(traj, args.k))
    records = dedup_records(records)
    out_path = Path(args.out)
    written = emit_sft(records, out_path)
    write_manifest(
        out_path.with_suffix(".manifest.json"),
        "emit-sft",
        cfg,
        {"trajectories": len(trajectories), "records": written, "k": args.k},
    )
    print(json.dumps({"records": written}))
    return 0


def cmd_eval(cfg: RunConfig, args: argparse.Namespace) -> int:
    questions = {q.id: q for q in load_dataset_json(args.gold)}
    pairs = []
    with open(args.pred, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            gold = questions[str(row["_id"])]
            score = best_score(row["prediction"], list(gold.gold_answers))
            pairs.append(score)
    if not pairs:
        raise EmptySetError("no predictions to evaluate")
    mean_em = round(sum(s.em for s in pairs) / len(pairs) * 100, 2)
    mean_f1 = round(sum(s.f1 for s in pairs) / len(pairs) * 100, 2)
    out = _out_dir(cfg)
    write_manifest(
        out / "eval_manifest.json", "eval", cfg, {"predictions": len(pairs)}
    )
    print(json.dumps({"em": mean_em, "f1": mean_f1}))
    return 0


def cmd_verify(cfg: RunConfig, args: argparse.Namespace) -> int:
    landscape = load_landscape(args.landscape)
    temperatures = [float(a) for a in args.alpha_grid.split(",")]
    rows = report_grid(landscape, temperatures, args.k)
    print(format_report(rows))
    out = _out_dir(cfg)
    with open(out / "verify_report.json", "w", encoding="utf-8") as fh:
        json.dump(rows, fh, sort_keys=True, indent=2)
        fh.write("\n")
    write_manifest(
        out / "verify_manifest.json",
        "verify",
        cfg,
        {"alphas": temperatures, "k": args.k, "atoms": len(landscape.atoms)},
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hoprag")
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--seed", type=int, help="override run.seed")
    parser.add_argument("--out-dir", help="override run.out_dir")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("index", help="build the lexical index over run.corpus")

    sub.add_parser("qa", help="answer every dataset question and score it")

    p_sample = sub.add_parser("sample", help="rejection-sample trajectories into SFT data")
    p_sample.add_argument("--offline", action="store_true", help="single pass at k-init")
    p_sample.add_argument("--batches", type=int, help="number of online batches")
    p_sample.add_argument("--k-init", type=float, dest="k_init", help="override sampler.k_init")
    p_sample.add_argument("--m", type=int, help="override sampler.m")
    p_sample.add_argument("--max-attempts", type=int, dest="max_attempts")
    p_sample.add_argument("--trainer-hook", dest="trainer_hook", help="command run per batch")

    p_warmup = sub.add_parser("warmup", help="collect exact-match trajectories for burn-in")
    p_warmup.add_argument("--limit", type=int, default=300, help="max trajectories kept")
    p_warmup.add_argument("--attempts", type=int, default=1, help="episodes per question")

    p_emit = sub.add_parser("emit-sft", help="expand saved trajectories into SFT records")
    p_emit.add_argument("--trajectories", required=True)
    p_emit.add_argument("--k", type=float, required=True, help="selection threshold")
    p_emit.add_argument("--out", required=True)

    p_eval = sub.add_parser("eval", help="score a predictions file against a dataset")
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--gold", required=True)

    p_verify = sub.add_parser("verify", help="truncated-softmax report over a landscape file")
    p_verify.add_argument("--landscape", required=True)
    p_verify.add_argument("--alpha-grid", default="1,0.5,0.2,0.1,0.05")
    p_verify.add_argument("--k", type=float, default=0.5)

    return parser


_COMMANDS = {
    "index": cmd_index,
    "qa": cmd_qa,
    "sample": cmd_sample,
    "warmup": cmd_warmup,
    "emit-sft": cmd_emit_sft,
    "eval": cmd_eval,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides: dict = {}
    if args.seed is not None:
        overrides["run.seed"] = args.seed
    if args.out_dir is not None:
        overrides["run.out_dir"] = args.out_dir
    if getattr(args, "k_init", None) is not None:
        overrides["sampler.k_init"] = args.k_init
    if getattr(args, "m", None) is not None:
        overrides["sampler.m"] = args.m
    if getattr(args, "max_attempts", None) is not None:
        overrides["sampler.max_attempts"] = args.max_attempts
    try:
        cfg = load_config(args.config, overrides)
        cfg.validate_paths()
        return _COMMANDS[args.command](cfg, args)
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports all failures
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
