"""Trajectory sampling and SFT dataset construction.

The sampler keeps trajectories whose terminal reward strictly exceeds the
current acceptance threshold, retrying each question up to a fixed attempt
budget. The threshold tightens across batches via

    k = max(k_prev, (mean_batch_reward / (r_sup + 1)) * r_sup)

so it never decreases and, with an F1 reward (r_sup = 1), the update
candidate never exceeds 0.5. Accepted episodes expand into one planner
record plus one single-turn record per worker call; records are emitted as
JSON lines with a per-message train flag that is true exactly on assistant
messages, ready for any standard SFT trainer.
"""
from __future__ import annotations

import json
import random
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import prompts
from .environments import QAInstance
from .episode import (
    EpisodeLimits,
    Message,
    Trajectory,
    run_episode,
    save_trajectories,
    score_trajectory,
)
from .gateway import BackendError


class EmptyBatchError(ValueError):
    """A threshold update was requested with no batch rewards."""


class HookFailedError(RuntimeError):
    """The trainer hook exited nonzero; partial reports are attached."""

    def __init__(self, message: str, iteration: int, reports: list["BatchReport"]):
        super().__init__(message)
        self.iteration = iteration
        self.reports = reports


@dataclass(frozen=True)
class ThresholdState:
    k: float
    r_sup: float = 1.0
    history: tuple[tuple[int, float, float], ...] = ()  # (iteration, k, batch mean)

    def __post_init__(self) -> None:
        if self.r_sup <= 0:
            raise ValueError(f"r_sup must be positive, got {self.r_sup}")
        if self.k > self.r_sup:
            raise ValueError(f"k={self.k} exceeds r_sup={self.r_sup}")


def update_threshold(state: ThresholdState, batch_rewards: Sequence[float]) -> ThresholdState:
    """Tighten the acceptance threshold from one batch's mean reward."""
    if not batch_rewards:
        raise EmptyBatchError("batch_rewards must be non-empty")
    mean_reward = sum(batch_rewards) / len(batch_rewards)
    candidate = (mean_reward / (state.r_sup + 1.0)) * state.r_sup
    new_k = max(state.k, candidate)
    entry = (len(state.history) + 1, new_k, mean_reward)
    return ThresholdState(k=new_k, r_sup=state.r_sup, history=state.history + (entry,))


def save_threshold_state(state: ThresholdState, path: str | Path) -> None:
    payload = {
        "k": state.k,
        "r_sup": state.r_sup,
        "history": [[i, k, mean] for i, k, mean in state.history],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_threshold_state(path: str | Path) -> ThresholdState:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return ThresholdState(
        k=payload["k"],
        r_sup=payload["r_sup"],
        history=tuple((int(i), float(k), float(m)) for i, k, m in payload["history"]),
    )


@dataclass(frozen=True)
class SamplerConfig:
    m: int = 3
    max_attempts: int = 16
    batch_size: int = 1000
    k_init: float = 0.5
    temperature: float = 0.7

    def __post_init__(self) -> None:
        if not 1 <= self.m <= self.max_attempts:
            raise ValueError(f"need 1 <= m <= max_attempts, got m={self.m}, max_attempts={self.max_attempts}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")


@dataclass(frozen=True)
class QuestionSample:
    kept: tuple[Trajectory, ...]
    attempts: int
    first_reward: float


def sample_question(
    question: QAInstance,
    env,
    llm,
    cfg: SamplerConfig,
    k: float,
    limits: EpisodeLimits | None = None,
    few_shot: bool = True,
) -> QuestionSample:
    """Sample episodes for one question until m are kept or attempts run out.

    A trajectory is kept iff reward > k (strictly). Non-backend episode
    failures count as failed attempts; backend failures propagate.
    """
    kept: list[Trajectory] = []
    attempts = 0
    first_reward = 0.0
    while len(kept) < cfg.m and attempts < cfg.max_attempts:
        attempts += 1
        try:
            traj = run_episode(question, env, llm, limits, few_shot)
        except BackendError:
            raise
        except Exception:
            continue  # a broken episode burns one attempt
        score_trajectory(traj, question.gold_answers)
        assert traj.reward is not None
        if attempts == 1:
            first_reward = traj.reward
        if traj.reward > k:
            kept.append(traj)
    return QuestionSample(kept=tuple(kept), attempts=attempts, first_reward=first_reward)


@dataclass(frozen=True)
class SftMessage:
    role: str
    content: str
    train: bool


@dataclass(frozen=True)
class SftRecord:
    source: str  # "planner" | "worker"
    question_id: str
    reward: float
    messages: tuple[SftMessage, ...]

    def __post_init__(self) -> None:
        if self.source not in ("planner", "worker"):
            raise ValueError(f"unknown source {self.source!r}")
        for msg in self.messages:
            if msg.train != (msg.role == "assistant"):
                raise ValueError("train flag must be set exactly on assistant messages")
        if not any(msg.train for msg in self.messages):
            raise ValueError("a record needs at least one trained message")


def _sft_messages(pairs: Sequence[Message | dict]) -> tuple[SftMessage, ...]:
    out = []
    for m in pairs:
        role = m.role if isinstance(m, Message) else m["role"]
        content = m.content if isinstance(m, Message) else m["content"]
        out.append(SftMessage(role=role, content=content, train=role == "assistant"))
    return tuple(out)


def select_training_units(traj: Trajectory, k: float) -> list[SftRecord]:
    """Expand one scored trajectory into training records.

    Empty when reward <= k. Otherwise: the full planner conversation (with
    any few-shot demonstration prefix stripped) plus one single-turn record
    per worker call, every record carrying the trajectory reward.
    """
    if traj.reward is None:
        raise ValueError("trajectory must be scored before selection")
    if traj.reward <= k:
        return []
    planner_msgs = [traj.messages[0]] + traj.messages[1 + traj.few_shot_messages :]
    records = [
        SftRecord(
            source="planner",
            question_id=traj.question_id,
            reward=traj.reward,
            messages=_sft_messages(planner_msgs),
        )
    ]
    worker_system = prompts.system_prompt(prompts.WORKER, traj.env_kind)
    for call in traj.worker_calls:
        user = prompts.worker_question(traj.env_kind, call.subquestion, call.materials)
        records.append(
            SftRecord(
                source="worker",
                question_id=traj.question_id,
                reward=traj.reward,
                messages=_sft_messages(
                    [
                        {"role": "system", "content": worker_system},
                        {"role": "user", "content": user},
                        {"role": "assistant", "content": call.reply_raw},
                    ]
                ),
            )
        )
    return records


def warmup_select(
    trajectories: Sequence[Trajectory], limit: int, seed: int = 0
) -> list[SftRecord]:
    """Uniformly sample up to `limit` exact-match trajectories and expand them."""
    exact = [t for t in trajectories if t.em == 1]
    if len(exact) > limit:
        exact = random.Random(seed).sample(exact, limit)
    records: list[SftRecord] = []
    for traj in exact:
        records.extend(select_training_units(traj, float("-inf")))
    return records


def dedup_records(records: Sequence[SftRecord]) -> list[SftRecord]:
    """Drop records that repeat (question, source, messages) exactly."""
    seen = set()
    out = []
    for rec in records:
        key = (rec.question_id, rec.source, rec.messages)
        if key in seen:
            continue
        seen.add(key)
        out.append(rec)
    return out


def emit_sft(records: Sequence[SftRecord], path: str | Path) -> int:
    """Write records as JSON lines; returns the number of lines written.

    Output is byte-deterministic for identical record sequences.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            line = {
                "source": rec.source,
                "question_id": rec.question_id,
                "reward": rec.reward,
                "messages": [
                    {"role": m.role, "content": m.content, "train": m.train}
                    for m in rec.messages
                ],
            }
            fh.write(json.dumps(line, ensure_ascii=False) + "\n")
    return len(records)


def load_sft(path: str | Path) -> list[SftRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            records.append(
                SftRecord(
                    source=obj["source"],
                    question_id=obj["question_id"],
                    reward=obj["reward"],
                    messages=tuple(
                        SftMessage(m["role"], m["content"], m["train"])
                        for m in obj["messages"]
                    ),
                )
            )
    return records


@dataclass(frozen=True)
class BatchReport:
    iteration: int
    attempted: int
    accepted: int
    mean_reward: float
    k_before: float
    k_after: float

    def __post_init__(self) -> None:
        if self.accepted > self.attempted:
            raise ValueError("accepted cannot exceed attempted")

    def as_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "attempted": self.attempted,
            "accepted": self.accepted,
            "mean_reward": self.mean_reward,
            "k_before": self.k_before,
            "k_after": self.k_after,
        }


def _sample_batch(
    questions: Sequence[QAInstance],
    env,
    llm,
    cfg: SamplerConfig,
    k: float,
    limits: EpisodeLimits | None,
    few_shot: bool,
    workers: int,
) -> list[QuestionSample]:
    if workers <= 1:
        return [sample_question(q, env, llm, cfg, k, limits, few_shot) for q in questions]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(
            pool.map(lambda q: sample_question(q, env, llm, cfg, k, limits, few_shot), questions)
        )


def _contiguous_batches(items: Sequence, t: int) -> list[list]:
    base, extra = divmod(len(items), t)
    batches = []
    start = 0
    for i in range(t):
        size = base + (1 if i < extra else 0)
        batches.append(list(items[start : start + size]))
        start += size
    return batches


def _run_hook(command: str | Sequence[str], data_path: Path, iteration: int) -> str | None:
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    argv += ["--data", str(data_path), "--iteration", str(iteration)]
    proc = subprocess.run(argv, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(
            f"trainer hook exited {proc.returncode}: {proc.stderr.strip()[:200]}"
        )
    lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
    return lines[-1].strip() if lines else None


def run_online(
    questions: Sequence[QAInstance],
    t_batches: int,
    env,
    llm,
    cfg: SamplerConfig,
    out_dir: str | Path,
    trainer_hook: str | Sequence[str] | None = None,
    seed: int = 0,
    limits: EpisodeLimits | None = None,
    few_shot: bool = True,
    workers: int = 1,
    dedup: bool = True,
) -> list[BatchReport]:
    """Alternate sampling and (external) training over contiguous batches.

    Questions are shuffled once with the given seed and split into
    `t_batches` contiguous batches. Per iteration: sample the batch at the
    current threshold, tighten the threshold from the batch's first-pass
    rewards, select and emit that iteration's dataset, then optionally hand
    the dataset path to the trainer hook. The hook's last stdout line, when
    present, renames the backend model for the next iteration.
    """
    if not 1 <= t_batches <= len(questions):
        raise ValueError(f"need 1 <= t_batches <= {len(questions)}, got {t_batches}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    order = list(questions)
    random.Random(seed).shuffle(order)
    batches = _contiguous_batches(order, t_batches)

    state = ThresholdState(k=cfg.k_init)
    reports: list[BatchReport] = []
    for iteration, batch in enumerate(batches, start=1):
        k_before = state.k
        samples = _sample_batch(batch, env, llm, cfg, k_before, limits, few_shot, workers)
        state = update_threshold(state, [s.first_reward for s in samples])

        records: list[SftRecord] = []
        accepted: list[Trajectory] = []
        for sample in samples:
            for traj in sample.kept:
                accepted.append(traj)
                records.extend(select_training_units(traj, state.k))
        if dedup:
            records = dedup_records(records)

        data_path = out_dir / f"sft_iter{iteration:03d}.jsonl"
        emit_sft(records, data_path)
        save_trajectories(accepted, out_dir / f"trajectories_iter{iteration:03d}.jsonl")
        save_threshold_state(state, out_dir / "threshold_state.json")

        mean_reward = sum(s.first_reward for s in samples) / len(samples)
        reports.append(
            BatchReport(
                iteration=iteration,
                attempted=sum(s.attempts for s in samples),
                accepted=len(accepted),
                mean_reward=mean_reward,
                k_before=k_before,
                k_after=state.k,
            )
        )
        if trainer_hook is not None:
            try:
                new_model = _run_hook(trainer_hook, data_path, iteration)
            except RuntimeError as exc:
                raise HookFailedError(str(exc), iteration, reports) from exc
            if new_model and hasattr(llm, "model"):
                llm.model = new_model
    return reports


def run_offline(
    questions: Sequence[QAInstance],
    env,
    llm,
    cfg: SamplerConfig,
    out_dir: str | Path,
    limits: EpisodeLimits | None = None,
    few_shot: bool = True,
    workers: int = 1,
    dedup: bool = True,
) -> tuple[Path, BatchReport]:
    """One sampling pass with the threshold fixed at k_init; single dataset."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = _sample_batch(list(questions), env, llm, cfg, cfg.k_init, limits, few_shot, workers)

    records: list[SftRecord] = []
    accepted: list[Trajectory] = []
    for sample in samples:
        for traj in sample.kept:
            accepted.append(traj)
            records.extend(select_training_units(traj, cfg.k_init))
    if dedup:
        records = dedup_records(records)

    data_path = out_dir / "sft_data.jsonl"
    emit_sft(records, data_path)
    save_trajectories(accepted, out_dir / "trajectories.jsonl")
    mean_reward = (
        sum(s.first_reward for s in samples) / len(samples) if samples else 0.0
    )
    report = BatchReport(
        iteration=1,
        attempted=sum(s.attempts for s in samples),
        accepted=len(accepted),
        mean_reward=mean_reward,
        k_before=cfg.k_init,
        k_after=cfg.k_init,
    )
    return data_path, report
