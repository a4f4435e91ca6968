"""The planner-worker conversation engine.

One episode is a single logical thread of control: the planner reads the
conversation so far, thinks, and either answers or dispatches a batch of
mutually independent subquestions. Each subquestion runs through a worker
(retrieve materials, one chat turn, parse the tagged reply); the workers
of one iteration may execute concurrently and are joined, in dispatch
order, into a single "Obs: ..." environment turn before the next planner
turn. Trajectories are immutable once the episode ends.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import prompts
from .environments import MAX_MATERIALS, Material, QAInstance, RetrievalError, format_materials
from .metrics import best_score
from .tags import (
    ENV_KG,
    KIND_ANSWER,
    PlannerAction,
    Subquestion,
    TagError,
    parse_planner_action,
    parse_worker_reply,
)

FALLBACK_SENTENCE = "No relevant information found."


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def as_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class EpisodeLimits:
    max_iterations: int = 6
    top_k: int = 5
    max_searches_per_turn: int = 4

    def __post_init__(self) -> None:
        for name in ("max_iterations", "top_k", "max_searches_per_turn"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class WorkerCall:
    subquestion: str
    materials: str
    reply_raw: str
    selected: tuple[int, ...]
    sentence: str


@dataclass
class Trajectory:
    question: str
    question_id: str
    env_kind: str
    messages: list[Message] = field(default_factory=list)
    few_shot_messages: int = 0
    final_answer: str | None = None
    reward: float | None = None
    em: int | None = None
    worker_calls: list[WorkerCall] = field(default_factory=list)
    iterations_used: int = 0


@dataclass(frozen=True)
class DispatchResult:
    observation: str
    calls: tuple[WorkerCall, ...]
    discovered: tuple[str, ...]  # new candidate entities, dispatch order


def _complete(llm, messages: Sequence[Message]) -> str:
    return llm.complete([m.as_dict() for m in messages])


def _worker_once(
    subquestion: str,
    env,
    llm,
    limits: EpisodeLimits,
    target: str | None,
    few_shot: bool,
) -> tuple[WorkerCall, list[Material]]:
    materials = env.materials(subquestion, target, limits.top_k)[:MAX_MATERIALS]
    if not materials:
        call = WorkerCall(subquestion, "", "", (-1,), FALLBACK_SENTENCE)
        return call, materials
    block = format_materials([m.text for m in materials])
    raw_messages = prompts.worker_messages(env.kind, subquestion, block, few_shot)
    messages = [Message(**m) for m in raw_messages]

    reply = ""
    for _attempt in range(2):  # one retry on a malformed reply
        reply = _complete(llm, messages)
        try:
            selected, sentence = parse_worker_reply(reply)
        except TagError:
            continue
        if all(i == -1 or 0 <= i < len(materials) for i in selected):
            call = WorkerCall(subquestion, block, reply, tuple(selected), sentence)
            return call, materials
    call = WorkerCall(subquestion, block, reply, (-1,), FALLBACK_SENTENCE)
    return call, materials


def run_worker(
    subquestion: str,
    env,
    llm,
    limits: EpisodeLimits,
    target: str | None = None,
    few_shot: bool = True,
) -> WorkerCall:
    """Answer one subquestion through the mini retrieval-and-read loop.

    A reply that fails to parse (or selects out-of-range materials) is
    retried once, then recorded as a no-information fallback. Empty
    retrieval short-circuits to the fallback without a chat turn.
    """
    call, _materials = _worker_once(subquestion, env, llm, limits, target, few_shot)
    return call


def dispatch_iteration(
    subquestions: Sequence[tuple[str | None, str]],
    env,
    llm,
    limits: EpisodeLimits,
    few_shot: bool = True,
) -> DispatchResult:
    """Run one iteration's worker calls and merge their sentences.

    `subquestions` are (resolved target handle or None, question) pairs;
    they are conditionally independent and may run concurrently, but the
    merged observation always follows dispatch order. A call that fails
    with a retrieval error contributes the fallback sentence instead of
    aborting the iteration; backend failures propagate.
    """
    if not 1 <= len(subquestions) <= limits.max_searches_per_turn:
        raise ValueError(
            f"expected 1..{limits.max_searches_per_turn} subquestions, got {len(subquestions)}"
        )

    def one(pair: tuple[str | None, str]) -> tuple[WorkerCall, list[Material]]:
        target, question = pair
        try:
            return _worker_once(question, env, llm, limits, target, few_shot)
        except RetrievalError:
            return WorkerCall(question, "", "", (-1,), FALLBACK_SENTENCE), []

    if len(subquestions) == 1:
        results = [one(subquestions[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(subquestions)) as pool:
            results = list(pool.map(one, subquestions))

    calls = tuple(call for call, _ in results)
    discovered: list[str] = []
    seen: set[str] = set()
    for call, materials in results:
        for index in call.selected:
            if index < 0 or index >= len(materials):
                continue
            tail = materials[index].tail
            if tail is not None and tail not in seen:
                seen.add(tail)
                discovered.append(tail)
    observation = prompts.assemble_observation([c.sentence for c in calls])
    return DispatchResult(observation=observation, calls=calls, discovered=tuple(discovered))


def run_episode(
    question: QAInstance,
    env,
    llm,
    limits: EpisodeLimits | None = None,
    few_shot: bool = True,
) -> Trajectory:
    """Run one full planner-worker episode for a question.

    The planner loops think/act until it answers or `max_iterations`
    search rounds have been dispatched (one trailing planner turn may
    still answer after the last round). A malformed planner turn gets one
    terse repair reminder; a second failure ends the episode unanswered.
    """
    limits = limits or EpisodeLimits()
    candidates: list[str] = list(question.topic_entities)
    raw_messages, n_shots = prompts.planner_messages(
        env.kind, question.question, env.labels(candidates), few_shot
    )
    traj = Trajectory(
        question=question.question,
        question_id=question.id,
        env_kind=env.kind,
        messages=[Message(**m) for m in raw_messages],
        few_shot_messages=n_shots,
    )

    while True:
        action = _planner_turn(traj, env, llm, candidates)
        if action is None:
            return traj  # failed closed after the repair retry
        if action.kind == KIND_ANSWER:
            traj.final_answer = action.answer
            return traj
        if traj.iterations_used >= limits.max_iterations:
            return traj  # budget exhausted without an answer

        resolved = _resolve_subquestions(action.subquestions, env, candidates, limits)
        result = dispatch_iteration(resolved, env, llm, limits, few_shot)
        traj.worker_calls.extend(result.calls)
        for handle in result.discovered:
            if handle not in candidates:
                candidates.append(handle)
        traj.messages.append(Message("user", result.observation))
        traj.iterations_used += 1


def _planner_turn(traj: Trajectory, env, llm, candidates: list[str]) -> PlannerAction | None:
    n_candidates = len(candidates) if env.kind == ENV_KG else None
    for attempt in range(2):
        raw = _complete(llm, traj.messages)
        traj.messages.append(Message("assistant", raw))
        try:
            return parse_planner_action(raw, env.kind, n_candidates)
        except TagError:
            if attempt == 0:
                traj.messages.append(Message("user", prompts.planner_repair(env.kind)))
    return None


def _resolve_subquestions(
    subquestions: Sequence[Subquestion],
    env,
    candidates: list[str],
    limits: EpisodeLimits,
) -> list[tuple[str | None, str]]:
    # Excess subquestions beyond the per-turn cap are dropped in dispatch order.
    kept = list(subquestions)[: limits.max_searches_per_turn]
    resolved = []
    for sub in kept:
        target = candidates[sub.target] if sub.target is not None else None
        resolved.append((target, sub.question))
    return resolved


def score_trajectory(traj: Trajectory, gold: str | Sequence[str]) -> Trajectory:
    """Attach the terminal reward: F1 against gold (best over aliases).

    An unanswered episode scores 0. EM is recorded alongside for warmup
    selection.
    """
    golds = [gold] if isinstance(gold, str) else list(gold)
    if traj.final_answer is None:
        traj.reward = 0.0
        traj.em = 0
        return traj
    score = best_score(traj.final_answer, golds)
    traj.reward = score.f1
    traj.em = score.em
    return traj


def trajectory_to_dict(traj: Trajectory) -> dict:
    return {
        "question": traj.question,
        "question_id": traj.question_id,
        "env_kind": traj.env_kind,
        "messages": [m.as_dict() for m in traj.messages],
        "few_shot_messages": traj.few_shot_messages,
        "final_answer": traj.final_answer,
        "reward": traj.reward,
        "em": traj.em,
        "iterations_used": traj.iterations_used,
        "worker_calls": [
            {
                "subquestion": c.subquestion,
                "materials": c.materials,
                "reply_raw": c.reply_raw,
                "selected": list(c.selected),
                "sentence": c.sentence,
            }
            for c in traj.worker_calls
        ],
    }


def trajectory_from_dict(payload: dict) -> Trajectory:
    return Trajectory(
        question=payload["question"],
        question_id=payload["question_id"],
        env_kind=payload["env_kind"],
        messages=[Message(**m) for m in payload["messages"]],
        few_shot_messages=payload.get("few_shot_messages", 0),
        final_answer=payload.get("final_answer"),
        reward=payload.get("reward"),
        em=payload.get("em"),
        iterations_used=payload.get("iterations_used", 0),
        worker_calls=[
            WorkerCall(
                subquestion=c["subquestion"],
                materials=c["materials"],
                reply_raw=c["reply_raw"],
                selected=tuple(c["selected"]),
                sentence=c["sentence"],
            )
            for c in payload.get("worker_calls", [])
        ],
    )


def save_trajectories(trajectories: Sequence[Trajectory], path: str | Path) -> int:
    with open(path, "w", encoding="utf-8") as fh:
        for traj in trajectories:
            fh.write(json.dumps(trajectory_to_dict(traj), ensure_ascii=False) + "\n")
    return len(trajectories)


def load_trajectories(path: str | Path) -> list[Trajectory]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(trajectory_from_dict(json.loads(line)))
    return out
