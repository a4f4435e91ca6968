"""Prompt assembly for planner and worker turns.

The four role templates (planner/worker x text/kg) live as versioned JSON
assets next to this module. Each asset carries the system prompt plus a
one-example few-shot dialogue; few-shot inclusion is a caller toggle so
fine-tuned models can run on the bare tag grammar.
"""
from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path
from typing import Sequence

from .tags import ENV_TEXT

_ASSET_DIR = Path(__file__).parent / "assets"

PLANNER = "planner"
WORKER = "worker"

OBS_PREFIX = "Obs: "

# Sent once as a user turn when a planner message fails to parse.
PLANNER_REPAIR_TEXT = (
    "Format reminder: reply with <think>...</think> followed by one or more "
    "<search>...</search> tags, or give the final answer inside "
    "<answer>...</answer>."
)
PLANNER_REPAIR_KG = (
    "Format reminder: reply with <think>...</think> followed by an <action> "
    'block of Search([i], "...") lines over the candidate indices, or give '
    "the final answer inside <answer>...</answer>."
)


@lru_cache(maxsize=None)
def load_template(role: str, env_kind: str) -> dict:
    """Load one template asset as {"system": str, "few_shot": [messages]}."""
    name = f"{role}_{env_kind}.json"
    path = _ASSET_DIR / name
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def system_prompt(role: str, env_kind: str) -> str:
    return load_template(role, env_kind)["system"]


def few_shot_messages(role: str, env_kind: str) -> list[dict]:
    return list(load_template(role, env_kind)["few_shot"])


def planner_question(env_kind: str, question: str, candidates: Sequence[str] = ()) -> str:
    """Render the opening user message for a planner conversation."""
    if env_kind == ENV_TEXT:
        return f"Question: {question}"
    candidate_line = " ".join(f"[{i}] {label}" for i, label in enumerate(candidates))
    return f"Question: {question}\nCandidate: {candidate_line}"


def worker_question(env_kind: str, subquestion: str, materials_block: str) -> str:
    """Render the single user message a worker sees for one subquestion."""
    header = "Context:" if env_kind == ENV_TEXT else "Materials:"
    return f"Question: {subquestion}\n{header}\n{materials_block}"


def planner_messages(
    env_kind: str,
    question: str,
    candidates: Sequence[str] = (),
    few_shot: bool = True,
) -> tuple[list[dict], int]:
    """Build the opening planner conversation.

    Returns (messages, n_few_shot) where n_few_shot counts the example
    messages inserted between the system prompt and the real question, so
    downstream dataset emission can strip them.
    """
    messages = [{"role": "system", "content": system_prompt(PLANNER, env_kind)}]
    shots = few_shot_messages(PLANNER, env_kind) if few_shot else []
    messages.extend(shots)
    messages.append({"role": "user", "content": planner_question(env_kind, question, candidates)})
    return messages, len(shots)


def worker_messages(
    env_kind: str,
    subquestion: str,
    materials_block: str,
    few_shot: bool = True,
) -> list[dict]:
    """Build the single-turn worker conversation for one subquestion."""
    messages = [{"role": "system", "content": system_prompt(WORKER, env_kind)}]
    if few_shot:
        messages.extend(few_shot_messages(WORKER, env_kind))
    messages.append(
        {"role": "user", "content": worker_question(env_kind, subquestion, materials_block)}
    )
    return messages


def planner_repair(env_kind: str) -> str:
    return PLANNER_REPAIR_TEXT if env_kind == ENV_TEXT else PLANNER_REPAIR_KG


def assemble_observation(sentences: Sequence[str]) -> str:
    """Merge worker sentences, in dispatch order, into one environment turn."""
    return OBS_PREFIX + " ".join(sentences)
