"""Tag-grammar parsing and rendering for planner and worker turns.

Planner turns carry an optional <think> block followed by either search
requests (<search> tags in text environments, Search([i], "...") lines
inside an <action> block in KG environments) or a final <answer>. Worker
turns carry <select> with bracketed indices and a <sentence> reply.

Tag names are case-sensitive. The first well-formed occurrence wins for
<think> and <answer>; every occurrence is collected for <search>. An
<answer> takes precedence over any searches in the same message.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

ENV_TEXT = "text"
ENV_KG = "kg"
ENV_KINDS = (ENV_TEXT, ENV_KG)


class TagError(ValueError):
    """Base class for tag-grammar parse failures."""


class MalformedActionError(TagError):
    """A planner message contains neither a parseable search nor an answer."""


class MalformedReplyError(TagError):
    """A worker message is missing or corrupting its select/sentence tags."""


class IndexOutOfRangeError(TagError):
    """A KG search referenced a candidate index that does not exist."""


_THINK = re.compile(r"<think>(.*?)</think>", re.DOTALL)
_ANSWER = re.compile(r"<answer>(.*?)</answer>", re.DOTALL)
_SEARCH = re.compile(r"<search>(.*?)</search>", re.DOTALL)
_ACTION = re.compile(r"<action>(.*?)</action>", re.DOTALL)
_SELECT = re.compile(r"<select>(.*?)</select>", re.DOTALL)
_SENTENCE = re.compile(r"<sentence>(.*?)</sentence>", re.DOTALL)
_KG_SEARCH = re.compile(r'Search\(\s*\[(\d+)\]\s*,\s*"([^"\n]*)"\s*\)')
_BRACKET_INDEX = re.compile(r"\[(-?\d+)\]")

KIND_SEARCH = "search"
KIND_ANSWER = "answer"


@dataclass(frozen=True)
class Subquestion:
    """One dispatched subquestion; `target` is a candidate index in KG mode."""

    target: int | None
    question: str


@dataclass(frozen=True)
class PlannerAction:
    think: str
    kind: str
    subquestions: tuple[Subquestion, ...] = ()
    answer: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in (KIND_SEARCH, KIND_ANSWER):
            raise ValueError(f"unknown action kind: {self.kind!r}")
        if self.kind == KIND_SEARCH and not self.subquestions:
            raise ValueError("search actions need at least one subquestion")
        if self.kind == KIND_ANSWER and self.answer is None:
            raise ValueError("answer actions need an answer")


def _check_env_kind(env_kind: str) -> None:
    if env_kind not in ENV_KINDS:
        raise ValueError(f"env_kind must be one of {ENV_KINDS}, got {env_kind!r}")


def parse_planner_action(
    raw: str, env_kind: str, n_candidates: int | None = None
) -> PlannerAction:
    """Parse one planner message into a PlannerAction.

    `n_candidates`, when given for KG messages, range-checks the bracketed
    candidate indices and raises IndexOutOfRangeError on an unknown one.
    """
    _check_env_kind(env_kind)
    think_match = _THINK.search(raw)
    think = think_match.group(1).strip() if think_match else ""

    answer_match = _ANSWER.search(raw)
    if answer_match:
        return PlannerAction(
            think=think, kind=KIND_ANSWER, answer=answer_match.group(1).strip()
        )

    if env_kind == ENV_TEXT:
        queries = [q.strip() for q in _SEARCH.findall(raw)]
        queries = [q for q in queries if q]
        if not queries:
            raise MalformedActionError(
                "no <answer> tag and no non-empty <search> tag found"
            )
        subs = tuple(Subquestion(target=None, question=q) for q in queries)
        return PlannerAction(think=think, kind=KIND_SEARCH, subquestions=subs)

    action_match = _ACTION.search(raw)
    if not action_match:
        raise MalformedActionError("no <answer> tag and no <action> block found")
    pairs = _KG_SEARCH.findall(action_match.group(1))
    if not pairs:
        raise MalformedActionError(
            'no Search([i], "...") lines found inside <action>'
        )
    subs = []
    for index_text, question in pairs:
        index = int(index_text)
        if n_candidates is not None and index >= n_candidates:
            raise IndexOutOfRangeError(
                f"candidate index {index} out of range (have {n_candidates})"
            )
        subs.append(Subquestion(target=index, question=question.strip()))
    return PlannerAction(think=think, kind=KIND_SEARCH, subquestions=tuple(subs))


def parse_worker_reply(raw: str) -> tuple[list[int], str]:
    """Parse a worker message into (selected indices, declarative sentence).

    `[-1]` on its own signals that no material supports the answer; it may
    not co-occur with real indices.
    """
    select_match = _SELECT.search(raw)
    if not select_match:
        raise MalformedReplyError("missing <select> tag")
    sentence_match = _SENTENCE.search(raw)
    if not sentence_match:
        raise MalformedReplyError("missing <sentence> tag")
    indices = [int(tok) for tok in _BRACKET_INDEX.findall(select_match.group(1))]
    if not indices:
        raise MalformedReplyError("no bracketed integer index inside <select>")
    if any(i < -1 for i in indices):
        raise MalformedReplyError(f"invalid negative index in {indices}")
    if -1 in indices and len(indices) > 1:
        raise MalformedReplyError("[-1] cannot co-occur with other indices")
    return indices, sentence_match.group(1).strip()


def render_planner_action(action: PlannerAction, env_kind: str) -> str:
    """Render a PlannerAction back to tagged text (inverse of parsing)."""
    _check_env_kind(env_kind)
    parts = [f"<think>{action.think}</think>"]
    if action.kind == KIND_ANSWER:
        parts.append(f"<answer>{action.answer}</answer>")
    elif env_kind == ENV_TEXT:
        parts.extend(f"<search>{s.question}</search>" for s in action.subquestions)
    else:
        lines = "\n".join(
            f'Search([{s.target}], "{s.question}")' for s in action.subquestions
        )
        parts.append(f"<action>\n{lines}\n</action>")
    return "\n".join(parts)


def render_worker_reply(selected: list[int], sentence: str, think: str = "") -> str:
    brackets = "".join(f"[{i}]" for i in selected)
    return (
        f"<think>{think}</think>\n"
        f"<select> {brackets} </select>\n"
        f"<sentence> {sentence} </sentence>"
    )
