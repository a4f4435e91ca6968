"""Answer normalization and the EM / token-F1 scores.

These scores double as the terminal reward for an episode, so the
normalization rules here are the single source of truth for "did the
agent answer correctly": lowercase, strip Unicode punctuation, drop the
articles a/an/the, split on whitespace.
"""
from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

_ARTICLES = frozenset({"a", "an", "the"})


class EmptySetError(ValueError):
    """An aggregate was requested over zero prediction pairs."""


def normalize_answer(raw: str) -> list[str]:
    """Normalize an answer string into a token list.

    The result is idempotent: normalizing the space-joined tokens yields
    the same list. Punctuation removal covers all Unicode P* categories,
    not just ASCII, so non-English answers normalize cleanly.
    """
    lowered = raw.lower()
    stripped = "".join(
        ch for ch in lowered if not unicodedata.category(ch).startswith("P")
    )
    return [tok for tok in stripped.split() if tok not in _ARTICLES]


@dataclass(frozen=True)
class ScorePair:
    """One prediction's scores: binary exact match and token F1 in [0, 1]."""

    em: int
    f1: float

    def __post_init__(self) -> None:
        if self.em not in (0, 1):
            raise ValueError(f"em must be 0 or 1, got {self.em!r}")
        if not 0.0 <= self.f1 <= 1.0:
            raise ValueError(f"f1 out of range: {self.f1!r}")
        if self.em == 1 and self.f1 != 1.0:
            raise ValueError("exact match implies f1 == 1.0")


def exact_match(pred: str, gold: str) -> int:
    return int(normalize_answer(pred) == normalize_answer(gold))


def f1(pred: str, gold: str) -> float:
    """Token-level F1 = 2PR/(P+R) over the normalized bag-of-tokens overlap.

    Shared tokens count once per occurrence on each side, i.e. the overlap
    is the multiset intersection. Two empty strings score 1.0; one empty
    side scores 0.0.
    """
    pred_tokens = normalize_answer(pred)
    gold_tokens = normalize_answer(gold)
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def score_pair(pred: str, gold: str) -> ScorePair:
    return ScorePair(em=exact_match(pred, gold), f1=f1(pred, gold))


def best_score(pred: str, golds: Sequence[str]) -> ScorePair:
    """Best ScorePair of `pred` against any of several gold answers."""
    if not golds:
        raise EmptySetError("at least one gold answer is required")
    return max((score_pair(pred, g) for g in golds), key=lambda s: (s.em, s.f1))


def aggregate(pairs: Iterable[tuple[str, str]]) -> tuple[float, float]:
    """Mean EM and F1 over (pred, gold) pairs, as percentages to 2 decimals."""
    scored = [score_pair(p, g) for p, g in pairs]
    if not scored:
        raise EmptySetError("cannot aggregate an empty list of pairs")
    mean_em = sum(s.em for s in scored) / len(scored)
    mean_f1 = sum(s.f1 for s in scored) / len(scored)
    return round(mean_em * 100, 2), round(mean_f1 * 100, 2)
