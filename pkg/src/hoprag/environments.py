"""Retrieval environments: a triple-store KG entered via topic entities,
and a passage corpus searched lexically (or through an embedding service).

File formats:
  corpus   JSON lines, one object per passage {"id", "title", "text"}
  kg       TSV with three columns head/relation/tail; optional labels TSV
  dataset  JSON array of {"_id", "question", "answer",
           optional "answer_aliases", optional "topic_entities"}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .tags import ENV_KG, ENV_TEXT

MAX_MATERIALS = 64


class RetrievalError(Exception):
    """A per-call retrieval failure (recoverable at the worker level)."""


class UnknownEntityError(RetrievalError):
    """An entity handle does not resolve in the store."""


class EmptyCorpusError(ValueError):
    """An index build was requested over zero passages."""


class DuplicateIdError(ValueError):
    """Two passages share an id."""


@dataclass(frozen=True)
class Triple:
    head: str
    relation: str
    tail: str


@dataclass(frozen=True)
class Passage:
    id: str
    title: str
    body: str


@dataclass(frozen=True)
class QAInstance:
    id: str
    question: str
    gold_answers: tuple[str, ...]
    topic_entities: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.gold_answers:
            raise ValueError(f"question {self.id!r} has no gold answer")


class KgStore:
    """Immutable triple store with a head-entity adjacency index.

    Duplicate triples are dropped; insertion order is preserved so that
    neighbor listings (and the materials the worker sees) are stable.
    """

    def __init__(self, triples: Sequence[Triple], labels: dict[str, str] | None = None):
        seen: set[Triple] = set()
        ordered: list[Triple] = []
        for t in triples:
            if t not in seen:
                seen.add(t)
                ordered.append(t)
        self.triples: tuple[Triple, ...] = tuple(ordered)
        self.label_index: dict[str, str] = dict(labels or {})
        for t in self.triples:
            self.label_index.setdefault(t.head, t.head)
            self.label_index.setdefault(t.tail, t.tail)
        self._by_head: dict[str, list[Triple]] = {}
        for t in self.triples:
            self._by_head.setdefault(t.head, []).append(t)

    def label(self, handle: str) -> str:
        return self.label_index.get(handle, handle)

    def __contains__(self, handle: str) -> bool:
        return handle in self.label_index


def kg_neighbors(store: KgStore, entity: str) -> list[Triple]:
    """All triples with `entity` as head, in insertion order."""
    if entity not in store:
        raise UnknownEntityError(f"unknown entity handle: {entity!r}")
    return list(store._by_head.get(entity, []))


def format_triple(store: KgStore, triple: Triple) -> str:
    return f"{store.label(triple.head)}, {triple.relation}, {store.label(triple.tail)}"


def format_materials(items: Sequence[str]) -> str:
    """Render items as zero-based '[i] content' lines, newline separated."""
    if len(items) > MAX_MATERIALS:
        raise ValueError(f"at most {MAX_MATERIALS} materials per call, got {len(items)}")
    return "\n".join(f"[{i}] {text}" for i, text in enumerate(items))


@dataclass
class Corpus:
    passages: list[Passage] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for p in self.passages:
            if p.id in seen:
                raise DuplicateIdError(f"duplicate passage id: {p.id!r}")
            seen.add(p.id)
            if not p.body:
                raise ValueError(f"passage {p.id!r} has an empty body")

    def __len__(self) -> int:
        return len(self.passages)


@dataclass(frozen=True)
class Material:
    """One retrievable unit shown to a worker, with provenance for the engine."""

    text: str
    tail: str | None = None
    passage_id: str | None = None


class KgEnvironment:
    """Knowledge-graph environment: materials are the target's head triples."""

    kind = ENV_KG

    def __init__(self, store: KgStore):
        self.store = store

    def materials(self, question: str, target: str | None, top_k: int) -> list[Material]:
        if target is None:
            raise RetrievalError("KG retrieval requires a target entity")
        triples = kg_neighbors(self.store, target)
        return [
            Material(text=format_triple(self.store, t), tail=t.tail) for t in triples
        ]

    def labels(self, handles: Sequence[str]) -> list[str]:
        return [self.store.label(h) for h in handles]


class TextEnvironment:
    """Text-corpus environment with a pluggable retriever.

    The default retriever is the lexical BM25 index; pass `retriever` to use
    something else (e.g. an embedding index). A retriever exposes
    retrieve(query, k) -> list of (Passage, score).
    """

    kind = ENV_TEXT

    def __init__(self, corpus: Corpus, retriever=None):
        from .bm25 import Bm25Index  # local import to keep module load light

        self.corpus = corpus
        self.retriever = retriever if retriever is not None else Bm25Index(corpus)

    def materials(self, question: str, target: str | None, top_k: int) -> list[Material]:
        ranked = self.retriever.retrieve(question, top_k)
        return [Material(text=p.body, passage_id=p.id) for p, _score in ranked]

    def labels(self, handles: Sequence[str]) -> list[str]:
        return list(handles)


def load_corpus_jsonl(path: str | Path) -> Corpus:
    passages = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            passages.append(
                Passage(id=str(obj["id"]), title=obj.get("title", ""), body=obj["text"])
            )
    return Corpus(passages)


def load_kg_tsv(path: str | Path, labels_path: str | Path | None = None) -> KgStore:
    triples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            head, relation, tail = line.split("\t")
            triples.append(Triple(head, relation, tail))
    labels: dict[str, str] = {}
    if labels_path is not None:
        with open(labels_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                handle, label = line.split("\t")
                labels[handle] = label
    return KgStore(triples, labels)


def load_dataset_json(path: str | Path) -> list[QAInstance]:
    with open(path, encoding="utf-8") as fh:
        rows = json.load(fh)
    instances = []
    for row in rows:
        golds = [row["answer"]] + list(row.get("answer_aliases", []))
        instances.append(
            QAInstance(
                id=str(row["_id"]),
                question=row["question"],
                gold_answers=tuple(golds),
                topic_entities=tuple(row.get("topic_entities", [])),
            )
        )
    return instances
