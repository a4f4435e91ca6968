"""Lexical retrieval over a passage corpus with an Okapi BM25 inverted index.

Scoring, for a query token q against document d:

    idf(q) = ln(1 + (N - df + 0.5) / (df + 0.5))
    tf_part = tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
    score(d) = sum over query tokens (with multiplicity) of idf * tf_part

Documents are indexed over title + body. Zero-score documents are never
returned, and ties break by ascending passage id so rankings are total.
"""
from __future__ import annotations

import json
import math
import re
from collections import Counter
from pathlib import Path

from .environments import Corpus, EmptyCorpusError, Passage

_WORD = re.compile(r"\w+", re.UNICODE)

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


def tokenize(text: str) -> list[str]:
    return [t.lower() for t in _WORD.findall(text)]


class Bm25Index:
    def __init__(self, corpus: Corpus, k1: float = DEFAULT_K1, b: float = DEFAULT_B):
        if len(corpus) == 0:
            raise EmptyCorpusError("cannot index an empty corpus")
        self.k1 = k1
        self.b = b
        self.passages: list[Passage] = list(corpus.passages)
        self.doc_len: list[int] = []
        self.postings: dict[str, list[tuple[int, int]]] = {}
        for pos, passage in enumerate(self.passages):
            tokens = tokenize(passage.title + " " + passage.body)
            self.doc_len.append(len(tokens))
            for term, tf in Counter(tokens).items():
                self.postings.setdefault(term, []).append((pos, tf))
        self.n_docs = len(self.passages)
        self.avgdl = sum(self.doc_len) / self.n_docs

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        if df == 0:
            return 0.0
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))

    def scores(self, query: str) -> dict[int, float]:
        """Score every matching document position for `query`."""
        acc: dict[int, float] = {}
        for term in tokenize(query):
            postings = self.postings.get(term)
            if not postings:
                continue
            idf = self.idf(term)
            for pos, tf in postings:
                dl = self.doc_len[pos]
                norm = self.k1 * (1 - self.b + self.b * dl / self.avgdl)
                acc[pos] = acc.get(pos, 0.0) + idf * tf * (self.k1 + 1) / (tf + norm)
        return acc

    def retrieve(self, query: str, k: int) -> list[tuple[Passage, float]]:
        """Top-k passages by BM25 score; zero scores filtered, id tiebreak."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        scored = [
            (self.passages[pos], score)
            for pos, score in self.scores(query).items()
            if score > 0.0
        ]
        scored.sort(key=lambda item: (-item[1], item[0].id))
        return scored[:k]


def index_corpus(corpus: Corpus, k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> Bm25Index:
    return Bm25Index(corpus, k1=k1, b=b)


def retrieve(index: Bm25Index, query: str, k: int) -> list[tuple[Passage, float]]:
    return index.retrieve(query, k)


def save_index(index: Bm25Index, path: str | Path) -> None:
    payload = {
        "k1": index.k1,
        "b": index.b,
        "passages": [
            {"id": p.id, "title": p.title, "text": p.body} for p in index.passages
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True)


def load_index(path: str | Path) -> Bm25Index:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    corpus = Corpus(
        [Passage(id=p["id"], title=p["title"], body=p["text"]) for p in payload["passages"]]
    )
    return Bm25Index(corpus, k1=payload["k1"], b=payload["b"])
