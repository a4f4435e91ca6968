"""Lexical retrieval feeding worker prompts.

Index a handful of passages, run a few queries through BM25, and render
the indexed materials block exactly as a worker would receive it.
"""
from hoprag.bm25 import index_corpus, retrieve
from hoprag.environments import Corpus, Passage, format_materials
from hoprag.prompts import worker_question
from hoprag.tags import parse_worker_reply

PASSAGES = [
    Passage("p0", "Kyeon Mi-ri", "Kyeon Mi-ri graduated from Seoul Traditional Arts High School in 1983, then studied Dance at Sejong University."),
    Passage("p1", "Sejong University", "Sejong University is a private university in Seoul known for dance, hotel management, and animation programs."),
    Passage("p2", "Glaciers", "Glaciers are persistent bodies of dense ice moving under their own weight."),
    Passage("p3", "Jazz", "Jazz is a music genre that originated in New Orleans with roots in blues and ragtime."),
    Passage("p4", "Sourdough", "Sourdough bread rises through fermentation by wild yeast and lactic acid bacteria."),
]


def main() -> None:
    index = index_corpus(Corpus(PASSAGES))
    for query in [
        "What college did Kyeon Mi-ri attend?",
        "music with New Orleans roots",
        "quartz zeppelin",  # shares no vocabulary: returns nothing
    ]:
        ranked = retrieve(index, query, 3)
        print(f"query: {query!r}")
        for passage, score in ranked:
            print(f"  {score:6.3f}  [{passage.id}] {passage.title}")
        if not ranked:
            print("  (no match)")
        print()

    top = [p.body for p, _ in retrieve(index, "What college did Kyeon Mi-ri attend?", 3)]
    block = format_materials(top)
    print("worker prompt user turn:")
    print(worker_question("text", "What college did Kyeon Mi-ri attend?", block))

    reply = (
        "<think> Passage [0] says it. </think>\n<select> [0] </select>\n"
        "<sentence> Kyeon Mi-ri attended Sejong University. </sentence>"
    )
    selected, sentence = parse_worker_reply(reply)
    print(f"\nparsed worker reply: selected={selected} sentence={sentence!r}")


if __name__ == "__main__":
    main()
