"""Shared fixtures: the toy KG, small corpora, and scripted dialogues."""
from __future__ import annotations

import pytest

from hoprag.environments import (
    Corpus,
    KgEnvironment,
    KgStore,
    Passage,
    QAInstance,
    TextEnvironment,
    Triple,
)
from hoprag.gateway import ScriptedBackend, ScriptedRule

# One movie-lineage triple plus the full neighborhood of the example entity
# (8 head triples), the two inverse family links, and two film-date triples.
TOY_TRIPLES = [
    ("Polish-Russian War (Film)", "director", "Xawery Żuławski"),
    ("Xawery Żuławski", "mother", "Małgorzata Braunek"),
    ("Xawery Żuławski", "father", "Andrzej Żuławski"),
    ("Xawery Żuławski", "family", "Q63532193"),
    ("Xawery Żuławski", "family name", "Q56541485"),
    ("Xawery Żuławski", "spouse", "Maria Strzelecka"),
    ("Xawery Żuławski", "date of birth", "1971-12-22T00:00:00Z"),
    ("Xawery Żuławski", "sibling", "Vincent Zulawski"),
    ("Xawery Żuławski", "place of birth", "Warsaw"),
    ("Andrzej Żuławski", "child", "Xawery Żuławski"),
    ("Małgorzata Braunek", "child", "Xawery Żuławski"),
    ("Blind Shaft", "publication date", "2003"),
    ("The Mask Of Fu Manchu", "publication date", "1932"),
]

KYEON_PASSAGES = [
    ("p0", "Kyeon Mi-ri", "Kyeon Mi-ri graduated from Seoul Traditional Arts High School in 1983, then studied Dance at Sejong University. She made her acting debut in 1984."),
    ("p1", "Shin Kyeong-nim", "Shin Kyeong-nim was born on April 6, 1936 in North Chungcheong Province, South Korea. He graduated in English Literature from Dongguk University."),
    ("p2", "Paige Ackerson-Kiely", "Paige Ackerson-Kiely received a BA in Asian Studies from the University of New Mexico. She attended Beloit College in Beloit, Wisconsin."),
    ("p3", "Han Seung-yeon", "Han Seung-yeon passed the College Scholastic Ability Test and was accepted by Kyung Hee University, majoring in theater and film."),
    ("p4", "Myo Min Zaw", "Myo Min Zaw studied English at the University of Yangon and joined a student union there."),
    ("p5", "Glaciers", "Glaciers are persistent bodies of dense ice moving under their own weight over land."),
    ("p6", "Jazz", "Jazz is a music genre that originated in New Orleans with roots in blues and ragtime."),
    ("p7", "Volcanoes", "Volcanoes are ruptures in a planetary crust that allow lava and gases to escape."),
    ("p8", "Compilers", "Compilers translate source programs into machine code through parsing and code generation."),
    ("p9", "Pasta", "Pasta is a staple food made from an unleavened dough of wheat flour mixed with water."),
]

NAMIBIA_PASSAGES = [
    ("n0", "Sam Nujoma", "Sam Nujoma was a Namibian revolutionary politician. Sam Nujoma served as the first President of Namibia from 1990 to 2005."),
    ("n1", "Hifikepunye Pohamba", "Hifikepunye Pohamba is a Namibian politician. Hifikepunye Pohamba succeeded Sam Nujoma as the President of Namibia in 2005."),
]


def make_corpus(rows) -> Corpus:
    return Corpus([Passage(id=i, title=t, body=b) for i, t, b in rows])


def make_store() -> KgStore:
    return KgStore([Triple(*t) for t in TOY_TRIPLES])


@pytest.fixture
def toy_store() -> KgStore:
    return make_store()


@pytest.fixture
def kg_env(toy_store) -> KgEnvironment:
    return KgEnvironment(toy_store)


@pytest.fixture
def kyeon_corpus() -> Corpus:
    return make_corpus(KYEON_PASSAGES)


@pytest.fixture
def namibia_env() -> TextEnvironment:
    return TextEnvironment(make_corpus(NAMIBIA_PASSAGES))


PRW_QUESTION = QAInstance(
    id="prw-1",
    question="Who is the mother of the director of film Polish-Russian War (Film)?",
    gold_answers=("Małgorzata Braunek",),
    topic_entities=("Polish-Russian War (Film)",),
)

FILMS_QUESTION = QAInstance(
    id="films-1",
    question="Which film came out first, Blind Shaft or The Mask Of Fu Manchu?",
    gold_answers=("The Mask Of Fu Manchu",),
    topic_entities=("Blind Shaft", "The Mask Of Fu Manchu"),
)

NAMIBIA_QUESTION = QAInstance(
    id="nam-1",
    question="Who succeeded the first President of Namibia?",
    gold_answers=("Hifikepunye Pohamba",),
)

# Worker rules come first so their substrings outrank planner rules.
PRW_RULES = [
    ScriptedRule(
        matcher="substring",
        pattern="Question: Who is the director of Polish-Russian War (Film)?",
        response=(
            "<think> [0] gives the director. </think>\n"
            "<select> [0] </select>\n"
            "<sentence> The director of Polish-Russian War (Film) is Xawery Żuławski. </sentence>"
        ),
    ),
    ScriptedRule(
        matcher="substring",
        pattern="Question: Who is the mother of Xawery Żuławski?",
        response=(
            "<think> The question asks me to find the mother of Xawery Żuławski. "
            "[0] says Xawery Żuławski's mother Małgorzata Braunek, which excatly meets our need. </think>\n"
            "<select> [0] </select>\n"
            "<sentence> The mother of Xawery Żuławski is Małgorzata Braunek. </sentence>"
        ),
    ),
    ScriptedRule(
        matcher="substring",
        pattern="mother of the director",
        response=(
            "<think>I need the director of the film first, then the director's mother.</think>\n"
            '<action>\nSearch([0], "Who is the director of Polish-Russian War (Film)?")\n</action>'
        ),
    ),
    ScriptedRule(
        matcher="substring",
        pattern="Obs: The director of Polish-Russian War",
        response=(
            "<think>Now I need the mother of Xawery Żuławski.</think>\n"
            '<action>\nSearch([1], "Who is the mother of Xawery Żuławski?")\n</action>'
        ),
    ),
    ScriptedRule(
        matcher="substring",
        pattern="Obs: The mother of Xawery Żuławski",
        response="<think>I have the answer now.</think>\n<answer> Małgorzata Braunek </answer>",
    ),
]

FILMS_RULES = [
    ScriptedRule(
        matcher="substring",
        pattern="When did Blind Shaft come out?",
        response=(
            "<think> [0] gives the date. </think>\n<select> [0] </select>\n"
            "<sentence> Blind Shaft came out on 2003. </sentence>"
        ),
    ),
    ScriptedRule(
        matcher="substring",
        pattern="When did The Mask Of Fu Manchu come out?",
        response=(
            "<think> [0] gives the date. </think>\n<select> [0] </select>\n"
            "<sentence> The Mask Of Fu Manchu came out on 1932. </sentence>"
        ),
    ),
    ScriptedRule(
        matcher="substring",
        pattern="Which film came out first",
        response=(
            "<think>\nTo solve this problem, I need to:\n"
            "1. Figure out when Blind Shaft came out.\n"
            "2. Figure out when The Mask Of Fu Manchu came out.\n"
            "3. Compare their dates.\n"
            "I need to search information for both of Blind Shaft and The Mask Of Fu Manchu.\n"
            "</think>\n<action>\n"
            'Search([0], "When did Blind Shaft come out?")\n'
            'Search([1], "When did The Mask Of Fu Manchu come out?")\n'
            "</action>"
        ),
    ),
    ScriptedRule(
        matcher="substring",
        pattern="came out on 2003.",
        response=(
            "<think> Ok. Right now I need compare their released date. 1932 is much earlier "
            "than 2003. Therefore, The Mask Of Fu Manchu came out first. </think>\n"
            "<answer> The Mask Of Fu Manchu </answer>"
        ),
    ),
]


@pytest.fixture
def prw_backend() -> ScriptedBackend:
    return ScriptedBackend(PRW_RULES, seed=0)


@pytest.fixture
def films_backend() -> ScriptedBackend:
    return ScriptedBackend(FILMS_RULES, seed=0)


def assert_alternation(traj) -> None:
    """Roles must go system, then user/assistant strictly alternating."""
    roles = [m.role for m in traj.messages]
    assert roles[0] == "system"
    assert roles[1] == "user"
    for earlier, later in zip(roles[1:], roles[2:]):
        assert {earlier, later} == {"user", "assistant"}, roles
