"""Walk through one planner-worker episode over a tiny knowledge graph.

The planner sees the question plus candidate entities, decomposes it,
and dispatches subquestions to workers that read triples off the graph.
A scripted backend plays both roles so the run is fully offline.
"""
from hoprag.environments import KgEnvironment, KgStore, QAInstance, Triple
from hoprag.episode import EpisodeLimits, run_episode, score_trajectory
from hoprag.gateway import ScriptedBackend, ScriptedRule

TRIPLES = [
    Triple("Polish-Russian War (Film)", "director", "Xawery Żuławski"),
    Triple("Xawery Żuławski", "mother", "Małgorzata Braunek"),
    Triple("Xawery Żuławski", "father", "Andrzej Żuławski"),
    Triple("Xawery Żuławski", "place of birth", "Warsaw"),
]

QUESTION = QAInstance(
    id="demo-1",
    question="Who is the mother of the director of film Polish-Russian War (Film)?",
    gold_answers=("Małgorzata Braunek",),
    topic_entities=("Polish-Russian War (Film)",),
)

# Worker rules first so their substrings win over the planner rules.
RULES = [
    ScriptedRule(
        matcher="substring",
        pattern="Question: Who is the director of Polish-Russian War (Film)?",
        response=(
            "<think> [0] names the director. </think>\n<select> [0] </select>\n"
            "<sentence> The director of Polish-Russian War (Film) is Xawery Żuławski. </sentence>"
        ),
    ),
    ScriptedRule(
        matcher="substring",
        pattern="Question: Who is the mother of Xawery Żuławski?",
        response=(
            "<think> [0] names the mother. </think>\n<select> [0] </select>\n"
            "<sentence> The mother of Xawery Żuławski is Małgorzata Braunek. </sentence>"
        ),
    ),
    ScriptedRule(
        matcher="substring",
        pattern="mother of the director",
        response=(
            "<think>Find the director first, then the director's mother.</think>\n"
            '<action>\nSearch([0], "Who is the director of Polish-Russian War (Film)?")\n</action>'
        ),
    ),
    ScriptedRule(
        matcher="substring",
        pattern="Obs: The director of",
        response=(
            "<think>The director is Xawery Żuławski; now the mother.</think>\n"
            '<action>\nSearch([1], "Who is the mother of Xawery Żuławski?")\n</action>'
        ),
    ),
    ScriptedRule(
        matcher="substring",
        pattern="Obs: The mother of",
        response="<think>Done.</think>\n<answer> Małgorzata Braunek </answer>",
    ),
]


def main() -> None:
    env = KgEnvironment(KgStore(TRIPLES))
    backend = ScriptedBackend(RULES, seed=0)
    traj = run_episode(QUESTION, env, backend, EpisodeLimits(), few_shot=False)
    traj = score_trajectory(traj, QUESTION.gold_answers)

    print("=== conversation ===")
    for message in traj.messages:
        print(f"--- {message.role} ---")
        print(message.content)
    print("\n=== worker calls ===")
    for call in traj.worker_calls:
        print(f"subquestion: {call.subquestion}")
        print(f"materials:\n{call.materials}")
        print(f"selected {list(call.selected)} -> {call.sentence}\n")
    print("=== outcome ===")
    print(f"final answer       : {traj.final_answer}")
    print(f"reward (token F1)  : {traj.reward}")
    print(f"search iterations  : {traj.iterations_used}")


if __name__ == "__main__":
    main()
