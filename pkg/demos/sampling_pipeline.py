"""Rejection sampling into an SFT dataset with a tightening threshold.

A stochastic scripted policy answers correctly only part of the time.
Sampling keeps episodes scoring strictly above the threshold, the
threshold ratchets up with each batch's first-pass mean reward, and the
accepted episodes are expanded into loss-masked chat records.
"""
import json
import tempfile
from pathlib import Path

from hoprag.environments import KgEnvironment, KgStore, QAInstance, Triple
from hoprag.gateway import ScriptedBackend, ScriptedRule
from hoprag.pipeline import SamplerConfig, run_online

TRIPLES = [Triple("Gdansk", "country", "Poland")]
GOLD = "Poland"

RULES = [
    ScriptedRule(
        matcher="sequence-position",
        pattern="0",
        responses=(
            (f"<think>sure</think>\n<answer>{GOLD}</answer>", 0.7),
            ("<think>hmm</think>\n<answer>Prussia</answer>", 0.3),
        ),
    )
]


def main() -> None:
    questions = [
        QAInstance(
            id=f"q{i:02d}",
            question="Which country is Gdansk in?",
            gold_answers=(GOLD,),
            topic_entities=("Gdansk",),
        )
        for i in range(24)
    ]
    env = KgEnvironment(KgStore(TRIPLES))
    backend = ScriptedBackend(RULES, seed=11)
    cfg = SamplerConfig(m=2, max_attempts=8, batch_size=8, k_init=0.2)

    out_dir = Path(tempfile.mkdtemp(prefix="sampling_demo_"))
    reports = run_online(
        questions, 3, env, backend, cfg, out_dir, seed=0, few_shot=False
    )

    print("iteration  attempted  accepted  mean_reward  k_before -> k_after")
    for report in reports:
        print(
            f"{report.iteration:>9}  {report.attempted:>9}  {report.accepted:>8}"
            f"  {report.mean_reward:>11.3f}  {report.k_before:.3f} -> {report.k_after:.3f}"
        )

    first_dataset = out_dir / "sft_iter001.jsonl"
    record = json.loads(first_dataset.read_text(encoding="utf-8").splitlines()[0])
    print("\none emitted record (train flags mark assistant turns):")
    for message in record["messages"]:
        flag = "train" if message["train"] else "     "
        print(f"  [{flag}] {message['role']:>9}: {message['content'][:60]!r}")
    print(f"\nartifacts under {out_dir}")


if __name__ == "__main__":
    main()
