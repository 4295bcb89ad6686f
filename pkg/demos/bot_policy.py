"""How the scripted attacker picks its next phase and types its commands.

The phase chain is a learned transition table, but hard knowledge gates
override it: you cannot enumerate a host you have not found, so missing
"who" locks the policy onto recon, missing "what" onto enumeration.
After a lost match every edge the bot used shrinks, so the policy drifts
away from moves that keep failing.
"""

import random

from hackmatch import bot
from hackmatch.bot import ACT, KnowledgeBase, Phase, UsageLog, gate_distribution
from hackmatch.charmodel import policy_predict


def show_dist(label: str, dist: dict) -> None:
    parts = "  ".join(f"{p.value}:{w:.2f}"
                      for p, w in sorted(dist.items(), key=lambda kv: -kv[1]))
    print(f"  {label:<28} {parts}")


def main() -> None:
    transitions = bot.default_transitions()
    base = transitions.row(Phase.RECON, ACT)

    print("knowledge gating over the same base row:")
    show_dist("everything known",
              gate_distribution(KnowledgeBase(who="10.0.0.2", what="http"), base))
    show_dist("opponent host unknown", gate_distribution(KnowledgeBase(), base))
    show_dist("host known, services not",
              gate_distribution(KnowledgeBase(who="10.0.0.2"), base))
    print()

    print("losing shrinks the used edges; recon->enumeration failed 5 matches:")
    models = bot.default_phase_models()
    show_dist("before", transitions.row(Phase.RECON, ACT))
    for _ in range(5):
        usage = UsageLog()
        usage.note_transition(Phase.RECON, ACT, Phase.ENUMERATION)
        models, transitions = bot.apply_outcome_penalty(
            models, transitions, usage, won=False, alpha=0.2)
    show_dist("after", transitions.row(Phase.RECON, ACT))
    print()

    print("commands typed per phase (character model, greedy decode):")
    rng = random.Random(11)
    for phase, model in models.items():
        line = policy_predict(model, target_ip="10.0.0.2", rng=rng)
        print(f"  {phase:<18} $ {line}")


if __name__ == "__main__":
    main()
