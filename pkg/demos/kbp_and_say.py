"""Implement a knowledge-based program and synthesize an agent that announces what it knows."""
from pathlib import Path

from ksynth import (And, parse_formula, parse_kbp, project_protocol, read_environment, say_formula,
                    synthesize, transform_say)
from ksynth.kbp import kbp_implement, kbp_to_spec
from ksynth.protocol_runtime import knowledge_disagreements

e = read_environment(Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "toggle_restricted.json")

program = parse_kbp("case if K on do N; if !(K on) do T end", e.agent_actions)
_, formula = kbp_to_spec(program, e)
print("program:", program)
print("reduced to:", formula)
p = kbp_implement(program, e)
print("implementation:", "none" if p is None else f"{len(p.states)} states")

phis = [parse_formula("K on"), parse_formula("K !on")]
e2 = transform_say(e, phis)
result = synthesize(And(parse_formula("G (K on | K !on)"), say_formula(phis)), e2)
q = project_protocol(result.protocol)
print(f"announcing agent: {len(q.states)} states, "
      f"{len(knowledge_disagreements(e, q, phis))} points where its state misreports its knowledge")
