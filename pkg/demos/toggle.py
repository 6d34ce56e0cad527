"""Walk through the light-switch example: why full initial uncertainty is fatal,
and what a realizing protocol looks like when it is not."""
from pathlib import Path

from ksynth import parse_formula, read_environment, run_protocol, synthesize, verify_realizes
from ksynth.protocol_runtime import constant_protocol

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
spec = parse_formula("G (K on | K !on)")

for name in ("toggle_restricted", "toggle_full"):
    e = read_environment(FIXTURES / f"{name}.json")
    always_t = constant_protocol(e, ["T"])
    print(f"{name}: initial {sorted(e.initial)}")
    print(f"  always toggling realizes the formula: {verify_realizes(e, always_t, spec)}")
    result = synthesize(spec, e)
    if not result.realizable:
        print("  synthesis: unrealizable")
        continue
    p = result.protocol
    print(f"  synthesis: {len(p.states)}-state protocol")
    for q in p.states:
        row = ", ".join(f"{o}->{p.step(q, o)}" for o in p.observations)
        print(f"    {q}: do {sorted(p.actions[q])}; {row}")
    run = run_protocol(e, p, 8, seed=1)
    print("  sample run:", " ".join(run.states))
