"""Knowledge-based programs for the single agent and their reduction to synthesis."""
from __future__ import annotations

import re
from dataclasses import dataclass

from .environment import Environment, did_prop, transform_did
from .logic import (FALSE, Formula, FormulaSyntaxError, Iff, Not, Exists, Forall, Globally,
                    Next, conjunction, disjunction, parse_formula, prop, render)
from .protocol_runtime import EpistemicSystem, ModelChecker, Protocol
from .synthesis import InternalInconsistency, Realizable, synthesize

_BOOLEAN = {"true", "false", "not", "and", "or", "implies"}


class KBPError(ValueError):
    pass


@dataclass(frozen=True)
class Clause:
    guard: Formula
    action: str


@dataclass(frozen=True)
class KnowledgeBasedProgram:
    clauses: tuple[Clause, ...]

    @property
    def actions(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(c.action for c in self.clauses))

    def guard_for(self, action: str) -> Formula:
        """Disjunction of the guards naming `action` (false if none)."""
        gs = [c.guard for c in self.clauses if c.action == action]
        return disjunction(gs) if gs else FALSE

    def __str__(self) -> str:
        body = " ".join(f"if {render(c.guard)} do {c.action};" for c in self.clauses)
        return f"case {body} end"


def is_local(f: Formula) -> bool:
    """Boolean combination of K-formulas; the agent can evaluate it from its own view."""
    if f.op == "knows":
        return True
    if f.op in _BOOLEAN:
        return all(is_local(g) for g in f.args)
    return False


_CLAUSE = re.compile(r"\s*if\b(?P<guard>.*?)\bdo\b\s*(?P<action>[A-Za-z_][A-Za-z0-9_]*)\s*;?\s*", re.S)


def parse_kbp(text: str, actions=None) -> KnowledgeBasedProgram:
    """Parse ``case if <guard> do <action>; ... end``.

    When `actions` is given, every clause must name one of them.
    """
    m = re.fullmatch(r"\s*case\b(?P<body>.*)\bend\s*", text, re.S)
    if not m:
        raise KBPError("a program has the form 'case if <guard> do <action>; ... end'")
    body = m.group("body")
    clauses = []
    pos = 0
    while pos < len(body):
        if not body[pos:].strip():
            break
        cm = _CLAUSE.match(body, pos)
        if cm is None or body[pos:cm.start()].strip():
            raise KBPError(f"expected 'if <guard> do <action>' near {body[pos:].strip()[:30]!r}")
        src = cm.group("guard")
        try:
            guard = parse_formula(src)
        except FormulaSyntaxError as exc:
            raise KBPError(f"bad guard {src.strip()!r}: {exc}") from None
        if not is_local(guard):
            raise KBPError(f"guard {render(guard)!r} is not local to the agent "
                           "(use a Boolean combination of K formulas)")
        action = cm.group("action")
        if actions is not None and action not in actions:
            raise KBPError(f"unknown action {action!r}")
        clauses.append(Clause(guard, action))
        pos = cm.end()
    if not clauses:
        raise KBPError("program has no clauses")
    return KnowledgeBasedProgram(tuple(clauses))


def kbp_to_spec(pg: KnowledgeBasedProgram, e: Environment) -> tuple[Environment, Formula]:
    """The did-augmented environment and the formula whose realizers implement `pg`."""
    unknown = [a for a in pg.actions if a not in e.agent_actions]
    if unknown:
        raise KBPError(f"unknown action {unknown[0]!r}")
    env = transform_did(e)
    parts = []
    for a in e.agent_actions:
        took = Exists(Next(prop(did_prop(a))))
        if a in pg.actions:
            parts.append(Iff(pg.guard_for(a), took))
        else:
            parts.append(Not(took))
    return env, Forall(Globally(conjunction(parts)))


def identity_violations(pg: KnowledgeBasedProgram, e: Environment, p: Protocol) -> list:
    """Reachable points where the program's enabled set differs from the protocol's prescription."""
    system = EpistemicSystem(e, p)
    mc = ModelChecker(system)
    truth = {a: mc.holds_on_all_paths(pg.guard_for(a)) for a in pg.actions}
    out = []
    for pt in system.points:
        enabled = frozenset(a for a in pg.actions if pt in truth[a])
        if enabled != p.actions[pt[0]]:
            out.append((pt, enabled, p.actions[pt[0]]))
    return out


def implements(pg: KnowledgeBasedProgram, e: Environment, p: Protocol) -> bool:
    return not identity_violations(pg, e, p)


def kbp_implement(pg: KnowledgeBasedProgram, e: Environment, budget: int | None = 2_000_000):
    """A protocol over the did-augmented environment implementing `pg`, or None."""
    env, spec = kbp_to_spec(pg, e)
    result = synthesize(spec, env, budget=budget)
    if not isinstance(result, Realizable):
        return None
    bad = identity_violations(pg, env, result.protocol)
    if bad:
        pt, enabled, given = bad[0]
        raise InternalInconsistency(f"synthesized protocol prescribes {sorted(given)} at {pt!r} "
                             f"but the program enables {sorted(enabled)}")
    return result.protocol
