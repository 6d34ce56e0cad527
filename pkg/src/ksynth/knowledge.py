"""Shared vocabulary for tree labels: knowledge sets paired with action sets,
and the per-specification tables used to read atoms against labels."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable

from .environment import Environment
from .logic import Formula, closure_of, is_core, normalize, render
from .word_automata import Tableau


@dataclass(frozen=True)
class TreeLabel:
    """A knowledge set of (atom, state) pairs and a nonempty action set."""
    knowledge: frozenset
    actions: frozenset

    @cached_property
    def states(self) -> frozenset:
        return frozenset(s for _, s in self.knowledge)

    def atoms_at(self, s) -> tuple[int, ...]:
        return tuple(sorted(x for x, t in self.knowledge if t == s))


class MalformedLabel(ValueError):
    pass


class SpecContext:
    """A specification compiled against an environment."""

    def __init__(self, psi: Formula, e: Environment):
        self.source = psi
        self.formula = psi if is_core(psi) else normalize(psi)
        self.env = e
        self.closure = c = closure_of(self.formula)
        self.tab = Tableau(c)
        idx = c.index
        unknown = sorted({g.name for g in c if g.op == "prop"} - set(e.propositions))
        if unknown:
            raise ValueError(f"specification mentions unknown propositions: {', '.join(unknown)}")
        self.prop_pos = tuple((i, g.name) for i, g in enumerate(c) if g.op == "prop")
        self.knows_pos = tuple((i, idx[g.args[0]]) for i, g in enumerate(c) if g.op == "knows")
        self.exists_pos = tuple((i, idx[g.args[0]]) for i, g in enumerate(c) if g.op == "exists")
        self.knows_mask = sum(1 << i for i, _ in self.knows_pos)
        self.exists_mask = sum(1 << i for i, _ in self.exists_pos)
        self.prop_mask = sum(1 << i for i, _ in self.prop_pos)
        self.root_bit = 1 << (len(c) - 1)
        self.state_bits = {s: sum(1 << i for i, p in self.prop_pos if p in e.valuation[s])
                           for s in e.states}
        self._atoms_at: dict = {}
        self._letter: dict = {}
        self.directions = e.observations

    # -- letters

    def modal_bits(self, knowledge: Iterable[tuple[int, str]], s) -> int:
        """K and E bits seen at state `s` under a knowledge set."""
        bits = 0
        knowledge = tuple(knowledge)
        for i, ch in self.knows_pos:
            if all((x >> ch) & 1 for x, _ in knowledge):
                bits |= 1 << i
        for i, ch in self.exists_pos:
            if any(t == s and (x >> ch) & 1 for x, t in knowledge):
                bits |= 1 << i
        return bits

    def letter(self, s, label_or_knowledge) -> int:
        k = label_or_knowledge.knowledge if isinstance(label_or_knowledge, TreeLabel) else label_or_knowledge
        key = (s, k)
        v = self._letter.get(key)
        if v is None:
            v = self.state_bits[s] | self.modal_bits(k, s)
            if len(self._letter) > 200_000:
                self._letter.clear()
            self._letter[key] = v
        return v

    def atoms_at(self, s) -> tuple[int, ...]:
        """Locally consistent atoms agreeing with the valuation of `s`."""
        r = self._atoms_at.get(s)
        if r is None:
            base = self.state_bits[s]
            r = tuple(a for a in self.tab.atoms if a & self.prop_mask == base)
            self._atoms_at[s] = r
        return r

    def matching_atoms(self, s, knowledge) -> tuple[int, ...]:
        return self.tab.atoms_with_letter(self.letter(s, knowledge))

    # -- label-local conditions

    def knowledge_consistent(self, knowledge) -> bool:
        """Every atom agrees with the K and E bits that the set itself determines."""
        for x, s in knowledge:
            if x & (self.knows_mask | self.exists_mask) != self.modal_bits(knowledge, s):
                return False
        return True

    def exists_consistent(self, knowledge) -> bool:
        """The two label-local rules for E: soundness and completeness."""
        for x, s in knowledge:
            for i, ch in self.exists_pos:
                some = any(t == s and (y >> ch) & 1 for y, t in knowledge)
                if ((x >> i) & 1) != some:
                    return False
        return True

    @cached_property
    def dummy_label(self) -> TreeLabel:
        return TreeLabel(frozenset(), frozenset(self.env.agent_actions))

    def action_sets(self, singletons_only: bool = False) -> list[frozenset]:
        acts = self.env.agent_actions
        if singletons_only:
            return [frozenset([a]) for a in acts]
        return [frozenset(c) for k in range(1, len(acts) + 1) for c in combinations(acts, k)]

    def describe_atom(self, x: int) -> dict[str, int]:
        return {render(g): (x >> i) & 1 for i, g in enumerate(self.closure)}
