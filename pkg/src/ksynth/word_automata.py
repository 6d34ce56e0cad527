"""Büchi word automata and a declarative tableau translation from LTL."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

import networkx as nx

from .logic import (Closure, Formula, Not, closure_of, conjunction, enumerate_atoms,
                    is_core, normalize, render, substitute_modal)


class Tableau:
    """Locally consistent atoms over a closure, with the bookkeeping needed to
    read them as states of a generalized Büchi automaton.

    Positions holding propositions and K/E subformulas are *extended*
    positions: their bits come from the input letter rather than from the
    temporal structure.
    """

    def __init__(self, closure: Closure):
        self.closure = closure
        idx = closure.index
        self.untils = tuple((i, idx[f.args[0]], idx[f.args[1]])
                            for i, f in enumerate(closure) if f.op == "until")
        self.nexts = tuple((i, idx[f.args[0]]) for i, f in enumerate(closure) if f.op == "next")
        self.m = len(self.untils)
        self.ext_positions = closure.extended_positions
        self.ext_mask = sum(1 << i for i in self.ext_positions)
        self.root = len(closure) - 1
        self.atoms = tuple(a for a in enumerate_atoms(closure) if self.locally_consistent(a))
        by_ext: dict[int, list[int]] = {}
        for a in self.atoms:
            by_ext.setdefault(a & self.ext_mask, []).append(a)
        self._by_ext = {k: tuple(v) for k, v in by_ext.items()}
        self._req: dict[int, tuple[int, int]] = {}

    def bit(self, atom: int, i: int) -> int:
        return (atom >> i) & 1

    def locally_consistent(self, a: int) -> bool:
        for u, phi, chi in self.untils:
            au, ap, ac = (a >> u) & 1, (a >> phi) & 1, (a >> chi) & 1
            if ac and not au:
                return False
            if au and not ac and not ap:
                return False
        return True

    def atoms_with_letter(self, letter: int) -> tuple[int, ...]:
        """Atoms whose extended bits equal `letter` (a mask over extended positions)."""
        return self._by_ext.get(letter, ())

    def req(self, a: int) -> tuple[int, int]:
        """Constraint (mask, value) on the next atom imposed by `a`."""
        r = self._req.get(a)
        if r is None:
            demands: dict[int, int] = {}
            ok = True

            def demand(pos: int, v: int) -> None:
                nonlocal ok
                if demands.setdefault(pos, v) != v:
                    ok = False

            for x, phi in self.nexts:
                demand(phi, (a >> x) & 1)
            for u, phi, chi in self.untils:
                au, ap, ac = (a >> u) & 1, (a >> phi) & 1, (a >> chi) & 1
                if au and not ac:
                    demand(u, 1)
                elif not au and ap:
                    demand(u, 0)
            mask = sum(1 << p for p in demands)
            value = sum(v << p for p, v in demands.items())
            if not ok:
                mask, value = 0, 1  # unsatisfiable
            r = (mask, value)
            self._req[a] = r
        return r

    @staticmethod
    def satisfies(a: int, r: tuple[int, int]) -> bool:
        return (a & r[0]) == r[1]

    def fulfils(self, a: int, j: int) -> bool:
        u, _, chi = self.untils[j]
        return not (a >> u) & 1 or bool((a >> chi) & 1)

    def next_counter(self, c: int, a: int) -> int:
        """Degeneralization counter after reading atom `a`; `c == m` is accepting."""
        c0 = 0 if c == self.m else c
        if c0 < self.m and self.fulfils(a, c0):
            return c0 + 1
        return c0

    def accepting_counter(self, c: int) -> bool:
        return c == self.m

    def successors(self, a: int) -> tuple[int, ...]:
        r = self.req(a)
        return tuple(b for b in self.atoms if (b & r[0]) == r[1])


@dataclass(frozen=True)
class BuchiWordAutomaton:
    """State-labelled Büchi automaton over letters that are sets of propositions.

    A run ``q0 q1 ...`` reads the word ``w0 w1 ...`` when ``labels[qi]`` equals
    ``wi`` restricted to `propositions`.  With several accepting sets the
    condition is generalized (each set visited infinitely often).
    """
    propositions: tuple[str, ...]
    states: tuple[Hashable, ...]
    initial: frozenset
    labels: Mapping[Hashable, frozenset]
    successors: Mapping[Hashable, tuple]
    accepting: tuple[frozenset, ...]

    @property
    def is_generalized(self) -> bool:
        return len(self.accepting) != 1

    def reads(self, q, letter: Iterable[str]) -> bool:
        return self.labels[q] == frozenset(letter) & frozenset(self.propositions)

    def step(self, q, letter: Iterable[str]) -> tuple:
        return self.successors[q] if self.reads(q, letter) else ()

    def to_dot(self) -> str:
        ids = {q: i for i, q in enumerate(self.states)}
        final = frozenset.intersection(*self.accepting) if self.accepting else frozenset(self.states)
        lines = ["digraph buchi {", "  rankdir=LR;"]
        for q in self.states:
            shape = "doublecircle" if q in final else "circle"
            lab = ",".join(sorted(self.labels[q])) or "{}"
            lines.append(f'  n{ids[q]} [shape={shape}, label="{lab}"];')
        for q in self.initial:
            lines.append(f"  init{ids[q]} [shape=point]; init{ids[q]} -> n{ids[q]};")
        for q in self.states:
            for t in self.successors[q]:
                lines.append(f"  n{ids[q]} -> n{ids[t]};")
        lines.append("}")
        return "\n".join(lines)


def _check_ltl(f: Formula) -> Formula:
    for g in f.subformulas():
        if g.op in ("knows", "exists", "forall"):
            raise ValueError(f"formula contains a path or knowledge operator: {render(g)}")
    return f if is_core(f) else normalize(f)


def ltl_to_generalized_buchi(f: Formula) -> BuchiWordAutomaton:
    f = _check_ltl(f)
    tab = Tableau(closure_of(f))
    c = tab.closure
    props = tuple(sorted({g.name for g in c if g.op == "prop"}))
    prop_pos = [(p, c.index[Formula("prop", (), p)]) for p in props]
    states = tab.atoms
    labels = {a: frozenset(p for p, i in prop_pos if (a >> i) & 1) for a in states}
    succ = {a: tab.successors(a) for a in states}
    initial = frozenset(a for a in states if (a >> tab.root) & 1)
    acc = tuple(frozenset(a for a in states if tab.fulfils(a, j)) for j in range(tab.m))
    if not acc:
        acc = (frozenset(states),)
    return BuchiWordAutomaton(props, states, initial, labels, succ, acc)


def degeneralize(a: BuchiWordAutomaton) -> BuchiWordAutomaton:
    """Counter construction: state (q, i) waits for the i-th accepting set."""
    if not a.is_generalized:
        return a
    sets = a.accepting or (frozenset(a.states),)
    k = len(sets)
    states = tuple((q, i) for q in a.states for i in range(k))
    succ = {}
    for q, i in states:
        j = (i + 1) % k if q in sets[i] else i
        succ[(q, i)] = tuple((t, j) for t in a.successors[q])
    return BuchiWordAutomaton(
        a.propositions, states,
        frozenset((q, 0) for q in a.initial),
        {(q, i): a.labels[q] for q, i in states},
        succ,
        (frozenset((q, 0) for q in sets[0]),),
    )


def ltl_to_buchi(f: Formula) -> BuchiWordAutomaton:
    """Plain Büchi automaton for a knowledge-free formula (K/E already substituted)."""
    return degeneralize(ltl_to_generalized_buchi(f))


def fair_nodes(graph: nx.DiGraph, accepting_sets: Sequence[Iterable]) -> set:
    """Nodes from which some path visits every accepting set infinitely often."""
    sets = [set(s) for s in accepting_sets]
    good = set()
    for comp in nx.strongly_connected_components(graph):
        if len(comp) == 1:
            (v,) = comp
            if not graph.has_edge(v, v):
                continue
        if all(comp & s for s in sets):
            good |= comp
    if not good:
        return set()
    reached = set(good)
    rev = graph.reverse(copy=False)
    stack = list(good)
    while stack:
        v = stack.pop()
        for u in rev.successors(v):
            if u not in reached:
                reached.add(u)
                stack.append(u)
    return reached


def buchi_accepts_lasso(a: BuchiWordAutomaton, prefix: Sequence, cycle: Sequence) -> bool:
    """Whether `a` accepts ``prefix . cycle^omega``."""
    if not cycle:
        raise ValueError("empty cycle")
    word = [frozenset(x) for x in prefix] + [frozenset(x) for x in cycle]
    n, loop = len(word), len(prefix)
    g = nx.DiGraph()
    start = [(0, q) for q in a.initial if a.reads(q, word[0])]
    stack = list(start)
    seen = set(start)
    while stack:
        i, q = stack.pop()
        g.add_node((i, q))
        j = i + 1 if i + 1 < n else loop
        for t in a.successors[q]:
            if a.reads(t, word[j]):
                g.add_edge((i, q), (j, t))
                if (j, t) not in seen:
                    seen.add((j, t))
                    stack.append((j, t))
    sets = [{v for v in g if v[1] in s} for s in a.accepting]
    fair = fair_nodes(g, sets)
    return any(v in fair for v in start)


def atom_formula(x: int, c: Closure) -> Formula:
    """Conjunction of the closure members (or their negations) selected by atom `x`."""
    parts = []
    for i, g in enumerate(c.formulas):
        h = substitute_modal(g)
        parts.append(h if (x >> i) & 1 else Not(h))
    return conjunction(parts)
