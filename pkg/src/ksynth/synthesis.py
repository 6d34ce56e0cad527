"""Realizability of knowledge-based specifications via tree automata.

The synthesis automaton is the intersection of three parts:

* a deterministic safety automaton for the label-local and parent/child
  conditions (Real, Init, Obs, Pred, Succ and the two E rules),
* an alternating Büchi automaton checking that every pair in a knowledge set
  is witnessed by some run (Ksound), made nondeterministic by the breakpoint
  construction,
* the dual of an automaton searching for an unmatched run (Kcomp), a
  universal co-Büchi automaton made nondeterministic with budgeted copies.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, product as cartesian
from typing import Any

from .environment import Environment
from .knowledge import MalformedLabel, SpecContext, TreeLabel
from .logic import Formula, parse_formula
from .tree_automata import (AlternatingTreeAutomaton, BudgetExceeded, EmptinessStats,
                            NondetTreeAutomaton, RegularTree, at, dualize, emptiness, pand,
                            por, product, remove_alternation_buchi, remove_alternation_cobuchi)

__all__ = [
    "TreeLabel", "Realizable", "Unrealizable", "SpecContext", "build_structural_automaton",
    "build_ksound_automaton", "build_kcomp_violation_automaton", "build_kcomp_automaton",
    "build_synthesis_automaton", "label_candidates", "synthesize", "extract_protocol",
    "decide", "default_rank_bound", "SynthesisStats",
]

ROOT = "root"
WALK = "walk"
SEEK = "seek"


def _context(psi, e) -> SpecContext:
    if isinstance(psi, SpecContext):
        return psi
    if isinstance(psi, str):
        psi = parse_formula(psi)
    return SpecContext(psi, e)


# ---------------------------------------------------------------- structural conditions

def _label_ok(ctx: SpecContext, label: TreeLabel) -> bool:
    if not isinstance(label, TreeLabel):
        raise MalformedLabel(f"not a tree label: {label!r}")
    if not label.actions:
        return False
    for x, s in label.knowledge:
        if x & ctx.prop_mask != ctx.state_bits[s]:
            return False
    return ctx.exists_consistent(label.knowledge)


def _child_states(ctx: SpecContext, label: TreeLabel):
    e = ctx.env
    out = []
    for o in ctx.directions:
        expected = e.with_observation(e.post_set(label.states, label.actions), o)
        allowed = frozenset((t, ctx.tab.req(x)) for x, s in label.knowledge
                            for t in e.post(s, label.actions) if e.observation[t] == o)
        out.append(("in", o, expected, allowed))
    return tuple(out)


def build_structural_automaton(psi, e: Environment) -> NondetTreeAutomaton:
    """Deterministic safety automaton for the seven label-structure conditions.

    States: ``root``; ``("d1", o)`` at depth one; ``("in", o, expected, allowed)``
    deeper, where `expected` is the set of states the parent's knowledge and
    actions force into this node and `allowed` lists (state, next-atom
    constraint) pairs used only to prune label candidates.
    """
    ctx = _context(psi, e)
    init = e.initial

    def moves(state, label):
        if state == ROOT:
            return (tuple(("d1", o) for o in ctx.directions),)
        if not _label_ok(ctx, label):
            return ()
        if state[0] == "d1":
            o = state[1]
            for x, s in label.knowledge:
                if s not in init or e.observation[s] != o or not x & ctx.root_bit:
                    return ()
            if label.states != e.with_observation(init, o):
                return ()
        elif label.states != state[2]:
            return ()
        return (_child_states(ctx, label),)

    return NondetTreeAutomaton(ctx.directions, ROOT, lru_cache(maxsize=None)(moves),
                               all_accepting=True, name="structure")


# ---------------------------------------------------------------- Ksound

def _run_step(ctx: SpecContext, tag: str, s, r, c, label: TreeLabel, within_labels: bool):
    """Disjunction over the next atom at `s` and the next state."""
    e = ctx.env
    tab = ctx.tab
    succ = e.post(s, label.actions)
    if not succ:
        return False
    options = []
    if within_labels:
        atoms = [x for x in label.atoms_at(s) if (x & r[0]) == r[1]
                 and x & tab.ext_mask == ctx.letter(s, label)]
    else:
        atoms = [x for x in ctx.matching_atoms(s, label.knowledge) if (x & r[0]) == r[1]]
    for x in atoms:
        rx = tab.req(x)
        c2 = tab.next_counter(c, x)
        for t in sorted(succ):
            options.append(at(e.observation[t], (tag, t, rx, c2)))
    return por(options)


def build_ksound_automaton(psi, e: Environment, within_labels: bool = False) -> AlternatingTreeAutomaton:
    """Alternating Büchi automaton: each labelled pair is realised by some run.

    With `within_labels` the guessed run only uses atoms present in the
    knowledge sets it passes through; this accepts fewer trees on its own
    but the same ones once Kcomp is also required.
    """
    ctx = _context(psi, e)
    dirs = ctx.directions
    tab = ctx.tab
    walk_all = [at(o, WALK) for o in dirs]

    @lru_cache(maxsize=None)
    def delta(q, label):
        if q == ROOT:
            return pand(walk_all)
        if q == WALK:
            parts = list(walk_all)
            for x, s in sorted(label.knowledge):
                if x & tab.ext_mask != ctx.letter(s, label):
                    return False
                succ = label.actions and e.post(s, label.actions)
                if not succ:
                    return False
                rx, c2 = tab.req(x), tab.next_counter(0, x)
                parts.append(por(at(e.observation[t], ("ob", t, rx, c2)) for t in sorted(succ)))
            return pand(parts)
        _, s, r, c = q
        return _run_step(ctx, "ob", s, r, c, label, within_labels)

    def final(q):
        return q in (ROOT, WALK) or q[3] == tab.m

    return AlternatingTreeAutomaton(dirs, ROOT, delta, "buchi", final,
                                    _explicit_states(ctx, "ob", WALK), name="ksound")


def _explicit_states(ctx: SpecContext, tag: str, walker: str) -> tuple:
    reqs = sorted({ctx.tab.req(x) for x in ctx.tab.atoms})
    return (ROOT, walker) + tuple((tag, s, r, c) for s in ctx.env.states for r in reqs
                                  for c in range(ctx.tab.m + 1))


# ---------------------------------------------------------------- Kcomp

def build_kcomp_violation_automaton(psi, e: Environment) -> AlternatingTreeAutomaton:
    """Büchi automaton that guesses a vertex and a run from it whose true atom is missing."""
    ctx = _context(psi, e)
    dirs = ctx.directions
    tab = ctx.tab

    @lru_cache(maxsize=None)
    def delta(q, label):
        if q == ROOT:
            return por(at(o, SEEK) for o in dirs)
        if q == SEEK:
            options = [at(o, SEEK) for o in dirs]
            for s0 in sorted(label.states):
                present = set(label.atoms_at(s0))
                for x in ctx.matching_atoms(s0, label.knowledge):
                    if x in present:
                        continue
                    rx, c2 = tab.req(x), tab.next_counter(0, x)
                    for t in sorted(e.post(s0, label.actions)):
                        options.append(at(e.observation[t], ("vio", t, rx, c2)))
            return por(options)
        _, s, r, c = q
        return _run_step(ctx, "vio", s, r, c, label, False)

    def final(q):
        return q not in (ROOT, SEEK) and q[3] == tab.m

    return AlternatingTreeAutomaton(dirs, ROOT, delta, "buchi", final,
                                    _explicit_states(ctx, "vio", SEEK), name="kcomp-violation")


def build_kcomp_automaton(psi, e: Environment) -> AlternatingTreeAutomaton:
    """Universal co-Büchi automaton accepting exactly the trees satisfying Kcomp."""
    return dualize(build_kcomp_violation_automaton(psi, e))


# ---------------------------------------------------------------- the product

def build_synthesis_automaton(psi, e: Environment, rank_bound: int | None = None) -> NondetTreeAutomaton:
    ctx = _context(psi, e)
    kcomp = build_kcomp_automaton(ctx, e)
    return product([
        build_structural_automaton(ctx, e),
        remove_alternation_buchi(build_ksound_automaton(ctx, e, within_labels=True)),
        remove_alternation_cobuchi(kcomp, rank_bound),
    ])


def _subsets(atoms, exists_pos) -> list[frozenset]:
    """Nonempty subsets of same-state atoms that satisfy the E rules."""
    out = []
    for k in range(1, len(atoms) + 1):
        for sub in combinations(atoms, k):
            ok = True
            for i, ch in exists_pos:
                some = any((x >> ch) & 1 for x in sub)
                if any(((x >> i) & 1) != some for x in sub):
                    ok = False
                    break
            if ok:
                out.append(frozenset(sub))
    return out


def label_candidates(ctx: SpecContext, struct_state, singletons_only: bool = False) -> list[TreeLabel]:
    """Labels worth proposing at a node whose structural state is `struct_state`.

    Only labels satisfying every label-local necessary condition are kept:
    valuation agreement, the E rules, agreement of K bits with the set, and
    (below depth one) being a tableau successor of some parent pair.
    """
    e = ctx.env
    if struct_state == ROOT:
        return [ctx.dummy_label]
    if struct_state[0] == "d1":
        states = e.with_observation(e.initial, struct_state[1])
        pools = {t: [x for x in ctx.atoms_at(t) if x & ctx.root_bit] for t in states}
    else:
        states, allowed = struct_state[2], struct_state[3]
        pools = {}
        for t in states:
            reqs = {r for t2, r in allowed if t2 == t}
            pools[t] = [x for x in ctx.atoms_at(t) if any((x & m) == v for m, v in reqs)]
    if not states:
        return [ctx.dummy_label]
    order = sorted(states)
    kmask, emask = ctx.knows_mask, ctx.exists_mask
    kappas = None
    for t in order:
        ks = {x & kmask for x in pools[t]}
        kappas = ks if kappas is None else kappas & ks
    knowledge_sets = []
    for kappa in sorted(kappas or ()):
        per_state = []
        for t in order:
            groups: dict[int, list[int]] = {}
            for x in pools[t]:
                if x & kmask == kappa:
                    groups.setdefault(x & emask, []).append(x)
            choices = []
            for eps in sorted(groups):
                choices.extend(_subsets(sorted(groups[eps]), ctx.exists_pos))
            per_state.append(choices)
        for combo in cartesian(*per_state):
            ok = True
            for i, ch in ctx.knows_pos:
                want = (kappa >> i) & 1
                if want != all((x >> ch) & 1 for sub in combo for x in sub):
                    ok = False
                    break
            if ok:
                knowledge_sets.append(frozenset((x, t) for t, sub in zip(order, combo) for x in sub))
    actions = ctx.action_sets(singletons_only)
    return [TreeLabel(k, b) for k in knowledge_sets for b in actions]


# ---------------------------------------------------------------- decision procedure

@dataclass
class SynthesisStats:
    arena_states: int = 0
    arena_moves: int = 0
    labels_tried: int = 0
    closure_size: int = 0
    atoms: int = 0
    rank_bound: int = 0
    attempts: list = field(default_factory=list)
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return {"arena_states": self.arena_states, "arena_moves": self.arena_moves,
                "labels_tried": self.labels_tried, "closure_size": self.closure_size,
                "atoms": self.atoms, "rank_bound": self.rank_bound,
                "attempts": list(self.attempts), "seconds": round(self.seconds, 3)}


@dataclass(frozen=True)
class Realizable:
    protocol: Any
    witness: RegularTree
    stats: SynthesisStats

    realizable = True


@dataclass(frozen=True)
class Unrealizable:
    stats: SynthesisStats

    realizable = False


class InternalInconsistency(AssertionError):
    pass


def decide(ctx: SpecContext, rank_bound: int | None = None, singletons_only: bool = False,
           budget: int | None = None, stats: SynthesisStats | None = None,
           width: int | None = None) -> RegularTree | None:
    """One emptiness check of the synthesis automaton at a fixed rank bound.

    With `width` only the first that many label candidates are offered at
    each state; a tree found that way is still a genuine witness, but None
    then proves nothing.
    """
    a = build_synthesis_automaton(ctx, ctx.env, rank_bound)
    cache: dict = {}

    def candidates(state):
        struct = state[0][0]
        labs = cache.get(struct)
        if labs is None:
            labs = label_candidates(ctx, struct, singletons_only)
            if width is not None:
                labs = labs[:width]
            cache[struct] = labs
        return labs

    es = EmptinessStats()
    try:
        return emptiness(a, candidates, ctx.dummy_label, budget, es)
    finally:
        if stats is not None:
            stats.arena_states += es.states
            stats.arena_moves += es.moves
            stats.labels_tried += es.labels_tried


def default_rank_bound(ctx: SpecContext) -> int:
    return 2 * len(_explicit_states(ctx, "vio", SEEK))


NARROW_WIDTHS = (1, 2, 4)
NARROW_BUDGET = 20_000


def synthesize(psi, e: Environment, budget: int | None = 2_000_000, rank_bound: int | None = None,
               verify: bool = True):
    """Decide realizability and return a verified protocol when one exists.

    Cheaper searches run first (few labels per state, deterministic action
    sets, small rank bound); any witness they produce is genuine.  A negative
    answer is only reported after the search with all labels and action sets
    at the full rank bound.
    """
    from .protocol_runtime import check_acceptable, verify_realizes

    start = time.perf_counter()
    ctx = _context(psi, e)
    full = rank_bound if rank_bound is not None else default_rank_bound(ctx)
    stats = SynthesisStats(closure_size=len(ctx.closure), atoms=len(ctx.tab.atoms), rank_bound=full)
    small = min(2, full)
    several = len(e.agent_actions) > 1
    # narrow searches: few labels per state, small arena; a failure proves nothing
    plan = [(True, small, w) for w in NARROW_WIDTHS]
    if several:
        plan += [(False, small, w) for w in NARROW_WIDTHS[1:]]
    for bound in sorted({small, full}):
        plan.append((True, bound, None))
        if several:
            plan.append((False, bound, None))
    witness = None
    for singletons, bound, width in plan:
        stats.attempts.append({"deterministic": singletons, "rank_bound": bound,
                               "labels": "all" if width is None else width})
        if width is None:
            witness = decide(ctx, bound, singletons, budget, stats)
        else:
            cap = NARROW_BUDGET if budget is None else min(budget, NARROW_BUDGET)
            try:
                witness = decide(ctx, bound, singletons, cap, stats, width)
            except BudgetExceeded:
                witness = None
        if witness is not None:
            break
    stats.seconds = time.perf_counter() - start
    if witness is None:
        return Unrealizable(stats)
    protocol = extract_protocol(witness)
    if verify:
        report = check_acceptable(witness, ctx, e)
        if not report.ok:
            raise InternalInconsistency(f"witness fails acceptability: {report.summary()}")
        if not verify_realizes(e, protocol, ctx.source):
            raise InternalInconsistency("extracted protocol does not realize the formula")
    stats.seconds = time.perf_counter() - start
    return Realizable(protocol, witness, stats)


def extract_protocol(witness: RegularTree):
    """Read a finite-state protocol off a witness generator (breadth-first naming)."""
    from .protocol_runtime import Protocol

    order = [witness.root]
    seen = {witness.root}
    i = 0
    while i < len(order):
        n = order[i]
        for d in witness.directions:
            m = witness.succ[(n, d)]
            if m not in seen:
                seen.add(m)
                order.append(m)
        i += 1
    name = {n: f"q{i}" for i, n in enumerate(order)}
    actions = {}
    for n in order:
        lab = witness.labels[n]
        acts = lab.actions if isinstance(lab, TreeLabel) else lab
        if not acts:
            raise MalformedLabel(f"empty action set at generator node {n!r}")
        actions[name[n]] = frozenset(acts)
    transition = {(name[n], d): name[witness.succ[(n, d)]] for n in order for d in witness.directions}
    return Protocol(tuple(name[n] for n in order), name[witness.root], transition, actions,
                    tuple(witness.directions))
