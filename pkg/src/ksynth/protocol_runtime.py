"""Finite-state protocols, the systems they generate, and an independent
model checker for perfect-recall (and automaton-state) knowledge."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Hashable, Iterable, Mapping

import networkx as nx

from .environment import Environment, split_say_action
from .knowledge import MalformedLabel, SpecContext, TreeLabel
from .logic import Formula, Not, is_core, modal_name, normalize, parse_formula, substitute_modal
from .rng import SplitMix64
from .tree_automata import BudgetExceeded, RegularTree
from .word_automata import fair_nodes, ltl_to_buchi


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class Protocol:
    """Observation-driven automaton: state after a history picks the action set."""
    states: tuple[str, ...]
    initial: str
    transition: Mapping[tuple[str, str], str] = field(repr=False)
    actions: Mapping[str, frozenset] = field(repr=False)
    observations: tuple[str, ...] = ()

    def __hash__(self):
        return hash((self.states, self.initial, tuple(sorted(self.transition.items())),
                     tuple(sorted((q, tuple(sorted(a))) for q, a in self.actions.items()))))

    def step(self, q: str, o: str) -> str:
        return self.transition[(q, o)]

    def state_after(self, history: Iterable[str]) -> str:
        q = self.initial
        for o in history:
            q = self.transition[(q, o)]
        return q

    def prescribe(self, history: Iterable[str]) -> frozenset:
        return self.actions[self.state_after(history)]

    @property
    def is_deterministic(self) -> bool:
        return all(len(self.actions[q]) == 1 for q in self.states)

    def to_json(self) -> dict:
        return {
            "states": list(self.states),
            "initial": self.initial,
            "transition": {q: {o: self.transition[(q, o)] for o in self.observations}
                           for q in self.states},
            "actions": {q: sorted(self.actions[q]) for q in self.states},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def to_dot(self) -> str:
        lines = ["digraph protocol {", "  rankdir=LR;", '  start [shape=point];',
                 f'  start -> "{self.initial}";']
        for q in self.states:
            acts = ",".join(sorted(self.actions[q]))
            lines.append(f'  "{q}" [shape=box, label="{q}\\n{{{acts}}}"];')
        for q in self.states:
            for o in self.observations:
                lines.append(f'  "{q}" -> "{self.transition[(q, o)]}" [label="{o}"];')
        lines.append("}")
        return "\n".join(lines)


def protocol_from_json(doc, e: Environment | None = None) -> Protocol:
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise ProtocolError("protocol document must be a JSON object")
    states = doc.get("states")
    if not isinstance(states, list) or not states or not all(isinstance(q, str) for q in states):
        raise ProtocolError("field 'states' must be a nonempty list of strings")
    if len(set(states)) != len(states):
        raise ProtocolError("duplicate protocol states")
    initial = doc.get("initial")
    if initial not in states:
        raise ProtocolError(f"initial state {initial!r} is not declared")
    trans = doc.get("transition")
    acts = doc.get("actions")
    if not isinstance(trans, Mapping) or not isinstance(acts, Mapping):
        raise ProtocolError("fields 'transition' and 'actions' must be objects")
    observations = sorted({o for row in trans.values() if isinstance(row, Mapping) for o in row})
    if e is not None:
        extra = set(observations) - set(e.observations)
        if extra:
            raise ProtocolError(f"unknown observations {sorted(extra)}")
        observations = list(e.observations)
    transition = {}
    actions = {}
    for q in states:
        row = trans.get(q)
        if not isinstance(row, Mapping):
            raise ProtocolError(f"no transition row for state {q!r}")
        for o in observations:
            t = row.get(o)
            if t not in states:
                raise ProtocolError(f"transition of {q!r} on {o!r} missing or undeclared")
            transition[(q, o)] = t
        a = acts.get(q)
        if not isinstance(a, list) or not a:
            raise ProtocolError(f"state {q!r} must prescribe a nonempty action list")
        if e is not None:
            for x in a:
                if x not in e.agent_actions:
                    raise ProtocolError(f"unknown agent action {x!r} at {q!r}")
        actions[q] = frozenset(a)
    return Protocol(tuple(states), initial, transition, actions, tuple(observations))


def load_protocol(path, e: Environment | None = None) -> Protocol:
    with open(path, encoding="utf-8") as fh:
        return protocol_from_json(fh.read(), e)


def project_protocol(p: Protocol) -> Protocol:
    """Drop the assertion component from the actions of a protocol over a say-environment."""
    actions = {q: frozenset(split_say_action(a)[0] for a in acts) for q, acts in p.actions.items()}
    return Protocol(p.states, p.initial, p.transition, actions, p.observations)


def constant_protocol(e: Environment, actions: Iterable[str]) -> Protocol:
    acts = frozenset(actions)
    return Protocol(("q0",), "q0", {("q0", o): "q0" for o in e.observations}, {"q0": acts},
                    e.observations)


# ---------------------------------------------------------------- simulation

@dataclass(frozen=True)
class RunPrefix:
    states: tuple[str, ...]
    joint_actions: tuple[tuple[str, str], ...]

    def observations(self, e: Environment) -> tuple[str, ...]:
        return tuple(e.observation[s] for s in self.states)


def run_protocol(e: Environment, p: Protocol, steps: int, seed: int) -> RunPrefix:
    """Sample a run prefix; every choice draws from the seeded generator over sorted options."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    rng = SplitMix64(seed)
    s = rng.choice(sorted(e.initial))
    q = p.step(p.initial, e.observation[s])
    states = [s]
    joint = []
    for _ in range(steps):
        a = rng.choice(sorted(p.actions[q]))
        ae = rng.choice(sorted(e.env_protocol[s]))
        s = e.transitions[(s, ae, a)]
        q = p.step(q, e.observation[s])
        states.append(s)
        joint.append((ae, a))
    return RunPrefix(tuple(states), tuple(joint))


def is_run_prefix(e: Environment, r: RunPrefix) -> bool:
    if not r.states or r.states[0] not in e.initial:
        return False
    for (s, t), (ae, a) in zip(zip(r.states, r.states[1:]), r.joint_actions):
        if ae not in e.env_protocol[s] or e.transitions[(s, ae, a)] != t:
            return False
    return len(r.joint_actions) == len(r.states) - 1


# ---------------------------------------------------------------- generated systems

class EpistemicSystem:
    """Subset construction over an environment driven by a protocol.

    A class ``(q, S)`` collects the observation histories that lead the
    protocol to `q` and leave `S` as the set of possible environment states.
    Points are ``(q, S, s)`` with ``s`` in ``S``; all points of one class share
    their perfect-recall knowledge.
    """

    def __init__(self, e: Environment, p: Protocol, budget: int | None = 200_000):
        self.env = e
        self.protocol = p
        self.class_succ: dict = {}
        self.initial_class = {}
        classes = []
        seen = set()
        todo = deque()
        for o in e.observations:
            c = (p.step(p.initial, o), e.with_observation(e.initial, o))
            self.initial_class[o] = c
            if c not in seen:
                seen.add(c)
                todo.append(c)
        while todo:
            c = todo.popleft()
            classes.append(c)
            if budget is not None and len(classes) > budget:
                raise BudgetExceeded(f"more than {budget} knowledge classes")
            q, S = c
            nxt = e.post_set(S, p.actions[q])
            for o in e.observations:
                c2 = (p.step(q, o), e.with_observation(nxt, o))
                self.class_succ[(c, o)] = c2
                if c2 not in seen:
                    seen.add(c2)
                    todo.append(c2)
        self.classes = tuple(classes)
        self.points = tuple((q, S, s) for q, S in classes for s in sorted(S))
        self.point_succ = {}
        for q, S, s in self.points:
            out = []
            for t in sorted(e.post(s, p.actions[q])):
                q2, S2 = self.class_succ[((q, S), e.observation[t])]
                out.append((q2, S2, t))
            self.point_succ[(q, S, s)] = tuple(out)
        self.initial_points = tuple(self.initial_class[e.observation[s]] + (s,) for s in sorted(e.initial))
        self.graph = nx.DiGraph()
        self.graph.add_nodes_from(self.points)
        for v, ws in self.point_succ.items():
            for w in ws:
                self.graph.add_edge(v, w)


class ModelChecker:
    """Stratified evaluation of CTL*-K formulas on a generated system.

    ``knowledge="perfect"`` reads K by observation histories;
    ``knowledge="automaton"`` reads it by protocol states.
    """

    def __init__(self, system: EpistemicSystem, knowledge: str = "perfect"):
        if knowledge not in ("perfect", "automaton"):
            raise ValueError("knowledge must be 'perfect' or 'automaton'")
        self.system = system
        self.knowledge = knowledge
        e = system.env
        self.extra = {pt: set(e.valuation[pt[2]]) for pt in system.points}
        self.done: set[Formula] = set()

    def letter(self, pt) -> frozenset:
        return frozenset(self.extra[pt])

    def _some_path(self, phi: Formula) -> set:
        """Points with some path satisfying the knowledge-free formula `phi`."""
        a = _buchi(phi)
        props = frozenset(a.propositions)
        g = nx.DiGraph()
        starts = []
        labels = {pt: self.letter(pt) & props for pt in self.system.points}
        for pt in self.system.points:
            for q in a.initial:
                if a.labels[q] == labels[pt]:
                    starts.append((pt, q))
        seen = set(starts)
        stack = list(starts)
        while stack:
            v = stack.pop()
            g.add_node(v)
            pt, q = v
            for pt2 in self.system.point_succ[pt]:
                for q2 in a.successors[q]:
                    if a.labels[q2] == labels[pt2]:
                        w = (pt2, q2)
                        g.add_edge(v, w)
                        if w not in seen:
                            seen.add(w)
                            stack.append(w)
        sets = [{v for v in g if v[1] in s} for s in a.accepting]
        fair = fair_nodes(g, sets)
        return {pt for pt, q in starts if (pt, q) in fair}

    def label(self, f: Formula) -> None:
        """Make every K/E subformula of `f` available as a proposition."""
        f = f if is_core(f) else normalize(f)
        modal = sorted({g for g in f.subformulas() if g.op in ("knows", "exists")},
                       key=lambda g: g.size)
        for g in modal:
            if g in self.done:
                continue
            inner = substitute_modal(g.args[0])
            name = modal_name(g)
            if g.op == "exists":
                good = self._some_path(inner)
                for pt in self.system.points:
                    if pt in good:
                        self.extra[pt].add(name)
            else:
                bad = self._some_path(Not(inner))
                group = (lambda pt: (pt[0], pt[1])) if self.knowledge == "perfect" else (lambda pt: pt[0])
                spoiled = {group(pt) for pt in bad}
                for pt in self.system.points:
                    if group(pt) not in spoiled:
                        self.extra[pt].add(name)
            self.done.add(g)

    def holds_on_all_paths(self, f: Formula, points: Iterable | None = None) -> set:
        """Points from which every path satisfies `f`."""
        f = f if is_core(f) else normalize(f)
        self.label(f)
        bad = self._some_path(Not(substitute_modal(f)))
        pts = self.system.points if points is None else points
        return {pt for pt in pts if pt not in bad}

    def holds_at(self, f: Formula, pt) -> bool:
        if pt not in self.system.point_succ:
            raise ValueError(f"point {pt!r} is not reachable")
        return pt in self.holds_on_all_paths(f, [pt])


@lru_cache(maxsize=512)
def _buchi(phi: Formula):
    return ltl_to_buchi(phi)


def _formula(psi) -> Formula:
    return parse_formula(psi) if isinstance(psi, str) else psi


def verify_realizes(e: Environment, p: Protocol, psi, budget: int | None = 200_000) -> bool:
    """Whether every run of the generated system satisfies `psi` at time 0."""
    system = EpistemicSystem(e, p, budget)
    mc = ModelChecker(system)
    good = mc.holds_on_all_paths(_formula(psi), system.initial_points)
    return all(pt in good for pt in system.initial_points)


def evaluate_ka(e: Environment, p: Protocol, psi_a, point) -> bool:
    """Truth at a reachable point when K is read through protocol states."""
    mc = ModelChecker(EpistemicSystem(e, p), knowledge="automaton")
    return mc.holds_at(_formula(psi_a), point)


def reachable_points(e: Environment, p: Protocol) -> tuple:
    return EpistemicSystem(e, p).points


def knowledge_disagreements(e: Environment, p: Protocol, phis: Iterable) -> list:
    """Reachable points where perfect-recall and automaton-state knowledge differ."""
    system = EpistemicSystem(e, p)
    perfect = ModelChecker(system, "perfect")
    auto = ModelChecker(system, "automaton")
    out = []
    for f in phis:
        f = _formula(f)
        a = perfect.holds_on_all_paths(f)
        b = auto.holds_on_all_paths(f)
        out.extend((f, pt) for pt in system.points if (pt in a) != (pt in b))
    return out


# ---------------------------------------------------------------- induced trees

TREE_ROOT = "root"


def induced_tree(e: Environment, p: Protocol, psi, budget: int | None = 200_000) -> RegularTree:
    """The labelled tree of a protocol: each history carries its realised (atom, state) pairs."""
    ctx = psi if isinstance(psi, SpecContext) else SpecContext(_formula(psi), e)
    system = EpistemicSystem(e, p, budget)
    mc = ModelChecker(system)
    mc.label(ctx.formula)
    tab = ctx.tab
    bits = {}
    modal_pos = [(i, modal_name(g)) for i, g in enumerate(ctx.closure) if g.op in ("knows", "exists")]
    for pt in system.points:
        b = ctx.state_bits[pt[2]]
        for i, name in modal_pos:
            if name in mc.extra[pt]:
                b |= 1 << i
        bits[pt] = b
    g = nx.DiGraph()
    for pt in system.points:
        for x in tab.atoms_with_letter(bits[pt]):
            g.add_node((pt, x))
    for pt in system.points:
        for x in tab.atoms_with_letter(bits[pt]):
            r = tab.req(x)
            for pt2 in system.point_succ[pt]:
                for y in tab.atoms_with_letter(bits[pt2]):
                    if (y & r[0]) == r[1]:
                        g.add_edge((pt, x), (pt2, y))
    fair = fair_nodes(g, _tableau_sets(tab, g))
    knowledge = {c: set() for c in system.classes}
    for pt, x in fair:
        knowledge[(pt[0], pt[1])].add((x, pt[2]))
    nodes = (TREE_ROOT,) + system.classes
    succ = {}
    for o in e.observations:
        succ[(TREE_ROOT, o)] = system.initial_class[o]
        for c in system.classes:
            succ[(c, o)] = system.class_succ[(c, o)]
    labels = {TREE_ROOT: ctx.dummy_label}
    for c in system.classes:
        labels[c] = TreeLabel(frozenset(knowledge[c]), frozenset(p.actions[c[0]]))
    return RegularTree(e.observations, TREE_ROOT, nodes, succ, labels)


def _tableau_sets(tab, g) -> list[set]:
    if tab.m == 0:
        return [set(g.nodes)]
    return [{v for v in g if tab.fulfils(v[-1], j)} for j in range(tab.m)]


# ---------------------------------------------------------------- acceptability

CONDITIONS = ("Real", "Init", "Obs", "Pred", "Succ", "Esound", "Ecomp", "Ksound", "Kcomp")


@dataclass
class AcceptabilityReport:
    failures: dict = field(default_factory=lambda: {c: [] for c in CONDITIONS})

    @property
    def ok(self) -> bool:
        return not any(self.failures.values())

    def passed(self, cond: str) -> bool:
        return not self.failures[cond]

    def summary(self) -> dict:
        return {c: ("pass" if not v else f"fail ({len(v)})") for c, v in self.failures.items()}


def check_acceptable(t: RegularTree, psi, e: Environment) -> AcceptabilityReport:
    """Check the nine acceptability conditions directly on a finite generator."""
    ctx = psi if isinstance(psi, SpecContext) else SpecContext(_formula(psi), e)
    report = AcceptabilityReport()
    fail = report.failures
    dirs = e.observations
    for n in t.nodes:
        lab = t.labels[n]
        if not isinstance(lab, TreeLabel):
            raise MalformedLabel(f"node {n!r} carries {lab!r}")
        if not lab.actions:
            raise MalformedLabel(f"empty action set at node {n!r}")
        for x, s in lab.knowledge:
            if s not in e.observation:
                raise MalformedLabel(f"unknown state {s!r} at node {n!r}")

    # vertices of the unravelling, up to generator node, depth class and incoming direction
    start = (t.root, "root", None)
    seen = {start}
    todo = deque([start])
    edges = []
    while todo:
        n, role, o_in = todo.popleft()
        for o in dirs:
            child = (t.succ[(n, o)], "d1" if role == "root" else "deep", o)
            edges.append(((n, role, o_in), o, child))
            if child not in seen:
                seen.add(child)
                todo.append(child)

    for n, role, o_in in sorted(seen, key=repr):
        lab = t.labels[n]
        K = lab.knowledge
        if role != "root":
            for x, s in K:
                if e.observation[s] != o_in:
                    fail["Obs"].append((n, o_in, s))
        if role == "d1":
            for x, s in K:
                if not x & ctx.root_bit or s not in e.initial:
                    fail["Real"].append((n, x, s))
            for s in e.with_observation(e.initial, o_in):
                if s not in lab.states:
                    fail["Init"].append((n, s))
        for x, s in K:
            for i, ch in ctx.exists_pos:
                some = any(u == s and (y >> ch) & 1 for y, u in K)
                if (x >> i) & 1 and not some:
                    fail["Esound"].append((n, x, s, i))
                if some and not (x >> i) & 1:
                    fail["Ecomp"].append((n, x, s, i))

    for (n, role, _), o, (c, _, _) in edges:
        if role == "root":
            continue
        lab, clab = t.labels[n], t.labels[c]
        reach = e.post_set(lab.states, lab.actions)
        for x, s in clab.knowledge:
            if s not in reach:
                fail["Pred"].append((n, o, s))
        for s in lab.states:
            for u in e.post(s, lab.actions):
                if e.observation[u] == o and u not in clab.states:
                    fail["Succ"].append((n, s, u))

    for k in fail:
        fail[k] = sorted(set(fail[k]), key=repr)
    inner = sorted({n for n, role, _ in seen if role != "root"}, key=repr)
    _check_runs(t, ctx, e, inner, report)
    return report


def _check_runs(t: RegularTree, ctx: SpecContext, e: Environment, inner, report) -> None:
    tab = ctx.tab
    g = nx.DiGraph()
    starts = []
    for n in inner:
        K = t.labels[n].knowledge
        for s in sorted(t.labels[n].states):
            for x in ctx.matching_atoms(s, K):
                starts.append((n, s, x))
    seen = set(starts)
    stack = list(starts)
    while stack:
        v = stack.pop()
        g.add_node(v)
        n, s, x = v
        lab = t.labels[n]
        r = tab.req(x)
        for u in e.post(s, lab.actions):
            n2 = t.succ[(n, e.observation[u])]
            for y in ctx.matching_atoms(u, t.labels[n2].knowledge):
                if (y & r[0]) == r[1]:
                    w = (n2, u, y)
                    g.add_edge(v, w)
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
    sets = _tableau_sets(tab, g)
    fair = fair_nodes(g, sets)
    for n in inner:
        K = t.labels[n].knowledge
        for x, s in sorted(K):
            if (n, s, x) not in fair:
                report.failures["Ksound"].append((n, x, s))
        for s in sorted(t.labels[n].states):
            for x in ctx.matching_atoms(s, K):
                if (n, s, x) in fair and (x, s) not in K:
                    prefix, cycle = _lasso(g, (n, s, x), fair, sets)
                    report.failures["Kcomp"].append({
                        "node": n, "state": s, "atom": x,
                        "prefix": tuple(v[1] for v in prefix),
                        "cycle": tuple(v[1] for v in cycle),
                    })


def _bfs_path(g: nx.DiGraph, src, goal, allowed=None) -> list:
    """Shortest path from src (exclusive) to the first node satisfying goal."""
    parent = {src: None}
    q = deque([src])
    while q:
        v = q.popleft()
        for w in g.successors(v):
            if allowed is not None and w not in allowed:
                continue
            if w in parent:
                continue
            parent[w] = v
            if goal(w):
                path = [w]
                while parent[path[-1]] is not None and parent[path[-1]] != src:
                    path.append(parent[path[-1]])
                return path[::-1]
            q.append(w)
    return []


def _lasso(g: nx.DiGraph, start, fair: set, sets: list) -> tuple[list, list]:
    """A path from `start` into a fair component, then a cycle meeting every accepting set."""
    comp_of = {}
    for comp in nx.strongly_connected_components(g):
        if len(comp) == 1 and not any(g.has_edge(v, v) for v in comp):
            continue
        if all(comp & s for s in sets):
            for v in comp:
                comp_of[v] = comp
    if start in comp_of:
        prefix, entry = [start], start
    else:
        tail = _bfs_path(g, start, lambda w: w in comp_of)
        prefix = [start] + tail[:-1]
        entry = tail[-1]
    comp = comp_of[entry]
    cycle = [entry]
    cur = entry
    for s in sets:
        if cur in s and len(cycle) > 1:
            continue
        step = _bfs_path(g, cur, lambda w, s=s: w in s, comp)
        cycle.extend(step)
        cur = cycle[-1]
    back = _bfs_path(g, cur, lambda w: w == entry, comp)
    cycle.extend(back[:-1])
    return prefix, cycle
