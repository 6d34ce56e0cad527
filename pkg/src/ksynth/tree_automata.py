"""Alternating and nondeterministic automata on observation-directed trees.

Transition formulas are positive Boolean formulas written as nested tuples::

    True | False | ("at", direction, state) | ("and", (f, ...)) | ("or", (f, ...))

Alphabets are never enumerated.  Transitions are functions of (state, label)
and emptiness explores only the labels proposed by a caller-supplied
candidate generator.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product as cartesian
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence


class BudgetExceeded(RuntimeError):
    """The exploration hit its configured node cap."""


class AlphabetMismatch(ValueError):
    pass


@dataclass(frozen=True)
class _Top:
    def __repr__(self) -> str:
        return "ACCEPT_ALL"


ACCEPT_ALL = _Top()
"""State of a nondeterministic automaton that accepts every subtree."""


# ---------------------------------------------------------------- positive Boolean formulas

def at(d, q):
    return ("at", d, q)


def pand(fs: Iterable) -> Any:
    parts = []
    for f in fs:
        if f is False:
            return False
        if f is True:
            continue
        parts.append(f)
    if not parts:
        return True
    if len(parts) == 1:
        return parts[0]
    return ("and", tuple(parts))


def por(fs: Iterable) -> Any:
    parts = []
    for f in fs:
        if f is True:
            return True
        if f is False:
            continue
        parts.append(f)
    if not parts:
        return False
    if len(parts) == 1:
        return parts[0]
    return ("or", tuple(parts))


def dual(f):
    """Swap and/or and true/false."""
    if f is True:
        return False
    if f is False:
        return True
    tag = f[0]
    if tag == "at":
        return f
    if tag == "and":
        return ("or", tuple(dual(g) for g in f[1]))
    if tag == "or":
        return ("and", tuple(dual(g) for g in f[1]))
    raise ValueError(f"not a positive Boolean formula: {f!r}")


def _minimize(sets: Iterable[frozenset]) -> list[frozenset]:
    uniq = sorted(set(sets), key=lambda s: (len(s), sorted(map(repr, s))))
    out: list[frozenset] = []
    for s in uniq:
        if not any(t <= s for t in out):
            out.append(s)
    return out


@lru_cache(maxsize=1 << 16)
def models(f) -> tuple[frozenset, ...]:
    """Minimal satisfying sets of (direction, state) atoms."""
    if f is True:
        return (frozenset(),)
    if f is False:
        return ()
    tag = f[0]
    if tag == "at":
        return (frozenset([(f[1], f[2])]),)
    if tag == "or":
        return tuple(_minimize(m for g in f[1] for m in models(g)))
    if tag == "and":
        acc = [frozenset()]
        for g in f[1]:
            mg = models(g)
            acc = _minimize(a | b for a in acc for b in mg)
            if not acc:
                return ()
        return tuple(acc)
    raise ValueError(f"not a positive Boolean formula: {f!r}")


def satisfied_by(f, chosen: set) -> bool:
    if f is True:
        return True
    if f is False:
        return False
    tag = f[0]
    if tag == "at":
        return (f[1], f[2]) in chosen
    if tag == "and":
        return all(satisfied_by(g, chosen) for g in f[1])
    return any(satisfied_by(g, chosen) for g in f[1])


# ---------------------------------------------------------------- automata

@dataclass(frozen=True)
class AlternatingTreeAutomaton:
    """Alternating automaton with Büchi or co-Büchi acceptance.

    For ``buchi`` the predicate `final` marks accepting states (visit
    infinitely often); for ``cobuchi`` it marks the rejecting states (visit
    finitely often).  Rabin acceptance is representable through `pairs` but
    no operation here handles it.
    """
    directions: tuple
    initial: Hashable
    delta: Callable[[Hashable, Any], Any] = field(repr=False)
    acceptance: str = "buchi"
    final: Callable[[Hashable], bool] = field(default=lambda q: True, repr=False)
    states: tuple | None = field(default=None, repr=False)
    pairs: tuple = ()
    name: str = ""

    def moves(self, q, label) -> tuple[frozenset, ...]:
        return models(self.delta(q, label))


@dataclass(frozen=True)
class NondetTreeAutomaton:
    """Nondeterministic Büchi tree automaton.

    ``moves_fn(q, label)`` returns tuples aligned with `directions`, one
    successor state per direction; `ACCEPT_ALL` leaves a direction
    unconstrained.
    """
    directions: tuple
    initial: Hashable
    moves_fn: Callable[[Hashable, Any], Sequence[tuple]] = field(repr=False)
    accepting_fn: Callable[[Hashable], bool] = field(default=lambda q: True, repr=False)
    all_accepting: bool = False
    name: str = ""
    alphabet: str | None = None

    def moves(self, q, label) -> Sequence[tuple]:
        if q is ACCEPT_ALL:
            return ((ACCEPT_ALL,) * len(self.directions),)
        return self.moves_fn(q, label)

    def accepting(self, q) -> bool:
        return q is ACCEPT_ALL or self.all_accepting or self.accepting_fn(q)


def is_nondeterministic(a: AlternatingTreeAutomaton, states: Iterable, labels: Iterable) -> bool:
    """No minimal model sends two distinct copies in the same direction."""
    labels = list(labels)
    for q in states:
        for lab in labels:
            for m in a.moves(q, lab):
                dirs = [d for d, _ in m]
                if len(dirs) != len(set(dirs)):
                    return False
    return True


def dualize(a: AlternatingTreeAutomaton) -> AlternatingTreeAutomaton:
    """Complement by dualizing transitions and the acceptance condition."""
    if a.acceptance == "buchi":
        kind = "cobuchi"
    elif a.acceptance == "cobuchi":
        kind = "buchi"
    else:
        raise ValueError(f"cannot dualize {a.acceptance} acceptance")
    delta = a.delta
    return AlternatingTreeAutomaton(
        a.directions, a.initial, lambda q, lab: dual(delta(q, lab)), kind, a.final,
        a.states, a.pairs, f"dual({a.name})" if a.name else "dual",
    )


def accept_all_automaton(directions: Sequence, alphabet: str | None = None) -> NondetTreeAutomaton:
    return NondetTreeAutomaton(tuple(directions), ACCEPT_ALL, lambda q, lab: (), all_accepting=True,
                               name="accept-all", alphabet=alphabet)


# ---------------------------------------------------------------- alternation removal

def _fold_choices(per_copy: list[list], combine, easier, weight=None) -> list:
    """Combine one choice per copy, pruning partial combinations that are dominated."""
    acc = [None]
    for options in per_copy:
        nxt = []
        seen = set()
        for partial in acc:
            for opt in options:
                c = combine(partial, opt)
                if c not in seen:
                    seen.add(c)
                    nxt.append(c)
        if easier is not None and len(nxt) > 1:
            nxt = _prune(nxt, easier, weight)
        acc = nxt
        if not acc:
            return []
    return acc


def _prune(items: list, easier, weight) -> list:
    """Drop combinations for which another one is at most as demanding.

    `weight` must strictly decrease along `easier` between distinct items, so
    every dominator is examined before the items it dominates.
    """
    order = sorted(range(len(items)), key=lambda i: (weight(items[i]), i))
    kept: list[int] = []
    for i in order:
        x = items[i]
        if not any(easier(items[j], x) for j in kept):
            kept.append(i)
    return [items[i] for i in sorted(kept)]


def remove_alternation_buchi(a: AlternatingTreeAutomaton, prune: bool = True) -> NondetTreeAutomaton:
    """Breakpoint (subset plus obligation set) construction for Büchi automata."""
    if a.acceptance != "buchi":
        raise ValueError("breakpoint construction needs Büchi acceptance")
    dirs = a.directions
    k = len(dirs)
    pos = {d: i for i, d in enumerate(dirs)}
    final = a.final
    empty = frozenset()

    def combine(partial, opt):
        model, owes = opt
        if partial is None:
            partial = tuple((empty, empty) for _ in dirs)
        rows = [list(x) for x in partial]
        for d, q in model:
            i = pos[d]
            rows[i][0] = rows[i][0] | {q}
            if owes:
                rows[i][1] = rows[i][1] | {q}
        return tuple((s, o) for s, o in rows)

    def easier(x, y):
        return all(xs <= ys and xo <= yo for (xs, xo), (ys, yo) in zip(x, y))

    def weight(x):
        return sum(len(xs) + len(xo) for xs, xo in x)

    def moves(state, label):
        S, O = state
        fresh = not O
        per_copy = []
        for q in sorted(S, key=repr):
            ms = a.moves(q, label)
            if not ms:
                return ()
            owes = fresh or q in O
            per_copy.append([(m, owes) for m in ms])
        if not per_copy:
            return ((ACCEPT_ALL,) * k,)
        combos = _fold_choices(per_copy, combine, easier if prune else None, weight)
        out = []
        for combo in combos:
            row = []
            for s, o in combo:
                o = frozenset(q for q in o if not final(q))
                row.append(ACCEPT_ALL if not s else (s, o))
            out.append(tuple(row))
        return tuple(out)

    return NondetTreeAutomaton(dirs, (frozenset([a.initial]), frozenset()), moves,
                               lambda st: not st[1], name=f"mh({a.name})")


def remove_alternation_cobuchi(a: AlternatingTreeAutomaton, rank_bound: int | None = None,
                               prune: bool = True) -> NondetTreeAutomaton:
    """Budgeted-copy construction for co-Büchi automata.

    Each copy carries how many more visits to the rejecting set it may make;
    copies of the same state keep the smallest budget.  Every state is
    accepting, so the result is a safety automaton.  Bounds below the needed
    number of visits make the language smaller, never larger.
    """
    if a.acceptance != "cobuchi":
        raise ValueError("rank construction needs co-Büchi acceptance")
    if rank_bound is None:
        if a.states is None:
            raise ValueError("rank_bound required when the state set is implicit")
        rank_bound = 2 * len(a.states)
    if rank_bound < 1:
        raise ValueError("rank_bound must be positive")
    dirs = a.directions
    k = len(dirs)
    pos = {d: i for i, d in enumerate(dirs)}
    bad = a.final

    def combine(partial, opt):
        if partial is None:
            partial = tuple({} for _ in dirs)
        rows = [dict(x) for x in partial]
        for i, q, b in opt:
            cur = rows[i].get(q)
            if cur is None or b < cur:
                rows[i][q] = b
        return tuple(frozenset(r.items()) for r in rows)

    def easier(x, y):
        for xr, yr in zip(x, y):
            yd = dict(yr)
            for q, b in xr:
                if q not in yd or yd[q] > b:
                    return False
        return True

    def weight(x):
        return sum(len(r) for r in x), -sum(b for r in x for _, b in r)

    def moves(state, label):
        per_copy = []
        for q, b in sorted(state, key=repr):
            opts = []
            for m in a.moves(q, label):
                opt = []
                ok = True
                for d, q2 in m:
                    b2 = b - 1 if bad(q2) else b
                    if b2 < 0:
                        ok = False
                        break
                    opt.append((pos[d], q2, b2))
                if ok:
                    opts.append(tuple(sorted(opt, key=repr)))
            if not opts:
                return ()
            per_copy.append(opts)
        if not per_copy:
            return ((ACCEPT_ALL,) * k,)
        combos = _fold_choices(per_copy, combine, easier if prune else None, weight)
        return tuple(tuple(ACCEPT_ALL if not r else frozenset(r) for r in combo) for combo in combos)

    b0 = rank_bound - 1 if bad(a.initial) else rank_bound
    return NondetTreeAutomaton(dirs, frozenset([(a.initial, b0)]), moves, all_accepting=True,
                               name=f"rank({a.name})")


# ---------------------------------------------------------------- products

def product(automata: Sequence[NondetTreeAutomaton]) -> NondetTreeAutomaton:
    """Intersection; several Büchi conditions are merged with a round-robin counter."""
    if not automata:
        raise ValueError("empty product")
    dirs = automata[0].directions
    alphabets = {x.alphabet for x in automata if x.alphabet is not None}
    for x in automata:
        if x.directions != dirs:
            raise AlphabetMismatch("automata disagree on tree directions")
    if len(alphabets) > 1:
        raise AlphabetMismatch(f"automata over different alphabets: {sorted(alphabets)}")
    comps = tuple(automata)
    live = [i for i, x in enumerate(comps) if not x.all_accepting]
    k = len(dirs)
    n = len(comps)

    def accepting(state):
        if not live:
            return True
        qs, c = state
        return c == 0 and comps[live[0]].accepting(qs[live[0]])

    def moves(state, label):
        qs, c = state
        per = []
        for x, q in zip(comps, qs):
            ms = x.moves(q, label)
            if not ms:
                return ()
            per.append(ms)
        if live:
            cur = live[c]
            c2 = (c + 1) % len(live) if comps[cur].accepting(qs[cur]) else c
        else:
            c2 = 0
        out = []
        for choice in cartesian(*per):
            row = []
            for i in range(k):
                tup = tuple(choice[j][i] for j in range(n))
                if all(t is ACCEPT_ALL for t in tup):
                    row.append(ACCEPT_ALL)
                else:
                    row.append((tup, c2))
            out.append(tuple(row))
        return tuple(out)

    return NondetTreeAutomaton(dirs, (tuple(x.initial for x in comps), 0), moves, accepting,
                               all_accepting=not live, name="x".join(x.name for x in comps),
                               alphabet=next(iter(alphabets)) if alphabets else None)


# ---------------------------------------------------------------- regular trees

@dataclass(frozen=True)
class RegularTree:
    """Finite generator of an infinite labelled tree."""
    directions: tuple
    root: Hashable
    nodes: tuple
    succ: Mapping[tuple, Hashable] = field(repr=False)
    labels: Mapping[Hashable, Any] = field(repr=False)

    def child(self, n, d):
        return self.succ[(n, d)]

    def node_at(self, path: Iterable) -> Hashable:
        n = self.root
        for d in path:
            n = self.succ[(n, d)]
        return n

    def label_at(self, path: Iterable):
        return self.labels[self.node_at(path)]

    def relabel(self, labels: Mapping) -> "RegularTree":
        return RegularTree(self.directions, self.root, self.nodes, self.succ, dict(labels))

    def to_dot(self, show=repr) -> str:
        ids = {n: i for i, n in enumerate(self.nodes)}
        lines = ["digraph tree {"]
        for n in self.nodes:
            shape = "doublecircle" if n == self.root else "box"
            text = show(self.labels[n]).replace('"', "'")
            lines.append(f'  n{ids[n]} [shape={shape}, label="{text}"];')
        for n in self.nodes:
            for d in self.directions:
                lines.append(f'  n{ids[n]} -> n{ids[self.succ[(n, d)]]} [label="{d}"];')
        lines.append("}")
        return "\n".join(lines)


# ---------------------------------------------------------------- games

def solve_buchi_game(succ: Sequence[Sequence[int]], owner: Sequence[int],
                     accepting: Sequence[bool], player: int = 0):
    """Winning region and positional strategy of `player` for the Büchi objective.

    A player who owns a node without successors loses there.
    """
    n = len(succ)
    pred: list[list[int]] = [[] for _ in range(n)]
    for v, ws in enumerate(succ):
        for w in ws:
            pred[w].append(v)
    alive = [True] * n

    def attractor(target: Iterable[int], who: int):
        inside = [False] * n
        via: dict[int, int] = {}
        count = [0] * n
        for v in range(n):
            if alive[v]:
                count[v] = sum(1 for w in succ[v] if alive[w])
        queue = deque()
        for v in target:
            if alive[v] and not inside[v]:
                inside[v] = True
                queue.append(v)
        for v in range(n):
            if alive[v] and not inside[v] and owner[v] != who and count[v] == 0:
                inside[v] = True
                queue.append(v)
        while queue:
            w = queue.popleft()
            for v in pred[w]:
                if not alive[v] or inside[v]:
                    continue
                if owner[v] == who:
                    inside[v] = True
                    via[v] = w
                    queue.append(v)
                else:
                    count[v] -= 1
                    if count[v] == 0:
                        inside[v] = True
                        queue.append(v)
        return inside, via

    # positions where the player is stuck, and everything the opponent forces there
    lost, _ = attractor([], 1 - player)
    for v in range(n):
        if lost[v]:
            alive[v] = False
    while True:
        reach, via = attractor([v for v in range(n) if alive[v] and accepting[v]], player)
        trap = [v for v in range(n) if alive[v] and not reach[v]]
        if not trap:
            break
        lost, _ = attractor(trap, 1 - player)
        for v in range(n):
            if lost[v]:
                alive[v] = False
    strategy = {}
    for v in range(n):
        if alive[v] and owner[v] == player:
            if v in via:
                strategy[v] = via[v]
            else:
                for w in succ[v]:
                    if alive[w]:
                        strategy[v] = w
                        break
    return alive, strategy


def accepts_regular_tree(a, t: RegularTree) -> bool:
    """Exact membership of the unravelled tree, decided by a finite game."""
    if isinstance(a, AlternatingTreeAutomaton):
        return _accepts_alternating(a, t)
    return _accepts_nondet(a, t)


class _Arena:
    def __init__(self):
        self.ids: dict = {}
        self.succ: list[list[int]] = []
        self.owner: list[int] = []
        self.acc: list[bool] = []
        self.keys: list = []

    def node(self, key, owner: int, acc: bool) -> tuple[int, bool]:
        i = self.ids.get(key)
        if i is not None:
            return i, False
        i = len(self.succ)
        self.ids[key] = i
        self.succ.append([])
        self.owner.append(owner)
        self.acc.append(acc)
        self.keys.append(key)
        return i, True


def _accepts_alternating(a: AlternatingTreeAutomaton, t: RegularTree) -> bool:
    if a.acceptance not in ("buchi", "cobuchi"):
        raise ValueError("membership supports Büchi and co-Büchi acceptance")
    ar = _Arena()
    root, _ = ar.node(("s", t.root, a.initial), 0, bool(a.final(a.initial)))
    stack = [root]
    while stack:
        v = stack.pop()
        _, n, q = ar.keys[v]
        for m in a.moves(q, t.labels[n]):
            mid, new = ar.node(("m", n, m), 1, False)
            ar.succ[v].append(mid)
            if new:
                for d, q2 in sorted(m, key=repr):
                    w, fresh = ar.node(("s", t.succ[(n, d)], q2), 0, bool(a.final(q2)))
                    ar.succ[mid].append(w)
                    if fresh:
                        stack.append(w)
    if a.acceptance == "buchi":
        win, _ = solve_buchi_game(ar.succ, ar.owner, ar.acc, 0)
        return win[root]
    win, _ = solve_buchi_game(ar.succ, ar.owner, ar.acc, 1)
    return not win[root]


def _accepts_nondet(a: NondetTreeAutomaton, t: RegularTree) -> bool:
    ar = _Arena()
    dirs = a.directions
    root, _ = ar.node(("s", t.root, a.initial), 0, a.accepting(a.initial))
    stack = [root]
    while stack:
        v = stack.pop()
        _, n, q = ar.keys[v]
        if q is ACCEPT_ALL:
            ar.succ[v].append(v)
            continue
        for mv in a.moves(q, t.labels[n]):
            mid, new = ar.node(("m", n, mv), 1, False)
            ar.succ[v].append(mid)
            if new:
                for d, q2 in zip(dirs, mv):
                    w, fresh = ar.node(("s", t.succ[(n, d)], q2), 0, a.accepting(q2))
                    ar.succ[mid].append(w)
                    if fresh:
                        stack.append(w)
    win, _ = solve_buchi_game(ar.succ, ar.owner, ar.acc, 0)
    return win[root]


# ---------------------------------------------------------------- emptiness

@dataclass
class EmptinessStats:
    states: int = 0
    moves: int = 0
    labels_tried: int = 0


def emptiness(a: NondetTreeAutomaton, label_candidates: Callable[[Hashable], Iterable],
              default_label: Any = None, budget: int | None = None,
              stats: EmptinessStats | None = None) -> RegularTree | None:
    """Return a regular tree accepted by `a`, or None if none uses proposed labels.

    The arena is explored breadth-first in canonical order, solved as a
    Büchi game, and the winning strategy unravelled into a generator whose
    acceptance is re-checked before it is returned.  Whenever the arena
    doubles, the partial game is solved with unexplored positions counted as
    lost; a win there is a win in the full game, so the search stops early.
    """
    stats = stats if stats is not None else EmptinessStats()
    dirs = a.directions
    ar = _Arena()
    labels_of: dict[int, Any] = {}
    root, _ = ar.node(("s", a.initial), 0, a.accepting(a.initial))
    queue = deque([root])
    win = None
    next_solve = 256
    while queue:
        if len(ar.succ) >= next_solve:
            next_solve = 2 * len(ar.succ)
            win, strategy = solve_buchi_game(ar.succ, ar.owner, ar.acc, 0)
            if win[root]:
                break
            win = None
        v = queue.popleft()
        q = ar.keys[v][1]
        stats.states += 1
        if budget is not None and len(ar.succ) > budget:
            raise BudgetExceeded(f"emptiness arena exceeded {budget} nodes")
        if q is ACCEPT_ALL:
            ar.succ[v].append(v)
            continue
        for lab in label_candidates(q):
            stats.labels_tried += 1
            for mv in a.moves(q, lab):
                mid, new = ar.node(("m", mv), 1, False)
                labels_of.setdefault((v, mid), lab)
                if new:
                    stats.moves += 1
                    for q2 in mv:
                        w, fresh = ar.node(("s", q2), 0, a.accepting(q2))
                        ar.succ[mid].append(w)
                        if fresh:
                            queue.append(w)
                if mid not in ar.succ[v]:
                    ar.succ[v].append(mid)
    if win is None:
        win, strategy = solve_buchi_game(ar.succ, ar.owner, ar.acc, 0)
    if not win[root]:
        return None

    # unravel the strategy into a generator
    index = {root: 0}
    order = [root]
    succ_map = {}
    labels = {}
    i = 0
    while i < len(order):
        v = order[i]
        q = ar.keys[v][1]
        if q is ACCEPT_ALL:
            labels[index[v]] = default_label
            for d in dirs:
                succ_map[(index[v], d)] = index[v]
            i += 1
            continue
        mid = strategy[v]
        labels[index[v]] = labels_of[(v, mid)]
        for d, w in zip(dirs, ar.succ[mid]):
            if w not in index:
                index[w] = len(order)
                order.append(w)
            succ_map[(index[v], d)] = index[w]
        i += 1
    tree = RegularTree(dirs, 0, tuple(range(len(order))), succ_map, labels)
    if not accepts_regular_tree(a, tree):
        raise AssertionError("internal error: emptiness witness rejected by membership check")
    return tree
