"""Independent oracles and instance generators shared by the tests."""
from __future__ import annotations

import random
from itertools import combinations, product

from ksynth.environment import load_environment
from ksynth.protocol_runtime import Protocol, verify_realizes


def transition_tables(n: int, k: int):
    """Initially connected transition tables on states 0..n-1, numbered in BFS order."""
    cells = [(i, j) for i in range(n) for j in range(k)]

    def rec(pos, used, table):
        if pos == len(cells):
            if used == n:
                yield dict(table)
            return
        i, _ = cells[pos]
        if i >= used:
            return  # state i was never reached
        for t in range(min(used + 1, n)):
            table[cells[pos]] = t
            yield from rec(pos + 1, max(used, t + 1), table)
        del table[cells[pos]]

    yield from rec(0, 1, {})


def enumerate_protocols(e, max_states: int, deterministic: bool = True):
    """Every protocol with at most `max_states` states, up to renaming.

    The initial state's own action set is never consulted, so it is fixed to
    the full set; the other states range over singletons (or all nonempty
    subsets when `deterministic` is false).
    """
    obs = e.observations
    acts = e.agent_actions
    if deterministic:
        choices = [frozenset([a]) for a in acts]
    else:
        choices = [frozenset(c) for m in range(1, len(acts) + 1)
                   for c in combinations(acts, m)]
    for n in range(1, max_states + 1):
        names = [f"q{i}" for i in range(n)]
        for table in transition_tables(n, len(obs)):
            trans = {(names[i], obs[j]): names[t] for (i, j), t in table.items()}
            for labels in product(choices, repeat=n - 1):
                actions = {names[0]: frozenset(acts)}
                actions.update({names[i + 1]: lab for i, lab in enumerate(labels)})
                if n == 1:
                    for lab in choices:
                        yield Protocol(tuple(names), names[0], trans, {names[0]: lab}, obs)
                    break
                yield Protocol(tuple(names), names[0], trans, actions, obs)


def brute_force_realizer(e, psi, max_states: int, deterministic: bool = True):
    for p in enumerate_protocols(e, max_states, deterministic):
        if verify_realizes(e, p, psi):
            return p
    return None


SPEC_POOL = (
    "G (K p | K !p)",
    "F K p",
    "G (p -> K p)",
    "X K !p",
    "G F (K p | K q)",
    "K F p",
    "G E X p",
    "p U K q",
)


def random_environment(rng: random.Random):
    n = rng.randint(1, 3)
    names = [f"s{i}" for i in range(n)]
    env_actions = ["u", "v"][: rng.randint(1, 2)]
    agent_actions = ["a", "b"][: rng.randint(1, 2)]
    obs = ["0", "1"][: rng.randint(1, 2)]
    states = []
    for s in names:
        enabled = [x for x in env_actions if rng.random() < 0.7] or [rng.choice(env_actions)]
        states.append({"name": s, "observation": rng.choice(obs),
                       "valuation": {"p": rng.random() < 0.5, "q": rng.random() < 0.5},
                       "env_protocol": enabled})
    trans = {s: {f"{x},{a}": rng.choice(names) for x in env_actions for a in agent_actions}
             for s in names}
    initial = [s for s in names if rng.random() < 0.6] or [rng.choice(names)]
    return load_environment({"propositions": ["p", "q"], "env_actions": env_actions,
                             "agent_actions": agent_actions, "states": states,
                             "initial": initial, "transitions": trans})


def random_instances(count: int, seed: int = 2024):
    rng = random.Random(seed)
    out = []
    for i in range(count):
        e = random_environment(rng)
        out.append((e, SPEC_POOL[i % len(SPEC_POOL)]))
    return out


def system_signature(e, p) -> tuple:
    """Canonical shape of the generated system; protocols with equal signatures
    generate the same runs and the same knowledge."""
    index = {}
    order = []
    starts = []
    for o in e.observations:
        c = (p.step(p.initial, o), e.with_observation(e.initial, o))
        starts.append(c)
    rows = []

    def ident(c):
        q, S = c
        key = (q, S) if S else ("empty",)
        if key not in index:
            index[key] = len(order)
            order.append(c)
        return index[key]

    roots = tuple(ident(c) for c in starts)
    i = 0
    while i < len(order):
        q, S = order[i]
        if not S:
            rows.append(("empty",))
            i += 1
            continue
        acts = p.actions[q]
        nxt = e.post_set(S, acts)
        succ = tuple(ident((p.step(q, o), e.with_observation(nxt, o))) for o in e.observations)
        rows.append((tuple(sorted(S)), tuple(sorted(acts)), succ))
        i += 1
    return roots, tuple(rows)


def distinct_protocols(e, max_states: int, deterministic: bool = True):
    seen = set()
    for p in enumerate_protocols(e, max_states, deterministic):
        sig = system_signature(e, p)
        if sig not in seen:
            seen.add(sig)
            yield p


def label_pool(e, psi, max_states: int = 2) -> list:
    """Labels occurring in the induced trees of small protocols, plus damaged copies."""
    from ksynth.knowledge import TreeLabel
    from ksynth.protocol_runtime import induced_tree

    pool = set()
    for p in enumerate_protocols(e, max_states):
        t = induced_tree(e, p, psi)
        pool.update(t.labels[n] for n in t.nodes if n != t.root)
    damaged = set()
    for lab in pool:
        for pair in lab.knowledge:
            damaged.add(TreeLabel(lab.knowledge - {pair}, lab.actions))
    pool |= {lab for lab in damaged if lab.knowledge}
    return sorted(pool, key=repr)


def random_regular_tree(rng: random.Random, pool: list, directions, max_nodes: int = 3):
    from ksynth.tree_automata import RegularTree

    n = rng.randint(1, max_nodes)
    nodes = tuple(range(n))
    succ = {(v, d): rng.randrange(n) for v in nodes for d in directions}
    labels = {v: rng.choice(pool) for v in nodes}
    return RegularTree(tuple(directions), 0, nodes, succ, labels)


def lassos(props, max_prefix: int, max_cycle: int):
    """Every lasso over the letters 2^props with bounded prefix and cycle lengths."""
    letters = [frozenset(c) for k in range(len(props) + 1) for c in combinations(props, k)]
    for n in range(max_prefix + 1):
        for prefix in product(letters, repeat=n):
            for m in range(1, max_cycle + 1):
                for cycle in product(letters, repeat=m):
                    yield list(prefix), list(cycle)
