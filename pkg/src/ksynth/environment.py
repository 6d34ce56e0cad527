"""Finite interpreted environments for a single agent."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Mapping

from .logic import Formula, Globally, Iff, Next, conjunction, ident_of, parse_formula, prop, render


class EnvironmentValidationError(ValueError):
    """Raised for malformed or inconsistent environment descriptions."""


@dataclass(frozen=True)
class Environment:
    states: tuple[str, ...]
    initial: frozenset[str]
    env_actions: tuple[str, ...]
    agent_actions: tuple[str, ...]
    propositions: tuple[str, ...]
    env_protocol: Mapping[str, tuple[str, ...]] = field(repr=False)
    transitions: Mapping[tuple[str, str, str], str] = field(repr=False)
    observation: Mapping[str, str] = field(repr=False)
    valuation: Mapping[str, frozenset[str]] = field(repr=False)

    def __hash__(self):
        return hash((self.states, self.initial, self.env_actions, self.agent_actions))

    @cached_property
    def observations(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.observation.values())))

    @cached_property
    def _post_cache(self) -> dict:
        return {}

    def post(self, s: str, actions: Iterable[str]) -> frozenset[str]:
        """Successor states of `s` when the agent may take any of `actions`."""
        key = (s, frozenset(actions))
        cache = self._post_cache
        if key not in cache:
            cache[key] = frozenset(self.transitions[(s, ae, a)]
                                   for ae in self.env_protocol[s] for a in key[1])
        return cache[key]

    def post_set(self, states: Iterable[str], actions: Iterable[str]) -> frozenset[str]:
        actions = frozenset(actions)
        out: set[str] = set()
        for s in states:
            out |= self.post(s, actions)
        return frozenset(out)

    def with_observation(self, states: Iterable[str], o: str) -> frozenset[str]:
        return frozenset(s for s in states if self.observation[s] == o)

    def holds(self, s: str, p: str) -> bool:
        return p in self.valuation[s]

    def to_json(self) -> dict:
        trans: dict[str, dict[str, str]] = {s: {} for s in self.states}
        for (s, ae, a), t in sorted(self.transitions.items()):
            trans[s][f"{ae},{a}"] = t
        return {
            "propositions": list(self.propositions),
            "env_actions": list(self.env_actions),
            "agent_actions": list(self.agent_actions),
            "states": [{"name": s,
                        "valuation": {p: p in self.valuation[s] for p in self.propositions},
                        "observation": self.observation[s],
                        "env_protocol": list(self.env_protocol[s])} for s in self.states],
            "initial": sorted(self.initial),
            "transitions": trans,
        }


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise EnvironmentValidationError(msg)


def _string_list(doc: Mapping, key: str) -> list[str]:
    val = doc.get(key)
    _require(isinstance(val, list) and all(isinstance(x, str) for x in val),
             f"field {key!r} must be a list of strings")
    _require(len(set(val)) == len(val), f"duplicate entries in {key!r}")
    return val


def environment_from_dict(doc: Mapping) -> Environment:
    _require(isinstance(doc, Mapping), "environment document must be a JSON object")
    props = _string_list(doc, "propositions")
    env_actions = _string_list(doc, "env_actions")
    agent_actions = _string_list(doc, "agent_actions")
    _require(bool(env_actions), "no environment actions")
    _require(bool(agent_actions), "no agent actions")
    raw_states = doc.get("states")
    _require(isinstance(raw_states, list) and raw_states, "field 'states' must be a nonempty list")

    names, valuation, observation, protocol = [], {}, {}, {}
    for entry in raw_states:
        _require(isinstance(entry, Mapping), "state entries must be objects")
        name = entry.get("name")
        _require(isinstance(name, str), "state without a name")
        _require(name not in valuation, f"duplicate state {name!r}")
        names.append(name)
        val = entry.get("valuation", {})
        _require(isinstance(val, Mapping), f"valuation of {name!r} must be an object")
        for p, v in val.items():
            _require(p in props, f"state {name!r} values unknown proposition {p!r}")
            _require(isinstance(v, bool), f"valuation of {p!r} in {name!r} must be boolean")
        valuation[name] = frozenset(p for p, v in val.items() if v)
        obs = entry.get("observation")
        _require(isinstance(obs, str), f"state {name!r} needs a string observation")
        observation[name] = obs
        prot = entry.get("env_protocol")
        _require(isinstance(prot, list), f"state {name!r} needs an env_protocol list")
        _require(len(prot) > 0, f"empty environment protocol at state {name!r}")
        for ae in prot:
            _require(ae in env_actions, f"state {name!r} enables unknown environment action {ae!r}")
        protocol[name] = tuple(sorted(set(prot)))

    initial = _string_list(doc, "initial")
    _require(bool(initial), "empty initial set")
    for s in initial:
        _require(s in valuation, f"initial state {s!r} is not declared")

    raw_trans = doc.get("transitions")
    _require(isinstance(raw_trans, Mapping), "field 'transitions' must be an object")
    transitions = {}
    for s, row in raw_trans.items():
        _require(s in valuation, f"transitions given for undeclared state {s!r}")
        _require(isinstance(row, Mapping), f"transition row of {s!r} must be an object")
        for key, t in row.items():
            parts = key.split(",")
            _require(len(parts) == 2, f"joint action key {key!r} must read 'envAction,agentAction'")
            ae, a = (x.strip() for x in parts)
            _require(ae in env_actions, f"unknown environment action {ae!r} in {s!r}")
            _require(a in agent_actions, f"unknown agent action {a!r} in {s!r}")
            _require(isinstance(t, str) and t in valuation,
                     f"transition {s!r} --{key}--> targets undeclared state {t!r}")
            transitions[(s, ae, a)] = t
    for s in names:
        for ae in env_actions:
            for a in agent_actions:
                _require((s, ae, a) in transitions,
                         f"missing transition for state {s!r} and joint action '{ae},{a}'")

    return Environment(
        states=tuple(sorted(names)),
        initial=frozenset(initial),
        env_actions=tuple(sorted(env_actions)),
        agent_actions=tuple(sorted(agent_actions)),
        propositions=tuple(sorted(props)),
        env_protocol=protocol,
        transitions=transitions,
        observation=observation,
        valuation=valuation,
    )


def load_environment(document: str | bytes | Mapping) -> Environment:
    """Validate an environment given as JSON text or an already decoded object."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise EnvironmentValidationError(f"invalid JSON: {exc}") from exc
    return environment_from_dict(document)


def read_environment(path) -> Environment:
    with open(path, encoding="utf-8") as fh:
        return load_environment(fh.read())


def apply_transition(e: Environment, s: str, env_action: str, agent_action: str) -> str:
    if s not in e.observation:
        raise EnvironmentValidationError(f"unknown state {s!r}")
    if env_action not in e.env_actions:
        raise EnvironmentValidationError(f"unknown environment action {env_action!r}")
    if agent_action not in e.agent_actions:
        raise EnvironmentValidationError(f"unknown agent action {agent_action!r}")
    return e.transitions[(s, env_action, agent_action)]


# ---------------------------------------------------------------- transformations

def said_prop(f: Formula) -> str:
    return f"said_1({ident_of(f)})"


def did_prop(action: str) -> str:
    return f"did_1({action})"


def _subsets(items: tuple) -> list[tuple]:
    return [c for k in range(len(items) + 1) for c in combinations(items, k)]


def say_action(action: str, asserted: Iterable[Formula]) -> str:
    return f"{action}[{';'.join(ident_of(f) for f in asserted)}]"


def split_say_action(name: str) -> tuple[str, tuple[str, ...]]:
    """Inverse of :func:`say_action` on names: base action and asserted identifiers."""
    base, _, rest = name.partition("[")
    body = rest[:-1]
    return base, tuple(x for x in body.split(";") if x)


def say_formula(phis: Iterable[Formula | str]) -> Formula:
    """Conjunction of ``G (K phi <-> X said_1(K phi))``: the agent asserts exactly what it knows."""
    phis = sorted({parse_formula(f) if isinstance(f, str) else f for f in phis}, key=render)
    return conjunction([Globally(Iff(f, Next(prop(said_prop(f))))) for f in phis])


def _pair_state(s: str, tag: str) -> str:
    return f"{s}|{tag}"


def transform_say(e: Environment, phis: Iterable[Formula | str]) -> Environment:
    """Add assertion actions and ``said_1`` propositions for the given K-formulas.

    States become pairs of an original state and the most recently asserted
    subset; the initial assertion is empty.
    """
    phis = [parse_formula(f) if isinstance(f, str) else f for f in phis]
    for f in phis:
        if f.op != "knows":
            raise EnvironmentValidationError(f"assertion {render(f)!r} is not of the form K phi")
    phis = sorted(set(phis), key=render)
    for a in e.agent_actions:
        if "[" in a:
            raise EnvironmentValidationError(f"agent action {a!r} already carries an assertion")
    new_props = [said_prop(f) for f in phis]
    for p in new_props:
        if p in e.propositions:
            raise EnvironmentValidationError(f"proposition {p!r} already exists")
    subsets = _subsets(tuple(phis))
    tag = {sub: "{" + ";".join(ident_of(f) for f in sub) + "}" for sub in subsets}

    states, valuation, observation, protocol = [], {}, {}, {}
    for s in e.states:
        for sub in subsets:
            name = _pair_state(s, tag[sub])
            states.append(name)
            valuation[name] = e.valuation[s] | {said_prop(f) for f in sub}
            observation[name] = e.observation[s]
            protocol[name] = e.env_protocol[s]
    actions = {say_action(a, sub): (a, sub) for a in e.agent_actions for sub in subsets}
    transitions = {}
    for s in e.states:
        for sub in subsets:
            src = _pair_state(s, tag[sub])
            for ae in e.env_actions:
                for name, (a, asserted) in actions.items():
                    transitions[(src, ae, name)] = _pair_state(e.transitions[(s, ae, a)], tag[asserted])
    return Environment(
        states=tuple(sorted(states)),
        initial=frozenset(_pair_state(s, tag[()]) for s in e.initial),
        env_actions=e.env_actions,
        agent_actions=tuple(sorted(actions)),
        propositions=tuple(sorted(set(e.propositions) | set(new_props))),
        env_protocol=protocol,
        transitions=transitions,
        observation=observation,
        valuation=valuation,
    )


NO_ACTION = "none"


def transform_did(e: Environment) -> Environment:
    """Record the agent's last action in the state and expose it as ``did_1(a)``."""
    new_props = {a: did_prop(a) for a in e.agent_actions}
    for p in new_props.values():
        if p in e.propositions:
            raise EnvironmentValidationError(f"proposition name clash on {p!r}")
    tags = (None,) + e.agent_actions
    name = {(s, t): _pair_state(s, NO_ACTION if t is None else t) for s in e.states for t in tags}
    states, valuation, observation, protocol = [], {}, {}, {}
    for (s, t), n in name.items():
        states.append(n)
        valuation[n] = e.valuation[s] | ({new_props[t]} if t is not None else frozenset())
        observation[n] = e.observation[s]
        protocol[n] = e.env_protocol[s]
    transitions = {}
    for (s, t), n in name.items():
        for ae in e.env_actions:
            for a in e.agent_actions:
                transitions[(n, ae, a)] = name[(e.transitions[(s, ae, a)], a)]
    return Environment(
        states=tuple(sorted(states)),
        initial=frozenset(name[(s, None)] for s in e.initial),
        env_actions=e.env_actions,
        agent_actions=e.agent_actions,
        propositions=tuple(sorted(set(e.propositions) | set(new_props.values()))),
        env_protocol=protocol,
        transitions=transitions,
        observation=observation,
        valuation=valuation,
    )


def base_state(name: str) -> str:
    """Original state underlying a transformed state name."""
    return name.split("|", 1)[0]
