import json
from itertools import product

import pytest

from ksynth.environment import (EnvironmentValidationError, apply_transition, base_state, did_prop,
                                load_environment, said_prop, say_formula, split_say_action,
                                transform_did, transform_say)
from ksynth.logic import parse_formula, render

from conftest import FIXTURES


def toggle_rule(t, u, v, a):
    # the switch flips when toggled, or times out when on and u is set
    t2 = 1 - t if a == "T" or (t == 1 and u == 1) else t
    return t2, int(t2 == 1 and v == 1)


def test_fixture_matches_rule(toggle):
    for s, ae, a in product(toggle.states, toggle.env_actions, toggle.agent_actions):
        t = int(s[1])
        u, v = int(ae[1]), int(ae[2])
        t2, l2 = toggle_rule(t, u, v, a)
        assert apply_transition(toggle, s, ae, a) == f"s{t2}{l2}"


@pytest.mark.parametrize("s,ae,a,t", [("s11", "e00", "T", "s00"), ("s10", "e01", "N", "s11"),
                                      ("s00", "e11", "N", "s00")])
def test_documented_transitions(toggle, s, ae, a, t):
    assert apply_transition(toggle, s, ae, a) == t


def test_observation_reveals_light(toggle):
    assert toggle.observations == ("0", "1")
    assert toggle.observation["s10"] == toggle.observation["s00"] == "0"


def test_apply_transition_rejects_unknown_names(toggle):
    with pytest.raises(EnvironmentValidationError):
        apply_transition(toggle, "s99", "e00", "T")
    with pytest.raises(EnvironmentValidationError):
        apply_transition(toggle, "s00", "e00", "Z")


def _doc():
    return json.loads((FIXTURES / "toggle.json").read_text())


@pytest.mark.parametrize("mutate,message", [
    (lambda d: d["states"][0].update(env_protocol=[]), "empty environment protocol at state 's00'"),
    (lambda d: d["transitions"]["s10"].pop("e01,N"), "missing transition for state 's10' and joint action 'e01,N'"),
    (lambda d: d.update(initial=[]), "empty initial set"),
    (lambda d: d["transitions"]["s00"].update({"e00,T": "s77"}), "undeclared state 's77'"),
])
def test_validation_errors(mutate, message):
    d = _doc()
    mutate(d)
    with pytest.raises(EnvironmentValidationError, match=message):
        load_environment(d)


def test_invalid_json():
    with pytest.raises(EnvironmentValidationError, match="invalid JSON"):
        load_environment("{")


def test_to_json_round_trip(toggle):
    assert load_environment(json.dumps(toggle.to_json())) == toggle


@pytest.mark.parametrize("phis,states,props", [(["K on"], 6, 1), (["K on", "K !on"], 12, 2), ([], 3, 0)])
def test_say_sizes(toggle, phis, states, props):
    e2 = transform_say(toggle, phis)
    assert len(e2.states) == states
    assert len(e2.propositions) == len(toggle.propositions) + props
    assert len(e2.agent_actions) == len(toggle.agent_actions) * 2 ** len(phis)


def test_say_rejects_non_knowledge(toggle):
    with pytest.raises(EnvironmentValidationError):
        transform_say(toggle, ["on"])


def test_say_runs_project_and_lift(toggle):
    k = parse_formula("K on")
    e2 = transform_say(toggle, [k])
    assert {base_state(s) for s in e2.initial} == toggle.initial
    assert all(not (e2.valuation[s] - set(toggle.propositions)) for s in e2.initial)
    for s2, ae, a2 in product(e2.states, e2.env_actions, e2.agent_actions):
        a, asserted = split_say_action(a2)
        t2 = e2.transitions[(s2, ae, a2)]
        assert base_state(t2) == toggle.transitions[(base_state(s2), ae, a)]
        assert (said_prop(k) in e2.valuation[t2]) == (asserted == ("K_on",))
        assert e2.observation[t2] == toggle.observation[base_state(t2)]


def test_did_sizes_and_invariant(toggle):
    e2 = transform_did(toggle)
    assert len(e2.states) == 9
    assert {did_prop("T"), did_prop("N")} <= set(e2.propositions)
    dids = {s: [p for p in e2.valuation[s] if p.startswith("did_1(")] for s in e2.states}
    assert all(dids[s] == [] for s in e2.initial)
    for s, ae, a in product(e2.states, e2.env_actions, e2.agent_actions):
        assert dids[e2.transitions[(s, ae, a)]] == [did_prop(a)]


def test_did_twice_clashes(toggle):
    with pytest.raises(EnvironmentValidationError, match="clash"):
        transform_did(transform_did(toggle))


def test_say_formula_shape():
    f = say_formula(["K on"])
    assert render(f) == "G ((K on -> X said_1(K_on)) & (X said_1(K_on) -> K on))"
