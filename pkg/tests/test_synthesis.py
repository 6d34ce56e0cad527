from itertools import product as tuples

import pytest

from ksynth.logic import parse_formula
from ksynth.protocol_runtime import check_acceptable, constant_protocol, induced_tree, verify_realizes
from ksynth.synthesis import (Realizable, SynthesisStats, Unrealizable, build_kcomp_automaton,
                              build_ksound_automaton, build_structural_automaton,
                              build_synthesis_automaton, decide, default_rank_bound,
                              extract_protocol, label_candidates, synthesize)
from ksynth.knowledge import SpecContext
from ksynth.tree_automata import BudgetExceeded, accepts_regular_tree

SPEC = parse_formula("G (K on | K !on)")


def test_restricted_toggle_is_realizable(toggle_restricted):
    r = synthesize(SPEC, toggle_restricted)
    assert isinstance(r, Realizable)
    assert verify_realizes(toggle_restricted, r.protocol, SPEC)
    assert check_acceptable(r.witness, SPEC, toggle_restricted).ok
    assert r.stats.attempts[0] == {"deterministic": True, "rank_bound": 2, "labels": 1}


def test_full_toggle_is_unrealizable(toggle_full):
    r = synthesize(SPEC, toggle_full)
    assert isinstance(r, Unrealizable)
    # the negative answer comes from the widest search
    assert r.stats.attempts[-1]["deterministic"] is False
    assert r.stats.attempts[-1]["rank_bound"] == r.stats.rank_bound
    assert r.stats.attempts[-1]["labels"] == "all"


def test_true_is_realizable_anywhere(toggle_full):
    assert synthesize(parse_formula("true"), toggle_full).realizable


def test_unknown_proposition(toggle):
    with pytest.raises(ValueError, match="unknown propositions: dark"):
        synthesize(parse_formula("G dark"), toggle)


def test_budget(toggle_full):
    with pytest.raises(BudgetExceeded):
        synthesize(SPEC, toggle_full, budget=3)


def test_components_accept_induced_tree(toggle_restricted):
    # always toggling realizes SPEC, so its tree passes every component
    t = induced_tree(toggle_restricted, constant_protocol(toggle_restricted, ["T"]), SPEC)
    for build in (build_structural_automaton, build_ksound_automaton, build_kcomp_automaton,
                  build_synthesis_automaton):
        assert accepts_regular_tree(build(SPEC, toggle_restricted), t), build.__name__


def test_components_reject_full_toggle_tree(toggle_full):
    t = induced_tree(toggle_full, constant_protocol(toggle_full, ["T"]), SPEC)
    assert not accepts_regular_tree(build_synthesis_automaton(SPEC, toggle_full), t)


def test_decide_statistics(toggle_restricted):
    ctx = SpecContext(SPEC, toggle_restricted)
    stats = SynthesisStats()
    tree = decide(ctx, 2, True, None, stats)
    assert tree is not None and stats.arena_states > 0
    assert default_rank_bound(ctx) > 2


def test_root_candidates_are_consistent(toggle_restricted):
    ctx = SpecContext(SPEC, toggle_restricted)
    labs = label_candidates(ctx, "root")
    assert labs == [ctx.dummy_label]
    for o in ctx.directions:
        for lab in label_candidates(ctx, ("d1", o)):
            assert lab.states <= toggle_restricted.initial
            assert ctx.knowledge_consistent(lab.knowledge)


def test_extract_protocol_matches_behaviour(toggle_restricted):
    p = constant_protocol(toggle_restricted, ["T"])
    q = extract_protocol(induced_tree(toggle_restricted, p, SPEC))
    for n in range(1, 5):
        for h in tuples(toggle_restricted.observations, repeat=n):
            assert q.prescribe(h) == p.prescribe(h)


def test_synthesis_automaton_matches_oracle():
    from helpers import distinct_protocols, random_instances

    for e, spec in random_instances(24):
        psi = parse_formula(spec)
        a = build_synthesis_automaton(psi, e)
        for p in distinct_protocols(e, 2):
            assert accepts_regular_tree(a, induced_tree(e, p, psi)) == verify_realizes(e, p, psi)


def test_determinism_constraint(toggle_restricted):
    from ksynth.environment import transform_did
    from ksynth.logic import And
    from ksynth.protocol_runtime import EpistemicSystem

    e = transform_did(toggle_restricted)
    det = parse_formula("A G !(E X did_1(T) & E X did_1(N))")
    r = synthesize(And(SPEC, det), e)
    assert r.realizable
    system = EpistemicSystem(e, r.protocol)
    assert all(len(r.protocol.actions[q]) == 1 for q, S in system.classes if S)


def test_single_node_generator(toggle):
    from ksynth.knowledge import TreeLabel
    from ksynth.tree_automata import RegularTree

    t = RegularTree(toggle.observations, "n", ("n",), {("n", o): "n" for o in toggle.observations},
                    {"n": TreeLabel(frozenset(), frozenset({"T"}))})
    p = extract_protocol(t)
    assert p.states == ("q0",) and p.actions["q0"] == {"T"}


@pytest.mark.parametrize("text", ["(E F light) U K on", "G (E X on & E X !on)", "F E G !light"])
def test_exists_under_temporal_operators(toggle_restricted, text):
    from helpers import distinct_protocols

    psi = parse_formula(text)
    a = build_synthesis_automaton(psi, toggle_restricted)
    verdicts = set()
    for p in distinct_protocols(toggle_restricted, 2):
        v = verify_realizes(toggle_restricted, p, psi)
        verdicts.add(v)
        assert accepts_regular_tree(a, induced_tree(toggle_restricted, p, psi)) == v
    assert True in verdicts
    r = synthesize(psi, toggle_restricted)
    assert r.realizable and verify_realizes(toggle_restricted, r.protocol, psi)
