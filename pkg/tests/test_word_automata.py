import pytest

from ksynth.logic import closure_of, evaluate_lasso, parse_formula
from ksynth.word_automata import (Tableau, buchi_accepts_lasso, degeneralize, ltl_to_buchi,
                                  ltl_to_generalized_buchi)

from helpers import lassos


def test_one_until_needs_no_counter():
    a = ltl_to_generalized_buchi(parse_formula("F p"))
    assert len(a.accepting) == 1
    assert degeneralize(a) is a


def test_one_set_per_until():
    f = parse_formula("G F p & G F q")
    assert len(ltl_to_generalized_buchi(f).accepting) == Tableau(closure_of(f)).m == 4


def test_degeneralize_two_untils():
    f = parse_formula("G F p & G F q")
    g = ltl_to_generalized_buchi(f)
    d = degeneralize(g)
    assert len(d.states) == len(g.accepting) * len(g.states)
    for prefix, cycle in lassos(("p", "q"), 1, 2):
        assert buchi_accepts_lasso(d, prefix, cycle) == buchi_accepts_lasso(g, prefix, cycle)
        assert buchi_accepts_lasso(d, prefix, cycle) == evaluate_lasso(f, prefix, cycle)


@pytest.mark.parametrize("text", ["F (p & X !p)", "p U (q U p)", "G (p -> X (q U p))", "!(F G p)"])
def test_against_lasso_semantics(text):
    f = parse_formula(text)
    a = ltl_to_buchi(f)
    for prefix, cycle in lassos(("p", "q"), 2, 2):
        assert buchi_accepts_lasso(a, prefix, cycle) == evaluate_lasso(f, prefix, cycle)


def test_rejects_knowledge():
    with pytest.raises(ValueError):
        ltl_to_buchi(parse_formula("F K p"))


def test_empty_cycle_rejected():
    with pytest.raises(ValueError):
        buchi_accepts_lasso(ltl_to_buchi(parse_formula("p")), [{"p"}], [])


def test_tableau_until_obligations():
    c = closure_of(parse_formula("p U q"))
    tab = Tableau(c)
    u, p, q = tab.untils[0]
    pending = next(a for a in tab.atoms if (a >> u) & 1 and not (a >> q) & 1)
    mask, value = tab.req(pending)
    assert (mask >> u) & 1 and (value >> u) & 1
    assert not tab.fulfils(pending, 0)


def test_dot_output():
    dot = ltl_to_buchi(parse_formula("p U q")).to_dot()
    assert dot.startswith("digraph buchi") and "doublecircle" in dot
