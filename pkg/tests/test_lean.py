import random

import pytest

from tlsat.formula import (
    FC, GT, LE, NS, PAR, PS, and_, annotate_counting, ch_translate, count, dia,
    is_counting_free, nnf, nprop, or_, parse_formula, parse_trail, prop, top, universe_of,
)
from tlsat.lean import (
    Entailment, LeanError, build_lean, direction_choices, enumerate_phinodes, fl_closure,
    is_valid, local_entails, nav, nav_trail, node_type_of,
)
from tlsat.semantics import evaluate

from tests.strategies import random_formula, random_large_formula, random_tree

WORKED = "p1 & <fc> count(ns*; p2) > 1"


def _lean(text: str):
    f = nnf(ch_translate(parse_formula(text)))
    g, u = annotate_counting(f, universe_of(f))
    return build_lean(g, u), g


def test_worked_example_lean():
    lean, _ = _lean(WORKED)
    assert len(lean) == 10
    texts = [str(g) for g in lean.formulas]
    assert texts[:4] == [str(dia(m, top())) for m in (FC, NS, PAR, PS)]
    assert texts[6:] == ["p1", "p2", "c0", "p_other"]
    # the two navigation entries: the counted body below fc and below ns
    assert lean.formulas[4].mod is FC and lean.formulas[5].mod is NS
    assert lean.formulas[4].body is lean.formulas[5].body


def test_lean_of_a_proposition():
    lean, _ = _lean("p")
    assert len(lean) == 6


def test_phinodes_without_modal_formulas():
    lean, _ = _lean("p")
    nodes = list(enumerate_phinodes(lean))
    # 2 labels x 2 fc x 2 ns x 3 upward choices
    assert len(nodes) == 24
    assert all(is_valid(lean, n) for n in nodes)
    assert len(set(nodes)) == 24


def test_validity_rules():
    lean, _ = _lean("p")
    p, other = lean.label_bits
    assert not is_valid(lean, 0)
    assert not is_valid(lean, p | other)
    assert not is_valid(lean, p | lean.top_bit[PAR] | lean.top_bit[PS])
    assert is_valid(lean, p | lean.top_bit[PAR])


def test_modal_formula_requires_its_direction():
    lean, _ = _lean("<fc> q")
    fcq = lean.bit(dia(FC, prop("q")))
    q = lean.label_bits[0]
    assert not is_valid(lean, q | fcq)
    assert is_valid(lean, q | fcq | lean.top_bit[FC])
    assert len(direction_choices(lean, FC)) == 3


def test_nav_of_counting():
    t = parse_trail("fc, ns*")
    g = nav(count(t, prop("p"), GT, 1, "c0"))
    assert is_counting_free(g)
    assert g == nav_trail(t, and_(prop("p"), prop("c0")))
    h = nav(count(t, prop("p"), LE, 1, "c0"))
    both = or_(and_(prop("p"), prop("c0")), and_(nprop("p"), nprop("c0")))
    assert h == nav_trail(t, both)


def test_nav_trail_is_memoized():
    t = parse_trail("(fc|ns)*")
    assert nav_trail(t, prop("p")) is nav_trail(t, prop("p"))


def test_closure_contains_unfoldings():
    f = parse_formula("mu x. p | <fc> x")
    cl = fl_closure(f)
    assert f in cl
    assert any(g.kind == "dia" and g.mod is FC for g in cl)


@pytest.mark.parametrize("seed", range(40))
def test_local_entailment_matches_evaluation(seed):
    f = nnf(random_formula(seed, max_counts=0))
    u = universe_of(f)
    lean = build_lean(f, u)
    closure = [g for g in fl_closure(f) if is_counting_free(g)]
    ent = Entailment(lean)
    rng = random.Random(seed)
    for _ in range(3):
        labels = u.labels
        t = random_tree(rng, 6, labels)
        for n in t.nodes:
            bits = node_type_of(lean, t, n, evaluate)
            assert is_valid(lean, bits)
            for g in closure:
                assert ent(bits, g) == (n in evaluate(g, t)), str(g)


def test_local_entailment_unknown_proposition():
    lean, _ = _lean("p")
    with pytest.raises(LeanError):
        local_entails(lean, lean.label_bits[0], prop("zz"))


def test_lean_is_linear_in_formula_size():
    ratios = []
    for seed in range(60):
        f = nnf(ch_translate(random_large_formula(seed)))
        g, u = annotate_counting(f, universe_of(f))
        if 10 <= g.size <= 1000:
            ratios.append(len(build_lean(g, u)) / g.size)
    assert len(ratios) >= 50
    assert max(ratios) <= 4
