import dataclasses
import random
import re

import jsonschema
import pytest

from tlsat.formula import (
    FC, GT, LE, ac_key, and_, count, dia, nnf, parse_formula, parse_trail, prop, top,
)
from tlsat.semantics import decode_nary, encode_nary, enumerate_trees, evaluate
from tlsat.solver import SAT, UNSAT, solve
from tlsat.xpath import (
    AXES, Path, QCount, RAlt, RAtom, RSeq, RStar, Step, XPathError, desugar_position, encode_treetype,
    evaluate_translation, has_position, parse_treetype, parse_xpath, reference_select,
    reference_xpath_eval, translate, xpath_contains, xpath_disjoint, xpath_empty, xpath_equiv,
)

from tests.strategies import random_nary

# the tree root plays the document node; "company" is its top-level element
COMPANY = ("doc", (("company", (
    ("name", ()),
    ("personnel", (("employee", (("name", ()),)), ("employee", ()), ("intern", ()))),
)),))

EXPRESSIONS = [
    "child::a", "descendant::b[parent::a]", "child::*/following-sibling::b", "preceding::a",
    "following::b[not(child::a)]", "ancestor::a[count(child::b)>1]", "child::a[position()=2]",
    "(child::a | child::b)/child::c", "parent::*/child::b[count(descendant::c)>=2]",
    "child::a[count(preceding-sibling::*)=1]", "descendant::c[count(following-sibling::a)<=0]",
    "self::a[child::b and not(child::c)]", "ancestor::*/preceding-sibling::b",
    "descendant::a[count(child::*)>=2 or child::c]",
]

VERDICT_SCHEMA = {
    "type": "object",
    "required": ["result"],
    "properties": {
        "result": {"enum": [True, False, "RESOURCE_EXHAUSTED"]},
        "counterexample": {"type": "object", "required": ["nodes", "edges"]},
        "context": {"type": "integer"},
        "node": {"type": "integer"},
        "detail": {"type": "string"},
    },
}


# parsing ------------------------------------------------------------------


def test_absolute_path():
    e = parse_xpath("/company/personnel/employee")
    assert isinstance(e, Path) and e.absolute
    assert [(s.axis, s.test) for s in e.parts] == [
        ("child", "company"), ("child", "personnel"), ("child", "employee")]


def test_count_qualifier():
    e = parse_xpath("child::a[count(descendant::b[parent::c])>5]")
    (step,) = e.parts
    assert step.axis == "child" and step.test == "a"
    (q,) = step.quals
    assert isinstance(q, QCount) and q.cmp == ">" and q.k == 5


def test_comparators_shift():
    q = parse_xpath("child::a[count(child::b)>=2]").parts[0].quals[0]
    assert (q.cmp, q.k) == (">", 1)
    q = parse_xpath("child::a[count(child::b)<3]").parts[0].quals[0]
    assert (q.cmp, q.k) == ("<=", 2)


@pytest.mark.parametrize("text", [
    "a[count(b) = count(c)]", "child::a[count(child::b[count(child::c)>1])>1]",
    "sideways::a", "child::a[position()=last()]", "child::a[", "child::a]",
])
def test_rejected(text):
    with pytest.raises(XPathError):
        parse_xpath(text)


def test_abbreviations():
    rng = random.Random(5)
    pairs = [("a//b", "child::a/descendant::b"), ("//b", "/descendant::b"),
             ("a/../b", "child::a/parent::*/child::b"), ("a/.", "child::a/self::*")]
    for short, full in pairs:
        x, y = parse_xpath(short), parse_xpath(full)
        for _ in range(30):
            t = random_nary(rng, 7, labels=("a", "b"))
            assert reference_xpath_eval(x, t) == reference_xpath_eval(y, t)


def test_all_axes_listed():
    assert len(AXES) == 9
    for axis in AXES:
        parse_xpath(f"{axis}::*")


# reference interpreter ----------------------------------------------------


def test_self_is_identity():
    for seed in range(10):
        t = random_nary(random.Random(seed), 8)
        rel = reference_xpath_eval(parse_xpath("self::*"), t)
        n = encode_nary(t).size
        assert rel == {(i, i) for i in range(n)}


def test_employee_nodes():
    sel = reference_select(parse_xpath("/company/personnel/employee"), COMPANY)
    m = encode_nary(COMPANY)
    assert sel == {i for i in m.nodes if m.labels[i] == "employee"}
    assert len(sel) == 2


def test_count_qualifier_semantics():
    e = parse_xpath("/company[count(descendant::employee)<=300]/name")
    assert reference_select(e, COMPANY) == {2}
    e = parse_xpath("/company[count(descendant::employee)<=1]/name")
    assert reference_select(e, COMPANY) == frozenset()


def test_position_in_document_order():
    t = ("doc", (("r", (("a", ()), ("b", ()), ("a", ()), ("a", ()))),))
    assert reference_select(parse_xpath("/r/child::a[position()=2]"), t) == {4}
    assert reference_select(parse_xpath("/r/child::*[position()=2]"), t) == {3}


# position rewriting ---------------------------------------------------------


def test_position_shortcut():
    e = desugar_position(parse_xpath("child::a[position()=5]"))
    assert str(e) == str(parse_xpath("child::a[count(preceding-sibling::a)=4]"))


def test_position_one_is_except_later():
    e = desugar_position(parse_xpath("descendant::a[position()=1]"), shortcut=False)
    assert " except " in str(e)
    assert not has_position(e)


def test_without_position_unchanged():
    e = parse_xpath("child::a/descendant::b[child::c]")
    assert desugar_position(e) == e


@pytest.mark.parametrize("text", [
    "child::a[position()=2]", "descendant::b[position()=1]", "child::*[position()=3]",
    "following-sibling::a[position()=2]", "preceding-sibling::*[position()=1]",
    "descendant::a[child::b][position()=2]", "ancestor::*[position()=1]",
])
@pytest.mark.parametrize("shortcut", [True, False])
def test_position_rewriting_preserves_semantics(text, shortcut):
    e = parse_xpath(text)
    d = desugar_position(e, shortcut)
    assert not has_position(d)
    rng = random.Random(text)
    for _ in range(40):
        t = random_nary(rng, 8, labels=("a", "b"))
        assert reference_xpath_eval(e, t) == reference_xpath_eval(d, t)


# translation ----------------------------------------------------------------


def test_translation_child():
    tr = translate("child::a", top(), single=False)
    assert ac_key(nnf(tr.local)) == ac_key(nnf(parse_formula("a & mu x. <par>T | <ps>x")))


def test_translation_direct_count():
    tr = translate("child::a[count(descendant::b[parent::c])>5]", top(), single=False)
    want = parse_formula(
        "a & (mu x. <par>T | <ps>x) & <fc> count((fc|ns)*; b & mu y. <par>c | <ps>y) > 5")
    assert ac_key(nnf(tr.local)) == ac_key(nnf(want))
    assert not tr.marks and not tr.constraints


def test_translation_nominal_count():
    tr = translate("child::a/child::b[count(child::e/descendant::h)>3]", top(), single=False)
    (n,) = tr.marks
    assert n == "n0"
    want = parse_formula("b & (mu x. <par>(a & mu z. <par>T | <ps>z) | <ps>x) & n0")
    assert ac_key(nnf(tr.local)) == ac_key(nnf(want))
    (c,) = tr.constraints
    eta = parse_formula(
        "count((par|ps)*, (fc|ns)*; h & mu x. <par>(e & mu y. <par>n0 | <ps>y) | <par>x | <ps>x) > 3")
    assert ac_key(nnf(c)) == ac_key(nnf(eta))


@pytest.mark.parametrize("text", EXPRESSIONS)
def test_translation_matches_reference(text):
    e = parse_xpath(text)
    rng = random.Random(text)
    for context, single in ((top(), False), (None, None)):
        tr = translate(e, context, single) if context is not None else translate(e)
        for _ in range(12):
            t = random_nary(rng, 7)
            rel = reference_xpath_eval(e, t)
            m = encode_nary(t)
            if context is None:
                want = {y for (x, y) in rel if x == m.root}
            else:
                want = {y for (_, y) in rel}
            assert evaluate_translation(tr, m) == want, (text, t)


def _expr_size(e) -> int:
    if isinstance(e, (str, int)) or e is None:
        return 0
    if isinstance(e, tuple):
        return sum(_expr_size(x) for x in e)
    return 1 + sum(_expr_size(getattr(e, f.name)) for f in dataclasses.fields(e))


def test_translation_is_linear():
    ratios = []
    for text in EXPRESSIONS:
        e = parse_xpath(text)
        ratios.append(translate(e).formula.size / _expr_size(desugar_position(e)))
    bound = max(ratios)
    for n in (4, 16, 64):
        text = "/".join(["child::a[child::b]", "descendant::c", "following-sibling::*"] * n)
        e = parse_xpath(text)
        assert translate(e).formula.size <= bound * _expr_size(e)


def test_unsupported_negated_nominal_count():
    with pytest.raises(XPathError):
        translate("child::a[not(child::b[count(child::c/child::d)>1])]")


# decisions -----------------------------------------------------------------


CONTAINMENT = [
    ("child::a", "descendant::a", True),
    ("descendant::a", "child::a", False),
    ("child::a[count(child::b)>1]", "child::a[child::b]", True),
    ("child::a[child::b]", "child::a[count(child::b)>1]", False),
    ("child::a/child::b[count(child::e/descendant::h)>3]", "child::a/child::b", True),
    ("following-sibling::a", "following::a", True),
    ("following::a", "following-sibling::a", False),
    ("/descendant::a", "descendant::a", False),
    ("child::a", "/descendant::a", True),
    ("parent::*/child::a", "self::a | preceding-sibling::a | following-sibling::a", True),
    ("child::a", "child::a[count(child::b)<=0]", False),
    ("child::a[position()=1]", "child::a", True),
    ("child::*[self::a and self::b]", "child::c", True),
]


def _brute_contains(e1, e2, labels, max_nodes) -> bool:
    for m in enumerate_trees(labels, max_nodes):
        t = decode_nary(m)
        if not reference_xpath_eval(e1, t) <= reference_xpath_eval(e2, t):
            return False
    return True


@pytest.mark.parametrize("e1, e2, expected", CONTAINMENT)
def test_containment(e1, e2, expected):
    v = xpath_contains(e1, e2)
    assert v.holds is expected
    jsonschema.validate(v.to_json(), VERDICT_SCHEMA)
    x1, x2 = desugar_position(parse_xpath(e1)), desugar_position(parse_xpath(e2))
    if not expected:
        # the counterexample is a concrete witness
        t = decode_nary(v.counterexample)
        pairs = reference_xpath_eval(x1, t) - reference_xpath_eval(x2, t)
        assert (v.context, v.node) in pairs
    labels = sorted({s.test for s in _steps(x1) + _steps(x2)} - {"*"}) + ["z"]
    if len(labels) <= 3:
        assert _brute_contains(x1, x2, labels, 5) is expected


def _steps(e) -> list:
    out = []
    if isinstance(e, Step):
        out.append(e)
    if dataclasses.is_dataclass(e):
        for f in dataclasses.fields(e):
            out += _steps(getattr(e, f.name))
    elif isinstance(e, tuple):
        for x in e:
            out += _steps(x)
    return out


def test_reflexive():
    for text in EXPRESSIONS[:8]:
        assert xpath_contains(text, text).holds is True


def test_equivalence_by_position():
    v = xpath_equiv("child::a[position()=5]", "child::a[count(preceding-sibling::a)=4]")
    assert v.holds is True


def test_disjoint():
    assert xpath_disjoint("child::a", "child::b").holds is True
    v = xpath_disjoint("child::a", "descendant::a")
    assert v.holds is False and v.counterexample is not None


def test_empty():
    assert xpath_empty("child::a[not(child::b) and child::b]").holds is True
    assert xpath_empty("child::a/parent::b/child::c").holds is False


def test_nested_anchor_schema():
    banned = parse_treetype("html[(p|a)*]; a[(b|span)*]; p[(a|b)*]")
    assert xpath_empty("child::a/descendant::a", banned).holds is True
    allowed = parse_treetype("html[(p|a)*]; a[(a|b)*]; p[(a|b)*]")
    v = xpath_empty("child::a/descendant::a", allowed)
    assert v.holds is False


# tree types -----------------------------------------------------------------


def test_encode_simple_type():
    phi = encode_treetype("a[b*]")
    want = parse_formula(
        "(a & (~<fc>T | <fc>(mu x. (b & ~<fc>T & ~<ns>T) | (b & ~<fc>T & <ns>x)))) & ~<ns>T")
    assert ac_key(nnf(phi)) == ac_key(nnf(want))


def _regex(r, code) -> str:
    if isinstance(r, RAtom):
        return code[r.name]
    if isinstance(r, RSeq):
        return f"(?:{_regex(r.left, code)}{_regex(r.right, code)})"
    if isinstance(r, RAlt):
        return f"(?:{_regex(r.left, code)}|{_regex(r.right, code)})"
    if isinstance(r, RStar):
        return f"(?:{_regex(r.body, code)})*"
    return ""


def _member(tt, t, code) -> bool:
    """Direct membership check: child words against each rule's regex."""
    label, kids = t
    rule = tt.rule(label)
    word = "".join(code[k[0]] for k in kids)
    if rule is None:
        return not kids
    if not re.fullmatch(_regex(rule.content, code), word):
        return False
    for lab, lo, hi in rule.bounds:
        n = sum(1 for k in kids if k[0] == lab)
        if n < lo or (hi is not None and n > hi):
            return False
    return all(_member(tt, k, code) for k in kids)


@pytest.mark.parametrize("text, size", [
    ("a[(b, c)*, d?]; b[c+]", 5), ("a[b*]", 4), ("a[(b|c)*, b] c{0,1}", 4),
    ("a[b?, (c, a)*]", 4), ("a[(b*, c)*]; b[a?]", 4), ("a[b, b*] b{2,3}", 5),
])
def test_type_models_are_members(text, size):
    tt = parse_treetype(text)
    phi = encode_treetype(tt)
    names = ["a", "b", "c", "d"]
    code = {n: chr(ord("A") + i) for i, n in enumerate(names)}
    for m in enumerate_trees(names, size):
        t = decode_nary(m)
        want = t[0] == tt.rules[0].label and _member(tt, t, code)
        assert (m.root in evaluate(phi, m)) == want, t


def test_cardinality_bounds():
    phi = encode_treetype("a[b*]")
    t = parse_trail("ns*")
    for hi, status in ((9, SAT), (3, UNSAT)):
        f = and_(phi, dia(FC, and_(count(t, prop("b"), GT, 3), count(t, prop("b"), LE, hi))))
        r = solve(f)
        assert r.status == status
        if r.status == SAT:
            assert 4 <= sum(1 for lab in r.model.labels if lab == "b") <= 9
            assert evaluate(f, r.model)


def test_bounds_in_type_syntax():
    r = solve(encode_treetype("a[b*] b{4,9}"))
    assert r.status == SAT
    kids = decode_nary(r.model)[1]
    assert 4 <= len(kids) <= 9
    assert solve(encode_treetype("a[b, b] b{3,5}")).status == UNSAT


def test_undefined_names_are_leaves():
    tt = parse_treetype("a[b*]")
    assert tt.rule("b") is None
