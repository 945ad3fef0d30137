"""Core XPath with counting: parser, reference interpreter, translation into
the logic, containment, and regular tree types with cardinality bounds.

The translation returns, for an expression and a context formula, a formula
holding exactly at the nodes the expression selects from some context node.
Counting qualifiers take one of three routes:

* target: inside a containment check the selected node carries a nominal;
  a count filtering that node is ``count(global, F(p, target), cmp, k)``
  inline, which stays negatable.  Used for the last step of an exposed path
  unless the count is a single forward step (then the direct route is
  cheaper).
* direct: ``count(T, g, cmp, k)`` at the filtered node, where ``T`` is the
  trail of a single axis step.  Used when the formula is not placed under a
  fixpoint, or for the child axis, whose counting form the fixpoint rewrite
  removes anyway.
* nominal: the filtered node carries a fresh mark ``n`` and the count is a
  global constraint ``count(global, F(p, n), cmp, k)`` together with "exactly
  one ``n``".  The mark must occur only positively, so such translations may
  not be negated.

Union is exact for any context.  Intersection and difference are exact only
from a single context node (the root, or a nominal); elsewhere they are
rejected.
"""

from __future__ import annotations

import dataclasses
import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

from tlsat.formula import (
    AND, COUNT, FC, GLOBAL_TRAIL, GT, LE, NS, OR, PAR, PS, TAtom, TSeq,
    TStar, Formula, and_, bot, conj, count, dia, disj, fresh_var,
    is_counting_free, make_count, mu, ndia, negate, nominal, nprop, or_,
    parse_trail, prop, propositions, tatom, top, var,
)
from tlsat.lean import nav_trail
from tlsat.semantics import TreeModel, decode_nary, evaluate

NaryTree = tuple


class XPathError(ValueError):
    """Syntax error or construct outside the supported fragment."""

    def __init__(self, message: str, pos: int | None = None):
        super().__init__(message if pos is None else f"{message} at position {pos}")
        self.pos = pos


# ---------------------------------------------------------------------------
# AST

AXES = (
    "self", "child", "parent", "descendant", "ancestor",
    "following-sibling", "preceding-sibling", "following", "preceding",
)


@dataclass(frozen=True)
class Step:
    axis: str
    test: str               # label or "*"
    quals: tuple = ()

    def __str__(self) -> str:
        return f"{self.axis}::{self.test}" + "".join(f"[{q}]" for q in self.quals)


@dataclass(frozen=True)
class Group:
    expr: "XPath"
    quals: tuple = ()

    def __str__(self) -> str:
        return f"({self.expr})" + "".join(f"[{q}]" for q in self.quals)


@dataclass(frozen=True)
class Path:
    parts: tuple            # of Step | Group
    absolute: bool = False

    def __str__(self) -> str:
        body = "/".join(str(p) for p in self.parts)
        return "/" + body if self.absolute else body


@dataclass(frozen=True)
class Binary:
    op: str                 # union | intersect | except
    left: "XPath"
    right: "XPath"

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


XPath = Union[Path, Binary]


@dataclass(frozen=True)
class QPath:
    path: Path

    def __str__(self) -> str:
        return str(self.path)


@dataclass(frozen=True)
class QCount:
    path: Path
    cmp: str                # one of <= < > >= =
    k: int

    def __str__(self) -> str:
        return f"count({self.path}) {self.cmp} {self.k}"


@dataclass(frozen=True)
class QPosition:
    k: int

    def __str__(self) -> str:
        return f"position() = {self.k}"


@dataclass(frozen=True)
class QNot:
    q: "Qualifier"

    def __str__(self) -> str:
        return f"not({self.q})"


@dataclass(frozen=True)
class QBin:
    op: str                 # and | or
    left: "Qualifier"
    right: "Qualifier"

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class QNominal:
    name: str

    def __str__(self) -> str:
        return f"@{self.name}"


Qualifier = Union[QPath, QCount, QPosition, QNot, QBin, QNominal]


# ---------------------------------------------------------------------------
# Parser

_TOKEN = re.compile(
    r"\s*(?:(?P<op>::|//|<=|>=|≤|≥|!=|[/\[\]()|*<>=@,.])|(?P<int>\d+)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_\-]*(?<!-)))"
)


def _tokens(text: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise XPathError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("end", "", n))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokens(text)
        self.i = 0
        self.in_count = False

    def peek(self, ahead: int = 0) -> tuple[str, str, int]:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def take(self) -> tuple[str, str, int]:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, value: str) -> bool:
        k, v, _ = self.peek()
        return v == value and k in ("op", "name")

    def expect(self, value: str) -> None:
        k, v, pos = self.take()
        if v != value:
            raise XPathError(f"expected {value!r}, found {v or 'end of input'!r}", pos)

    # xpath := inter (('union'|'|') inter)*
    def xpath(self) -> XPath:
        e = self.inter()
        while self.at("union") or self.at("|"):
            self.take()
            e = Binary("union", e, self.inter())
        return e

    def inter(self) -> XPath:
        e = self.path()
        while self.at("intersect") or self.at("except"):
            op = self.take()[1]
            e = Binary(op, e, self.path())
        return e

    def path(self) -> Path:
        absolute = False
        parts: list = []
        if self.at("/"):
            self.take()
            absolute = True
            if not self._starts_step():
                return Path((), True)
        elif self.at("//"):
            self.take()
            absolute = True
            parts.append(Step("descendant", "*"))
            return self._rest(parts, absolute, descend=True)
        parts.append(self.step())
        return self._rest(parts, absolute)

    def _rest(self, parts: list, absolute: bool, descend: bool = False) -> Path:
        if descend:
            parts[-1] = Step("descendant", "*")
            parts.append(self.step())
            # "//x" is descendant-or-self::node()/child::x, i.e. descendant::x
            last = parts.pop()
            parts.pop()
            if isinstance(last, Step) and last.axis == "child":
                last = Step("descendant", last.test, last.quals)
            else:
                raise XPathError("'//' must be followed by an abbreviated child step")
            parts.append(last)
        while self.at("/") or self.at("//"):
            sep = self.take()[1]
            nxt = self.step()
            if sep == "//":
                if not (isinstance(nxt, Step) and nxt.axis == "child"):
                    raise XPathError("'//' must be followed by an abbreviated child step")
                nxt = Step("descendant", nxt.test, nxt.quals)
            parts.append(nxt)
        return Path(tuple(parts), absolute)

    def _starts_step(self) -> bool:
        k, v, _ = self.peek()
        return k == "name" or v in ("*", "(", ".")

    def step(self):
        k, v, pos = self.peek()
        if v == "(":
            self.take()
            e = self.xpath()
            self.expect(")")
            return Group(e, self.quals())
        if v == "." and self.peek(1)[1] == ".":
            self.take()
            self.take()
            return Step("parent", "*", self.quals())
        if v == ".":
            self.take()
            return Step("self", "*", self.quals())
        if k == "name" and self.peek(1)[1] == "::":
            axis = v
            if axis not in AXES:
                raise XPathError(f"axis {axis!r} is outside the supported list", pos)
            self.take()
            self.take()
            return Step(axis, self.nametest(), self.quals())
        if k == "name" or v == "*":
            return Step("child", self.nametest(), self.quals())
        raise XPathError(f"expected a step, found {v or 'end of input'!r}", pos)

    def nametest(self) -> str:
        k, v, pos = self.take()
        if v == "*" or k == "name":
            return v
        raise XPathError(f"expected a name test, found {v or 'end of input'!r}", pos)

    def quals(self) -> tuple:
        out = []
        while self.at("["):
            self.take()
            out.append(self.qor())
            self.expect("]")
        return tuple(out)

    def qor(self):
        q = self.qand()
        while self.at("or"):
            self.take()
            q = QBin("or", q, self.qand())
        return q

    def qand(self):
        q = self.qnot()
        while self.at("and"):
            self.take()
            q = QBin("and", q, self.qnot())
        return q

    def qnot(self):
        if self.at("not") and self.peek(1)[1] in ("(", "not"):
            self.take()
            return QNot(self.qnot())
        return self.qatom()

    def qatom(self):
        k, v, pos = self.peek()
        if v == "(":
            self.take()
            q = self.qor()
            self.expect(")")
            return q
        if v == "@":
            self.take()
            k2, name, p2 = self.take()
            if k2 != "name":
                raise XPathError("expected a nominal name after '@'", p2)
            return QNominal(name)
        if k == "name" and v == "count" and self.peek(1)[1] == "(":
            return self.qcount()
        if k == "name" and v == "position" and self.peek(1)[1] == "(":
            self.take()
            self.take()
            self.expect(")")
            _, cmp, p2 = self.take()
            if cmp != "=":
                raise XPathError("position() is only supported with '='", p2)
            k2, n, p3 = self.take()
            if k2 != "int":
                raise XPathError("position() must be compared with a constant", p3)
            if int(n) < 1:
                raise XPathError("positions start at 1", p3)
            return QPosition(int(n))
        return QPath(self.path())

    def qcount(self):
        _, _, pos = self.take()
        self.expect("(")
        if self.in_count:
            raise XPathError("nested count inside count", pos)
        self.in_count = True
        try:
            p = self.path()
        finally:
            self.in_count = False
        self.expect(")")
        _, cmp, p2 = self.take()
        cmp = {"≤": "<=", "≥": ">="}.get(cmp, cmp)
        if cmp not in ("<=", "<", ">", ">=", "="):
            raise XPathError("expected a comparator after count(...)", p2)
        k2, n, p3 = self.take()
        if k2 == "name" and n == "count":
            raise XPathError("comparing two counts is not supported", p3)
        if k2 != "int":
            raise XPathError("count(...) must be compared with a natural constant", p3)
        k = int(n)
        # only <= and > reach the logic; the k = 0 cases stay literal (constant truth)
        if cmp == ">=" and k > 0:
            cmp, k = ">", k - 1
        elif cmp == "<" and k > 0:
            cmp, k = "<=", k - 1
        return QCount(p, cmp, k)


def parse_xpath(text: str) -> XPath:
    p = _Parser(text)
    e = p.xpath()
    k, v, pos = p.peek()
    if k != "end":
        raise XPathError(f"unexpected {v!r}", pos)
    return e


# ---------------------------------------------------------------------------
# Reference interpreter over n-ary trees


class Document:
    """Index of an n-ary tree; node ids are preorder (document order)."""

    def __init__(self, t: NaryTree, marks: Mapping[int, Iterable[str]] | None = None):
        self.labels: list[str] = []
        self.parent: list[int | None] = []
        self.children: list[list[int]] = []

        def visit(node: NaryTree, par: int | None) -> int:
            i = len(self.labels)
            self.labels.append(node[0])
            self.parent.append(par)
            self.children.append([])
            for c in node[1]:
                self.children[i].append(visit(c, i))
            return i

        visit(t, None)
        self.n = len(self.labels)
        self.marks = {i: frozenset(v) for i, v in (marks or {}).items()}
        self.nodes = frozenset(range(self.n))
        self._axis: dict[str, list[frozenset[int]]] = {}

    def _siblings(self, x: int) -> list[int]:
        p = self.parent[x]
        return [x] if p is None else self.children[p]

    def _descendants(self, x: int) -> set[int]:
        out: set[int] = set()
        stack = list(self.children[x])
        while stack:
            y = stack.pop()
            out.add(y)
            stack.extend(self.children[y])
        return out

    def _ancestors(self, x: int) -> set[int]:
        out = set()
        p = self.parent[x]
        while p is not None:
            out.add(p)
            p = self.parent[p]
        return out

    def axis(self, name: str) -> list[frozenset[int]]:
        r = self._axis.get(name)
        if r is not None:
            return r
        out = []
        for x in range(self.n):
            if name == "self":
                s = {x}
            elif name == "child":
                s = set(self.children[x])
            elif name == "parent":
                s = set() if self.parent[x] is None else {self.parent[x]}
            elif name == "descendant":
                s = self._descendants(x)
            elif name == "ancestor":
                s = self._ancestors(x)
            elif name == "following-sibling":
                sib = self._siblings(x)
                s = set(sib[sib.index(x) + 1:])
            elif name == "preceding-sibling":
                sib = self._siblings(x)
                s = set(sib[: sib.index(x)])
            elif name == "following":
                s = {y for y in range(x + 1, self.n)} - self._descendants(x)
            elif name == "preceding":
                s = {y for y in range(x)} - self._ancestors(x)
            else:
                raise XPathError(f"unknown axis {name!r}")
            out.append(frozenset(s))
        self._axis[name] = out
        return out

    def holds(self, x: int, name: str) -> bool:
        return self.labels[x] == name or name in self.marks.get(x, ())


Relation = list  # image per node: list of frozenset[int]


def _rel_expr(e: XPath, d: Document) -> Relation:
    if isinstance(e, Binary):
        a, b = _rel_expr(e.left, d), _rel_expr(e.right, d)
        op = {"union": frozenset.union, "intersect": frozenset.intersection,
              "except": frozenset.difference}[e.op]
        return [op(a[x], b[x]) for x in range(d.n)]
    return _rel_path(e, d)


def _rel_path(p: Path, d: Document) -> Relation:
    if p.absolute:
        rel: Relation = [frozenset({0})] * d.n
    else:
        rel = [frozenset({x}) for x in range(d.n)]
    for part in p.parts:
        step = _rel_part(part, d)
        rel = [frozenset().union(*(step[y] for y in rel[x])) for x in range(d.n)]
    return rel


def _filter(rel: Relation, quals: Sequence, d: Document) -> Relation:
    for q in quals:
        if isinstance(q, QPosition):
            rel = [frozenset(sorted(s)[q.k - 1: q.k]) for s in rel]
        else:
            ok = _qual(q, d)
            rel = [s & ok for s in rel]
    return rel


def _rel_part(part, d: Document) -> Relation:
    if isinstance(part, Group):
        return _filter(_rel_expr(part.expr, d), part.quals, d)
    ax = d.axis(part.axis)
    if part.test == "*":
        rel = list(ax)
    else:
        rel = [frozenset(y for y in s if d.holds(y, part.test)) for s in ax]
    return _filter(rel, part.quals, d)


_COMPARE = {
    "<=": lambda a, k: a <= k, "<": lambda a, k: a < k, ">": lambda a, k: a > k,
    ">=": lambda a, k: a >= k, "=": lambda a, k: a == k,
}


def _qual(q, d: Document) -> frozenset[int]:
    if isinstance(q, QPath):
        rel = _rel_path(q.path, d)
        return frozenset(x for x in range(d.n) if rel[x])
    if isinstance(q, QCount):
        rel = _rel_path(q.path, d)
        return frozenset(x for x in range(d.n) if _COMPARE[q.cmp](len(rel[x]), q.k))
    if isinstance(q, QNot):
        return d.nodes - _qual(q.q, d)
    if isinstance(q, QBin):
        a, b = _qual(q.left, d), _qual(q.right, d)
        return a & b if q.op == "and" else a | b
    if isinstance(q, QNominal):
        return frozenset(x for x in range(d.n) if q.name in d.marks.get(x, ()))
    raise XPathError("position() is only meaningful directly on a step")


def reference_xpath_eval(e: XPath, t: NaryTree, marks: Mapping[int, Iterable[str]] | None = None
                         ) -> frozenset[tuple[int, int]]:
    """Pairs (context, selected) over preorder node ids.  ``position()`` is
    the rank in document order among the nodes a step selects from one
    context node."""
    d = Document(t, marks)
    rel = _rel_expr(e, d)
    return frozenset((x, y) for x in range(d.n) for y in rel[x])


def reference_select(e: XPath, t: NaryTree, marks=None) -> frozenset[int]:
    """Nodes selected from the root."""
    d = Document(t, marks)
    return _rel_expr(e, d)[0]


# ---------------------------------------------------------------------------
# Positional predicates


def _star(axis: str) -> Step:
    return Step(axis, "*")


def _p(*parts, absolute: bool = False) -> Path:
    return Path(tuple(parts), absolute)


def _union(*es: XPath) -> XPath:
    e = es[0]
    for x in es[1:]:
        e = Binary("union", e, x)
    return e


# document order successor: descendant, or a-or-s / following-sibling / d-or-s
_ANC_OR_SELF = Group(_union(_p(_star("ancestor")), _p(_star("self"))))
_DESC_OR_SELF = Group(_union(_p(_star("descendant")), _p(_star("self"))))
AFTER = Group(_union(_p(_star("descendant")),
                     _p(_ANC_OR_SELF, _star("following-sibling"), _DESC_OR_SELF)))


def _compose(a, b) -> Path:
    pa = a.parts if isinstance(a, Path) else (a,)
    return Path(tuple(pa) + (b,), isinstance(a, Path) and a.absolute)


_SIBLING_AXES = ("child", "following-sibling", "preceding-sibling", "self", "parent")


def _order_after(p) -> object:
    """Steps from a node to the nodes after it in document order.  Nodes
    selected by one sibling-axis step are siblings, so their order is the
    following-sibling order."""
    if isinstance(p, Step) and p.axis in _SIBLING_AXES:
        return _star("following-sibling")
    return AFTER


def position_general(p, k: int, after=None):
    """``p[position()=k]`` by difference and intersection with the
    document-order relation."""
    after = _order_after(p) if after is None else after
    g = p if isinstance(p, Group) else Group(Path((p,)))
    if k == 1:
        return Group(Binary("except", Path((g,)), _compose(g, after)))
    prev = position_general(p, k - 1, after)
    inter = Group(Binary("intersect", Path((g,)), _compose(prev, after)))
    return position_general(inter, 1, after)


def desugar_position(e, shortcut: bool = True):
    """Remove ``position()`` qualifiers.  With ``shortcut`` a child step
    ``child::t[q...][position()=k]`` becomes
    ``child::t[q...][count(preceding-sibling::t[q...]) = k-1]``; other cases
    use the general rewriting."""
    if isinstance(e, Binary):
        return Binary(e.op, desugar_position(e.left, shortcut), desugar_position(e.right, shortcut))
    if isinstance(e, Path):
        return Path(tuple(_desugar_part(x, shortcut) for x in e.parts), e.absolute)
    raise TypeError(e)


def _desugar_quals(qs, shortcut: bool):
    out = []
    for q in qs:
        out.append(_desugar_q(q, shortcut))
    return tuple(out)


def _desugar_q(q, shortcut: bool):
    if isinstance(q, QPath):
        return QPath(desugar_position(q.path, shortcut))
    if isinstance(q, QCount):
        return QCount(desugar_position(q.path, shortcut), q.cmp, q.k)
    if isinstance(q, QNot):
        return QNot(_desugar_q(q.q, shortcut))
    if isinstance(q, QBin):
        return QBin(q.op, _desugar_q(q.left, shortcut), _desugar_q(q.right, shortcut))
    return q


def _desugar_part(part, shortcut: bool):
    if isinstance(part, Group):
        base = Group(desugar_position(part.expr, shortcut))
        quals = part.quals
    else:
        base = Step(part.axis, part.test)
        quals = part.quals
    cur = base
    for q in quals:
        if isinstance(q, QPosition):
            if shortcut and isinstance(cur, Step) and cur.axis == "child":
                sib = Step("preceding-sibling", cur.test, cur.quals)
                cur = Step(cur.axis, cur.test, cur.quals + (QCount(_p(sib), "=", q.k - 1),))
            else:
                cur = position_general(cur, q.k)
        else:
            q = _desugar_q(q, shortcut)
            if isinstance(cur, Step):
                cur = Step(cur.axis, cur.test, cur.quals + (q,))
            else:
                cur = Group(cur.expr, cur.quals + (q,))
    return cur


def has_position(e) -> bool:
    found = False

    def q_walk(q):
        nonlocal found
        if isinstance(q, QPosition):
            found = True
        elif isinstance(q, (QPath, QCount)):
            walk(q.path)
        elif isinstance(q, QNot):
            q_walk(q.q)
        elif isinstance(q, QBin):
            q_walk(q.left)
            q_walk(q.right)

    def walk(x):
        if isinstance(x, Binary):
            walk(x.left)
            walk(x.right)
        elif isinstance(x, Path):
            for part in x.parts:
                if isinstance(part, Group):
                    walk(part.expr)
                for q in part.quals:
                    q_walk(q)

    walk(e)
    return found


# ---------------------------------------------------------------------------
# Translation

ROOT = and_(ndia(PAR), ndia(PS))

# forward trail of each axis with an exact trail
AXIS_TRAILS = {
    "child": parse_trail("fc, ns*"),
    "parent": parse_trail("ps*, par"),
    "descendant": parse_trail("fc, (fc|ns)*"),
    "ancestor": parse_trail("(par|ps)*, par"),
    "following-sibling": parse_trail("ns, ns*"),
    "preceding-sibling": parse_trail("ps, ps*"),
}
_DOS = parse_trail("(fc|ns)*")
_AOS = parse_trail("(par|ps)*")
_UP = TStar(tatom(PAR, PS))


def _and(a: Formula, b: Formula) -> Formula:
    if a == top():
        return b
    if b == top():
        return a
    return and_(a, b)


def _or_self(f: Formula, axis: str) -> Formula:
    return or_(f, nav_trail(AXIS_TRAILS[axis], f))


def forward(axis: str, f: Formula) -> Formula:
    """Holds at ``x`` when some ``y`` with ``x axis y`` satisfies ``f``."""
    if axis == "self":
        return f
    if axis in AXIS_TRAILS:
        return nav_trail(AXIS_TRAILS[axis], f)
    if axis == "following":
        return _or_self(forward("following-sibling", _or_self(f, "descendant")), "ancestor")
    if axis == "preceding":
        return _or_self(forward("preceding-sibling", _or_self(f, "descendant")), "ancestor")
    raise XPathError(f"unknown axis {axis!r}")


_INVERSE = {
    "self": "self", "child": "parent", "parent": "child", "descendant": "ancestor",
    "ancestor": "descendant", "following-sibling": "preceding-sibling",
    "preceding-sibling": "following-sibling", "following": "preceding", "preceding": "following",
}


def backward(axis: str, f: Formula) -> Formula:
    """Holds at ``y`` when some ``x`` with ``x axis y`` satisfies ``f``."""
    return forward(_INVERSE[axis], f)


@dataclass
class Translation:
    """Formula for the selected nodes plus global side constraints."""

    local: Formula
    marks: tuple[str, ...] = ()              # internal nominals, each placed once
    constraints: tuple[Formula, ...] = ()    # counts over the global trail
    target: str | None = None                # nominal the selected node must carry
    formula: Formula = field(init=False)

    def __post_init__(self) -> None:
        self.formula = conj(self.local, *(nominal(m) for m in self.marks), *self.constraints)

    @property
    def negatable(self) -> bool:
        return not self.marks


_BACKWARD_AXES = ("parent", "ancestor", "preceding-sibling")


class _Translator:
    def __init__(self, reserved: Iterable[str], target: str | None = None):
        self.reserved = set(reserved)
        self.target = target
        self.marks: list[str] = []
        self.constraints: list[Formula] = []
        self.disjunctive = 0      # depth of union / disjunction around the current point

    def fresh_mark(self) -> str:
        i = len(self.marks)
        while f"n{i}" in self.reserved:
            i += 1
        name = f"n{i}"
        self.reserved.add(name)
        self.marks.append(name)
        return name

    # selected nodes -------------------------------------------------------

    def expr(self, e: XPath, ctx: Formula, single: bool, exposed: bool) -> Formula:
        if isinstance(e, Binary):
            if e.op == "union":
                self.disjunctive += 1
                try:
                    return or_(self.expr(e.left, ctx, single, exposed),
                               self.expr(e.right, ctx, single, exposed))
                finally:
                    self.disjunctive -= 1
            if not single:
                raise XPathError(f"unsupported construct: '{e.op}' needs a single context node")
            a = self.expr(e.left, ctx, single, exposed)
            before = len(self.marks)
            b = self.expr(e.right, ctx, single, exposed)
            if e.op == "intersect":
                return and_(a, b)
            if len(self.marks) != before:
                raise XPathError("unsupported construct: counting through a nominal on the right of 'except'")
            return and_(a, negate(b))
        return self.path(e, ctx, single, exposed)

    def path(self, p: Path, ctx: Formula, single: bool, exposed: bool) -> Formula:
        if p.absolute:
            ctx = ROOT if ctx in (ROOT, top()) else and_(ROOT, nav_trail(_DOS, ctx))
            single = True
        n = len(p.parts)
        for i, part in enumerate(p.parts):
            last = i == n - 1
            ctx, single = self.part(part, ctx, single, exposed and last)
        return ctx

    def part(self, part, ctx: Formula, single: bool, exposed: bool) -> tuple[Formula, bool]:
        if isinstance(part, Group):
            f = self.expr(part.expr, ctx, single, exposed)
            single_out = False
        else:
            reach = backward(part.axis, ctx)
            f = reach if part.test == "*" else _and(prop(part.test), reach)
            single_out = single and part.axis in ("self", "parent")
        for q in part.quals:
            f = _and(f, self.qual(q, True, exposed))
        return f, single_out

    # qualifiers -----------------------------------------------------------

    def qual(self, q, positive: bool, exposed: bool) -> Formula:
        if isinstance(q, QNot):
            return self.qual(q.q, not positive, exposed)
        if isinstance(q, QBin):
            conj_ = (q.op == "and") == positive
            self.disjunctive += not conj_
            try:
                a = self.qual(q.left, positive, exposed)
                b = self.qual(q.right, positive, exposed)
            finally:
                self.disjunctive -= not conj_
            return and_(a, b) if conj_ else or_(a, b)
        if isinstance(q, QNominal):
            return prop(q.name) if positive else nprop(q.name)
        if isinstance(q, QPath):
            before = len(self.marks)
            f = self.qpath(q.path)
            if positive:
                return f
            if len(self.marks) != before:
                raise XPathError("unsupported construct: counting through a nominal under negation")
            return negate(f)
        if isinstance(q, QCount):
            return self.qcount(q, positive, exposed)
        if isinstance(q, QPosition):
            raise XPathError("position() must be desugared before translation")
        raise TypeError(q)

    def qpath(self, p: Path, rest: Formula | None = None) -> Formula:
        """Holds where the path selects at least one node."""
        f = top() if rest is None else rest
        for part in reversed(p.parts):
            f = self.qpart(part, f)
        if p.absolute:
            f = nav_trail(_UP, and_(ROOT, f))
        return f

    def qpart(self, part, rest: Formula) -> Formula:
        if isinstance(part, Group):
            raise XPathError("unsupported construct: parenthesised path inside a qualifier")
        g = rest if part.test == "*" else _and(prop(part.test), rest)
        for q in part.quals:
            g = _and(g, self.qual(q, True, False))
        return forward(part.axis, g)

    def qcount(self, q: QCount, positive: bool, exposed: bool) -> Formula:
        p = q.path
        single_step = (not p.absolute and len(p.parts) == 1 and isinstance(p.parts[0], Step)
                       and p.parts[0].axis in AXIS_TRAILS)
        if exposed and self.target is not None and not (
                single_step and p.parts[0].axis not in _BACKWARD_AXES):
            # the filtered node is the single target node: count the nodes the
            # path reaches from it, which look forward to the target
            eta = _Translator(self.reserved).expr(p, prop(self.target), True, False)
            c = make_count(GLOBAL_TRAIL, eta, q.cmp, q.k)
            return c if positive else negate(c)
        if single_step and (exposed or p.parts[0].axis == "child"):
            f = self.direct_count(p.parts[0], q.cmp, q.k)
            return f if positive else negate(f)
        if self.disjunctive:
            # the hoisted constraint would bind every alternative
            raise XPathError("unsupported construct: counting through a nominal inside a disjunction")
        mark = self.fresh_mark()
        eta = _Translator(self.reserved).expr(p, prop(mark), True, False)
        c = make_count(GLOBAL_TRAIL, eta, q.cmp, q.k)
        self.constraints.append(c if positive else negate(c))
        return prop(mark)

    def direct_count(self, s: Step, cmp: str, k: int) -> Formula:
        body = top() if s.test == "*" else prop(s.test)
        for q in s.quals:
            body = _and(body, self.qual(q, True, False))
        if not is_counting_free(body):
            raise XPathError("nested count inside count")
        t = AXIS_TRAILS[s.axis]
        if isinstance(t, TSeq) and isinstance(t.left, TAtom):
            # along "m, rest" a node reaches what its m-neighbour reaches along "rest"
            return _split_lead(t.left.mod, make_count(t.right, body, cmp, k))
        return make_count(t, body, cmp, k)


def _split_lead(m, inner: Formula) -> Formula:
    """``count(m, rest; ...)`` as a formula about the ``m``-neighbour."""
    if inner.kind == COUNT:
        return dia(m, inner) if inner.cmp == GT else or_(ndia(m), dia(m, inner))
    if inner.kind == AND:
        return and_(_split_lead(m, inner.left), _split_lead(m, inner.right))
    if inner.kind == OR:
        return or_(_split_lead(m, inner.left), _split_lead(m, inner.right))
    # constants from comparator sugar: "< 0" is false, ">= 0" is true
    return inner


def expression_names(e) -> set[str]:
    names: set[str] = set()

    def q_walk(q):
        if isinstance(q, (QPath, QCount)):
            walk(q.path)
        elif isinstance(q, QNot):
            q_walk(q.q)
        elif isinstance(q, QBin):
            q_walk(q.left)
            q_walk(q.right)
        elif isinstance(q, QNominal):
            names.add(q.name)

    def walk(x):
        if isinstance(x, Binary):
            walk(x.left)
            walk(x.right)
        elif isinstance(x, Path):
            for part in x.parts:
                if isinstance(part, Group):
                    walk(part.expr)
                elif part.test != "*":
                    names.add(part.test)
                for q in part.quals:
                    q_walk(q)

    walk(e)
    return names


def nominal_names(e) -> set[str]:
    out: set[str] = set()

    def q_walk(q):
        if isinstance(q, QNominal):
            out.add(q.name)
        elif isinstance(q, (QPath, QCount)):
            walk(q.path)
        elif isinstance(q, QNot):
            q_walk(q.q)
        elif isinstance(q, QBin):
            q_walk(q.left)
            q_walk(q.right)

    def walk(x):
        if isinstance(x, Binary):
            walk(x.left)
            walk(x.right)
        elif isinstance(x, Path):
            for part in x.parts:
                if isinstance(part, Group):
                    walk(part.expr)
                for q in part.quals:
                    q_walk(q)

    walk(e)
    return out


def translate(e: XPath | str, context: Formula = ROOT, single: bool | None = None,
              reserved: Iterable[str] = (), shortcut: bool = True,
              target: str | None = None) -> Translation:
    """Translate ``e`` evaluated from nodes satisfying ``context``.

    ``single`` states that at most one node satisfies ``context``; it
    defaults to true for the root context and for a proposition context
    (taken to be a nominal).  With ``target``, the selected node is assumed
    to carry that nominal, and counts filtering it refer to it directly.
    """
    if isinstance(e, str):
        e = parse_xpath(e)
    if has_position(e):
        e = desugar_position(e, shortcut)
    if single is None:
        single = context == ROOT or context.kind == "prop"
    reserved = set(reserved) | expression_names(e) | set(propositions(context))
    if target is not None:
        reserved.add(target)
    tr = _Translator(reserved, target)
    f = tr.expr(e, context, single, True)
    return Translation(f, tuple(tr.marks), tuple(tr.constraints), target)


def evaluate_translation(tr: Translation, model: TreeModel) -> frozenset[int]:
    """Nodes where the translation holds for some placement of its internal
    nominals (one node each), the target nominal being on the node itself."""
    if tr.target is not None:
        out = set()
        for y in range(model.size):
            t = Translation(tr.local, tr.marks, tr.constraints)
            if y in evaluate_translation(t, model.with_marks({y: {tr.target}})):
                out.add(y)
        return frozenset(out)
    if not tr.marks:
        return evaluate(tr.formula, model)
    out: set[int] = set()
    for placement in itertools.product(range(model.size), repeat=len(tr.marks)):
        extra: dict[int, set[str]] = {}
        for m, n in zip(tr.marks, placement):
            extra.setdefault(n, set()).add(m)
        out |= evaluate(tr.formula, model.with_marks(extra))
    return frozenset(out)


# ---------------------------------------------------------------------------
# Regular tree types with cardinality bounds


@dataclass(frozen=True)
class RAtom:
    name: str


@dataclass(frozen=True)
class RSeq:
    left: object
    right: object


@dataclass(frozen=True)
class RAlt:
    left: object
    right: object


@dataclass(frozen=True)
class RStar:
    body: object


@dataclass(frozen=True)
class REmpty:
    pass


@dataclass(frozen=True)
class Rule:
    label: str
    content: object                            # regex over names
    bounds: tuple[tuple[str, int, int | None], ...] = ()   # (child label, min, max)


@dataclass(frozen=True)
class TreeType:
    rules: tuple[Rule, ...]                    # the first rule is the root

    def rule(self, name: str) -> Rule | None:
        for r in self.rules:
            if r.label == name:
                return r
        return None


_TT_TOKEN = re.compile(r"\s*(?:(?P<op>[\[\](){},;|*+?])|(?P<int>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_\-]*))")


def parse_treetype(text: str) -> TreeType:
    """``a[b*] b{4,9}; b[c?]`` -- rules separated by ``;`` (first is the
    root), each ``label[regex]`` followed by optional ``child{min,max}``
    bounds on the number of children with that label.  Names without a rule
    are leaves."""
    toks: list[tuple[str, str, int]] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TT_TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise XPathError(f"unexpected character {text[pos]!r} in tree type", pos)
        toks.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
        pos = m.end()
    toks.append(("end", "", len(text)))
    i = 0

    def peek():
        return toks[i]

    def take():
        nonlocal i
        t = toks[i]
        i += 1
        return t

    def expect(v):
        t = take()
        if t[1] != v:
            raise XPathError(f"expected {v!r} in tree type, found {t[1] or 'end of input'!r}", t[2])

    def regex():
        r = seq()
        while peek()[1] == "|":
            take()
            r = RAlt(r, seq())
        return r

    def seq():
        if peek()[1] in ("]", ")", "|"):
            return REmpty()
        r = post()
        while peek()[1] == ",":
            take()
            r = RSeq(r, post())
        return r

    def post():
        r = atom()
        while peek()[1] in ("*", "+", "?"):
            op = take()[1]
            r = RStar(r) if op == "*" else RSeq(r, RStar(r)) if op == "+" else RAlt(r, REmpty())
        return r

    def atom():
        k, v, p = take()
        if v == "(":
            r = regex()
            expect(")")
            return r
        if k == "name":
            return RAtom(v)
        raise XPathError(f"expected a name in tree type, found {v or 'end of input'!r}", p)

    rules = []
    while True:
        k, v, p = take()
        if k != "name":
            raise XPathError("expected a rule label", p)
        label = v
        expect("[")
        content = regex()
        expect("]")
        bounds = []
        while peek()[0] == "name" and toks[i + 1][1] == "{":
            name = take()[1]
            take()
            k1, lo, p1 = take()
            if k1 != "int":
                raise XPathError("expected a minimum", p1)
            expect(",")
            hi = None
            if peek()[0] == "int":
                hi = int(take()[1])
            expect("}")
            if hi is not None and hi < int(lo):
                raise XPathError("maximum below minimum", p1)
            bounds.append((name, int(lo), hi))
        rules.append(Rule(label, content, tuple(bounds)))
        if peek()[1] == ";":
            take()
            continue
        if peek()[0] != "end":
            raise XPathError(f"unexpected {peek()[1]!r} in tree type", peek()[2])
        break
    names = [r.label for r in rules]
    if len(set(names)) != len(names):
        raise XPathError("a label has two rules")
    return TreeType(tuple(rules))


def _nullable(r) -> bool:
    if isinstance(r, (REmpty, RStar)):
        return True
    if isinstance(r, RAtom):
        return False
    if isinstance(r, RSeq):
        return _nullable(r.left) and _nullable(r.right)
    return _nullable(r.left) or _nullable(r.right)


def _bound_formula(label: str, lo: int, hi: int | None) -> Formula:
    """Bounds on the children labelled ``label``, stated at the parent."""
    t = parse_trail("ns*")
    g = prop(label)
    parts = []
    if lo > 0:
        parts.append(count(t, g, GT, lo - 1))
    if hi is not None:
        parts.append(count(t, g, LE, hi))
    if not parts:
        return top()
    inner = conj(*parts)
    return dia(FC, inner) if lo > 0 else or_(ndia(FC), dia(FC, inner))


class _TypeEncoder:
    def __init__(self, tt: TreeType):
        self.tt = tt
        self.active: dict[str, str] = {}      # rule label -> bound variable while encoding
        self.recursive: set[str] = set()

    def node(self, name: str, with_bounds: bool = True) -> Formula:
        """Formula for a node of type ``name`` (label, children, bounds)."""
        if name in self.active:
            self.recursive.add(name)
            return var(self.active[name])
        r = self.tt.rule(name)
        if r is None:
            return and_(prop(name), ndia(FC))
        x = fresh_var("t")
        self.active[name] = x
        try:
            body = and_(prop(name), self.content(r.content))
            if with_bounds:
                for lab, lo, hi in r.bounds:
                    body = and_(body, _bound_formula(lab, lo, hi))
        finally:
            del self.active[name]
        if name in self.recursive:
            self.recursive.discard(name)
            return mu(x, body)
        return body

    def content(self, r) -> Formula:
        if isinstance(r, REmpty):
            return ndia(FC)
        chain = self.seq(r, None, True)
        return or_(ndia(FC), dia(FC, chain)) if _nullable(r) else dia(FC, chain)

    def seq(self, r, nxt: Formula | None, can_end: bool) -> Formula:
        """Holds at a node starting a non-empty match of ``r`` followed by a
        suffix whose first node satisfies ``nxt`` (or no suffix when
        ``can_end``)."""
        if isinstance(r, REmpty):
            return bot()
        if isinstance(r, RAtom):
            t = self.node(r.name)
            opts = []
            if can_end:
                opts.append(and_(t, ndia(NS)))
            if nxt is not None:
                opts.append(and_(t, dia(NS, nxt)))
            return disj(*opts) if opts else bot()
        if isinstance(r, RAlt):
            a, b = self.seq(r.left, nxt, can_end), self.seq(r.right, nxt, can_end)
            return b if a == bot() else a if b == bot() else or_(a, b)
        if isinstance(r, RSeq):
            right = self.seq(r.right, nxt, can_end)
            if _nullable(r.right):
                nxt2 = right if nxt is None else or_(right, nxt)
                end2 = can_end
            else:
                nxt2, end2 = right, False
            left = self.seq(r.left, nxt2, end2)
            if not _nullable(r.left):
                return left
            # an empty match of the left part: the match starts in the right part
            return right if left == bot() else left if right == bot() else or_(left, right)
        if isinstance(r, RStar):
            x = fresh_var("x")
            again = var(x) if nxt is None else or_(var(x), nxt)
            return mu(x, self.seq(r.body, again, can_end))
        raise TypeError(r)


def encode_treetype(tt: TreeType | str) -> Formula:
    """Formula holding at the root of exactly the trees of the type."""
    if isinstance(tt, str):
        tt = parse_treetype(tt)
    enc = _TypeEncoder(tt)
    root = tt.rules[0]
    f = and_(enc.node(root.label, with_bounds=False), ndia(NS))
    for lab, lo, hi in root.bounds:
        f = and_(f, _bound_formula(lab, lo, hi))
    return f


def schema_constraint(tt: TreeType | str) -> Formula:
    """From any node: the root of the tree satisfies the type."""
    return nav_trail(_UP, and_(ROOT, encode_treetype(tt)))


# ---------------------------------------------------------------------------
# Decisions


@dataclass
class Verdict:
    holds: bool | None          # None when the solver ran out of resources
    counterexample: TreeModel | None = None
    context: int | None = None
    node: int | None = None
    detail: str | None = None
    rounds: int = 0

    def to_json(self) -> dict:
        out: dict = {"result": self.holds if self.holds is not None else "RESOURCE_EXHAUSTED"}
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample.to_json()
            out["context"] = self.context
            out["node"] = self.node
        if self.detail:
            out["detail"] = self.detail
        return out


def _prepare(e) -> XPath:
    return parse_xpath(e) if isinstance(e, str) else e


def _fresh_name(base: str, reserved: set[str]) -> str:
    i = 0
    while f"{base}{i}" in reserved:
        i += 1
    return f"{base}{i}"


def _run(f: Formula, marks: Sequence[str], limits=None):
    from tlsat.solver import solve
    return solve(f, limits, marks=marks)


def _check(e1, e2, mode: str, schema=None, limits=None) -> Verdict:
    e1 = _prepare(e1)
    e2 = _prepare(e2) if e2 is not None else None
    names = expression_names(e1) | (expression_names(e2) if e2 is not None else set())
    user_nominals = nominal_names(e1) | (nominal_names(e2) if e2 is not None else set())
    ctx = _fresh_name("ctx", names)
    sel = _fresh_name("sel", names)
    reserved = names | {ctx, sel}
    # one context node and one selected node, both pinned by nominals
    t1 = translate(e1, prop(ctx), True, reserved, target=sel)
    parts = [t1.local, prop(sel)]
    marks = [ctx, sel, *t1.marks, *sorted(user_nominals)]
    side = list(t1.constraints) + [nominal(m) for m in t1.marks]
    if e2 is not None:
        t2 = translate(e2, prop(ctx), True, reserved | set(t1.marks), target=sel)
        if mode == "contains":
            if not t2.negatable:
                raise XPathError("unsupported construct: the contained side needs counting "
                                 "through a nominal, which cannot be negated")
            parts.append(negate(t2.local))
        else:
            parts.append(t2.local)
            marks += list(t2.marks)
            side += list(t2.constraints) + [nominal(m) for m in t2.marks]
    f = conj(*parts, nominal(ctx), nominal(sel), *(nominal(n) for n in sorted(user_nominals)), *side)
    if schema is not None:
        f = and_(f, schema_constraint(schema))
    r = _run(f, marks, limits)
    if r.status == "RESOURCE_EXHAUSTED":
        return Verdict(None, detail=r.reason)
    if r.status == "UNSAT":
        return Verdict(True, rounds=r.rounds)
    model = r.model.canonical()
    context = next(i for i in range(model.size) if ctx in model.marks[i])
    # the counterexample is re-checked with the reference interpreter
    nary = decode_nary(model)
    user = {i: model.marks[i] & user_nominals for i in range(model.size)}
    rel1 = reference_xpath_eval(e1, nary, user)
    if mode == "contains":
        rel2 = reference_xpath_eval(e2, nary, user)
        bad = sorted(y for (x, y) in rel1 - rel2 if x == context)
    elif mode == "disjoint":
        rel2 = reference_xpath_eval(e2, nary, user)
        bad = sorted(y for (x, y) in rel1 & rel2 if x == context)
    else:
        bad = sorted(y for (x, y) in rel1 if x == context)
    node = next(i for i in range(model.size) if sel in model.marks[i])
    if node not in bad:
        raise RuntimeError(f"counterexample rejected by the reference interpreter: {model.to_json()}")
    return Verdict(False, model, context, node, rounds=r.rounds)


def xpath_contains(e1, e2, schema=None, limits=None) -> Verdict:
    """Whether every node ``e1`` selects is selected by ``e2`` (same context)."""
    return _check(e1, e2, "contains", schema, limits)


def xpath_equiv(e1, e2, schema=None, limits=None) -> Verdict:
    a = xpath_contains(e1, e2, schema, limits)
    if a.holds is not True:
        return a
    b = xpath_contains(e2, e1, schema, limits)
    return dataclasses.replace(b, rounds=a.rounds + b.rounds)


def xpath_disjoint(e1, e2, schema=None, limits=None) -> Verdict:
    return _check(e1, e2, "disjoint", schema, limits)


def xpath_empty(e, schema=None, limits=None) -> Verdict:
    """Whether ``e`` selects nothing from any context (under the schema)."""
    return _check(e, None, "empty", schema, limits)
