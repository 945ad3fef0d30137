"""Formulas of the tree logic: construction, parsing and syntactic rewrites.

Formulas are immutable and hash-consed: building the same structure twice
returns the same object, so ``is`` and ``==`` coincide and formulas can be
used as dictionary keys at no cost.  Fixpoint binders carry names that are
unique per construction site (parsing and every rewrite that introduces a
binder mint fresh names), which keeps one-step unfolding well defined.

Internally counting formulas only use the comparators ``<=`` and ``>``;
the others are surface sugar handled by :func:`make_count`.
"""

from __future__ import annotations

import enum
import itertools
import re
import threading
from dataclasses import dataclass, field
from typing import Iterable, Iterator


class Modality(enum.Enum):
    FC = "fc"
    NS = "ns"
    PAR = "par"
    PS = "ps"

    @property
    def dual(self) -> "Modality":
        return _DUAL[self]

    @property
    def forward(self) -> bool:
        return self in (Modality.FC, Modality.NS)

    @property
    def symbol(self) -> str:
        return _SYMBOL[self]

    def __repr__(self) -> str:
        return f"Modality.{self.name}"


FC, NS, PAR, PS = Modality.FC, Modality.NS, Modality.PAR, Modality.PS
MODALITIES = (FC, NS, PAR, PS)
_DUAL = {FC: PAR, PAR: FC, NS: PS, PS: NS}
_SYMBOL = {FC: "▽", NS: "▷", PAR: "△", PS: "◁"}


# ---------------------------------------------------------------------------
# Trails


@dataclass(frozen=True)
class TAtom:
    mod: Modality

    def __str__(self) -> str:
        return self.mod.value


@dataclass(frozen=True)
class TSeq:
    left: "Trail"
    right: "Trail"

    def __str__(self) -> str:
        return f"{_tparen(self.left, 1)}, {_tparen(self.right, 1)}"


@dataclass(frozen=True)
class TAlt:
    left: "Trail"
    right: "Trail"

    def __str__(self) -> str:
        return f"{_tparen(self.left, 0)} | {_tparen(self.right, 0)}"


@dataclass(frozen=True)
class TStar:
    body: "Trail"

    def __str__(self) -> str:
        return f"{_tparen(self.body, 2)}*"


Trail = TAtom | TSeq | TAlt | TStar

_TPREC = {TAlt: 0, TSeq: 1, TStar: 2, TAtom: 3}


def _tparen(t: Trail, level: int) -> str:
    s = str(t)
    return f"({s})" if _TPREC[type(t)] < level else s


def tseq(*parts: Trail) -> Trail:
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = TSeq(p, out)
    return out


def talt(*parts: Trail) -> Trail:
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = TAlt(p, out)
    return out


def tatom(*mods: Modality) -> Trail:
    """Alternation of single steps, e.g. ``tatom(FC, NS)`` is ``fc | ns``."""
    return talt(*(TAtom(m) for m in mods))


GLOBAL_TRAIL: Trail = TSeq(TStar(tatom(PAR, PS)), TStar(tatom(FC, NS)))


def trail_inverse(t: Trail) -> Trail:
    """Trail accepting reversed words with every step replaced by its dual."""
    if isinstance(t, TAtom):
        return TAtom(t.mod.dual)
    if isinstance(t, TSeq):
        return TSeq(trail_inverse(t.right), trail_inverse(t.left))
    if isinstance(t, TAlt):
        return TAlt(trail_inverse(t.left), trail_inverse(t.right))
    return TStar(trail_inverse(t.body))


def trail_size(t: Trail) -> int:
    if isinstance(t, TAtom):
        return 1
    if isinstance(t, TStar):
        return 1 + trail_size(t.body)
    return 1 + trail_size(t.left) + trail_size(t.right)


def trail_modalities(t: Trail) -> frozenset[Modality]:
    if isinstance(t, TAtom):
        return frozenset((t.mod,))
    if isinstance(t, TStar):
        return trail_modalities(t.body)
    return trail_modalities(t.left) | trail_modalities(t.right)


def _has_star(t: Trail) -> bool:
    if isinstance(t, TAtom):
        return False
    if isinstance(t, TStar):
        return True
    return _has_star(t.left) or _has_star(t.right)


def _first(t: Trail) -> set[Modality]:
    # star-free trails only: no empty word
    if isinstance(t, TAtom):
        return {t.mod}
    if isinstance(t, TSeq):
        return _first(t.left)
    return _first(t.left) | _first(t.right)


def _last(t: Trail) -> set[Modality]:
    if isinstance(t, TAtom):
        return {t.mod}
    if isinstance(t, TSeq):
        return _last(t.right)
    return _last(t.left) | _last(t.right)


def _adjacency(t: Trail, out: list[str]) -> None:
    if isinstance(t, TSeq):
        _adjacency(t.left, out)
        _adjacency(t.right, out)
        for a in _last(t.left):
            if a.dual in _first(t.right):
                out.append(f"adjacent {a.value}, {a.dual.value} in trail {t}")
    elif isinstance(t, TAlt):
        _adjacency(t.left, out)
        _adjacency(t.right, out)


def trail_problems(t: Trail) -> list[str]:
    """Violations of the trail shape: a sequence of blocks, each star-free or
    the star of a star-free trail, with no ``m, dual(m)`` adjacency inside a
    block and no starred block mentioning a modality and its converse."""
    problems: list[str] = []
    blocks: list[Trail] = []

    def flatten(x: Trail) -> None:
        if isinstance(x, TSeq) and (_has_star(x.left) or _has_star(x.right)):
            flatten(x.left)
            flatten(x.right)
        else:
            blocks.append(x)

    flatten(t)
    for b in blocks:
        body = b.body if isinstance(b, TStar) else b
        if _has_star(body):
            problems.append(f"starred subtrail not at top-level sequence: {b}")
            continue
        _adjacency(body, problems)
        if isinstance(b, TStar):
            mods = trail_modalities(body)
            for m in mods:
                if m.forward and m.dual in mods:
                    problems.append(
                        f"starred subtrail {b} contains {m.value} and {m.dual.value}"
                    )
    return problems


# ---------------------------------------------------------------------------
# Formulas

TOP, BOT, PROP, NPROP, VAR, OR, AND, DIA, NDIA, COUNT, MU, NOT = (
    "top", "bot", "prop", "nprop", "var", "or", "and", "dia", "ndia", "count",
    "mu", "not",
)
LE, GT = "<=", ">"


class Formula:
    """Hash-consed formula node.  Build through the module constructors."""

    __slots__ = ("kind", "args", "uid", "size", "__weakref__")

    kind: str
    args: tuple
    uid: int
    size: int

    def __new__(cls, *a, **k):  # pragma: no cover - guard
        raise TypeError("use the constructor functions of tlsat.formula")

    def __repr__(self) -> str:
        return f"Formula({self})"

    def __str__(self) -> str:
        return to_text(self)

    def __reduce__(self):
        return (_rebuild, (self.kind, self.args))

    # convenience accessors
    @property
    def name(self) -> str:
        return self.args[0]

    @property
    def left(self) -> "Formula":
        return self.args[0]

    @property
    def right(self) -> "Formula":
        return self.args[1]

    @property
    def mod(self) -> Modality:
        return self.args[0]

    @property
    def body(self) -> "Formula":
        # dia: (mod, body); mu: (var, body); count: (trail, body, cmp, k, tag)
        return self.args[1]

    @property
    def trail(self) -> Trail:
        return self.args[0]

    @property
    def cmp(self) -> str:
        return self.args[2]

    @property
    def k(self) -> int:
        return self.args[3]

    @property
    def tag(self) -> str | None:
        return self.args[4]

    @property
    def var(self) -> str:
        return self.args[0]


_TABLE: dict[tuple, Formula] = {}
_LOCK = threading.Lock()
_UIDS = itertools.count()


def _size(kind: str, args: tuple) -> int:
    if kind in (OR, AND):
        return 1 + args[0].size + args[1].size
    if kind in (DIA, MU):
        return 1 + args[1].size
    if kind == COUNT:
        return 1 + trail_size(args[0]) + args[1].size
    if kind == NOT:
        return 1 + args[0].size
    return 1


def _mk(kind: str, args: tuple) -> Formula:
    key = (kind, args)
    f = _TABLE.get(key)
    if f is not None:
        return f
    with _LOCK:
        f = _TABLE.get(key)
        if f is None:
            f = object.__new__(Formula)
            object.__setattr__(f, "kind", kind)
            object.__setattr__(f, "args", args)
            object.__setattr__(f, "uid", next(_UIDS))
            object.__setattr__(f, "size", _size(kind, args))
            _TABLE[key] = f
    return f


def _rebuild(kind: str, args: tuple) -> Formula:
    return _mk(kind, args)


def top() -> Formula:
    return _mk(TOP, ())


def bot() -> Formula:
    return _mk(BOT, ())


def prop(name: str) -> Formula:
    return _mk(PROP, (name,))


def nprop(name: str) -> Formula:
    return _mk(NPROP, (name,))


def var(name: str) -> Formula:
    return _mk(VAR, (name,))


def or_(a: Formula, b: Formula) -> Formula:
    return _mk(OR, (a, b))


def and_(a: Formula, b: Formula) -> Formula:
    return _mk(AND, (a, b))


def dia(m: Modality, a: Formula) -> Formula:
    return _mk(DIA, (m, a))


def ndia(m: Modality) -> Formula:
    """``¬<m>T``: no ``m`` successor."""
    return _mk(NDIA, (m,))


def count(t: Trail, body: Formula, cmp: str, k: int, tag: str | None = None) -> Formula:
    if cmp not in (LE, GT):
        raise ValueError(f"internal comparator must be <= or >, got {cmp!r}")
    if k < 0:
        raise ValueError("counting constant must be a natural number")
    return _mk(COUNT, (t, body, cmp, k, tag))


def mu(x: str, body: Formula) -> Formula:
    return _mk(MU, (x, body))


def not_(a: Formula) -> Formula:
    return _mk(NOT, (a,))


def conj(*fs: Formula) -> Formula:
    if not fs:
        return top()
    out = fs[-1]
    for f in reversed(fs[:-1]):
        out = and_(f, out)
    return out


def disj(*fs: Formula) -> Formula:
    if not fs:
        return bot()
    out = fs[-1]
    for f in reversed(fs[:-1]):
        out = or_(f, out)
    return out


_FRESH = itertools.count()


def fresh_var(base: str = "x") -> str:
    """Globally unique binder name derived from ``base``."""
    base = base.split("_")[0] or "x"
    return f"{base}_{next(_FRESH)}"


def make_count(t: Trail, body: Formula, cmp: str, k: int) -> Formula:
    """Counting formula for any surface comparator ``<=, <, >, >=, =``."""
    if k < 0:
        raise ValueError("counting constant must be a natural number")
    if cmp in (LE, GT):
        return count(t, body, cmp, k)
    if cmp == "<":
        return bot() if k == 0 else count(t, body, LE, k - 1)
    if cmp == ">=":
        return top() if k == 0 else count(t, body, GT, k - 1)
    if cmp == "=":
        return desugar_equality(t, body, k)
    raise ValueError(f"unknown comparator {cmp!r}")


def desugar_equality(t: Trail, body: Formula, k: int) -> Formula:
    if k < 0:
        raise ValueError("counting constant must be a natural number")
    if k == 0:
        return count(t, body, LE, 0)
    return and_(count(t, body, GT, k - 1), count(t, body, LE, k))


# ---------------------------------------------------------------------------
# Traversals


def subformulas(f: Formula) -> Iterator[Formula]:
    """Distinct subformulas, parents before children."""
    seen: set[int] = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if g.uid in seen:
            continue
        seen.add(g.uid)
        yield g
        stack.extend(reversed(children(g)))


def children(f: Formula) -> tuple[Formula, ...]:
    k = f.kind
    if k in (OR, AND):
        return f.args
    if k in (DIA, MU, COUNT):
        return (f.args[1],)
    if k == NOT:
        return f.args
    return ()


def propositions(f: Formula) -> list[str]:
    """Proposition names in order of first occurrence (left to right)."""
    out: dict[str, None] = {}

    def walk(g: Formula) -> None:
        if g.kind in (PROP, NPROP):
            out.setdefault(g.name, None)
        for c in children(g):
            walk(c)

    walk(f)
    return list(out)


def counts_of(f: Formula) -> list[Formula]:
    """Counting subformula occurrences, left to right, with repetitions."""
    out: list[Formula] = []

    def walk(g: Formula) -> None:
        if g.kind == COUNT:
            out.append(g)
        for c in children(g):
            walk(c)

    walk(f)
    return out


def is_counting_free(f: Formula) -> bool:
    return all(g.kind != COUNT for g in subformulas(f))


def free_vars(f: Formula) -> frozenset[str]:
    memo: dict[int, frozenset[str]] = {}

    def go(g: Formula) -> frozenset[str]:
        r = memo.get(g.uid)
        if r is not None:
            return r
        if g.kind == VAR:
            r = frozenset((g.name,))
        elif g.kind == MU:
            r = go(g.body) - {g.var}
        else:
            r = frozenset().union(*(go(c) for c in children(g)))
        memo[g.uid] = r
        return r

    return go(f)


def substitute(f: Formula, x: str, g: Formula) -> Formula:
    """``f[g/x]`` for free occurrences of ``x``.

    Binder names are unique per construction site, and ``g`` is only ever a
    fixpoint whose own free variables are bound further out, so no capture
    can happen; rebinding of ``x`` still stops the substitution.
    """
    memo: dict[int, Formula] = {}

    def go(h: Formula) -> Formula:
        r = memo.get(h.uid)
        if r is not None:
            return r
        k = h.kind
        if k == VAR:
            r = g if h.name == x else h
        elif k == MU:
            r = h if h.var == x else mu(h.var, go(h.body))
        elif k in (OR, AND):
            r = _mk(k, (go(h.left), go(h.right)))
        elif k == DIA:
            r = dia(h.mod, go(h.body))
        elif k == COUNT:
            r = count(h.trail, go(h.body), h.cmp, h.k, h.tag)
        elif k == NOT:
            r = not_(go(h.left))
        else:
            r = h
        memo[h.uid] = r
        return r

    return go(f)


def unfold(f: Formula) -> Formula:
    """One-step unfolding ``body[mu x.body / x]`` of a fixpoint."""
    if f.kind != MU:
        raise ValueError("unfold expects a fixpoint")
    return substitute(f.body, f.var, f)


def alpha_key(f: Formula) -> str:
    """Rendering with binders replaced by their nesting depth, for comparing
    formulas up to renaming of bound variables."""
    def go(g: Formula, env: dict[str, int]) -> str:
        k = g.kind
        if k == VAR:
            return f"#{env[g.name]}" if g.name in env else f"${g.name}"
        if k == MU:
            env2 = dict(env)
            env2[g.var] = len(env)
            return f"mu.({go(g.body, env2)})"
        if k in (OR, AND):
            return f"{k}({go(g.left, env)},{go(g.right, env)})"
        if k == DIA:
            return f"<{g.mod.value}>({go(g.body, env)})"
        if k == COUNT:
            return f"count({g.trail};{go(g.body, env)}){g.cmp}{g.k}[{g.tag}]"
        if k == NOT:
            return f"~({go(g.left, env)})"
        return to_text(g)

    return go(f, {})


def ac_key(f: Formula) -> str:
    """Like :func:`alpha_key`, also identifying formulas that differ only in
    the grouping and order of conjunctions and disjunctions."""
    def flat(g: Formula, kind: str) -> list[Formula]:
        if g.kind == kind:
            return flat(g.left, kind) + flat(g.right, kind)
        return [g]

    def go(g: Formula, env: dict[str, int]) -> str:
        k = g.kind
        if k == VAR:
            return f"#{env[g.name]}" if g.name in env else f"${g.name}"
        if k == MU:
            env2 = dict(env)
            env2[g.var] = len(env)
            return f"mu.({go(g.body, env2)})"
        if k in (OR, AND):
            parts = sorted({go(x, env) for x in flat(g, k)})
            return f"{k}({','.join(parts)})"
        if k == DIA:
            return f"<{g.mod.value}>({go(g.body, env)})"
        if k == COUNT:
            return f"count({g.trail};{go(g.body, env)}){g.cmp}{g.k}[{g.tag}]"
        if k == NOT:
            return f"~({go(g.left, env)})"
        return to_text(g)

    return go(f, {})


# ---------------------------------------------------------------------------
# Printing

_PREC = {OR: 0, AND: 1}


def to_text(f: Formula) -> str:
    """ASCII rendering in the concrete syntax accepted by :func:`parse_formula`."""

    def go(g: Formula, level: int) -> str:
        k = g.kind
        if k == TOP:
            return "T"
        if k == BOT:
            return "F"
        if k in (PROP, VAR):
            return g.name
        if k == NPROP:
            return f"~{g.name}"
        if k == NDIA:
            return f"~<{g.mod.value}>T"
        if k == NOT:
            return f"~{go(g.left, 2)}"
        if k == DIA:
            return f"<{g.mod.value}>{go(g.body, 2)}"
        if k in (OR, AND):
            op = " | " if k == OR else " & "
            p = _PREC[k]
            # operators parse left-associatively: keep a right-nested operand bracketed
            left = go(g.left, p)
            if g.left.kind == MU and not left.startswith("("):
                # a fixpoint body extends as far right as possible
                left = f"({left})"
            s = f"{left}{op}{go(g.right, p + 1)}"
            return f"({s})" if level > p else s
        if k == MU:
            s = f"mu {g.var}. {go(g.body, 0)}"
            return f"({s})" if level > 0 else s
        if k == COUNT:
            tag = f"[{g.tag}]" if g.tag else ""
            s = f"count{tag}({g.trail}; {go(g.body, 0)}) {g.cmp} {g.k}"
            return f"({s})" if level > 0 else s
        raise AssertionError(k)

    return go(f, 0)


_UPREC = {OR: 0, AND: 1}


def pretty(f: Formula) -> str:
    """Unicode rendering with modal symbols."""

    def trail(t: Trail) -> str:
        s = str(t)
        for m in MODALITIES:
            s = re.sub(rf"\b{m.value}\b", m.symbol, s)
        return s

    def go(g: Formula, level: int) -> str:
        k = g.kind
        if k == TOP:
            return "⊤"
        if k == BOT:
            return "¬⊤"
        if k in (PROP, VAR):
            return g.name
        if k == NPROP:
            return f"¬{g.name}"
        if k == NDIA:
            return f"¬⟨{g.mod.symbol}⟩⊤"
        if k == NOT:
            return f"¬{go(g.left, 2)}"
        if k == DIA:
            return f"⟨{g.mod.symbol}⟩{go(g.body, 2)}"
        if k in (OR, AND):
            op = " ∨ " if k == OR else " ∧ "
            p = _UPREC[k]
            s = f"{go(g.left, p)}{op}{go(g.right, p)}"
            return f"({s})" if level > p else s
        if k == MU:
            s = f"μ{g.var}.{go(g.body, 0)}"
            return f"({s})" if level > 0 else s
        if k == COUNT:
            sub = f"_{g.tag}" if g.tag else ""
            cmp = "≤" if g.cmp == LE else ">"
            return f"count{sub}({trail(g.trail)}, {go(g.body, 0)}, {cmp}, {g.k})"
        raise AssertionError(k)

    return go(f, 0)


# ---------------------------------------------------------------------------
# Negation normal form


class NormalFormError(ValueError):
    pass


def nnf(f: Formula) -> Formula:
    """Push negations to atoms, ``<m>T`` and counting comparators."""
    memo: dict[tuple[int, bool, frozenset[str]], Formula] = {}

    def pos(g: Formula, flipped: frozenset[str]) -> Formula:
        key = (g.uid, True, flipped)
        r = memo.get(key)
        if r is not None:
            return r
        k = g.kind
        if k == NOT:
            r = neg(g.left, flipped)
        elif k in (OR, AND):
            r = _mk(k, (pos(g.left, flipped), pos(g.right, flipped)))
        elif k == DIA:
            r = dia(g.mod, pos(g.body, flipped))
        elif k == MU:
            r = mu(g.var, pos(g.body, flipped - {g.var}))
        elif k == COUNT:
            r = count(g.trail, pos(g.body, frozenset()), g.cmp, g.k, g.tag)
        elif k == VAR and g.name in flipped:
            raise NormalFormError(f"variable {g.name} used both negated and positively")
        else:
            r = g
        memo[key] = r
        return r

    def neg(g: Formula, flipped: frozenset[str]) -> Formula:
        key = (g.uid, False, flipped)
        r = memo.get(key)
        if r is not None:
            return r
        k = g.kind
        if k == TOP:
            r = bot()
        elif k == BOT:
            r = top()
        elif k == PROP:
            r = nprop(g.name)
        elif k == NPROP:
            r = prop(g.name)
        elif k == VAR:
            if g.name not in flipped:
                raise NormalFormError(f"negated occurrence of fixpoint variable {g.name}")
            r = g
        elif k == NOT:
            r = pos(g.left, flipped)
        elif k == OR:
            r = and_(neg(g.left, flipped), neg(g.right, flipped))
        elif k == AND:
            r = or_(neg(g.left, flipped), neg(g.right, flipped))
        elif k == DIA:
            b = neg(g.body, flipped)
            r = ndia(g.mod) if b.kind == BOT else or_(ndia(g.mod), dia(g.mod, b))
        elif k == NDIA:
            r = dia(g.mod, top())
        elif k == MU:
            r = mu(g.var, neg(g.body, flipped | {g.var}))
        elif k == COUNT:
            other = GT if g.cmp == LE else LE
            r = count(g.trail, pos(g.body, frozenset()), other, g.k, g.tag)
        else:  # pragma: no cover
            raise NormalFormError(f"no negation rule for {k}")
        memo[key] = r
        return r

    return pos(f, frozenset())


def negate(f: Formula) -> Formula:
    """NNF of ``¬f``."""
    return nnf(not_(f))


def is_nnf(f: Formula) -> bool:
    return all(g.kind != NOT for g in subformulas(f))


# ---------------------------------------------------------------------------
# Validation


@dataclass
class Report:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def raise_if_failed(self) -> None:
        if self.violations:
            raise FormulaError("; ".join(self.violations))


class FormulaError(ValueError):
    pass


def _loop_modalities(f: Formula) -> dict[str, set[Modality]]:
    """For every binder, the modalities that can be crossed on one trip from
    the binder back to an occurrence of its variable, including the loops of
    inner binders whose bodies mention it."""
    direct: dict[str, set[Modality]] = {}
    inner: dict[str, set[str]] = {}

    def walk(g: Formula, stack: list[tuple[str, list[Modality]]]) -> None:
        k = g.kind
        if k == VAR:
            for i in range(len(stack) - 1, -1, -1):
                x, _ = stack[i]
                if x == g.name:
                    mods = direct.setdefault(x, set())
                    for _, ms in stack[i:]:
                        mods.update(ms)
                    for y, _ in stack[i + 1:]:
                        inner.setdefault(x, set()).add(y)
                    break
            return
        if k == MU:
            direct.setdefault(g.var, set())
            walk(g.body, stack + [(g.var, [])])
            return
        if k == DIA:
            if stack:
                top_x, ms = stack[-1]
                walk(g.body, stack[:-1] + [(top_x, ms + [g.mod])])
            else:
                walk(g.body, stack)
            return
        for c in children(g):
            walk(c, stack)

    walk(f, [])
    loops = {x: set(ms) for x, ms in direct.items()}
    changed = True
    while changed:
        changed = False
        for x, ys in inner.items():
            for y in ys:
                before = len(loops[x])
                loops[x] |= loops.get(y, set())
                changed |= len(loops[x]) != before
    return loops


def check_cycle_free(f: Formula) -> Report:
    """Trail shapes, and no fixpoint loop mentioning a modality and its dual."""
    rep = Report()
    for g in subformulas(f):
        if g.kind == COUNT:
            rep.violations.extend(trail_problems(g.trail))
    for x, mods in _loop_modalities(f).items():
        for m in mods:
            if m.forward and m.dual in mods:
                rep.violations.append(
                    f"variable {x} occurs under both {m.value} and {m.dual.value}"
                )
    return rep


def validate(f: Formula) -> Report:
    """Full grammar check for solver input: NNF, closed, guarded, no counting
    under fixpoints or inside counting bodies, cycle-free."""
    rep = check_cycle_free(f)
    if not is_nnf(f):
        rep.violations.append("formula is not in negation normal form")
    fv = free_vars(f)
    if fv:
        rep.violations.append(f"unbound variables: {', '.join(sorted(fv))}")

    def walk(g: Formula, under_mu: bool, under_count: bool, unguarded: frozenset[str]) -> None:
        k = g.kind
        if k == COUNT:
            if under_mu:
                rep.violations.append(f"counting formula under a fixpoint: {g}")
            if under_count:
                rep.violations.append(f"counting formula inside counting body: {g}")
            walk(g.body, under_mu, True, frozenset())
            return
        if k == VAR:
            if g.name in unguarded:
                rep.violations.append(f"variable {g.name} is not under a modality")
            return
        if k == MU:
            walk(g.body, True, under_count, unguarded | {g.var})
            return
        if k == DIA:
            walk(g.body, under_mu, under_count, frozenset())
            return
        for c in children(g):
            walk(c, under_mu, under_count, unguarded)

    walk(f, False, False, frozenset())
    return rep


# ---------------------------------------------------------------------------
# Propositions universe and annotation


@dataclass(frozen=True)
class PropUniverse:
    """Labels (exactly one per node), the extra label standing for every
    other name, counting propositions, and extra marks (free bits that do not
    compete with labels, used for internal nominals)."""

    props: tuple[str, ...]
    other: str
    counting: tuple[str, ...] = ()
    marks: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        names = list(self.props) + [self.other] + list(self.counting) + list(self.marks)
        if len(set(names)) != len(names):
            raise ValueError("proposition universe has overlapping names")

    @property
    def labels(self) -> tuple[str, ...]:
        return self.props + (self.other,)

    def all_names(self) -> frozenset[str]:
        return frozenset(self.props + (self.other,) + self.counting + self.marks)

    def fresh(self, base: str) -> str:
        used = self.all_names()
        for i in itertools.count():
            name = f"{base}{i}"
            if name not in used:
                return name
        raise AssertionError  # pragma: no cover

    def with_counting(self, names: Iterable[str]) -> "PropUniverse":
        return PropUniverse(self.props, self.other, self.counting + tuple(names), self.marks)


def universe_of(f: Formula, marks: Iterable[str] = (), extra: Iterable[str] = ()) -> PropUniverse:
    marks = tuple(dict.fromkeys(marks))
    names = [p for p in propositions(f) if p not in marks]
    for p in extra:
        if p not in names and p not in marks:
            names.append(p)
    other = "p_other"
    i = 0
    while other in names or other in marks:
        i += 1
        other = f"p_other{i}"
    return PropUniverse(tuple(names), other, (), marks)


def annotate_counting(f: Formula, u: PropUniverse) -> tuple[Formula, PropUniverse]:
    """Tag every counting occurrence with a fresh counting proposition."""
    used = set(u.all_names())
    fresh: list[str] = []
    gen = itertools.count()

    def next_name() -> str:
        while True:
            name = f"c{next(gen)}"
            if name not in used:
                used.add(name)
                fresh.append(name)
                return name

    def go(g: Formula) -> Formula:
        k = g.kind
        if k == COUNT:
            return count(g.trail, g.body, g.cmp, g.k, next_name())
        if k in (OR, AND):
            return _mk(k, (go(g.left), go(g.right)))
        if k == DIA:
            return dia(g.mod, go(g.body))
        if k == MU:
            return mu(g.var, go(g.body))
        if k == NOT:
            return not_(go(g.left))
        return g

    out = go(f)
    return out, u.with_counting(fresh)


def strip_tags(f: Formula) -> Formula:
    memo: dict[int, Formula] = {}

    def go(g: Formula) -> Formula:
        r = memo.get(g.uid)
        if r is not None:
            return r
        k = g.kind
        if k == COUNT:
            r = count(g.trail, go(g.body), g.cmp, g.k, None)
        elif k in (OR, AND):
            r = _mk(k, (go(g.left), go(g.right)))
        elif k == DIA:
            r = dia(g.mod, go(g.body))
        elif k == MU:
            r = mu(g.var, go(g.body))
        elif k == NOT:
            r = not_(go(g.left))
        else:
            r = g
        memo[g.uid] = r
        return r

    return go(f)


# ---------------------------------------------------------------------------
# Derived forms


def nominal(name: str, universe: PropUniverse | None = None) -> Formula:
    """Exactly one node of the whole tree carries ``name``."""
    if universe is not None and name in universe.all_names():
        raise ValueError(f"nominal {name!r} is already used")
    return desugar_equality(GLOBAL_TRAIL, prop(name), 1)


def global_implication(guard: Formula, cmp: str, k: int, then: Formula) -> Formula:
    """``then`` selected iff the number of ``guard`` nodes anywhere satisfies
    ``cmp k``."""
    if not is_counting_free(guard):
        raise ValueError("guard of a global implication must be counting-free")
    return and_(make_count(GLOBAL_TRAIL, guard, cmp, k), then)


_CHILD_TRAIL = TStar(TAtom(NS))


def _siblings_more_than(body: Formula, k: int) -> Formula:
    """Holds at a node when more than ``k`` nodes among it and its following
    siblings satisfy ``body``."""
    x = fresh_var("x")
    if k == 0:
        return mu(x, or_(body, dia(NS, var(x))))
    rest = _siblings_more_than(body, k - 1)
    return mu(x, or_(and_(body, dia(NS, rest)), dia(NS, var(x))))


def child_count_formula(body: Formula, cmp: str, k: int) -> Formula:
    """Fixpoint form of ``<fc> count(ns*; body) cmp k``."""
    more = _siblings_more_than(body, k)
    if cmp == GT:
        return dia(FC, more)
    return dia(FC, negate(more))


def ch_translate(f: Formula, everywhere: bool = False) -> Formula:
    """Rewrite child-counting forms ``<fc>count(ns*; g) cmp k`` found under a
    fixpoint or inside a counting body into counting-free fixpoints.

    With ``everywhere`` the rewrite also applies at top level.  Any other
    counting formula under a fixpoint is rejected.
    """

    def go(g: Formula, inside: bool) -> Formula:
        k = g.kind
        if k == DIA and g.mod == FC and g.body.kind == COUNT and g.body.trail == _CHILD_TRAIL:
            c = g.body
            body = go(c.body, True)
            if inside or everywhere:
                if not is_counting_free(body):
                    raise FormulaError(f"nested counting in child-counting body: {c}")
                return child_count_formula(body, c.cmp, c.k)
            return dia(FC, count(c.trail, body, c.cmp, c.k, c.tag))
        if k == COUNT:
            if inside:
                raise FormulaError(f"counting formula under a fixpoint is not a child-counting form: {g}")
            return count(g.trail, go(g.body, True), g.cmp, g.k, g.tag)
        if k == MU:
            return mu(g.var, go(g.body, True))
        if k in (OR, AND):
            return _mk(k, (go(g.left, inside), go(g.right, inside)))
        if k == DIA:
            return dia(g.mod, go(g.body, inside))
        if k == NOT:
            return not_(go(g.left, inside))
        return g

    return go(f, False)


def chain_more_than(m: Modality, body: Formula, k: int) -> Formula:
    """Holds at a node when more than ``k`` nodes among it and the nodes
    reached by repeating ``m`` satisfy ``body``."""
    x = fresh_var("x")
    if k == 0:
        return mu(x, or_(body, dia(m, var(x))))
    return mu(x, or_(and_(body, dia(m, chain_more_than(m, body, k - 1))), dia(m, var(x))))


def _chain(t: Trail) -> list[tuple[str, Modality]] | None:
    """``t`` as a sequence of single steps and starred single steps."""
    if isinstance(t, TAtom):
        return [("step", t.mod)]
    if isinstance(t, TStar) and isinstance(t.body, TAtom):
        return [("star", t.body.mod)]
    if isinstance(t, TSeq):
        a, b = _chain(t.left), _chain(t.right)
        return None if a is None or b is None else a + b
    return None


def chain_count_formula(t: Trail, body: Formula, cmp: str, k: int) -> Formula | None:
    """Counting-free equivalent of ``count(t; body) cmp k`` for trails of the
    form ``m1, ..., mi, m*`` (the reached nodes form one chain), else None."""
    parts = _chain(t)
    if parts is None or not is_counting_free(body):
        return None
    stars = [i for i, (kind, _) in enumerate(parts) if kind == "star"]
    if len(stars) > 1 or (stars and stars[0] != len(parts) - 1):
        return None
    if stars:
        more = chain_more_than(parts[-1][1], body, k)
        steps = parts[:-1]
    else:
        # a single node is reached: more than k of one node
        more = body if k == 0 else bot()
        steps = parts
    if cmp == GT:
        f = more
        for _, m in reversed(steps):
            f = dia(m, f)
        return f
    f = negate(more)
    for _, m in reversed(steps):
        f = or_(ndia(m), dia(m, f))
    return f


def expand_chain_counts(f: Formula) -> Formula:
    """Replace every counting formula along a single chain by its
    counting-free equivalent."""
    k = f.kind
    if k == COUNT:
        r = chain_count_formula(f.trail, f.body, f.cmp, f.k)
        return r if r is not None else count(f.trail, expand_chain_counts(f.body), f.cmp, f.k, f.tag)
    if k in (OR, AND):
        return _mk(k, (expand_chain_counts(f.left), expand_chain_counts(f.right)))
    if k == DIA:
        return dia(f.mod, expand_chain_counts(f.body))
    if k == MU:
        return mu(f.var, expand_chain_counts(f.body))
    if k == NOT:
        return not_(expand_chain_counts(f.left))
    return f


# ---------------------------------------------------------------------------
# Parser


class ParseError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


_TOKEN = re.compile(
    r"\s*(?:(?P<mod><(?:fc|ns|par|ps)>)|(?P<cmp><=|>=|≤|≥|<|>|=)|(?P<int>\d+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[()~&|.;,*@!]))"
)
_MODS = {m.value: m for m in MODALITIES}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks: list[tuple[str, str, int]] = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.scope: list[tuple[str, str]] = []

    def peek(self) -> tuple[str, str, int]:
        return self.toks[self.i]

    def take(self) -> tuple[str, str, int]:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value: str) -> None:
        kind, v, pos = self.take()
        if v != value:
            raise ParseError(f"expected {value!r}, found {v or 'end of input'!r}", pos)

    def at(self, value: str) -> bool:
        return self.peek()[1] == value

    def formula(self) -> Formula:
        f = self.conj()
        while self.at("|"):
            self.take()
            f = or_(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.unary()
        while self.at("&"):
            self.take()
            f = and_(f, self.unary())
        return f

    def unary(self) -> Formula:
        kind, v, pos = self.peek()
        if v in ("~", "!"):
            self.take()
            return not_(self.unary())
        if kind == "mod":
            self.take()
            return dia(_MODS[v[1:-1]], self.unary())
        if v == "mu":
            self.take()
            kind, name, npos = self.take()
            if kind != "ident":
                raise ParseError("expected a variable name after mu", npos)
            self.expect(".")
            unique = fresh_var(name)
            self.scope.append((name, unique))
            body = self.formula()
            self.scope.pop()
            return mu(unique, body)
        return self.primary()

    def primary(self) -> Formula:
        kind, v, pos = self.take()
        if v == "(":
            f = self.formula()
            self.expect(")")
            return f
        if v == "@":
            kind, name, npos = self.take()
            if kind != "ident":
                raise ParseError("expected a name after @", npos)
            return nominal(name)
        if kind == "ident":
            if v == "T":
                return top()
            if v == "F":
                return bot()
            if v == "count" and self.at("("):
                return self.count()
            for name, unique in reversed(self.scope):
                if name == v:
                    return var(unique)
            return prop(v)
        raise ParseError(f"unexpected {v or 'end of input'!r}", pos)

    def count(self) -> Formula:
        self.expect("(")
        tstart = self.peek()[2]
        t = self.trail()
        problems = trail_problems(t)
        if problems:
            raise ParseError(f"malformed trail: {problems[0]}", tstart)
        self.expect(";")
        body = self.formula()
        self.expect(")")
        kind, cmp, pos = self.take()
        if kind != "cmp":
            raise ParseError("expected a comparator after count(...)", pos)
        cmp = {"≤": "<=", "≥": ">="}.get(cmp, cmp)
        kind, k, pos = self.take()
        if kind != "int":
            raise ParseError("expected a natural number", pos)
        return make_count(t, body, cmp, int(k))

    def trail(self) -> Trail:
        t = self.tseq()
        while self.at("|"):
            self.take()
            t = TAlt(t, self.tseq())
        return t

    def tseq(self) -> Trail:
        parts = [self.tpost()]
        while True:
            if self.at(","):
                self.take()
                parts.append(self.tpost())
            elif self.peek()[0] in ("ident", "mod") or self.at("("):
                parts.append(self.tpost())
            else:
                break
        return tseq(*parts)

    def tpost(self) -> Trail:
        t = self.tatom()
        while self.at("*"):
            self.take()
            t = TStar(t)
        return t

    def tatom(self) -> Trail:
        kind, v, pos = self.take()
        if v == "(":
            t = self.trail()
            self.expect(")")
            return t
        if kind == "ident" and v in _MODS:
            return TAtom(_MODS[v])
        if kind == "mod":
            return TAtom(_MODS[v[1:-1]])
        raise ParseError(f"expected a modality in trail, found {v or 'end of input'!r}", pos)


def parse_formula(text: str) -> Formula:
    """Parse the concrete syntax (see README).  Bound variables are renamed to
    globally unique names; the result may contain ``~`` above compound
    formulas."""
    p = _Parser(text)
    f = p.formula()
    kind, v, pos = p.peek()
    if kind != "eof":
        raise ParseError(f"unexpected {v!r}", pos)
    return f


def parse_trail(text: str) -> Trail:
    p = _Parser(text)
    t = p.trail()
    kind, v, pos = p.peek()
    if kind != "eof":
        raise ParseError(f"unexpected {v!r}", pos)
    return t
