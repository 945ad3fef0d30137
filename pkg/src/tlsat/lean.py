"""Navigation extraction, Fisher-Ladner closure, lean and node types.

A node type is an ``int`` bitset over the positions of a :class:`Lean`; the
:class:`PhiNode` wrapper is only used at API boundaries and for printing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterator

from tlsat.formula import (
    AND, BOT, COUNT, DIA, FC, GT, MODALITIES, MU, NDIA, NOT, NPROP, NS, OR,
    PAR, PROP, PS, TOP, Formula, Modality, PropUniverse, TAlt, TAtom, TSeq,
    Trail, and_, dia, fresh_var, mu, negate, nprop, or_, pretty, prop, top,
    unfold, var,
)

# ---------------------------------------------------------------------------
# nav

_NAV_TRAIL: dict[tuple[Trail, int], Formula] = {}
_NAV: dict[int, Formula] = {}


def nav_trail(t: Trail, f: Formula) -> Formula:
    """Formula holding where some word of ``t`` leads to a node satisfying ``f``.

    Memoised so that repeated calls return the identical formula (binder
    names included).
    """
    key = (t, f.uid)
    r = _NAV_TRAIL.get(key)
    if r is not None:
        return r
    if isinstance(t, TAtom):
        r = dia(t.mod, f)
    elif isinstance(t, TSeq):
        r = nav_trail(t.left, nav_trail(t.right, f))
    elif isinstance(t, TAlt):
        r = or_(nav_trail(t.left, f), nav_trail(t.right, f))
    else:
        x = fresh_var("x")
        r = mu(x, or_(f, nav_trail(t.body, var(x))))
    _NAV_TRAIL[key] = r
    return r


def counted(c: Formula) -> Formula:
    """What a counting occurrence checks on each reachable node."""
    body = c.body
    if c.tag is None:
        return body
    mark = prop(c.tag)
    if c.cmp == GT:
        return and_(body, mark)
    return or_(and_(body, mark), and_(negate(body), nprop(c.tag)))


def nav(f: Formula) -> Formula:
    """Replace every counting formula by the navigation it performs."""
    r = _NAV.get(f.uid)
    if r is not None:
        return r
    k = f.kind
    if k == COUNT:
        r = nav_trail(f.trail, counted(f))
    elif k in (OR, AND):
        r = (or_ if k == OR else and_)(nav(f.left), nav(f.right))
    elif k == DIA:
        r = dia(f.mod, nav(f.body))
    elif k == MU:
        r = mu(f.var, nav(f.body))
    elif k == NOT:
        raise ValueError("nav expects a formula in negation normal form")
    else:
        r = f
    _NAV[f.uid] = r
    return r


# ---------------------------------------------------------------------------
# Fisher-Ladner closure

_CLOSURE_LIMIT = 1_000_000


def fl_closure(f: Formula) -> list[Formula]:
    """Closure under the decomposition relation, in discovery order."""
    seen: dict[int, Formula] = {}
    queue = [f]
    head = 0
    while head < len(queue):
        g = queue[head]
        head += 1
        if g.uid in seen:
            continue
        seen[g.uid] = g
        if len(seen) > _CLOSURE_LIMIT:
            raise RuntimeError("closure does not terminate: fixpoint unfolding is not shared")
        k = g.kind
        if k in (OR, AND):
            queue.extend(g.args)
        elif k == MU:
            queue.append(unfold(g))
        elif k == COUNT:
            queue.append(nav(g))
        elif k == DIA:
            queue.append(g.body)
    return list(seen.values())


# ---------------------------------------------------------------------------
# Lean


@dataclass(frozen=True)
class Lean:
    formulas: tuple[Formula, ...]
    universe: PropUniverse

    def __post_init__(self) -> None:
        index = {g.uid: i for i, g in enumerate(self.formulas)}
        object.__setattr__(self, "_index", index)
        tops = {}
        modal: dict[Modality, list[int]] = {m: [] for m in MODALITIES}
        for i, g in enumerate(self.formulas):
            if g.kind == DIA:
                if g.body.kind == TOP:
                    tops[g.mod] = i
                else:
                    modal[g.mod].append(i)
        object.__setattr__(self, "top_bit", {m: 1 << tops[m] for m in MODALITIES})
        object.__setattr__(self, "modal_bits", {m: tuple(modal[m]) for m in MODALITIES})
        names = {g.name: i for i, g in enumerate(self.formulas) if g.kind == PROP}
        object.__setattr__(self, "prop_index", names)
        u = self.universe
        object.__setattr__(self, "label_bits", tuple(1 << names[p] for p in u.labels))
        object.__setattr__(
            self, "free_bits", tuple(1 << names[p] for p in u.counting + u.marks)
        )

    def __len__(self) -> int:
        return len(self.formulas)

    def index(self, f: Formula) -> int | None:
        return self._index.get(f.uid)

    def bit(self, f: Formula) -> int:
        i = self._index.get(f.uid)
        if i is None:
            raise KeyError(f"{pretty(f)} is not in the lean")
        return 1 << i

    def members(self, bits: int) -> list[Formula]:
        return [g for i, g in enumerate(self.formulas) if bits >> i & 1]

    def label_of(self, bits: int) -> str:
        for b, name in zip(self.label_bits, self.universe.labels):
            if bits & b:
                return name
        raise ValueError("node type has no label")

    def free_names(self, bits: int) -> frozenset[str]:
        names = self.universe.counting + self.universe.marks
        return frozenset(n for b, n in zip(self.free_bits, names) if bits & b)

    def dump(self) -> str:
        return "\n".join(f"{i:3d}  {pretty(g)}" for i, g in enumerate(self.formulas))


def build_lean(f: Formula, u: PropUniverse) -> Lean:
    """Four ``<m>T``, the modal formulas of the closure (after ``nav``) in
    discovery order,
    the labels, counting propositions, marks, and the extra label."""
    entries: list[Formula] = [dia(m, top()) for m in MODALITIES]
    seen = {g.uid for g in entries}
    for g in fl_closure(f):
        if g.kind == DIA:
            # counting under a modality is represented by its navigation
            g = nav(g)
            if g.uid not in seen:
                entries.append(g)
                seen.add(g.uid)
    for name in u.props + u.counting + u.marks + (u.other,):
        entries.append(prop(name))
    return Lean(tuple(entries), u)


# ---------------------------------------------------------------------------
# Node types


@dataclass(frozen=True)
class PhiNode:
    lean: Lean
    bits: int

    def members(self) -> list[Formula]:
        return self.lean.members(self.bits)

    def __contains__(self, f: Formula) -> bool:
        i = self.lean.index(f)
        return i is not None and bool(self.bits >> i & 1)

    def __str__(self) -> str:
        return "{" + ", ".join(pretty(g) for g in self.members()) + "}"

    @property
    def valid(self) -> bool:
        return is_valid(self.lean, self.bits)


def is_valid(lean: Lean, bits: int) -> bool:
    if sum(1 for b in lean.label_bits if bits & b) != 1:
        return False
    for m in MODALITIES:
        if not bits & lean.top_bit[m]:
            if any(bits >> i & 1 for i in lean.modal_bits[m]):
                return False
    return not (bits & lean.top_bit[PAR] and bits & lean.top_bit[PS])


def _subsets(bits: tuple[int, ...]) -> list[int]:
    out = [0]
    for i in bits:
        out += [s | 1 << i for s in out]
    return out


def direction_choices(lean: Lean, m: Modality) -> list[int]:
    """Bit patterns for one modality: absent, or ``<m>T`` with any subset of
    the ``<m>`` formulas."""
    return [0] + [lean.top_bit[m] | s for s in _subsets(lean.modal_bits[m])]


def enumerate_phinodes(lean: Lean) -> Iterator[int]:
    """Every valid node type, lazily."""
    free = [0]
    for b in lean.free_bits:
        free += [s | b for s in free]
    fcs = direction_choices(lean, FC)
    nss = direction_choices(lean, NS)
    ups = [0] + direction_choices(lean, PAR)[1:] + direction_choices(lean, PS)[1:]
    for lab, fr, a, b, up in itertools.product(lean.label_bits, free, fcs, nss, ups):
        yield lab | fr | a | b | up


# ---------------------------------------------------------------------------
# Local entailment


class LeanError(ValueError):
    pass


class Entailment:
    """Compiled local entailment ``n |- f`` for node types of one lean."""

    def __init__(self, lean: Lean):
        self.lean = lean
        self._compiled: dict[int, Callable[[int], bool]] = {}
        self._depth = 0

    def __call__(self, bits: int, f: Formula) -> bool:
        return self.compile(f)(bits)

    def compile(self, f: Formula) -> Callable[[int], bool]:
        fn = self._compiled.get(f.uid)
        if fn is not None:
            return fn
        self._depth += 1
        if self._depth > 10_000:
            raise LeanError("unguarded fixpoint: local entailment does not terminate")
        try:
            fn = self._build(f)
        finally:
            self._depth -= 1
        self._compiled[f.uid] = fn
        return fn

    def _build(self, f: Formula) -> Callable[[int], bool]:
        lean = self.lean
        k = f.kind
        if k == TOP:
            return lambda n: True
        if k == BOT:
            return lambda n: False
        if k in (PROP, NPROP):
            i = lean.prop_index.get(f.name)
            if i is None:
                raise LeanError(f"proposition {f.name} is not in the lean")
            b = 1 << i
            if k == PROP:
                return lambda n: bool(n & b)
            return lambda n: not n & b
        if k == DIA:
            i = lean.index(f)
            if i is None:
                raise LeanError(f"{pretty(f)} is not in the lean")
            b = 1 << i
            return lambda n: bool(n & b)
        if k == NDIA:
            b = lean.top_bit[f.mod]
            return lambda n: not n & b
        if k == AND:
            a, c = self.compile(f.left), self.compile(f.right)
            return lambda n: a(n) and c(n)
        if k == OR:
            a, c = self.compile(f.left), self.compile(f.right)
            return lambda n: a(n) or c(n)
        if k == MU:
            return self.compile(unfold(f))
        raise LeanError(f"{pretty(f)} is not built from lean formulas")


def local_entails(lean: Lean, bits: int, f: Formula) -> bool:
    return Entailment(lean)(bits, f)


def node_type_of(lean: Lean, model, node: int, evaluate) -> int:
    """Node type of ``node`` in a concrete model: every lean formula that is
    true there.  ``evaluate`` is :func:`tlsat.semantics.evaluate`."""
    bits = 0
    for i, g in enumerate(lean.formulas):
        if node in evaluate(g, model):
            bits |= 1 << i
    return bits
