"""Bottom-up tableau for satisfiability.

The loop builds candidate trees of node types from the leaves up, round by
round, and stops with SAT once a finished tree satisfies the formula, or
with UNSAT once a round adds nothing new.

Counting is handled through the nominal device: every counting occurrence is
replaced by a fresh mark ``m`` and the count itself becomes a constraint on
the whole tree, namely either no node carries ``m``, or exactly one does and
the number of nodes that satisfy the counted formula *and* reach back to
``m`` through the inverse trail meets the bound.  Both quantities are sums
over nodes of local facts, so a candidate tree only needs to be remembered
up to its root type, those sums (capped) and whether some node already
satisfies the skeleton.  Trees that agree on this summary are
interchangeable in any context, which makes the set of candidates finite.
Each class keeps the first tree that produced it as representative; models
are read off representatives and re-checked with the reference evaluator.
"""

from __future__ import annotations

import dataclasses
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from tlsat.formula import (
    AND, COUNT, DIA, FC, GT, LE, MODALITIES, MU, NOT, NS, OR, PAR, PS, Formula,
    Modality, PropUniverse, GLOBAL_TRAIL, and_, annotate_counting, expand_chain_counts,
    ch_translate, conj, dia, is_counting_free, nnf, or_, prop, top, trail_inverse,
    universe_of, validate,
)
from tlsat.lean import Entailment, Lean, build_lean, counted, nav_trail
from tlsat.semantics import TreeModel, compile_trail, evaluate

log = logging.getLogger("tlsat.solver")
if os.environ.get("TLSAT_LOG"):
    logging.basicConfig(level=os.environ["TLSAT_LOG"].upper())


SAT, UNSAT, EXHAUSTED = "SAT", "UNSAT", "RESOURCE_EXHAUSTED"


class SolverError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Occurrence bound


def k_bound(f: Formula) -> int:
    k = f.kind
    if k in (AND, OR):
        return k_bound(f.left) + k_bound(f.right)
    if k in (DIA, MU):
        return k_bound(f.body)
    if k == COUNT:
        return f.k + 1
    if k == NOT:
        return k_bound(f.left)
    return 0


# ---------------------------------------------------------------------------
# Candidate trees


class PsiTree:
    """A node type with optional first-child and next-sibling subtrees."""

    __slots__ = ("node", "left", "right", "profile", "size")

    def __init__(self, node: int, left: PsiTree | None = None, right: PsiTree | None = None):
        self.node = node
        self.left = left
        self.right = right
        prof: dict[int, int] = dict(left.profile) if left else {}
        if right:
            for n, c in right.profile.items():
                if c > prof.get(n, 0):
                    prof[n] = c
        prof[node] = prof.get(node, 0) + 1
        self.profile = prof
        self.size = 1 + (left.size if left else 0) + (right.size if right else 0)

    def child(self, m: Modality) -> PsiTree | None:
        return self.left if m is FC else self.right if m is NS else None

    def key(self) -> tuple:
        return (
            self.node,
            self.left.key() if self.left else None,
            self.right.key() if self.right else None,
        )

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PsiTree) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def occurrences(self, n: int) -> int:
        """Most occurrences of ``n`` on one root-to-leaf path."""
        return self.profile.get(n, 0)


def nmax(n: int, t1: PsiTree | None, t2: PsiTree | None) -> int:
    return 1 + max(t1.occurrences(n) if t1 else 0, t2.occurrences(n) if t2 else 0)


Position = tuple  # forward modalities from the root


def _step(t: PsiTree, pos: Position, m: Modality) -> Position | None:
    if m.forward:
        node = _at(t, pos)
        if node is None or node.child(m) is None:
            return None
        return pos + (m,)
    if pos and pos[-1] is m.dual:
        return pos[:-1]
    return None


def _at(t: PsiTree, pos: Position) -> PsiTree | None:
    node: PsiTree | None = t
    for m in pos:
        if node is None:
            return None
        node = node.child(m)
    return node


def _resolve(t: PsiTree, path: Iterable[Modality]) -> Position | None:
    pos: Position | None = ()
    for m in path:
        pos = _step(t, pos, m)
        if pos is None:
            return None
    return pos


def psitree_path(t: PsiTree, path: Iterable[Modality]) -> int | None:
    """Node type at ``path``; a backward step only cancels the forward step
    right before it."""
    pos = _resolve(t, path)
    if pos is None:
        return None
    node = _at(t, pos)
    return node.node if node else None


def consistent(lean: Lean, n1: int, m: Modality, n2: int, ent: Entailment | None = None) -> bool:
    """``n2`` may sit below ``n1`` along ``m`` (first child or next sibling)."""
    if not m.forward:
        raise ValueError("consistency is defined for fc and ns")
    ent = ent or Entailment(lean)
    for i, g in enumerate(lean.formulas):
        if g.kind != DIA:
            continue
        if g.mod is m:
            if bool(n1 >> i & 1) != ent(n2, g.body):
                return False
        elif g.mod is m.dual:
            if bool(n2 >> i & 1) != ent(n1, g.body):
                return False
    return True


def global_entails(lean: Lean, t: PsiTree, path: Iterable[Modality], f: Formula,
                   ent: Entailment | None = None) -> bool:
    """Entailment of ``f`` (counting allowed outside fixpoints) at ``path`` of
    a finished tree."""
    ent = ent or Entailment(lean)
    start = _resolve(t, path)
    if start is None:
        return False

    def go(pos: Position, g: Formula) -> bool:
        if is_counting_free(g):
            node = _at(t, pos)
            return ent(node.node, g)
        k = g.kind
        if k == AND:
            return go(pos, g.left) and go(pos, g.right)
        if k == OR:
            return go(pos, g.left) or go(pos, g.right)
        if k == DIA:
            nxt = _step(t, pos, g.mod)
            return nxt is not None and go(nxt, g.body)
        if k == COUNT:
            a = compile_trail(g.trail)
            seen = {(pos, a.start)}
            stack = [(pos, a.start)]
            reached: set[Position] = set()
            while stack:
                p, q = stack.pop()
                if q in a.accepting:
                    reached.add(p)
                for m in MODALITIES:
                    nxt = _step(t, p, m)
                    if nxt is None:
                        continue
                    for r in a.step(q, m):
                        if (nxt, r) not in seen:
                            seen.add((nxt, r))
                            stack.append((nxt, r))
            hit = and_(g.body, prop(g.tag)) if g.tag else g.body
            n = sum(1 for p in reached if ent(_at(t, p).node, hit))
            if g.cmp == GT:
                return n > g.k
            if g.tag:
                both = counted(g)
                if not all(ent(_at(t, p).node, both) for p in reached):
                    return False
            return n <= g.k
        raise SolverError(f"counting under {k} is outside the supported fragment")

    return go(start, f)


def extract_model(t: PsiTree, lean: Lean, keep: Iterable[str] | None = None) -> TreeModel:
    """Concrete tree of a candidate: nodes in preorder, each labelled by the
    unique label of its type.  Marks listed in ``keep`` are retained."""
    keep = frozenset(keep) if keep is not None else None
    labels: list[str] = []
    marks: list[frozenset[str]] = []
    fc: list[int | None] = []
    ns: list[int | None] = []

    def visit(x: PsiTree) -> int:
        i = len(labels)
        labels.append(lean.label_of(x.node))
        names = lean.free_names(x.node)
        marks.append(names if keep is None else names & keep)
        fc.append(None)
        ns.append(None)
        if x.left is not None:
            fc[i] = visit(x.left)
        if x.right is not None:
            ns[i] = visit(x.right)
        return i

    visit(t)
    return TreeModel(tuple(labels), tuple(fc), tuple(ns), tuple(marks))


# ---------------------------------------------------------------------------
# Problem preparation


class Constraint(NamedTuple):
    """``#marker == 0`` or ``#body cmp k`` over the whole tree.

    ``exact`` markers must be unique (the count is evaluated from that
    node); a count along the global trail has the same value everywhere, so
    its marker may repeat, and a top-level one has no marker at all.
    """

    marker: str | None
    body: Formula
    cmp: str
    k: int
    exact: bool = True


@dataclass
class Prepared:
    source: Formula
    formula: Formula            # after ch-translation and NNF
    universe: PropUniverse
    annotated: Formula
    annotated_universe: PropUniverse
    lean: Lean                  # lean of the annotated formula
    k: int
    skeleton: Formula
    constraints: list[Constraint]
    work_universe: PropUniverse
    work_lean: Lean


def prepare(f: Formula, marks: Iterable[str] = ()) -> Prepared:
    marks = tuple(marks)
    g = nnf(ch_translate(f))
    validate(g).raise_if_failed()
    u = universe_of(g, marks=marks)
    annotated, au = annotate_counting(g, u)
    lean = build_lean(annotated, au)
    k = k_bound(annotated)

    used = set(au.all_names())
    constraints: list[Constraint] = []

    def fresh() -> str:
        i = len(constraints)
        while f"m{i}" in used:
            i += 1
        used.add(f"m{i}")
        return f"m{i}"

    def strip(h: Formula) -> Formula:
        kind = h.kind
        if kind == COUNT:
            m = fresh()
            if h.trail == GLOBAL_TRAIL:
                constraints.append(Constraint(m, h.body, h.cmp, h.k, False))
            else:
                reach = nav_trail(trail_inverse(h.trail), prop(m))
                constraints.append(Constraint(m, and_(h.body, reach), h.cmp, h.k))
            return prop(m)
        if kind in (AND, OR):
            return (and_ if kind == AND else or_)(strip(h.left), strip(h.right))
        if kind == DIA:
            return dia(h.mod, strip(h.body))
        return h

    def top_level(h: Formula) -> Formula:
        if h.kind == AND:
            a, b = top_level(h.left), top_level(h.right)
            return b if a == top() else a if b == top() else and_(a, b)
        if h.kind == COUNT and h.trail == GLOBAL_TRAIL:
            constraints.append(Constraint(None, h.body, h.cmp, h.k, False))
            return top()
        return strip(h)

    # counts along one chain need no global bookkeeping
    skeleton = top_level(expand_chain_counts(g))
    markers = tuple(c.marker for c in constraints if c.marker is not None)
    wu = PropUniverse(u.props, u.other, (), u.marks + markers)
    work_lean = build_lean(conj(skeleton, *(c.body for c in constraints)), wu)
    return Prepared(f, g, u, annotated, au, lean, k, skeleton, constraints, wu, work_lean)


# ---------------------------------------------------------------------------
# Results


@dataclass
class Limits:
    max_rounds: int | None = None
    max_st: int | None = None
    timeout: float | None = None
    # occurrence cap per node type and path: "auto" is K + 2, None disables it
    occurrence_cap: int | str | None = "auto"


@dataclass
class SolveResult:
    status: str
    model: TreeModel | None = None
    witness: int | None = None
    path: tuple[Modality, ...] | None = None
    rounds: int = 0
    reason: str | None = None
    tree: PsiTree | None = field(default=None, repr=False)
    stats: dict = field(default_factory=dict)

    @property
    def sat(self) -> bool:
        return self.status == SAT

    def to_json(self) -> dict:
        out: dict = {"result": self.status, "rounds": self.rounds}
        if self.model is not None:
            out["model"] = self.model.to_json()
            out["witness"] = self.witness
            out["path"] = [m.value for m in self.path or ()]
        if self.reason:
            out["reason"] = self.reason
        out["stats"] = self.stats
        return out


_DUAL_OF = {m: m.dual for m in MODALITIES}


class _Exhausted(Exception):
    pass


# ---------------------------------------------------------------------------
# The loop


class _Search:
    def __init__(self, prep: Prepared, limits: Limits):
        self.prep = prep
        self.limits = limits
        lean = self.lean = prep.work_lean
        self.ent = Entailment(lean)
        cap = limits.occurrence_cap
        self.cap = prep.k + 2 if cap == "auto" else cap
        self.start = time.monotonic()
        self.ticks = 0

        self.skel = self.ent.compile(prep.skeleton)
        cs = prep.constraints
        self.marker_bits = [0 if c.marker is None else lean.bit(prop(c.marker)) for c in cs]
        self.betas = [self.ent.compile(c.body) for c in cs]
        self.caps = [2 if c.exact else 1 for c in cs] + [c.k + 1 for c in cs]

        self.forward = {m: [(1 << i, self.ent.compile(lean.formulas[i].body))
                            for i in lean.modal_bits[m]] for m in (FC, NS)}
        self.backward = {m: [(1 << i, self.ent.compile(lean.formulas[i].body))
                             for i in lean.modal_bits[m]] for m in (PAR, PS)}
        self.back_mask = {m: sum(b for b, _ in self.backward[m]) for m in (PAR, PS)}
        self.top = lean.top_bit

        free = [0]
        for b in lean.free_bits:
            free += [s | b for s in free]
        ups = [0]
        for m in (PAR, PS):
            subsets = [0]
            for b, _ in self.backward[m]:
                subsets += [s | b for s in subsets]
            ups += [self.top[m] | s for s in subsets]
        self.parent_parts = [lab | fr | up for lab in lean.label_bits for fr in free for up in ups]

        self.fwd_memo: dict[tuple[Modality, int], int] = {}
        self.parents_memo: dict[tuple, list[tuple[int, int]]] = {}
        self.base_memo: dict[int, dict[tuple, list[tuple[int, int]]]] = {}
        self.add_memo: dict[tuple[int, int], int] = {}
        self.pending = self.top[PAR] | self.top[PS] | self.top[NS]
        # a summary is (capped count vector, witness flag) packed into an int
        self.radix = [c + 1 for c in self.caps]
        self.sat_memo: dict[int, bool] = {}

    # -- summaries -------------------------------------------------------

    def pack(self, vec: Sequence[int], w: bool) -> int:
        s = 0
        for v, r in zip(reversed(vec), reversed(self.radix)):
            s = s * r + v
        return s * 2 + int(w)

    def unpack(self, s: int) -> tuple[tuple[int, ...], bool]:
        w = bool(s & 1)
        s >>= 1
        vec = []
        for r in self.radix:
            vec.append(s % r)
            s //= r
        return tuple(vec), w

    def add(self, a: int, b: int) -> int:
        key = (a, b) if a <= b else (b, a)
        r = self.add_memo.get(key)
        if r is None:
            va, wa = self.unpack(a)
            vb, wb = self.unpack(b)
            vec = [min(x + y, c) for x, y, c in zip(va, vb, self.caps)]
            r = self.pack(vec, wa or wb)
            self.add_memo[key] = r
        return r

    def own(self, n: int) -> int:
        vec = [1 if n & b else 0 for b in self.marker_bits]
        vec += [1 if fn(n) else 0 for fn in self.betas]
        return self.pack(vec, self.skel(n))

    # -- helpers ---------------------------------------------------------

    def tick(self) -> None:
        self.ticks += 1
        if self.ticks & 0x3FF == 0 and self.limits.timeout is not None:
            if time.monotonic() - self.start > self.limits.timeout:
                raise _Exhausted("timeout")

    def forward_bits(self, m: Modality, child: int) -> int:
        key = (m, child)
        r = self.fwd_memo.get(key)
        if r is None:
            r = self.top[m]
            for b, fn in self.forward[m]:
                if fn(child):
                    r |= b
            self.fwd_memo[key] = r
        return r

    def interface(self, m: Modality, n: int) -> tuple[int, int]:
        """What a parent sees of a child reached along ``m``: the forward bits
        it induces and the backward bits the child claims."""
        return self.forward_bits(m, n), n & self.back_mask[m.dual]

    def provides(self, m: Modality, n: int) -> int:
        """Backward bits a child reached by ``m`` must carry under parent ``n``."""
        r = 0
        for b, fn in self.backward[_DUAL_OF[m]]:
            if fn(n):
                r |= b
        return r

    def parents(self, i1: tuple[int, int] | None, i2: tuple[int, int] | None) -> list[tuple[int, int]]:
        """Valid parents over children with the given interfaces, each with
        its own summary contribution."""
        key = (i1, i2)
        out = self.parents_memo.get(key)
        if out is not None:
            return out
        base = (i1[0] if i1 else 0) | (i2[0] if i2 else 0)
        table = self.base_memo.get(base)
        if table is None:
            # parents over this forward part, indexed by what they provide
            table = {}
            for part in self.parent_parts:
                n = base | part
                k = (self.provides(FC, n) if i1 else None, self.provides(NS, n) if i2 else None)
                table.setdefault(k, []).append((n, self.own(n)))
            self.base_memo[base] = table
        out = table.get((i1[1] if i1 else None, i2[1] if i2 else None), [])
        self.parents_memo[key] = out
        return out

    def satisfied(self, n: int, s: int) -> bool:
        if n & self.pending:
            return False
        r = self.sat_memo.get(s)
        if r is None:
            r = self._summary_ok(s)
            self.sat_memo[s] = r
        return r

    def _summary_ok(self, s: int) -> bool:
        vec, w = self.unpack(s)
        if not w:
            return False
        m = len(self.prep.constraints)
        for j, c in enumerate(self.prep.constraints):
            markers, hits, cmp, k = vec[j], vec[m + j], c.cmp, c.k
            if c.marker is not None and markers == 0:
                continue
            if c.exact and markers > 1:
                return False
            if cmp == GT and not hits > k:
                return False
            if cmp == LE and not hits <= k:
                return False
        return True

    # -- main loop -------------------------------------------------------

    def run(self) -> tuple[str, PsiTree | None, int, list[int], str | None]:
        # classes: (root type, summary) -> representative tree
        classes: dict[tuple[int, int], PsiTree] = {}
        # children by (interface, summary) -> representative, one table per slot
        slots: dict[Modality, dict[tuple, PsiTree]] = {FC: {}, NS: {}}
        fresh: dict[Modality, list[tuple]] = {FC: [], NS: []}
        tried: set[tuple] = set()
        sizes: list[int] = []
        zero = self.pack([0] * len(self.caps), False)
        rounds = 0
        lim = self.limits
        while True:
            if lim.max_rounds is not None and rounds >= lim.max_rounds:
                raise _Exhausted(f"round limit {lim.max_rounds}")
            if lim.timeout is not None and time.monotonic() - self.start > lim.timeout:
                raise _Exhausted("timeout")
            rounds += 1
            aux: dict[tuple[int, int], PsiTree] = {}
            found: tuple[int, int] | None = None

            def pairs():
                if rounds == 1:
                    yield None, None
                    return
                new_fc = set(fresh[FC])
                all_ns = [None, *slots[NS]]
                old_fc = [None, *(e for e in slots[FC] if e not in new_fc)]
                for e1 in fresh[FC]:
                    for e2 in all_ns:
                        yield e1, e2
                for e2 in fresh[NS]:
                    for e1 in old_fc:
                        yield e1, e2

            for e1, e2 in pairs():
                s12 = self.add(e1[1] if e1 else zero, e2[1] if e2 else zero)
                i1 = e1[0] if e1 else None
                i2 = e2[0] if e2 else None
                probe = (i1, i2, s12)
                if probe in tried:
                    continue
                tried.add(probe)
                ps = self.parents(i1, i2)
                if not ps:
                    continue
                t1 = slots[FC][e1] if e1 else None
                t2 = slots[NS][e2] if e2 else None
                for n, own in ps:
                    self.tick()
                    key = (n, self.add(s12, own))
                    if key in classes:
                        continue
                    prev = aux.get(key)
                    if prev is not None:
                        # same class within a round: keep the smaller tree
                        if prev.size > 1 + (t1.size if t1 else 0) + (t2.size if t2 else 0):
                            aux[key] = PsiTree(n, t1, t2)
                        continue
                    if self.cap is not None and nmax(n, t1, t2) > self.cap:
                        continue
                    aux[key] = PsiTree(n, t1, t2)
                    if self.satisfied(*key):
                        found = key
                        break
                    if lim.max_st is not None and len(classes) + len(aux) > lim.max_st:
                        raise _Exhausted(f"tree set limit {lim.max_st}")
                if found:
                    break

            if not aux:
                sizes.append(len(classes))
                return UNSAT, None, rounds, sizes, None
            fresh = {FC: [], NS: []}
            fresh_set = {FC: set(), NS: set()}
            for key, tree in aux.items():
                classes[key] = tree
                n, s = key
                for m, up in ((FC, PAR), (NS, PS)):
                    if n & self.top[up]:
                        e = (self.interface(m, n), s)
                        prev = slots[m].get(e)
                        if prev is None:
                            slots[m][e] = tree
                            fresh[m].append(e)
                            fresh_set[m].add(e)
                        elif e in fresh_set[m] and tree.size < prev.size:
                            slots[m][e] = tree
            sizes.append(len(classes))
            log.debug("round %d: %d new, %d total", rounds, len(aux), len(classes))
            if found:
                return SAT, classes[found], rounds, sizes, None


def solve(f: Formula, limits: Limits | None = None, marks: Iterable[str] = (),
          prepared: Prepared | None = None) -> SolveResult:
    """Decide satisfiability of ``f`` (any formula accepted by the parser).

    ``marks`` names propositions that are free bits rather than labels
    (several may hold at a node, alongside its label).
    """
    limits = limits or Limits()
    prep = prepared or prepare(f, marks)
    t0 = time.monotonic()
    if prep.constraints:
        # without the global counts the formula has more models: when even
        # that is unsatisfiable, the search over count summaries is skipped
        relaxed = dataclasses.replace(prep, constraints=[],
                                      work_lean=build_lean(prep.skeleton, prep.work_universe))
        try:
            status, _, rounds, sizes, _ = _Search(relaxed, limits).run()
        except _Exhausted as e:
            stats = {"lean": len(prep.lean), "work_lean": len(prep.work_lean), "k": prep.k,
                     "seconds": round(time.monotonic() - t0, 6)}
            return SolveResult(EXHAUSTED, reason=str(e), stats=stats)
        if status == UNSAT:
            stats = {
                "lean": len(prep.lean), "work_lean": len(relaxed.work_lean), "k": prep.k,
                "occurrence_cap": prep.k + 2 if limits.occurrence_cap == "auto" else limits.occurrence_cap,
                "counting": len(prep.constraints),
                "relaxed": True, "st_sizes": sizes, "seconds": round(time.monotonic() - t0, 6),
                "round_bound": _round_bound(len(prep.lean), prep.k),
            }
            return SolveResult(UNSAT, rounds=rounds, stats=stats)
        if limits.timeout is not None:
            limits = dataclasses.replace(limits, timeout=max(0.0, limits.timeout - (time.monotonic() - t0)))
    search = _Search(prep, limits)
    stats = {
        "lean": len(prep.lean),
        "work_lean": len(prep.work_lean),
        "k": prep.k,
        "occurrence_cap": search.cap,
        "counting": len(prep.constraints),
    }
    try:
        status, tree, rounds, sizes, reason = search.run()
    except _Exhausted as e:
        stats["seconds"] = round(time.monotonic() - t0, 6)
        return SolveResult(EXHAUSTED, reason=str(e), stats=stats)
    stats["st_sizes"] = sizes
    stats["seconds"] = round(time.monotonic() - t0, 6)
    stats["round_bound"] = _round_bound(len(prep.lean), prep.k)
    if status == UNSAT:
        return SolveResult(UNSAT, rounds=rounds, stats=stats)
    model = extract_model(tree, prep.work_lean, keep=prep.universe.marks).canonical()
    hits = evaluate(f, model)
    if not hits:
        raise SolverError(f"extracted model does not satisfy the formula: {model.to_json()}")
    witness = min(hits)
    return SolveResult(SAT, model, witness, model.path_of(witness), rounds, None, tree, stats)


def _round_bound(lean_size: int, k: int) -> str:
    # 2^|lean| * (K + 2), kept as text because it is astronomically large
    return f"2^{lean_size}*{k + 2}"


def round_bound(lean_size: int, k: int) -> int:
    return (1 << lean_size) * (k + 2)


# ---------------------------------------------------------------------------
# Bridging concrete models and candidate trees over the annotated lean


def annotate_model(model: TreeModel, annotated: Formula) -> TreeModel:
    """Add counting propositions: ``c`` marks the nodes satisfying the body of
    the counting occurrence tagged ``c``."""
    extra: dict[int, set[str]] = {}
    stack = [annotated]
    seen = set()
    while stack:
        g = stack.pop()
        if g.uid in seen:
            continue
        seen.add(g.uid)
        if g.kind == COUNT and g.tag:
            for n in evaluate(g.body, model):
                extra.setdefault(n, set()).add(g.tag)
        stack.extend(g.args[i] for i in range(len(g.args)) if isinstance(g.args[i], Formula))
    return model.with_marks(extra)


def tree_of_model(lean: Lean, model: TreeModel) -> PsiTree:
    """Candidate tree whose node types are the lean valuations of ``model``."""
    truth = [frozenset(evaluate(g, model)) for g in lean.formulas]

    def build(i: int | None) -> PsiTree | None:
        if i is None:
            return None
        bits = 0
        for j, s in enumerate(truth):
            if i in s:
                bits |= 1 << j
        return PsiTree(bits, build(model.fc[i]), build(model.ns[i]))

    return build(model.root)
