"""Finite tree models and the reference evaluator.

Models are binary trees in first-child / next-sibling form.  Node ids follow
preorder of the binary tree, which coincides with document order of the
n-ary tree it encodes.  Every node has exactly one label; internal nominals
and counting propositions live in ``marks`` and may co-occur with a label.

Two evaluators are provided.  :func:`evaluate` works on one model with plain
node sets and is the reading of the semantics used everywhere as ground
truth.  :class:`ShapeEvaluator` evaluates one formula on every labelling of a
fixed tree shape at once (numpy arrays, one row per labelling) and backs the
brute-force oracle; it is cross-checked against :func:`evaluate` in tests.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from tlsat.formula import (
    AND, BOT, COUNT, DIA, FC, GT, MODALITIES, MU, NDIA, NOT, NPROP, NS, OR, PAR,
    PROP, TOP, VAR, Formula, Modality, PropUniverse, TAlt, TAtom, TSeq, Trail,
    free_vars,
)


class EvaluationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Tree models


@dataclass(frozen=True)
class TreeModel:
    labels: tuple[str, ...]
    fc: tuple[int | None, ...]
    ns: tuple[int | None, ...]
    marks: tuple[frozenset[str], ...] = ()
    par: tuple[int | None, ...] = field(init=False, repr=False, compare=False)
    ps: tuple[int | None, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = len(self.labels)
        if not (len(self.fc) == len(self.ns) == n) or n == 0:
            raise ValueError("inconsistent tree arrays")
        if not self.marks:
            object.__setattr__(self, "marks", tuple(frozenset() for _ in range(n)))
        elif len(self.marks) != n:
            raise ValueError("marks must have one entry per node")
        par: list[int | None] = [None] * n
        ps: list[int | None] = [None] * n
        incoming = [0] * n
        for i in range(n):
            for child, back in ((self.fc[i], par), (self.ns[i], ps)):
                if child is None:
                    continue
                if not 0 <= child < n:
                    raise ValueError(f"edge to unknown node {child}")
                back[child] = i
                incoming[child] += 1
        if any(c > 1 for c in incoming):
            raise ValueError("a node has two incoming edges")
        roots = [i for i in range(n) if incoming[i] == 0]
        if len(roots) != 1:
            raise ValueError("tree must have exactly one root")
        seen = set()
        stack = [roots[0]]
        while stack:
            i = stack.pop()
            seen.add(i)
            stack.extend(c for c in (self.fc[i], self.ns[i]) if c is not None)
        if len(seen) != n:
            raise ValueError("tree edges contain a cycle")
        object.__setattr__(self, "par", tuple(par))
        object.__setattr__(self, "ps", tuple(ps))

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def nodes(self) -> range:
        return range(len(self.labels))

    @property
    def root(self) -> int:
        for i in self.nodes:
            if self.par[i] is None and self.ps[i] is None:
                return i
        raise AssertionError  # pragma: no cover

    def step(self, n: int, m: Modality) -> int | None:
        if m is FC:
            return self.fc[n]
        if m is NS:
            return self.ns[n]
        if m is PAR:
            return self.par[n]
        return self.ps[n]

    def holds(self, n: int, p: str) -> bool:
        return self.labels[n] == p or p in self.marks[n]

    def with_marks(self, marks: Mapping[int, Iterable[str]]) -> "TreeModel":
        new = [set(m) for m in self.marks]
        for n, ms in marks.items():
            new[n].update(ms)
        return TreeModel(self.labels, self.fc, self.ns, tuple(frozenset(m) for m in new))

    def path_of(self, n: int) -> tuple[Modality, ...]:
        """Forward modality word leading from the root to ``n``."""
        out: list[Modality] = []
        while True:
            if self.par[n] is not None:
                out.append(FC)
                n = self.par[n]
            elif self.ps[n] is not None:
                out.append(NS)
                n = self.ps[n]
            else:
                return tuple(reversed(out))

    def canonical(self) -> "TreeModel":
        """Renumber nodes in preorder from the root."""
        order: list[int] = []
        stack = [self.root]
        while stack:
            i = stack.pop()
            order.append(i)
            for c in (self.ns[i], self.fc[i]):
                if c is not None:
                    stack.append(c)
        new = {old: new for new, old in enumerate(order)}

        def rn(x: int | None) -> int | None:
            return None if x is None else new[x]

        return TreeModel(
            tuple(self.labels[i] for i in order),
            tuple(rn(self.fc[i]) for i in order),
            tuple(rn(self.ns[i]) for i in order),
            tuple(self.marks[i] for i in order),
        )

    def to_json(self) -> dict:
        t = self.canonical()
        nodes = []
        for i in t.nodes:
            entry: dict = {"id": i, "label": t.labels[i]}
            if t.marks[i]:
                entry["marks"] = sorted(t.marks[i])
            nodes.append(entry)
        edges = []
        for i in t.nodes:
            for m in MODALITIES:
                j = t.step(i, m)
                if j is not None:
                    edges.append({"from": i, "mod": m.value, "to": j})
        edges.sort(key=lambda e: (e["from"], e["mod"], e["to"]))
        return {"nodes": nodes, "edges": edges}

    def dumps(self) -> str:
        """Canonical serialisation used for deduplication and golden files."""
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, data: Mapping) -> "TreeModel":
        nodes = sorted(data["nodes"], key=lambda d: d["id"])
        index = {d["id"]: i for i, d in enumerate(nodes)}
        n = len(nodes)
        fc: list[int | None] = [None] * n
        ns: list[int | None] = [None] * n
        for e in data["edges"]:
            a, b = index[e["from"]], index[e["to"]]
            if e["mod"] == "fc":
                fc[a] = b
            elif e["mod"] == "ns":
                ns[a] = b
        return cls(
            tuple(d["label"] for d in nodes),
            tuple(fc),
            tuple(ns),
            tuple(frozenset(d.get("marks", ())) for d in nodes),
        )

    def to_dot(self) -> str:
        t = self.canonical()
        lines = ["digraph tree {", "  node [shape=box];"]
        for i in t.nodes:
            text = t.labels[i]
            if t.marks[i]:
                text += " {" + ",".join(sorted(t.marks[i])) + "}"
            lines.append(f'  n{i} [label="{_dot_escape(text)}"];')
        for i in t.nodes:
            if t.fc[i] is not None:
                lines.append(f'  n{i} -> n{t.fc[i]} [label="fc"];')
            if t.ns[i] is not None:
                lines.append(f'  n{i} -> n{t.ns[i]} [label="ns", style=dashed];')
        lines.append("}")
        return "\n".join(lines)


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def single_node(label: str) -> TreeModel:
    return TreeModel((label,), (None,), (None,))


# ---------------------------------------------------------------------------
# n-ary trees: (label, (child, child, ...))

NaryTree = tuple  # (label, tuple_of_children)


def encode_nary(t: NaryTree) -> TreeModel:
    labels: list[str] = []
    fc: list[int | None] = []
    ns: list[int | None] = []

    def visit(node: NaryTree) -> int:
        i = len(labels)
        labels.append(node[0])
        fc.append(None)
        ns.append(None)
        prev: int | None = None
        for child in node[1]:
            j = visit(child)
            if prev is None:
                fc[i] = j
            else:
                ns[prev] = j
            prev = j
        return i

    visit(t)
    return TreeModel(tuple(labels), tuple(fc), tuple(ns))


def decode_nary(t: TreeModel, node: int | None = None) -> NaryTree:
    """Inverse of :func:`encode_nary`; the root must have no next sibling."""
    if node is None:
        node = t.root
        if t.ns[node] is not None:
            raise ValueError("root has a next sibling: the model encodes a hedge")
    kids = []
    c = t.fc[node]
    while c is not None:
        kids.append(decode_nary(t, c))
        c = t.ns[c]
    return (t.labels[node], tuple(kids))


def nary_size(t: NaryTree) -> int:
    return 1 + sum(nary_size(c) for c in t[1])


# ---------------------------------------------------------------------------
# Trail automata (Glushkov construction, then subset construction)


@dataclass(frozen=True)
class TrailAutomaton:
    start: int
    accepting: frozenset[int]
    delta: Mapping[tuple[int, Modality], tuple[int, ...]]
    states: int
    deterministic: bool

    def step(self, q: int, m: Modality) -> tuple[int, ...]:
        return self.delta.get((q, m), ())

    def accepts(self, word: Sequence[Modality]) -> bool:
        current = {self.start}
        for m in word:
            current = {r for q in current for r in self.step(q, m)}
            if not current:
                return False
        return bool(current & self.accepting)


_DFA_LIMIT = 64


@lru_cache(maxsize=None)
def compile_trail(t: Trail) -> TrailAutomaton:
    atoms: list[Modality] = []
    follow: dict[int, set[int]] = {}

    def build(x: Trail) -> tuple[bool, set[int], set[int]]:
        if isinstance(x, TAtom):
            atoms.append(x.mod)
            p = len(atoms)
            follow[p] = set()
            return False, {p}, {p}
        if isinstance(x, TSeq):
            n1, f1, l1 = build(x.left)
            n2, f2, l2 = build(x.right)
            for p in l1:
                follow[p] |= f2
            return n1 and n2, f1 | (f2 if n1 else set()), l2 | (l1 if n2 else set())
        if isinstance(x, TAlt):
            n1, f1, l1 = build(x.left)
            n2, f2, l2 = build(x.right)
            return n1 or n2, f1 | f2, l1 | l2
        n1, f1, l1 = build(x.body)
        for p in l1:
            follow[p] |= f1
        return True, f1, l1

    nullable, first, last = build(t)
    succ: dict[int, set[int]] = {0: first}
    succ.update(follow)
    accepting = set(last) | ({0} if nullable else set())
    nstates = len(atoms) + 1

    if nstates > _DFA_LIMIT:
        delta: dict[tuple[int, Modality], tuple[int, ...]] = {}
        for q, targets in succ.items():
            by_mod: dict[Modality, list[int]] = {}
            for r in sorted(targets):
                by_mod.setdefault(atoms[r - 1], []).append(r)
            for m, rs in by_mod.items():
                delta[(q, m)] = tuple(rs)
        return TrailAutomaton(0, frozenset(accepting), delta, nstates, False)

    start = frozenset({0})
    index = {start: 0}
    queue = [start]
    dfa: dict[tuple[int, Modality], tuple[int, ...]] = {}
    acc: set[int] = set()
    while queue:
        s = queue.pop(0)
        i = index[s]
        if s & accepting:
            acc.add(i)
        for m in MODALITIES:
            nxt = frozenset(r for q in s for r in succ[q] if atoms[r - 1] is m)
            if not nxt:
                continue
            if nxt not in index:
                index[nxt] = len(index)
                queue.append(nxt)
            dfa[(i, m)] = (index[nxt],)
    return TrailAutomaton(0, frozenset(acc), dfa, len(index), True)


def trail_nodes(t: TreeModel, n: int, a: TrailAutomaton | Trail) -> frozenset[int]:
    """Nodes reachable from ``n`` by a word of the trail (each node once)."""
    if not isinstance(a, TrailAutomaton):
        a = compile_trail(a)
    seen = {(n, a.start)}
    frontier = [(n, a.start)]
    out = set()
    while frontier:
        node, q = frontier.pop()
        if q in a.accepting:
            out.add(node)
        for m in MODALITIES:
            nxt = t.step(node, m)
            if nxt is None:
                continue
            for r in a.step(q, m):
                if (nxt, r) not in seen:
                    seen.add((nxt, r))
                    frontier.append((nxt, r))
    return frozenset(out)


# ---------------------------------------------------------------------------
# Reference evaluator


def evaluate(f: Formula, t: TreeModel, valuation: Mapping[str, frozenset[int]] | None = None) -> frozenset[int]:
    """Node set denoted by ``f`` on ``t``.

    ``~g`` is read as complement, which is only meaningful when ``g`` has no
    free fixpoint variables; counting tags are ignored.
    """
    env = dict(valuation or {})
    everything = frozenset(t.nodes)
    closed_memo: dict[int, frozenset[int]] = {}
    reach_memo: dict[Trail, list[frozenset[int]]] = {}
    fv_memo: dict[int, bool] = {}

    def closed(g: Formula) -> bool:
        r = fv_memo.get(g.uid)
        if r is None:
            r = not free_vars(g)
            fv_memo[g.uid] = r
        return r

    def reach(tr: Trail) -> list[frozenset[int]]:
        r = reach_memo.get(tr)
        if r is None:
            a = compile_trail(tr)
            r = [trail_nodes(t, n, a) for n in t.nodes]
            reach_memo[tr] = r
        return r

    def go(g: Formula, env: dict[str, frozenset[int]]) -> frozenset[int]:
        is_closed = closed(g)
        if is_closed and g.uid in closed_memo:
            return closed_memo[g.uid]
        k = g.kind
        if k == TOP:
            r = everything
        elif k == BOT:
            r = frozenset()
        elif k == PROP:
            r = frozenset(n for n in t.nodes if t.holds(n, g.name))
        elif k == NPROP:
            r = frozenset(n for n in t.nodes if not t.holds(n, g.name))
        elif k == VAR:
            if g.name not in env:
                raise EvaluationError(f"unbound variable {g.name}")
            r = env[g.name]
        elif k == AND:
            r = go(g.left, env) & go(g.right, env)
        elif k == OR:
            r = go(g.left, env) | go(g.right, env)
        elif k == NOT:
            r = everything - go(g.left, env)
        elif k == DIA:
            inner = go(g.body, env)
            r = frozenset(n for n in t.nodes if t.step(n, g.mod) in inner)
        elif k == NDIA:
            r = frozenset(n for n in t.nodes if t.step(n, g.mod) is None)
        elif k == MU:
            current: frozenset[int] = frozenset()
            while True:
                env2 = dict(env)
                env2[g.var] = current
                nxt = go(g.body, env2)
                if nxt == current:
                    break
                current = nxt
            r = current
        elif k == COUNT:
            inner = go(g.body, env)
            rs = reach(g.trail)
            if g.cmp == GT:
                r = frozenset(n for n in t.nodes if len(rs[n] & inner) > g.k)
            else:
                r = frozenset(n for n in t.nodes if len(rs[n] & inner) <= g.k)
        else:  # pragma: no cover
            raise EvaluationError(f"unknown formula kind {k}")
        if is_closed:
            closed_memo[g.uid] = r
        return r

    return go(f, env)


def holds_at(f: Formula, t: TreeModel, n: int) -> bool:
    return n in evaluate(f, t)


# ---------------------------------------------------------------------------
# Enumeration


Shape = tuple  # (fc_shape | None, ns_shape | None)


@lru_cache(maxsize=None)
def binary_shapes(size: int) -> tuple[Shape, ...]:
    """All binary tree shapes with ``size`` nodes, in a fixed order."""
    if size == 0:
        return (None,)
    out = []
    for left in range(size):
        for a in binary_shapes(left):
            for b in binary_shapes(size - 1 - left):
                out.append((a, b))
    return tuple(out)


@lru_cache(maxsize=None)
def tree_shapes(size: int) -> tuple[Shape, ...]:
    """Shapes of ``size`` nodes whose root has no next sibling."""
    return tuple((a, None) for a in binary_shapes(size - 1))


@lru_cache(maxsize=None)
def shape_arrays(shape: Shape) -> tuple[tuple[int | None, ...], tuple[int | None, ...]]:
    fc: list[int | None] = []
    ns: list[int | None] = []

    def visit(s: Shape) -> int:
        i = len(fc)
        fc.append(None)
        ns.append(None)
        a, b = s
        if a is not None:
            fc[i] = visit(a)
        if b is not None:
            ns[i] = visit(b)
        return i

    visit(shape)
    return tuple(fc), tuple(ns)


def _node_choices(labels: Sequence[str], marks: Sequence[str]) -> list[tuple[str, frozenset[str]]]:
    subsets = [
        frozenset(c) for r in range(len(marks) + 1) for c in itertools.combinations(marks, r)
    ]
    return [(lab, ms) for lab in labels for ms in subsets]


def _labels_of(u: PropUniverse | Sequence[str]) -> tuple[tuple[str, ...], tuple[str, ...]]:
    if isinstance(u, PropUniverse):
        return u.labels, u.marks
    return tuple(u), ()


def enumerate_trees(
    u: PropUniverse | Sequence[str], max_nodes: int, marks: Sequence[str] | None = None
) -> Iterator[TreeModel]:
    """Every labelled tree with at most ``max_nodes`` nodes, smallest first.

    Labels come from the universe (its propositions plus the extra label);
    each node may additionally carry any subset of the universe's marks.
    """
    if max_nodes < 1:
        raise ValueError("max_nodes must be at least 1")
    labels, umarks = _labels_of(u)
    ms = tuple(marks) if marks is not None else umarks
    choices = _node_choices(labels, ms)
    for size in range(1, max_nodes + 1):
        for shape in tree_shapes(size):
            fc, ns = shape_arrays(shape)
            for combo in itertools.product(choices, repeat=size):
                yield TreeModel(
                    tuple(c[0] for c in combo), fc, ns, tuple(c[1] for c in combo)
                )


def count_trees(n_choices: int, max_nodes: int) -> int:
    return sum(len(tree_shapes(s)) * n_choices**s for s in range(1, max_nodes + 1))


# ---------------------------------------------------------------------------
# Batched evaluation over all labellings of one shape


class ShapeEvaluator:
    """Evaluate formulas on every labelling of one tree shape at once.

    Rows of the arrays are labellings (in :func:`itertools.product` order over
    the node choices), columns are nodes.
    """

    def __init__(self, fc: Sequence[int | None], ns: Sequence[int | None],
                 choices: Sequence[tuple[str, frozenset[str]]]):
        self.size = n = len(fc)
        probe = TreeModel(tuple("x" for _ in fc), tuple(fc), tuple(ns))
        self.tree = probe
        self.choices = list(choices)
        grid = np.array(list(itertools.product(range(len(choices)), repeat=n)), dtype=np.int16)
        self.grid = grid.reshape(-1, n)
        self.rows = self.grid.shape[0]
        self._prop_cache: dict[str, np.ndarray] = {}
        self._step = {}
        for m in MODALITIES:
            idx = np.array([n if probe.step(i, m) is None else probe.step(i, m) for i in range(n)])
            self._step[m] = idx
        self._reach: dict[Trail, np.ndarray] = {}

    def prop(self, name: str) -> np.ndarray:
        r = self._prop_cache.get(name)
        if r is None:
            table = np.array([c[0] == name or name in c[1] for c in self.choices], dtype=bool)
            r = table[self.grid]
            self._prop_cache[name] = r
        return r

    def reach(self, tr: Trail) -> np.ndarray:
        r = self._reach.get(tr)
        if r is None:
            a = compile_trail(tr)
            r = np.zeros((self.size, self.size), dtype=np.int32)
            for i in range(self.size):
                for j in trail_nodes(self.tree, i, a):
                    r[i, j] = 1
            self._reach[tr] = r
        return r

    def evaluate(self, f: Formula) -> np.ndarray:
        rows, n = self.rows, self.size
        memo: dict[int, np.ndarray] = {}
        fv: dict[int, bool] = {}

        def closed(g: Formula) -> bool:
            r = fv.get(g.uid)
            if r is None:
                r = not free_vars(g)
                fv[g.uid] = r
            return r

        def shift(s: np.ndarray, m: Modality) -> np.ndarray:
            padded = np.concatenate([s, np.zeros((rows, 1), dtype=bool)], axis=1)
            return padded[:, self._step[m]]

        def go(g: Formula, env: dict[str, np.ndarray]) -> np.ndarray:
            c = closed(g)
            if c and g.uid in memo:
                return memo[g.uid]
            k = g.kind
            if k == TOP:
                r = np.ones((rows, n), dtype=bool)
            elif k == BOT:
                r = np.zeros((rows, n), dtype=bool)
            elif k == PROP:
                r = self.prop(g.name)
            elif k == NPROP:
                r = ~self.prop(g.name)
            elif k == VAR:
                if g.name not in env:
                    raise EvaluationError(f"unbound variable {g.name}")
                r = env[g.name]
            elif k == AND:
                r = go(g.left, env) & go(g.right, env)
            elif k == OR:
                r = go(g.left, env) | go(g.right, env)
            elif k == NOT:
                r = ~go(g.left, env)
            elif k == DIA:
                r = shift(go(g.body, env), g.mod)
            elif k == NDIA:
                col = self._step[g.mod] == n
                r = np.broadcast_to(col, (rows, n)).copy()
            elif k == MU:
                cur = np.zeros((rows, n), dtype=bool)
                while True:
                    env2 = dict(env)
                    env2[g.var] = cur
                    nxt = go(g.body, env2)
                    if np.array_equal(nxt, cur):
                        break
                    cur = nxt
                r = cur
            elif k == COUNT:
                inner = go(g.body, env).astype(np.int32)
                counts = inner @ self.reach(g.trail).T
                r = counts > g.k if g.cmp == GT else counts <= g.k
            else:  # pragma: no cover
                raise EvaluationError(f"unknown formula kind {k}")
            if c:
                memo[g.uid] = r
            return r

        return go(f, {})

    def model(self, row: int) -> TreeModel:
        combo = [self.choices[c] for c in self.grid[row]]
        return TreeModel(
            tuple(c[0] for c in combo), self.tree.fc, self.tree.ns, tuple(c[1] for c in combo)
        )


@lru_cache(maxsize=256)
def _shape_evaluator(shape: Shape, choices: tuple) -> ShapeEvaluator:
    fc, ns = shape_arrays(shape)
    return ShapeEvaluator(fc, ns, choices)


def iter_shape_evaluators(u: PropUniverse | Sequence[str], max_nodes: int,
                          marks: Sequence[str] | None = None) -> Iterator[ShapeEvaluator]:
    labels, umarks = _labels_of(u)
    ms = tuple(marks) if marks is not None else umarks
    choices = tuple(_node_choices(labels, ms))
    for size in range(1, max_nodes + 1):
        for shape in tree_shapes(size):
            yield _shape_evaluator(shape, choices)


def oracle_sat(f: Formula, u: PropUniverse | Sequence[str], max_nodes: int,
               marks: Sequence[str] | None = None) -> TreeModel | None:
    """First tree in enumeration order on which ``f`` holds somewhere.

    ``None`` only means there is no model within the bound.
    """
    for ev in iter_shape_evaluators(u, max_nodes, marks):
        hits = ev.evaluate(f).any(axis=1)
        if hits.any():
            return ev.model(int(np.argmax(hits)))
    return None


def oracle_valid_equivalence(f: Formula, g: Formula, u: PropUniverse | Sequence[str],
                             max_nodes: int, marks: Sequence[str] | None = None) -> TreeModel | None:
    """A tree (within the bound) on which ``f`` and ``g`` denote different
    node sets, or ``None``."""
    for ev in iter_shape_evaluators(u, max_nodes, marks):
        diff = (ev.evaluate(f) != ev.evaluate(g)).any(axis=1)
        if diff.any():
            return ev.model(int(np.argmax(diff)))
    return None
