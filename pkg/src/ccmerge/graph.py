"""Dependency analysis and evaluation graphs for code call conditions.

A ccc is evaluable when its conjuncts can be ordered so that every code call
has its argument variables bound by earlier conjuncts.  The graph's edges
record exactly the binding dependencies; its topological sorts coincide with
the orderings accepted by the safety check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

from .lang import (
    CCC,
    Atomic,
    Comparison,
    Conjunct,
    Constant,
    PathVar,
    RootVar,
    conjunct_roots,
    term_root,
)


class CyclicGraphError(Exception):
    pass


@dataclass(frozen=True)
class NotEvaluable:
    """Returned by create_cceg when no safe ordering exists."""

    ccc: CCC
    stuck: tuple[int, ...]  # 0-based conjunct indices that could not be scheduled

    def __bool__(self) -> bool:
        return False

    def describe(self) -> str:
        parts = ", ".join(f"#{i + 1}: {self.ccc[i]}" for i in self.stuck)
        return f"not evaluable; stuck conjuncts {parts}"


@dataclass(frozen=True)
class CCEG:
    """Code call evaluation graph over a ccc's conjuncts (0-based node ids)."""

    ccc: CCC
    edges: frozenset[tuple[int, int]]
    base_vars: frozenset[str]

    @property
    def nodes(self) -> range:
        return range(len(self.ccc))

    def predecessors(self, j: int) -> list[int]:
        return sorted(i for i, k in self.edges if k == j)

    def successors(self, i: int) -> list[int]:
        return sorted(k for h, k in self.edges if h == i)

    def to_dot(self) -> str:
        lines = ["digraph cceg {"]
        for i in self.nodes:
            label = str(self.ccc[i]).replace('"', '\\"')
            lines.append(f'  n{i} [label="{label}"];')
        for i, j in sorted(self.edges):
            lines.append(f"  n{i} -> n{j};")
        lines.append("}")
        return "\n".join(lines)


def _producer_sets(c: CCC) -> list[frozenset[str]]:
    """Roots each conjunct binds.

    An atomic conjunct binds the root of its output variable.  A comparison
    binds a bare root variable side only when no atomic conjunct binds it;
    a comparison over path variables or already-produced roots is a filter.
    """
    atomic_produced: set[str] = set()
    for cj in c.conjuncts:
        if isinstance(cj, Atomic) and isinstance(cj.out, RootVar):
            atomic_produced.add(cj.out.name)
    out: list[frozenset[str]] = []
    for cj in c.conjuncts:
        if isinstance(cj, Atomic):
            prod = frozenset([cj.out.name]) if isinstance(cj.out, RootVar) else frozenset()
        else:
            prod = frozenset(
                t.name
                for t in (cj.lhs, cj.rhs)
                if isinstance(t, RootVar) and t.name not in atomic_produced
            )
        out.append(prod)
    return out


def dependencies(c: CCC) -> frozenset[tuple[int, int]]:
    """Edge (i, j) whenever conjunct j depends on conjunct i (0-based).

    Conjunct j depends on i when i binds a root that j mentions.  For an
    atomic producer the bound set is its single output root, so this matches
    the subset test of the written definition.
    """
    producers = _producer_sets(c)
    edges: set[tuple[int, int]] = set()
    for i, prod in enumerate(producers):
        if not prod:
            continue
        for j, cj in enumerate(c.conjuncts):
            if i == j:
                continue
            if isinstance(cj, Atomic):
                consumed = cj.call.arg_roots() | (
                    {cj.out.root} if isinstance(cj.out, PathVar) else set()
                )
            else:
                consumed = {r for t in (cj.lhs, cj.rhs) if (r := term_root(t)) is not None}
            if prod & consumed:
                edges.add((i, j))
    return frozenset(edges)


def _available(cj: Conjunct, bound: set[str]) -> bool:
    """Safety position check with the given set of already-bound roots."""
    if isinstance(cj, Comparison):
        def side_ok(t) -> bool:
            if isinstance(t, Constant):
                return True
            if term_root(t) in bound:
                return True
            return isinstance(t, RootVar)

        def side_known(t) -> bool:
            return isinstance(t, Constant) or term_root(t) in bound

        return (side_known(cj.lhs) or side_known(cj.rhs)) and side_ok(cj.lhs) and side_ok(cj.rhs)
    if not (cj.call.arg_roots() <= bound):
        return False
    out = cj.out
    if isinstance(out, RootVar) or isinstance(out, Constant):
        return True
    return out.root in bound


def create_cceg(c: CCC, assume_bound: frozenset[str] = frozenset()) -> CCEG | NotEvaluable:
    """Build the evaluation graph, or report the stuck conjuncts.

    assume_bound names roots treated as externally instantiated; invariant
    expressions use this for their base variables.
    """
    dep = dependencies(c)
    n = len(c)
    remaining = set(range(n))
    bound: set[str] = set(assume_bound)
    edges: set[tuple[int, int]] = set()

    layer0 = sorted(i for i in remaining if _available(c[i], bound))
    if not layer0:
        return NotEvaluable(c, tuple(sorted(remaining)))
    for i in layer0:
        for j in layer0:
            if i != j and (i, j) in dep:
                edges.add((i, j))
    for i in layer0:
        bound |= conjunct_roots(c[i])
    processed = list(layer0)
    remaining -= set(layer0)

    while remaining:
        layer = sorted(
            i
            for i in remaining
            if _available(c[i], bound) and any((j, i) in dep for j in processed)
        )
        if not layer:
            return NotEvaluable(c, tuple(sorted(remaining)))
        for i in layer:
            for j in processed:
                if (j, i) in dep:
                    edges.add((j, i))
        for i in layer:
            bound |= conjunct_roots(c[i])
        processed.extend(layer)
        remaining -= set(layer)

    if _has_cycle(n, frozenset(edges)):
        # Duplicate bindings of one root can wire same-layer conjuncts into a
        # cycle; an evaluable graph must be acyclic, so reject the ccc.
        return NotEvaluable(c, tuple(sorted(_cycle_nodes(n, edges))))
    base = frozenset(assume_bound) & _all_roots(c)
    return CCEG(c, frozenset(edges), base)


def _all_roots(c: CCC) -> frozenset[str]:
    out: set[str] = set()
    for cj in c.conjuncts:
        out |= conjunct_roots(cj)
    return frozenset(out)


def is_evaluable(c: CCC, assume_bound: frozenset[str] = frozenset()) -> bool:
    return isinstance(create_cceg(c, assume_bound), CCEG)


def is_safety_witness(c: CCC, order: Sequence[int]) -> bool:
    """Whether evaluating the conjuncts in this 0-based order is safe."""
    n = len(c)
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of the conjunct indices")
    seen_roots: set[str] = set()
    for idx in order:
        cj = c[idx]
        if isinstance(cj, Comparison):
            def known(t) -> bool:
                return isinstance(t, Constant) or term_root(t) in seen_roots

            if not (known(cj.lhs) or known(cj.rhs)):
                return False
            for t in (cj.lhs, cj.rhs):
                if not known(t) and not isinstance(t, RootVar):
                    return False
        else:
            for r in cj.call.arg_roots():
                if r not in seen_roots:
                    return False
            out = cj.out
            if isinstance(out, PathVar) and out.root not in seen_roots:
                return False
        seen_roots |= conjunct_roots(cj)
    return True


def topological_sorts(g: CCEG, limit: int | None = None) -> Iterator[tuple[int, ...]]:
    """Enumerate topological sorts, lexicographically by node id."""
    n = len(g.ccc)
    preds = {j: set(g.predecessors(j)) for j in range(n)}
    if _has_cycle(n, g.edges):
        raise CyclicGraphError("graph has a cycle")
    emitted = 0

    def rec(done: set[int], prefix: list[int]) -> Iterator[tuple[int, ...]]:
        nonlocal emitted
        if limit is not None and emitted >= limit:
            return
        if len(prefix) == n:
            emitted += 1
            yield tuple(prefix)
            return
        for i in range(n):
            if i in done or not (preds[i] <= done):
                continue
            yield from rec(done | {i}, prefix + [i])
            if limit is not None and emitted >= limit:
                return

    yield from rec(set(), [])


def _cycle_nodes(n: int, edges: set[tuple[int, int]]) -> set[int]:
    out: dict[int, list[int]] = {i: [] for i in range(n)}
    indeg = {i: 0 for i in range(n)}
    for a, b in edges:
        out[a].append(b)
        indeg[b] += 1
    queue = [i for i in range(n) if indeg[i] == 0]
    removed = set()
    while queue:
        v = queue.pop()
        removed.add(v)
        for w in out[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    return set(range(n)) - removed


def _has_cycle(n: int, edges: frozenset[tuple[int, int]]) -> bool:
    out: dict[int, list[int]] = {i: [] for i in range(n)}
    indeg = {i: 0 for i in range(n)}
    for a, b in edges:
        out[a].append(b)
        indeg[b] += 1
    queue = [i for i in range(n) if indeg[i] == 0]
    seen = 0
    while queue:
        v = queue.pop()
        seen += 1
        for w in out[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    return seen != n
