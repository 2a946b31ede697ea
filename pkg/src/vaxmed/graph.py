"""Causal DAGs, d-separation and graphical checks for natural direct effects.

Node identifiers are case-sensitive strings. Subscripted symbols are spelled
without the subscript marker, e.g. ``H1``, ``H2``, ``BM``, ``BSC``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .exceptions import GraphError

Edge = tuple[str, str]

HOLDS = "holds-graphically"
VIOLATED = "violated"
UNDECIDABLE = "not-decidable-graphically"


@dataclass(frozen=True)
class CausalDag:
    """Immutable directed graph over named nodes.

    Acyclicity is not enforced on construction so that :func:`validate` can
    report a cycle witness; every query that needs a topological order raises
    :class:`GraphError` on a cyclic graph.
    """

    nodes: frozenset[str]
    edges: frozenset[Edge]
    _parents: dict = field(init=False, repr=False, compare=False, hash=False)
    _children: dict = field(init=False, repr=False, compare=False, hash=False)

    def __init__(self, nodes: Iterable[str] = (), edges: Iterable[Edge] = ()):
        edge_list = [tuple(e) for e in edges]
        node_set = frozenset(nodes)
        seen = set()
        for edge in edge_list:
            if len(edge) != 2:
                raise GraphError(f"edge {edge!r} is not a (parent, child) pair")
            u, v = edge
            if u not in node_set or v not in node_set:
                raise GraphError(f"edge {u}->{v} uses an undeclared node")
            if u == v:
                raise GraphError(f"self-loop on {u}")
            if edge in seen:
                raise GraphError(f"duplicate edge {u}->{v}")
            seen.add(edge)
        object.__setattr__(self, "nodes", node_set)
        object.__setattr__(self, "edges", frozenset(seen))
        parents = {n: set() for n in node_set}
        children = {n: set() for n in node_set}
        for u, v in seen:
            parents[v].add(u)
            children[u].add(v)
        object.__setattr__(self, "_parents", {n: frozenset(p) for n, p in parents.items()})
        object.__setattr__(self, "_children", {n: frozenset(c) for n, c in children.items()})

    @classmethod
    def from_edges(cls, edges: Iterable[Edge], nodes: Iterable[str] = ()) -> "CausalDag":
        """Build a graph whose node set is ``nodes`` plus every edge endpoint."""
        edges = [tuple(e) for e in edges]
        all_nodes = set(nodes)
        for u, v in edges:
            all_nodes.update((u, v))
        return cls(all_nodes, edges)

    def parents(self, node: str) -> frozenset[str]:
        self._check(node)
        return self._parents[node]

    def children(self, node: str) -> frozenset[str]:
        self._check(node)
        return self._children[node]

    def ancestors(self, nodes: str | Iterable[str]) -> set[str]:
        """Ancestors of ``nodes``, the nodes themselves included."""
        return self._closure(nodes, self._parents)

    def descendants(self, nodes: str | Iterable[str]) -> set[str]:
        """Descendants of ``nodes``, the nodes themselves included."""
        return self._closure(nodes, self._children)

    def topological_order(self) -> list[str]:
        result = validate(self)
        if not result.valid:
            raise GraphError(f"graph has a cycle: {' -> '.join(result.cycle)}")
        return result.order

    def _closure(self, nodes, step) -> set[str]:
        start = [nodes] if isinstance(nodes, str) else list(nodes)
        for n in start:
            self._check(n)
        out = set(start)
        stack = list(start)
        while stack:
            for nxt in step[stack.pop()]:
                if nxt not in out:
                    out.add(nxt)
                    stack.append(nxt)
        return out

    def _check(self, node: str) -> None:
        if node not in self.nodes:
            raise GraphError(f"unknown node {node!r}")

    def __repr__(self) -> str:
        edges = ", ".join(f"{u}->{v}" for u, v in sorted(self.edges))
        return f"CausalDag(nodes={sorted(self.nodes)}, edges=[{edges}])"


@dataclass(frozen=True)
class ValidationResult:
    valid: bool
    cycle: tuple[str, ...] | None = None
    order: list[str] | None = None

    def __bool__(self) -> bool:
        return self.valid


def validate(dag: CausalDag) -> ValidationResult:
    """Check acyclicity; on failure the result carries a closed cycle, e.g. ``(A, B, A)``."""
    indegree = {n: len(dag._parents[n]) for n in dag.nodes}
    queue = deque(sorted(n for n, d in indegree.items() if d == 0))
    order = []
    while queue:
        n = queue.popleft()
        order.append(n)
        for c in sorted(dag._children[n]):
            indegree[c] -= 1
            if indegree[c] == 0:
                queue.append(c)
    if len(order) == len(dag.nodes):
        return ValidationResult(True, order=order)
    return ValidationResult(False, cycle=_find_cycle(dag, {n for n, d in indegree.items() if d > 0}))


def _find_cycle(dag: CausalDag, remaining: set[str]) -> tuple[str, ...]:
    # every node left after Kahn's pass has a parent that is also left
    node = min(remaining)
    path, index = [], {}
    while node not in index:
        index[node] = len(path)
        path.append(node)
        node = min(p for p in dag._parents[node] if p in remaining)
    cycle = path[index[node]:] + [node]
    return tuple(reversed(cycle))


def remove_edges(dag: CausalDag, edges: Iterable[Edge]) -> CausalDag:
    """Return a copy of ``dag`` without ``edges``; every edge must exist."""
    drop = {tuple(e) for e in edges}
    missing = drop - dag.edges
    if missing:
        shown = ", ".join(f"{u}->{v}" for u, v in sorted(missing))
        raise GraphError(f"cannot remove nonexistent edge(s): {shown}")
    return CausalDag(dag.nodes, dag.edges - drop)


def add_edges(dag: CausalDag, edges: Iterable[Edge], nodes: Iterable[str] = ()) -> CausalDag:
    return CausalDag(dag.nodes | set(nodes), set(dag.edges) | {tuple(e) for e in edges})


def outgoing(dag: CausalDag, node: str) -> set[Edge]:
    return {(node, c) for c in dag.children(node)}


def d_separated(dag: CausalDag, x: str, y: str, z: Iterable[str] = ()) -> bool:
    """True iff every path between ``x`` and ``y`` is blocked by ``z``.

    Uses the reachability ("Bayes ball") traversal: a trail may pass a
    non-collider only if it is unobserved, and a collider only if it or one of
    its descendants is in ``z``.
    """
    z = set(z)
    for n in (x, y, *z):
        dag._check(n)
    if x == y:
        raise GraphError("x and y must differ")
    if x in z or y in z:
        raise GraphError("x and y must not be in the conditioning set")
    dag.topological_order()
    return y not in _reachable(dag, x, z)


def _reachable(dag: CausalDag, x: str, z: set[str]) -> set[str]:
    anc_z = dag.ancestors(z) if z else set()
    up, down = "up", "down"
    visited = set()
    reached = set()
    queue = deque([(x, up)])
    while queue:
        node, direction = queue.popleft()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node not in z:
            reached.add(node)
        if direction == up and node not in z:
            queue.extend((p, up) for p in dag._parents[node])
            queue.extend((c, down) for c in dag._children[node])
        elif direction == down:
            if node not in z:
                queue.extend((c, down) for c in dag._children[node])
            if node in anc_z:
                queue.extend((p, up) for p in dag._parents[node])
    return reached


def iter_paths(dag: CausalDag, x: str, y: str) -> Iterator[list[str]]:
    """All simple paths between ``x`` and ``y``, ignoring edge direction (DFS)."""
    neighbours = {n: dag._parents[n] | dag._children[n] for n in dag.nodes}

    def walk(path, seen):
        node = path[-1]
        if node == y:
            yield list(path)
            return
        for nxt in sorted(neighbours[node]):
            if nxt not in seen:
                seen.add(nxt)
                path.append(nxt)
                yield from walk(path, seen)
                path.pop()
                seen.discard(nxt)

    yield from walk([x], {x})


def is_open_path(dag: CausalDag, path: list[str], z: Iterable[str]) -> bool:
    z = set(z)
    for prev, mid, nxt in zip(path, path[1:], path[2:]):
        collider = (prev, mid) in dag.edges and (nxt, mid) in dag.edges
        if collider:
            if not (dag.descendants(mid) & z):
                return False
        elif mid in z:
            return False
    return True


def find_open_path(dag: CausalDag, x: str, y: str, z: Iterable[str] = ()) -> list[str] | None:
    """An unblocked path from ``x`` to ``y`` given ``z``, or None."""
    z = set(z)
    for path in iter_paths(dag, x, y):
        if is_open_path(dag, path, z):
            return path
    return None


def directed_paths(dag: CausalDag, source: str, target: str) -> Iterator[list[str]]:
    def walk(path):
        node = path[-1]
        if node == target:
            yield list(path)
            return
        for c in sorted(dag._children[node]):
            if c not in path:
                path.append(c)
                yield from walk(path)
                path.pop()

    dag._check(source)
    dag._check(target)
    yield from walk([source])


def find_exposure_induced_confounders(dag: CausalDag, a: str, b: str, y: str) -> set[str]:
    """Descendants of ``a`` that cause ``b`` and reach ``y`` without passing through ``b``."""
    if len({a, b, y}) != 3:
        raise GraphError("a, b and y must be distinct")
    desc_a = dag.descendants(a)
    anc_b = dag.ancestors(b)
    without_b = CausalDag(dag.nodes - {b}, {e for e in dag.edges if b not in e})
    anc_y = without_b.ancestors(y)
    return (desc_a & anc_b & anc_y) - {a, b, y}


@dataclass(frozen=True)
class AssumptionVerdict:
    verdict: str
    witness: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.verdict == VIOLATED and not self.witness:
            raise ValueError("a violated verdict needs a witness")

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    def __str__(self) -> str:
        if self.witness:
            return f"{self.verdict} [{' '.join(self.witness)}]"
        return self.verdict


@dataclass(frozen=True)
class AssumptionReport:
    """Verdicts for the four identification assumptions, keyed 1..4."""

    verdicts: dict[int, AssumptionVerdict]

    def __post_init__(self):
        if sorted(self.verdicts) != [1, 2, 3, 4]:
            raise ValueError("an assumption report has exactly four entries")

    def __getitem__(self, key: int) -> AssumptionVerdict:
        return self.verdicts[key]

    @property
    def all_hold(self) -> bool:
        return all(v.holds for v in self.verdicts.values())

    def summary(self) -> str:
        return "; ".join(f"A{k}={self.verdicts[k]}" for k in sorted(self.verdicts))


def check_nde_assumptions(
    dag: CausalDag, a: str, b: str, y: str, l: Iterable[str] = ()
) -> AssumptionReport:
    """Graphical verdicts on the four assumptions identifying the NDE.

    Assumptions 1-3 are read off d-separation statements in graphs with the
    outgoing edges of the exposure (1, 3) or mediator (2) removed. The
    cross-world assumption 4 is decided under independent exogenous noise: it
    fails exactly when an exposure-induced mediator-outcome confounder exists.
    """
    l = set(l)
    if len({a, b, y}) != 3 or l & {a, b, y}:
        raise GraphError("exposure, mediator, outcome and adjustment set must not overlap")
    for n in (a, b, y, *l):
        dag._check(n)

    def verdict(graph, u, v, cond):
        path = find_open_path(graph, u, v, cond)
        if path is None:
            return AssumptionVerdict(HOLDS)
        return AssumptionVerdict(VIOLATED, tuple(path))

    no_a_out = remove_edges(dag, outgoing(dag, a))
    no_b_out = remove_edges(dag, outgoing(dag, b))
    verdicts = {
        1: verdict(no_a_out, a, y, l),
        2: verdict(no_b_out, b, y, l | {a}),
        3: verdict(no_a_out, a, b, l),
    }
    confounders = find_exposure_induced_confounders(dag, a, b, y)
    if confounders:
        verdicts[4] = AssumptionVerdict(VIOLATED, tuple(sorted(confounders)))
    elif l & (dag.descendants(a) - {a}):
        verdicts[4] = AssumptionVerdict(UNDECIDABLE, tuple(sorted(l & dag.descendants(a))))
    else:
        verdicts[4] = AssumptionVerdict(HOLDS)
    return AssumptionReport(verdicts)


def post_exposure_nodes(dag: CausalDag, a: str, cond: Iterable[str]) -> set[str]:
    """Members of ``cond`` that are descendants of ``a``; conditioning on them can open collider paths."""
    return set(cond) & (dag.descendants(a) - {a})
