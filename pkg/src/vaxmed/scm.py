"""Discrete structural causal models with explicit, finite exogenous noise.

Every node owns an independent noise variable with finite support and a
deterministic response table ``(parent values, noise atom) -> value``. Sharing
the noise draw across interventions gives cross-world counterfactuals such as
``Y^{A=1, B=B^{A=0}}``, and summing over all noise atoms gives exact
expectations.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np
import pandas as pd

from .data import Dataset
from .exceptions import CapacityError, InputError
from .graph import CausalDag

DEFAULT_CAP = 10**7
MAX_INDEPENDENT_ATOMS = 4096
_CHUNK = 1 << 18
_ROUND = 12


@dataclass(frozen=True, eq=False)
class NodeSpec:
    """Response table of a single node.

    ``table`` has one axis per parent (indexed by position in that parent's
    support) followed by one axis over noise atoms; entries are node values.
    """

    name: str
    parents: tuple[str, ...]
    support: tuple[int, ...]
    noise_probs: np.ndarray
    table: np.ndarray
    parent_supports: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        probs = np.asarray(self.noise_probs, dtype=float)
        table = np.asarray(self.table, dtype=np.int64)
        object.__setattr__(self, "noise_probs", probs)
        object.__setattr__(self, "table", table)
        probs.setflags(write=False)
        table.setflags(write=False)
        if len(set(self.support)) != len(self.support) or not self.support:
            raise InputError(f"{self.name}: support must be non-empty and distinct")
        if probs.ndim != 1 or len(probs) == 0:
            raise InputError(f"{self.name}: noise needs at least one atom")
        if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-12:
            raise InputError(f"{self.name}: noise probabilities must be nonnegative and sum to 1")
        expected = tuple(len(s) for s in self.parent_supports) + (len(probs),)
        if len(self.parent_supports) != len(self.parents) or table.shape != expected:
            raise InputError(f"{self.name}: response table has shape {table.shape}, expected {expected}")
        if not np.isin(table, self.support).all():
            raise InputError(f"{self.name}: response table produces values outside the support")

    @property
    def n_atoms(self) -> int:
        return len(self.noise_probs)

    def response(self, parent_values: Mapping[str, int], atom: int) -> int:
        idx = tuple(self.parent_supports[i].index(parent_values[p]) for i, p in enumerate(self.parents))
        return int(self.table[idx + (atom,)])

    def __eq__(self, other):
        if not isinstance(other, NodeSpec):
            return NotImplemented
        return (
            self.name == other.name
            and self.parents == other.parents
            and self.support == other.support
            and self.parent_supports == other.parent_supports
            and np.array_equal(self.noise_probs, other.noise_probs)
            and np.array_equal(self.table, other.table)
        )

    __hash__ = object.__hash__


def _parent_configs(parent_supports):
    return list(itertools.product(*parent_supports))


def _config_key(key, n_parents):
    if n_parents == 0 and key in ((), None):
        return ()
    if not isinstance(key, tuple):
        key = (key,)
    return tuple(int(k) for k in key)


def cpt_node(
    name: str,
    parents: Sequence[str],
    probs,
    support: Sequence[int] = (0, 1),
    coupling: str = "monotone",
    parent_supports: Mapping[str, Sequence[int]] | None = None,
) -> NodeSpec:
    """Node with a conditional probability table, realised as exogenous noise.

    ``probs`` maps each parent configuration (a tuple, or a bare value for a
    single parent) to a probability vector over ``support``; a root node may
    pass the vector directly.

    ``coupling="monotone"`` uses one uniform variable cut at the cumulative
    probabilities of every configuration (no defiers). ``"independent"``
    draws each configuration's value independently.
    """
    parents = tuple(parents)
    support = tuple(int(s) for s in support)
    psup = tuple(tuple(int(v) for v in (parent_supports or {}).get(p, (0, 1))) for p in parents)
    configs = _parent_configs(psup)
    if not parents and not isinstance(probs, Mapping):
        probs = {(): probs}
    table_probs = {}
    for key, vec in probs.items():
        table_probs[_config_key(key, len(parents))] = np.asarray(vec, dtype=float)
    missing = [c for c in configs if c not in table_probs]
    if missing:
        raise InputError(f"{name}: no probabilities for parent configuration(s) {missing}")
    extra = set(table_probs) - set(configs)
    if extra:
        raise InputError(f"{name}: probabilities given for unknown configuration(s) {sorted(extra)}")
    for c, vec in table_probs.items():
        if vec.shape != (len(support),) or (vec < 0).any() or abs(vec.sum() - 1) > 1e-12:
            raise InputError(f"{name}: probabilities at {c} must be a distribution over {support}")

    shape = tuple(len(s) for s in psup)
    if coupling == "monotone":
        cuts = set()
        for vec in table_probs.values():
            cuts.update(round(float(c), _ROUND) for c in np.cumsum(vec)[:-1])
        edges = [0.0] + sorted(c for c in cuts if 0.0 < c < 1.0) + [1.0]
        widths = np.diff(edges)
        table = np.empty(shape + (len(widths),), dtype=np.int64)
        for c in configs:
            cum = np.round(np.cumsum(table_probs[c]), _ROUND)
            cum[-1] = 1.0
            idx = tuple(psup[i].index(v) for i, v in enumerate(c))
            for k, hi in enumerate(edges[1:]):
                table[idx + (k,)] = support[int(np.searchsorted(cum, hi - 1e-15))]
        keep = widths > 0
        return NodeSpec(name, parents, support, widths[keep], table[..., keep], psup)
    if coupling == "independent":
        per_config = [np.flatnonzero(table_probs[c] > 0) for c in configs]
        n_atoms = math.prod(len(p) for p in per_config)
        if n_atoms > MAX_INDEPENDENT_ATOMS:
            raise CapacityError(f"{name}: independent coupling needs {n_atoms} noise atoms")
        atoms = list(itertools.product(*per_config))
        weights = np.array([math.prod(table_probs[c][i] for c, i in zip(configs, atom)) for atom in atoms])
        table = np.empty(shape + (len(atoms),), dtype=np.int64)
        for ci, c in enumerate(configs):
            idx = tuple(psup[i].index(v) for i, v in enumerate(c))
            for k, atom in enumerate(atoms):
                table[idx + (k,)] = support[atom[ci]]
        return NodeSpec(name, parents, support, weights / weights.sum(), table, psup)
    raise InputError(f"{name}: unknown coupling {coupling!r}")


def bernoulli_node(
    name: str,
    parents: Sequence[str] = (),
    p=0.5,
    coupling: str = "monotone",
    parent_supports: Mapping[str, Sequence[int]] | None = None,
) -> NodeSpec:
    """Binary node with ``Pr(node = 1 | parents) = p[config]``."""
    if not isinstance(p, Mapping):
        if parents:
            raise InputError(f"{name}: give one probability per parent configuration")
        p = {(): p}
    probs = {k: (1.0 - float(v), float(v)) for k, v in p.items()}
    return cpt_node(name, parents, probs, (0, 1), coupling, parent_supports)


def table_node(
    name: str,
    parents: Sequence[str],
    support: Sequence[int],
    noise_probs: Sequence[float],
    table: Mapping,
    parent_supports: Mapping[str, Sequence[int]] | None = None,
) -> NodeSpec:
    """Node given by an explicit table ``config -> [value per noise atom]``."""
    parents = tuple(parents)
    psup = tuple(tuple(int(v) for v in (parent_supports or {}).get(p, (0, 1))) for p in parents)
    k = len(noise_probs)
    arr = np.empty(tuple(len(s) for s in psup) + (k,), dtype=np.int64)
    given = {_config_key(key, len(parents)): row for key, row in table.items()}
    for c in _parent_configs(psup):
        if c not in given:
            raise InputError(f"{name}: response table is missing configuration {c}")
        row = list(given[c])
        if len(row) != k:
            raise InputError(f"{name}: row {c} needs one value per noise atom ({k})")
        arr[tuple(psup[i].index(v) for i, v in enumerate(c))] = row
    return NodeSpec(name, parents, tuple(int(s) for s in support), np.asarray(noise_probs, float), arr, psup)


def deterministic_node(
    name: str,
    parents: Sequence[str],
    fn: Callable[..., int],
    support: Sequence[int] = (0, 1),
    parent_supports: Mapping[str, Sequence[int]] | None = None,
) -> NodeSpec:
    parents = tuple(parents)
    psup = tuple(tuple(int(v) for v in (parent_supports or {}).get(p, (0, 1))) for p in parents)
    table = {c: [int(fn(*c))] for c in _parent_configs(psup)}
    return table_node(name, parents, support, [1.0], table, dict(zip(parents, psup)))


@dataclass(frozen=True)
class NoiseConfig:
    """One noise atom per node together with its joint probability."""

    atoms: Mapping[str, int]
    probability: float = 1.0

    def __getitem__(self, node):
        return self.atoms[node]


@dataclass(frozen=True)
class CounterfactualQuery:
    """Potential value of ``target`` under nested assignments.

    An assignment is either a constant or a sub-query for the same node
    evaluated in another world, e.g. ``Y^{A=1, B=B^{A=0}}``::

        CounterfactualQuery("Y", {"A": 1, "B": CounterfactualQuery("B", {"A": 0})})
    """

    target: str
    assignments: tuple = ()

    def __init__(self, target: str, assignments: Mapping | Iterable = ()):
        items = assignments.items() if isinstance(assignments, Mapping) else assignments
        items = tuple(sorted(((str(k), v) for k, v in items), key=lambda kv: kv[0]))
        names = [k for k, _ in items]
        if len(set(names)) != len(names):
            raise InputError("assignment nodes must be distinct")
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "assignments", items)
        for node, value in items:
            if isinstance(value, CounterfactualQuery) and value.target != node:
                raise InputError(f"sub-world for {node} must target {node}, not {value.target}")
        if self.depth > 2:
            raise InputError("counterfactual nesting deeper than two worlds is not supported")

    @property
    def depth(self) -> int:
        subs = [v.depth for _, v in self.assignments if isinstance(v, CounterfactualQuery)]
        return 1 + max(subs, default=0)

    def __str__(self) -> str:
        if not self.assignments:
            return self.target
        parts = ",".join(f"{k}={v}" for k, v in self.assignments)
        return f"{self.target}^{{{parts}}}"


def cf(target: str, **assignments) -> CounterfactualQuery:
    """Shorthand: ``cf("Y", A=1, B=cf("B", A=0))``."""
    return CounterfactualQuery(target, assignments)


class StructuralModel:
    """Immutable collection of node response tables over a causal DAG."""

    def __init__(self, nodes: Iterable[NodeSpec], dag: CausalDag | None = None):
        specs = {}
        for spec in nodes:
            if spec.name in specs:
                raise InputError(f"node {spec.name} declared twice")
            specs[spec.name] = spec
        if dag is None:
            dag = CausalDag.from_edges(
                [(p, s.name) for s in specs.values() for p in s.parents], specs
            )
        if set(dag.nodes) != set(specs):
            raise InputError("DAG nodes and response tables do not match")
        for spec in specs.values():
            if set(spec.parents) != set(dag.parents(spec.name)):
                raise InputError(
                    f"{spec.name}: response table reads {sorted(spec.parents)} "
                    f"but DAG parents are {sorted(dag.parents(spec.name))}"
                )
            for p, psup in zip(spec.parents, spec.parent_supports):
                if tuple(psup) != specs[p].support:
                    raise InputError(f"{spec.name}: parent {p} support {psup} != {specs[p].support}")
        self.dag = dag
        self.nodes: dict[str, NodeSpec] = specs
        self.order: list[str] = dag.topological_order()
        self._lut = {}
        for name, spec in specs.items():
            lo = min(spec.support)
            lut = np.full(max(spec.support) - lo + 1, -1, dtype=np.int64)
            for i, v in enumerate(spec.support):
                lut[v - lo] = i
            self._lut[name] = (lo, lut)

    def __repr__(self) -> str:
        return f"StructuralModel(order={self.order})"

    def __eq__(self, other):
        if not isinstance(other, StructuralModel):
            return NotImplemented
        return self.dag == other.dag and self.nodes == other.nodes

    __hash__ = object.__hash__

    def support(self, node: str) -> tuple[int, ...]:
        return self._spec(node).support

    def _spec(self, node: str) -> NodeSpec:
        try:
            return self.nodes[node]
        except KeyError:
            raise InputError(f"unknown node {node!r}") from None

    def _index(self, node: str, values: np.ndarray) -> np.ndarray:
        lo, lut = self._lut[node]
        return lut[values - lo]

    def check_value(self, node: str, value) -> int:
        if value not in self._spec(node).support:
            raise InputError(f"value {value!r} is outside the support of {node}: {self.support(node)}")
        return int(value)

    def evaluate_arrays(self, noise: Mapping[str, np.ndarray], interventions: Mapping, nodes=None, size=None):
        """Vectorised evaluation over many noise draws at once.

        ``noise`` maps nodes to arrays of atom indices (nodes with a single atom
        may be omitted), ``interventions`` maps nodes to constants or arrays.
        Only ancestors of ``nodes`` (default: all) are computed.
        """
        if size is None:
            lengths = [len(v) for v in noise.values()] + [
                len(v) for v in interventions.values() if np.ndim(v)
            ]
            size = max(lengths, default=1)
        needed = self.dag.ancestors(nodes) if nodes is not None else set(self.order)
        values = {}
        for node in self.order:
            if node not in needed:
                continue
            if node in interventions:
                values[node] = np.broadcast_to(np.asarray(interventions[node], dtype=np.int64), (size,))
                continue
            spec = self.nodes[node]
            atoms = noise.get(node)
            if atoms is None:
                if spec.n_atoms != 1:
                    raise InputError(f"no noise given for {node}")
                atoms = np.zeros(size, dtype=np.int64)
            idx = tuple(self._index(p, values[p]) for p in spec.parents) + (atoms,)
            values[node] = spec.table[idx]
        return values

    def query_arrays(self, query: CounterfactualQuery, noise: Mapping[str, np.ndarray], size: int) -> np.ndarray:
        interventions = {}
        for node, value in query.assignments:
            if isinstance(value, CounterfactualQuery):
                interventions[node] = self.query_arrays(value, noise, size)
            else:
                interventions[node] = value
        return self.evaluate_arrays(noise, interventions, nodes=[query.target], size=size)[query.target]

    def check_query(self, query: CounterfactualQuery) -> None:
        self._spec(query.target)
        for node, value in query.assignments:
            if isinstance(value, CounterfactualQuery):
                self.check_query(value)
            else:
                self.check_value(node, value)

    def query_nodes(self, query: CounterfactualQuery) -> set[str]:
        """Nodes whose noise can influence ``query``."""
        out = self.dag.ancestors(query.target)
        for _, value in query.assignments:
            if isinstance(value, CounterfactualQuery):
                out |= self.query_nodes(value)
        return out

    def noise_nodes(self, nodes: Iterable[str] | None = None) -> list[str]:
        pool = set(self.order) if nodes is None else set(nodes)
        return [n for n in self.order if n in pool and self.nodes[n].n_atoms > 1]

    def enumeration_size(self, nodes: Iterable[str] | None = None) -> int:
        return math.prod(self.nodes[n].n_atoms for n in self.noise_nodes(nodes))


def iter_noise_chunks(model: StructuralModel, nodes: Iterable[str] | None = None, cap: int = DEFAULT_CAP):
    """Yield ``(atoms, probabilities)`` covering every noise configuration of ``nodes`` exactly once."""
    names = model.noise_nodes(nodes)
    sizes = [model.nodes[n].n_atoms for n in names]
    total = math.prod(sizes)
    if total > cap:
        raise CapacityError(
            f"exact enumeration needs {total:,} noise configurations (cap {cap:,}); "
            "use Monte Carlo estimation instead"
        )
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(start + _CHUNK, total))
        idx = np.unravel_index(flat, sizes) if names else ()
        atoms = {n: np.asarray(i, dtype=np.int64) for n, i in zip(names, idx)}
        prob = np.ones(len(flat))
        for n in names:
            prob = prob * model.nodes[n].noise_probs[atoms[n]]
        yield atoms, prob


def noise_configs(model: StructuralModel, nodes: Iterable[str] | None = None) -> Iterator[NoiseConfig]:
    """Every joint noise configuration, one at a time (small models only)."""
    names = model.noise_nodes(nodes)
    ranges = [range(model.nodes[n].n_atoms) for n in names]
    for combo in itertools.product(*ranges):
        prob = math.prod(model.nodes[n].noise_probs[k] for n, k in zip(names, combo))
        atoms = {n: 0 for n in model.order if model.nodes[n].n_atoms == 1}
        atoms.update(zip(names, combo))
        yield NoiseConfig(atoms, float(prob))


def _noise_arrays(model, noise):
    atoms = noise.atoms if isinstance(noise, NoiseConfig) else noise
    out = {}
    for node, k in atoms.items():
        spec = model._spec(node)
        if not 0 <= int(k) < spec.n_atoms:
            raise InputError(f"noise atom {k} out of range for {node}")
        out[node] = np.array([int(k)])
    return out


def evaluate(model: StructuralModel, noise, interventions: Mapping[str, int] | None = None) -> dict[str, int]:
    """Values of every node for one noise configuration under ``interventions``."""
    interventions = {n: model.check_value(n, v) for n, v in (interventions or {}).items()}
    values = model.evaluate_arrays(_noise_arrays(model, noise), interventions, size=1)
    return {n: int(values[n][0]) for n in model.order}


def counterfactual(model: StructuralModel, noise, query: CounterfactualQuery) -> int:
    """Resolve sub-worlds with the shared noise, then evaluate the outer world."""
    model.check_query(query)
    return int(model.query_arrays(query, _noise_arrays(model, noise), 1)[0])


def analytic_expectation(model: StructuralModel, query: CounterfactualQuery, cap: int = DEFAULT_CAP) -> float:
    """Exact ``E[query]`` by summing over every relevant noise configuration."""
    return analytic_expectations(model, [query], cap)[0]


def analytic_expectations(model: StructuralModel, queries: Sequence[CounterfactualQuery], cap: int = DEFAULT_CAP) -> list[float]:
    """Several exact expectations sharing one enumeration pass."""
    for q in queries:
        model.check_query(q)
    nodes = set().union(*(model.query_nodes(q) for q in queries)) if queries else set()
    partials = [[] for _ in queries]
    for atoms, prob in iter_noise_chunks(model, nodes, cap):
        for i, q in enumerate(queries):
            partials[i].append(float(np.dot(model.query_arrays(q, atoms, len(prob)), prob)))
    return [math.fsum(p) for p in partials]


def sample_noise(model: StructuralModel, n: int, rng: np.random.Generator, nodes=None) -> dict[str, np.ndarray]:
    """Independent noise draws, one array per node, in topological order."""
    out = {}
    for node in model.noise_nodes(nodes):
        cum = np.cumsum(model.nodes[node].noise_probs)
        atoms = np.searchsorted(cum, rng.random(n), side="right")
        out[node] = np.minimum(atoms, len(cum) - 1)
    return out


def sample_units(
    model: StructuralModel,
    n: int,
    seed: int | None = None,
    counterfactuals: Mapping[str, CounterfactualQuery] | None = None,
) -> Dataset:
    """Draw ``n`` i.i.d. units (numpy PCG64 stream seeded by ``seed``)."""
    if n < 1:
        raise InputError("n must be at least 1")
    rng = np.random.default_rng(seed)
    noise = sample_noise(model, n, rng)
    values = model.evaluate_arrays(noise, {}, size=n)
    frame = pd.DataFrame({node: np.asarray(values[node]) for node in model.order})
    cf_frame = None
    if counterfactuals:
        for q in counterfactuals.values():
            model.check_query(q)
        cf_frame = pd.DataFrame(
            {name: np.asarray(model.query_arrays(q, noise, n)) for name, q in counterfactuals.items()}
        )
    return Dataset(frame, {node: model.support(node) for node in model.order}, cf_frame)


def monte_carlo_expectation(model: StructuralModel, query: CounterfactualQuery, n: int, seed: int | None = None):
    """Sample mean of ``query`` over ``n`` noise draws and its standard error."""
    model.check_query(query)
    rng = np.random.default_rng(seed)
    noise = sample_noise(model, n, rng, model.query_nodes(query))
    vals = np.asarray(model.query_arrays(query, noise, n), dtype=float)
    se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return float(vals.mean()), se


@dataclass(frozen=True)
class JointPMF:
    """Exact joint distribution of some nodes, indexed by support positions."""

    nodes: tuple[str, ...]
    supports: tuple[tuple[int, ...], ...]
    probs: np.ndarray = field(repr=False)


def observational_pmf(
    model: StructuralModel,
    nodes: Sequence[str],
    interventions: Mapping[str, int] | None = None,
    cap: int = DEFAULT_CAP,
) -> JointPMF:
    """Joint law of ``nodes`` with no (or the given) interventions, by enumeration."""
    nodes = tuple(nodes)
    interventions = {n: model.check_value(n, v) for n, v in (interventions or {}).items()}
    supports = tuple(model.support(n) for n in nodes)
    shape = tuple(len(s) for s in supports)
    total = np.zeros(math.prod(shape))
    for atoms, prob in iter_noise_chunks(model, model.dag.ancestors(nodes), cap):
        values = model.evaluate_arrays(atoms, interventions, nodes=nodes, size=len(prob))
        idx = tuple(model._index(n, values[n]) for n in nodes)
        total += np.bincount(np.ravel_multi_index(idx, shape), weights=prob, minlength=total.size)
    return JointPMF(nodes, supports, total.reshape(shape))


def table1_model(
    pr_b: tuple[float, float] = (0.30, 0.70),
    pr_y: Mapping[tuple[int, int], float] | None = None,
    pr_a: float = 0.5,
    coupling: str = "monotone",
    names: tuple[str, str, str] = ("A", "B", "Y"),
) -> StructuralModel:
    """Randomised exposure, binary mediator and outcome given by marginal risks.

    ``pr_b[a] = Pr(B^a = 1)`` and ``pr_y[(a, b)] = Pr(Y^{a,b} = 1)``. The
    defaults are the worked example: 0.30/0.70 for behaviour and
    0.25, 0.35, 0.14, 0.21 for the outcome.
    """
    a, b, y = names
    if pr_y is None:
        pr_y = {(0, 0): 0.25, (0, 1): 0.35, (1, 0): 0.14, (1, 1): 0.21}
    return StructuralModel([
        bernoulli_node(a, (), pr_a),
        bernoulli_node(b, (a,), {0: pr_b[0], 1: pr_b[1]}, coupling),
        bernoulli_node(y, (a, b), dict(pr_y), coupling),
    ])
