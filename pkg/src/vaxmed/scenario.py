"""Scenario files: a versioned JSON description of a model plus requested analyses.

A minimal scenario::

    {
      "schema_version": 1,
      "name": "example",
      "nodes": {
        "A": {"p": 0.5},
        "B": {"parents": ["A"], "p": {"0": 0.3, "1": 0.7}},
        "Y": {"parents": ["A", "B"],
              "p": {"0,0": 0.25, "0,1": 0.35, "1,0": 0.14, "1,1": 0.21}}
      },
      "roles": {"exposure": "A", "mediator": "B", "outcome": "Y"},
      "analyses": {"estimands": ["tau_rw", "nde"]}
    }

Node kinds are ``bernoulli`` (``p``), ``categorical`` (``support`` and
``probs``) and ``table`` (``support``, ``noise`` and ``table``). Parent
configurations are written as comma-separated values in parent order. The
``table1`` block is shorthand for a randomised exposure ``A``, mediator ``B``
and outcome ``Y`` given by the marginals ``pr_b`` and ``pr_y``.
"""
from __future__ import annotations

import copy
import itertools
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

from .exceptions import ScenarioError, VaxmedError
from .graph import CausalDag, validate
from .interference import GroupedModel
from .scm import NodeSpec, StructuralModel, cpt_node, table_node

SCHEMA_VERSION = 1
DEFAULTS = {"sample_size": 100_000, "seed": 0, "bootstrap": 200, "z_threshold": 3.0}
ROLE_SINGLE = ("exposure", "mediator", "outcome", "perception", "probe", "mask", "contacts", "subgroup")
ROLE_SETS = ("adjust", "cond", "behaviour")
ESTIMANDS = ("tau_rw", "nde", "nie", "tau_vt", "pse")
ESTIMATORS = ("plugin_nde", "plugin_total")
DETECTION = ("alt_outcome", "panel", "negative_control")
INTERFERENCE = ("total", "nde", "spillover")
TOP_KEYS = {"schema_version", "name", "description", "nodes", "table1", "roles", "analyses", "groups", *DEFAULTS}
_CDE = re.compile(r"^cde\((-?\d+)\)$")


@dataclass(eq=True)
class Scenario:
    """Normalised scenario; ``model`` and ``dag`` are derived and not compared."""

    name: str
    nodes: dict
    roles: dict
    analyses: dict
    groups: dict | None = None
    description: str = ""
    sample_size: int = DEFAULTS["sample_size"]
    seed: int = DEFAULTS["seed"]
    bootstrap: int = DEFAULTS["bootstrap"]
    z_threshold: float = DEFAULTS["z_threshold"]
    model: StructuralModel | None = field(default=None, compare=False, repr=False)

    @property
    def dag(self) -> CausalDag:
        return self.model.dag

    def grouped_model(self) -> GroupedModel | None:
        if not self.groups:
            return None
        r = self.roles
        a, b, y = r["exposure"], r["mediator"], r["outcome"]
        b_node, y_node = self.nodes[b], self.nodes[y]
        pr_b = tuple(b_node["p"][str(v)] for v in (0, 1))
        order = y_node["parents"]
        pr_y = {}
        for key, p in y_node["p"].items():
            vals = dict(zip(order, (int(v) for v in key.split(","))))
            pr_y[(vals[a], vals[b])] = p
        g = self.groups
        return GroupedModel(
            tuple(g["sizes"]), pr_b, pr_y, g["outcome_coef"], g["mediator_coef"],
            g["summary"], g["mediator_reads_summary"], g["alpha"],
        )

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "description": self.description,
            "nodes": copy.deepcopy(self.nodes),
            "roles": copy.deepcopy(self.roles),
            "analyses": copy.deepcopy(self.analyses),
            "sample_size": self.sample_size,
            "seed": self.seed,
            "bootstrap": self.bootstrap,
            "z_threshold": self.z_threshold,
        }
        if self.groups:
            out["groups"] = copy.deepcopy(self.groups)
        return out


def serialize_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario.to_dict(), indent=2) + "\n"


class _Errors:
    def __init__(self):
        self.items: list[tuple[str, str]] = []

    def add(self, where: str, msg: str):
        self.items.append((where, msg))

    def raise_if_any(self):
        if self.items:
            raise ScenarioError(self.items)


def _key(values) -> str:
    return ",".join(str(int(v)) for v in values)


def _num(x, where, errors, lo=None, hi=None):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        errors.add(where, f"expected a number, got {x!r}")
        return None
    if (lo is not None and x < lo) or (hi is not None and x > hi):
        errors.add(where, f"{x} outside [{lo}, {hi}]")
        return None
    return float(x)


def _expand_table1(block: dict, errors: _Errors) -> dict:
    where = "table1"
    pr_a = block.get("pr_a", 0.5)
    coupling = block.get("coupling", "monotone")
    try:
        pr_b = {str(k): v for k, v in block["pr_b"].items()}
        pr_y = {str(k).replace(" ", ""): v for k, v in block["pr_y"].items()}
    except (KeyError, AttributeError):
        errors.add(where, "needs 'pr_b' and 'pr_y' mappings")
        return {}
    return {
        "A": {"parents": [], "p": pr_a},
        "B": {"parents": ["A"], "p": pr_b, "coupling": coupling},
        "Y": {"parents": ["A", "B"], "p": pr_y, "coupling": coupling},
    }


def _normalise_node(name: str, raw: Any, supports: dict, errors: _Errors) -> dict | None:
    where = f"nodes.{name}"
    if not isinstance(raw, dict):
        errors.add(where, "node must be an object")
        return None
    parents = raw.get("parents", [])
    if not isinstance(parents, list) or not all(isinstance(p, str) for p in parents):
        errors.add(f"{where}.parents", "must be a list of node names")
        return None
    kind = raw.get("kind") or ("table" if "table" in raw else "categorical" if "probs" in raw else "bernoulli")
    out = {"kind": kind, "parents": list(parents)}
    unknown = [p for p in parents if p not in supports]
    if unknown:
        errors.add(f"{where}.parents", f"unknown node(s) {unknown}")
        return None
    configs = [_key(c) for c in itertools.product(*(supports[p] for p in parents))]

    def by_config(mapping, field_name):
        if not parents and not isinstance(mapping, dict):
            return {"": mapping}
        if not isinstance(mapping, dict):
            errors.add(f"{where}.{field_name}", "must map parent configurations to values")
            return None
        norm = {}
        for k, v in mapping.items():
            try:
                norm[_key(str(k).split(",")) if str(k) != "" else ""] = v
            except ValueError:
                errors.add(f"{where}.{field_name}", f"bad parent configuration {k!r}")
                return None
        missing = [c for c in configs if c not in norm]
        extra = [c for c in norm if c not in configs]
        if missing or extra:
            errors.add(f"{where}.{field_name}", f"configurations missing {missing} / unknown {extra}")
            return None
        return {c: norm[c] for c in configs}

    if kind == "bernoulli":
        p = by_config(raw.get("p"), "p")
        if p is None:
            return None
        for c, v in p.items():
            if _num(v, f"{where}.p[{c}]", errors, 0.0, 1.0) is None:
                return None
        out["p"] = p
        out["coupling"] = raw.get("coupling", "monotone")
    elif kind == "categorical":
        out["support"] = [int(s) for s in raw.get("support", [])]
        probs = by_config(raw.get("probs"), "probs")
        if probs is None:
            return None
        for c, vec in probs.items():
            if not isinstance(vec, list) or len(vec) != len(out["support"]):
                errors.add(f"{where}.probs[{c}]", "needs one probability per support value")
                return None
            if abs(sum(vec) - 1.0) > 1e-12 or min(vec) < 0:
                errors.add(f"{where}.probs[{c}]", f"weights {vec} do not form a distribution (sum {sum(vec):g})")
                return None
        out["probs"] = probs
        out["coupling"] = raw.get("coupling", "monotone")
    elif kind == "table":
        out["support"] = [int(s) for s in raw.get("support", [0, 1])]
        noise = raw.get("noise")
        if not isinstance(noise, list) or not noise or min(noise) < 0 or abs(sum(noise) - 1.0) > 1e-12:
            errors.add(f"{where}.noise", f"noise weights {noise} must be nonnegative and sum to 1")
            return None
        out["noise"] = noise
        table = by_config(raw.get("table"), "table")
        if table is None:
            return None
        out["table"] = table
    else:
        errors.add(f"{where}.kind", f"unknown node kind {kind!r}")
        return None
    if out.get("coupling", "monotone") not in ("monotone", "independent"):
        errors.add(f"{where}.coupling", "must be 'monotone' or 'independent'")
        return None
    return out


def _node_support(raw: dict) -> list[int]:
    if isinstance(raw, dict) and ("support" in raw):
        return [int(s) for s in raw["support"]]
    if isinstance(raw, dict) and "table" in raw:
        return [0, 1]
    return [0, 1]


def _spec(name: str, node: dict, supports: dict) -> NodeSpec:
    parents = node["parents"]
    psup = {p: supports[p] for p in parents}

    def keyed(mapping):
        if not parents:
            return {(): mapping[""]}
        return {tuple(int(v) for v in k.split(",")): v for k, v in mapping.items()}

    if node["kind"] == "bernoulli":
        probs = {k: (1.0 - v, v) for k, v in keyed(node["p"]).items()}
        return cpt_node(name, parents, probs, (0, 1), node["coupling"], psup)
    if node["kind"] == "categorical":
        return cpt_node(name, parents, keyed(node["probs"]), node["support"], node["coupling"], psup)
    return table_node(name, parents, node["support"], node["noise"], keyed(node["table"]), psup)


def build_model(nodes: dict) -> StructuralModel:
    supports = {n: _node_support(raw) for n, raw in nodes.items()}
    dag = CausalDag.from_edges([(p, n) for n, raw in nodes.items() for p in raw["parents"]], nodes)
    return StructuralModel([_spec(n, nodes[n], supports) for n in dag.topological_order()], dag)


def _normalise_analyses(raw: dict, errors: _Errors) -> dict:
    if not isinstance(raw, dict):
        errors.add("analyses", "must be an object")
        return {}
    out = {}
    est = raw.get("estimands", [])
    for e in est:
        if e not in ESTIMANDS and not _CDE.match(str(e)):
            errors.add("analyses.estimands", f"unknown estimand {e!r}")
    out["estimands"] = list(est)
    estimators = []
    for k, e in enumerate(raw.get("estimators", [])):
        entry = {"name": e} if isinstance(e, str) else dict(e)
        if entry.get("name") not in ESTIMATORS:
            errors.add(f"analyses.estimators[{k}]", f"unknown estimator {entry.get('name')!r}")
            continue
        estimators.append(entry)
    out["estimators"] = estimators
    flips = raw.get("misclassification", [])
    for k, f in enumerate(flips):
        _num(f, f"analyses.misclassification[{k}]", errors, 0.0, 1.0)
    out["misclassification"] = list(flips)
    det = raw.get("detection", [])
    for d in det:
        if d not in DETECTION:
            errors.add("analyses.detection", f"unknown detection analysis {d!r}")
    out["detection"] = list(det)
    inter = raw.get("interference", [])
    for d in inter:
        if d not in INTERFERENCE:
            errors.add("analyses.interference", f"unknown interference effect {d!r}")
    out["interference"] = list(inter)
    out["assumptions"] = bool(raw.get("assumptions", False))
    unknown = set(raw) - set(out)
    if unknown:
        errors.add("analyses", f"unknown key(s) {sorted(unknown)}")
    return out


def _check_satisfiable(sc: dict, errors: _Errors):
    roles, an = sc["roles"], sc["analyses"]

    def need(what, *keys):
        missing = [k for k in keys if not roles.get(k)]
        if missing:
            errors.add("analyses", f"{what} needs role(s) {missing}")
            return False
        return True

    for e in an["estimands"]:
        if e == "tau_rw":
            need(e, "exposure", "outcome")
        elif e == "tau_vt":
            need(e, "exposure", "perception", "outcome")
        elif e == "pse":
            need(e, "exposure", "mask", "contacts", "outcome")
        else:
            need(e, "exposure", "mediator", "outcome")
    for e in an["estimators"]:
        keys = ("exposure", "mediator", "outcome") if e["name"] == "plugin_nde" else ("exposure", "outcome")
        need(e["name"], *keys)
    if an["misclassification"]:
        need("misclassification", "exposure", "mediator", "outcome")
    for d in an["detection"]:
        if d == "alt_outcome":
            need(d, "exposure", "probe")
        elif d == "panel":
            need(d, "exposure", "probe", "outcome", "behaviour")
        else:
            need(d, "exposure", "outcome", "subgroup")
    if an["assumptions"]:
        need("assumptions", "exposure", "mediator", "outcome")
    if an["interference"] and not sc.get("groups"):
        errors.add("analyses.interference", "needs a 'groups' block")
    if sc.get("groups"):
        need("groups", "exposure", "mediator", "outcome")


def _normalise_groups(raw: dict, errors: _Errors) -> dict | None:
    if raw is None:
        return None
    if not isinstance(raw, dict) or not isinstance(raw.get("sizes"), list) or not raw["sizes"]:
        errors.add("groups.sizes", "needs a non-empty list of group sizes")
        return None
    return {
        "sizes": [int(s) for s in raw["sizes"]],
        "summary": raw.get("summary", "fraction"),
        "alpha": float(raw.get("alpha", 0.5)),
        "outcome_coef": float(raw.get("outcome_coef", 0.0)),
        "mediator_coef": float(raw.get("mediator_coef", 0.0)),
        "mediator_reads_summary": bool(raw.get("mediator_reads_summary", False)),
    }


def scenario_from_dict(raw: dict) -> Scenario:
    errors = _Errors()
    if not isinstance(raw, dict):
        raise ScenarioError([("$", "scenario must be a JSON object")])
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        errors.add("schema_version", f"expected {SCHEMA_VERSION}, got {version!r}")
    for k in sorted(set(raw) - TOP_KEYS):
        errors.add(k, "unknown key")
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        errors.add("name", "scenario needs a name")

    raw_nodes = raw.get("nodes")
    if "table1" in raw:
        if raw_nodes:
            errors.add("table1", "give either 'nodes' or 'table1', not both")
        raw_nodes = _expand_table1(raw["table1"], errors)
    if not isinstance(raw_nodes, dict) or not raw_nodes:
        errors.add("nodes", "scenario needs at least one node")
        raw_nodes = {}
    supports = {n: _node_support(r) for n, r in raw_nodes.items()}
    nodes = {}
    for n, r in raw_nodes.items():
        norm = _normalise_node(n, r, supports, errors)
        if norm is not None:
            nodes[n] = norm

    roles_raw = raw.get("roles", {})
    roles = {}
    for k, v in roles_raw.items():
        if k in ROLE_SINGLE:
            roles[k] = v
            if v not in raw_nodes:
                errors.add(f"roles.{k}", f"unknown node {v!r}")
        elif k in ROLE_SETS:
            roles[k] = list(v)
            for n in v:
                if n not in raw_nodes:
                    errors.add(f"roles.{k}", f"unknown node {n!r}")
        else:
            errors.add(f"roles.{k}", "unknown role")
    singles = [roles[k] for k in ROLE_SINGLE if k in roles]
    if len(set(singles)) != len(singles):
        errors.add("roles", f"roles must bind distinct nodes, got {singles}")
    for k in ("adjust", "cond"):
        clash = set(roles.get(k, [])) & {roles.get("exposure"), roles.get("mediator"), roles.get("outcome")}
        if k == "adjust" and clash:
            errors.add("roles.adjust", f"adjustment set overlaps exposure/mediator/outcome: {sorted(clash)}")

    sc = {
        "name": name,
        "description": raw.get("description", ""),
        "nodes": nodes,
        "roles": roles,
        "analyses": _normalise_analyses(raw.get("analyses", {}), errors),
        "groups": _normalise_groups(raw.get("groups"), errors),
    }
    for k, default in DEFAULTS.items():
        v = raw.get(k, default)
        if k == "z_threshold":
            sc[k] = _num(v, k, errors, 0.0)
        elif isinstance(v, bool) or not isinstance(v, int) or v < (1 if k == "sample_size" else 0):
            errors.add(k, f"expected a nonnegative integer, got {v!r}")
        else:
            sc[k] = v
    _check_satisfiable(sc, errors)
    errors.raise_if_any()

    dag = CausalDag.from_edges([(p, n) for n, r in nodes.items() for p in r["parents"]], nodes)
    check = validate(dag)
    if not check.valid:
        raise ScenarioError([("nodes", f"parents form a cycle: {' -> '.join(check.cycle)}")])
    try:
        model = build_model(nodes)
        scenario = Scenario(model=model, **sc)
        scenario.grouped_model()
    except VaxmedError as exc:
        raise ScenarioError([("nodes", str(exc))]) from exc
    return scenario


def parse_scenario(text: str) -> Scenario:
    """Parse and validate scenario JSON; raises :class:`ScenarioError` with located errors."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([(f"line {exc.lineno}, column {exc.colno}", exc.msg)]) from None
    return scenario_from_dict(raw)


BUILTIN_PACKAGE = "vaxmed.scenarios"


def list_builtin() -> list[str]:
    files = resources.files(BUILTIN_PACKAGE).iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".json"))


def builtin_source(name: str) -> str:
    if name not in list_builtin():
        raise ScenarioError([("name", f"no built-in scenario {name!r}")])
    return resources.files(BUILTIN_PACKAGE).joinpath(f"{name}.json").read_text()


def load_builtin(name: str) -> Scenario:
    return parse_scenario(builtin_source(name))
