"""Partial interference: effects when outcomes depend on the assignments in one's group.

Each unit follows the same template. Its mediator reads its own assignment
(and, only if opted in, the group summary); its outcome reads its own
assignment, its own mediator and a permutation-invariant summary of the
other group members' assignments (count or fraction vaccinated). Risks are
linear in the summary and clipped to ``[0, 1]``::

    Pr(Y = 1 | a, b, s) = outcome_risk[a, b] + outcome_coef * s
    Pr(B = 1 | a, s)    = mediator_risk[a]   + mediator_coef * s

A unit's model carries the summary as an extra root node ``S`` holding the
count of vaccinated others, always set by intervention. The noise partition
is built over every count reachable in the group, so a unit's noise draw is
the same whatever the others are assigned.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exceptions import CapacityError, InputError
from .scm import (
    CounterfactualQuery,
    StructuralModel,
    analytic_expectations,
    bernoulli_node,
    cf,
    counterfactual,
    deterministic_node,
    sample_noise,
)

A, B, Y, S = "A", "B", "Y", "S"
SUMMARIES = ("count", "fraction")
EFFECTS = ("total", "nde", "spillover")
MAX_GROUP_SIZE = 20


def _clip(p: float) -> float:
    return min(1.0, max(0.0, p))


@dataclass(frozen=True)
class GroupedModel:
    """Population partitioned into groups of the given sizes, one unit template for all."""

    group_sizes: tuple[int, ...]
    mediator_risk: tuple[float, float] = (0.30, 0.70)
    outcome_risk: Mapping[tuple[int, int], float] = field(
        default_factory=lambda: {(0, 0): 0.25, (0, 1): 0.35, (1, 0): 0.14, (1, 1): 0.21}
    )
    outcome_coef: float = 0.0
    mediator_coef: float = 0.0
    summary: str = "fraction"
    mediator_reads_summary: bool = False
    alpha: float = 0.5
    _models: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.group_sizes)
        object.__setattr__(self, "group_sizes", sizes)
        object.__setattr__(self, "outcome_risk", {tuple(k): float(v) for k, v in dict(self.outcome_risk).items()})
        if not sizes or min(sizes) < 1:
            raise InputError("every group needs at least one unit")
        if max(sizes) > MAX_GROUP_SIZE:
            raise CapacityError(f"groups larger than {MAX_GROUP_SIZE} are not enumerated")
        if self.summary not in SUMMARIES:
            raise InputError(f"summary must be one of {SUMMARIES}")
        if self.mediator_coef and not self.mediator_reads_summary:
            raise InputError("mediator_coef needs mediator_reads_summary=True")
        if not 0.0 <= self.alpha <= 1.0:
            raise InputError("alpha must lie in [0, 1]")
        if set(self.outcome_risk) != {(0, 0), (0, 1), (1, 0), (1, 1)}:
            raise InputError("outcome_risk needs the four (a, b) combinations")
        object.__setattr__(self, "_models", {n: self._build(n) for n in sorted(set(sizes))})

    def summary_value(self, count: int, size: int) -> float:
        if self.summary == "count":
            return float(count)
        return count / (size - 1) if size > 1 else 0.0

    def _build(self, size: int) -> StructuralModel:
        counts = tuple(range(size))
        s_sup = {S: counts}
        y_p = {
            (a, b, k): _clip(self.outcome_risk[(a, b)] + self.outcome_coef * self.summary_value(k, size))
            for a in (0, 1) for b in (0, 1) for k in counts
        }
        if self.mediator_reads_summary:
            b_node = bernoulli_node(
                B, (A, S),
                {(a, k): _clip(self.mediator_risk[a] + self.mediator_coef * self.summary_value(k, size))
                 for a in (0, 1) for k in counts},
                parent_supports=s_sup,
            )
        else:
            b_node = bernoulli_node(B, (A,), {0: self.mediator_risk[0], 1: self.mediator_risk[1]})
        return StructuralModel([
            bernoulli_node(A, (), self.alpha),
            deterministic_node(S, (), lambda: 0, support=counts),
            b_node,
            bernoulli_node(Y, (A, B, S), y_p, parent_supports=s_sup),
        ])

    def unit_model(self, i: int) -> StructuralModel:
        """Structural model of any unit in group ``i`` (0-based)."""
        return self._models[self.size(i)]

    def size(self, i: int) -> int:
        if not 0 <= i < len(self.group_sizes):
            raise InputError(f"group index {i} out of range (0..{len(self.group_sizes) - 1})")
        return self.group_sizes[i]

    def without_interference(self) -> "GroupedModel":
        return GroupedModel(
            self.group_sizes, self.mediator_risk, self.outcome_risk, 0.0, 0.0,
            self.summary, self.mediator_reads_summary, self.alpha,
        )


def _check_unit(gm: GroupedModel, i: int, j: int) -> int:
    size = gm.size(i)
    if not 0 <= j < size:
        raise InputError(f"unit index {j} out of range for group {i} of size {size}")
    return size


def _others(gm: GroupedModel, i: int, j: int, a_minus_j: Sequence[int]) -> int:
    size = _check_unit(gm, i, j)
    a_minus_j = tuple(int(v) for v in a_minus_j)
    if len(a_minus_j) != size - 1:
        raise InputError(f"assignment of others needs length {size - 1}, got {len(a_minus_j)}")
    if set(a_minus_j) - {0, 1}:
        raise InputError("assignments must be 0/1")
    return sum(a_minus_j)


def group_potential_outcome(gm: GroupedModel, i: int, j: int, a_i: Sequence[int], noise) -> int:
    """``Y_{i,j}`` under the full group assignment ``a_i`` for the unit's noise draw."""
    size = _check_unit(gm, i, j)
    a_i = [int(v) for v in a_i]
    if len(a_i) != size:
        raise InputError(f"group {i} assignment needs length {size}, got {len(a_i)}")
    count = _others(gm, i, j, a_i[:j] + a_i[j + 1:])
    return counterfactual(gm.unit_model(i), noise, cf(Y, **{A: a_i[j], S: count}))


def _total_queries(count: int):
    return cf(Y, **{A: 1, S: count}), cf(Y, **{A: 0, S: count})


def _nde_queries(gm: GroupedModel, count: int):
    if gm.mediator_reads_summary:
        raise InputError(
            "the interference NDE holds behaviour at its own-unvaccinated value and is undefined "
            "when the mediator depends on others' assignments"
        )
    return cf(Y, **{A: 1, S: count, B: cf(B, **{A: 0})}), cf(Y, **{A: 0, S: count})


def _effect_queries(gm, kind, count, count_star=None) -> tuple[CounterfactualQuery, CounterfactualQuery]:
    if kind == "total":
        return _total_queries(count)
    if kind == "nde":
        return _nde_queries(gm, count)
    if kind == "spillover":
        return cf(Y, **{A: 0, S: count}), cf(Y, **{A: 0, S: count_star})
    raise InputError(f"unknown effect kind {kind!r}; choose from {EFFECTS}")


def _expected_difference(model, queries) -> float:
    treated, control = analytic_expectations(model, list(queries))
    return treated - control


def individual_total_effect(gm: GroupedModel, i: int, j: int, a_minus_j: Sequence[int]) -> float:
    """``E[Y^{a_-j, a_j=1} - Y^{a_-j, a_j=0}]`` for unit ``j`` of group ``i``."""
    count = _others(gm, i, j, a_minus_j)
    return _expected_difference(gm.unit_model(i), _total_queries(count))


def individual_nde_interf(gm: GroupedModel, i: int, j: int, a_minus_j: Sequence[int]) -> float:
    """Own vaccination effect with own behaviour held at its unvaccinated value.

    Raises :class:`InputError` when the mediator reads the group summary.
    """
    count = _others(gm, i, j, a_minus_j)
    return _expected_difference(gm.unit_model(i), _nde_queries(gm, count))


def spillover_effect(
    gm: GroupedModel, i: int, j: int, a_minus_j: Sequence[int], a_minus_j_star: Sequence[int]
) -> float:
    """``E[Y^{a_-j, a_j=0} - Y^{a*_-j, a_j=0}]``: unvaccinated unit, two assignments of the others."""
    count = _others(gm, i, j, a_minus_j)
    count_star = _others(gm, i, j, a_minus_j_star)
    return _expected_difference(gm.unit_model(i), _effect_queries(gm, "spillover", count, count_star))


def _count_weights(m: int, alpha: float) -> np.ndarray:
    # law of the number vaccinated among m others under i.i.d. Bernoulli(alpha)
    return np.array([math.comb(m, k) * alpha**k * (1 - alpha) ** (m - k) for k in range(m + 1)])


def group_effect(gm: GroupedModel, i: int, kind: str, alpha: float | None = None) -> float:
    """Average effect of a unit in group ``i`` when others are vaccinated with probability ``alpha``.

    For ``kind="spillover"`` the contrast is against all others unvaccinated.
    """
    alpha = gm.alpha if alpha is None else alpha
    size = gm.size(i)
    model = gm.unit_model(i)
    weights = _count_weights(size - 1, alpha)
    values = [
        _expected_difference(model, _effect_queries(gm, kind, k, 0)) for k in range(size)
    ]
    return math.fsum(w * v for w, v in zip(weights, values))


def average_effects(gm: GroupedModel, kind: str = "total", weighting: str = "units", alpha: float | None = None) -> float:
    """Population average of a per-unit effect.

    ``weighting="units"`` weights every unit equally, ``"groups"`` every group.
    """
    if weighting not in ("units", "groups"):
        raise InputError("weighting must be 'units' or 'groups'")
    per_group = [group_effect(gm, i, kind, alpha) for i in range(len(gm.group_sizes))]
    if weighting == "groups":
        return math.fsum(per_group) / len(per_group)
    total = sum(gm.group_sizes)
    return math.fsum(n * e for n, e in zip(gm.group_sizes, per_group)) / total


def monte_carlo_effect(
    gm: GroupedModel,
    i: int,
    j: int,
    kind: str,
    a_minus_j: Sequence[int],
    n: int,
    seed: int | None = None,
    a_minus_j_star: Sequence[int] | None = None,
) -> tuple[float, float]:
    """Mean of a per-unit effect over ``n`` sampled noise draws, with its standard error."""
    count = _others(gm, i, j, a_minus_j)
    count_star = _others(gm, i, j, a_minus_j_star) if a_minus_j_star is not None else None
    if kind == "spillover" and count_star is None:
        raise InputError("spillover needs a_minus_j_star")
    treated, control = _effect_queries(gm, kind, count, count_star)
    model = gm.unit_model(i)
    rng = np.random.default_rng(seed)
    noise = sample_noise(model, n, rng)
    diff = model.query_arrays(treated, noise, n).astype(float) - model.query_arrays(control, noise, n)
    return float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(n))


def assignment_vectors(m: int):
    """All 0/1 vectors of length ``m``."""
    return itertools.product((0, 1), repeat=m)
