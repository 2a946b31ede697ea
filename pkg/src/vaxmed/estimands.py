"""Exact causal estimands of a structural model.

Every value is computed by summing over all noise configurations, so the
identities between estimands (NDE + NIE = total effect, the three-term
path-specific decomposition) hold to floating-point precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .exceptions import InputError
from .scm import DEFAULT_CAP, StructuralModel, analytic_expectations, cf

PERCEPTION_SUPPORT = (-1, 0, 1)


@dataclass(frozen=True)
class EstimandValue:
    """Risks under the two contrasted worlds, on the difference and VE scales."""

    name: str
    risk_treated: float
    risk_control: float

    @property
    def difference(self) -> float:
        return self.risk_treated - self.risk_control

    @property
    def ve(self) -> float | None:
        """``1 - risk_treated / risk_control``; None when the control risk is 0."""
        if self.risk_control == 0:
            return None
        return 1.0 - self.risk_treated / self.risk_control

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "risk_treated": self.risk_treated,
            "risk_control": self.risk_control,
            "difference": self.difference,
            "ve": self.ve,
        }

    def display(self) -> dict[str, str]:
        return {
            "risk_treated": format_probability(self.risk_treated),
            "risk_control": format_probability(self.risk_control),
            "difference": format_probability(self.difference),
            "ve": format_ve(self.ve),
        }


def format_probability(x: float | None) -> str:
    """Two decimals, as in the worked example table."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "NA"
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def format_ve(ve: float | None) -> str:
    if ve is None:
        return "NA"
    s = f"{100 * ve:.1f}%"
    return "0.0%" if s == "-0.0%" else s


def _distinct(*nodes):
    if len(set(nodes)) != len(nodes):
        raise InputError(f"nodes {nodes} must be distinct")


def _binary(model: StructuralModel, *nodes):
    for n in nodes:
        if set(model.support(n)) - {0, 1}:
            raise InputError(f"{n} must be binary, support is {model.support(n)}")


def _contrast(model, name, treated, control, cap):
    rt, rc = analytic_expectations(model, [treated, control], cap)
    return EstimandValue(name, rt, rc)


def total_effect(model: StructuralModel, a: str, y: str, cap: int = DEFAULT_CAP) -> EstimandValue:
    """``E[Y^{a=1}]`` against ``E[Y^{a=0}]``."""
    _distinct(a, y)
    _binary(model, a, y)
    return _contrast(model, "tau_rw", cf(y, **{a: 1}), cf(y, **{a: 0}), cap)


def nde_queries(a, b, y):
    return cf(y, **{a: 1, b: cf(b, **{a: 0})}), cf(y, **{a: 0})


def natural_direct_effect(model: StructuralModel, a: str, b: str, y: str, cap: int = DEFAULT_CAP) -> EstimandValue:
    """``E[Y^{a=1, B^{a=0}}]`` against ``E[Y^{a=0}]``."""
    _distinct(a, b, y)
    _binary(model, a, y)
    treated, control = nde_queries(a, b, y)
    return _contrast(model, "nde", treated, control, cap)


def natural_indirect_effect(model: StructuralModel, a: str, b: str, y: str, cap: int = DEFAULT_CAP) -> EstimandValue:
    """``E[Y^{a=1, B^{a=1}}]`` against ``E[Y^{a=1, B^{a=0}}]``; adds to the NDE to give the total effect."""
    _distinct(a, b, y)
    _binary(model, a, y)
    treated = cf(y, **{a: 1, b: cf(b, **{a: 1})})
    control = cf(y, **{a: 1, b: cf(b, **{a: 0})})
    return _contrast(model, "nie", treated, control, cap)


def controlled_direct_effect(
    model: StructuralModel, a: str, b: str, y: str, b_level: int, cap: int = DEFAULT_CAP
) -> EstimandValue:
    _distinct(a, b, y)
    _binary(model, a, y)
    model.check_value(b, b_level)
    return _contrast(
        model, f"cde({b_level})", cf(y, **{a: 1, b: b_level}), cf(y, **{a: 0, b: b_level}), cap
    )


def trial_estimand(model: StructuralModel, a: str, p: str, y: str, cap: int = DEFAULT_CAP) -> EstimandValue:
    """Blinded-trial effect: both arms have perceived protection fixed at -1."""
    _distinct(a, p, y)
    _binary(model, a, y)
    try:
        support = model.support(p)
    except InputError:
        raise InputError(f"trial estimand needs a perception node {p!r}") from None
    if tuple(sorted(support)) != PERCEPTION_SUPPORT:
        raise InputError(f"perception node {p} must have support {{-1, 0, 1}}, got {support}")
    if p not in model.dag.children(a):
        raise InputError(f"perception node {p} must be a child of {a}")
    return _contrast(model, "tau_vt", cf(y, **{a: 1, p: -1}), cf(y, **{a: 0, p: -1}), cap)


@dataclass(frozen=True)
class PathSpecificEffects:
    """Effects with one behaviour path turned off, and the three-term split of the total effect."""

    mask_blocked: EstimandValue
    contacts_blocked: EstimandValue
    total: EstimandValue
    mediated_mask: EstimandValue
    mediated_contacts: EstimandValue
    direct: EstimandValue

    @property
    def terms(self) -> tuple[EstimandValue, EstimandValue, EstimandValue]:
        return (self.mediated_mask, self.mediated_contacts, self.direct)

    @property
    def residual(self) -> float:
        return self.total.difference - math.fsum(t.difference for t in self.terms)


def path_specific_effects(
    model: StructuralModel, a: str, b_m: str, b_sc: str, y: str, cap: int = DEFAULT_CAP
) -> PathSpecificEffects:
    """Two-mediator effects for exposure ``a``, mask use ``b_m`` and contacts ``b_sc``.

    The total effect splits into the path through ``b_m`` (contacts held at
    their vaccinated value), the path through ``b_sc`` (both arms unvaccinated
    otherwise, mask use at its unvaccinated value) and the direct path.
    """
    _distinct(a, b_m, b_sc, y)
    _binary(model, a, y)
    dag = model.dag
    required = [(a, b_m), (a, b_sc), (b_m, y), (b_sc, y), (a, y)]
    missing = [e for e in required if e not in dag.edges]
    if missing or (b_m, b_sc) in dag.edges or (b_sc, b_m) in dag.edges:
        raise InputError(
            f"two-mediator roles need edges {required} and no edge between {b_m} and {b_sc}"
        )

    def world(a_val, sc_world, m_world):
        return cf(y, **{a: a_val, b_sc: cf(b_sc, **{a: sc_world}), b_m: cf(b_m, **{a: m_world})})

    y111, y110, y010, y000 = world(1, 1, 1), world(1, 1, 0), world(0, 1, 0), world(0, 0, 0)
    y101 = world(1, 0, 1)
    r111, r110, r010, r000, r101, r1, r0 = analytic_expectations(
        model, [y111, y110, y010, y000, y101, cf(y, **{a: 1}), cf(y, **{a: 0})], cap
    )
    return PathSpecificEffects(
        mask_blocked=EstimandValue("pse_mask_blocked", r110, r000),
        contacts_blocked=EstimandValue("pse_contacts_blocked", r101, r000),
        total=EstimandValue("tau_rw", r1, r0),
        mediated_mask=EstimandValue("pse_via_mask", r111, r110),
        mediated_contacts=EstimandValue("pse_via_contacts", r010, r000),
        direct=EstimandValue("pse_direct", r110, r010),
    )
