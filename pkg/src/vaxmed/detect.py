"""Detecting an unmeasured exposure -> behaviour effect from auxiliary data.

Two probes are available: an alternative outcome ``R`` that shares the
behaviour-driven exposure route with ``Y`` but is not protected against by
the vaccine, and a negative-control subgroup in which the vaccine has no
immunological effect on ``Y``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .data import Dataset
from .estimation import _strata, check_binary, check_columns
from .exceptions import InputError
from .graph import CausalDag, directed_paths, post_exposure_nodes
from .scm import StructuralModel, observational_pmf

ASSOCIATION = "association"
NO_ASSOCIATION = "no-association"
INSUFFICIENT = "insufficient-data"

BEHAVIOUR_AFFECTED = "i"
INCONCLUSIVE = "ii"
NO_CAUSAL_PATH = "none"


@dataclass(frozen=True)
class AssociationResult:
    """Stratum-pooled risk difference of a probe outcome across exposure arms."""

    difference: float
    se: float
    verdict: str
    z_threshold: float
    n: int
    flags: tuple[str, ...] = ()

    @property
    def z(self) -> float:
        if self.se > 0:
            return self.difference / self.se
        return 0.0 if self.difference == 0 else math.copysign(math.inf, self.difference)


def _verdict(diff: float, se: float, z_threshold: float) -> str:
    return NO_ASSOCIATION if abs(diff) <= z_threshold * se else ASSOCIATION


def pooled_risk_difference(a_vals: np.ndarray, r_vals: np.ndarray, codes: np.ndarray, n_strata: int):
    """Stratum-frequency pooled ``E[R|A=1,s] - E[R|A=0,s]`` with a Wald standard error.

    Strata missing an exposure arm are excluded. Returns
    ``(difference, se, excluded stratum indices)``.
    """
    n = np.zeros((n_strata, 2))
    s = np.zeros((n_strata, 2))
    np.add.at(n, (codes, a_vals), 1)
    np.add.at(s, (codes, a_vals), r_vals)
    usable = (n > 0).all(1)
    if not usable.any():
        return math.nan, math.nan, list(range(n_strata))
    w = n.sum(1) * usable
    w = w / w.sum()
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(n > 0, s / n, 0.0)
        var = np.where(n > 0, p * (1 - p) / n, 0.0)
    diff = float(np.sum(w * (p[:, 1] - p[:, 0])))
    se = float(math.sqrt(np.sum(w**2 * (var[:, 0] + var[:, 1]))))
    return diff, se, [int(i) for i in np.flatnonzero(~usable)]


class AssociationTest(BaseEstimator):
    """Pooled risk-difference association test of ``probe`` on ``exposure``.

    The verdict is ``no-association`` exactly when the absolute pooled
    difference is at most ``z_threshold`` standard errors.
    """

    def __init__(self, exposure="A", probe="R", cond=(), z_threshold=3.0, subgroup=None, min_size=0):
        self.exposure = exposure
        self.probe = probe
        self.cond = cond
        self.z_threshold = z_threshold
        self.subgroup = subgroup
        self.min_size = min_size

    def fit(self, X, y=None):
        cols = [self.exposure, self.probe, *self.cond] + ([self.subgroup] if self.subgroup else [])
        data = check_columns(X, *cols)
        flags = []
        if self.subgroup:
            keep = check_binary(data, self.subgroup) == 1
            data = Dataset(data.frame.loc[keep].reset_index(drop=True), data.supports) if keep.any() else None
            if data is None or len(data) < self.min_size:
                size = 0 if data is None else len(data)
                self.result_ = AssociationResult(
                    math.nan, math.nan, INSUFFICIENT, self.z_threshold, size,
                    (f"subgroup has {size} units, need {self.min_size}",),
                )
                return self
        a_vals = check_binary(data, self.exposure)
        r_vals = check_binary(data, self.probe).astype(float)
        codes, strata = _strata(data, list(self.cond))
        diff, se, excluded = pooled_risk_difference(a_vals, r_vals, codes, len(strata))
        flags += [f"stratum {strata[i]} lacks an exposure arm" for i in excluded]
        if math.isnan(diff):
            verdict = INSUFFICIENT
        else:
            verdict = _verdict(diff, se, self.z_threshold)
        self.result_ = AssociationResult(diff, se, verdict, self.z_threshold, len(data), tuple(flags))
        return self


def alt_outcome_test(data, a: str, r: str, cond: Sequence[str] = (), z_threshold: float = 3.0) -> AssociationResult:
    """Association of the alternative outcome ``r`` with exposure within strata of ``cond``."""
    return AssociationTest(a, r, tuple(cond), z_threshold).fit(data).result_


def negative_control_population_test(
    data, a: str, y: str, subgroup: str, cond: Sequence[str] = (), z_threshold: float = 3.0, min_size: int = 200
) -> AssociationResult:
    """Association of ``y`` with exposure among units flagged as immunologically unresponsive.

    An association there points to confounding or to exposure effects through
    non-immunological paths such as behaviour.
    """
    return AssociationTest(a, y, tuple(cond), z_threshold, subgroup, min_size).fit(data).result_


def analytic_contrasts(
    model: StructuralModel, a: str, r: str, cond: Sequence[str] = (), subgroup: str | None = None
) -> tuple[float, dict[tuple, float]]:
    """Population value of the pooled contrast and the per-stratum risk differences."""
    cond = tuple(cond)
    nodes = ((subgroup,) if subgroup else ()) + cond + (a, r)
    pmf = observational_pmf(model, nodes)
    probs = pmf.probs
    if subgroup:
        probs = probs[pmf.supports[0].index(1)]
    supports = pmf.supports[1:] if subgroup else pmf.supports
    r_vals = np.asarray(supports[-1], dtype=float)
    a_pos = [supports[-2].index(0), supports[-2].index(1)]
    per_stratum = {}
    pooled, weight = 0.0, 0.0
    for idx in np.ndindex(*probs.shape[:-2]):
        cell = probs[idx]
        arm = cell.sum(-1)
        if arm[a_pos[0]] <= 0 or arm[a_pos[1]] <= 0:
            continue
        risk = cell @ r_vals / arm
        rd = float(risk[a_pos[1]] - risk[a_pos[0]])
        label = tuple(supports[k][i] for k, i in enumerate(idx))
        per_stratum[label] = rd
        pooled += float(arm.sum()) * rd
        weight += float(arm.sum())
    return (pooled / weight if weight else math.nan), per_stratum


@dataclass(frozen=True)
class PanelInterpretation:
    """What an exposure-probe association licenses about Y-relevant behaviour.

    ``conclusion`` is ``"i"`` when every open causal path from the exposure to
    the probe passes through a behaviour node that is an ancestor of Y,
    ``"ii"`` when some open path avoids such nodes, and ``"none"`` when the
    exposure has no open causal path to the probe.
    """

    conclusion: str
    paths: tuple[tuple[str, ...], ...] = ()
    witness: tuple[str, ...] | None = None
    invalid_conditioning: frozenset[str] = field(default_factory=frozenset)


def panel_interpretation(
    dag: CausalDag, a: str, b_nodes: Iterable[str], y: str, r: str, cond: Iterable[str] = ()
) -> PanelInterpretation:
    cond = set(cond)
    b_nodes = set(b_nodes)
    relevant = {b for b in b_nodes if y in dag.descendants(b) and b != y}
    paths = [tuple(p) for p in directed_paths(dag, a, r) if not (set(p[1:-1]) & cond)]
    bad = post_exposure_nodes(dag, a, cond)
    if not paths:
        return PanelInterpretation(NO_CAUSAL_PATH, (), None, frozenset(bad))
    for p in paths:
        if not set(p[1:-1]) & relevant:
            return PanelInterpretation(INCONCLUSIVE, tuple(paths), p, frozenset(bad))
    return PanelInterpretation(BEHAVIOUR_AFFECTED, tuple(paths), None, frozenset(bad))


def conditioning_guard(dag: CausalDag, a: str, cond: Iterable[str]) -> list[str]:
    """Flags for conditioning variables affected by the exposure."""
    return [f"invalid conditioning on {n}: descendant of {a}" for n in sorted(post_exposure_nodes(dag, a, cond))]
