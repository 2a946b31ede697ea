import itertools

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from vaxmed.detect import (
    ASSOCIATION,
    INSUFFICIENT,
    NO_ASSOCIATION,
    AssociationTest,
    alt_outcome_test,
    analytic_contrasts,
    conditioning_guard,
    negative_control_population_test,
    panel_interpretation,
)
from vaxmed.graph import d_separated
from vaxmed.scenario import list_builtin, load_builtin
from vaxmed.scm import StructuralModel, bernoulli_node, sample_units

ZERO = 1e-12


@pytest.fixture(scope="module")
def panel1():
    return load_builtin("fig3-panel1")


@pytest.fixture(scope="module")
def panel1_noedge():
    return load_builtin("fig3-panel1-noedge")


def negctrl_model(behaviour_effect=0.4, y_flagged=None):
    """F flags immunologically unresponsive units; in them the exposure acts only through B."""
    y = {}
    for a, b, f, h in itertools.product((0, 1), repeat=4):
        if f and y_flagged is not None:
            y[(a, b, f, h)] = y_flagged
        else:
            y[(a, b, f, h)] = 0.25 - 0.12 * (0 if f else a) + 0.1 * b + 0.1 * h
    return StructuralModel([
        bernoulli_node("F", (), 0.5), bernoulli_node("H", (), 0.5),
        bernoulli_node("A", ("H",), {0: 0.3, 1: 0.7}),
        bernoulli_node("B", ("A", "H"), {(a, h): 0.3 + behaviour_effect * a + 0.1 * h for a in (0, 1) for h in (0, 1)}),
        bernoulli_node("Y", ("A", "B", "F", "H"), y),
    ])


class TestAltOutcome:
    def test_association_with_behaviour_edge(self, panel1):
        pooled, per = analytic_contrasts(panel1.model, "A", "R", ["H"])
        assert pooled > 0 and all(v > 0 for v in per.values())
        d = sample_units(panel1.model, 10**6, seed=1)
        assert alt_outcome_test(d, "A", "R", ["H"]).verdict == ASSOCIATION

    def test_no_association_without_edge(self, panel1_noedge):
        pooled, per = analytic_contrasts(panel1_noedge.model, "A", "R", ["H"])
        assert abs(pooled) <= ZERO and all(abs(v) <= ZERO for v in per.values())
        assert d_separated(panel1_noedge.dag, "A", "R", {"H"})
        d = sample_units(panel1_noedge.model, 10**6, seed=1)
        assert alt_outcome_test(d, "A", "R", ["H"]).verdict == NO_ASSOCIATION

    def test_constant_probe(self):
        d = pd.DataFrame({"A": [0, 1, 0, 1, 1], "R": [0] * 5, "H": [0, 0, 1, 1, 1]})
        res = alt_outcome_test(d, "A", "R", ["H"])
        assert res.difference == 0 and res.verdict == NO_ASSOCIATION

    def test_empty_arm_stratum_is_excluded(self):
        d = pd.DataFrame({"A": [0, 1, 0, 1, 1, 1], "R": [0, 1, 1, 1, 0, 1], "H": [0, 0, 0, 0, 1, 1]})
        res = alt_outcome_test(d, "A", "R", ["H"])
        assert res.difference == pytest.approx(0.5)
        assert res.flags and "(1,)" in res.flags[0]

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(0, 2)), min_size=8, max_size=200),
           st.floats(0.5, 4))
    def test_verdict_rule(self, rows, z):
        d = pd.DataFrame(rows, columns=["A", "R", "L"])
        res = alt_outcome_test(d, "A", "R", ["L"], z)
        if res.verdict == INSUFFICIENT:
            assert np.isnan(res.difference)
        else:
            assert (res.verdict == NO_ASSOCIATION) == (abs(res.difference) <= z * res.se)

    def test_estimator_api(self):
        t = AssociationTest("A", "R", ("H",), 2.5)
        assert clone(t).get_params()["z_threshold"] == 2.5


class TestPanels:
    @pytest.mark.parametrize("name,expected", [("fig3-panel1", "i"), ("fig3-panel2", "i"), ("fig3-panel3", "ii")])
    def test_conclusions(self, name, expected):
        sc = load_builtin(name)
        r = sc.roles
        p = panel_interpretation(sc.dag, "A", r["behaviour"], "Y", "R", r.get("cond", []))
        assert p.conclusion == expected
        if expected == "ii":
            assert p.witness == ("A", "B2", "R")

    def test_no_causal_path(self, panel1_noedge):
        assert panel_interpretation(panel1_noedge.dag, "A", ["B"], "Y", "R", ["H"]).conclusion == "none"

    def test_depends_only_on_graph(self):
        a = load_builtin("fig3-panel3")
        raw = a.to_dict()
        raw["nodes"]["R"]["p"] = {k: 0.5 for k in raw["nodes"]["R"]["p"]}
        from vaxmed.scenario import scenario_from_dict

        b = scenario_from_dict(raw)
        args = ("A", ["B1", "B2"], "Y", "R", [])
        assert panel_interpretation(a.dag, *args) == panel_interpretation(b.dag, *args)

    def test_outcome_to_probe_conditioning_guard(self):
        sc = load_builtin("fig3-panel1-yr")
        assert conditioning_guard(sc.dag, "A", ["H", "Y"]) == ["invalid conditioning on Y: descendant of A"]
        assert conditioning_guard(sc.dag, "A", ["H"]) == []


class TestNegativeControl:
    def test_behaviour_path_shows_up(self):
        m = negctrl_model()
        pooled, _ = analytic_contrasts(m, "A", "Y", ["H"], "F")
        assert pooled > 0.02
        d = sample_units(m, 200_000, seed=3)
        assert negative_control_population_test(d, "A", "Y", "F", ["H"]).verdict == ASSOCIATION

    def test_no_behaviour_effect_with_adjustment(self):
        m = negctrl_model(behaviour_effect=0.0)
        pooled, per = analytic_contrasts(m, "A", "Y", ["H"], "F")
        assert abs(pooled) <= ZERO and all(abs(v) <= ZERO for v in per.values())
        d = sample_units(m, 200_000, seed=3)
        assert negative_control_population_test(d, "A", "Y", "F", ["H"]).verdict == NO_ASSOCIATION

    def test_constant_outcome_in_subgroup(self):
        d = sample_units(negctrl_model(y_flagged=0.0), 20_000, seed=3)
        res = negative_control_population_test(d, "A", "Y", "F", ["H"])
        assert res.verdict == NO_ASSOCIATION and res.difference == 0

    def test_small_subgroup(self):
        d = sample_units(negctrl_model(), 300, seed=3)
        res = negative_control_population_test(d, "A", "Y", "F", ["H"])
        assert res.verdict == INSUFFICIENT and res.n < 200
        res = negative_control_population_test(d, "A", "Y", "F", ["H"], min_size=50)
        assert res.verdict != INSUFFICIENT


def test_graphical_empirical_coherence_on_builtins():
    for name in list_builtin():
        sc = load_builtin(name)
        r = sc.roles
        if "probe" not in r:
            continue
        cond = r.get("cond", [])
        if d_separated(sc.dag, r["exposure"], r["probe"], cond):
            _, per = analytic_contrasts(sc.model, r["exposure"], r["probe"], cond)
            assert all(abs(v) <= ZERO for v in per.values()), name
