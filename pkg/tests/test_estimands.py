import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import t1_risk
from strategies import PROB, figure_s1_models, mediation_models
from vaxmed.estimands import (
    EstimandValue,
    controlled_direct_effect,
    format_probability,
    format_ve,
    natural_direct_effect,
    natural_indirect_effect,
    path_specific_effects,
    total_effect,
    trial_estimand,
)
from vaxmed.exceptions import InputError
from vaxmed.scm import (
    StructuralModel,
    analytic_expectation,
    bernoulli_node,
    cf,
    deterministic_node,
    table1_model,
    table_node,
)

T1 = table1_model()


def blinded_model(b_at_blind=0.5, pr_b=(0.3, 0.7), pr_y=None):
    pr_y = pr_y or {(0, 0): .25, (0, 1): .35, (1, 0): .14, (1, 1): .21}
    return StructuralModel([
        bernoulli_node("A"),
        table_node("P", ("A",), (-1, 0, 1), [1.0], {(0,): [0], (1,): [1]}),
        bernoulli_node("B", ("P",), {-1: b_at_blind, 0: pr_b[0], 1: pr_b[1]}, parent_supports={"P": (-1, 0, 1)}),
        bernoulli_node("Y", ("A", "B"), pr_y),
    ])


class TestWorkedExample:
    def test_total_effect(self):
        v = total_effect(T1, "A", "Y")
        assert v.name == "tau_rw"
        assert v.risk_treated == pytest.approx(float(t1_risk(1, 1)), abs=1e-9)
        assert v.risk_control == pytest.approx(float(t1_risk(0, 0)), abs=1e-9)
        assert v.difference == pytest.approx(-0.091, abs=1e-9)
        assert v.ve == pytest.approx(0.325, abs=1e-9)
        assert v.display() == {"risk_treated": "0.19", "risk_control": "0.28", "difference": "-0.09", "ve": "32.5%"}

    def test_nde(self):
        v = natural_direct_effect(T1, "A", "B", "Y")
        assert (v.risk_treated, v.risk_control) == pytest.approx((0.161, 0.280), abs=1e-9)
        assert v.difference == pytest.approx(-0.119, abs=1e-9)
        assert v.ve == pytest.approx(0.425, abs=1e-9)
        assert v.display()["difference"] == "-0.12" and v.display()["ve"] == "42.5%"

    def test_nie(self):
        assert natural_indirect_effect(T1, "A", "B", "Y").difference == pytest.approx(0.028, abs=1e-12)

    @pytest.mark.parametrize("level,expected", [(0, -0.11), (1, -0.14)])
    def test_cde(self, level, expected):
        v = controlled_direct_effect(T1, "A", "B", "Y", level)
        assert v.name == f"cde({level})"
        assert v.difference == pytest.approx(expected, abs=1e-12)

    def test_cde_level_outside_support(self):
        with pytest.raises(InputError):
            controlled_direct_effect(T1, "A", "B", "Y", 2)

    def test_nde_cross_world_control_equals_plain_control(self):
        # E[Y^{0, B^0}] = E[Y^0] by composition
        assert analytic_expectation(T1, cf("Y", A=0, B=cf("B", A=0))) == pytest.approx(
            natural_direct_effect(T1, "A", "B", "Y").risk_control, abs=1e-12
        )


class TestTrivialCases:
    def test_null_effect(self):
        m = StructuralModel([bernoulli_node("A"), bernoulli_node("Y", (), 0.3)])
        assert total_effect(m, "A", "Y").difference == 0

    def test_no_mediated_path(self):
        m = StructuralModel([
            bernoulli_node("A"), bernoulli_node("B", (), 0.4),
            bernoulli_node("Y", ("A", "B"), {(0, 0): .2, (0, 1): .5, (1, 0): .1, (1, 1): .3}),
        ])
        assert natural_direct_effect(m, "A", "B", "Y").difference == pytest.approx(
            total_effect(m, "A", "Y").difference, abs=1e-12)
        assert natural_indirect_effect(m, "A", "B", "Y").difference == pytest.approx(0, abs=1e-12)

    def test_behaviour_constant_in_exposure(self):
        m = StructuralModel([
            bernoulli_node("A"),
            table_node("B", ("A",), (0, 1), [0.4, 0.6], {(0,): [0, 1], (1,): [0, 1]}),
            bernoulli_node("Y", ("A", "B"), {(0, 0): .2, (0, 1): .5, (1, 0): .1, (1, 1): .3}),
        ])
        assert natural_indirect_effect(m, "A", "B", "Y").difference == pytest.approx(0, abs=1e-12)

    def test_outcome_ignores_behaviour(self):
        m = StructuralModel([
            bernoulli_node("A"), bernoulli_node("B", ("A",), {0: .3, 1: .7}),
            bernoulli_node("Y", ("A", "B"), {(0, 0): .3, (0, 1): .3, (1, 0): .1, (1, 1): .1}),
        ])
        tau = total_effect(m, "A", "Y").difference
        assert controlled_direct_effect(m, "A", "B", "Y", 0).difference == pytest.approx(tau, abs=1e-12)
        assert controlled_direct_effect(m, "A", "B", "Y", 1).difference == pytest.approx(tau, abs=1e-12)

    def test_ve_undefined_without_control_risk(self):
        v = EstimandValue("x", 0.1, 0.0)
        assert v.ve is None and v.display()["ve"] == "NA"

    def test_distinct_roles(self):
        with pytest.raises(InputError):
            natural_direct_effect(T1, "A", "A", "Y")


class TestFormatting:
    @pytest.mark.parametrize("x,s", [(-0.091, "-0.09"), (0.189, "0.19"), (0.28, "0.28"), (-0.001, "0.00"),
                                     (-0.119, "-0.12"), (0.161, "0.16")])
    def test_probability(self, x, s):
        assert format_probability(x) == s

    @pytest.mark.parametrize("x,s", [(0.325, "32.5%"), (0.425, "42.5%"), (-0.0001, "0.0%")])
    def test_ve(self, x, s):
        assert format_ve(x) == s


class TestTrialEstimand:
    def test_blind_matches_unvaccinated_behaviour(self):
        # B responds to P = -1 as it does to P = 0, so blinding keeps behaviour at its unvaccinated law
        blind = trial_estimand(blinded_model(b_at_blind=0.3), "A", "P", "Y")
        assert blind.difference == pytest.approx(natural_direct_effect(T1, "A", "B", "Y").difference, abs=1e-12)

    def test_outcome_ignores_behaviour(self):
        m = blinded_model(pr_y={(0, 0): .3, (0, 1): .3, (1, 0): .2, (1, 1): .2})
        assert trial_estimand(m, "A", "P", "Y").difference == pytest.approx(
            total_effect(m, "A", "Y").difference, abs=1e-12)

    def test_no_direct_effect(self):
        m = blinded_model(pr_y={(0, 0): .3, (0, 1): .4, (1, 0): .3, (1, 1): .4})
        assert trial_estimand(m, "A", "P", "Y").difference == pytest.approx(0, abs=1e-12)

    def test_requires_perception_support(self):
        with pytest.raises(InputError):
            trial_estimand(T1, "A", "B", "Y")
        with pytest.raises(InputError):
            trial_estimand(T1, "A", "P", "Y")


class TestPathSpecific:
    def _model(self, bm=(0.6, 0.4), bsc=(0.3, 0.6), y=None):
        y = y or (lambda a, m, s: 0.3 - 0.12 * a - 0.08 * m + 0.1 * s)
        return StructuralModel([
            bernoulli_node("A"),
            bernoulli_node("BM", ("A",), {0: bm[0], 1: bm[1]}),
            bernoulli_node("BSC", ("A",), {0: bsc[0], 1: bsc[1]}),
            bernoulli_node("Y", ("A", "BM", "BSC"), {c: y(*c) for c in itertools.product((0, 1), repeat=3)}),
        ])

    def test_residual_zero(self):
        assert abs(path_specific_effects(self._model(), "A", "BM", "BSC", "Y").residual) <= 1e-12

    def test_no_mask_response_means_mask_blocking_changes_nothing(self):
        res = path_specific_effects(self._model(bm=(0.5, 0.5)), "A", "BM", "BSC", "Y")
        assert res.mask_blocked.difference == pytest.approx(res.total.difference, abs=1e-12)

    def test_inert_mask_contacts_blocked_is_nde(self):
        m = self._model(y=lambda a, m, s: 0.25 - 0.11 * a + 0.1 * s + 0.0 * m)
        res = path_specific_effects(m, "A", "BM", "BSC", "Y")
        ref = StructuralModel([
            bernoulli_node("A"), bernoulli_node("BSC", ("A",), {0: 0.3, 1: 0.6}),
            bernoulli_node("Y", ("A", "BSC"), {(a, s): 0.25 - 0.11 * a + 0.1 * s for a in (0, 1) for s in (0, 1)}),
        ])
        assert res.contacts_blocked.difference == pytest.approx(
            natural_direct_effect(ref, "A", "BSC", "Y").difference, abs=1e-12)

    def test_role_mismatch(self):
        with pytest.raises(InputError):
            path_specific_effects(T1, "A", "B", "Y", "Y")
        m = StructuralModel([
            bernoulli_node("A"), bernoulli_node("BM", ("A",), {0: .5, 1: .4}),
            bernoulli_node("BSC", ("A", "BM"), {c: .3 for c in itertools.product((0, 1), repeat=2)}),
            bernoulli_node("Y", ("A", "BM", "BSC"), {c: .2 for c in itertools.product((0, 1), repeat=3)}),
        ])
        with pytest.raises(InputError):
            path_specific_effects(m, "A", "BM", "BSC", "Y")

    @settings(max_examples=100, deadline=None)
    @given(figure_s1_models())
    def test_decomposition_property(self, model):
        res = path_specific_effects(model, "A", "BM", "BSC", "Y")
        assert abs(res.residual) <= 1e-12
        assert res.total.difference == pytest.approx(total_effect(model, "A", "Y").difference, abs=1e-12)


class TestProperties:
    @settings(max_examples=100, deadline=None)
    @given(mediation_models())
    def test_nde_plus_nie_is_total(self, m):
        nde = natural_direct_effect(m, "A", "B", "Y").difference
        nie = natural_indirect_effect(m, "A", "B", "Y").difference
        assert abs(nde + nie - total_effect(m, "A", "Y").difference) <= 1e-12

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.01, 1), st.floats(0, 1), st.floats(0, 1))
    def test_ve_decreasing_in_treated_risk(self, rc, r1, r2):
        if r1 == r2:
            return
        lo, hi = sorted((r1, r2))
        ve_lo, ve_hi = EstimandValue("x", lo, rc).ve, EstimandValue("x", hi, rc).ve
        assert ve_lo >= ve_hi
        if (hi - lo) / rc > 1e-9:  # below that the gap can vanish in float rounding
            assert ve_lo > ve_hi

    @settings(max_examples=100, deadline=None)
    @given(PROB, PROB, PROB, PROB, PROB, PROB)
    def test_risk_compensation_moves_total_above_nde(self, b0, b1, y00, y01, y10, y11):
        # vaccination raises risky behaviour and risky behaviour raises risk under vaccination
        if not (b1 > b0 and y11 > y10):
            return
        m = table1_model((b0, b1), {(0, 0): y00, (0, 1): y01, (1, 0): y10, (1, 1): y11})
        assert total_effect(m, "A", "Y").difference > natural_direct_effect(m, "A", "B", "Y").difference

    def test_total_smaller_in_magnitude_across_behaviour_sweep(self):
        grid = [k / 20 for k in range(1, 20)]
        for b0, b1 in itertools.product(grid, grid):
            if b1 <= b0:
                continue
            m = table1_model((b0, b1))
            tau = total_effect(m, "A", "Y").difference
            nde = natural_direct_effect(m, "A", "B", "Y").difference
            assert abs(tau) <= abs(nde)

    @settings(max_examples=50, deadline=None)
    @given(mediation_models(coupling="independent"), st.permutations(range(4)))
    def test_noise_relabelling_invariance(self, m, perm):
        from vaxmed.scm import NodeSpec

        spec = m.nodes["Y"]
        order = [p for p in perm if p < spec.n_atoms] + list(range(4, spec.n_atoms))
        y2 = NodeSpec("Y", spec.parents, spec.support, spec.noise_probs[order], spec.table[..., order],
                      spec.parent_supports)
        m2 = StructuralModel([m.nodes["A"], m.nodes["B"], y2])
        for fn in (total_effect,):
            assert fn(m, "A", "Y").difference == pytest.approx(fn(m2, "A", "Y").difference, abs=1e-12)
        assert natural_direct_effect(m, "A", "B", "Y").difference == pytest.approx(
            natural_direct_effect(m2, "A", "B", "Y").difference, abs=1e-12)


def test_deterministic_zero_control_risk():
    m = StructuralModel([bernoulli_node("A"), deterministic_node("Y", ("A",), lambda a: a)])
    v = total_effect(m, "A", "Y")
    assert v.risk_control == 0 and v.ve is None
