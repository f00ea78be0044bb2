import json
from fractions import Fraction

import numpy as np
import pytest

from colluder_lab import (CategoricalLaw, LawError, MissingDataGraph,
                          PositivityError, SimConstraints, Vertex, VertexRole,
                          appendix_a_law, ccm_graph, conditional, joint_probability,
                          kahan_sum, observed_law, random_law)
from colluder_lab.oracles import _cross_censoring_law, _APPENDIX_C_PARAMS
from conftest import brute_joint_probability

O = VertexRole.FULLY_OBSERVED
X1 = VertexRole.TRUE_VARIABLE
R = VertexRole.RESPONSE_INDICATOR

A_PARAMS = tuple(Fraction(x, 20) for x in (6, 8, 12, 5, 10, 7, 9, 4))


@pytest.fixture
def law_a():
    return appendix_a_law(*A_PARAMS)


class TestJointProbability:
    def test_identifiable_binary_law_cell(self, law_a):
        a, b, c, d, e, f, g, h = A_PARAMS
        p = joint_probability(law_a, {"X": 0, "Y": 0, "R_X": 0, "R_Y": 0})
        assert p == a * b * c * d

    def test_point_mass_law(self):
        g = MissingDataGraph([Vertex("A", O, 2), Vertex("B", O, 2)], [("A", "B")])
        law = CategoricalLaw(g, {"A": np.array([1.0, 0.0]),
                                 "B": np.array([[0.0, 1.0], [1.0, 0.0]])})
        assert joint_probability(law, {"A": 0, "B": 1}) == 1.0
        assert joint_probability(law, {"A": 0, "B": 0}) == 0.0
        assert joint_probability(law, {"A": 1, "B": 0}) == 0.0

    def test_chain_law_normalizes(self):
        g = MissingDataGraph(
            [Vertex("A", O, 2), Vertex("B", O, 3), Vertex("C", O, 2)],
            [("A", "B"), ("B", "C")])
        law = random_law(g, seed=5)
        total = sum(joint_probability(law, {"A": a, "B": b, "C": c})
                    for a in range(2) for b in range(3) for c in range(2))
        assert abs(total - 1.0) < 1e-12

    def test_out_of_range_level(self, law_a):
        with pytest.raises(LawError, match="out of range"):
            joint_probability(law_a, {"X": 2, "Y": 0, "R_X": 0, "R_Y": 0})

    def test_against_independent_oracle(self):
        g = ccm_graph(3, 2)
        law = random_law(g, seed=2)
        rng = np.random.default_rng(3)
        for _ in range(1000):
            assignment = {"X": int(rng.integers(3)), "Y": int(rng.integers(2)),
                          "R_X": int(rng.integers(2)), "R_Y": int(rng.integers(2))}
            assert joint_probability(law, assignment) == pytest.approx(
                brute_joint_probability(law, assignment), abs=1e-15)


class TestObservedLaw:
    def test_both_missing_cell_formula(self, law_a):
        a, b, c, d, e, f, g, h = A_PARAMS
        obs = observed_law(law_a)
        na = 2
        cell = obs.event_prob({"X": na, "Y": na, "R_X": 0, "R_Y": 0})
        assert cell == a * (b * d + (1 - b) * f)

    def test_cross_censoring_rational_cells(self):
        law = _cross_censoring_law(*_APPENDIX_C_PARAMS[0])
        obs = observed_law(law)
        assert obs.event_prob({"X": 2, "Y": 2, "R_X": 0, "R_Y": 0}) == Fraction(69, 200)
        assert obs.event_prob({"X": 2, "Y": 1, "R_X": 0, "R_Y": 1}) == Fraction(1, 200)

    def test_no_missingness_reduces_to_full_law(self):
        g = ccm_graph(2, 2)
        law = CategoricalLaw(g, {
            "X": np.array([0.3, 0.7]),
            "Y": np.array([[0.2, 0.8], [0.6, 0.4]]),
            "R_X": np.array([0.0, 1.0]),
            "R_Y": np.array([[[0.0, 1.0], [0.0, 1.0]], [[0.0, 1.0], [0.0, 1.0]]]),
        })
        obs = observed_law(law)
        for x in range(2):
            for y in range(2):
                assert obs.event_prob({"X": x, "Y": y, "R_X": 1, "R_Y": 1}) == \
                    pytest.approx(joint_probability(law, {"X": x, "Y": y, "R_X": 1, "R_Y": 1}))
        assert obs.event_prob({"R_X": 0}) == 0.0

    def test_random_law_observed_is_consistent(self):
        for seed in range(5):
            law = random_law(ccm_graph(3, 3), seed=seed)
            obs = observed_law(law)
            assert abs(obs.total() - 1.0) < 1e-12
            assert obs.consistent()

    def test_commutes_with_marginalizing_fully_observed(self):
        # W has no children among the response indicators, so summing W out
        # before or after applying the proxy mechanism is the same thing.
        g = MissingDataGraph(
            [Vertex("W", O, 2), Vertex("X", X1, 2), Vertex("R_X", R, 2)],
            [("W", "X")], pairs=[("X", "R_X")])
        law = random_law(g, seed=11)
        obs = observed_law(law)
        w = np.asarray(law.cpts["W"], float)
        pxw = np.asarray(law.cpts["X"], float)
        reduced_graph = MissingDataGraph(
            [Vertex("X", X1, 2), Vertex("R_X", R, 2)], pairs=[("X", "R_X")])
        reduced = CategoricalLaw(reduced_graph, {
            "X": w @ pxw, "R_X": np.asarray(law.cpts["R_X"], float)})
        reduced_obs = observed_law(reduced)
        marg = obs.marginal(["X", "R_X"])
        assert np.allclose(marg.values, reduced_obs.values, atol=1e-14)


class TestConditional:
    def test_recovers_cpt_from_joint(self, law_a):
        a, b, c, d, e, f, g, h = A_PARAMS
        joint = law_a.joint_table()
        cond = conditional(joint, targets=["Y"], conditions=["X"])
        assert cond.values[0][0] == c
        assert cond.values[1][0] == h

    def test_full_conditioning_gives_point_mass(self):
        g = MissingDataGraph([Vertex("A", O, 2), Vertex("B", O, 2)], [("A", "B")])
        law = CategoricalLaw(g, {"A": np.array([0.4, 0.6]),
                                 "B": np.array([[0.0, 1.0], [1.0, 0.0]])})
        cond = conditional(law.joint_table(), targets=["B"], conditions=["A"])
        assert cond.values.tolist() == [[0.0, 1.0], [1.0, 0.0]]

    def test_empty_conditions_is_marginal(self, law_a):
        a, b, *_ = A_PARAMS
        cond = conditional(law_a.joint_table(), targets=["X"])
        assert cond.values[0] == b

    def test_null_event_raises(self, law_a):
        g = law_a.graph
        law = CategoricalLaw(g, {
            "X": np.array([1.0, 0.0]),
            "Y": np.array([[0.5, 0.5], [0.5, 0.5]]),
            "R_X": np.array([0.5, 0.5]),
            "R_Y": np.full((2, 2, 2), 0.5),
        })
        with pytest.raises(PositivityError, match="null event"):
            conditional(law.joint_table(), targets=["Y"], conditions=["X"])


class TestRandomLaw:
    def test_exogenous_response_prob_exact(self):
        law = random_law(ccm_graph(2, 2), seed=0)
        assert float(law.cpts["R_X"][1]) == 0.8

    def test_same_seed_identical(self):
        g = ccm_graph(2, 2)
        l1 = random_law(g, seed=42)
        l2 = random_law(g, seed=42)
        for name in l1.cpts:
            assert np.array_equal(l1.cpts[name], l2.cpts[name])

    def test_quaternary_response_probs_pairwise_distinct(self):
        law = random_law(ccm_graph(4, 4), seed=1)
        vals = np.asarray(law.cpts["R_Y"], float)[..., 1].ravel()
        assert len(vals) == 8
        diffs = np.abs(vals[:, None] - vals[None, :])[np.triu_indices(8, 1)]
        assert diffs.min() >= SimConstraints().response_min_gap
        assert vals.min() >= 0.7 and vals.max() <= 0.9

    def test_dependency_gap_enforced(self):
        cons = SimConstraints(dependency_gap=0.3, min_prob=0.0)
        for seed in range(5):
            law = random_law(ccm_graph(2, 2), cons, seed=seed)
            pyx = np.asarray(law.cpts["Y"], float)
            assert 0.5 * np.abs(pyx[0] - pyx[1]).sum() >= 0.3

    def test_min_prob_enforced(self):
        cons = SimConstraints(min_prob=0.15)
        law = random_law(ccm_graph(4, 4), cons, seed=3)
        assert np.asarray(law.cpts["X"], float).min() >= 0.15
        assert np.asarray(law.cpts["Y"], float).min() >= 0.15

    def test_infeasible_constraints_raise(self):
        with pytest.raises(LawError):
            random_law(ccm_graph(2, 2), SimConstraints(dependency_gap=1.5), seed=0)
        with pytest.raises(LawError):
            random_law(ccm_graph(4, 4), SimConstraints(min_prob=0.3), seed=0)
        with pytest.raises(LawError):
            random_law(ccm_graph(4, 4),
                       SimConstraints(response_interval=(0.7, 0.70001)), seed=0)

    def test_continuous_vertex_rejected(self):
        g = MissingDataGraph([Vertex("A", O, None)])
        with pytest.raises(LawError, match="continuous"):
            random_law(g, seed=0)


class TestLawValidation:
    def test_row_sum_violation(self):
        g = MissingDataGraph([Vertex("A", O, 2)])
        with pytest.raises(LawError, match="sums to"):
            CategoricalLaw(g, {"A": np.array([0.5, 0.4])})

    def test_negative_entry(self):
        g = MissingDataGraph([Vertex("A", O, 2)])
        with pytest.raises(LawError, match="outside"):
            CategoricalLaw(g, {"A": np.array([1.2, -0.2])})

    def test_wrong_shape(self):
        g = ccm_graph(2, 2)
        cpts = {"X": np.array([0.5, 0.5]), "Y": np.array([0.5, 0.5]),
                "R_X": np.array([0.5, 0.5]), "R_Y": np.full((2, 2, 2), 0.5)}
        with pytest.raises(LawError, match="shape"):
            CategoricalLaw(g, cpts)

    def test_missing_cpt(self):
        g = MissingDataGraph([Vertex("A", O, 2)])
        with pytest.raises(LawError, match="missing CPT"):
            CategoricalLaw(g, {})

    def test_positivity_flag(self, law_a):
        assert law_a.strictly_positive()
        g = MissingDataGraph([Vertex("A", O, 2)])
        law = CategoricalLaw(g, {"A": np.array([1.0, 0.0])})
        assert not law.strictly_positive()


class TestSerialization:
    def test_float_round_trip(self):
        law = random_law(ccm_graph(2, 2), seed=9)
        doc = law.to_json()
        law2 = CategoricalLaw.from_json(doc)
        for name in law.cpts:
            assert np.array_equal(np.asarray(law.cpts[name], float),
                                  np.asarray(law2.cpts[name], float))

    def test_rational_round_trip(self, law_a):
        doc = json.loads(json.dumps(law_a.to_json()))
        law2 = CategoricalLaw.from_json(doc)
        assert law2.cpts["Y"][0][0] == Fraction(12, 20)

    def test_unknown_keys_rejected(self):
        law = random_law(ccm_graph(2, 2), seed=9)
        doc = law.to_json()
        doc["surprise"] = 1
        with pytest.raises(LawError, match="unknown law keys"):
            CategoricalLaw.from_json(doc)

    def test_parent_order_reconciled(self):
        g = ccm_graph(2, 2)
        law = random_law(g, seed=9)
        doc = law.to_json()
        ry = doc["cpts"]["R_Y"]
        # transpose the stored table to the swapped parent order
        arr = np.array([[list(map(float, cell)) for cell in row] for row in ry["table"]])
        ry["parents"] = ["R_X", "X"]
        ry["table"] = [[[repr(float(arr[x, r, v])) for v in range(2)] for x in range(2)]
                       for r in range(2)]
        law2 = CategoricalLaw.from_json(doc)
        assert np.allclose(np.asarray(law2.cpts["R_Y"], float),
                           np.asarray(law.cpts["R_Y"], float))


def test_kahan_sum_beats_naive():
    values = [1.0] + [1e-16] * 10000
    assert kahan_sum(values) == pytest.approx(1.0 + 1e-12, abs=1e-18)
