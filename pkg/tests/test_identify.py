from fractions import Fraction

import numpy as np
import pytest

from colluder_lab import (BinaryColluderQuantities,
                          ConditionalIndependenceError, GraphQueryError,
                          LawError, MissingDataGraph, PositivityError,
                          RankDeficiencyError, Vertex, VertexRole,
                          appendix_a_law, appendix_b_pair, appendix_c_pair,
                          binary_closed_form, build_colluder_system, ccm_graph,
                          colluder_mechanism, cross_censoring_graph,
                          decide_full_law, example_graph, find_colluders,
                          observed_law, or_factorization_check,
                          quantities_from_observed, random_law, rank_test,
                          solve_colluder)
from colluder_lab.identify import enumerate_strata
from colluder_lab.lawtable import CategoricalLaw, ObservedLawTable, SimConstraints
from conftest import appendix_a_params, mechanism_oracle

O = VertexRole.FULLY_OBSERVED
X1 = VertexRole.TRUE_VARIABLE
R = VertexRole.RESPONSE_INDICATOR


def binary_matrix_oracle(q: BinaryColluderQuantities):
    """The 2x2 closed-form system evaluated by plain matrix inversion."""
    a_mat = np.array([
        [q.a * q.b * q.c, q.a * (1 - q.b) * q.h],
        [q.a * q.b * (1 - q.c), q.a * (1 - q.b) * (1 - q.h)],
    ])
    return np.linalg.solve(a_mat, np.array([q.r, q.s]))


@pytest.fixture
def setup_a():
    params = (0.3, 0.4, 0.6, 0.25, 0.5, 0.35, 0.45, 0.2)
    law = appendix_a_law(*params)
    obs = observed_law(law)
    col = find_colluders(law.graph)[0]
    return params, law, obs, col


class TestBuildSystem:
    def test_entries_match_full_law(self, setup_a):
        (a, b, c, d, e, f, g, h), law, obs, col = setup_a
        joint = law.joint_table().values.astype(float)
        p_ry1 = joint[:, :, :, 1].sum()
        sys0 = build_colluder_system(obs, law.graph, col, {}, 0)
        # first factor of each entry is p(Y=y | X=x), free of the indicators here
        want = np.array([[c, h], [1 - c, 1 - h]]) * p_ry1
        assert np.allclose(sys0.a, want, atol=1e-14)
        r = a * (b * c * (1 - d) + (1 - b) * h * (1 - f))
        s = a * (b * (1 - c) * (1 - d) + (1 - b) * (1 - h) * (1 - f))
        assert np.allclose(sys0.b, [r, s], atol=1e-14)

    def test_solution_is_full_law_functional(self, setup_a):
        _, law, obs, col = setup_a
        joint = law.joint_table().values.astype(float)
        p_ry1 = joint[:, :, :, 1].sum()
        for r in (0, 1):
            sys = build_colluder_system(obs, law.graph, col, {}, r)
            sol = solve_colluder(sys)
            truth = [joint[j, :, r, 1].sum() / p_ry1 for j in range(2)]
            assert np.allclose(sol.values, truth, atol=1e-10)
            assert sol.residual <= 1e-10
            assert sol.out_of_range == ()

    def test_single_level_true_variable_collapses(self):
        g = MissingDataGraph(
            [Vertex("X", X1, 1), Vertex("Y", X1, 2), Vertex("R_X", R, 2),
             Vertex("R_Y", R, 2)],
            [("X", "R_Y"), ("R_X", "R_Y")],
            pairs=[("X", "R_X"), ("Y", "R_Y")])
        law = CategoricalLaw(g, {
            "X": np.array([1.0]),
            "Y": np.array([0.3, 0.7]),
            "R_X": np.array([0.2, 0.8]),
            "R_Y": np.array([[[0.3, 0.7], [0.1, 0.9]]]),
        })
        obs = observed_law(law)
        col = find_colluders(g)[0]
        sys0 = build_colluder_system(obs, g, col, {}, 0)
        assert sys0.a.shape == (2, 1)
        sol = solve_colluder(sys0)
        joint = law.joint_table().values.astype(float)
        want = joint[0, :, 0, 1].sum() / joint[:, :, :, 1].sum()
        assert sol.values[0] == pytest.approx(want, abs=1e-12)

    def test_ternary_system_is_wide(self):
        g = ccm_graph(3, 2)
        law = random_law(g, seed=4)
        obs = observed_law(law)
        col = find_colluders(g)[0]
        sys0 = build_colluder_system(obs, g, col, {}, 0)
        assert sys0.a.shape == (2, 3)
        rank, _ = rank_test(sys0)
        assert rank <= 2 < sys0.m
        with pytest.raises(RankDeficiencyError, match="not identifiable"):
            solve_colluder(sys0)

    def test_precondition_checked(self):
        g = cross_censoring_graph(2, 2)
        law = random_law(g, seed=5)
        obs = observed_law(law)
        col = find_colluders(g)[0]
        with pytest.raises(ConditionalIndependenceError, match="conditional independence"):
            build_colluder_system(obs, g, col, {}, 0)

    def test_null_stratum_raises(self):
        g = MissingDataGraph(
            [Vertex("W", O, 2), Vertex("X", X1, 2), Vertex("Y", X1, 2),
             Vertex("R_X", R, 2), Vertex("R_Y", R, 2)],
            [("X", "Y"), ("X", "R_Y"), ("R_X", "R_Y")],
            pairs=[("X", "R_X"), ("Y", "R_Y")])
        law = random_law(g, seed=6)
        cpts = dict(law.cpts)
        cpts["W"] = np.array([1.0, 0.0])
        law = CategoricalLaw(g, cpts)
        obs = observed_law(law)
        col = find_colluders(g)[0]
        with pytest.raises(PositivityError, match="positivity violated at stratum"):
            build_colluder_system(obs, g, col, {"W": 1}, 0)

    def test_stratum_must_pin_indicators_to_one(self):
        g = example_graph("d")
        law = random_law(g, seed=3)
        obs = observed_law(law)
        col = find_colluders(g)[0]  # {X, R_X} of R_Y; stratum holds Z and R_Z
        with pytest.raises(LawError, match="must be set to 1"):
            build_colluder_system(obs, g, col, {"Z": 0, "R_Z": 0}, 0)


class TestRank:
    def test_full_rank_under_dependency(self, setup_a):
        _, law, obs, col = setup_a
        sys0 = build_colluder_system(obs, law.graph, col, {}, 0)
        rank, sv = rank_test(sys0)
        assert rank == 2
        assert sv[1] > 1e-3 * sv[0]

    def test_equal_conditionals_drop_rank(self):
        # p(Y|X) identical across X makes the two columns coincide
        law = appendix_a_law(0.3, 0.4, 0.6, 0.25, 0.5, 0.35, 0.45, 0.6 + 1e-13)
        obs = observed_law(law)
        col = find_colluders(law.graph)[0]
        sys0 = build_colluder_system(obs, law.graph, col, {}, 0)
        rank, _ = rank_test(sys0)
        assert rank == 1
        with pytest.raises(RankDeficiencyError):
            solve_colluder(sys0)

    def test_square_full_rank_matches_plain_inverse(self, setup_a):
        _, law, obs, col = setup_a
        sys0 = build_colluder_system(obs, law.graph, col, {}, 0)
        sol = solve_colluder(sys0)
        direct = np.linalg.solve(sys0.a, sys0.b)
        assert np.allclose(sol.values, direct, atol=1e-12)

    def test_overdetermined_consistent_system_exact(self):
        g = ccm_graph(2, 3)
        law = random_law(g, seed=8)
        obs = observed_law(law)
        col = find_colluders(g)[0]
        sys0 = build_colluder_system(obs, g, col, {}, 0)
        assert sys0.a.shape == (3, 2)
        sol = solve_colluder(sys0)
        assert sol.residual <= 1e-10


class TestMechanism:
    def test_matches_full_law_oracle(self, setup_a):
        _, law, obs, col = setup_a
        mech = colluder_mechanism(obs, law.graph, col)
        oracle = mechanism_oracle(law, "R_X")
        for x in range(2):
            for y in range(2):
                want = oracle({"X": x, "Y": y}, 0)
                assert mech.values[x, y, 0] == pytest.approx(want, abs=1e-8)
                assert mech.values[x, y, 0] + mech.values[x, y, 1] == pytest.approx(1.0, abs=1e-8)

    def test_constant_in_partner_variable(self, setup_a):
        _, law, obs, col = setup_a
        mech = colluder_mechanism(obs, law.graph, col)
        assert np.allclose(mech.values[:, 0, :], mech.values[:, 1, :], atol=1e-12)

    def test_shared_pair_graph_strata(self):
        # two colluders of the same pair: the mechanism conditions on both
        # extra true variables, constant in the partner one
        g = example_graph("f")
        law = random_law(g, seed=12)
        obs = observed_law(law)
        col = [c for c in find_colluders(g) if c.target_indicator == "R_Y"][0]
        mech = colluder_mechanism(obs, g, col)
        assert mech.names == ("X", "Y", "Z", "R_X")
        oracle = mechanism_oracle(law, "R_X")
        for x in range(2):
            for y in range(2):
                for z in range(2):
                    want = oracle({"X": x, "Y": y, "Z": z}, 0)
                    assert mech.values[x, y, z, 0] == pytest.approx(want, abs=1e-8)

    def test_rank_failure_names_stratum(self):
        law = appendix_a_law(0.3, 0.4, 0.6, 0.25, 0.5, 0.35, 0.45, 0.6 + 1e-13)
        obs = observed_law(law)
        col = find_colluders(law.graph)[0]
        with pytest.raises(RankDeficiencyError) as exc:
            colluder_mechanism(obs, law.graph, col)
        assert exc.value.stratum == {}
        assert exc.value.rank == 1 and exc.value.required == 2

    def test_strata_enumeration(self):
        g = example_graph("d")
        col = [c for c in find_colluders(g) if c.target_indicator == "R_Y"][0]
        strata = list(enumerate_strata(g, col))
        assert strata == [{"Z": 0, "R_Z": 1}, {"Z": 1, "R_Z": 1}]


class TestSoundness:
    """Population-level identification on every applicable example graph."""

    def _confounded_setup(self, key, seed):
        # Laws faithful to the bidirected edges: explicit latent parents are
        # sampled, then summed out of both the observed table and the oracle.
        if key == "a":
            extra_directed = [("U1", "X"), ("U1", "Y"), ("U2", "R_X"), ("U2", "R_Y")]
        elif key == "b":
            extra_directed = [("U1", "R_X"), ("U1", "R_Y"), ("U2", "X"), ("U2", "R_Y")]
        else:
            raise ValueError(key)
        aug = MissingDataGraph(
            [Vertex("U1", O, 2), Vertex("U2", O, 2), Vertex("X", X1, 2),
             Vertex("Y", X1, 2), Vertex("R_X", R, 2), Vertex("R_Y", R, 2)],
            [("X", "Y"), ("X", "R_Y"), ("R_X", "R_Y")] + extra_directed,
            pairs=[("X", "R_X"), ("Y", "R_Y")])
        law = random_law(aug, SimConstraints(exogenous_response_prob=0.75), seed=seed)
        obs_aug = observed_law(law)
        marginal = obs_aug.marginal(["X", "Y", "R_X", "R_Y"])
        obs = ObservedLawTable(ccm_graph(2, 2), marginal.values)

        joint = law.joint_table()
        vals = joint.values.astype(float)
        names = list(joint.names)

        def oracle(assignment, r):
            ix = [slice(None)] * len(names)
            ix[names.index("X")] = assignment["X"]
            ix[names.index("Y")] = assignment["Y"]
            ix[names.index("R_Y")] = 1
            ix[names.index("R_X")] = r
            num = vals[tuple(ix)].sum()
            ix[names.index("R_X")] = 1 - r
            return num / (num + vals[tuple(ix)].sum())

        return obs, ccm_graph(2, 2), oracle

    @pytest.mark.parametrize("key", ["a", "b"])
    def test_confounded_graphs(self, key):
        for seed in range(3):
            obs, g, oracle = self._confounded_setup(key, seed)
            col = find_colluders(g)[0]
            mech = colluder_mechanism(obs, g, col)
            for x in range(2):
                for y in range(2):
                    want = oracle({"X": x, "Y": y}, 0)
                    assert mech.values[x, y, 0] == pytest.approx(want, abs=1e-8)

    @pytest.mark.parametrize("key", ["d", "e", "f"])
    def test_multi_colluder_graphs(self, key):
        for seed in range(3):
            g = example_graph(key)
            law = random_law(g, seed=seed)
            obs = observed_law(law)
            for col in find_colluders(g):
                mech = colluder_mechanism(obs, g, col)
                oracle = mechanism_oracle(law, col.response_of_true)
                shape = [2, 2, 2]
                for idx in np.ndindex(*shape):
                    assignment = dict(zip(("X", "Y", "Z"), idx))
                    want = oracle(assignment, 0)
                    assert mech.values[idx + (0,)] == pytest.approx(want, abs=1e-8)


class TestClosedForm:
    def test_recovers_response_probabilities(self, setup_a):
        (a, b, c, d, e, f, g, h), law, obs, col = setup_a
        qty = quantities_from_observed(obs, law.graph, col)
        p0, p1 = binary_closed_form(qty)
        assert p0 == pytest.approx(1 - d, abs=1e-12)
        assert p1 == pytest.approx(1 - f, abs=1e-12)

    def test_symmetric_law(self):
        law = appendix_a_law(0.3, 0.4, 0.6, 0.25, 0.5, 0.25, 0.45, 0.2)
        obs = observed_law(law)
        qty = quantities_from_observed(obs, law.graph, find_colluders(law.graph)[0])
        p0, p1 = binary_closed_form(qty)
        assert p0 == pytest.approx(p1, abs=1e-12)
        assert p0 == pytest.approx(0.75, abs=1e-12)

    def test_matches_matrix_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            a, b, c, d, e, f, g, h = appendix_a_params(rng)
            law = appendix_a_law(a, b, c, d, e, f, g, h)
            obs = observed_law(law)
            qty = quantities_from_observed(obs, law.graph, find_colluders(law.graph)[0])
            got = binary_closed_form(qty)
            want = binary_matrix_oracle(qty)
            assert np.allclose(got, want, atol=1e-12)

    def test_equal_conditionals_rejected(self):
        with pytest.raises(LawError, match="dependency"):
            binary_closed_form(BinaryColluderQuantities(0.3, 0.4, 0.5, 0.5, 0.1, 0.1))

    def test_out_of_range_quantities_rejected(self):
        with pytest.raises(LawError, match="strictly inside"):
            BinaryColluderQuantities(0.0, 0.4, 0.5, 0.6, 0.1, 0.1)


class TestOrFactorization:
    def test_identity_on_colluder_graph(self):
        g = ccm_graph(2, 2)
        for seed in range(10):
            law = random_law(g, seed=seed)
            for ordering in (["R_X", "R_Y"], ["R_Y", "R_X"]):
                assert or_factorization_check(law, ordering) <= 1e-10

    def test_single_indicator_trivial(self):
        g = MissingDataGraph(
            [Vertex("X", X1, 2), Vertex("R_X", R, 2)], pairs=[("X", "R_X")])
        law = random_law(g, seed=1)
        assert or_factorization_check(law, ["R_X"]) == 0.0

    def test_three_indicators_both_orderings(self):
        g = example_graph("d")
        for seed in range(5):
            law = random_law(g, seed=seed)
            assert or_factorization_check(law, ["R_X", "R_Y", "R_Z"]) <= 1e-10
            assert or_factorization_check(law, ["R_Z", "R_Y", "R_X"]) <= 1e-10

    def test_positivity_enforced(self):
        g = MissingDataGraph(
            [Vertex("X", X1, 2), Vertex("R_X", R, 2)],
            [("X", "R_X")], pairs=[("X", "R_X")])
        law = CategoricalLaw(g, {"X": np.array([0.5, 0.5]),
                                 "R_X": np.array([[1.0, 0.0], [0.5, 0.5]])})
        with pytest.raises(PositivityError):
            or_factorization_check(law, ["R_X"])

    def test_bad_ordering_rejected(self, setup_a):
        _, law, _, _ = setup_a
        with pytest.raises(LawError, match="permutation"):
            or_factorization_check(law, ["R_X"])


class TestVerdicts:
    def test_example_graph_decisions(self):
        for key in "abdef":
            v = decide_full_law(example_graph(key))
            assert v.identifiable, key
            assert v.rank_condition_pending, key
        v = decide_full_law(example_graph("c"))
        assert not v.identifiable
        assert [r.kind for r in v.reasons] == ["m-separation"]

    def test_ternary_binary_is_structurally_deficient(self):
        v = decide_full_law(ccm_graph(3, 2))
        assert not v.identifiable
        assert [r.kind for r in v.reasons] == ["structural-rank"]

    def test_self_censoring_detected(self):
        g = MissingDataGraph(
            [Vertex("X", X1, 2), Vertex("Y", X1, 2), Vertex("R_X", R, 2),
             Vertex("R_Y", R, 2)],
            [("X", "Y"), ("X", "R_Y"), ("R_X", "R_Y"), ("Y", "R_Y")],
            pairs=[("X", "R_X"), ("Y", "R_Y")])
        v = decide_full_law(g)
        assert not v.identifiable
        assert any(r.kind == "self-censoring" for r in v.reasons)

    def test_no_colluders_no_pending_rank(self):
        g = MissingDataGraph(
            [Vertex("X", X1, 2), Vertex("R_X", R, 2)], pairs=[("X", "R_X")])
        v = decide_full_law(g)
        assert v.identifiable and not v.rank_condition_pending

    def test_continuous_vertex_outside_colluder_is_fine(self):
        g = MissingDataGraph(
            [Vertex("W", O, None), Vertex("X", X1, 2), Vertex("Y", X1, 2),
             Vertex("R_X", R, 2), Vertex("R_Y", R, 2)],
            [("W", "X"), ("X", "Y"), ("X", "R_Y"), ("R_X", "R_Y")],
            pairs=[("X", "R_X"), ("Y", "R_Y")])
        v = decide_full_law(g)
        assert v.identifiable and v.rank_condition_pending

    def test_continuous_colluder_variable_errors(self):
        g = MissingDataGraph(
            [Vertex("X", X1, None), Vertex("Y", X1, 2), Vertex("R_X", R, 2),
             Vertex("R_Y", R, 2)],
            [("X", "Y"), ("X", "R_Y"), ("R_X", "R_Y")],
            pairs=[("X", "R_X"), ("Y", "R_Y")])
        with pytest.raises(GraphQueryError, match="category counts"):
            decide_full_law(g)

    def test_cross_censoring_fails_m_separation(self):
        v = decide_full_law(cross_censoring_graph(2, 2))
        assert not v.identifiable
        assert any(r.kind == "m-separation" for r in v.reasons)

    def test_json_shape(self):
        v = decide_full_law(example_graph("c"))
        doc = v.to_json()
        assert set(doc) == {"decision", "reasons", "rank_condition_pending"}
        assert doc["reasons"][0].keys() == {"kind", "colluder", "detail"}


class TestObservationalInvariance:
    def test_cross_censoring_pair_fails_identically(self):
        pair = appendix_c_pair()
        g = pair.law1.graph
        col = find_colluders(g)[0]
        errors = []
        for law in (pair.law1, pair.law2):
            with pytest.raises(ConditionalIndependenceError) as exc:
                colluder_mechanism(observed_law(law), g, col)
            errors.append(str(exc.value))
        assert errors[0] == errors[1]

    def test_ternary_pair_rank_failures_identical(self):
        pair = appendix_b_pair(Fraction(3, 10), Fraction(1, 2), Fraction(2, 5),
                               Fraction(1, 5), Fraction(3, 10), Fraction(2, 5),
                               Fraction(1, 2), Fraction(3, 5), Fraction(7, 10),
                               Fraction(4, 10))
        g = pair.law1.graph
        col = find_colluders(g)[0]
        sigs = []
        for law in (pair.law1, pair.law2):
            with pytest.raises(RankDeficiencyError) as exc:
                colluder_mechanism(observed_law(law), g, col)
            sigs.append(exc.value.signature())
        assert sigs[0] == sigs[1]


class TestBothStrategiesAgree:
    def test_two_identification_routes_rebuild_the_same_full_law(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            a, b, c, d, e, f, g, h = appendix_a_params(rng, min_ch_gap=0.05)
            law = appendix_a_law(a, b, c, d, e, f, g, h)
            graph = law.graph
            obs = observed_law(law)
            col = find_colluders(graph)[0]

            # pieces identified directly from the observed table
            a_hat = float(obs.event_prob({"R_X": 0}))
            b_hat = float(obs.event_prob({"X": 0, "R_X": 1})) / float(obs.event_prob({"R_X": 1}))
            cx = [float(obs.event_prob({"X": x, "R_X": 1, "R_Y": 1})) for x in (0, 1)]
            c_hat = float(obs.event_prob({"X": 0, "Y": 0, "R_X": 1, "R_Y": 1})) / cx[0]
            h_hat = float(obs.event_prob({"X": 1, "Y": 0, "R_X": 1, "R_Y": 1})) / cx[1]
            e_hat = float(obs.event_prob({"X": 0, "R_X": 1, "R_Y": 0})) / ((1 - a_hat) * b_hat)
            g_hat = float(obs.event_prob({"X": 1, "R_X": 1, "R_Y": 0})) / ((1 - a_hat) * (1 - b_hat))

            # route 1: closed form for the unobserved response arm
            qty = quantities_from_observed(obs, graph, col)
            ry0_route1 = binary_closed_form(qty)

            # route 2: the solved mechanism, moved to the unobserved arm via
            # the odds ratio against the fully observed arm
            mech = colluder_mechanism(obs, graph, col)
            ry0_route2 = []
            for x in (0, 1):
                mu0 = mech.values[x, 0, 0]
                kappa = 1 - (g_hat if x else e_hat)
                ry0_route2.append(mu0 / (1 - mu0) * (1 - a_hat) / a_hat * kappa)

            assert np.allclose(ry0_route1, ry0_route2, atol=1e-8)

            def rebuild(ry0):
                return CategoricalLaw(graph, {
                    "X": np.array([b_hat, 1 - b_hat]),
                    "Y": np.array([[c_hat, 1 - c_hat], [h_hat, 1 - h_hat]]),
                    "R_X": np.array([a_hat, 1 - a_hat]),
                    "R_Y": np.array([
                        [[1 - ry0[0], ry0[0]], [e_hat, 1 - e_hat]],
                        [[1 - ry0[1], ry0[1]], [g_hat, 1 - g_hat]]]),
                })

            truth = law.joint_table().values.astype(float)
            for ry0 in (ry0_route1, ry0_route2):
                got = rebuild(list(ry0)).joint_table().values.astype(float)
                assert np.allclose(got, truth, atol=1e-8)
