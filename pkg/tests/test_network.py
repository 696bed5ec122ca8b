"""Inference: worked example, oracle equivalence, evidence semantics."""

import random

import pytest

from studymap.errors import InferenceBudgetError, ModelError, UnknownEntityError
from studymap.evidence import KIND_MULTIPLE_CHOICE, QuestionMeta
from studymap.network import (
    build_network,
    dump_network,
    elimination_order,
    enumerate_oracle,
    posteriors,
    set_evidence,
)
from tests.conftest import random_meta, random_network, random_tree_map

# Exact fractions for the worked single-question course example, computed
# by enumerating the 16 joint assignments of D, I, E, Q by hand:
#   P(Q=1) = 0.525,  P(D=1,Q=1) = 0.345,  P(I=1,Q=1) = 0.3175
P_D_GIVEN_CORRECT = 0.345 / 0.525  # 0.657142857...
P_I_GIVEN_CORRECT = 0.3175 / 0.525  # 0.604761904...
P_D_GIVEN_WRONG = (0.5 - 0.345) / (1.0 - 0.525)  # 0.326315789...


class TestBuild:
    def test_concepts_only(self, course_map):
        net = build_network(course_map, [])
        assert net.variable_count == 4
        assert net.evidence == {}

    def test_one_answer_adds_one_node(self, course_map, course_question):
        net = build_network(course_map, [(course_question, 1)])
        assert net.variable_count == 5
        assert net.evidence == {"Q": 1}

    def test_reanswer_keeps_one_node_last_outcome(self, course_map, course_question):
        net = build_network(course_map, [(course_question, 0), (course_question, 1)])
        assert net.variable_count == 5
        assert net.evidence == {"Q": 1}

    def test_unknown_concept_rejected(self, course_map):
        meta = QuestionMeta("q", KIND_MULTIPLE_CHOICE, 0.25, 0.1, 1, 0.3, (("missing", 1.0),))
        with pytest.raises(ModelError, match="unknown concept"):
            build_network(course_map, [(meta, 1)])

    def test_conflicting_metas_rejected(self, course_map, course_question):
        other = QuestionMeta("Q", KIND_MULTIPLE_CHOICE, 0.25, 0.1, 2, 0.3, (("D", 1.0),))
        with pytest.raises(ModelError, match="conflicting"):
            build_network(course_map, [(course_question, 1), (other, 1)])

    def test_node_count_bound(self, demo_map):
        metas = [
            QuestionMeta(f"q{i}", KIND_MULTIPLE_CHOICE, 0.25, 0.1, 1, 0.3, (("pd_gradient", 1.0),))
            for i in range(10)
        ]
        net = build_network(demo_map, [(m, 1) for m in metas])
        accumulators = sum(1 for v in net.var_kind.values() if v == "accumulator")
        assert net.variable_count == len(demo_map.nodes) + accumulators + 10


class TestSetEvidence:
    def test_replacement(self, course_map, course_question):
        net = build_network(course_map, [(course_question, 1)])
        net = set_evidence(net, "Q", 0)
        assert net.evidence == {"Q": 0}

    def test_idempotent(self, course_map, course_question):
        net = build_network(course_map, [(course_question, 1)])
        again = set_evidence(net, "Q", 1)
        assert again.evidence == {"Q": 1}

    def test_unknown_id(self, course_map, course_question):
        net = build_network(course_map, [(course_question, 1)])
        with pytest.raises(UnknownEntityError):
            set_evidence(net, "nope", 1)

    def test_original_untouched(self, course_map, course_question):
        net = build_network(course_map, [(course_question, 1)])
        set_evidence(net, "Q", 0)
        assert net.evidence == {"Q": 1}


class TestWorkedExample:
    def test_no_evidence_priors(self, course_map):
        post = posteriors(build_network(course_map, []))
        assert post == {"C": 0.5, "D": 0.5, "I": 0.5, "E": 0.5}

    def test_correct_answer(self, course_map, course_question):
        post = posteriors(build_network(course_map, [(course_question, 1)]))
        assert post["D"] == pytest.approx(P_D_GIVEN_CORRECT, abs=1e-12)
        assert post["I"] == pytest.approx(P_I_GIVEN_CORRECT, abs=1e-12)
        assert post["E"] == pytest.approx(0.5, abs=1e-12)
        assert post["C"] == pytest.approx(0.61, abs=1e-12)

    def test_wrong_answer(self, course_map, course_question):
        post = posteriors(build_network(course_map, [(course_question, 0)]))
        assert post["D"] == pytest.approx(P_D_GIVEN_WRONG, abs=1e-12)

    def test_matches_oracle_exactly(self, course_map, course_question):
        net = build_network(course_map, [(course_question, 1)])
        post = posteriors(net)
        oracle = enumerate_oracle(net)
        for cid in course_map.nodes:
            assert post[cid] == pytest.approx(oracle[cid], abs=1e-12)


class TestOracle:
    def test_single_variable(self):
        rng = random.Random(1)
        cmap = random_tree_map(rng, 1)
        net = build_network(cmap, [])
        assert enumerate_oracle(net) == {"c0": 0.5}

    def test_too_many_variables(self, demo_map):
        net = build_network(demo_map, [])
        with pytest.raises(ModelError, match="22"):
            enumerate_oracle(net)

    def test_randomized_equivalence(self):
        rng = random.Random(987)
        for _ in range(60):
            net = random_network(rng, max_vars=12)
            post = posteriors(net)
            oracle = enumerate_oracle(net)
            for cid, value in oracle.items():
                assert post[cid] == pytest.approx(value, abs=1e-9)


class TestEliminationOrder:
    def test_chain_eliminates_ends_first(self):
        from studymap.concepts import ConceptMap, ConceptNode

        cmap = ConceptMap(
            root="a",
            nodes={
                "a": ConceptNode("a", "a", (("b", 1.0),)),
                "b": ConceptNode("b", "b", (("c", 1.0),)),
                "c": ConceptNode("c", "c"),
            },
        )
        net = build_network(cmap, [])
        order = elimination_order(net)
        assert set(order) == {"a", "b", "c"}
        assert order[0] != "b"  # the chain middle has the highest degree

    def test_star_spokes_before_hub(self):
        # Five pairwise factors sharing hub 0: min-degree strips the
        # degree-1 spokes while the hub still has neighbors; the hub can
        # only fall in the final all-ties stretch.
        from studymap.network import _min_degree_order

        scopes = [(0, i) for i in range(1, 6)]
        order = _min_degree_order(scopes, set(), lambda v: "zhub" if v == 0 else f"v{v}")
        assert order[-1] == 0
        assert set(order[:4]) <= {1, 2, 3, 4, 5}

    def test_order_invariance_of_marginals(self, course_map, course_question):
        # Two fixed, deliberately different elimination orders produce the
        # same marginals (and both agree with the min-degree path).
        from studymap.network import _eliminate, _evidence_reduced_factors, _product

        net = build_network(course_map, [(course_question, 1)])
        post = posteriors(net)

        def query_with_order(target_id: str, var_order: list[str]) -> float:
            target = net.var_index[target_id]
            factors = [f for f in _evidence_reduced_factors(net) if f.vars]
            order = [net.var_index[v] for v in var_order if v != target_id]
            remaining = _eliminate(factors, order, net.budget_entries)
            result = None
            for f in remaining:
                result = f if result is None else _product(result, f, net.budget_entries)
            assert result is not None and result.vars == (target,)
            return float(result.table[1] / (result.table[0] + result.table[1]))

        unobserved = [vid for vid in net.var_ids if vid not in net.evidence]
        for cid in course_map.nodes:
            forward = query_with_order(cid, sorted(unobserved))
            backward = query_with_order(cid, sorted(unobserved, reverse=True))
            assert forward == pytest.approx(backward, abs=1e-12)
            assert post[cid] == pytest.approx(forward, abs=1e-12)

    def test_deterministic(self, demo_map):
        net = build_network(demo_map, [])
        assert elimination_order(net) == elimination_order(net)


class TestProperties:
    def test_aggregate_linearity_random_evidence(self):
        # Holds whenever evidence attaches to leaves: an aggregate is then
        # independent of the evidence given its children, so expectation
        # distributes over the additive CPT.  A question attached to the
        # aggregate itself (or above it) breaks that conditional
        # independence, which is why the generator is leaves-only here.
        rng = random.Random(321)
        for _ in range(30):
            net = random_network(rng, max_vars=13, leaves_only=True)
            post = posteriors(net)
            for node in net.concept_map.nodes.values():
                if node.is_leaf:
                    continue
                expected = sum(w * post[cid] for cid, w in node.children)
                assert post[node.id] == pytest.approx(expected, abs=1e-9)

    def test_single_answer_monotone_vs_prior(self):
        rng = random.Random(654)
        for _ in range(100):
            cmap = random_tree_map(rng, rng.randint(2, 8))
            baseline = posteriors(build_network(cmap, []))
            meta = random_meta(rng, cmap, "q0")
            outcome = rng.randint(0, 1)
            post = posteriors(build_network(cmap, [(meta, outcome)]))
            for cid in cmap.nodes:
                if outcome == 1:
                    assert post[cid] >= baseline[cid] - 1e-12
                else:
                    assert post[cid] <= baseline[cid] + 1e-12

    def test_irrelevant_concept_keeps_prior(self, course_map, course_question):
        post = posteriors(build_network(course_map, [(course_question, 1)]))
        assert post["E"] == pytest.approx(0.5, abs=1e-12)

    def test_reanswer_equals_fresh(self, course_map, course_question):
        replayed = build_network(course_map, [(course_question, 1)])
        replayed = set_evidence(replayed, "Q", 0)
        fresh = build_network(course_map, [(course_question, 0)])
        post_replayed = posteriors(replayed)
        post_fresh = posteriors(fresh)
        for cid in course_map.nodes:
            assert post_replayed[cid] == pytest.approx(post_fresh[cid], abs=1e-12)

    def test_demo_map_factorized_inference(self, demo_map):
        """The 13-child chapter goes through chain factorization; posteriors
        still satisfy the additive rule."""
        meta = QuestionMeta(
            "q0", KIND_MULTIPLE_CHOICE, 0.25, 0.1, 2, 0.3, (("pd_chain_rule", 1.0),)
        )
        net = build_network(demo_map, [(meta, 1)], fan_in_max=12)
        assert any(k == "accumulator" for k in net.var_kind.values())
        post = posteriors(net)
        node = demo_map.nodes["partial"]
        expected = sum(w * post[cid] for cid, w in node.children)
        assert post["partial"] == pytest.approx(expected, abs=1e-9)
        assert post["pd_chain_rule"] > 0.5
        assert post["lim_definition"] == pytest.approx(0.5, abs=1e-12)

    def test_budget_error_names_clique(self, demo_map):
        meta = QuestionMeta(
            "q0", KIND_MULTIPLE_CHOICE, 0.25, 0.1, 2, 0.3, (("pd_chain_rule", 1.0),)
        )
        with pytest.raises(InferenceBudgetError) as err:
            posteriors(build_network(demo_map, [(meta, 1)], budget_entries=4))
        assert err.value.clique_size > 2

    def test_strategy_changes_interior_rows_only(self, course_map, course_question):
        linear = posteriors(build_network(course_map, [(course_question, 1)], "linear"))
        logistic = posteriors(build_network(course_map, [(course_question, 1)], "logistic"))
        # both raise D, by different amounts
        assert linear["D"] > 0.5
        assert logistic["D"] > 0.5

    def test_deterministic_bitwise(self, demo_map):
        meta = QuestionMeta(
            "q0", KIND_MULTIPLE_CHOICE, 0.25, 0.1, 2, 0.3, (("vec_green", 0.5), ("vec_curl_div", 0.5))
        )
        a = posteriors(build_network(demo_map, [(meta, 1)]))
        b = posteriors(build_network(demo_map, [(meta, 1)]))
        assert a == b


class TestFactorizedChainJoint:
    def test_chain_network_matches_oracle(self):
        """A 10-child node forced through chain factorization defines the
        same joint over the original variables: VE and the full-joint
        oracle agree with evidence present."""
        from studymap.concepts import ConceptMap, ConceptNode

        children = tuple((f"c{i}", 0.1) for i in range(10))
        cmap = ConceptMap(
            root="root",
            nodes={
                "root": ConceptNode("root", "root", children),
                **{f"c{i}": ConceptNode(f"c{i}", f"c{i}") for i in range(10)},
            },
        )
        metas = [
            QuestionMeta("qa", KIND_MULTIPLE_CHOICE, 0.25, 0.2, 1, 0.3, (("c0", 0.5), ("c1", 0.5))),
            QuestionMeta("qb", KIND_MULTIPLE_CHOICE, 0.2, 0.1, 2, 0.4, (("c7", 1.0),)),
        ]
        net = build_network(cmap, [(metas[0], 1), (metas[1], 0)], fan_in_max=3)
        assert sum(1 for k in net.var_kind.values() if k == "accumulator") == 4
        assert net.variable_count <= 22
        post = posteriors(net)
        oracle = enumerate_oracle(net)
        for cid in cmap.nodes:
            assert post[cid] == pytest.approx(oracle[cid], abs=1e-9)
        # the root still aggregates linearly over the original children
        expected = sum(w * post[cid] for cid, w in children)
        assert post["root"] == pytest.approx(expected, abs=1e-9)


class TestNonDefaultPriors:
    def test_map_prior_and_leaf_override(self):
        from studymap.concepts import parse_concept_map

        doc = {
            "root": "r",
            "prior_leaf": 0.3,
            "nodes": [
                {"id": "r", "children": [{"id": "a", "weight": 0.5}, {"id": "b", "weight": 0.5}]},
                {"id": "a", "children": []},
                {"id": "b", "children": [], "prior": 0.7},
            ],
        }
        import json as json_mod

        cmap = parse_concept_map(json_mod.dumps(doc))
        post = posteriors(build_network(cmap, []))
        assert post["a"] == pytest.approx(0.3, abs=1e-12)
        assert post["b"] == pytest.approx(0.7, abs=1e-12)
        assert post["r"] == pytest.approx(0.5 * 0.3 + 0.5 * 0.7, abs=1e-12)

        meta = QuestionMeta("q", KIND_MULTIPLE_CHOICE, 0.25, 0.1, 1, 0.3, (("a", 1.0),))
        net = build_network(cmap, [(meta, 1)])
        answered = posteriors(net)
        oracle = enumerate_oracle(net)
        assert answered["a"] == pytest.approx(oracle["a"], abs=1e-12)
        assert answered["a"] > 0.3
        assert answered["b"] == pytest.approx(0.7, abs=1e-12)  # untouched


def test_dump_is_json_ready(course_map, course_question):
    import json

    net = build_network(course_map, [(course_question, 1)])
    text = json.dumps(dump_network(net))
    doc = json.loads(text)
    assert {v["id"] for v in doc["variables"]} == {"C", "D", "I", "E", "Q"}
    assert doc["evidence"] == {"Q": 1}
