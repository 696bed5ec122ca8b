"""Concept maps: parsing, validation, additive CPTs, chain factorization."""

import itertools
import json

import pytest

from studymap.concepts import (
    ConceptMap,
    ConceptNode,
    additive_table,
    build_concept_cpt,
    factorize_weighted_cpt,
    parse_concept_map,
    validate,
)
from studymap.errors import DocumentParseError, ModelError
from tests.conftest import FIG1_DOC


def doc(nodes, root="r", **extra):
    return json.dumps({"root": root, "nodes": nodes, **extra})


class TestParse:
    def test_course_example(self, course_map):
        assert set(course_map.nodes) == {"C", "D", "I", "E"}
        assert course_map.root == "C"
        assert course_map.prior_leaf == 0.5
        assert course_map.nodes["C"].children == (("D", 0.5), ("I", 0.3), ("E", 0.2))
        assert course_map.nodes["D"].is_leaf

    def test_single_node_map(self):
        cmap = parse_concept_map(doc([{"id": "r", "title": "only"}]))
        assert len(cmap.nodes) == 1
        assert cmap.nodes["r"].is_leaf

    def test_weight_sum_violation(self):
        text = doc(
            [
                {"id": "r", "children": [{"id": "a", "weight": 0.6}, {"id": "b", "weight": 0.6}]},
                {"id": "a"},
                {"id": "b"},
            ]
        )
        with pytest.raises(ModelError, match="weight-sum"):
            parse_concept_map(text)

    def test_syntax_error_reports_position(self):
        with pytest.raises(DocumentParseError) as err:
            parse_concept_map('{"root": "r", "nodes": [}')
        assert err.value.line is not None

    def test_duplicate_id(self):
        with pytest.raises(ModelError, match="duplicate"):
            parse_concept_map(doc([{"id": "r"}, {"id": "r"}]))

    def test_dangling_child(self):
        text = doc([{"id": "r", "children": [{"id": "ghost", "weight": 1.0}]}])
        with pytest.raises(ModelError, match="dangling"):
            parse_concept_map(text)

    def test_cycle_detected(self):
        text = doc(
            [
                {"id": "r", "children": [{"id": "a", "weight": 1.0}]},
                {"id": "a", "children": [{"id": "r", "weight": 1.0}]},
            ]
        )
        with pytest.raises(ModelError, match="cycle|root-has-parent"):
            parse_concept_map(text)

    def test_unreachable_node(self):
        text = doc([{"id": "r"}, {"id": "orphan"}])
        with pytest.raises(ModelError, match="unreachable"):
            parse_concept_map(text)

    def test_prior_leaf_override(self):
        cmap = parse_concept_map(doc([{"id": "r"}], prior_leaf=0.3))
        assert cmap.prior_leaf == 0.3

    def test_per_leaf_prior(self):
        cmap = parse_concept_map(doc([{"id": "r", "prior": 0.7}]))
        assert cmap.leaf_prior("r") == 0.7


class TestValidate:
    def test_example_map_is_clean(self, course_map):
        assert validate(course_map) == []

    def test_demo_map_is_clean(self, demo_map):
        assert validate(demo_map) == []
        assert len(demo_map.nodes) == 57

    def test_nonpositive_weight(self):
        nodes = {
            "r": ConceptNode("r", "r", (("a", 0.0), ("b", 1.0))),
            "a": ConceptNode("a", "a"),
            "b": ConceptNode("b", "b"),
        }
        problems = validate(ConceptMap(root="r", nodes=nodes))
        assert any(v.rule == "nonpositive-weight" for v in problems)

    def test_multiple_parents(self):
        nodes = {
            "r": ConceptNode("r", "r", (("a", 0.5), ("b", 0.5))),
            "a": ConceptNode("a", "a", (("b", 1.0),)),
            "b": ConceptNode("b", "b"),
        }
        problems = validate(ConceptMap(root="r", nodes=nodes))
        assert any(v.rule == "multiple-parents" and v.node_id == "b" for v in problems)

    def test_never_raises(self):
        problems = validate(ConceptMap(root="missing", nodes={}))
        assert problems


class TestAdditiveCpt:
    def test_reference_three_child_table(self, course_map):
        cpt = build_concept_cpt(course_map.nodes["C"])
        expected = {
            (1, 1, 1): 1.0,
            (1, 1, 0): 0.8,
            (1, 0, 1): 0.7,
            (1, 0, 0): 0.5,
            (0, 1, 1): 0.5,
            (0, 1, 0): 0.3,
            (0, 0, 1): 0.2,
            (0, 0, 0): 0.0,
        }
        for assignment, value in expected.items():
            assert cpt.entry(assignment) == pytest.approx(value, abs=1e-12)

    def test_single_child_identity(self):
        node = ConceptNode("p", "p", (("c", 1.0),))
        cpt = build_concept_cpt(node)
        assert cpt.entry((1,)) == 1.0
        assert cpt.entry((0,)) == 0.0

    def test_equal_weights_symmetry(self):
        node = ConceptNode("p", "p", tuple((f"c{i}", 0.25) for i in range(4)))
        cpt = build_concept_cpt(node)
        for assignment in itertools.product((0, 1), repeat=4):
            if sum(assignment) == 2:
                assert cpt.entry(assignment) == pytest.approx(0.5, abs=1e-12)

    def test_monotone_in_every_flip(self, demo_map):
        for node in demo_map.nodes.values():
            if node.is_leaf or len(node.children) > 12:
                continue
            cpt = build_concept_cpt(node)
            k = len(node.children)
            for idx in range(1 << k):
                for bit in range(k):
                    if not idx >> bit & 1:
                        assert cpt.table[idx] <= cpt.table[idx | (1 << bit)] + 1e-15

    def test_leaf_rejected(self, course_map):
        with pytest.raises(ModelError, match="leaf"):
            build_concept_cpt(course_map.nodes["D"])

    def test_fan_in_guard(self):
        node = ConceptNode("p", "p", tuple((f"c{i}", 1.0 / 16) for i in range(16)))
        with pytest.raises(ModelError, match="fan_in_max"):
            build_concept_cpt(node, fan_in_max=12)

    def test_table_index_convention(self):
        # last-listed child is the least significant bit
        table = additive_table((0.5, 0.3, 0.2))
        assert table[0b100] == 0.5  # first child only
        assert table[0b001] == 0.2  # last child only


def chain_marginal(accumulators, final_parents, assignment: dict[str, int]) -> float:
    """Independent oracle: P(node=1 | original children) through the chain,
    marginalizing accumulators one at a time."""
    prob_one = dict(assignment)  # id -> P(var = 1), children are fixed 0/1
    for acc in accumulators:
        prob_one[acc.id] = sum(w * prob_one[pid] for pid, w in acc.parents)
    return sum(w * prob_one[pid] for pid, w in final_parents)


class TestFactorization:
    def test_three_children_capped_at_two(self, course_map):
        node = course_map.nodes["C"]
        accumulators, final = factorize_weighted_cpt(node, fan_in_max=2)
        assert len(accumulators) == 1
        assert len(final) == 2
        direct = build_concept_cpt(node)
        for assignment in itertools.product((0, 1), repeat=3):
            named = dict(zip(node.child_ids, assignment))
            assert chain_marginal(accumulators, final, named) == pytest.approx(
                direct.entry(assignment), abs=1e-9
            )

    def test_within_bound_untouched(self, course_map):
        node = course_map.nodes["C"]
        accumulators, final = factorize_weighted_cpt(node, fan_in_max=3)
        assert accumulators == []
        assert final == node.children

    def test_ten_equal_children(self):
        node = ConceptNode("p", "p", tuple((f"c{i}", 0.1) for i in range(10)))
        accumulators, final = factorize_weighted_cpt(node, fan_in_max=3)
        assert all(len(acc.parents) <= 3 for acc in accumulators)
        assert len(final) <= 3
        for single in range(10):
            named = {f"c{i}": 1 if i == single else 0 for i in range(10)}
            assert chain_marginal(accumulators, final, named) == pytest.approx(0.1, abs=1e-9)

    def test_exact_on_all_assignments(self):
        weights = (0.17, 0.03, 0.2, 0.11, 0.09, 0.26, 0.14)
        node = ConceptNode("p", "p", tuple((f"c{i}", w) for i, w in enumerate(weights)))
        accumulators, final = factorize_weighted_cpt(node, fan_in_max=3)
        for assignment in itertools.product((0, 1), repeat=len(weights)):
            named = dict(zip(node.child_ids, assignment))
            direct = sum(w for w, bit in zip(weights, assignment) if bit)
            assert chain_marginal(accumulators, final, named) == pytest.approx(direct, abs=1e-9)

    def test_exact_at_twelve_children(self):
        rng = __import__("random").Random(12)
        raw = [rng.randint(1, 9) for _ in range(12)]
        total = sum(raw)
        weights = tuple(v / total for v in raw)
        node = ConceptNode("p", "p", tuple((f"c{i}", w) for i, w in enumerate(weights)))
        accumulators, final = factorize_weighted_cpt(node, fan_in_max=4)
        for assignment in itertools.product((0, 1), repeat=12):
            named = dict(zip(node.child_ids, assignment))
            direct = sum(w for w, bit in zip(weights, assignment) if bit)
            assert chain_marginal(accumulators, final, named) == pytest.approx(direct, abs=1e-9)

    def test_fan_in_below_two_rejected(self, course_map):
        with pytest.raises(ModelError):
            factorize_weighted_cpt(course_map.nodes["C"], fan_in_max=1)


def test_linearity_of_additive_cpt(course_map):
    """P(node=1) = sum of w_i * P(child_i=1) for any independent child
    distribution, by direct summation over the table."""
    node = course_map.nodes["C"]
    cpt = build_concept_cpt(node)
    child_p = {"D": 0.3, "I": 0.9, "E": 0.55}
    total = 0.0
    for assignment in itertools.product((0, 1), repeat=3):
        weight = 1.0
        for cid, bit in zip(node.child_ids, assignment):
            weight *= child_p[cid] if bit else 1.0 - child_p[cid]
        total += weight * cpt.entry(assignment)
    expected = sum(w * child_p[cid] for cid, w in node.children)
    assert total == pytest.approx(expected, abs=1e-9)


def test_fig1_doc_roundtrip_stability():
    cmap = parse_concept_map(FIG1_DOC)
    assert [cid for cid in cmap.preorder()] == ["C", "D", "I", "E"]
