"""Shared fixtures: the 4-node example course, random model generators."""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from studymap.concepts import ConceptMap, ConceptNode, parse_concept_map, validate
from studymap.evidence import KIND_MULTIPLE_CHOICE, QuestionMeta
from studymap.network import Network, build_network
from studymap.templates import QuestionInstance

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "studymap" / "data"

FIG1_DOC = json.dumps(
    {
        "root": "C",
        "nodes": [
            {
                "id": "C",
                "title": "Calculus",
                "children": [
                    {"id": "D", "weight": 0.5},
                    {"id": "I", "weight": 0.3},
                    {"id": "E", "weight": 0.2},
                ],
            },
            {"id": "D", "title": "Derivatives", "children": []},
            {"id": "I", "title": "Integrals", "children": []},
            {"id": "E", "title": "PDEs", "children": []},
        ],
    }
)

# The reference metadata block, verbatim (note the inconsistent marker case
# and the leading blanks).
FIG3_BLOCK = (
    "SIACUastart\n"
    " level=1; slip= 0.2; guess=0.25; discr = 0.3\n"
    " concepts = [(D, 0.6), (I, 0.4)]\n"
    " SIACUAend"
)


@pytest.fixture(scope="session")
def course_map() -> ConceptMap:
    return parse_concept_map(FIG1_DOC)


@pytest.fixture(scope="session")
def course_question() -> QuestionMeta:
    return QuestionMeta(
        question_id="Q",
        kind=KIND_MULTIPLE_CHOICE,
        guess=0.25,
        slip=0.2,
        level=1,
        discr=0.3,
        concepts=(("D", 0.6), ("I", 0.4)),
    )


@pytest.fixture(scope="session")
def demo_map() -> ConceptMap:
    text = (DATA_DIR / "demo_map.json").read_text(encoding="utf-8")
    return parse_concept_map(text)


@pytest.fixture(scope="session")
def templates_dir() -> Path:
    return DATA_DIR / "templates"


def make_instance(
    number: int,
    meta: QuestionMeta,
    stem: str = "stem?",
    choices: tuple[str, ...] = ("right", "wrong-1", "wrong-2", "wrong-3"),
    correct_index: int = 0,
    kind: str = KIND_MULTIPLE_CHOICE,
) -> QuestionInstance:
    """Bare instance for service-level tests."""
    return QuestionInstance(
        instance_number=number,
        template_id=f"t{number}",
        seed=number,
        kind=kind,
        bindings={},
        stem=stem,
        choices=choices,
        correct_index=correct_index,
        solution=f"solution for {number}",
        meta=meta,
    )


def random_tree_map(rng: random.Random, n_concepts: int) -> ConceptMap:
    """Random weighted tree over c0..c{n-1}, weights normalized per parent."""
    assert n_concepts >= 1
    children_of: dict[int, list[int]] = {i: [] for i in range(n_concepts)}
    for i in range(1, n_concepts):
        children_of[rng.randrange(i)].append(i)

    nodes = {}
    for i in range(n_concepts):
        kids = children_of[i]
        if kids:
            raw = [rng.randint(1, 10) for _ in kids]
            total = sum(raw)
            weighted = tuple((f"c{k}", raw[j] / total) for j, k in enumerate(kids))
        else:
            weighted = ()
        nodes[f"c{i}"] = ConceptNode(id=f"c{i}", title=f"concept {i}", children=weighted)
    cmap = ConceptMap(root="c0", nodes=nodes)
    assert validate(cmap) == []
    return cmap


def random_meta(
    rng: random.Random, cmap: ConceptMap, question_id: str, leaves_only: bool = False
) -> QuestionMeta:
    ids = cmap.leaf_ids() if leaves_only else list(cmap.nodes)
    n = rng.randint(1, min(3, len(ids)))
    chosen = rng.sample(ids, n)
    raw = [rng.randint(1, 10) for _ in chosen]
    total = sum(raw)
    guess = rng.uniform(0.0, 0.45)
    slip = rng.uniform(0.0, 0.45)
    return QuestionMeta(
        question_id=question_id,
        kind=KIND_MULTIPLE_CHOICE,
        guess=guess,
        slip=slip,
        level=rng.randint(1, 5),
        discr=rng.uniform(0.05, 1.0),
        concepts=tuple((cid, raw[i] / total) for i, cid in enumerate(chosen)),
    )


def random_network(
    rng: random.Random,
    max_vars: int = 14,
    strategy: str = "linear",
    leaves_only: bool = False,
) -> Network:
    """Random tree map plus random answered questions, within max_vars."""
    n_concepts = rng.randint(2, max(2, max_vars - 4))
    cmap = random_tree_map(rng, n_concepts)
    n_questions = rng.randint(1, max_vars - n_concepts)
    answered = []
    for q in range(n_questions):
        meta = random_meta(rng, cmap, f"q{q}", leaves_only=leaves_only)
        answered.append((meta, rng.randint(0, 1)))
    return build_network(cmap, answered, strategy)
