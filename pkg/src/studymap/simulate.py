"""Synthetic students for sanity-checking the diagnosis.

Each simulated student gets a hidden mastery assignment (every leaf known
independently with probability 0.5; aggregates sampled from the additive
rule over their children), answers a deterministic pseudo-random selection
of questions with outcomes sampled exactly from the question evidence CPTs,
and is then diagnosed by the inference engine.

The report compares diagnosis with hidden truth:

  separation   mean posterior over mastered leaves minus mean over
               unmastered leaves (positive = diagnosis tracks truth)
  match_rate   fraction of leaves where posterior >= 0.5 equals mastery

Everything is driven by split substreams of one root seed, so a run is
reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from studymap.concepts import ConceptMap
from studymap.errors import ModelError
from studymap.evidence import STRATEGY_LINEAR, QuestionMeta, build_evidence_cpt
from studymap.network import build_network, posteriors
from studymap.rng import SplitMix64, stream


@dataclass
class SimulatedStudent:
    student_id: str
    mastery: dict[str, bool]
    answers: list[tuple[str, int]] = field(default_factory=list)  # (question id, outcome)
    posterior: dict[str, float] = field(default_factory=dict)


@dataclass
class SimulationReport:
    students: int
    answers_each: int
    seed: int
    strategy: str
    separation: float
    match_rate: float
    degenerate: bool  # no evidence: every posterior sits at its prior
    per_student: list[SimulatedStudent] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "students": self.students,
            "answers_each": self.answers_each,
            "seed": self.seed,
            "strategy": self.strategy,
            "separation": self.separation,
            "match_rate": self.match_rate,
            "degenerate": self.degenerate,
        }


def _sample_mastery(cmap: ConceptMap, rng: SplitMix64) -> dict[str, bool]:
    """Leaves are coin flips; aggregates follow the additive CPT given the
    children, sampled bottom-up."""
    mastery: dict[str, bool] = {}

    def visit(cid: str) -> bool:
        node = cmap.nodes[cid]
        if node.is_leaf:
            value = rng.unit() < 0.5
        else:
            p = 0.0
            for child, weight in node.children:
                if visit(child):
                    p += weight
            value = rng.unit() < p
        mastery[cid] = value
        return value

    visit(cmap.root)
    return mastery


def sample_outcome(meta: QuestionMeta, mastery: dict[str, bool], rng: SplitMix64, strategy: str) -> int:
    """Draw correct/incorrect exactly from the question's evidence CPT row."""
    cpt = build_evidence_cpt(meta, strategy)
    assignment = tuple(1 if mastery[cid] else 0 for cid in meta.concept_ids)
    return 1 if rng.unit() < cpt.entry(assignment) else 0


def run_simulation(
    cmap: ConceptMap,
    metas: list[QuestionMeta],
    n_students: int,
    answers_each: int,
    seed: int,
    strategy: str = STRATEGY_LINEAR,
) -> SimulationReport:
    if not metas:
        raise ModelError("simulation needs a non-empty question bank")
    metas_by_id = {meta.question_id: meta for meta in sorted(metas, key=lambda m: m.question_id)}
    question_ids = list(metas_by_id)

    mastered_sum = 0.0
    mastered_n = 0
    unmastered_sum = 0.0
    unmastered_n = 0
    matches = 0
    leaf_total = 0
    per_student: list[SimulatedStudent] = []

    for index in range(n_students):
        rng = stream(f"student/{index}", seed)
        student = SimulatedStudent(student_id=f"sim{index}", mastery=_sample_mastery(cmap, rng))

        order = list(question_ids)
        rng.shuffle(order)
        for i in range(answers_each):
            qid = order[i % len(order)]
            meta = metas_by_id[qid]
            outcome = sample_outcome(meta, student.mastery, rng, strategy)
            student.answers.append((qid, outcome))

        answered = [(metas_by_id[qid], outcome) for qid, outcome in student.answers]
        net = build_network(cmap, answered, strategy)
        student.posterior = posteriors(net)

        for leaf in cmap.leaf_ids():
            p = student.posterior[leaf]
            if student.mastery[leaf]:
                mastered_sum += p
                mastered_n += 1
            else:
                unmastered_sum += p
                unmastered_n += 1
            if (p >= 0.5) == student.mastery[leaf]:
                matches += 1
            leaf_total += 1
        per_student.append(student)

    separation = 0.0
    if mastered_n and unmastered_n:
        separation = mastered_sum / mastered_n - unmastered_sum / unmastered_n
    return SimulationReport(
        students=n_students,
        answers_each=answers_each,
        seed=seed,
        strategy=strategy,
        separation=separation,
        match_rate=matches / leaf_total if leaf_total else 0.0,
        degenerate=answers_each == 0,
        per_student=per_student,
    )


@dataclass
class UsageReport:
    """Whole-log usage statistics plus the success-threshold table."""

    total_answers: int
    distinct_students: int
    mean_answers: float
    std_answers: float  # population standard deviation
    solution_views: int
    above_50: float | None = None  # fraction of students with course posterior >= threshold
    above_80: float | None = None

    def to_json(self) -> dict:
        doc = {
            "total_answers": self.total_answers,
            "distinct_students": self.distinct_students,
            "mean_answers": self.mean_answers,
            "std_answers": self.std_answers,
            "solution_views": self.solution_views,
        }
        if self.above_50 is not None:
            doc["above_50"] = self.above_50
            doc["above_80"] = self.above_80
        return doc


def usage_from_events(events: list[dict]) -> UsageReport:
    """One pass over parsed log events."""
    counts: dict[str, int] = {}
    views = 0
    for doc in events:
        if doc.get("type") == "solution_view":
            views += 1
            continue
        student = doc["student"]
        counts[student] = counts.get(student, 0) + 1
    n = len(counts)
    total = sum(counts.values())
    mean = total / n if n else 0.0
    variance = sum((c - mean) ** 2 for c in counts.values()) / n if n else 0.0
    return UsageReport(
        total_answers=total,
        distinct_students=n,
        mean_answers=mean,
        std_answers=variance ** 0.5,
        solution_views=views,
    )
