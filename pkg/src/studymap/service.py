"""Stateful study service: answer ingestion, progress, selection, persistence.

State is a pure function of the append-only event log.  Every answer is
appended to the log, the student's evidence map is updated (last answer per
instance wins), and posteriors are recomputed from scratch — so replaying
the log always reproduces the live state exactly.

Solution views are logged for analytics but never touch the evidence.
"""

from __future__ import annotations

import json
import logging
import math
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from studymap.concepts import ConceptMap
from studymap.errors import DocumentParseError, ModelError, UnknownEntityError
from studymap.evidence import KIND_TRUE_FALSE, STRATEGY_LINEAR
from studymap.network import DEFAULT_BUDGET_ENTRIES, build_network, posteriors
from studymap.templates import QuestionInstance

logger = logging.getLogger(__name__)


def percent_of(p: float) -> int:
    """Round a probability to an integer percent, half away from zero.

    The 1e-9 nudge keeps values that are exactly on a half boundary in real
    arithmetic (but land a few ulps below it in floats) rounding up, so
    display values match hand calculation.
    """
    return int(math.floor(p * 100.0 + 0.5 + 1e-9))


@dataclass(frozen=True)
class AnswerEvent:
    student_id: str
    seq: int
    instance_number: int
    chosen: int | bool
    correct: bool
    ts: int  # UTC milliseconds


@dataclass
class StudentRecord:
    student_id: str
    log: list[AnswerEvent] = field(default_factory=list)
    last_outcome: dict[int, int] = field(default_factory=dict)  # instance number -> 0/1
    posterior: dict[str, float] = field(default_factory=dict)


def progress_tree(cmap: ConceptMap, posterior: dict[str, float], concept_id: str | None = None) -> dict:
    """Nested ProgressView mirroring the concept tree."""
    cid = concept_id or cmap.root
    node = cmap.nodes[cid]
    return {
        "concept": cid,
        "title": node.title,
        "percent": percent_of(posterior[cid]),
        "children": [progress_tree(cmap, posterior, child) for child, _ in node.children],
    }


def flatten_percents(tree: dict) -> dict[str, int]:
    out = {tree["concept"]: tree["percent"]}
    for child in tree["children"]:
        out.update(flatten_percents(child))
    return out


class StudyService:
    """One course: a concept map, a question bank, and the student records.

    Events for one student are serialized by a per-student lock; different
    students proceed concurrently.  The log file is shared and appended
    under its own lock, one JSON object per line, flushed per event.
    """

    def __init__(
        self,
        cmap: ConceptMap,
        instances: list[QuestionInstance],
        strategy: str = STRATEGY_LINEAR,
        log_path: str | Path | None = None,
        selection_seed: int | None = None,
        budget_entries: int = DEFAULT_BUDGET_ENTRIES,
        clock: Callable[[], int] | None = None,
    ):
        self.concept_map = cmap
        self.strategy = strategy
        self.budget_entries = budget_entries
        self.instances: dict[int, QuestionInstance] = {}
        for instance in instances:
            if instance.instance_number < 1:
                raise ModelError(f"instance of {instance.template_id!r} has no assigned number")
            if instance.instance_number in self.instances:
                raise ModelError(f"duplicate instance number {instance.instance_number}")
            for cid in instance.meta.concept_ids:
                if cid not in cmap.nodes:
                    raise ModelError(
                        f"instance {instance.instance_number} references unknown concept {cid!r}"
                    )
            self.instances[instance.instance_number] = instance

        self._students: dict[str, StudentRecord] = {}
        self._baseline = posteriors(build_network(cmap, [], strategy, budget_entries=budget_entries))
        self._rng = random.Random(selection_seed)
        self._clock = clock or (lambda: int(time.time() * 1000))
        self._registry_lock = threading.Lock()
        self._student_locks: dict[str, threading.Lock] = {}
        self._log_lock = threading.Lock()
        self._log_path = Path(log_path) if log_path is not None else None
        self._log_file = None
        if self._log_path is not None:
            self._log_path.parent.mkdir(parents=True, exist_ok=True)
            self._log_file = open(self._log_path, "a", encoding="utf-8")

    # -- student registry -------------------------------------------------

    def ensure_student(self, student_id: str) -> StudentRecord:
        """Auto-register on first contact; ids are opaque."""
        if not student_id or not isinstance(student_id, str):
            raise ModelError("student id must be a nonempty string")
        with self._registry_lock:
            record = self._students.get(student_id)
            if record is None:
                record = StudentRecord(student_id=student_id, posterior=dict(self._baseline))
                self._students[student_id] = record
                self._student_locks[student_id] = threading.Lock()
            return record

    def _record(self, student_id: str) -> StudentRecord:
        record = self._students.get(student_id)
        if record is None:
            raise UnknownEntityError(f"unknown student {student_id!r}")
        return record

    def student_ids(self) -> list[str]:
        return sorted(self._students)

    # -- question access ---------------------------------------------------

    def get_question_by_number(self, number: int) -> QuestionInstance:
        instance = self.instances.get(number)
        if instance is None:
            raise UnknownEntityError(f"no question with number {number}")
        return instance

    def select_question(self, student_id: str, concept_id: str) -> QuestionInstance:
        """Uniform random choice among instances tagged with the concept or
        any of its descendants.  The instance number becomes visible now."""
        if concept_id not in self.concept_map.nodes:
            raise UnknownEntityError(f"unknown concept {concept_id!r}")
        self.ensure_student(student_id)
        related = self.related_instances(concept_id)
        if not related:
            raise UnknownEntityError(f"no questions relate to concept {concept_id!r}")
        return self.instances[self._rng.choice(related)]

    def related_instances(self, concept_id: str) -> list[int]:
        wanted = self.concept_map.descendants(concept_id)
        return sorted(
            number
            for number, instance in self.instances.items()
            if wanted.intersection(instance.meta.concept_ids)
        )

    def get_solution(self, number: int, student_id: str | None = None) -> str:
        """Solution text.  Logged as a view event; never sets evidence."""
        instance = self.get_question_by_number(number)
        self._append_log(
            {
                "type": "solution_view",
                "student": student_id,
                "number": number,
                "ts": self._clock(),
            }
        )
        return instance.solution

    # -- the study loop ----------------------------------------------------

    def record_answer(
        self, student_id: str, number: int, chosen: int | bool
    ) -> tuple[bool, dict, str]:
        """Ingest one answer: append to the log, replace the instance's
        evidence, recompute posteriors.

        Returns (correct, progress tree, solution reference).
        """
        correct, tree = self._ingest(
            student_id, number, chosen, self._clock(), recompute=True, append=True
        )
        return correct, tree, f"/api/solution/{number}"

    def _ingest(
        self,
        student_id: str,
        number: int,
        chosen: int | bool,
        ts: int,
        recompute: bool,
        append: bool,
    ) -> tuple[bool, dict | None]:
        instance = self.get_question_by_number(number)
        correct = self._judge(instance, chosen)
        record = self.ensure_student(student_id)
        with self._student_locks[student_id]:
            event = AnswerEvent(
                student_id=student_id,
                seq=len(record.log) + 1,
                instance_number=number,
                chosen=chosen,
                correct=correct,
                ts=ts,
            )
            record.log.append(event)
            record.last_outcome[number] = 1 if correct else 0
            tree = None
            if recompute:
                self._recompute(record)
                tree = progress_tree(self.concept_map, record.posterior)
            if append:
                self._append_log(
                    {
                        "seq": event.seq,
                        "student": event.student_id,
                        "number": event.instance_number,
                        "chosen": event.chosen,
                        "correct": event.correct,
                        "ts": event.ts,
                    }
                )
        return correct, tree

    def _judge(self, instance: QuestionInstance, chosen: int | bool) -> bool:
        if instance.kind == KIND_TRUE_FALSE and isinstance(chosen, bool):
            chosen_index = 0 if chosen else 1
        elif isinstance(chosen, bool):
            raise ModelError("boolean answers only apply to true-false questions")
        elif isinstance(chosen, int) and 0 <= chosen < len(instance.choices):
            chosen_index = chosen
        else:
            raise ModelError(
                f"choice must be an index in 0..{len(instance.choices) - 1} "
                f"(or a boolean for true-false), got {chosen!r}"
            )
        return chosen_index == instance.correct_index

    def _recompute(self, record: StudentRecord) -> None:
        answered = [
            (self.instances[number].meta, outcome)
            for number, outcome in sorted(record.last_outcome.items())
        ]
        net = build_network(
            self.concept_map, answered, self.strategy, budget_entries=self.budget_entries
        )
        record.posterior = posteriors(net)

    # -- reads ---------------------------------------------------------------

    def get_progress(self, student_id: str) -> dict:
        record = self._record(student_id)
        with self._student_locks[student_id]:
            return progress_tree(self.concept_map, record.posterior)

    def posterior_of(self, student_id: str, concept_id: str) -> float:
        record = self._record(student_id)
        if concept_id not in self.concept_map.nodes:
            raise UnknownEntityError(f"unknown concept {concept_id!r}")
        return record.posterior[concept_id]

    def class_average(self, concept_id: str) -> int:
        """Mean of per-student posteriors for the concept, as a percent."""
        if concept_id not in self.concept_map.nodes:
            raise UnknownEntityError(f"unknown concept {concept_id!r}")
        if not self._students:
            raise UnknownEntityError("no students registered yet")
        values = [record.posterior[concept_id] for record in self._students.values()]
        return percent_of(sum(values) / len(values))

    def weakest_concepts(self, student_id: str, k: int) -> list[str]:
        """The k leaf concepts with the lowest posterior, ties by id."""
        record = self._record(student_id)
        leaves = sorted(
            self.concept_map.leaf_ids(), key=lambda cid: (record.posterior[cid], cid)
        )
        return leaves[: max(k, 0)]

    # -- persistence ---------------------------------------------------------

    def _append_log(self, doc: dict) -> None:
        if self._log_file is None:
            return
        with self._log_lock:
            self._log_file.write(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")
            self._log_file.flush()

    def close(self) -> None:
        if self._log_file is not None:
            with self._log_lock:
                self._log_file.flush()
                self._log_file.close()
                self._log_file = None

    def replay_events(self, events: list[dict]) -> None:
        """Re-ingest answer events without writing them back to the log.

        Posteriors are a pure function of each student's last outcomes, so
        they are recomputed once per touched student at the end; the result
        is identical to recomputing after every event.
        """
        touched: set[str] = set()
        for doc in events:
            if doc.get("type") == "solution_view":
                continue
            self._ingest(
                doc["student"],
                doc["number"],
                doc["chosen"],
                int(doc.get("ts", 0)),
                recompute=False,
                append=False,
            )
            touched.add(doc["student"])
        for student_id in sorted(touched):
            with self._student_locks[student_id]:
                self._recompute(self._students[student_id])


def read_event_log(path: str | Path, strict: bool = False) -> tuple[list[dict], str | None]:
    """Parse an event log.

    Returns (events, warning).  On a corrupt line: in strict mode raise
    DocumentParseError naming the line; otherwise keep the valid prefix,
    drop the rest, and return a warning describing where recovery stopped.
    """
    events: list[dict] = []
    warning = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                doc = json.loads(stripped)
                if doc.get("type") != "solution_view":
                    for key in ("student", "number", "chosen"):
                        if key not in doc:
                            raise KeyError(key)
            except (json.JSONDecodeError, KeyError, AttributeError) as exc:
                message = f"corrupt event log line {lineno}: {exc}"
                if strict:
                    raise DocumentParseError(message, lineno) from exc
                warning = f"{message}; recovered with the {len(events)} preceding events"
                logger.warning(warning)
                break
            events.append(doc)
    return events, warning


def rebuild_from_log(
    cmap: ConceptMap,
    instances: list[QuestionInstance],
    log_path: str | Path,
    strategy: str = STRATEGY_LINEAR,
    strict: bool = False,
    append: bool = True,
    selection_seed: int | None = None,
) -> tuple[StudyService, str | None]:
    """Reconstruct a service from its append-only log.

    Replaying the log reproduces the exact StudentRecords and posteriors of
    the process that wrote it.  With append=True the rebuilt service keeps
    writing new events to the same file.
    """
    events: list[dict] = []
    warning = None
    if Path(log_path).exists():
        events, warning = read_event_log(log_path, strict=strict)
    service = StudyService(
        cmap,
        instances,
        strategy=strategy,
        log_path=log_path if append else None,
        selection_seed=selection_seed,
    )
    service.replay_events(events)
    return service, warning
