"""Question evidence model: metadata parsing and the answer-outcome CPT.

Each question carries four numeric parameters and a weighted concept list:

  guess  probability of answering correctly knowing none of the concepts
  slip   probability of answering wrongly knowing all of them
  level  difficulty 1..5
  discr  discrimination factor in (0,1]

The CPT P(correct | concept states) is pinned at the two endpoints: the
all-zeros row is exactly ``guess`` and the all-ones row exactly ``1 - slip``.
Interior rows interpolate on the known-weight mass w = sum of weights of the
concepts assigned 1, by one of two strategies:

  linear     guess + (1 - guess - slip) * w
  logistic   guess + (1 - guess - slip) * s(w), where s is the logistic
             1/(1+exp(-k(w-m))) rescaled so s(0)=0 and s(1)=1, with
             midpoint m = level/6 and steepness k = 2 + 10*discr

Both strategies are monotone in w, so every 0->1 flip of a concept weakly
increases the entry.  level and discr only matter under "logistic".
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from studymap.errors import DocumentParseError, ModelError

WEIGHT_SUM_TOL = 1e-9

BLOCK_START = "SIACUAstart"
BLOCK_END = "SIACUAend"

KIND_MULTIPLE_CHOICE = "multiple-choice"
KIND_TRUE_FALSE = "true-false"
KINDS = (KIND_MULTIPLE_CHOICE, KIND_TRUE_FALSE)

# Conventional guess rates when an author builds metadata programmatically:
# 1 in 4 for four-choice items, 1 in 2 for single-statement true/false.
DEFAULT_GUESS = {KIND_MULTIPLE_CHOICE: 0.25, KIND_TRUE_FALSE: 0.5}

STRATEGY_LINEAR = "linear"
STRATEGY_LOGISTIC = "logistic"
STRATEGIES = (STRATEGY_LINEAR, STRATEGY_LOGISTIC)


@dataclass(frozen=True)
class SiacuaBlock:
    """Payload of one metadata block: parameters plus the concept weights."""

    level: int
    slip: float
    guess: float
    discr: float
    concepts: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class QuestionMeta:
    """Complete evidence metadata for one question."""

    question_id: str
    kind: str
    guess: float
    slip: float
    level: int
    discr: float
    concepts: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown question kind {self.kind!r}")
        if not (0.0 <= self.guess < 1.0):
            raise ModelError(f"guess {self.guess} outside [0,1)")
        if not (0.0 <= self.slip < 1.0):
            raise ModelError(f"slip {self.slip} outside [0,1)")
        if self.guess + self.slip >= 1.0:
            raise ModelError(
                f"guess + slip = {self.guess + self.slip} >= 1; a correct answer would "
                "count against knowledge"
            )
        if self.level not in (1, 2, 3, 4, 5):
            raise ModelError(f"level {self.level} outside 1..5")
        if not (0.0 < self.discr <= 1.0):
            raise ModelError(f"discr {self.discr} outside (0,1]")
        if not self.concepts:
            raise ModelError("concept list is empty")
        total = 0.0
        for cid, weight in self.concepts:
            if weight <= 0.0:
                raise ModelError(f"concept {cid!r} has nonpositive weight {weight}")
            total += weight
        if not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=WEIGHT_SUM_TOL):
            raise ModelError(f"concept weights sum to {total!r}, expected 1")

    @property
    def concept_ids(self) -> tuple[str, ...]:
        return tuple(cid for cid, _ in self.concepts)

    @classmethod
    def from_block(cls, question_id: str, kind: str, block: SiacuaBlock) -> "QuestionMeta":
        return cls(
            question_id=question_id,
            kind=kind,
            guess=block.guess,
            slip=block.slip,
            level=block.level,
            discr=block.discr,
            concepts=block.concepts,
        )


@dataclass(frozen=True)
class EvidenceCpt:
    """P(correct | concept states) for one question.

    Same row encoding as ConceptCpt: ``table[i]`` with bit j of i (last
    parent = LSB) giving the state of ``parent_ids[j]``.
    """

    parent_ids: tuple[str, ...]
    table: tuple[float, ...]
    strategy: str

    def entry(self, assignment: tuple[int, ...]) -> float:
        idx = 0
        for bit in assignment:
            idx = (idx << 1) | (1 if bit else 0)
        return self.table[idx]


_CONCEPTS_RE = re.compile(r"concepts\s*=\s*\[(?P<body>.*?)\]", re.DOTALL)
_PAIR_RE = re.compile(r"\(\s*(?P<cid>[^\s,()]+)\s*,\s*(?P<weight>[^\s,()]+)\s*\)")
_ASSIGN_RE = re.compile(r"^(?P<key>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?P<value>\S+)$")

_REQUIRED_KEYS = ("level", "slip", "guess", "discr")


def _find_block(text: str) -> str:
    """Slice out the text between the start and end markers.

    Marker matching is case-insensitive: blocks circulate with
    inconsistent marker capitalization and authors paste them verbatim.
    """
    lowered = text.lower()
    start = lowered.find(BLOCK_START.lower())
    if start < 0:
        raise DocumentParseError(f"missing {BLOCK_START!r} marker")
    end = lowered.find(BLOCK_END.lower(), start + len(BLOCK_START))
    if end < 0:
        raise DocumentParseError(f"missing {BLOCK_END!r} marker")
    return text[start + len(BLOCK_START): end]


def parse_siacua_block(text: str) -> SiacuaBlock:
    """Parse one metadata block.

    Inside the markers: ``key=value`` assignments for level, slip, guess and
    discr, separated by ``;`` or newlines, plus ``concepts = [(ID, w), ...]``.
    Whitespace around ``=``, around values and after commas is ignored.

    Raises DocumentParseError naming the missing marker or key, the
    non-numeric value, or the weight problem.
    """
    body = _find_block(text)

    concepts_match = _CONCEPTS_RE.search(body)
    if concepts_match is None:
        raise DocumentParseError("missing required key 'concepts'")
    concepts: list[tuple[str, float]] = []
    pair_body = concepts_match.group("body")
    for pair in _PAIR_RE.finditer(pair_body):
        cid = pair.group("cid")
        raw_weight = pair.group("weight")
        try:
            weight = float(raw_weight)
        except ValueError:
            raise DocumentParseError(f"non-numeric weight {raw_weight!r} for concept {cid!r}") from None
        concepts.append((cid, weight))
    if not concepts:
        raise DocumentParseError("concepts list is empty")
    leftover = _PAIR_RE.sub("", pair_body).replace(",", "").strip()
    if leftover:
        raise DocumentParseError(f"malformed concepts list near {leftover!r}")

    body_without_concepts = _CONCEPTS_RE.sub("", body)
    values: dict[str, float] = {}
    for chunk in re.split(r"[;\n]", body_without_concepts):
        chunk = chunk.strip()
        if not chunk:
            continue
        match = _ASSIGN_RE.match(chunk)
        if match is None:
            raise DocumentParseError(f"malformed assignment {chunk!r}")
        key = match.group("key")
        raw = match.group("value")
        try:
            values[key] = float(raw)
        except ValueError:
            raise DocumentParseError(f"non-numeric value {raw!r} for key {key!r}") from None

    for key in _REQUIRED_KEYS:
        if key not in values:
            raise DocumentParseError(f"missing required key {key!r}")

    level_raw = values["level"]
    if level_raw != int(level_raw):
        raise DocumentParseError(f"level must be an integer, got {level_raw!r}")
    level = int(level_raw)
    if level not in (1, 2, 3, 4, 5):
        raise DocumentParseError(f"level {level} outside 1..5")

    total = sum(w for _, w in concepts)
    if not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=WEIGHT_SUM_TOL):
        raise DocumentParseError(f"concept weights sum to {total!r}, expected 1")
    for cid, weight in concepts:
        if weight <= 0.0:
            raise DocumentParseError(f"concept {cid!r} has nonpositive weight {weight}")

    return SiacuaBlock(
        level=level,
        slip=values["slip"],
        guess=values["guess"],
        discr=values["discr"],
        concepts=tuple(concepts),
    )


def serialize_siacua_block(block: SiacuaBlock) -> str:
    """Canonical text form; parse_siacua_block round-trips it."""
    pairs = ", ".join(f"({cid}, {weight!r})" for cid, weight in block.concepts)
    return (
        f"{BLOCK_START}\n"
        f"level={block.level}; slip={block.slip!r}; guess={block.guess!r}; discr={block.discr!r}\n"
        f"concepts = [{pairs}]\n"
        f"{BLOCK_END}"
    )


def _logistic_scaled(w: float, level: int, discr: float) -> float:
    """Logistic in w rescaled to hit 0 at w=0 and 1 at w=1."""
    m = level / 6.0
    k = 2.0 + 10.0 * discr
    lo = 1.0 / (1.0 + math.exp(-k * (0.0 - m)))
    hi = 1.0 / (1.0 + math.exp(-k * (1.0 - m)))
    val = 1.0 / (1.0 + math.exp(-k * (w - m)))
    return (val - lo) / (hi - lo)


def interpolate(w: float, meta: QuestionMeta, strategy: str = STRATEGY_LINEAR) -> float:
    """P(correct) when the known-weight mass is *w*.

    The endpoints bypass the formula so that w=0 returns ``guess`` and w=1
    returns ``1 - slip`` bit for bit, whatever the strategy.
    """
    if not (0.0 <= w <= 1.0):
        raise ModelError(f"known-weight mass {w!r} outside [0,1]")
    if w == 0.0:
        return meta.guess
    if w == 1.0:
        return 1.0 - meta.slip
    span = 1.0 - meta.guess - meta.slip
    if strategy == STRATEGY_LINEAR:
        return meta.guess + span * w
    if strategy == STRATEGY_LOGISTIC:
        return meta.guess + span * _logistic_scaled(w, meta.level, meta.discr)
    raise ModelError(f"unknown strategy {strategy!r}")


MAX_CONCEPTS_PER_QUESTION = 12


def build_evidence_cpt(
    meta: QuestionMeta,
    strategy: str = STRATEGY_LINEAR,
    fan_in_max: int = MAX_CONCEPTS_PER_QUESTION,
) -> EvidenceCpt:
    """CPT over the question's concepts: row = interpolate(mass of 1-bits).

    The all-ones row is computed with mass exactly 1 (not the float sum of
    the weights), keeping the 1-slip endpoint exact.
    """
    ids = meta.concept_ids
    k = len(ids)
    if k > fan_in_max:
        raise ModelError(
            f"question {meta.question_id!r} references {k} concepts, above the "
            f"table bound of {fan_in_max}"
        )
    weights = tuple(w for _, w in meta.concepts)
    table = []
    full = (1 << k) - 1
    for idx in range(1 << k):
        if idx == 0:
            mass = 0.0
        elif idx == full:
            mass = 1.0
        else:
            mass = 0.0
            for j, w in enumerate(weights):
                if idx >> (k - 1 - j) & 1:
                    mass += w
            mass = min(max(mass, 0.0), 1.0)
        table.append(interpolate(mass, meta, strategy))
    return EvidenceCpt(parent_ids=ids, table=tuple(table), strategy=strategy)
