"""Parameterized question templates, instantiation, and bank generation.

A template document is plain UTF-8 text with % section headers:

    %id power-rule-at-point          (optional; defaults to the file name)
    %kind multiple-choice            (or true-false; default multiple-choice)
    %params
    a in 2..9                        (integer range, inclusive)
    b in {1, 3/2, 2}                 (explicit values, integers or p/q)
    constraint a != b
    %stem
    Compute f'({{b}}) for f(x) = {{a}}*x^2.
    %choices
    {{2*a*b}}                        (first choice is the correct one)
    {{a*b}}
    {{2*a}}
    {{a*b + 1}}
    %solution
    f'(x) = 2*{{a}}*x, so f'({{b}}) = {{2*a*b}}.
    SIACUAstart
    level=2; slip=0.1; guess=0.25; discr=0.3
    concepts = [(pd_chain_rule, 1.0)]
    SIACUAend

For true/false the %choices section holds exactly one boolean expression,
the truth of the displayed statement.  Embedded ``{{ ... }}`` expressions
may reference only declared parameters.

Instantiation is deterministic: parameters are drawn with the fixed
splitmix64 stream keyed by (template id, seed), constraints are satisfied
by rejection sampling with a bounded attempt budget, and choices are
shuffled from the same stream.  A (template_id, seed) pair therefore
reproduces the identical instance on any platform.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from studymap.errors import DocumentParseError, GenerationError
from studymap.evidence import (
    BLOCK_END,
    BLOCK_START,
    KIND_MULTIPLE_CHOICE,
    KIND_TRUE_FALSE,
    KINDS,
    QuestionMeta,
    SiacuaBlock,
    parse_siacua_block,
)
from studymap.evidence import serialize_siacua_block
from studymap.expressions import (
    EvalError,
    Expr,
    eval_expression,
    expression_to_text,
    free_names,
    parse_expression,
    render_value,
)
from studymap.rng import stream

MAX_SAMPLING_ATTEMPTS = 10_000
MIN_DISTRACTORS = 3

_SEGMENT_RE = re.compile(r"\{\{(.*?)\}\}", re.DOTALL)
_RANGE_RE = re.compile(r"^(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s+in\s+(?P<lo>-?\d+)\s*\.\.\s*(?P<hi>-?\d+)$")
_SET_RE = re.compile(r"^(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s+in\s+\{(?P<body>[^}]*)\}$")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    domain: tuple[Fraction, ...]


@dataclass(frozen=True)
class TextTemplate:
    """Alternating literal text and embedded expressions."""

    literals: tuple[str, ...]  # len(exprs) + 1
    exprs: tuple[Expr, ...]

    def render(self, bindings: dict[str, Fraction]) -> str:
        parts = [self.literals[0]]
        for expr, lit in zip(self.exprs, self.literals[1:]):
            parts.append(render_value(eval_expression(expr, bindings)))
            parts.append(lit)
        return "".join(parts)

    def names(self) -> set[str]:
        out: set[str] = set()
        for expr in self.exprs:
            out |= free_names(expr)
        return out


def _compile_text(text: str) -> TextTemplate:
    literals: list[str] = []
    exprs: list[Expr] = []
    last = 0
    for match in _SEGMENT_RE.finditer(text):
        literals.append(text[last:match.start()])
        exprs.append(parse_expression(match.group(1)))
        last = match.end()
    literals.append(text[last:])
    return TextTemplate(literals=tuple(literals), exprs=tuple(exprs))


@dataclass(frozen=True)
class QuestionTemplate:
    template_id: str
    kind: str
    params: tuple[ParamSpec, ...]
    constraints: tuple[Expr, ...]
    stem: TextTemplate
    choices: tuple[Expr, ...]  # multiple-choice: first is correct; true/false: the truth
    solution: TextTemplate
    block: SiacuaBlock


@dataclass(frozen=True)
class QuestionInstance:
    """One concrete generated question.

    instance_number is 0 until a bank assigns it; within a bank numbers are
    unique and sequential from 1.
    """

    instance_number: int
    template_id: str
    seed: int
    kind: str
    bindings: dict[str, Fraction]
    stem: str
    choices: tuple[str, ...]  # presentation order
    correct_index: int
    solution: str
    meta: QuestionMeta

    def dedupe_key(self) -> tuple:
        return (self.kind, self.stem, tuple(sorted(self.choices)))


def _parse_param_line(line: str) -> ParamSpec:
    match = _RANGE_RE.match(line)
    if match:
        lo, hi = int(match.group("lo")), int(match.group("hi"))
        if hi < lo:
            raise DocumentParseError(f"empty range {lo}..{hi} for {match.group('name')!r}")
        return ParamSpec(match.group("name"), tuple(Fraction(v) for v in range(lo, hi + 1)))
    match = _SET_RE.match(line)
    if match:
        values = []
        for piece in match.group("body").split(","):
            piece = piece.strip()
            if not piece:
                continue
            try:
                values.append(Fraction(piece))
            except (ValueError, ZeroDivisionError):
                raise DocumentParseError(f"bad domain value {piece!r} for {match.group('name')!r}") from None
        if not values:
            raise DocumentParseError(f"empty domain for {match.group('name')!r}")
        return ParamSpec(match.group("name"), tuple(values))
    raise DocumentParseError(f"unrecognized parameter declaration {line!r}")


def parse_template(text: str, template_id: str | None = None) -> QuestionTemplate:
    """Parse and validate one template document."""
    lowered = text.lower()
    start = lowered.find(BLOCK_START.lower())
    end = lowered.find(BLOCK_END.lower())
    if start < 0 or end < 0:
        raise DocumentParseError(f"template is missing its {BLOCK_START}/{BLOCK_END} metadata block")
    block = parse_siacua_block(text[start: end + len(BLOCK_END)])
    body = text[:start] + text[end + len(BLOCK_END):]

    sections: dict[str, list[str]] = {}
    current: str | None = None
    for lineno, line in enumerate(body.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("%"):
            parts = stripped[1:].split(None, 1)
            if not parts:
                raise DocumentParseError("bare % line", lineno)
            current = parts[0].lower()
            if current in sections:
                raise DocumentParseError(f"duplicate section %{current}", lineno)
            sections[current] = [parts[1]] if len(parts) > 1 else []
            continue
        if current is None:
            if stripped:
                raise DocumentParseError(f"text before the first % section: {stripped!r}", lineno)
            continue
        sections[current].append(line)

    for required in ("stem", "choices", "solution"):
        if required not in sections:
            raise DocumentParseError(f"missing required section %{required}")

    if "id" in sections:
        joined = " ".join(sections["id"]).strip()
        if joined:
            template_id = joined
    if not template_id:
        raise DocumentParseError("template has no %id and no fallback id was given")

    kind = KIND_MULTIPLE_CHOICE
    if "kind" in sections:
        kind = " ".join(sections["kind"]).strip().lower()
        if kind not in KINDS:
            raise DocumentParseError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")

    params: list[ParamSpec] = []
    constraints: list[Expr] = []
    for line in sections.get("params", []):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("constraint"):
            constraints.append(parse_expression(line[len("constraint"):]))
        else:
            params.append(_parse_param_line(line))
    names = [p.name for p in params]
    if len(set(names)) != len(names):
        raise DocumentParseError("duplicate parameter name")
    declared = set(names)

    stem = _compile_text("\n".join(sections["stem"]).strip())
    solution = _compile_text("\n".join(sections["solution"]).strip())

    choice_exprs = []
    for line in sections["choices"]:
        line = line.strip()
        if not line:
            continue
        # Choice lines are single expressions; the {{ }} delimiters used in
        # stems are accepted here too so documents look uniform.
        if line.startswith("{{") and line.endswith("}}"):
            line = line[2:-2]
        choice_exprs.append(parse_expression(line))
    if kind == KIND_MULTIPLE_CHOICE:
        if len(choice_exprs) < 1 + MIN_DISTRACTORS:
            raise DocumentParseError(
                f"multiple-choice needs a correct choice plus at least {MIN_DISTRACTORS} "
                f"distractors, found {len(choice_exprs)}"
            )
    else:
        if len(choice_exprs) != 1:
            raise DocumentParseError("true-false needs exactly one truth expression in %choices")

    used = stem.names() | solution.names()
    for expr in choice_exprs:
        used |= free_names(expr)
    for expr in constraints:
        used |= free_names(expr)
    undeclared = sorted(used - declared)
    if undeclared:
        raise DocumentParseError(f"undeclared parameter {undeclared[0]!r}")

    return QuestionTemplate(
        template_id=template_id,
        kind=kind,
        params=tuple(params),
        constraints=tuple(constraints),
        stem=stem,
        choices=tuple(choice_exprs),
        solution=solution,
        block=block,
    )


def serialize_template(template: QuestionTemplate) -> str:
    """Canonical document form; parsing it back is structurally equal.

    Domains serialize as explicit value sets and expressions in fully
    parenthesized form, so the text can differ from the authored source
    while the parsed template compares equal.
    """
    def text_of(tt: TextTemplate) -> str:
        parts = [tt.literals[0]]
        for expr, lit in zip(tt.exprs, tt.literals[1:]):
            parts.append("{{" + expression_to_text(expr) + "}}")
            parts.append(lit)
        return "".join(parts)

    lines = [f"%id {template.template_id}", f"%kind {template.kind}", "%params"]
    for spec in template.params:
        values = ", ".join(render_value(v) for v in spec.domain)
        lines.append(f"{spec.name} in {{{values}}}")
    for constraint in template.constraints:
        lines.append(f"constraint {expression_to_text(constraint)}")
    lines.append("%stem")
    lines.append(text_of(template.stem))
    lines.append("%choices")
    for choice in template.choices:
        lines.append("{{" + expression_to_text(choice) + "}}")
    lines.append("%solution")
    lines.append(text_of(template.solution))
    lines.append(serialize_siacua_block(template.block))
    return "\n".join(lines) + "\n"


def load_template(path: str | Path) -> QuestionTemplate:
    path = Path(path)
    return parse_template(path.read_text(encoding="utf-8"), template_id=path.stem)


def load_templates_dir(directory: str | Path) -> list[QuestionTemplate]:
    """All *.tmpl files in *directory*, sorted by file name."""
    directory = Path(directory)
    templates = []
    for path in sorted(directory.glob("*.tmpl")):
        templates.append(load_template(path))
    return templates


def instantiate(template: QuestionTemplate, seed: int) -> QuestionInstance:
    """Generate the instance of *template* determined by *seed*.

    Raises GenerationError when the constraints cannot be met within the
    attempt budget or when two choices render identically.
    """
    rng = stream(template.template_id, seed)

    bindings: dict[str, Fraction] = {}
    for attempt in range(MAX_SAMPLING_ATTEMPTS):
        bindings = {
            spec.name: spec.domain[rng.below(len(spec.domain))] for spec in template.params
        }
        try:
            ok = all(eval_expression(c, bindings) is True for c in template.constraints)
        except EvalError as exc:
            raise GenerationError(f"{template.template_id}: constraint failed to evaluate: {exc}") from exc
        if ok:
            break
    else:
        raise GenerationError(
            f"{template.template_id}: no binding satisfied the constraints in "
            f"{MAX_SAMPLING_ATTEMPTS} attempts"
        )

    try:
        stem = template.stem.render(bindings)
        solution = template.solution.render(bindings)

        if template.kind == KIND_TRUE_FALSE:
            truth = eval_expression(template.choices[0], bindings)
            if not isinstance(truth, bool):
                raise GenerationError(
                    f"{template.template_id}: truth expression is not boolean"
                )
            choices = ("True", "False")
            correct_index = 0 if truth else 1
        else:
            rendered = [render_value(eval_expression(c, bindings)) for c in template.choices]
            seen: dict[str, int] = {}
            for i, text in enumerate(rendered):
                if text in seen:
                    raise GenerationError(
                        f"{template.template_id}: choice #{i} renders identically to "
                        f"choice #{seen[text]} ({text!r}) under {_fmt_bindings(bindings)}"
                    )
                seen[text] = i
            order = list(range(len(rendered)))
            rng.shuffle(order)
            choices = tuple(rendered[i] for i in order)
            correct_index = order.index(0)
    except EvalError as exc:
        raise GenerationError(f"{template.template_id}: render failed: {exc}") from exc

    meta = QuestionMeta.from_block(
        question_id=f"{template.template_id}:{seed}", kind=template.kind, block=template.block
    )
    return QuestionInstance(
        instance_number=0,
        template_id=template.template_id,
        seed=seed,
        kind=template.kind,
        bindings=bindings,
        stem=stem,
        choices=choices,
        correct_index=correct_index,
        solution=solution,
        meta=meta,
    )


def _fmt_bindings(bindings: dict[str, Fraction]) -> str:
    return ", ".join(f"{k}={render_value(v)}" for k, v in bindings.items())


@dataclass
class BankReport:
    instances: list[QuestionInstance] = field(default_factory=list)
    errors: list[tuple[str, int, str]] = field(default_factory=list)  # template, seed, message
    duplicates: int = 0


def generate_bank(
    templates: list[QuestionTemplate], per_template: int, seed_start: int = 1
) -> BankReport:
    """Instantiate every template for seeds seed_start..seed_start+n-1,
    collapse duplicates, and number the survivors 1..n.

    Per-instance failures are collected in the report, never fatal.
    """
    if per_template < 1:
        raise GenerationError("per_template must be at least 1")
    report = BankReport()
    seen: set[tuple] = set()
    number = 0
    for template in templates:
        for seed in range(seed_start, seed_start + per_template):
            try:
                instance = instantiate(template, seed)
            except GenerationError as exc:
                report.errors.append((template.template_id, seed, str(exc)))
                continue
            key = instance.dedupe_key()
            if key in seen:
                report.duplicates += 1
                continue
            seen.add(key)
            number += 1
            instance = replace(
                instance,
                instance_number=number,
                meta=replace(instance.meta, question_id=f"q{number}"),
            )
            report.instances.append(instance)
    return report


def instance_to_json(instance: QuestionInstance) -> dict:
    return {
        "number": instance.instance_number,
        "template_id": instance.template_id,
        "seed": instance.seed,
        "kind": instance.kind,
        "params": {k: render_value(v) for k, v in instance.bindings.items()},
        "stem": instance.stem,
        "choices": list(instance.choices),
        "correct_index": instance.correct_index,
        "solution": instance.solution,
        "meta": {
            "question_id": instance.meta.question_id,
            "guess": instance.meta.guess,
            "slip": instance.meta.slip,
            "level": instance.meta.level,
            "discr": instance.meta.discr,
            "concepts": [[cid, w] for cid, w in instance.meta.concepts],
        },
    }


def instance_from_json(doc: dict) -> QuestionInstance:
    meta = QuestionMeta(
        question_id=doc["meta"]["question_id"],
        kind=doc["kind"],
        guess=doc["meta"]["guess"],
        slip=doc["meta"]["slip"],
        level=doc["meta"]["level"],
        discr=doc["meta"]["discr"],
        concepts=tuple((cid, w) for cid, w in doc["meta"]["concepts"]),
    )
    return QuestionInstance(
        instance_number=doc["number"],
        template_id=doc["template_id"],
        seed=doc["seed"],
        kind=doc["kind"],
        bindings={k: Fraction(v) for k, v in doc["params"].items()},
        stem=doc["stem"],
        choices=tuple(doc["choices"]),
        correct_index=doc["correct_index"],
        solution=doc["solution"],
        meta=meta,
    )


def write_bank(instances: list[QuestionInstance], path: str | Path) -> None:
    """JSON lines, one instance per line, byte-stable across runs."""
    with open(path, "w", encoding="utf-8") as fh:
        for instance in instances:
            fh.write(json.dumps(instance_to_json(instance), sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def load_bank(path: str | Path) -> list[QuestionInstance]:
    instances = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                instances.append(instance_from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise DocumentParseError(f"bad bank line: {exc}", lineno) from exc
    return instances
