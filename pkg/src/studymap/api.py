"""HTTP/JSON API over a StudyService.

Paths are the contract the browser client consumes:

    GET  /api/progress/{student}            ProgressView (auto-registers)
    GET  /api/question?concept={id}         random related instance
    GET  /api/question/{number}             instance lookup
    POST /api/answer {student,number,chosen}  {correct, progress, solution}
    GET  /api/solution/{number}             {solution}
    GET  /api/teacher/average?concept={id}  {concept, percent}
    GET  /api/teacher/student/{id}          that student's ProgressView

Question payloads never carry the correct index or the solution; those are
only revealed by answering or by the solution endpoint.  Teacher routes
expect the pluggable identity header (X-Role: teacher).
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Header, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from studymap.errors import ModelError, StudymapError, UnknownEntityError
from studymap.service import StudyService
from studymap.templates import QuestionInstance


class AnswerBody(BaseModel):
    student: str
    number: int
    chosen: int | bool


def question_payload(instance: QuestionInstance) -> dict:
    """Client view of an instance: no correct index, no solution."""
    return {
        "number": instance.instance_number,
        "template_id": instance.template_id,
        "kind": instance.kind,
        "stem": instance.stem,
        "choices": list(instance.choices),
    }


def create_app(service: StudyService, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="studymap", docs_url=None, redoc_url=None)

    @app.exception_handler(UnknownEntityError)
    async def unknown_handler(_req: Request, exc: UnknownEntityError):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(StudymapError)
    async def model_handler(_req: Request, exc: StudymapError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    def require_teacher(role: str | None) -> JSONResponse | None:
        if role != "teacher":
            return JSONResponse(
                status_code=403, content={"error": "teacher role required (X-Role: teacher)"}
            )
        return None

    @app.get("/api/progress/{student}")
    def progress(student: str):
        service.ensure_student(student)
        return service.get_progress(student)

    @app.get("/api/question")
    def select_question(concept: str, student: str = "anonymous"):
        instance = service.select_question(student, concept)
        return question_payload(instance)

    @app.get("/api/question/{number}")
    def question_by_number(number: int):
        return question_payload(service.get_question_by_number(number))

    @app.post("/api/answer")
    def answer(body: AnswerBody):
        if isinstance(body.chosen, bool) or isinstance(body.chosen, int):
            chosen: int | bool = body.chosen
        else:  # pragma: no cover - pydantic enforces the union
            raise ModelError("chosen must be an index or a boolean")
        correct, tree, solution_ref = service.record_answer(body.student, body.number, chosen)
        return {"correct": correct, "progress": tree, "solution": solution_ref}

    @app.get("/api/solution/{number}")
    def solution(number: int, student: str | None = None):
        return {"solution": service.get_solution(number, student_id=student)}

    @app.get("/api/teacher/average")
    def teacher_average(concept: str, x_role: str | None = Header(default=None)):
        denied = require_teacher(x_role)
        if denied is not None:
            return denied
        return {"concept": concept, "percent": service.class_average(concept)}

    @app.get("/api/teacher/student/{student}")
    def teacher_student(student: str, x_role: str | None = Header(default=None)):
        denied = require_teacher(x_role)
        if denied is not None:
            return denied
        return service.get_progress(student)

    @app.get("/api/teacher/students")
    def teacher_students(x_role: str | None = Header(default=None)):
        denied = require_teacher(x_role)
        if denied is not None:
            return denied
        return {"students": service.student_ids()}

    @app.get("/api/concepts")
    def concepts():
        """Concept tree without student state (for client bootstrapping)."""
        cmap = service.concept_map

        def tree(cid: str) -> dict:
            node = cmap.nodes[cid]
            return {
                "concept": cid,
                "title": node.title,
                "children": [tree(child) for child, _ in node.children],
            }

        return tree(cmap.root)

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
