"""Operator and author command line: validate, generate, simulate, report, serve."""

from __future__ import annotations

import json
import signal
import sys
from pathlib import Path

import click

from studymap.concepts import load_concept_map, validate
from studymap.errors import StudymapError
from studymap.evidence import STRATEGIES, STRATEGY_LINEAR
from studymap.service import StudyService, percent_of, rebuild_from_log, read_event_log
from studymap.simulate import run_simulation, usage_from_events
from studymap.templates import generate_bank, load_bank, load_templates_dir, write_bank

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_UNREADABLE = 2


@click.group(context_settings={"auto_envvar_prefix": "STUDYMAP"})
def main():
    """Adaptive independent-study engine.

    Every option can also come from the environment as
    STUDYMAP_<COMMAND>_<PARAMETER>, e.g. STUDYMAP_SERVE_MAP_PATH.
    """


def _load_map_or_exit(map_path: str):
    try:
        return load_concept_map(map_path)
    except OSError as exc:
        click.echo(f"cannot read concept map: {exc}", err=True)
        sys.exit(EXIT_UNREADABLE)


@main.command("validate")
@click.option("--map", "map_path", required=True, help="Concept-map JSON document.")
def cmd_validate(map_path: str):
    """Check a concept map; exit 0 only when it is clean."""
    try:
        with open(map_path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        click.echo(f"cannot read concept map: {exc}", err=True)
        sys.exit(EXIT_UNREADABLE)
    import studymap.concepts as concepts

    try:
        doc_map = concepts.parse_concept_map(text)
    except StudymapError as exc:
        click.echo(f"INVALID: {exc}")
        sys.exit(EXIT_INVALID)
    problems = validate(doc_map)
    if problems:
        for violation in problems:
            click.echo(f"INVALID: {violation}")
        sys.exit(EXIT_INVALID)
    click.echo(f"OK: {len(doc_map.nodes)} concepts, root {doc_map.root!r}")


@main.command("generate")
@click.option("--templates", "templates_dir", required=True, help="Directory of *.tmpl files.")
@click.option("--per-template", default=10, show_default=True, help="Seeds per template.")
@click.option("--out", "out_path", required=True, help="Bank output (JSON lines).")
def cmd_generate(templates_dir: str, per_template: int, out_path: str):
    """Instantiate templates into a deduplicated, numbered question bank."""
    try:
        templates = load_templates_dir(templates_dir)
    except (OSError, StudymapError) as exc:
        click.echo(f"cannot load templates: {exc}", err=True)
        sys.exit(EXIT_UNREADABLE)
    if not templates:
        click.echo(f"no *.tmpl files in {templates_dir}", err=True)
        sys.exit(EXIT_INVALID)
    report = generate_bank(templates, per_template)
    write_bank(report.instances, out_path)
    click.echo(f"templates read:    {len(templates)}")
    click.echo(f"instances emitted: {len(report.instances)}")
    click.echo(f"duplicates folded: {report.duplicates}")
    click.echo(f"errors:            {len(report.errors)}")
    for template_id, seed, message in report.errors[:20]:
        click.echo(f"  {template_id} seed {seed}: {message}", err=True)
    if not report.instances:
        sys.exit(EXIT_INVALID)


@main.command("simulate")
@click.option("--map", "map_path", required=True)
@click.option("--bank", "bank_path", required=True)
@click.option("--students", default=100, show_default=True)
@click.option("--answers", default=20, show_default=True, help="Answers per student.")
@click.option("--seed", default=1, show_default=True)
@click.option("--strategy", type=click.Choice(STRATEGIES), default=STRATEGY_LINEAR, show_default=True)
@click.option("--out-log", default=None, help="Also write the answers as an event log.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
def cmd_simulate(map_path, bank_path, students, answers, seed, strategy, out_log, as_json):
    """Diagnosis sanity check against synthetic students with known mastery."""
    cmap = _load_map_or_exit(map_path)
    try:
        instances = load_bank(bank_path)
    except (OSError, StudymapError) as exc:
        click.echo(f"cannot load bank: {exc}", err=True)
        sys.exit(EXIT_UNREADABLE)
    if not instances:
        click.echo("bank is empty", err=True)
        sys.exit(EXIT_INVALID)

    by_qid = {i.meta.question_id: i for i in instances}
    report = run_simulation(
        cmap, [i.meta for i in instances], students, answers, seed, strategy
    )

    if out_log:
        number_of = {qid: inst.instance_number for qid, inst in by_qid.items()}
        with open(out_log, "w", encoding="utf-8") as fh:
            ts = 0
            for student in report.per_student:
                for seq, (qid, outcome) in enumerate(student.answers, start=1):
                    inst = by_qid[qid]
                    chosen = (
                        inst.correct_index
                        if outcome == 1
                        else (inst.correct_index + 1) % len(inst.choices)
                    )
                    ts += 1
                    fh.write(
                        json.dumps(
                            {
                                "seq": seq,
                                "student": student.student_id,
                                "number": number_of[qid],
                                "chosen": chosen,
                                "correct": bool(outcome),
                                "ts": ts,
                            },
                            sort_keys=True,
                            separators=(",", ":"),
                        )
                        + "\n"
                    )

    if as_json:
        click.echo(json.dumps(report.to_json(), sort_keys=True))
        return
    click.echo(f"students:    {report.students}")
    click.echo(f"answers/ea:  {report.answers_each}")
    click.echo(f"separation:  {report.separation:+.4f}")
    click.echo(f"match rate:  {report.match_rate:.4f}")
    if report.degenerate:
        click.echo("note: no answers were simulated; posteriors sit at their priors "
                   "and the match rate is chance level")


@main.command("report")
@click.option("--log", "log_path", required=True)
@click.option("--map", "map_path", default=None, help="Needed for the success-threshold table.")
@click.option("--bank", "bank_path", default=None, help="Needed for the success-threshold table.")
@click.option("--strategy", type=click.Choice(STRATEGIES), default=STRATEGY_LINEAR, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def cmd_report(log_path, map_path, bank_path, strategy, as_json):
    """Usage statistics from an event log, Table-style thresholds when the
    map and bank are supplied."""
    try:
        events, warning = read_event_log(log_path)
    except OSError as exc:
        click.echo(f"cannot read log: {exc}", err=True)
        sys.exit(EXIT_UNREADABLE)
    if warning:
        click.echo(f"warning: {warning}", err=True)
    usage = usage_from_events(events)

    if map_path and bank_path:
        cmap = _load_map_or_exit(map_path)
        instances = load_bank(bank_path)
        service = StudyService(cmap, instances, strategy=strategy)
        service.replay_events(events)
        students = service.student_ids()
        if students:
            root = cmap.root
            percents = [percent_of(service.posterior_of(s, root)) for s in students]
            usage.above_50 = sum(1 for p in percents if p >= 50) / len(percents)
            usage.above_80 = sum(1 for p in percents if p >= 80) / len(percents)

    if as_json:
        click.echo(json.dumps(usage.to_json(), sort_keys=True))
        return
    click.echo(f"total answers:     {usage.total_answers}")
    click.echo(f"distinct students: {usage.distinct_students}")
    click.echo(f"mean answers:      {usage.mean_answers:.2f}")
    click.echo(f"std dev (pop.):    {usage.std_answers:.2f}")
    click.echo(f"solution views:    {usage.solution_views}")
    if usage.above_50 is not None:
        click.echo(f"above 50%:         {usage.above_50:.0%}")
        click.echo(f"above 80%:         {usage.above_80:.0%}")


@main.command("serve")
@click.option("--map", "map_path", required=True)
@click.option("--bank", "bank_path", required=True)
@click.option("--listen", default="127.0.0.1:8000", show_default=True, help="host:port")
@click.option("--strategy", type=click.Choice(STRATEGIES), default=STRATEGY_LINEAR, show_default=True)
@click.option("--log", "log_path", default=None, help="Append-only event log (replayed on start).")
@click.option("--ui-dir", default=None, help="Directory of built client assets to serve at /.")
@click.option("--seed", default=None, type=int, help="Selection RNG seed (testing).")
def cmd_serve(map_path, bank_path, listen, strategy, log_path, ui_dir, seed):
    """Run the study service until signalled; flushes the log on shutdown."""
    import uvicorn

    from studymap.api import create_app

    cmap = _load_map_or_exit(map_path)
    try:
        instances = load_bank(bank_path)
    except (OSError, StudymapError) as exc:
        click.echo(f"cannot load bank: {exc}", err=True)
        sys.exit(EXIT_UNREADABLE)

    if log_path:
        service, warning = rebuild_from_log(
            cmap, instances, log_path, strategy=strategy, selection_seed=seed
        )
        if warning:
            click.echo(f"warning: {warning}", err=True)
    else:
        service = StudyService(cmap, instances, strategy=strategy, selection_seed=seed)

    host, _, port_text = listen.partition(":")
    try:
        port = int(port_text)
    except ValueError:
        click.echo(f"bad --listen value {listen!r}, expected host:port", err=True)
        sys.exit(EXIT_INVALID)

    app = create_app(service, ui_dir=ui_dir)

    def shutdown(_signum, _frame):
        raise KeyboardInterrupt

    signal.signal(signal.SIGTERM, shutdown)
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=port, log_level="warning")
    except KeyboardInterrupt:
        pass
    finally:
        service.close()


if __name__ == "__main__":
    main()
