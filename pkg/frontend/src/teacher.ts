// Teacher dashboard: class-average bars per concept plus per-student
// drill-down. Averages come from the teacher endpoints; the client adds
// no computation of its own.

import { getConcepts, teacherAverage, teacherStudent, teacherStudents } from "./api.js";
import { flattenPercents } from "./progress.js";
import { escapeHtml } from "./render.js";
import type { ConceptNode } from "./types.js";

export interface AverageRow {
  concept: string;
  title: string;
  depth: number;
  percent: number;
}

export async function classAverages(tree: ConceptNode): Promise<AverageRow[]> {
  const rows: AverageRow[] = [];
  const queue: Array<{ node: ConceptNode; depth: number }> = [{ node: tree, depth: 0 }];
  const flat: Array<{ node: ConceptNode; depth: number }> = [];
  while (queue.length) {
    const item = queue.shift()!;
    flat.push(item);
    item.node.children.forEach((child) => queue.push({ node: child, depth: item.depth + 1 }));
  }
  const percents = await Promise.all(flat.map((item) => teacherAverage(item.node.concept)));
  flat.forEach((item, i) => {
    rows.push({
      concept: item.node.concept,
      title: item.node.title,
      depth: item.depth,
      percent: percents[i].percent,
    });
  });
  return rows;
}

export function renderAverageRows(rows: AverageRow[]): string {
  return rows
    .map(
      (row) => `
<div class="bar-row" data-concept="${escapeHtml(row.concept)}" style="margin-left:${row.depth * 1.25}rem">
  <span class="bar-label">${escapeHtml(row.title)}</span>
  <span class="bar-track"><span class="bar-fill" style="width:${row.percent}%"></span>
  <span class="bar-value">${row.percent}%</span></span>
</div>`,
    )
    .join("\n");
}

export function renderStudentList(students: string[]): string {
  if (students.length === 0) {
    return `<p class="empty-class">No student activity yet.</p>`;
  }
  return students
    .map(
      (s) =>
        `<button class="student-link" data-action="drill" data-student="${escapeHtml(s)}">${escapeHtml(s)}</button>`,
    )
    .join("\n");
}

export class TeacherDashboard {
  private averagesHost: HTMLElement;
  private studentsHost: HTMLElement;
  private drillHost: HTMLElement;

  constructor(averagesHost: HTMLElement, studentsHost: HTMLElement, drillHost: HTMLElement) {
    this.averagesHost = averagesHost;
    this.studentsHost = studentsHost;
    this.drillHost = drillHost;
  }

  async start(): Promise<void> {
    const concepts = await getConcepts();
    try {
      const rows = await classAverages(concepts);
      this.averagesHost.innerHTML = renderAverageRows(rows);
    } catch {
      // class_average errors with no students; show the empty state
      this.averagesHost.innerHTML = `<p class="empty-class">No data: nobody has studied yet.</p>`;
    }
    const body = await teacherStudents();
    this.studentsHost.innerHTML = renderStudentList(body.students);
    this.studentsHost.addEventListener("click", (event) => {
      const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action=drill]");
      if (target?.dataset.student) {
        void this.drill(target.dataset.student);
      }
    });
  }

  async drill(student: string): Promise<void> {
    const tree = await teacherStudent(student);
    const percents = [...flattenPercents(tree).entries()]
      .map(([concept, percent]) => `<li>${escapeHtml(concept)}: ${percent}%</li>`)
      .join("");
    this.drillHost.innerHTML = `<h3>${escapeHtml(student)}</h3><ul>${percents}</ul>`;
  }
}

if (typeof document !== "undefined") {
  const averages = document.getElementById("class-averages");
  const students = document.getElementById("student-list");
  const drill = document.getElementById("student-drill");
  if (averages && students && drill) {
    void new TeacherDashboard(averages, students, drill).start();
  }
}
