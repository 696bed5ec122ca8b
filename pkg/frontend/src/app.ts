// Student study area: progress bars + question panel wiring.
//
// Clicking a bar asks the server for a random related question; typing a
// question number fetches that exact question. Submitting shows right or
// wrong immediately and re-renders every bar from the returned tree.

import { getProgress, getQuestion, selectQuestion } from "./api.js";
import { ProgressTreeViewModel } from "./progress.js";
import { QuestionViewModel } from "./question.js";
import { renderBars, renderError, renderQuestion } from "./render.js";
import type { ProgressNode } from "./types.js";

const SESSION_KEY = "studymap-student";

export function sessionStudent(storage: Pick<Storage, "getItem" | "setItem">): string {
  let student = storage.getItem(SESSION_KEY);
  if (!student) {
    student = `student-${Math.random().toString(36).slice(2, 10)}`;
    storage.setItem(SESSION_KEY, student);
  }
  return student;
}

export class StudyApp {
  readonly student: string;
  readonly progress = new ProgressTreeViewModel();
  current: QuestionViewModel | null = null;

  private barsHost: HTMLElement;
  private questionHost: HTMLElement;

  constructor(student: string, barsHost: HTMLElement, questionHost: HTMLElement) {
    this.student = student;
    this.barsHost = barsHost;
    this.questionHost = questionHost;
  }

  async start(): Promise<void> {
    this.applyProgress(await getProgress(this.student));
    this.barsHost.addEventListener("click", (event) => this.onBarsClick(event));
    this.questionHost.addEventListener("click", (event) => {
      this.onQuestionClick(event).catch((err) => this.showError(String(err)));
    });
  }

  applyProgress(tree: ProgressNode): void {
    this.progress.update(tree);
    this.barsHost.innerHTML = renderBars(this.progress.bars());
  }

  private onBarsClick(event: Event): void {
    const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (!target) return;
    const concept = target.dataset.concept ?? "";
    if (target.dataset.action === "toggle") {
      this.progress.toggle(concept);
      this.barsHost.innerHTML = renderBars(this.progress.bars());
    } else if (target.dataset.action === "practice") {
      this.practice(concept).catch((err) => this.showError(String(err)));
    }
  }

  async practice(concept: string): Promise<void> {
    try {
      const question = await selectQuestion(concept, this.student);
      this.current = new QuestionViewModel(question, this.student);
      this.questionHost.innerHTML = renderQuestion(this.current);
    } catch (err) {
      this.showError(err instanceof Error ? err.message : String(err));
    }
  }

  async openByNumber(raw: string): Promise<void> {
    const number = Number.parseInt(raw, 10);
    if (Number.isNaN(number)) {
      this.showError("enter a question number");
      return;
    }
    try {
      const question = await getQuestion(number);
      this.current = new QuestionViewModel(question, this.student);
      this.questionHost.innerHTML = renderQuestion(this.current);
    } catch (err) {
      this.showError(err instanceof Error ? err.message : String(err));
    }
  }

  private async onQuestionClick(event: Event): Promise<void> {
    const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (!target || !this.current) return;
    if (target.dataset.action === "answer") {
      const index = Number(target.dataset.index);
      const result = await this.current.submit(index);
      this.applyProgress(result.progress);
      this.questionHost.innerHTML = renderQuestion(this.current);
    } else if (target.dataset.action === "solution") {
      await this.current.viewSolution();
      this.questionHost.innerHTML = renderQuestion(this.current);
    }
  }

  private showError(message: string): void {
    this.questionHost.innerHTML = renderError(message);
  }
}

export function boot(): void {
  const barsHost = document.getElementById("bars");
  const questionHost = document.getElementById("question");
  const numberForm = document.getElementById("by-number") as HTMLFormElement | null;
  if (!barsHost || !questionHost) return;

  const app = new StudyApp(sessionStudent(window.sessionStorage), barsHost, questionHost);
  app.start().catch((err) => {
    barsHost.innerHTML = renderError(`cannot reach the study service: ${err}`);
  });

  numberForm?.addEventListener("submit", (event) => {
    event.preventDefault();
    const input = numberForm.querySelector<HTMLInputElement>("input[name=number]");
    if (input) void app.openByNumber(input.value);
  });
}

if (typeof document !== "undefined" && document.getElementById("bars")) {
  boot();
}
