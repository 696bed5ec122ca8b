// Pure HTML renderers. All state lives in the view models; these functions
// turn them into markup strings so they stay unit-testable without a DOM.

import type { BarView } from "./progress.js";
import type { QuestionViewModel } from "./question.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderBar(bar: BarView): string {
  const deltaBadge =
    bar.delta !== 0
      ? `<span class="delta ${bar.delta > 0 ? "up" : "down"}">${
          bar.delta > 0 ? "+" : ""
        }${bar.delta}</span>`
      : "";
  const caret = bar.hasChildren ? `<span class="caret">${bar.expanded ? "▾" : "▸"}</span>` : "";
  return `
<div class="bar-row${bar.delta !== 0 ? " changed" : ""}" data-concept="${escapeHtml(bar.concept)}"
     style="margin-left:${bar.depth * 1.25}rem">
  <button class="bar-label" data-action="toggle" data-concept="${escapeHtml(bar.concept)}">
    ${caret}${escapeHtml(bar.title)}
  </button>
  <button class="bar-track" data-action="practice" data-concept="${escapeHtml(bar.concept)}"
          title="practice ${escapeHtml(bar.title)}">
    <span class="bar-fill" style="width:${bar.percent}%"></span>
    <span class="bar-value">${bar.percent}%</span>
  </button>
  ${deltaBadge}
</div>`;
}

export function renderBars(bars: BarView[]): string {
  return bars.filter((bar) => bar.visible).map(renderBar).join("\n");
}

export function renderQuestion(vm: QuestionViewModel): string {
  const q = vm.question;
  const answered = vm.state.kind === "answered";
  const choices = q.choices
    .map((choice, index) => {
      const picked = vm.chosen === index ? " picked" : "";
      return `
  <button class="choice${picked}" data-action="answer" data-index="${index}"
          ${answered ? "disabled" : ""}>${escapeHtml(choice)}</button>`;
    })
    .join("\n");

  let verdict = "";
  if (vm.state.kind === "answered") {
    verdict = vm.state.correct
      ? `<p class="verdict right">Correct!</p>`
      : `<p class="verdict wrong">Wrong.</p>`;
  }
  const solution =
    vm.solutionText !== null
      ? `<div class="solution"><h3>Solution</h3><p>${escapeHtml(vm.solutionText)}</p></div>`
      : `<button class="see-solution" data-action="solution">See the detailed solution</button>`;

  return `
<div class="question" data-number="${q.number}">
  <header>Question #${q.number}</header>
  <p class="stem">${escapeHtml(q.stem)}</p>
  <div class="choices">${choices}</div>
  ${verdict}
  ${solution}
</div>`;
}

export function renderError(message: string): string {
  return `<p class="inline-error">${escapeHtml(message)}</p>`;
}
