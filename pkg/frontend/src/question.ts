// State machine for the question panel.
//
// unanswered -> answered(correct?) via submit (exactly once)
// unanswered | answered -> solution-viewed via the solution button
//
// The guard in submit() makes double-clicks a no-op: the promise for the
// in-flight submission is reused, so at most one answer event reaches the
// server per displayed question.

import { getSolution, submitAnswer } from "./api.js";
import type { AnswerResult, Question } from "./types.js";

export type AnswerState =
  | { kind: "unanswered" }
  | { kind: "answered"; correct: boolean }
  | { kind: "solution-viewed" };

export class QuestionViewModel {
  readonly question: Question;
  readonly student: string;
  state: AnswerState = { kind: "unanswered" };
  solutionText: string | null = null;
  chosen: number | null = null;
  private inFlight: Promise<AnswerResult> | null = null;

  constructor(question: Question, student: string) {
    this.question = question;
    this.student = student;
  }

  get answered(): boolean {
    return this.state.kind === "answered";
  }

  /** Submit once; repeated calls while pending or after answering reuse
   * the first submission's result. */
  submit(choiceIndex: number): Promise<AnswerResult> {
    if (this.inFlight !== null) {
      return this.inFlight;
    }
    this.chosen = choiceIndex;
    const payload: number | boolean =
      this.question.kind === "true-false" ? choiceIndex === 0 : choiceIndex;
    this.inFlight = submitAnswer(this.student, this.question.number, payload).then(
      (result) => {
        this.state = { kind: "answered", correct: result.correct };
        return result;
      },
      (err) => {
        // network failure: allow a retry, no optimistic update
        this.inFlight = null;
        this.chosen = null;
        throw err;
      },
    );
    return this.inFlight;
  }

  async viewSolution(): Promise<string> {
    if (this.solutionText === null) {
      const body = await getSolution(this.question.number, this.student);
      this.solutionText = body.solution;
      if (this.state.kind === "unanswered") {
        this.state = { kind: "solution-viewed" };
      }
    }
    return this.solutionText;
  }
}
