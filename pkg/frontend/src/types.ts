// Wire types for the study service API. The client performs no probability
// computation: every percent shown on screen is a value from this API.

export interface ProgressNode {
  concept: string;
  title: string;
  percent: number;
  children: ProgressNode[];
}

export interface ConceptNode {
  concept: string;
  title: string;
  children: ConceptNode[];
}

// Question payloads never include the correct index or the solution; the
// server only reveals correctness after an answer is submitted.
export interface Question {
  number: number;
  template_id: string;
  kind: "multiple-choice" | "true-false";
  stem: string;
  choices: string[];
}

export interface AnswerResult {
  correct: boolean;
  progress: ProgressNode;
  solution: string;
}

export interface ApiError {
  error: string;
}
