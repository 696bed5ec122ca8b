// Thin typed client over the study service HTTP API.

import type { AnswerResult, ConceptNode, ProgressNode, Question } from "./types.js";

export class ApiRequestError extends Error {
  status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, init);
  let body: unknown = null;
  try {
    body = await response.json();
  } catch {
    // non-JSON error body; fall through with the status text
  }
  if (!response.ok) {
    const message =
      body && typeof body === "object" && "error" in body
        ? String((body as { error: unknown }).error)
        : `${response.status} ${response.statusText}`;
    throw new ApiRequestError(response.status, message);
  }
  return body as T;
}

export function getConcepts(): Promise<ConceptNode> {
  return request<ConceptNode>("/api/concepts");
}

export function getProgress(student: string): Promise<ProgressNode> {
  return request<ProgressNode>(`/api/progress/${encodeURIComponent(student)}`);
}

export function selectQuestion(concept: string, student: string): Promise<Question> {
  const params = new URLSearchParams({ concept, student });
  return request<Question>(`/api/question?${params}`);
}

export function getQuestion(number: number): Promise<Question> {
  return request<Question>(`/api/question/${number}`);
}

export function submitAnswer(
  student: string,
  number: number,
  chosen: number | boolean,
): Promise<AnswerResult> {
  return request<AnswerResult>("/api/answer", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ student, number, chosen }),
  });
}

export function getSolution(number: number, student: string): Promise<{ solution: string }> {
  const params = new URLSearchParams({ student });
  return request<{ solution: string }>(`/api/solution/${number}?${params}`);
}

export function teacherAverage(concept: string): Promise<{ concept: string; percent: number }> {
  const params = new URLSearchParams({ concept });
  return request(`/api/teacher/average?${params}`, {
    headers: { "X-Role": "teacher" },
  });
}

export function teacherStudents(): Promise<{ students: string[] }> {
  return request("/api/teacher/students", { headers: { "X-Role": "teacher" } });
}

export function teacherStudent(student: string): Promise<ProgressNode> {
  return request(`/api/teacher/student/${encodeURIComponent(student)}`, {
    headers: { "X-Role": "teacher" },
  });
}
