import { afterEach, beforeEach, describe, expect, it } from "vitest";

import {
  ApiRequestError,
  getProgress,
  getQuestion,
  getSolution,
  selectQuestion,
  submitAnswer,
  teacherAverage,
  teacherStudents,
} from "../src/api.js";
import { FixtureServer, fixtures } from "./fixture_server.js";

let server: FixtureServer;
let restore: () => void;

beforeEach(() => {
  server = new FixtureServer();
  restore = server.install();
});

afterEach(() => restore());

describe("api client", () => {
  it("fetches the progress tree", async () => {
    const tree = await getProgress("student-1");
    expect(tree.concept).toBe("C");
    expect(tree.percent).toBe(50);
    expect(tree.children.map((c) => c.concept)).toEqual(["D", "I", "E"]);
  });

  it("selects a question from a concept bar", async () => {
    const q = await selectQuestion("D", "student-1");
    expect(q.number).toBe(1);
    expect(q.choices).toHaveLength(4);
    const sent = server.requests.at(-1)!;
    expect(sent.path).toContain("concept=D");
  });

  it("looks a question up by number", async () => {
    const q = await getQuestion(1);
    expect(q.stem).toBe(fixtures.question_lookup_1.stem);
  });

  it("submits an answer and receives feedback plus progress", async () => {
    const result = await submitAnswer("student-1", 1, 0);
    expect(result.correct).toBe(true);
    expect(result.progress.percent).toBe(61);
    const sent = server.requests.at(-1)!;
    expect(sent.method).toBe("POST");
    expect(sent.body).toEqual({ student: "student-1", number: 1, chosen: 0 });
  });

  it("fetches a solution with the student attributed", async () => {
    const body = await getSolution(1, "student-1");
    expect(body.solution).toBe(fixtures.solution_1.solution);
    expect(server.requests.at(-1)!.path).toContain("student=student-1");
  });

  it("sends the teacher identity header", async () => {
    await teacherAverage("C");
    await teacherStudents();
    for (const req of server.requests) {
      expect(req.headers["x-role"]).toBe("teacher");
    }
  });

  it("surfaces API errors with status and message", async () => {
    await expect(getQuestion(999)).rejects.toThrowError(ApiRequestError);
    await expect(getQuestion(999)).rejects.toThrowError(/no question/);
    await expect(selectQuestion("E", "s")).rejects.toThrowError(/relate/);
  });
});
