import { describe, expect, it } from "vitest";

import { VerdictEditor, type Detection } from "../src/verdict.js";

const DETS: Detection[] = [
  { id: "d0", x: 100, y: 120, alpha: 0.97 },
  { id: "d1", x: 240, y: 180, alpha: 0.93 },
];

describe("VerdictEditor", () => {
  it("starts with every detection judged correct and no edits", () => {
    const e = new VerdictEditor(DETS);
    expect(e.judgmentOf("d0")).toBe("correct");
    expect(e.dirty).toBe(false);
    expect(e.toJSON()).toEqual({
      judgments: { d0: "correct", d1: "correct" },
      missed: [],
      note: "",
    });
  });

  it("toggle is an involution", () => {
    const e = new VerdictEditor(DETS);
    expect(e.toggle("d1")).toBe("false-positive");
    expect(e.toggle("d1")).toBe("correct");
    expect(e.judgmentOf("d1")).toBe("correct");
  });

  it("add then undo leaves no missed positions", () => {
    const e = new VerdictEditor(DETS);
    e.addMissed(55, 66);
    expect(e.missedPositions).toEqual([[55, 66]]);
    expect(e.undo()).toBe(true);
    expect(e.missedPositions).toEqual([]);
    expect(e.undo()).toBe(false);
  });

  it("undo reverts toggles in order", () => {
    const e = new VerdictEditor(DETS);
    e.toggle("d0");
    e.addMissed(10, 20);
    e.toggle("d0");
    expect(e.judgmentOf("d0")).toBe("correct");
    e.undo(); // re-mark d0 false-positive
    expect(e.judgmentOf("d0")).toBe("false-positive");
    e.undo(); // drop the missed point
    expect(e.missedPositions).toEqual([]);
    e.undo();
    expect(e.judgmentOf("d0")).toBe("correct");
    expect(e.dirty).toBe(false);
  });

  it("serializes the exact service schema with integer pixels", () => {
    const e = new VerdictEditor(DETS);
    e.toggle("d0");
    e.addMissed(311, 42);
    expect(e.toJSON("note text")).toEqual({
      judgments: { d0: "false-positive", d1: "correct" },
      missed: [[311, 42]],
      note: "note text",
    });
    expect(() => e.addMissed(1.5, 2)).toThrow(/integer/);
  });

  it("rejects unknown detection ids", () => {
    const e = new VerdictEditor(DETS);
    expect(() => e.toggle("d9")).toThrow(/unknown/);
  });
});
