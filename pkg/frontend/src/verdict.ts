/**
 * Local verdict edit state for one review item.
 *
 * Every detection starts as "correct"; clicking it toggles false-positive,
 * clicking empty space adds a missed position at that exact pixel. All
 * edits stay local (and undoable) until submit.
 */

export type Judgment = "correct" | "false-positive";

export interface Detection {
  id: string;
  x: number;
  y: number;
  alpha: number;
}

export interface VerdictBody {
  judgments: Record<string, Judgment>;
  missed: [number, number][];
  note: string;
}

type Edit =
  | { kind: "toggle"; id: string }
  | { kind: "miss"; x: number; y: number };

export class VerdictEditor {
  private judgments = new Map<string, Judgment>();
  private missed: [number, number][] = [];
  private edits: Edit[] = [];

  constructor(public readonly detections: readonly Detection[]) {
    for (const d of detections) this.judgments.set(d.id, "correct");
  }

  judgmentOf(id: string): Judgment {
    const j = this.judgments.get(id);
    if (j === undefined) throw new Error(`unknown detection ${id}`);
    return j;
  }

  toggle(id: string): Judgment {
    const next: Judgment =
      this.judgmentOf(id) === "correct" ? "false-positive" : "correct";
    this.judgments.set(id, next);
    this.edits.push({ kind: "toggle", id });
    return next;
  }

  addMissed(x: number, y: number): void {
    if (!Number.isInteger(x) || !Number.isInteger(y)) {
      throw new Error("missed positions are integer pixels");
    }
    this.missed.push([x, y]);
    this.edits.push({ kind: "miss", x, y });
  }

  /** Revert the most recent edit; false when there is nothing to undo. */
  undo(): boolean {
    const last = this.edits.pop();
    if (!last) return false;
    if (last.kind === "toggle") {
      const j = this.judgments.get(last.id)!;
      this.judgments.set(last.id, j === "correct" ? "false-positive" : "correct");
    } else {
      this.missed.pop();
    }
    return true;
  }

  /** Unsaved-edits flag for navigation guards. */
  get dirty(): boolean {
    return this.edits.length > 0;
  }

  get missedPositions(): readonly [number, number][] {
    return this.missed;
  }

  falsePositiveIds(): string[] {
    return [...this.judgments.entries()]
      .filter(([, j]) => j === "false-positive")
      .map(([id]) => id);
  }

  toJSON(note = ""): VerdictBody {
    const judgments: Record<string, Judgment> = {};
    for (const d of this.detections) judgments[d.id] = this.judgmentOf(d.id);
    return { judgments, missed: this.missed.map(([x, y]) => [x, y]), note };
  }
}
