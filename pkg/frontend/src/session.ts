/**
 * Review loop orchestration: fetch the next pending frame, collect the
 * expert's edits, submit, advance. Network failures keep the local edit
 * state so a retry never loses work; running counters show how the mined
 * dataset grows during the session.
 */

import { isEmpty, ReviewApi, type ReviewItem } from "./api.js";
import type { Calibration } from "./colormap.js";
import { decodePgm16, type DepthRaster } from "./pgm.js";
import { VerdictEditor } from "./verdict.js";

export interface LoadedItem {
  item: ReviewItem;
  raster: DepthRaster;
  calib: Calibration;
  editor: VerdictEditor;
}

export interface SessionCounters {
  reviewed: number;
  positivesAdded: number;
  negativesAdded: number;
  total: number;
}

export class ReviewSession {
  private current_: LoadedItem | null = null;
  private done_ = false;
  readonly counters: SessionCounters = {
    reviewed: 0,
    positivesAdded: 0,
    negativesAdded: 0,
    total: 0,
  };

  constructor(private readonly api: ReviewApi) {}

  get current(): LoadedItem | null {
    return this.current_;
  }

  /** True once the queue reported itself empty. */
  get done(): boolean {
    return this.done_;
  }

  async loadNext(): Promise<LoadedItem | null> {
    const next = await this.api.nextReview();
    this.counters.total = next.total;
    this.counters.reviewed = next.reviewed;
    if (isEmpty(next)) {
      this.current_ = null;
      this.done_ = true;
      return null;
    }
    const [buf, meta] = await Promise.all([
      this.api.frameRaster(next.frame_id),
      this.api.frameMeta(next.frame_id),
    ]);
    this.current_ = {
      item: next,
      raster: decodePgm16(buf),
      calib: meta,
      editor: new VerdictEditor(next.detections),
    };
    return this.current_;
  }

  /**
   * Submit the current verdict and advance. On failure the current item
   * and its edits are preserved so the caller can simply retry.
   */
  async submitAndAdvance(note = ""): Promise<LoadedItem | null> {
    if (!this.current_) throw new Error("no review item loaded");
    const { item, editor } = this.current_;
    const summary = await this.api.submitVerdict(item.frame_id, editor.toJSON(note));
    this.counters.positivesAdded += summary.positives;
    this.counters.negativesAdded += summary.negatives;
    this.counters.reviewed += 1;
    this.current_ = null;
    return this.loadNext();
  }
}
