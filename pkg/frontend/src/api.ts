/**
 * Typed client for the review service.
 *
 * The fetch implementation is injectable so the client runs identically in
 * the browser and under node-based tests.
 */

import type { Calibration } from "./colormap.js";
import type { Detection, VerdictBody } from "./verdict.js";

export interface Health {
  status: string;
  model_hash: string;
  store: { positive: number; negative: number };
  frames: number;
  reviewed: number;
}

export interface ReviewItem {
  frame_id: string;
  status: "pending";
  detections: Detection[];
  frame: string;
  meta: string;
  reviewed: number;
  total: number;
}

export interface QueueEmpty {
  empty: true;
  reviewed: number;
  total: number;
}

export interface VerdictSummary {
  frame_id: string;
  positives: number;
  negatives: number;
  skipped: number;
  replay: boolean;
}

export interface StoreStats {
  counts: { positive: number; negative: number };
  by_provenance: Record<string, { positive: number; negative: number }>;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ReviewApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (...a) => fetch(...a),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.url(path), init);
    if (!resp.ok) {
      let code = "http_error";
      let message = `${resp.status}`;
      try {
        const body = (await resp.json()) as { error?: string; message?: string };
        code = body.error ?? code;
        message = body.message ?? message;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, code, message);
    }
    return (await resp.json()) as T;
  }

  health(): Promise<Health> {
    return this.json("/health");
  }

  nextReview(): Promise<ReviewItem | QueueEmpty> {
    return this.json("/review/next");
  }

  async frameRaster(frameId: string): Promise<ArrayBuffer> {
    const resp = await this.fetchFn(this.url(`/frames/${frameId}.pgm`));
    if (!resp.ok) {
      throw new ApiError(resp.status, "unknown_frame", `no frame ${frameId}`);
    }
    return resp.arrayBuffer();
  }

  frameMeta(frameId: string): Promise<Calibration & { frame_id: string }> {
    return this.json(`/frames/${frameId}/meta`);
  }

  submitVerdict(frameId: string, body: VerdictBody): Promise<VerdictSummary> {
    return this.json(`/frames/${frameId}/verdict`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  storeStats(): Promise<StoreStats> {
    return this.json("/store/stats");
  }
}

export function isEmpty(r: ReviewItem | QueueEmpty): r is QueueEmpty {
  return (r as QueueEmpty).empty === true;
}
