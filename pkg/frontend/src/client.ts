/**
 * Thin typed client for the pipeline service HTTP API.
 *
 * The fetch implementation is injectable so tests can run against a mock
 * transport; everything the UI displays flows through these calls — the
 * client never computes domain numbers itself.
 */

import type { JobRecord, MeasurementReport, PipelineConfig } from "./types.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{
  status: number;
  text(): Promise<string>;
}>;

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: string,
  ) {
    super(`service responded ${status}: ${body}`);
  }
}

export class PipelineClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike,
  ) {}

  private async request(
    path: string,
    init?: Parameters<FetchLike>[1],
  ): Promise<string> {
    const res = await this.fetchImpl(this.baseUrl + path, init);
    const text = await res.text();
    if (res.status >= 400) {
      throw new ServiceError(res.status, text);
    }
    return text;
  }

  async createJob(config: PipelineConfig): Promise<JobRecord> {
    const text = await this.request("/jobs", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(config),
    });
    return JSON.parse(text) as JobRecord;
  }

  async getJob(jobId: string): Promise<JobRecord> {
    return JSON.parse(await this.request(`/jobs/${jobId}`)) as JobRecord;
  }

  /** Poll until the job reaches a terminal stage ("done" or "failed"). */
  async pollUntilDone(
    jobId: string,
    options: {
      intervalMs?: number;
      timeoutMs?: number;
      sleep?: (ms: number) => Promise<void>;
      onUpdate?: (record: JobRecord) => void;
    } = {},
  ): Promise<JobRecord> {
    const intervalMs = options.intervalMs ?? 250;
    const timeoutMs = options.timeoutMs ?? 120_000;
    const sleep =
      options.sleep ?? ((ms) => new Promise((r) => setTimeout(r, ms)));
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const record = await this.getJob(jobId);
      options.onUpdate?.(record);
      if (record.stage === "done" || record.stage === "failed") {
        return record;
      }
      if (Date.now() >= deadline) {
        throw new Error(`job ${jobId} did not finish within ${timeoutMs} ms`);
      }
      await sleep(intervalMs);
    }
  }

  /** Raw report body, byte-identical to the service payload. */
  async getReportText(jobId: string): Promise<string> {
    return this.request(`/jobs/${jobId}/report`);
  }

  async getReport(jobId: string): Promise<MeasurementReport> {
    return JSON.parse(await this.getReportText(jobId)) as MeasurementReport;
  }

  async getMeshText(
    jobId: string,
    which: "initial" | "final",
  ): Promise<string> {
    return this.request(`/jobs/${jobId}/mesh?which=${which}`);
  }

  async getTrace(jobId: string): Promise<string> {
    return this.request(`/jobs/${jobId}/trace`);
  }

  async getSurface(jobId: string): Promise<string> {
    return this.request(`/jobs/${jobId}/surface`);
  }

  /** URL of the windowed PNG for one slice; the <img> tag does the fetch. */
  sliceUrl(
    axis: number,
    index: number,
    window?: number,
    level?: number,
  ): string {
    const params = new URLSearchParams({
      axis: String(axis),
      index: String(index),
    });
    if (window !== undefined) params.set("window", String(window));
    if (level !== undefined) params.set("level", String(level));
    return `${this.baseUrl}/volume/slice?${params.toString()}`;
  }
}
