/** Shared fixtures: a valid config and a scripted in-memory service. */

import type { FetchLike } from "../src/client.js";
import type {
  JobRecord,
  MeasurementReport,
  PipelineConfig,
} from "../src/types.js";

export function validConfig(): PipelineConfig {
  return {
    volume: "/data/phantom.svh",
    seed: [32.5, 32.5, 75.0],
    window: { lower: 50, upper: 150 },
    skeleton: { prune_length: 10, sample_step: 1.0 },
    stent: { n_t: 12, trunk_rings: 26, limb_rings: 13, r0_trunk: 4, r0_limb: 3 },
    solver: {
      R_trunk: 4,
      R_limb: 3,
      w_vesselWall: 2.25,
      gamma: 10,
      max_iterations: 2500,
      convergence_eps: 1e-4,
      mode: "measure",
    },
    landmarks: {
      proximal_site: 1.0,
      aneurysm_region: [3, 19],
      distal_neck_region: [20, 24],
    },
    markers: [],
  };
}

export function sampleReport(): MeasurementReport {
  return {
    a: 18.26,
    b: 23.37,
    c: 49.7,
    d: 15.96,
    e: 11.84,
    f: 11.81,
    profile: { trunk: [[0, 18.2]], left: [[0, 11.8]], right: [[0, 11.8]] },
    covered_ostia: ["landing_zone"],
    units: "mm",
  };
}

export interface MockService {
  fetch: FetchLike;
  /** Every request the client issued, in order. */
  requests: Array<{ url: string; method: string; body?: string }>;
}

/**
 * Scripted service: POST /jobs echoes the config into a JobRecord, the
 * job runs through the given stage sequence across successive polls, and
 * the report endpoint serves `reportText` verbatim once the job is done.
 */
export function mockService(options: {
  stages?: Array<{ stage: JobRecord["stage"]; progress: number }>;
  reportText?: string;
  error?: string | null;
  createStatus?: number;
  createBody?: string;
}): MockService {
  const stages = options.stages ?? [
    { stage: "segmenting", progress: 0.0 },
    { stage: "simulating", progress: 0.5 },
    { stage: "done", progress: 1.0 },
  ];
  const requests: MockService["requests"] = [];
  let jobCounter = 0;
  let pollCount = 0;
  let config: PipelineConfig | null = null;

  const record = (jobId: string): JobRecord => {
    const step =
      stages[Math.min(Math.max(pollCount, 0), stages.length - 1)]!;
    return {
      id: jobId,
      stage: step.stage,
      progress: step.progress,
      error: step.stage === "failed" ? (options.error ?? "boom") : null,
      config: config!,
    };
  };

  const fetch: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    requests.push({ url, method, body: init?.body });
    const reply = (status: number, body: string) => ({
      status,
      text: async () => body,
    });

    const path = url.replace(/^https?:\/\/[^/]+/, "");
    if (method === "POST" && path === "/jobs") {
      if (options.createStatus !== undefined && options.createStatus >= 400) {
        return reply(options.createStatus, options.createBody ?? "{}");
      }
      config = JSON.parse(init!.body!) as PipelineConfig;
      jobCounter += 1;
      pollCount = -1; // first GET sees the first stage
      return reply(200, JSON.stringify(record(`job-${jobCounter}`)));
    }
    let m = /^\/jobs\/([^/]+)$/.exec(path);
    if (m) {
      pollCount += 1;
      return reply(200, JSON.stringify(record(m[1]!)));
    }
    m = /^\/jobs\/([^/]+)\/report$/.exec(path);
    if (m) {
      const terminal = stages[stages.length - 1]!;
      if (terminal.stage !== "done" || options.reportText === undefined) {
        return reply(404, '{"detail":"report not available"}');
      }
      return reply(200, options.reportText);
    }
    return reply(404, '{"detail":"not found"}');
  };

  return { fetch, requests };
}

export const instantSleep = async (_ms: number): Promise<void> => {};
