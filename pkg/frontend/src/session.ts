/**
 * Planning session state and the launch-and-monitor workflow.
 *
 * The session validates the form client-side (no network call when the
 * service would answer 422), posts the job, polls it to completion, and
 * renders the measurement table verbatim from the service report. Every
 * displayed number is the service payload's JSON text, never recomputed.
 */

import { PipelineClient } from "./client.js";
import type {
  DiameterKey,
  JobRecord,
  MeasurementReport,
  PipelineConfig,
  Triple,
} from "./types.js";
import { DIAMETER_KEYS } from "./types.js";
import { validateConfig, type FieldError } from "./validate.js";

export interface SessionState {
  activeJobId: string | null;
  seed: Triple | null;
  form: PipelineConfig | null;
  lastReport: MeasurementReport | null;
  /** Covered-ostium labels, rendered as red warnings. */
  coverageWarnings: string[];
  fieldErrors: FieldError[];
  jobError: string | null;
}

export function emptySession(): SessionState {
  return {
    activeJobId: null,
    seed: null,
    form: null,
    lastReport: null,
    coverageWarnings: [],
    fieldErrors: [],
    jobError: null,
  };
}

export interface DiameterCell {
  key: DiameterKey;
  /** Verbatim JSON text of the report field — what the table shows. */
  text: string;
  value: number;
}

/**
 * Build the a–f table from the raw report body. Cell text is sliced out
 * of the JSON payload itself so the display is byte-traceable to the
 * service response.
 */
export function diameterTable(reportText: string): DiameterCell[] {
  const parsed = JSON.parse(reportText) as MeasurementReport;
  return DIAMETER_KEYS.map((key) => {
    const match = new RegExp(`"${key}"\\s*:\\s*([-0-9.eE+]+)`).exec(reportText);
    if (!match || match[1] === undefined) {
      throw new Error(`report payload is missing field "${key}"`);
    }
    return { key, text: match[1], value: parsed[key] };
  });
}

export interface LaunchOutcome {
  state: SessionState;
  record: JobRecord | null;
  table: DiameterCell[];
}

/**
 * Validate, submit, poll, and collect results. On validation errors the
 * returned state carries them and no request is made.
 */
export async function launchAndMonitor(
  state: SessionState,
  client: PipelineClient,
  config: PipelineConfig,
  pollOptions: Parameters<PipelineClient["pollUntilDone"]>[1] = {},
): Promise<LaunchOutcome> {
  const fieldErrors = validateConfig(config);
  if (fieldErrors.length > 0) {
    return {
      state: { ...state, form: config, fieldErrors, jobError: null },
      record: null,
      table: [],
    };
  }

  const created = await client.createJob(config);
  const record = await client.pollUntilDone(created.id, pollOptions);
  if (record.stage === "failed") {
    return {
      state: {
        ...state,
        form: config,
        activeJobId: record.id,
        fieldErrors: [],
        jobError: record.error,
      },
      record,
      table: [],
    };
  }

  const reportText = await client.getReportText(record.id);
  const report = JSON.parse(reportText) as MeasurementReport;
  return {
    state: {
      ...state,
      form: config,
      activeJobId: record.id,
      seed: config.seed,
      lastReport: report,
      coverageWarnings: [...report.covered_ostia],
      fieldErrors: [],
      jobError: null,
    },
    record,
    table: diameterTable(reportText),
  };
}
