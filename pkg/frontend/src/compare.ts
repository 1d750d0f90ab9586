/**
 * Side-by-side comparison of completed runs: diameter tables and coverage
 * flags per job, with differing cells flagged for highlighting.
 */

import type { DiameterKey, JobRecord, MeasurementReport } from "./types.js";
import { DIAMETER_KEYS } from "./types.js";

export interface CompletedRun {
  record: JobRecord;
  report: MeasurementReport | null;
}

export interface ComparisonRow {
  key: DiameterKey;
  values: number[];
  /** True when any included run disagrees on this measurement. */
  differs: boolean;
}

export interface Comparison {
  jobIds: string[];
  rows: ComparisonRow[];
  /** Covered-ostium labels per included job, same order as jobIds. */
  coverage: string[][];
  coverageDiffers: boolean;
  /** Notices about runs excluded because they are not done. */
  notices: string[];
}

export function compareRuns(runs: CompletedRun[]): Comparison {
  const included: CompletedRun[] = [];
  const notices: string[] = [];
  for (const run of runs) {
    if (run.record.stage === "done" && run.report !== null) {
      included.push(run);
    } else {
      notices.push(
        `job ${run.record.id} excluded: stage is "${run.record.stage}"`,
      );
    }
  }

  const rows: ComparisonRow[] = DIAMETER_KEYS.map((key) => {
    const values = included.map((run) => run.report![key]);
    const differs = values.some((v) => v !== values[0]);
    return { key, values, differs };
  });

  const coverage = included.map((run) => [...run.report!.covered_ostia]);
  const first = JSON.stringify(coverage[0] ?? []);
  const coverageDiffers = coverage.some((c) => JSON.stringify(c) !== first);

  return {
    jobIds: included.map((run) => run.record.id),
    rows,
    coverage,
    coverageDiffers,
    notices,
  };
}
