/**
 * Client-side pre-validation of a pipeline configuration.
 *
 * Mirrors exactly the invariants the service enforces with 422 responses,
 * so a form that passes here is accepted by POST /jobs and a form that
 * fails here would have been rejected. Error messages carry the same
 * invariant names the service uses (e.g. "RadiusNonPositive") so inline
 * hints and server-side rejections read identically.
 */

import type { PipelineConfig } from "./types.js";

export interface FieldError {
  /** Dotted path of the offending field, e.g. "stent.r0_trunk". */
  field: string;
  message: string;
}

function isInt(v: number): boolean {
  return Number.isInteger(v);
}

export function validateConfig(cfg: PipelineConfig): FieldError[] {
  const errors: FieldError[] = [];
  const push = (field: string, message: string) =>
    errors.push({ field, message });

  if (cfg.window.lower > cfg.window.upper) {
    push("window", "IntensityWindow: lower must be <= upper");
  }

  const sk = cfg.skeleton ?? {};
  if (sk.prune_length !== undefined) {
    if (!isInt(sk.prune_length)) {
      push("skeleton.prune_length", "prune_length must be an integer");
    } else if (sk.prune_length < 1) {
      push("skeleton.prune_length", "prune_length must be >= 1");
    }
  }
  if (sk.sample_step !== undefined && sk.sample_step <= 0) {
    push("skeleton.sample_step", "sample_step must be > 0");
  }

  const st = cfg.stent ?? {};
  for (const name of ["r0_trunk", "r0_limb"] as const) {
    const v = st[name];
    if (v !== undefined && v <= 0) {
      push(`stent.${name}`, `RadiusNonPositive: ${name} must be > 0`);
    }
  }
  if (st.n_t !== undefined) {
    if (!isInt(st.n_t)) {
      push("stent.n_t", "n_t must be an integer");
    } else if (st.n_t < 8 || st.n_t % 2 !== 0) {
      push("stent.n_t", "n_t must be even and >= 8");
    }
  }
  for (const name of ["trunk_rings", "limb_rings"] as const) {
    const v = st[name];
    if (v === undefined) continue;
    if (!isInt(v)) {
      push(`stent.${name}`, `${name} must be an integer`);
    } else if (v < 3) {
      push(`stent.${name}`, `${name} must be >= 3`);
    }
  }

  const so = cfg.solver ?? {};
  for (const name of ["R_trunk", "R_limb"] as const) {
    const v = so[name];
    if (v !== undefined && v <= 0) {
      push(`solver.${name}`, `RadiusNonPositive: ${name} must be > 0`);
    }
  }
  for (const name of [
    "w1",
    "w2",
    "w3",
    "w4",
    "w5",
    "w_vesselWall",
    "w_balloon",
    "F_pressure",
  ] as const) {
    const v = so[name];
    if (v !== undefined && v < 0) {
      push(`solver.${name}`, `${name} must be >= 0`);
    }
  }
  if (so.gamma !== undefined && so.gamma <= 0) {
    push("solver.gamma", "SingularSystem: gamma must be > 0");
  }
  if (so.max_iterations !== undefined && !isInt(so.max_iterations)) {
    push("solver.max_iterations", "max_iterations must be an integer");
  }
  if (so.mode !== undefined && so.mode !== "deploy" && so.mode !== "measure") {
    push("solver.mode", "mode must be 'deploy' or 'measure'");
  }

  const lm = cfg.landmarks;
  if (lm !== undefined && lm !== null) {
    const [a0, a1] = lm.aneurysm_region;
    const [d0, d1] = lm.distal_neck_region;
    const ordered =
      0 <= lm.proximal_site &&
      lm.proximal_site < a0 &&
      a0 <= a1 &&
      a1 <= d0 &&
      d0 <= d1;
    if (!ordered) {
      push(
        "landmarks",
        "LandmarkOutOfRange: landmarks must be ordered proximal to distal",
      );
    }
  }

  (cfg.markers ?? []).forEach((m, i) => {
    if (m.radius <= 0) {
      push(
        `markers.${i}.radius`,
        "RadiusNonPositive: marker radius must be > 0",
      );
    }
  });

  return errors;
}
