/** Shared shapes of the pipeline service's JSON payloads. */

export type Triple = [number, number, number];

export interface VolumeHeader {
  dims: Triple;
  spacing: Triple;
  origin: Triple;
}

export interface WindowConfig {
  lower: number;
  upper: number;
}

export interface SkeletonConfig {
  prune_length?: number;
  sample_step?: number;
}

export interface StentConfig {
  n_t?: number;
  trunk_rings?: number;
  limb_rings?: number;
  r0_trunk?: number;
  r0_limb?: number;
}

export interface SolverConfig {
  R_trunk?: number;
  R_limb?: number;
  w1?: number;
  w2?: number;
  w3?: number;
  w4?: number;
  w5?: number;
  w_vesselWall?: number;
  w_balloon?: number;
  F_pressure?: number;
  gamma?: number;
  max_iterations?: number;
  convergence_eps?: number;
  balloon_saturation?: number | null;
  mode?: "deploy" | "measure";
  lumen_radius_hint?: number;
}

export interface LandmarksConfig {
  proximal_site: number;
  aneurysm_region: [number, number];
  distal_neck_region: [number, number];
}

export interface MarkerConfig {
  point: Triple;
  radius: number;
  label: string;
}

export interface PipelineConfig {
  volume: string;
  seed: Triple;
  window: WindowConfig;
  skeleton?: SkeletonConfig;
  stent?: StentConfig;
  solver?: SolverConfig;
  landmarks?: LandmarksConfig | null;
  markers?: MarkerConfig[];
}

export type JobStage =
  | "segmenting"
  | "skeletonizing"
  | "simulating"
  | "measuring"
  | "done"
  | "failed";

export interface JobRecord {
  id: string;
  stage: JobStage;
  progress: number;
  error: string | null;
  config: PipelineConfig;
}

export interface MeasurementReport {
  a: number;
  b: number;
  c: number;
  d: number;
  e: number;
  f: number;
  profile: Record<string, Array<[number, number]>>;
  covered_ostia: string[];
  units: string;
}

export const DIAMETER_KEYS = ["a", "b", "c", "d", "e", "f"] as const;
export type DiameterKey = (typeof DIAMETER_KEYS)[number];
