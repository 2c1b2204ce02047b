/** Wire types mirrored from the training service's session descriptor. */

export type Phase = "awaiting_feedback" | "awaiting_selection" | "state_done" | "finished";

export type ScenarioKind = "dog" | "lighting";

export interface ScenarioConfig {
  kind: ScenarioKind;
  n_states: number;
  n_actions: number;
  steps_per_state: number;
  optimal_policy?: number[];
}

export interface LearnerConfig {
  kind: "abluf" | "bluf" | "isabl" | "ucb" | "query";
  sigma0?: number;
  sigma_fixed?: number;
  error_rate?: number;
}

export interface DogDisplay {
  rat: number;
  caught: boolean;
}

export interface LightingDisplay {
  brightness_percent: number;
}

export interface Diagnostics {
  policy: number[];
  sigma: number | null;
  step_count: number;
  optimal_policy: number[];
}

export interface SessionDescriptor {
  session_id: string;
  scenario: ScenarioConfig;
  learner: LearnerConfig;
  seed: number;
  phase: Phase;
  current_state: number | null;
  last_action: number | null;
  step_count: number;
  step_in_state: number;
  state_order: number[];
  display: DogDisplay | LightingDisplay | null;
  diagnostics: Diagnostics;
}

export interface ServiceErrorBody {
  code: string;
  message: string;
  violations?: string[];
}

export type FeedbackToken = "+" | "-" | "0";
