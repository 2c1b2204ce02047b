/** Pure projection from a session descriptor to what the page shows.
 *
 * Everything rendered comes from the latest descriptor; the view never
 * invents state. The dog pane marks the rat's point, the agent's point,
 * and whether the catch landed; the lighting pane shows the brightness
 * that corresponds to the last action. Buttons are enabled only when the
 * protocol phase accepts the matching request.
 */

import type { DogDisplay, LightingDisplay, SessionDescriptor } from "./types.js";

export const BRIGHTNESS_STEP = 11;

export function brightnessLabel(level: number): string {
  return `${BRIGHTNESS_STEP * level}%`;
}

export interface DogCell {
  index: number;
  dog: boolean;
  rat: boolean;
}

export interface DogPane {
  cells: DogCell[];
  caught: boolean;
}

export interface LightingPane {
  percent: number;
  label: string;
  levels: number[];
  activeLevel: number | null;
  /** Advisory only; the service never enforces a dwell. */
  dwellHint: string | null;
}

export interface ButtonStates {
  good: boolean;
  bad: boolean;
  noFeedback: boolean;
  done: boolean;
  levelButtons: boolean;
}

export interface ViewModel {
  mode: "dog" | "lighting";
  phase: SessionDescriptor["phase"];
  statusLine: string;
  renderedAction: number | null;
  dog: DogPane | null;
  lighting: LightingPane | null;
  buttons: ButtonStates;
  diagnostics: {
    policy: number[];
    sigma: number | null;
    stepCount: number;
  };
}

function isDogDisplay(d: DogDisplay | LightingDisplay): d is DogDisplay {
  return (d as DogDisplay).rat !== undefined;
}

function statusLine(d: SessionDescriptor): string {
  if (d.phase === "finished") {
    return `Finished after ${d.step_count} steps. Thanks for training!`;
  }
  const state = `State ${(d.current_state ?? 0) + 1} of ${d.scenario.n_states}`;
  if (d.phase === "awaiting_selection") {
    return `${state}: pick the light level you prefer, then press Done.`;
  }
  if (d.phase === "state_done") {
    return `${state}: step limit reached, press Done to continue.`;
  }
  const step = `step ${d.step_in_state + 1}/${d.scenario.steps_per_state}`;
  return `${state}, ${step}: judge the agent's choice.`;
}

export function render(d: SessionDescriptor): ViewModel {
  const awaitingFeedback = d.phase === "awaiting_feedback";
  const awaitingSelection = d.phase === "awaiting_selection";
  const buttons: ButtonStates = {
    good: awaitingFeedback,
    bad: awaitingFeedback,
    noFeedback: awaitingFeedback,
    done: d.phase !== "finished",
    levelButtons: awaitingSelection,
  };

  let dog: DogPane | null = null;
  let lighting: LightingPane | null = null;
  if (d.scenario.kind === "dog") {
    const display = d.display && isDogDisplay(d.display) ? d.display : null;
    const cells: DogCell[] = [];
    for (let index = 0; index < d.scenario.n_actions; index += 1) {
      cells.push({
        index,
        dog: d.last_action === index,
        rat: display !== null && display.rat === index,
      });
    }
    dog = { cells, caught: display !== null && display.caught };
  } else {
    const levels = Array.from({ length: d.scenario.n_actions }, (_, k) => k);
    const percent = d.last_action === null ? 0 : BRIGHTNESS_STEP * d.last_action;
    lighting = {
      percent,
      label: d.last_action === null ? "off" : brightnessLabel(d.last_action),
      levels,
      activeLevel: d.last_action,
      dwellHint:
        d.last_action !== null && (awaitingFeedback || awaitingSelection)
          ? "Tip: sit with a level for a minute before judging it."
          : null,
    };
  }

  return {
    mode: d.scenario.kind,
    phase: d.phase,
    statusLine: statusLine(d),
    renderedAction: d.last_action,
    dog,
    lighting,
    buttons,
    diagnostics: {
      policy: d.diagnostics.policy,
      sigma: d.diagnostics.sigma,
      stepCount: d.diagnostics.step_count,
    },
  };
}
