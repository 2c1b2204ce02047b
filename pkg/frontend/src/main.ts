/** Boot: wire the config form, the controller, and the page together. */

import { SessionApi } from "./api.js";
import { SessionController } from "./controller.js";
import { Page } from "./dom.js";
import type { LearnerConfig, ScenarioConfig } from "./types.js";

function scenarioFromForm(kind: string): ScenarioConfig {
  if (kind === "dog") {
    return { kind: "dog", n_states: 4, n_actions: 6, steps_per_state: 15 };
  }
  return { kind: "lighting", n_states: 3, n_actions: 10, steps_per_state: 15 };
}

function main(): void {
  const root = document.getElementById("app");
  const form = document.getElementById("setup") as HTMLFormElement | null;
  if (!root || !form) {
    throw new Error("missing #app or #setup");
  }
  const api = new SessionApi("");
  let page: Page | null = null;
  const controller = new SessionController(api, (state) => page?.apply(state));
  page = new Page(root, controller);
  page.apply(controller.state());

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const scenario = scenarioFromForm(String(data.get("scenario")));
    const learner = { kind: String(data.get("learner")) } as LearnerConfig;
    const seedRaw = String(data.get("seed") ?? "").trim();
    const seed = seedRaw === "" ? undefined : Number(seedRaw);
    void controller.start(scenario, learner, seed);
  });
}

main();
