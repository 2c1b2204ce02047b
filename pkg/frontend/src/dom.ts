/** DOM skeleton and updates; every datum shown comes from the view model. */

import type { ControllerState } from "./controller.js";
import type { SessionController } from "./controller.js";
import { brightnessLabel } from "./view.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class Page {
  readonly status = el("p", "status");
  readonly errorBox = el("p", "error");
  readonly dogPane = el("div", "dog-pane");
  readonly lightingPane = el("div", "lighting-pane");
  readonly swatch = el("div", "swatch");
  readonly swatchLabel = el("p", "swatch-label");
  readonly dwellHint = el("p", "dwell-hint");
  readonly levelRow = el("div", "level-row");
  readonly goodBtn = el("button", "feedback good", "Good");
  readonly badBtn = el("button", "feedback bad", "Bad");
  readonly noneBtn = el("button", "feedback none", "No Feedback");
  readonly doneBtn = el("button", "done", "Done");
  readonly diagToggle = el("button", "diag-toggle", "Diagnostics");
  readonly diagDrawer = el("div", "diag-drawer hidden");
  private levelButtons: HTMLButtonElement[] = [];

  constructor(private readonly root: HTMLElement, private readonly controller: SessionController) {
    const buttonRow = el("div", "button-row");
    buttonRow.append(this.goodBtn, this.badBtn, this.noneBtn, this.doneBtn);
    this.root.append(this.status, this.errorBox, this.dogPane, this.lightingPane, buttonRow, this.diagToggle, this.diagDrawer);
    this.lightingPane.append(this.swatch, this.swatchLabel, this.dwellHint, this.levelRow);

    this.goodBtn.addEventListener("click", () => void controller.submit("feedback", "+"));
    this.badBtn.addEventListener("click", () => void controller.submit("feedback", "-"));
    this.noneBtn.addEventListener("click", () => void controller.submit("feedback", "0"));
    this.doneBtn.addEventListener("click", () => void controller.submit("done"));
    this.diagToggle.addEventListener("click", () => this.diagDrawer.classList.toggle("hidden"));
  }

  private ensureLevelButtons(count: number): void {
    if (this.levelButtons.length === count) return;
    this.levelRow.textContent = "";
    this.levelButtons = [];
    for (let k = 0; k < count; k += 1) {
      const btn = el("button", "level", String(k));
      btn.title = brightnessLabel(k);
      btn.addEventListener("click", () => void this.controller.submit("selection", k));
      this.levelButtons.push(btn);
      this.levelRow.append(btn);
    }
  }

  apply(state: ControllerState): void {
    const vm = state.view;
    this.errorBox.textContent = state.error ?? "";
    if (!vm) {
      this.status.textContent = state.busy ? "Starting session..." : "No session.";
      return;
    }
    this.status.textContent = vm.statusLine;

    this.dogPane.classList.toggle("hidden", vm.mode !== "dog");
    this.lightingPane.classList.toggle("hidden", vm.mode !== "lighting");

    if (vm.dog) {
      this.dogPane.textContent = "";
      const row = el("div", "dog-row");
      for (const cell of vm.dog.cells) {
        const cellNode = el("div", "cell");
        cellNode.dataset["index"] = String(cell.index);
        if (cell.rat) cellNode.append(el("span", "rat", "🐀"));
        if (cell.dog) cellNode.append(el("span", "dog", "🐕"));
        row.append(cellNode);
      }
      this.dogPane.append(row);
      this.dogPane.append(el("p", "catch-line", vm.dog.caught ? "Caught!" : "Missed."));
    }

    if (vm.lighting) {
      this.ensureLevelButtons(vm.lighting.levels.length);
      const fraction = vm.lighting.percent / 100;
      this.swatch.style.backgroundColor = `rgba(255, 220, 90, ${fraction})`;
      this.swatchLabel.textContent = `Brightness: ${vm.lighting.label}`;
      this.levelButtons.forEach((btn, k) => {
        btn.disabled = state.busy || !vm.buttons.levelButtons;
        btn.classList.toggle("active", vm.lighting !== null && vm.lighting.activeLevel === k);
      });
    }

    this.goodBtn.disabled = state.busy || !vm.buttons.good;
    this.badBtn.disabled = state.busy || !vm.buttons.bad;
    this.noneBtn.disabled = state.busy || !vm.buttons.noFeedback;
    this.doneBtn.disabled = state.busy || !vm.buttons.done;

    const sigma = vm.diagnostics.sigma;
    this.diagDrawer.textContent =
      `inferred preferences: [${vm.diagnostics.policy.join(", ")}]` +
      (sigma === null ? "" : ` | width estimate: ${sigma.toFixed(3)}`) +
      ` | steps: ${vm.diagnostics.stepCount}`;
  }
}
