/** Session flow with exactly one in-flight request per session.
 *
 * Buttons stay locked from the moment a request leaves until its response
 * is applied; submissions while locked are dropped. Service errors are
 * kept verbatim for display and the previous descriptor stays in force.
 */

import { ApiError, SessionApi } from "./api.js";
import type { FeedbackToken, LearnerConfig, ScenarioConfig, SessionDescriptor } from "./types.js";
import { render, type ViewModel } from "./view.js";

export type SubmitKind = "feedback" | "selection" | "done";

export interface ControllerState {
  descriptor: SessionDescriptor | null;
  view: ViewModel | null;
  busy: boolean;
  error: string | null;
}

export type StateListener = (state: ControllerState) => void;

export class SessionController {
  private descriptor: SessionDescriptor | null = null;
  private busy = false;
  private error: string | null = null;

  constructor(
    private readonly api: SessionApi,
    private readonly listener: StateListener,
  ) {}

  state(): ControllerState {
    return {
      descriptor: this.descriptor,
      view: this.descriptor ? render(this.descriptor) : null,
      busy: this.busy,
      error: this.error,
    };
  }

  private publish(): void {
    this.listener(this.state());
  }

  private async locked(work: () => Promise<SessionDescriptor>): Promise<boolean> {
    if (this.busy) {
      return false;
    }
    this.busy = true;
    this.publish();
    try {
      this.descriptor = await work();
      this.error = null;
    } catch (err) {
      this.error = err instanceof ApiError ? err.message : String(err);
    } finally {
      this.busy = false;
      this.publish();
    }
    return true;
  }

  async start(scenario: ScenarioConfig, learner: LearnerConfig, seed?: number): Promise<boolean> {
    this.descriptor = null;
    return this.locked(() => this.api.createSession(scenario, learner, seed));
  }

  /** Issue the request matching a button press; drops it if the phase forbids it. */
  async submit(kind: SubmitKind, payload?: FeedbackToken | number): Promise<boolean> {
    const d = this.descriptor;
    if (!d) {
      return false;
    }
    if (kind === "feedback") {
      if (d.phase !== "awaiting_feedback") {
        return false;
      }
      return this.locked(() => this.api.postFeedback(d.session_id, payload as FeedbackToken));
    }
    if (kind === "selection") {
      if (d.phase !== "awaiting_selection") {
        return false;
      }
      return this.locked(() => this.api.postSelection(d.session_id, payload as number));
    }
    if (d.phase === "finished") {
      return false;
    }
    return this.locked(() => this.api.postDone(d.session_id));
  }

  async refresh(): Promise<boolean> {
    const d = this.descriptor;
    if (!d) {
      return false;
    }
    return this.locked(() => this.api.getSession(d.session_id));
  }
}
