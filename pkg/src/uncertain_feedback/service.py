"""HTTP session service for live interactive training.

A thin shell over the library: each session owns one learner and one
episode, requests for a session are serialized behind a per-session lock,
and a finished session appends a replayable episode log. Responses always
carry the full session descriptor.

Endpoints:
    POST /sessions                     {"scenario": ..., "learner": ..., "seed"?}
    GET  /sessions/{id}
    POST /sessions/{id}/feedback       {"f": "+" | "-" | "0"}
    POST /sessions/{id}/selection      {"a": int}
    POST /sessions/{id}/done
"""

from __future__ import annotations

import threading
import uuid
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .environments import BRIGHTNESS_STEP_PERCENT, DOG, Episode, ScenarioConfig
from .feedback_model import FeedbackKind
from .harness import EpisodeConfig, EpisodeResult, accumulative_distance, policy_gap, rats_per_step, write_episode_log
from .learners import QUERY, LearnerKind, LearnerSession, ProtocolError
from .rng import derive_rng

AWAITING_FEEDBACK = "awaiting_feedback"
AWAITING_SELECTION = "awaiting_selection"
STATE_DONE = "state_done"
FINISHED = "finished"


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str, violations: Optional[list[str]] = None):
        self.status = status
        self.code = code
        self.message = message
        self.violations = violations
        super().__init__(message)

    def body(self) -> dict:
        body = {"code": self.code, "message": self.message}
        if self.violations is not None:
            body["violations"] = self.violations
        return body


class SessionRuntime:
    """One live session: learner + episode + protocol phase, single-writer."""

    def __init__(self, session_id: str, config: EpisodeConfig, seed: int, master_seed: int = 0):
        self.session_id = session_id
        self.config = config
        self.seed = seed
        self.lock = threading.Lock()
        scen = config.scenario
        cell = config.to_dict()
        env_rng = derive_rng(master_seed, "env", cell, seed)
        learner_rng = derive_rng(master_seed, "learner", cell, seed)
        self.learner = LearnerSession(config.learner, scen.n_states, scen.n_actions, seed=learner_rng)
        self.episode = Episode(scen, self.learner, env_rng)
        self.is_query = config.learner.name == QUERY
        if self.is_query:
            self.phase = AWAITING_SELECTION
        else:
            self.episode.present()
            self.phase = AWAITING_FEEDBACK

    def descriptor(self) -> dict:
        scen = self.config.scenario
        finished = self.phase == FINISHED
        pres = self.episode.last_presentation
        display = None
        if pres is not None:
            if scen.kind == DOG:
                display = {"rat": pres.rat, "caught": pres.caught}
            else:
                display = {"brightness_percent": BRIGHTNESS_STEP_PERCENT * pres.a}
        current_state = None if finished else self.episode.current_state
        return {
            "session_id": self.session_id,
            "scenario": scen.to_dict(),
            "learner": self.config.learner.to_dict(),
            "seed": self.seed,
            "phase": self.phase,
            "current_state": current_state,
            "last_action": None if pres is None else pres.a,
            "step_count": self.episode.steps,
            "step_in_state": self.episode.step_in_state,
            "state_order": [int(s) for s in self.episode.state_order],
            "display": display,
            "diagnostics": {
                "policy": [int(a) for a in self.learner.policy_estimate()],
                "sigma": self.learner.sigma,
                "step_count": self.episode.steps,
                "optimal_policy": [int(a) for a in self.episode.optimal],
            },
        }

    def post_feedback(self, f: FeedbackKind) -> None:
        if self.phase != AWAITING_FEEDBACK:
            raise ServiceError(409, "protocol_error", f"feedback not accepted in phase {self.phase!r}")
        self.episode.apply_feedback(f)
        if self.episode.state_exhausted:
            self.phase = STATE_DONE
        else:
            self.episode.present()

    def post_selection(self, a: int) -> None:
        if not self.is_query:
            raise ServiceError(409, "unsupported_operation", "selection requires a direct-selection session")
        if self.phase != AWAITING_SELECTION:
            raise ServiceError(409, "protocol_error", f"selection not accepted in phase {self.phase!r}")
        if not 0 <= a < self.config.scenario.n_actions:
            raise ServiceError(400, "out_of_range", f"action {a} out of range [0, {self.config.scenario.n_actions})")
        self.episode.apply_selection(a)

    def post_done(self) -> Optional[EpisodeResult]:
        if self.phase == FINISHED:
            raise ServiceError(409, "protocol_error", "session is already finished")
        self.episode.advance_state()
        if self.episode.finished:
            self.phase = FINISHED
            return self._result()
        if self.is_query:
            self.phase = AWAITING_SELECTION
        else:
            self.episode.present()
            self.phase = AWAITING_FEEDBACK
        return None

    def _result(self) -> EpisodeResult:
        episode, learner = self.episode, self.learner
        final_policy = learner.policy_estimate()
        metrics = {
            "steps_used": episode.steps,
            "policy_gap": policy_gap(final_policy, episode.optimal),
            "accum_distance": accumulative_distance(episode.trace, episode.optimal),
        }
        if self.config.scenario.kind == DOG and episode.trace:
            metrics["rats_per_step"] = rats_per_step(episode.trace)
        sigma_trace = list(learner.sigma_state.trace) if learner.sigma_state is not None else None
        if sigma_trace is not None:
            metrics["sigma_final"] = sigma_trace[-1]
        return EpisodeResult(
            seed=self.seed,
            config=self.config.to_dict(),
            state_order=[int(s) for s in episode.state_order],
            optimal_policy=[int(a) for a in episode.optimal],
            trainer={"kind": "human"},
            trace=[step.to_dict() for step in episode.trace],
            final_policy=[int(a) for a in final_policy],
            metrics=metrics,
            sigma_trace=sigma_trace,
        )


def _parse_create(body: dict) -> EpisodeConfig:
    violations = []
    scenario_d = body.get("scenario")
    learner_d = body.get("learner")
    if not isinstance(scenario_d, dict):
        violations.append("scenario object required")
    if not isinstance(learner_d, dict):
        violations.append("learner object required")
    if violations:
        raise ServiceError(400, "invalid_config", "malformed session request", violations)
    try:
        scenario = ScenarioConfig.from_dict(scenario_d)
    except (ValueError, KeyError, TypeError) as exc:
        raise ServiceError(400, "invalid_config", "invalid scenario", [str(exc)]) from exc
    try:
        learner = LearnerKind.from_dict(learner_d)
    except (ValueError, KeyError, TypeError) as exc:
        raise ServiceError(400, "invalid_config", "invalid learner", [str(exc)]) from exc
    return EpisodeConfig(scenario, "human", learner)


def create_app(log_dir: str | Path | None = None, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="uncertain-feedback training service")
    sessions: dict[str, SessionRuntime] = {}
    registry_lock = threading.Lock()
    logs = Path(log_dir) if log_dir is not None else None
    if logs is not None:
        logs.mkdir(parents=True, exist_ok=True)

    def get_runtime(session_id: str) -> SessionRuntime:
        with registry_lock:
            runtime = sessions.get(session_id)
        if runtime is None:
            raise ServiceError(404, "not_found", f"unknown session {session_id!r}")
        return runtime

    @app.exception_handler(ServiceError)
    async def service_error_handler(_request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status, content=exc.body())

    @app.post("/sessions")
    def create_session(body: dict):
        config = _parse_create(body)
        seed = body.get("seed")
        if seed is None:
            seed = int(np.random.SeedSequence().entropy % (2**31))
        session_id = uuid.uuid4().hex
        runtime = SessionRuntime(session_id, config, int(seed))
        with registry_lock:
            sessions[session_id] = runtime
        with runtime.lock:
            return runtime.descriptor()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        runtime = get_runtime(session_id)
        with runtime.lock:
            return runtime.descriptor()

    @app.post("/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, body: dict):
        runtime = get_runtime(session_id)
        raw = body.get("f")
        try:
            f = FeedbackKind(raw)
        except ValueError:
            raise ServiceError(400, "invalid_feedback", f"feedback must be '+', '-', or '0', got {raw!r}")
        with runtime.lock:
            try:
                runtime.post_feedback(f)
            except ProtocolError as exc:
                raise ServiceError(409, "protocol_error", str(exc)) from exc
            return runtime.descriptor()

    @app.post("/sessions/{session_id}/selection")
    def post_selection(session_id: str, body: dict):
        runtime = get_runtime(session_id)
        a = body.get("a")
        if not isinstance(a, int):
            raise ServiceError(400, "invalid_selection", "selection body needs an integer 'a'")
        with runtime.lock:
            try:
                runtime.post_selection(a)
            except ProtocolError as exc:
                raise ServiceError(409, "protocol_error", str(exc)) from exc
            return runtime.descriptor()

    @app.post("/sessions/{session_id}/done")
    def post_done(session_id: str):
        runtime = get_runtime(session_id)
        with runtime.lock:
            try:
                result = runtime.post_done()
            except ProtocolError as exc:
                raise ServiceError(409, "protocol_error", str(exc)) from exc
            if result is not None and logs is not None:
                write_episode_log(logs / f"episode_{runtime.session_id}.jsonl", result)
            return runtime.descriptor()

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
