"""Session-oriented teaching service.

HTTP endpoints manage sessions, learning, and rollouts; each session has one
live websocket channel carrying control inputs, simulator state at the tick
rate, recording brackets, and rollout streams. The simulator advances on the
server clock with the latest input held, so demo timing never depends on the
client frame rate. Messages may carry an "at_tick" field to pin their effect
to a simulation tick, which makes scripted sessions reproducible.
"""
from __future__ import annotations

import asyncio
import itertools
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Request, Response, WebSocket, WebSocketDisconnect

from . import __version__, demos, dynamics, metrics, task_learning
from .ergodic_mpc import MpcConfig, run_closed_loop
from .spectral import reconstruct_density

log = logging.getLogger(__name__)

DEFAULT_TICK_RATE = 50.0
SIM_SUBSTEP = 0.002


@dataclass
class Session:
    id: str
    system_name: str
    system: dynamics.ControlAffineSystem
    tick_rate: float
    state: np.ndarray = None  # type: ignore[assignment]
    tick: int = 0
    latest_u: np.ndarray = None  # type: ignore[assignment]
    recording: list | None = None
    demos: dict = field(default_factory=dict)
    demo_counter: itertools.count = field(default_factory=lambda: itertools.count())
    scheduled: dict = field(default_factory=dict)  # tick -> [message, ...]
    connections: list = field(default_factory=list)
    ticker: asyncio.Task | None = None
    dropped_frames: int = 0
    rollout_active: bool = False
    rollout_cancel: bool = False

    def __post_init__(self):
        self.state = self.system.rest_state.copy()
        self.latest_u = np.zeros(self.system.control_dim)

    @property
    def sim_time(self) -> float:
        return self.tick / self.tick_rate

    def in_success_region(self) -> bool:
        if self.system_name == "cartpole":
            return metrics.in_success_region(self.state[0], self.state[1])
        d = self.state[:2] - np.asarray(metrics.DEFAULT_TARGET.center)
        return bool(np.hypot(d[0], d[1]) <= metrics.DEFAULT_TARGET.radius)


def create_app(tick_rate: float = DEFAULT_TICK_RATE, cors_origins=None) -> FastAPI:
    app = FastAPI(title="erglearn teaching service", version=__version__)
    if cors_origins is None:
        cors_origins = ["*"]
    if cors_origins:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware, allow_origins=list(cors_origins), allow_methods=["*"],
            allow_headers=["*"],
        )

    sessions: dict[str, Session] = {}
    tasks: dict[str, task_learning.TaskDefinition] = {}
    session_counter = itertools.count()
    task_counter = itertools.count()
    app.state.sessions = sessions
    app.state.tasks = tasks

    def get_session(session_id: str) -> Session:
        if session_id not in sessions:
            raise HTTPException(status_code=404, detail=f"unknown session '{session_id}'")
        return sessions[session_id]

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/sessions", status_code=201)
    async def create_session(payload: dict):
        system_name = payload.get("system")
        if system_name not in demos.SYSTEMS:
            raise HTTPException(status_code=400, detail=f"unknown system '{system_name}'")
        params = payload.get("params") or {}
        try:
            if system_name == "cartpole" and "pole_length" in params:
                system = dynamics.make_cartpole(
                    dynamics.CartPoleParams(pole_length=float(params["pole_length"]))
                )
            else:
                system = dynamics.make_system(system_name)
        except ValueError as err:
            raise HTTPException(status_code=400, detail=str(err)) from err
        session = Session(
            id=f"session-{next(session_counter)}",
            system_name=system_name,
            system=system,
            tick_rate=float(payload.get("tick_rate", tick_rate)),
        )
        sessions[session.id] = session
        return session_info(session)

    def demo_entry(session: Session, demo) -> dict:
        entry = {
            "id": demo.id,
            "label": demo.label,
            "source": demo.source,
            "duration": demo.duration,
            "samples": int(demo.times.size),
        }
        if session.system_name == "cartpole":
            outcome = metrics.cartpole_success(demo.times, demo.states)
            entry["success_time"] = outcome.total_success_time
        else:
            score = metrics.cleaning_score(demo.states[:, :2])
            entry["cleaning_m"] = score.m
            entry["reach"] = metrics.reach_success(demo.states[:, :2])
        return entry

    def session_info(session: Session) -> dict:
        return {
            "id": session.id,
            "system": session.system_name,
            "tick_rate": session.tick_rate,
            "t": session.sim_time,
            "state": session.state.tolist(),
            "recording": session.recording is not None,
            "rollout_active": session.rollout_active,
            "demos": [demo_entry(session, d) for d in session.demos.values()],
        }

    @app.get("/sessions/{session_id}")
    async def get_session_info(session_id: str):
        return session_info(get_session(session_id))

    @app.post("/sessions/{session_id}/learn")
    async def learn(session_id: str, payload: dict):
        session = get_session(session_id)
        demo_ids = payload.get("demo_ids")
        if not demo_ids:
            raise HTTPException(status_code=400, detail="demo_ids is required")
        missing = [d for d in demo_ids if d not in session.demos]
        if missing:
            raise HTTPException(status_code=404, detail=f"unknown demos: {missing}")
        mode = payload.get("mode", "posneg")
        try:
            cfg = task_learning.FusionConfig(
                order=int(payload.get("order", 10)),
                beta=float(payload.get("beta", 0.5)),
                gamma=float(payload.get("gamma", 0.5)),
            )
            demo_set = demos.default_demo_set(
                [session.demos[d] for d in demo_ids], system=session.system_name
            )
            task = task_learning.learn_task(demo_set, cfg, mode=mode)
        except ValueError as err:
            raise HTTPException(status_code=400, detail=str(err)) from err
        task_id = f"task-{next(task_counter)}"
        tasks[task_id] = task
        grid = reconstruct_density(task.phi, 64, clip_negative=True)
        return {
            "task_id": task_id,
            "mode": mode,
            "order": cfg.order,
            "provenance": [{"id": name, "w": w} for name, w in task.provenance],
            "density": grid.tolist(),
            "domain": {
                "lower": task.domain.lower.tolist(),
                "lengths": task.domain.lengths.tolist(),
            },
        }

    @app.get("/tasks/{task_id}/density")
    async def task_density(task_id: str, res: int = Query(default=64, ge=2, le=256)):
        if task_id not in tasks:
            raise HTTPException(status_code=404, detail=f"unknown task '{task_id}'")
        task = tasks[task_id]
        grid = reconstruct_density(task.phi, res, clip_negative=True)
        return {
            "task_id": task_id,
            "res": res,
            "mode": task.mode,
            "density": grid.tolist(),
            "domain": {
                "lower": task.domain.lower.tolist(),
                "lengths": task.domain.lengths.tolist(),
            },
        }

    @app.post("/sessions/{session_id}/rollout")
    async def rollout(session_id: str, payload: dict):
        session = get_session(session_id)
        if session.rollout_active:
            raise HTTPException(status_code=409, detail="a rollout is already running")
        if session.recording is not None:
            raise HTTPException(status_code=409, detail="recording is active")
        task_id = payload.get("task_id")
        if task_id not in tasks:
            raise HTTPException(status_code=404, detail=f"unknown task '{task_id}'")
        task = tasks[task_id]
        duration = float(payload.get("duration", 10.0))
        realtime = bool(payload.get("realtime", True))
        overrides = dict(payload.get("mpc") or {})
        overrides.setdefault("order", task.phi.order)
        if session.system_name == "planar":
            overrides.setdefault("r_diag", (0.01, 0.01))
        try:
            cfg = MpcConfig(**overrides)
        except (TypeError, ValueError) as err:
            raise HTTPException(status_code=400, detail=f"bad mpc config: {err}") from err
        x0 = payload.get("x0")
        # default: roll out from wherever the session's simulator currently is
        x0 = np.asarray(x0, dtype=float) if x0 is not None else session.state.copy()
        if x0.shape != (session.system.state_dim,):
            raise HTTPException(status_code=400, detail="x0 has the wrong dimension")

        session.rollout_active = True
        session.rollout_cancel = False
        loop = asyncio.get_running_loop()
        queue: asyncio.Queue = asyncio.Queue()

        def on_step(t, x, u, eps):
            loop.call_soon_threadsafe(queue.put_nowait, (t, np.array(x), np.array(u), eps))

        def worker():
            return run_closed_loop(
                session.system, task, cfg, x0, duration,
                step_callback=on_step,
                should_cancel=lambda: session.rollout_cancel,
            )

        async def drain():
            interval = 1.0 / session.tick_rate
            while True:
                item = await queue.get()
                if item is None:
                    break
                t, x, u, eps = item
                await broadcast(session, {
                    "type": "rollout_state",
                    "t": t,
                    "x": x.tolist(),
                    "u": u.tolist(),
                    "eps": eps,
                    "in_success_region": _rollout_success_flag(session, x),
                })
                if realtime:
                    await asyncio.sleep(interval)

        drainer = asyncio.create_task(drain())
        try:
            result = await asyncio.to_thread(worker)
        finally:
            loop.call_soon_threadsafe(queue.put_nowait, None)
            await drainer
            session.rollout_active = False

        summary = {
            "task_id": task_id,
            "duration": float(result.times[-1]),
            "final_eps": result.final_eps,
            "cancelled": result.cancelled,
            "diverged": result.diverged,
            "replans": len(result.replans),
        }
        if session.system_name == "cartpole":
            outcome = metrics.cartpole_success(result.times, result.states)
            summary["success_time"] = outcome.total_success_time
            summary["first_success"] = outcome.first_success_time
        else:
            score = metrics.cleaning_score(result.states[:, :2])
            summary["cleaning_m"] = score.m
            summary["collided"] = score.collided
            summary["reach"] = metrics.reach_success(result.states[:, :2])
        return summary

    def _rollout_success_flag(session: Session, x) -> bool:
        if session.system_name == "cartpole":
            return metrics.in_success_region(x[0], x[1])
        d = x[:2] - np.asarray(metrics.DEFAULT_TARGET.center)
        return bool(np.hypot(d[0], d[1]) <= metrics.DEFAULT_TARGET.radius)

    @app.post("/sessions/{session_id}/rollout/cancel")
    async def cancel_rollout(session_id: str):
        session = get_session(session_id)
        if not session.rollout_active:
            raise HTTPException(status_code=409, detail="no rollout is running")
        session.rollout_cancel = True
        return {"cancelling": True}

    @app.get("/demos")
    async def export_demos(session: str = Query(...)):
        sess = get_session(session)
        if not sess.demos:
            raise HTTPException(status_code=404, detail="session has no demos")
        text = demos.dumps_demos(list(sess.demos.values()), system=sess.system_name)
        return Response(text, media_type="application/jsonl")

    @app.delete("/demos")
    async def delete_demo(session: str = Query(...), demo: str = Query(...)):
        sess = get_session(session)
        if demo not in sess.demos:
            raise HTTPException(status_code=404, detail=f"unknown demo '{demo}'")
        del sess.demos[demo]
        return {"deleted": demo}

    @app.put("/demos")
    async def import_demos(request: Request, session: str = Query(...)):
        sess = get_session(session)
        text = (await request.body()).decode("utf-8")
        try:
            system, loaded = demos.loads_demos(text)
        except demos.DemoFormatError as err:
            raise HTTPException(status_code=400, detail=str(err)) from err
        if system != sess.system_name:
            raise HTTPException(
                status_code=400,
                detail=f"file is for {system}, session is {sess.system_name}",
            )
        imported = []
        for demo in loaded:
            sess.demos[demo.id] = demo
            imported.append(demo.id)
        return {"imported": imported}

    async def broadcast(session: Session, message: dict):
        text = json.dumps(message)
        dead = []
        for ws in session.connections:
            try:
                await ws.send_text(text)
            except Exception:
                dead.append(ws)
        for ws in dead:
            if ws in session.connections:
                session.connections.remove(ws)

    def apply_message(session: Session, msg: dict) -> dict | None:
        """Apply a control/recording message; returns an immediate reply or None."""
        kind = msg.get("type")
        if kind == "control":
            u = msg.get("u")
            if not isinstance(u, (list, tuple)) or len(u) != session.system.control_dim:
                return {
                    "type": "error",
                    "message": f"control needs {session.system.control_dim} entries",
                }
            session.latest_u = session.system.clamp_control(np.asarray(u, dtype=float))
            return None
        if kind == "start_recording":
            if session.rollout_active:
                return {"type": "error", "message": "recording is exclusive with rollouts"}
            if session.recording is not None:
                return {"type": "error", "message": "already recording"}
            session.recording = [(session.sim_time, session.state.copy())]
            return {"type": "recording_started", "tick": session.tick}
        if kind == "stop_recording":
            if session.recording is None:
                return {"type": "error", "message": "not recording"}
            label = msg.get("label")
            if label not in demos.LABELS:
                return {"type": "error", "message": f"label must be one of {demos.LABELS}"}
            buffer = session.recording
            session.recording = None
            if len(buffer) < 2:
                return {"type": "error", "message": "recording has fewer than 2 samples"}
            demo_id = f"{session.id}-demo-{next(session.demo_counter)}"
            demo = demos.Demonstration(
                id=demo_id,
                system=session.system_name,
                times=np.array([t for t, _ in buffer]),
                states=np.array([x for _, x in buffer]),
                label=label,
                source="human",
            )
            session.demos[demo_id] = demo
            return {
                "type": "recording_stopped",
                "demo_id": demo_id,
                "samples": int(demo.times.size),
                "duration": demo.duration,
            }
        return {"type": "error", "message": f"unknown message type '{kind}'"}

    def step_session(session: Session):
        substeps = max(1, round(1.0 / session.tick_rate / SIM_SUBSTEP))
        dt = 1.0 / session.tick_rate / substeps
        x = session.state
        for _ in range(substeps):
            x = dynamics.step_rk4(session.system, x, session.latest_u, dt)
        session.state = x
        session.tick += 1
        if session.recording is not None:
            session.recording.append((session.sim_time, session.state.copy()))

    async def tick_loop(session: Session):
        interval = 1.0 / session.tick_rate
        next_deadline = time.monotonic() + interval
        try:
            while session.connections:
                now = time.monotonic()
                delay = next_deadline - now
                if delay > 0:
                    await asyncio.sleep(delay)
                else:
                    missed = int(-delay / interval)
                    if missed:
                        session.dropped_frames += missed
                        next_deadline += missed * interval
                next_deadline += interval
                replies = []
                for msg in session.scheduled.pop(session.tick, []):
                    reply = apply_message(session, msg)
                    if reply is not None:
                        replies.append(reply)
                step_session(session)
                for reply in replies:
                    await broadcast(session, reply)
                await broadcast(session, {
                    "type": "state",
                    "tick": session.tick,
                    "t": session.sim_time,
                    "x": session.state.tolist(),
                    "u": session.latest_u.tolist(),
                    "in_success_region": session.in_success_region(),
                    "recording": session.recording is not None,
                    "samples": len(session.recording) if session.recording else 0,
                    "dropped_frames": session.dropped_frames,
                })
        except asyncio.CancelledError:
            pass
        except Exception:  # keep tick failures visible instead of dying silently
            log.exception("tick loop for %s crashed", session.id)
            raise

    @app.websocket("/sessions/{session_id}/live")
    async def live(ws: WebSocket, session_id: str):
        if session_id not in sessions:
            await ws.close(code=4404)
            return
        session = sessions[session_id]
        await ws.accept()
        session.connections.append(ws)
        if session.ticker is None or session.ticker.done():
            session.ticker = asyncio.create_task(tick_loop(session))
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                    if not isinstance(msg, dict):
                        raise ValueError("message must be a JSON object")
                except (json.JSONDecodeError, ValueError) as err:
                    await ws.send_text(json.dumps({"type": "error", "message": str(err)}))
                    continue
                at_tick = msg.get("at_tick")
                if at_tick is not None:
                    if not isinstance(at_tick, int) or at_tick <= session.tick:
                        await ws.send_text(json.dumps({
                            "type": "error",
                            "message": f"at_tick must be a future tick (now {session.tick})",
                        }))
                        continue
                    session.scheduled.setdefault(at_tick, []).append(msg)
                    continue
                reply = apply_message(session, msg)
                if reply is not None:
                    await ws.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass
        finally:
            if ws in session.connections:
                session.connections.remove(ws)
            if not session.connections and session.ticker is not None:
                session.ticker.cancel()
                session.ticker = None

    return app
