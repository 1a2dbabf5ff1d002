"""HTTP boundary for human scoring and for triggering training/generation.

    GET  /api/pending?limit=N   melodies that most need scores
    POST /api/scores            {"melody_id": ..., "score": 0..100}
    POST /api/train             start phase2 in the background (202 + job id)
    POST /api/generate          start phase3 in the background (202 + job id)
    GET  /api/jobs/{job_id}     poll job state and result

The service owns no state beyond the score store file and the model file;
every mutation is saved immediately, so restarts lose nothing.  At most one
training and one generation job run at a time.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import pipeline
from .abc import render
from .score_store import ScoreOutOfRange, ScoreStore, UnknownMelody, melody_id


class ScoreSubmission(BaseModel):
    melody_id: str
    score: float


@dataclass
class Job:
    id: str
    kind: str
    state: str = "running"            # running | done | error
    result: dict | None = None
    error: str | None = None


@dataclass
class JobRegistry:
    jobs: dict[str, Job] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def start(self, kind: str, work) -> Job:
        """Run ``work`` on a background thread unless a job of the same kind
        is still running."""
        with self.lock:
            for job in self.jobs.values():
                if job.kind == kind and job.state == "running":
                    raise HTTPException(status_code=409,
                                        detail=f"a {kind} job is already running")
            job = Job(id=uuid.uuid4().hex, kind=kind)
            self.jobs[job.id] = job

        def runner():
            try:
                job.result = work()
                job.state = "done"
            except Exception as exc:  # job errors surface via polling
                job.error = f"{type(exc).__name__}: {exc}"
                job.state = "error"

        threading.Thread(target=runner, daemon=True).start()
        return job

    def get(self, job_id: str) -> Job:
        job = self.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        return job


def create_app(config: pipeline.PipelineConfig,
               ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="evomelody scoring service")
    store_path = Path(config.store_path)
    store = ScoreStore.load(store_path) if store_path.exists() else ScoreStore()
    jobs = JobRegistry()

    def persist():
        store_path.parent.mkdir(parents=True, exist_ok=True)
        store.save(store_path)

    @app.get("/api/pending")
    def pending(limit: int = 10):
        if limit < 1:
            raise HTTPException(status_code=400, detail="limit must be >= 1")
        return [{"melody_id": rec.melody_id,
                 "abc_text": render(rec.melody),
                 "score_count": rec.score_count}
                for rec in store.pending(limit)]

    @app.post("/api/scores")
    def submit_score(submission: ScoreSubmission):
        try:
            record = store.add_score(submission.melody_id, submission.score)
        except UnknownMelody:
            raise HTTPException(status_code=404, detail="unknown melody")
        except ScoreOutOfRange as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        persist()
        return {"melody_id": record.melody_id,
                "score_count": record.score_count,
                "mean_score": record.mean_score}

    @app.post("/api/train", status_code=202)
    def start_train():
        persist()

        def work():
            _, trace = pipeline.phase2(config)
            return {"final_mse": trace[-1], "epochs": len(trace)}

        return {"job_id": jobs.start("train", work).id}

    @app.post("/api/generate", status_code=202)
    def start_generate():
        def work():
            picked = pipeline.phase3(config)
            return {"melodies": [{"melody_id": melody_id(melody),
                                  "abc_text": render(melody),
                                  "predicted_score": score}
                                 for melody, score in picked]}

        return {"job_id": jobs.start("generate", work).id}

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str):
        job = jobs.get(job_id)
        return {"job_id": job.id, "kind": job.kind, "state": job.state,
                "result": job.result, "error": job.error}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    # Exposed for tests and embedding callers.
    app.state.store = store
    app.state.persist = persist
    return app
