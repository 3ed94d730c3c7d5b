"""FastAPI application exposing /embed, /nli, and /health.

JSON over HTTP, UTF-8, no authentication: deploy on loopback. Responses are
bit-identical for identical requests within a process lifetime. Both models
load in a background thread at startup; /embed, /nli, and /health return 503
until they are ready.
"""

from __future__ import annotations

import threading
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .backends import build_backends
from .config import SidecarConfig


class EmbedRequest(BaseModel):
    texts: list[str]


class EmbedResponse(BaseModel):
    vectors: list[list[float]]
    dim: int


class NliRequest(BaseModel):
    premise: str
    hypothesis: str


class NliResponse(BaseModel):
    entailment: float


class HealthResponse(BaseModel):
    status: str
    models: list[str]
    backend: str


class _State:
    def __init__(self):
        self.embedding = None
        self.entailment = None
        self.backend_name = ""
        self.error: str | None = None
        self.ready = threading.Event()


def create_app(config: SidecarConfig | None = None) -> FastAPI:
    config = config or SidecarConfig()
    state = _State()

    def load():
        try:
            state.embedding, state.entailment, state.backend_name = build_backends(
                config.embedding_model_id, config.entailment_model_id, config.backend
            )
        except Exception as exc:  # surfaced through /health
            state.error = f"{type(exc).__name__}: {exc}"
        finally:
            state.ready.set()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        threading.Thread(target=load, daemon=True).start()
        yield

    app = FastAPI(title="kghalu-sidecar", lifespan=lifespan)
    app.state.sidecar = state
    app.state.config = config

    @app.exception_handler(RequestValidationError)
    def validation_as_400(request: Request, exc: RequestValidationError):
        # The wire contract promises 400 for missing or mistyped fields.
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def require_ready():
        if not state.ready.is_set() or state.embedding is None:
            detail = state.error or "models are still loading"
            raise HTTPException(status_code=503, detail=detail)

    @app.post("/embed", response_model=EmbedResponse)
    def embed(request: EmbedRequest) -> EmbedResponse:
        require_ready()
        if not request.texts:
            raise HTTPException(status_code=400, detail="texts must be non-empty")
        if len(request.texts) > config.max_batch_size:
            raise HTTPException(
                status_code=400,
                detail=f"batch of {len(request.texts)} exceeds max_batch_size "
                f"{config.max_batch_size}",
            )
        vectors = state.embedding.embed(request.texts)
        return EmbedResponse(vectors=vectors, dim=len(vectors[0]))

    @app.post("/nli", response_model=NliResponse)
    def nli(request: NliRequest) -> NliResponse:
        require_ready()
        if not request.premise or not request.hypothesis:
            raise HTTPException(
                status_code=400, detail="premise and hypothesis must be non-empty"
            )
        return NliResponse(entailment=state.entailment.score(request.premise, request.hypothesis))

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        if not state.ready.is_set() or state.embedding is None:
            raise HTTPException(status_code=503, detail=state.error or "loading")
        return HealthResponse(
            status="ok",
            models=[state.embedding.model_id, state.entailment.model_id],
            backend=state.backend_name,
        )

    return app
