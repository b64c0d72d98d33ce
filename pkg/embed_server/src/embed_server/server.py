"""FastAPI application exposing an EmbedEngine over the wire protocol.

    GET  /info          -> {"model": str, "max_tokens": int, "dimension": int}
    POST /count_tokens  {"texts": [...]} -> {"counts": [...]}
    POST /embed         {"texts": [...]} -> {"embeddings": [[...], ...]}

Every error response carries {"error": str}.  Malformed bodies and
over-budget texts answer 400, requests arriving before the model has
finished loading answer 503, and inference failures answer 500.
"""

from __future__ import annotations

import threading
from contextlib import asynccontextmanager
from typing import Callable, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from embed_server.engine import EmbedEngine, OverBudgetError


class TextsBody(BaseModel):
    texts: list[str]


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def create_app(engine: Optional[EmbedEngine] = None,
               loader: Optional[Callable[[], EmbedEngine]] = None) -> FastAPI:
    """Build the application around an engine.

    Pass ``engine`` to serve immediately, or ``loader`` to load one on a
    background thread after startup; endpoints answer 503 until it is
    ready.  A loader that raises leaves the app in the 503 state and the
    failure is kept to report on /info.
    """

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if loader is not None:
            def run():
                try:
                    app.state.engine = loader()
                except Exception as exc:
                    app.state.load_error = f"{type(exc).__name__}: {exc}"
            threading.Thread(target=run, daemon=True).start()
        yield

    app = FastAPI(title="embed-server", lifespan=lifespan)
    app.state.engine = engine
    app.state.load_error = None

    def need_engine() -> EmbedEngine:
        eng = app.state.engine
        if eng is None:
            detail = app.state.load_error
            if detail is not None:
                raise ApiError(503, f"model failed to load: {detail}")
            raise ApiError(503, "model is still loading")
        return eng

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"error": exc.message})

    @app.exception_handler(RequestValidationError)
    async def on_bad_body(request: Request, exc: RequestValidationError):
        parts = [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}"
                 for err in exc.errors()]
        return JSONResponse(status_code=400,
                            content={"error": "; ".join(parts) or "invalid request body"})

    @app.exception_handler(Exception)
    async def on_failure(request: Request, exc: Exception):
        return JSONResponse(status_code=500,
                            content={"error": f"{type(exc).__name__}: {exc}"})

    # sync handlers run on the threadpool, so /info answers while the
    # engine lock serializes a long /embed
    @app.get("/info")
    def info():
        eng = need_engine()
        return {"model": eng.model_name, "max_tokens": eng.max_tokens,
                "dimension": eng.dimension}

    @app.post("/count_tokens")
    def count_tokens(body: TextsBody):
        eng = need_engine()
        return {"counts": eng.count(body.texts)}

    @app.post("/embed")
    def embed(body: TextsBody):
        eng = need_engine()
        try:
            return {"embeddings": eng.embed(body.texts)}
        except OverBudgetError as exc:
            raise ApiError(400, str(exc))

    return app
