"""HTTP surface: one POST route per handler plus a health probe.

Domain errors (bad widths, no suitable prime, target mismatches) are
all ValueError subclasses and map to 422 with the message in ``detail``,
matching the shape FastAPI uses for request validation errors.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .service import (
    BenchRequest,
    BenchResponse,
    GenRequest,
    GenResponse,
    ParamsRequest,
    ParamsResponse,
    VerifyRequest,
    VerifyResponse,
    handle_bench,
    handle_gen,
    handle_params,
    handle_verify,
)

app = FastAPI(title="widemod", version=__version__)


@app.exception_handler(ValueError)
async def _domain_error(request: Request, exc: ValueError) -> JSONResponse:
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.get("/health")
async def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/gen", response_model=GenResponse)
async def gen(req: GenRequest) -> GenResponse:
    return handle_gen(req)


@app.post("/verify", response_model=VerifyResponse)
async def verify(req: VerifyRequest) -> VerifyResponse:
    return handle_verify(req)


@app.post("/params", response_model=ParamsResponse)
async def params(req: ParamsRequest) -> ParamsResponse:
    return handle_params(req)


@app.post("/bench", response_model=BenchResponse)
async def bench(req: BenchRequest) -> BenchResponse:
    return handle_bench(req)
