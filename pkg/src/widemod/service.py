"""Request/response models and handlers shared by the HTTP app and CLI.

The CLI calls these handlers directly; the FastAPI app wraps them with
routing and error mapping.  Both speak the same pydantic types, so a
request body and a set of CLI flags are interchangeable.
"""

from __future__ import annotations

import time

from pydantic import BaseModel, Field

from .emit import EmitTarget, emit_c, emit_cuda, emit_manifest
from .ir import compile_program, count_ops, program_to_json
from .kernels import (
    KERNEL_KINDS,
    NTT_KINDS,
    InvalidKernel,
    generate_kernel,
    make_spec,
    run_ntt,
    run_program,
)
from .oracle import compute_barrett, find_ntt_params
from .verify import run_verify

import random

TARGETS = ("c", "cuda", "ir", "manifest")


class GenRequest(BaseModel):
    kernel: str
    bits: int = Field(ge=8, le=4096)
    word: int = 64
    size: int = 1
    strategy: str = "schoolbook"
    target: str = "c"
    params_mode: str = "baked"
    self_test: bool = False
    double_word: bool = True


class GenResponse(BaseModel):
    kernel: str
    bits: int
    word: int
    size: int
    strategy: str
    target: str
    instructions: int
    opcounts: dict[str, int]
    source: str
    manifest: str


class VerifyRequest(BaseModel):
    kernel: str
    bits: int = Field(ge=8, le=4096)
    word: int = 64
    size: int = 1
    strategy: str = "schoolbook"
    trials: int = Field(default=1000, ge=1, le=10_000_000)
    seed: int = 0
    exhaustive: bool = False


class VerifyResponse(BaseModel):
    ok: bool
    trials: int
    failure_count: int
    report: dict


class ParamsRequest(BaseModel):
    bits: int = Field(ge=8, le=4096)
    size: int = 1


class ParamsResponse(BaseModel):
    bits: int
    n: int
    q: str
    mu: str
    mbits: int
    shift1: int
    shift2: int
    root: str
    root_inv: str
    n_inv: str


class BenchRequest(BaseModel):
    kernel: str
    bits: int = Field(ge=8, le=4096)
    word: int = 64
    size: int = 1
    strategy: str = "schoolbook"
    trials: int = Field(default=10_000, ge=1, le=10_000_000)
    seed: int = 0


class BenchResponse(BaseModel):
    kernel: str
    bits: int
    word: int
    strategy: str
    trials: int
    seconds: float
    ns_per_op: float
    instructions: int


def handle_gen(req: GenRequest) -> GenResponse:
    if req.target not in TARGETS:
        raise InvalidKernel(f"unknown target {req.target!r}; "
                            f"expected one of {TARGETS}")
    spec = make_spec(req.kernel, req.bits, req.word, req.size, req.strategy)
    program = generate_kernel(spec, params_mode=req.params_mode,
                              target_has_double_word=req.double_word)
    if req.target == "c":
        target = EmitTarget("c", req.word, req.double_word)
        source = emit_c(program, target, self_test=req.self_test)
    elif req.target == "cuda":
        target = EmitTarget("cuda", req.word, req.double_word)
        source = emit_cuda(program, target)
    elif req.target == "ir":
        source = program_to_json(program)
    else:
        source = ""
    manifest = emit_manifest(spec, program, source if source else None)
    if req.target == "manifest":
        source = manifest
    opcounts = {f"{k}.{c}": v
                for (k, c), v in sorted(count_ops(program).items())}
    return GenResponse(
        kernel=req.kernel, bits=req.bits, word=req.word, size=spec.size,
        strategy=req.strategy, target=req.target,
        instructions=len(program.body), opcounts=opcounts,
        source=source, manifest=manifest,
    )


def handle_verify(req: VerifyRequest) -> VerifyResponse:
    report = run_verify(req.kernel, req.bits, req.word, size=req.size,
                        strategy=req.strategy, trials=req.trials,
                        seed=req.seed, exhaustive=req.exhaustive)
    import json
    return VerifyResponse(
        ok=report.ok, trials=report.trials,
        failure_count=report.failure_count,
        report=json.loads(report.to_json()),
    )


def handle_params(req: ParamsRequest) -> ParamsResponse:
    params = find_ntt_params(req.bits, req.size)
    barrett = compute_barrett(params.p, req.bits)
    return ParamsResponse(
        bits=req.bits, n=params.n, q=str(params.p), mu=str(barrett.mu),
        mbits=barrett.mbits, shift1=barrett.shift1, shift2=barrett.shift2,
        root=str(params.root), root_inv=str(params.root_inv),
        n_inv=str(params.n_inv),
    )


def handle_bench(req: BenchRequest) -> BenchResponse:
    spec = make_spec(req.kernel, req.bits, req.word, req.size, req.strategy)
    program = generate_kernel(spec)
    fn = compile_program(program)
    rnd = random.Random(req.seed)
    if spec.kind in NTT_KINDS:
        p = spec.ntt.p
        n = spec.size
        vecs = [[rnd.randrange(p) for _ in range(n)]
                for _ in range(max(1, req.trials // n))]
        t0 = time.perf_counter()
        for vec in vecs:
            run_ntt(program, vec, fn=fn)
        elapsed = time.perf_counter() - t0
        ops = len(vecs) * n
    else:
        hi = spec.barrett.q if spec.barrett else (1 << spec.layout.bits)
        nargs = sum(1 for a in program.attributes["arg_names"]
                    if a not in ("q", "mu"))
        cases = [tuple(rnd.randrange(hi) for _ in range(nargs))
                 for _ in range(req.trials)]
        t0 = time.perf_counter()
        for case in cases:
            run_program(program, *case, fn=fn)
        elapsed = time.perf_counter() - t0
        ops = len(cases)
    return BenchResponse(
        kernel=req.kernel, bits=req.bits, word=req.word,
        strategy=req.strategy, trials=ops, seconds=round(elapsed, 6),
        ns_per_op=round(elapsed / max(1, ops) * 1e9, 1),
        instructions=len(program.body),
    )
