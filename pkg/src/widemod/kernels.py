"""Kernel builders and executors for wide modular arithmetic.

A kernel starts life as a short straight-line program over full-width
values (the interface width, padded up to a power-of-two multiple of the
machine word), written directly in the IR: Barrett multiply-reduce,
modular add/subtract, their vector forms, and the NTT butterfly.  The
lowering pass in :mod:`widemod.rewrite` then grinds those wide values
down to machine words.

NTT kernels keep the loop structure out of the IR on purpose: the
generated program is one butterfly, and the stage/index schedule lives
in plain data (`butterfly_schedule`) that executors and emitters share.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ir import Program, Var, compile_program
from .oracle import (
    BarrettParams,
    NttParams,
    compute_barrett,
    find_ntt_params,
)
from .rewrite import Ctx, RewriteConfig, lower_program, prune_zero_words

SCALAR_KINDS = ("addmod", "submod", "mulmod")
VECTOR_KINDS = ("vadd", "vsub", "vmul", "axpy")
NTT_KINDS = ("ntt", "intt")
KERNEL_KINDS = SCALAR_KINDS + VECTOR_KINDS + NTT_KINDS + ("widemul",)

PARAMS_MODES = ("baked", "runtime")


class InvalidKernel(ValueError):
    """Kernel kind/size/parameter combination that cannot be built."""


@dataclass(frozen=True)
class WordLayout:
    """How an interface width maps onto machine words.

    ``bits`` is the arithmetic width (the modulus lives below
    ``2**(bits-4)``); ``word_bits`` the machine word.  Widths that are
    not a power-of-two multiple of the word are padded up, and the
    padding words are statically zero for in-range operands.
    """

    bits: int
    word_bits: int

    def __post_init__(self) -> None:
        if self.word_bits not in (8, 16, 32, 64):
            raise InvalidKernel(f"word must be 8/16/32/64 bits, "
                                f"got {self.word_bits}")
        if self.bits < self.word_bits:
            raise InvalidKernel(f"interface width {self.bits} below "
                                f"word width {self.word_bits}")

    @property
    def words(self) -> int:
        return -(-self.bits // self.word_bits)

    @property
    def padded_words(self) -> int:
        return 1 << (self.words - 1).bit_length()

    @property
    def padded_bits(self) -> int:
        return self.padded_words * self.word_bits


@dataclass(frozen=True)
class KernelSpec:
    """Everything needed to rebuild a kernel deterministically."""

    kind: str
    layout: WordLayout
    size: int = 1
    barrett: BarrettParams | None = None
    ntt: NttParams | None = None
    mul_strategy: str = "schoolbook"

    def __post_init__(self) -> None:
        if self.kind not in KERNEL_KINDS:
            raise InvalidKernel(f"unknown kernel kind {self.kind!r}")
        if self.kind in SCALAR_KINDS + ("widemul",) and self.size != 1:
            raise InvalidKernel(f"{self.kind} takes no size")
        if self.kind in VECTOR_KINDS and self.size < 1:
            raise InvalidKernel("vector size must be positive")
        if self.kind in NTT_KINDS:
            if self.ntt is None:
                raise InvalidKernel(f"{self.kind} needs transform parameters")
            if self.size != self.ntt.n:
                raise InvalidKernel("size disagrees with transform length")
        if self.kind != "widemul" and self.barrett is None:
            raise InvalidKernel(f"{self.kind} needs reduction parameters")
        if self.barrett is not None and self.barrett.width != self.layout.bits:
            raise InvalidKernel("reduction parameters built for a different "
                               "width")


def make_spec(kind: str, bits: int, word: int, size: int = 1,
              strategy: str = "schoolbook") -> KernelSpec:
    """Pick a modulus (largest suitable prime) and assemble a spec."""
    layout = WordLayout(bits, word)
    if kind == "widemul":
        return KernelSpec(kind, layout, 1, None, None, strategy)
    if kind in NTT_KINDS:
        params = find_ntt_params(bits, size)
        barrett = compute_barrett(params.p, bits)
        return KernelSpec(kind, layout, size, barrett, params, strategy)
    q = find_ntt_params(bits, 1).p
    barrett = compute_barrett(q, bits)
    n = size if kind in VECTOR_KINDS else 1
    return KernelSpec(kind, layout, n, barrett, None, strategy)


# ---------------------------------------------------------------- builders

def _emit_addmod(ctx: Ctx, a: Var, b: Var, qv: Var) -> Var:
    lam = a.width
    s = ctx.emit("add", lam + 1, [a, b])
    slo = ctx.emit("extlo", lam, [s])
    d = ctx.emit("sub", lam, [slo, qv])
    keep = ctx.emit("lt", 1, [s, qv])
    return ctx.emit("select", lam, [keep, slo, d])


def _emit_submod(ctx: Ctx, a: Var, b: Var, qv: Var) -> Var:
    lam = a.width
    d = ctx.emit("sub", lam, [a, b])
    t = ctx.emit("add", lam + 1, [d, qv])
    tl = ctx.emit("extlo", lam, [t])
    under = ctx.emit("lt", 1, [a, b])
    return ctx.emit("select", lam, [under, tl, d])


def _emit_mulmod(ctx: Ctx, a: Var, b: Var, qv: Var, muv: Var,
                 bp: BarrettParams) -> Var:
    lam = a.width
    t = ctx.emit("mul", 2 * lam, [a, b])
    r1 = ctx.emit("shr", lam, [t], imm=bp.shift1)
    r2 = ctx.emit("mul", 2 * lam, [r1, muv])
    r3 = ctx.emit("shr", lam, [r2], imm=bp.shift2)
    rq = ctx.emit("mul", 2 * lam, [r3, qv])
    tl = ctx.emit("extlo", lam, [t])
    rl = ctx.emit("extlo", lam, [rq])
    d = ctx.emit("sub", lam, [tl, rl])
    e = ctx.emit("sub", lam, [d, qv])
    keep = ctx.emit("lt", 1, [d, qv])
    return ctx.emit("select", lam, [keep, d, e])


def _base_attrs(kind: str, layout: WordLayout, params_mode: str) -> dict:
    return {
        "kernel": kind,
        "lambda": layout.bits,
        "omega0": layout.word_bits,
        "level_bits": layout.padded_bits,
        "padded_bits": layout.padded_bits,
        "n": 1,
        "params_mode": params_mode,
    }


def _param_vars(ctx: Ctx, lam: int, barrett: BarrettParams, params_mode: str,
                need_mu: bool):
    """Modulus/mu either baked as constants or taken as trailing inputs."""
    if params_mode == "baked":
        qv = ctx.const(lam, barrett.q)
        muv = ctx.const(lam, barrett.mu) if need_mu else None
        return qv, muv, []
    qv = Var("q", lam)
    extra = [qv]
    muv = None
    if need_mu:
        muv = Var("mu", lam)
        extra.append(muv)
    return qv, muv, extra


def build_scalar(kind: str, layout: WordLayout, barrett: BarrettParams,
                 params_mode: str = "baked") -> Program:
    if kind not in SCALAR_KINDS:
        raise InvalidKernel(f"not a scalar kernel: {kind!r}")
    if params_mode not in PARAMS_MODES:
        raise InvalidKernel(f"unknown params mode {params_mode!r}")
    lam = layout.padded_bits
    a, b = Var("a", lam), Var("b", lam)
    ctx = Ctx()
    qv, muv, extra = _param_vars(ctx, lam, barrett, params_mode,
                                 need_mu=kind == "mulmod")
    if kind == "addmod":
        out = _emit_addmod(ctx, a, b, qv)
    elif kind == "submod":
        out = _emit_submod(ctx, a, b, qv)
    else:
        out = _emit_mulmod(ctx, a, b, qv, muv, barrett)
    attrs = _base_attrs(kind, layout, params_mode)
    attrs.update(q=str(barrett.q), mu=str(barrett.mu), mbits=barrett.mbits,
                 arg_names=["a", "b"] + [v.name for v in extra],
                 ret_names=["out"],
                 vector_args=[True, True] + [False] * len(extra))
    return Program(
        name=f"{kind}_{layout.bits}w{layout.word_bits}",
        inputs=tuple([a, b] + extra),
        outputs=(out,),
        body=tuple(ctx.body),
        attributes=attrs,
    )


def build_vector(kind: str, layout: WordLayout, size: int,
                 barrett: BarrettParams,
                 params_mode: str = "baked") -> Program:
    """Elementwise kernel: same body as the scalar one, applied n times."""
    if kind not in VECTOR_KINDS:
        raise InvalidKernel(f"not a vector kernel: {kind!r}")
    if size < 1:
        raise InvalidKernel("vector size must be positive")
    if params_mode not in PARAMS_MODES:
        raise InvalidKernel(f"unknown params mode {params_mode!r}")
    lam = layout.padded_bits
    ctx = Ctx()
    need_mu = kind in ("vmul", "axpy")
    if kind == "axpy":
        args = [Var("a", lam), Var("x", lam), Var("y", lam)]
        vector_args = [False, True, True]
    else:
        args = [Var("a", lam), Var("b", lam)]
        vector_args = [True, True]
    qv, muv, extra = _param_vars(ctx, lam, barrett, params_mode, need_mu)
    if kind == "vadd":
        out = _emit_addmod(ctx, args[0], args[1], qv)
    elif kind == "vsub":
        out = _emit_submod(ctx, args[0], args[1], qv)
    elif kind == "vmul":
        out = _emit_mulmod(ctx, args[0], args[1], qv, muv, barrett)
    else:
        prod = _emit_mulmod(ctx, args[0], args[1], qv, muv, barrett)
        out = _emit_addmod(ctx, prod, args[2], qv)
    attrs = _base_attrs(kind, layout, params_mode)
    attrs.update(n=size, q=str(barrett.q), mu=str(barrett.mu),
                 mbits=barrett.mbits,
                 arg_names=[v.name for v in args] + [v.name for v in extra],
                 ret_names=["out"],
                 vector_args=vector_args + [False] * len(extra))
    return Program(
        name=f"{kind}{size}_{layout.bits}w{layout.word_bits}",
        inputs=tuple(args + extra),
        outputs=(out,),
        body=tuple(ctx.body),
        attributes=attrs,
    )


def twiddle_table(params: NttParams, inverse: bool = False) -> list[int]:
    """Powers of the transform root (or its inverse), length n/2."""
    base = params.root_inv if inverse else params.root
    table = []
    acc = 1
    for _ in range(max(1, params.n // 2)):
        table.append(acc)
        acc = acc * base % params.p
    return table


def build_ntt(kind: str, layout: WordLayout, params: NttParams,
              params_mode: str = "baked") -> Program:
    """One butterfly; stage structure lives in the attached schedule data.

    Inputs ``u, v, w``: outputs are ``u + v*w`` and ``u - v*w`` mod p.
    The inverse transform uses inverse-root twiddles and a final scale by
    1/n, which executors express as a butterfly with ``u = 0``.
    """
    if kind not in NTT_KINDS:
        raise InvalidKernel(f"not a transform kernel: {kind!r}")
    if params_mode not in PARAMS_MODES:
        raise InvalidKernel(f"unknown params mode {params_mode!r}")
    if params.n < 2 or params.n & (params.n - 1):
        raise InvalidKernel(f"transform length {params.n} is not a power "
                            f"of two at least 2")
    barrett = compute_barrett(params.p, layout.bits)
    lam = layout.padded_bits
    u, v, w = Var("u", lam), Var("v", lam), Var("w", lam)
    ctx = Ctx()
    qv, muv, extra = _param_vars(ctx, lam, barrett, params_mode, need_mu=True)
    t = _emit_mulmod(ctx, v, w, qv, muv, barrett)
    out0 = _emit_addmod(ctx, u, t, qv)
    out1 = _emit_submod(ctx, u, t, qv)
    inverse = kind == "intt"
    attrs = _base_attrs(kind, layout, params_mode)
    attrs.update(
        n=params.n,
        q=str(barrett.q), mu=str(barrett.mu), mbits=barrett.mbits,
        p=str(params.p), root=str(params.root),
        root_inv=str(params.root_inv), n_inv=str(params.n_inv),
        twiddles=[str(x) for x in twiddle_table(params, inverse)],
        direction="inverse" if inverse else "forward",
        arg_names=["u", "v", "w"] + [x.name for x in extra],
        ret_names=["out0", "out1"],
    )
    return Program(
        name=f"{kind}{params.n}_{layout.bits}w{layout.word_bits}",
        inputs=tuple([u, v, w] + extra),
        outputs=(out0, out1),
        body=tuple(ctx.body),
        attributes=attrs,
    )


def build_wide_mul(layout: WordLayout) -> Program:
    """Bare widening multiply, the worksheet for strategy op counting."""
    lam = layout.padded_bits
    a, b = Var("a", lam), Var("b", lam)
    ctx = Ctx()
    t = ctx.emit("mul", 2 * lam, [a, b])
    attrs = _base_attrs("widemul", layout, "baked")
    attrs.update(arg_names=["a", "b"], ret_names=["c"],
                 vector_args=[True, True])
    return Program(
        name=f"widemul_{layout.bits}w{layout.word_bits}",
        inputs=(a, b),
        outputs=(t,),
        body=tuple(ctx.body),
        attributes=attrs,
    )


def build_program(spec: KernelSpec, params_mode: str = "baked") -> Program:
    if spec.kind == "widemul":
        return build_wide_mul(spec.layout)
    if spec.kind in SCALAR_KINDS:
        return build_scalar(spec.kind, spec.layout, spec.barrett, params_mode)
    if spec.kind in VECTOR_KINDS:
        return build_vector(spec.kind, spec.layout, spec.size, spec.barrett,
                            params_mode)
    return build_ntt(spec.kind, spec.layout, spec.ntt, params_mode)


def zero_input_words(program: Program) -> set[str]:
    """Input words statically zero because operands sit below the padding.

    Residues are below ``2**mbits`` and ``mu`` below ``2**(mbits+4)``, so
    any word whose bit range starts at or above the bound never holds a
    set bit.  Word-level kernels with no modulus bound get an empty set.
    """
    attrs = program.attributes
    mbits = attrs.get("mbits")
    if mbits is None:
        return set()
    word = attrs["level_bits"]
    per_arg = attrs["padded_bits"] // word
    names = attrs["arg_names"]
    assert len(program.inputs) == len(names) * per_arg
    zeros = set()
    for j, arg in enumerate(names):
        bound = mbits + 4 if arg == "mu" else mbits
        for i in range(per_arg):
            low_bit = (per_arg - 1 - i) * word
            if low_bit >= bound:
                zeros.add(program.inputs[j * per_arg + i].name)
    return zeros


def generate_kernel(spec: KernelSpec, params_mode: str = "baked",
                    target_has_double_word: bool = True, prune: bool = True,
                    trace: list | None = None) -> Program:
    """Build, lower to the machine word, and prune padding zeros."""
    program = build_program(spec, params_mode)
    config = RewriteConfig(
        omega0=spec.layout.word_bits,
        mul_strategy=spec.mul_strategy,
        target_has_double_word=target_has_double_word,
    )
    lowered = lower_program(program, config, trace)
    if prune:
        lowered = prune_zero_words(lowered, zero_input_words(lowered))
    return lowered


# --------------------------------------------------------- NTT schedules

def bit_reverse_order(n: int) -> list[int]:
    if n & (n - 1) or n < 1:
        raise InvalidKernel(f"length {n} is not a power of two")
    if n == 1:
        return [0]
    bits = (n - 1).bit_length()
    return [int(format(i, f"0{bits}b")[::-1], 2) for i in range(n)]


def butterfly_schedule(n: int) -> list[tuple[int, int, int]]:
    """Flattened stage schedule: ``(top, bottom, twiddle exponent)``.

    Stages double the span ``m`` from 2 up to n; within a span the j-th
    butterfly uses exponent ``j * n/m``.  Input is taken bit-reversed,
    output lands in natural order.  Total entries: ``n/2 * log2(n)``.
    """
    if n & (n - 1) or n < 2:
        raise InvalidKernel(f"length {n} is not a power of two at least 2")
    out = []
    m = 2
    while m <= n:
        half = m // 2
        step = n // m
        for base in range(0, n, m):
            for j in range(half):
                out.append((base + j, base + j + half, j * step))
        m *= 2
    return out


# ------------------------------------------------------------- executors

def to_words(value: int, count: int, width: int) -> list[int]:
    mask = (1 << width) - 1
    return [(value >> (width * (count - 1 - i))) & mask
            for i in range(count)]


def from_words(words, width: int) -> int:
    acc = 0
    for w in words:
        acc = (acc << width) | w
    return acc


def _arg_plan(program: Program):
    attrs = program.attributes
    word = attrs["level_bits"]
    per_arg = attrs["padded_bits"] // word
    baked = {}
    for name in ("q", "mu"):
        if name in attrs["arg_names"]:
            baked[name] = int(attrs[name])
    return word, per_arg, attrs["arg_names"], baked


def run_program(program: Program, *args, fn=None):
    """Execute a lowered (or unlowered) kernel on integer operands.

    Runtime-parameter kernels get q/mu injected from the program's
    attributes; callers pass only the value operands.
    """
    word, per_arg, names, baked = _arg_plan(program)
    fn = fn or compile_program(program)
    flat: list[int] = []
    it = iter(args)
    for name in names:
        value = baked[name] if name in baked else next(it)
        flat.extend(to_words(value, per_arg, word))
    leftovers = list(it)
    if leftovers:
        raise TypeError(f"{len(args)} operands for {len(names) - len(baked)} "
                        f"parameters")
    out_words = fn(flat)
    rets = program.attributes["ret_names"]
    per_ret = len(out_words) // len(rets)
    outs = [from_words(out_words[i * per_ret:(i + 1) * per_ret], word)
            for i in range(len(rets))]
    return outs[0] if len(outs) == 1 else tuple(outs)


def run_vector(program: Program, *arrays, fn=None) -> list[int]:
    attrs = program.attributes
    n = attrs["n"]
    flags = attrs["vector_args"][:len(arrays)]
    for arr, is_vec in zip(arrays, flags):
        if is_vec and len(arr) != n:
            raise ValueError(f"expected {n} elements, got {len(arr)}")
    fn = fn or compile_program(program)
    out = []
    for i in range(n):
        elem_args = [arr[i] if is_vec else arr
                     for arr, is_vec in zip(arrays, flags)]
        out.append(run_program(program, *elem_args, fn=fn))
    return out


def run_ntt(program: Program, values, fn=None) -> list[int]:
    """Run the full transform by replaying the butterfly schedule."""
    attrs = program.attributes
    n = attrs["n"]
    if len(values) != n:
        raise ValueError(f"expected {n} elements, got {len(values)}")
    fn = fn or compile_program(program)
    twiddles = [int(s) for s in attrs["twiddles"]]
    rev = bit_reverse_order(n)
    x = [values[rev[i]] for i in range(n)]
    for top, bot, exp in butterfly_schedule(n):
        x[top], x[bot] = run_program(program, x[top], x[bot], twiddles[exp],
                                     fn=fn)
    if attrs["direction"] == "inverse":
        scale = int(attrs["n_inv"])
        x = [run_program(program, 0, xi, scale, fn=fn)[0] for xi in x]
    return x
