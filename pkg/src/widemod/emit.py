"""Source emission: portable C, CUDA, and the kernel manifest.

The emitters are plain text generators over a lowered program; output is
byte-deterministic for a given program and target.  Word values use
exact-width unsigned types, anything between the word and double width
uses the double type, and every assignment that could exceed its
declared width is masked, so the C semantics match the interpreter bit
for bit.

Transform kernels emit the butterfly as a function plus the stage
structure as loops (C) or one kernel launch per stage (CUDA); twiddle
and bit-reversal tables are baked in as static data.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .ir import Program, Var, count_ops
from .kernels import (
    KernelSpec,
    NTT_KINDS,
    WordLayout,
    bit_reverse_order,
    to_words,
)
from .oracle import NttParams, compute_barrett


class TargetMismatch(ValueError):
    """Program widths (or parameter mode) do not fit the target."""


class LaunchTooWide(ValueError):
    """Requested thread block exceeds the device limit."""


@dataclass(frozen=True)
class EmitTarget:
    language: str = "c"
    word_bits: int = 64
    has_double_word: bool = True

    def __post_init__(self) -> None:
        if self.language not in ("c", "cuda"):
            raise TargetMismatch(f"unknown language {self.language!r}")
        if self.word_bits not in (8, 16, 32, 64):
            raise TargetMismatch(f"word must be 8/16/32/64 bits, "
                                 f"got {self.word_bits}")


@dataclass(frozen=True)
class LaunchSpec:
    threads_per_block: int
    blocks: int
    mapping: str    # "element" or "butterfly"

    def __post_init__(self) -> None:
        if self.threads_per_block < 1 or self.blocks < 1:
            raise LaunchTooWide("launch dimensions must be positive")
        if self.threads_per_block > 1024:
            raise LaunchTooWide(
                f"{self.threads_per_block} threads per block exceeds 1024")


def default_launch(program: Program) -> LaunchSpec:
    """One thread per element, or per butterfly for transforms."""
    attrs = program.attributes
    n = attrs.get("n", 1)
    if attrs["kernel"] in NTT_KINDS:
        work = max(1, n // 2)
        mapping = "butterfly"
    else:
        work = max(1, n)
        mapping = "element"
    if mapping == "element" and work == 1:
        # scalar kernels are mapped over arrays whose length is only
        # known at launch time; pick a conventional block size
        threads = 256
    else:
        threads = min(work, 1024)
    blocks = -(-work // threads)
    return LaunchSpec(threads, blocks, mapping)


def _check_widths(program: Program, target: EmitTarget) -> None:
    widths = [v.width for v in program.inputs]
    widths += [ins.dest.width for ins in program.body]
    widest = max(widths)
    if widest > 2 * target.word_bits:
        raise TargetMismatch(
            f"value width {widest} exceeds double word "
            f"{2 * target.word_bits}")
    if widest > target.word_bits and not target.has_double_word:
        raise TargetMismatch(
            f"value width {widest} needs a double word on a "
            f"{target.word_bits}-bit target")


_TYPE_NAMES = {8: "uint8_t", 16: "uint16_t", 32: "uint32_t",
               64: "uint64_t", 128: "unsigned __int128"}


def _type_bits(width: int, word_bits: int) -> int:
    return word_bits if width <= word_bits else 2 * word_bits


def _typedefs(program: Program, target: EmitTarget) -> list[str]:
    used = set()
    for v in program.inputs:
        used.add(_type_bits(v.width, target.word_bits))
    for ins in program.body:
        used.add(_type_bits(ins.dest.width, target.word_bits))
    lines = []
    for bits in sorted(used):
        lines.append(f"typedef {_TYPE_NAMES[bits]} w{bits};")
    return lines


def _mask_lit(width: int) -> str:
    return f"0x{(1 << width) - 1:x}ull"


def _c_int(value: int) -> str:
    return f"{value}ull" if value > 0x7FFFFFFF else str(value)


class _BodyEmitter:
    """Shared statement generation for the C and CUDA bodies."""

    def __init__(self, program: Program, target: EmitTarget):
        self.program = program
        self.target = target
        self.wb = target.word_bits

    def tname(self, width: int) -> str:
        return f"w{_type_bits(width, self.wb)}"

    def ref(self, op) -> str:
        if isinstance(op, int):
            return _c_int(op)
        return f"v_{op.name}"

    def _masked(self, expr: str, value_bits: int, dest: Var) -> str:
        """Truncate to the declared width when value and type disagree."""
        dtb = _type_bits(dest.width, self.wb)
        if value_bits > dest.width and dest.width < dtb:
            return f"({expr}) & {_mask_lit(dest.width)}"
        return expr

    def statement(self, ins) -> str:
        d = ins.dest
        t = self.tname(d.width)
        ops = ins.operands

        def w(op):
            return op.width if isinstance(op, Var) else max(1, op.bit_length())

        def cast(op):
            return f"({t}){self.ref(op)}"

        if ins.kind == "const":
            expr = f"({t}){_c_int(ins.imm)}"
        elif ins.kind == "add":
            raw = " + ".join(cast(op) for op in ops)
            bits = sum((1 << w(op)) - 1 for op in ops).bit_length()
            expr = self._masked(f"({t})({raw})", bits, d)
        elif ins.kind == "sub":
            expr = self._masked(f"({t})({cast(ops[0])} - {cast(ops[1])})",
                                _type_bits(d.width, self.wb), d)
        elif ins.kind == "mul":
            expr = f"({t})({cast(ops[0])} * {cast(ops[1])})"
        elif ins.kind == "shl":
            bits = w(ops[0]) + ins.imm
            expr = self._masked(f"({t})({cast(ops[0])} << {ins.imm})",
                                bits, d)
        elif ins.kind == "shr":
            bits = max(1, w(ops[0]) - ins.imm)
            expr = self._masked(f"({t})({self.ref(ops[0])} >> {ins.imm})",
                                bits, d)
        elif ins.kind == "and":
            expr = f"({t})({cast(ops[0])} & {cast(ops[1])})"
        elif ins.kind == "or":
            expr = f"({t})({cast(ops[0])} | {cast(ops[1])})"
        elif ins.kind == "lt":
            expr = f"({t})(({self.ref(ops[0])} < {self.ref(ops[1])}) ? 1 : 0)"
        elif ins.kind == "eq":
            expr = f"({t})(({self.ref(ops[0])} == {self.ref(ops[1])}) ? 1 : 0)"
        elif ins.kind == "select":
            expr = (f"{self.ref(ops[0])} ? {self.ref(ops[1])} "
                    f": {self.ref(ops[2])}")
        elif ins.kind == "exthi":
            drop = w(ops[0]) - d.width
            expr = f"({t})({self.ref(ops[0])} >> {drop})"
        elif ins.kind == "extlo":
            expr = self._masked(f"({t}){self.ref(ops[0])}", w(ops[0]), d)
        elif ins.kind == "concat":
            parts = []
            shift = 0
            for op in reversed(ops):
                piece = f"({t}){self.ref(op)}"
                if shift:
                    piece = f"({piece} << {shift})"
                parts.append(piece)
                shift += w(op)
            expr = " | ".join(reversed(parts))
        else:
            raise TargetMismatch(f"cannot emit {ins.kind}")
        return f"    const {t} v_{d.name} = {expr};"


def _grouping(program: Program):
    attrs = program.attributes
    word = attrs["level_bits"]
    per_arg = attrs["padded_bits"] // word
    return word, per_arg, attrs["arg_names"], attrs["ret_names"]


def _body_function(program: Program, target: EmitTarget, name: str,
                   qualifier: str = "static") -> list[str]:
    em = _BodyEmitter(program, target)
    word, per_arg, args, rets = _grouping(program)
    wtype = em.tname(word)
    params = [f"const {wtype} {a}[{per_arg}]" for a in args]
    per_ret = len(program.outputs) // len(rets)
    params += [f"{wtype} {r}[{per_ret}]" for r in rets]
    lines = [f"{qualifier} void {name}({', '.join(params)}) {{"]
    for j, arg in enumerate(args):
        for i in range(per_arg):
            v = program.inputs[j * per_arg + i]
            lines.append(f"    const {em.tname(v.width)} v_{v.name} = "
                         f"{arg}[{i}];")
    for ins in program.body:
        lines.append(em.statement(ins))
    for j, ret in enumerate(rets):
        for i in range(per_ret):
            v = program.outputs[j * per_ret + i]
            lines.append(f"    {ret}[{i}] = ({wtype})v_{v.name};")
    lines.append("}")
    return lines


def _word_table(name: str, rows, wtype: str, per_row: int) -> list[str]:
    lines = [f"static const {wtype} {name}[{len(rows)}][{per_row}] = {{"]
    for row in rows:
        lines.append("    {" + ", ".join(_c_int(x) for x in row) + "},")
    lines.append("};")
    return lines


def _ntt_tables(program: Program, word: int, per_arg: int,
                wtype: str, const_prefix: str = "static const") -> list[str]:
    attrs = program.attributes
    n = attrs["n"]
    tw_rows = [to_words(int(s), per_arg, word) for s in attrs["twiddles"]]
    lines = []
    lines.append(f"{const_prefix} {wtype} "
                 f"TW[{len(tw_rows)}][{per_arg}] = {{")
    for row in tw_rows:
        lines.append("    {" + ", ".join(_c_int(x) for x in row) + "},")
    lines.append("};")
    rev = bit_reverse_order(n)
    lines.append(f"{const_prefix} int REV[{n}] = "
                 "{" + ", ".join(str(r) for r in rev) + "};")
    if attrs["direction"] == "inverse":
        scale = to_words(int(attrs["n_inv"]), per_arg, word)
        lines.append(f"{const_prefix} {wtype} NINV[{per_arg}] = "
                     "{" + ", ".join(_c_int(x) for x in scale) + "};")
    return lines


def _check_ntt_emittable(program: Program) -> None:
    if program.attributes.get("params_mode") != "baked":
        raise TargetMismatch(
            "transform emission needs baked parameters; runtime q/mu has "
            "no table to draw twiddles from")


def emit_c(program: Program, target: EmitTarget | None = None,
           self_test: bool = False) -> str:
    """Portable C translation unit; optionally with a stdin/stdout driver.

    The self-test driver reads whitespace-separated hex words (most
    significant first, one record per line: all operand words in
    declaration order), runs the kernel, and prints the output words.
    """
    if target is None:
        target = EmitTarget("c", program.attributes["omega0"])
    if target.language != "c":
        raise TargetMismatch(f"emit_c got a {target.language} target")
    _check_widths(program, target)
    attrs = program.attributes
    kind = attrs["kernel"]
    is_ntt = kind in NTT_KINDS
    if is_ntt:
        _check_ntt_emittable(program)
    word, per_arg, args, rets = _grouping(program)
    em = _BodyEmitter(program, target)
    wtype = em.tname(word)
    name = program.name

    lines = [
        f"/* {name}: generated {attrs['lambda']}-bit modular kernel "
        f"on {target.word_bits}-bit words. */",
        "#include <stdint.h>",
        "",
    ]
    lines += _typedefs(program, target)
    lines.append("")
    lines += _body_function(program, target, name)
    n = attrs.get("n", 1)

    if is_ntt:
        lines.append("")
        lines += _ntt_tables(program, word, per_arg, wtype)
        per_ret = len(program.outputs) // len(rets)
        lines += [
            "",
            f"static void {name}_transform({wtype} x[{n}][{per_arg}]) {{",
            f"    {wtype} tmp[{n}][{per_arg}];",
            f"    for (int i = 0; i < {n}; i++)",
            f"        for (int j = 0; j < {per_arg}; j++)",
            "            tmp[i][j] = x[REV[i]][j];",
            f"    for (int i = 0; i < {n}; i++)",
            f"        for (int j = 0; j < {per_arg}; j++)",
            "            x[i][j] = tmp[i][j];",
            f"    for (int m = 2; m <= {n}; m <<= 1) {{",
            "        int half = m >> 1;",
            f"        int step = {n} / m;",
            f"        for (int base = 0; base < {n}; base += m) {{",
            "            for (int j = 0; j < half; j++) {",
            f"                {wtype} o0[{per_ret}], o1[{per_ret}];",
            f"                {name}(x[base + j], x[base + j + half], "
            "TW[j * step], o0, o1);",
            f"                for (int t = 0; t < {per_arg}; t++) {{",
            "                    x[base + j][t] = o0[t];",
            "                    x[base + j + half][t] = o1[t];",
            "                }",
            "            }",
            "        }",
            "    }",
        ]
        if attrs["direction"] == "inverse":
            lines += [
                f"    {wtype} zero[{per_arg}] = {{0}};",
                f"    for (int i = 0; i < {n}; i++) {{",
                f"        {wtype} o0[{per_ret}], o1[{per_ret}];",
                f"        {name}(zero, x[i], NINV, o0, o1);",
                f"        for (int t = 0; t < {per_arg}; t++)",
                "            x[i][t] = o0[t];",
                "    }",
            ]
        lines.append("}")

    if self_test:
        lines.append("")
        lines.append("#include <stdio.h>")
        lines.append("")
        lines.append("int main(void) {")
        if is_ntt:
            total = n * per_arg
            lines += [
                f"    unsigned long long in[{total}];",
                "    for (;;) {",
                f"        for (int i = 0; i < {total}; i++)",
                "            if (scanf(\"%llx\", &in[i]) != 1) return 0;",
                f"        {wtype} x[{n}][{per_arg}];",
                f"        for (int i = 0; i < {n}; i++)",
                f"            for (int j = 0; j < {per_arg}; j++)",
                f"                x[i][j] = ({wtype})in[i * {per_arg} + j];",
                f"        {name}_transform(x);",
                f"        for (int i = 0; i < {total}; i++)",
                f"            printf(\"%llx%c\", (unsigned long long)"
                f"x[i / {per_arg}][i % {per_arg}], "
                f"i + 1 < {total} ? ' ' : '\\n');",
                "    }",
                "}",
            ]
        else:
            total = len(args) * per_arg
            per_ret = len(program.outputs) // len(rets)
            lines += [
                f"    unsigned long long in[{total}];",
                "    for (;;) {",
                f"        for (int i = 0; i < {total}; i++)",
                "            if (scanf(\"%llx\", &in[i]) != 1) return 0;",
            ]
            for j, arg in enumerate(args):
                packs = ", ".join(
                    f"({wtype})in[{j * per_arg + i}]"
                    for i in range(per_arg))
                lines.append(f"        {wtype} {arg}[{per_arg}] = "
                             f"{{{packs}}};")
            outw = len(rets) * per_ret
            for r in rets:
                lines.append(f"        {wtype} o_{r}[{per_ret}];")
            call = ", ".join(list(args) + [f"o_{r}" for r in rets])
            lines.append(f"        {name}({call});")
            idx = 0
            for r in rets:
                for i in range(per_ret):
                    sep = "' '" if idx + 1 < outw else "'\\n'"
                    lines.append(
                        f"        printf(\"%llx%c\", (unsigned long long)"
                        f"o_{r}[{i}], {sep});")
                    idx += 1
            lines.append("    }")
            lines.append("}")
    return "\n".join(lines) + "\n"


def emit_cuda(program: Program, target: EmitTarget | None = None,
              launch: LaunchSpec | None = None) -> str:
    """CUDA translation unit: device body, global kernels, host launcher.

    Element kernels map one thread per element with a bound check;
    transforms get a bit-reversal kernel plus one global kernel per
    stage (launch order is the host function at the bottom).  A second
    grid dimension indexes independent batches.
    """
    if target is None:
        target = EmitTarget("cuda", program.attributes["omega0"])
    if target.language != "cuda":
        raise TargetMismatch(f"emit_cuda got a {target.language} target")
    _check_widths(program, target)
    if launch is None:
        launch = default_launch(program)
    attrs = program.attributes
    kind = attrs["kernel"]
    is_ntt = kind in NTT_KINDS
    if is_ntt:
        _check_ntt_emittable(program)
    word, per_arg, args, rets = _grouping(program)
    em = _BodyEmitter(program, target)
    wtype = em.tname(word)
    name = program.name
    n = attrs.get("n", 1)
    per_ret = len(program.outputs) // len(rets)

    lines = [
        f"/* {name}: generated {attrs['lambda']}-bit modular kernel "
        f"on {target.word_bits}-bit words (CUDA). */",
        "#include <stdint.h>",
        "",
    ]
    lines += _typedefs(program, target)
    lines.append("")
    lines += _body_function(program, target, f"{name}_body",
                            qualifier="__device__ static __forceinline__")
    lines.append("")

    if not is_ntt:
        vec_flags = attrs.get("vector_args", [False] * len(args))
        params = []
        for a, is_vec in zip(args, vec_flags):
            params.append(f"const {wtype} *{a}")
        params += [f"{wtype} *{r}" for r in rets]
        params.append("int n_elems")
        lines += [
            f'extern "C" __global__ void {name}_kernel'
            f"({', '.join(params)}) {{",
            "    int i = blockIdx.x * blockDim.x + threadIdx.x;",
            "    if (i >= n_elems) return;",
        ]
        call_args = []
        for a, is_vec in zip(args, vec_flags):
            call_args.append(f"{a} + i * {per_arg}" if is_vec else a)
        call_args += [f"{r} + i * {per_ret}" for r in rets]
        lines.append(f"    {name}_body({', '.join(call_args)});")
        lines.append("}")
        lines += [
            "",
            "#ifdef __CUDACC__",
            f"extern \"C\" void {name}_launch("
            + ", ".join(params) + ") {",
            f"    int threads = {launch.threads_per_block};",
            "    int blocks = (n_elems + threads - 1) / threads;",
            f"    {name}_kernel<<<blocks, threads>>>("
            + ", ".join(list(args) + list(rets) + ["n_elems"]) + ");",
            "}",
            "#endif",
        ]
        return "\n".join(lines) + "\n"

    # Transform: constant tables, bit-reversal, one kernel per stage.
    lines += _ntt_tables(program, word, per_arg, wtype,
                         const_prefix="__constant__")
    lines += [
        "",
        f'extern "C" __global__ void {name}_bitrev'
        f"(const {wtype} *in, {wtype} *x) {{",
        "    int i = blockIdx.x * blockDim.x + threadIdx.x;",
        f"    if (i >= {n}) return;",
        f"    long off = (long)blockIdx.y * {n * per_arg};",
        f"    for (int j = 0; j < {per_arg}; j++)",
        f"        x[off + i * {per_arg} + j] = "
        f"in[off + REV[i] * {per_arg} + j];",
        "}",
    ]
    stages = []
    m = 2
    s = 0
    while m <= n:
        stages.append((s, m))
        m <<= 1
        s += 1
    for s, m in stages:
        half = m // 2
        step = n // m
        lines += [
            "",
            f'extern "C" __global__ void {name}_stage{s}({wtype} *x) {{',
            "    int t = blockIdx.x * blockDim.x + threadIdx.x;",
            f"    if (t >= {n // 2}) return;",
            f"    long off = (long)blockIdx.y * {n * per_arg};",
            f"    int base = (t / {half}) * {m};",
            f"    int j = t % {half};",
            f"    {wtype} o0[{per_ret}], o1[{per_ret}];",
            f"    {name}_body(x + off + (base + j) * {per_arg}, "
            f"x + off + (base + j + {half}) * {per_arg}, "
            f"TW[j * {step}], o0, o1);",
            f"    for (int w = 0; w < {per_arg}; w++) {{",
            f"        x[off + (base + j) * {per_arg} + w] = o0[w];",
            f"        x[off + (base + j + {half}) * {per_arg} + w] = o1[w];",
            "    }",
            "}",
        ]
    if attrs["direction"] == "inverse":
        lines += [
            "",
            f'extern "C" __global__ void {name}_scale({wtype} *x) {{',
            "    int i = blockIdx.x * blockDim.x + threadIdx.x;",
            f"    if (i >= {n}) return;",
            f"    long off = (long)blockIdx.y * {n * per_arg};",
            f"    {wtype} zero[{per_arg}];",
            f"    for (int j = 0; j < {per_arg}; j++) zero[j] = 0;",
            f"    {wtype} o0[{per_ret}], o1[{per_ret}];",
            f"    {name}_body(zero, x + off + i * {per_arg}, NINV, o0, o1);",
            f"    for (int j = 0; j < {per_arg}; j++)",
            f"        x[off + i * {per_arg} + j] = o0[j];",
            "}",
        ]
    lines += [
        "",
        "#ifdef __CUDACC__",
        f'extern "C" void {name}_launch(const {wtype} *in, {wtype} *x, '
        "int batch) {",
        f"    dim3 grid_half({launch.blocks}, batch);",
        f"    dim3 grid_full({-(-n // min(n, 1024))}, batch);",
        f"    int t_half = {launch.threads_per_block};",
        f"    int t_full = {min(n, 1024)};",
        f"    {name}_bitrev<<<grid_full, t_full>>>(in, x);",
    ]
    for s, _m in stages:
        lines.append(f"    {name}_stage{s}<<<grid_half, t_half>>>(x);")
    if attrs["direction"] == "inverse":
        lines.append(f"    {name}_scale<<<grid_full, t_full>>>(x);")
    lines += ["}", "#endif"]
    return "\n".join(lines) + "\n"


def emit_manifest(spec: KernelSpec, program: Program,
                  source: str | None = None) -> str:
    """JSON build record; big integers as decimal strings, keys sorted."""
    counts = count_ops(program)
    opcounts = {f"{kind}.{cls}": c
                for (kind, cls), c in sorted(counts.items())}
    doc = {
        "kernel": spec.kind,
        "lambda": spec.layout.bits,
        "omega0": spec.layout.word_bits,
        "n": spec.size,
        "strategy": spec.mul_strategy,
        "q": str(spec.barrett.q) if spec.barrett else None,
        "mu": str(spec.barrett.mu) if spec.barrett else None,
        "p": str(spec.ntt.p) if spec.ntt else None,
        "root": str(spec.ntt.root) if spec.ntt else None,
        "opcounts": opcounts,
        "source_sha256": hashlib.sha256(source.encode()).hexdigest()
        if source is not None else None,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def parse_manifest(text: str) -> KernelSpec:
    """Rebuild the KernelSpec a manifest describes; checks consistency."""
    doc = json.loads(text)
    layout = WordLayout(doc["lambda"], doc["omega0"])
    kind = doc["kernel"]
    barrett = None
    if doc.get("q") is not None:
        barrett = compute_barrett(int(doc["q"]), layout.bits)
        if doc.get("mu") is not None and int(doc["mu"]) != barrett.mu:
            raise ValueError(
                f"manifest mu {doc['mu']} disagrees with recomputed "
                f"{barrett.mu}")
    ntt = None
    if doc.get("p") is not None:
        p = int(doc["p"])
        root = int(doc["root"])
        nlen = doc["n"]
        ok = (root == 1 if nlen == 1 else
              pow(root, nlen, p) == 1 and pow(root, nlen // 2, p) != 1)
        if not ok:
            raise ValueError(f"manifest root {root} does not have "
                             f"order {nlen} mod {p}")
        ntt = NttParams(n=nlen, p=p, root=root,
                        root_inv=pow(root, -1, p), n_inv=pow(nlen, -1, p))
    return KernelSpec(kind, layout, doc["n"], barrett, ntt,
                      doc.get("strategy", "schoolbook"))
