"""Straight-line SSA programs over fixed-width unsigned words.

A program is a flat instruction list; the only control flow is ``select``.
Every variable has an explicit bit width.  Width 1 is used for carry,
borrow and comparison flags.  Multi-word values are always most
significant word first wherever word order matters.

Width rules, checked by :func:`validate`:

* ``lt`` / ``eq`` produce width 1;
* ``mul`` produces the sum of its operand widths;
* ``add`` naturally produces ``ceil(log2(sum of operand maxima))`` bits; a
  narrower destination may be declared and is then checked dynamically by
  the strict interpreter;
* ``sub`` wraps at the width of its widest operand;
* ``shl`` / ``shr`` take an immediate shift amount and truncate to the
  destination width;
* ``exthi`` / ``extlo`` slice the top / bottom ``dest.width`` bits of
  their operand; ``concat`` is the inverse of an aligned hi/lo split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Union

KINDS = frozenset({
    "const", "add", "sub", "mul", "shl", "shr", "and", "or",
    "lt", "eq", "select", "exthi", "extlo", "concat",
})

# Kinds whose semantics truncate to the destination width by definition,
# so strict mode never flags them.
_TRUNCATING = frozenset({"sub", "shl", "shr", "extlo"})


class WidthOverflow(RuntimeError):
    """Strict interpretation: a value did not fit its declared width."""

    def __init__(self, index: int, instr: "Instr", value: int):
        self.index = index
        self.instr = instr
        self.value = value
        super().__init__(
            f"instr {index} ({instr.kind} -> {instr.dest.name}): value "
            f"{value} exceeds {instr.dest.width} bits")


class InputOutOfRange(ValueError):
    """An input value did not fit the declared input width."""


@dataclass(frozen=True)
class Var:
    name: str
    width: int


Operand = Union[Var, int]


@dataclass(frozen=True)
class Instr:
    kind: str
    dest: Var
    operands: tuple[Operand, ...] = ()
    imm: int | None = None


@dataclass(frozen=True)
class Program:
    name: str
    inputs: tuple[Var, ...]
    outputs: tuple[Var, ...]
    body: tuple[Instr, ...]
    attributes: dict = field(default_factory=dict, compare=False)


def _operand_width(op: Operand) -> int:
    if isinstance(op, Var):
        return op.width
    return max(1, int(op).bit_length())


def validate(program: Program) -> list[str]:
    """Return a list of diagnostics; an empty list means well formed."""
    diags: list[str] = []
    defined: dict[str, Var] = {}
    for v in program.inputs:
        if v.width < 1:
            diags.append(f"BadWidth@input: {v.name} width {v.width}")
        if v.name in defined:
            diags.append(f"DuplicateDef@input: {v.name}")
        defined[v.name] = v

    for i, ins in enumerate(program.body):
        if ins.kind not in KINDS:
            diags.append(f"UnknownKind@{i}: {ins.kind}")
            continue
        if ins.dest.width < 1:
            diags.append(f"BadWidth@{i}: {ins.dest.name}")
        if ins.dest.name in defined:
            diags.append(f"DuplicateDef@{i}: {ins.dest.name}")
        ws = []
        for op in ins.operands:
            if isinstance(op, Var):
                known = defined.get(op.name)
                if known is None:
                    diags.append(f"UseBeforeDef@{i}: {op.name}")
                elif known.width != op.width:
                    diags.append(
                        f"WidthMismatch@{i}: {op.name} used at width "
                        f"{op.width}, defined at {known.width}")
            elif op < 0:
                diags.append(f"BadLiteral@{i}: {op}")
            ws.append(_operand_width(op))
        dw = ins.dest.width
        kind = ins.kind
        nops = len(ins.operands)

        if kind == "const":
            if nops != 0 or ins.imm is None:
                diags.append(f"BadOperands@{i}: const takes imm only")
            elif not 0 <= ins.imm < (1 << dw):
                diags.append(f"WidthMismatch@{i}: const {ins.imm} in {dw} bits")
        elif kind == "add":
            if nops not in (2, 3):
                diags.append(f"BadOperands@{i}: add takes 2 or 3 operands")
            else:
                natural = sum((1 << w) - 1 for w in ws).bit_length()
                if dw > natural:
                    diags.append(
                        f"WidthMismatch@{i}: add dest {dw} wider than "
                        f"natural {natural}")
        elif kind == "sub":
            if nops != 2:
                diags.append(f"BadOperands@{i}: sub takes 2 operands")
            elif dw != max(ws):
                diags.append(
                    f"WidthMismatch@{i}: sub dest {dw} != max operand "
                    f"{max(ws)}")
        elif kind == "mul":
            if nops != 2:
                diags.append(f"BadOperands@{i}: mul takes 2 operands")
            elif dw != sum(ws):
                diags.append(
                    f"WidthMismatch@{i}: mul dest {dw} != operand sum "
                    f"{sum(ws)}")
        elif kind in ("shl", "shr"):
            if nops != 1 or ins.imm is None:
                diags.append(f"BadOperands@{i}: {kind} takes 1 operand + imm")
            else:
                bound = dw if kind == "shl" else ws[0]
                if not 0 <= ins.imm < bound:
                    diags.append(f"BadShift@{i}: shift {ins.imm} of {bound}")
        elif kind in ("and", "or"):
            if nops != 2:
                diags.append(f"BadOperands@{i}: {kind} takes 2 operands")
            elif dw != max(ws):
                diags.append(
                    f"WidthMismatch@{i}: {kind} dest {dw} != max operand "
                    f"{max(ws)}")
        elif kind in ("lt", "eq"):
            if nops != 2:
                diags.append(f"BadOperands@{i}: {kind} takes 2 operands")
            elif dw != 1:
                diags.append(f"WidthMismatch@{i}: {kind} dest must be a flag")
        elif kind == "select":
            if nops != 3:
                diags.append(f"BadOperands@{i}: select takes cond, a, b")
            else:
                if ws[0] != 1:
                    diags.append(f"NonFlagCond@{i}: cond width {ws[0]}")
                if not (dw == ws[1] == ws[2]):
                    diags.append(
                        f"WidthMismatch@{i}: select widths {dw}/{ws[1]}/"
                        f"{ws[2]}")
        elif kind in ("exthi", "extlo"):
            if nops != 1:
                diags.append(f"BadOperands@{i}: {kind} takes 1 operand")
            elif dw > ws[0]:
                diags.append(
                    f"WidthMismatch@{i}: {kind} dest {dw} wider than "
                    f"source {ws[0]}")
        elif kind == "concat":
            if nops != 2:
                diags.append(f"BadOperands@{i}: concat takes hi, lo")
            elif dw != sum(ws):
                diags.append(
                    f"WidthMismatch@{i}: concat dest {dw} != {sum(ws)}")
        defined[ins.dest.name] = ins.dest

    for v in program.outputs:
        known = defined.get(v.name)
        if known is None:
            diags.append(f"OutputUndefined: {v.name}")
        elif known.width != v.width:
            diags.append(
                f"WidthMismatch@output: {v.name} at {v.width}, defined at "
                f"{known.width}")
    return diags


def _eval_instr(ins: Instr, env: dict[str, int]) -> int:
    vals = []
    ws = []
    for op in ins.operands:
        if isinstance(op, Var):
            vals.append(env[op.name])
            ws.append(op.width)
        else:
            vals.append(int(op))
            ws.append(_operand_width(op))
    k = ins.kind
    if k == "const":
        return ins.imm  # type: ignore[return-value]
    if k == "add":
        return sum(vals)
    if k == "sub":
        return vals[0] - vals[1]
    if k == "mul":
        return vals[0] * vals[1]
    if k == "shl":
        return vals[0] << ins.imm  # type: ignore[operator]
    if k == "shr":
        return vals[0] >> ins.imm  # type: ignore[operator]
    if k == "and":
        return vals[0] & vals[1]
    if k == "or":
        return vals[0] | vals[1]
    if k == "lt":
        return int(vals[0] < vals[1])
    if k == "eq":
        return int(vals[0] == vals[1])
    if k == "select":
        return vals[1] if vals[0] else vals[2]
    if k == "exthi":
        return vals[0] >> (ws[0] - ins.dest.width)
    if k == "extlo":
        return vals[0]
    if k == "concat":
        return (vals[0] << ws[1]) | vals[1]
    raise AssertionError(f"unreachable kind {k}")


def interpret(program: Program, inputs: Iterable[int], *,
              strict: bool = False) -> list[int]:
    """Evaluate the program on exact integers, returning output values.

    Inputs are taken in declared order and must fit their widths.  In
    strict mode every assignment must fit its declared width (wrapping
    kinds excepted); otherwise values silently truncate, which is the
    behaviour of the emitted machine code.
    """
    vals = list(inputs)
    if len(vals) != len(program.inputs):
        raise InputOutOfRange(
            f"{program.name}: expected {len(program.inputs)} inputs, got "
            f"{len(vals)}")
    env: dict[str, int] = {}
    for var, v in zip(program.inputs, vals):
        if not 0 <= v < (1 << var.width):
            raise InputOutOfRange(
                f"{program.name}: input {var.name} = {v} does not fit "
                f"{var.width} bits")
        env[var.name] = v
    for i, ins in enumerate(program.body):
        raw = _eval_instr(ins, env)
        masked = raw & ((1 << ins.dest.width) - 1)
        if strict and raw != masked and ins.kind not in _TRUNCATING:
            raise WidthOverflow(i, ins, raw)
        env[ins.dest.name] = masked
    return [env[v.name] for v in program.outputs]


def compile_program(program: Program) -> Callable[[list[int]], list[int]]:
    """Compile to a Python function for bulk evaluation.

    Semantics match non-strict :func:`interpret`.  Variables become
    positional locals, so IR names never reach ``exec``.
    """
    names: dict[str, str] = {}
    for idx, v in enumerate(program.inputs):
        names[v.name] = f"l{idx}"
    lines = ["def _kernel(args):"]
    if program.inputs:
        unpack = ", ".join(names[v.name] for v in program.inputs)
        trail = "," if len(program.inputs) == 1 else ""
        lines.append(f"    {unpack}{trail} = args")
    base = len(program.inputs)
    for i, ins in enumerate(program.body):
        dest = f"l{base + i}"
        ops = []
        ws = []
        for op in ins.operands:
            if isinstance(op, Var):
                ops.append(names[op.name])
                ws.append(op.width)
            else:
                ops.append(str(int(op)))
                ws.append(_operand_width(op))
        mask = (1 << ins.dest.width) - 1
        k = ins.kind
        if k == "const":
            expr = str(ins.imm)
        elif k == "add":
            expr = " + ".join(ops)
            if sum((1 << w) - 1 for w in ws) > mask:
                expr = f"({expr}) & {mask}"
        elif k == "sub":
            expr = f"({ops[0]} - {ops[1]}) & {mask}"
        elif k == "mul":
            expr = f"{ops[0]} * {ops[1]}"
        elif k == "shl":
            expr = f"({ops[0]} << {ins.imm}) & {mask}"
        elif k == "shr":
            expr = f"({ops[0]} >> {ins.imm})"
            if (1 << ws[0]) - 1 >> ins.imm > mask:  # type: ignore[operator]
                expr = f"{expr} & {mask}"
        elif k == "and":
            expr = f"{ops[0]} & {ops[1]}"
        elif k == "or":
            expr = f"{ops[0]} | {ops[1]}"
        elif k == "lt":
            expr = f"1 if {ops[0]} < {ops[1]} else 0"
        elif k == "eq":
            expr = f"1 if {ops[0]} == {ops[1]} else 0"
        elif k == "select":
            expr = f"{ops[1]} if {ops[0]} else {ops[2]}"
        elif k == "exthi":
            expr = f"{ops[0]} >> {ws[0] - ins.dest.width}"
        elif k == "extlo":
            expr = f"{ops[0]} & {mask}"
        elif k == "concat":
            expr = f"({ops[0]} << {ws[1]}) | {ops[1]}"
        else:
            raise AssertionError(f"unreachable kind {k}")
        lines.append(f"    {dest} = {expr}")
        names[ins.dest.name] = dest
    rets = ", ".join(names[v.name] for v in program.outputs)
    lines.append(f"    return [{rets}]")
    ns: dict = {}
    exec(compile("\n".join(lines), f"<widemod:{program.name}>", "exec"), ns)
    return ns["_kernel"]


def count_ops(program: Program, word_bits: int | None = None) -> dict:
    """Histogram of instructions keyed by ``(kind, width class)``.

    The width class is ``"word"`` when the widest operand fits the machine
    word and ``"wide"`` otherwise.  The word size comes from the program's
    ``omega0`` attribute unless given explicitly.  Totals always equal the
    body length.
    """
    if word_bits is None:
        word_bits = program.attributes.get("omega0", 0)
        if not word_bits:
            word_bits = max((v.width for v in program.inputs), default=1)
    counts: dict[tuple[str, str], int] = {}
    for ins in program.body:
        if ins.operands:
            w = max(_operand_width(op) for op in ins.operands)
        else:
            w = ins.dest.width
        cls = "word" if w <= word_bits else "wide"
        key = (ins.kind, cls)
        counts[key] = counts.get(key, 0) + 1
    return counts


def program_to_json(program: Program) -> str:
    """Stable JSON form for golden-file comparisons."""
    def var(v: Var) -> list:
        return [v.name, v.width]

    def operand(op: Operand):
        return var(op) if isinstance(op, Var) else int(op)

    doc = {
        "name": program.name,
        "inputs": [var(v) for v in program.inputs],
        "outputs": [var(v) for v in program.outputs],
        "body": [
            {
                "kind": ins.kind,
                "dest": var(ins.dest),
                "operands": [operand(op) for op in ins.operands],
                "imm": ins.imm,
            }
            for ins in program.body
        ],
        "attributes": program.attributes,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def program_from_json(text: str) -> Program:
    doc = json.loads(text)

    def var(v) -> Var:
        return Var(v[0], v[1])

    def operand(op) -> Operand:
        return var(op) if isinstance(op, list) else int(op)

    return Program(
        name=doc["name"],
        inputs=tuple(var(v) for v in doc["inputs"]),
        outputs=tuple(var(v) for v in doc["outputs"]),
        body=tuple(
            Instr(kind=e["kind"], dest=var(e["dest"]),
                  operands=tuple(operand(op) for op in e["operands"]),
                  imm=e["imm"])
            for e in doc["body"]
        ),
        attributes=doc.get("attributes", {}),
    )
