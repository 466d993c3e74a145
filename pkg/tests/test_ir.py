import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from widemod.ir import (
    KINDS,
    InputOutOfRange,
    Instr,
    Program,
    Var,
    WidthOverflow,
    compile_program,
    count_ops,
    interpret,
    program_from_json,
    program_to_json,
    validate,
)


def prog(body, inputs=(), outputs=(), name="t", attrs=None):
    return Program(name=name, inputs=tuple(inputs), outputs=tuple(outputs),
                   body=tuple(body), attributes=attrs or {})


A8 = Var("a", 8)
B8 = Var("b", 8)


def test_kinds_catalogue():
    assert len(KINDS) == 14
    assert "select" in KINDS and "concat" in KINDS


def test_validate_ok_and_split_roundtrip():
    p = prog(
        [
            Instr("exthi", Var("hi", 4), (A8,)),
            Instr("extlo", Var("lo", 4), (A8,)),
            Instr("concat", Var("back", 8), (Var("hi", 4), Var("lo", 4))),
        ],
        inputs=[A8], outputs=[Var("back", 8)])
    assert validate(p) == []
    assert interpret(p, [0xAB]) == [0xAB]
    hi, lo = interpret(prog(p.body[:2], [A8],
                            [Var("hi", 4), Var("lo", 4)]), [0xAB])
    assert (hi, lo) == (0xA, 0xB)


@pytest.mark.parametrize("body,needle", [
    ([Instr("xor", Var("x", 8), (A8, B8))], "UnknownKind"),
    ([Instr("add", Var("a", 9), (A8, B8))], "DuplicateDef"),
    ([Instr("add", Var("x", 8), (Var("ghost", 8), B8))], "UseBeforeDef"),
    ([Instr("add", Var("x", 8), (Var("a", 4), B8))], "WidthMismatch"),
    ([Instr("add", Var("x", 10), (A8, B8))], "wider than natural"),
    ([Instr("sub", Var("x", 9), (A8, B8))], "sub dest"),
    ([Instr("mul", Var("x", 8), (A8, B8))], "mul dest"),
    ([Instr("shl", Var("x", 8), (A8,), imm=8)], "BadShift"),
    ([Instr("shr", Var("x", 8), (A8,), imm=8)], "BadShift"),
    ([Instr("lt", Var("x", 8), (A8, B8))], "must be a flag"),
    ([Instr("eq", Var("x", 2), (A8, B8))], "must be a flag"),
    ([Instr("select", Var("x", 8), (A8, A8, B8))], "NonFlagCond"),
    ([Instr("exthi", Var("x", 9), (A8,))], "wider than source"),
    ([Instr("concat", Var("x", 12), (A8, B8))], "concat dest"),
    ([Instr("const", Var("x", 4), imm=16)], "const 16 in 4 bits"),
    ([Instr("const", Var("x", 4), (A8,), imm=1)], "imm only"),
], ids=lambda v: v if isinstance(v, str) else "")
def test_validate_diagnostics(body, needle):
    msgs = validate(prog(body, inputs=[A8, B8]))
    assert any(needle in m for m in msgs), msgs


def test_validate_output_rules():
    assert validate(prog([], outputs=[Var("x", 8)])) == ["OutputUndefined: x"]
    p = prog([Instr("const", Var("x", 8), imm=3)], outputs=[Var("x", 4)])
    assert any("WidthMismatch@output" in m for m in validate(p))


def test_validate_narrow_add_is_legal():
    # carry-in style: flag + two words into a word-width destination
    p = prog([Instr("add", Var("s", 8), (Var("c", 1), A8, B8))],
             inputs=[Var("c", 1), A8, B8], outputs=[Var("s", 8)])
    assert validate(p) == []


def test_interpret_add_with_carry_flag():
    p = prog(
        [
            Instr("add", Var("s", 9), (A8, B8)),
            Instr("exthi", Var("carry", 1), (Var("s", 9),)),
            Instr("extlo", Var("low", 8), (Var("s", 9),)),
        ],
        inputs=[A8, B8], outputs=[Var("carry", 1), Var("low", 8)])
    assert interpret(p, [200, 100]) == [1, 44]
    assert interpret(p, [3, 4]) == [0, 7]


def test_interpret_strict_flags_narrow_add():
    p = prog([Instr("add", Var("s", 8), (A8, B8))],
             inputs=[A8, B8], outputs=[Var("s", 8)])
    assert interpret(p, [200, 100]) == [44]  # non-strict truncates
    with pytest.raises(WidthOverflow) as exc:
        interpret(p, [200, 100], strict=True)
    assert exc.value.value == 300
    assert interpret(p, [3, 4], strict=True) == [7]


def test_interpret_strict_never_flags_truncating_kinds():
    p = prog(
        [
            Instr("sub", Var("d", 8), (A8, B8)),
            Instr("shl", Var("x", 8), (Var("d", 8),), imm=4),
            Instr("extlo", Var("y", 4), (Var("x", 8),)),
        ],
        inputs=[A8, B8], outputs=[Var("y", 4)])
    # 0-1 wraps to 0xFF, shifts to 0xF0, low nibble 0; no strict error
    assert interpret(p, [0, 1], strict=True) == [0]


def test_interpret_input_checks():
    p = prog([], inputs=[A8], outputs=[A8])
    with pytest.raises(InputOutOfRange):
        interpret(p, [])
    with pytest.raises(InputOutOfRange):
        interpret(p, [256])
    assert interpret(p, [255]) == [255]


_W = (1, 4, 8, 16)


@st.composite
def straightline(draw):
    """Random validated program plus in-range inputs for it."""
    inputs = tuple(Var(f"in{i}", draw(st.sampled_from(_W)))
                   for i in range(draw(st.integers(1, 3))))
    avail = list(inputs)
    body = []

    def pick():
        return avail[draw(st.integers(0, len(avail) - 1))]

    for i in range(draw(st.integers(1, 14))):
        kind = draw(st.sampled_from(sorted(KINDS)))
        dest = None
        if kind == "const":
            w = draw(st.sampled_from(_W))
            ins = Instr("const", Var(f"v{i}", w),
                        imm=draw(st.integers(0, (1 << w) - 1)))
        elif kind == "add":
            ops = (pick(), pick())
            natural = sum((1 << o.width) - 1 for o in ops).bit_length()
            ins = Instr("add", Var(f"v{i}", natural), ops)
        elif kind in ("sub", "and", "or"):
            ops = (pick(), pick())
            ins = Instr(kind, Var(f"v{i}", max(o.width for o in ops)), ops)
        elif kind == "mul":
            ops = (pick(), pick())
            ins = Instr("mul", Var(f"v{i}", sum(o.width for o in ops)), ops)
        elif kind in ("shl", "shr"):
            src = pick()
            w = src.width if kind == "shr" else draw(st.sampled_from(_W))
            ins = Instr(kind, Var(f"v{i}", w), (src,),
                        imm=draw(st.integers(0, w - 1)))
        elif kind in ("lt", "eq"):
            ins = Instr(kind, Var(f"v{i}", 1), (pick(), pick()))
        elif kind == "select":
            a = pick()
            same = [v for v in avail if v.width == a.width]
            b = same[draw(st.integers(0, len(same) - 1))]
            flags = [v for v in avail if v.width == 1]
            if not flags:
                continue
            cond = flags[draw(st.integers(0, len(flags) - 1))]
            ins = Instr("select", Var(f"v{i}", a.width), (cond, a, b))
        elif kind in ("exthi", "extlo"):
            src = pick()
            ins = Instr(kind, Var(f"v{i}", draw(st.integers(1, src.width))),
                        (src,))
        else:  # concat
            ops = (pick(), pick())
            ins = Instr("concat", Var(f"v{i}", sum(o.width for o in ops)),
                        ops)
        dest = ins.dest
        body.append(ins)
        avail.append(dest)
    n_out = draw(st.integers(1, min(3, len(avail))))
    outputs = tuple(avail[draw(st.integers(0, len(avail) - 1))]
                    for _ in range(n_out))
    # SSA outputs may repeat a var; dedupe to keep the JSON form canonical
    outputs = tuple(dict.fromkeys(outputs))
    p = prog(body, inputs, outputs, name="fuzz")
    vals = [draw(st.integers(0, (1 << v.width) - 1)) for v in inputs]
    return p, vals


@given(straightline())
@settings(max_examples=300)
def test_random_programs_validate_and_agree(case):
    p, vals = case
    assert validate(p) == []
    ref = interpret(p, vals)
    assert interpret(p, vals) == ref  # deterministic
    assert compile_program(p)(vals) == ref
    try:
        strict = interpret(p, vals, strict=True)
    except WidthOverflow:
        pass
    else:
        assert strict == ref


@given(straightline())
@settings(max_examples=100)
def test_renaming_preserves_semantics(case):
    p, vals = case
    table = {v.name: f"r_{j}" for j, v in
             enumerate(list(p.inputs) + [i.dest for i in p.body])}

    def ren(v):
        return Var(table[v.name], v.width)

    def renop(op):
        return ren(op) if isinstance(op, Var) else op

    q = Program(
        name=p.name,
        inputs=tuple(ren(v) for v in p.inputs),
        outputs=tuple(ren(v) for v in p.outputs),
        body=tuple(Instr(i.kind, ren(i.dest),
                         tuple(renop(o) for o in i.operands), i.imm)
                   for i in p.body),
        attributes={},
    )
    assert validate(q) == []
    assert interpret(q, vals) == interpret(p, vals)


@given(straightline())
@settings(max_examples=100)
def test_json_roundtrip(case):
    p, _ = case
    text = program_to_json(p)
    back = program_from_json(text)
    assert back == p
    assert program_to_json(back) == text


def test_count_ops_totals_and_classes():
    p = prog(
        [
            Instr("mul", Var("t", 16), (A8, B8)),
            Instr("shr", Var("h", 16), (Var("t", 16),), imm=8),
            Instr("extlo", Var("l", 8), (Var("t", 16),)),
        ],
        inputs=[A8, B8], outputs=[Var("l", 8)],
        attrs={"omega0": 8})
    got = count_ops(p)
    assert got == {("mul", "word"): 1, ("shr", "wide"): 1,
                   ("extlo", "wide"): 1}
    assert sum(got.values()) == len(p.body)
    # explicit word size overrides the attribute
    wide16 = count_ops(p, word_bits=16)
    assert all(cls == "word" for _, cls in wide16)


def test_count_ops_empty():
    assert count_ops(prog([], inputs=[A8], outputs=[A8])) == {}
