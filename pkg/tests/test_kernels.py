import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from widemod.ir import count_ops, interpret, validate
from widemod.kernels import (
    InvalidKernel,
    KernelSpec,
    WordLayout,
    bit_reverse_order,
    build_ntt,
    build_program,
    build_scalar,
    build_vector,
    build_wide_mul,
    butterfly_schedule,
    from_words,
    generate_kernel,
    make_spec,
    run_ntt,
    run_program,
    run_vector,
    to_words,
    twiddle_table,
    zero_input_words,
)
from widemod.oracle import NttParams, compute_barrett, find_ntt_params

# q=500 sits in the 13-bit modulus range; the layout pads to 16 bits
Q500 = compute_barrett(500, 13)
L13 = WordLayout(13, 8)


def test_word_layout():
    lay = WordLayout(24, 8)
    assert (lay.words, lay.padded_words, lay.padded_bits) == (3, 4, 32)
    assert WordLayout(12, 8).padded_bits == 16
    assert WordLayout(16, 16).padded_words == 1
    assert WordLayout(1024, 64).padded_words == 16


def test_word_layout_rejects_bad_shapes():
    with pytest.raises(InvalidKernel):
        WordLayout(16, 12)
    with pytest.raises(InvalidKernel):
        WordLayout(4, 8)


def test_kernel_spec_validation():
    lay = WordLayout(16, 8)
    bp = compute_barrett(4093, 16)
    nt = find_ntt_params(16, 4)
    with pytest.raises(InvalidKernel):
        KernelSpec("frobnicate", lay, 1, bp)
    with pytest.raises(InvalidKernel):
        KernelSpec("mulmod", lay, 2, bp)
    with pytest.raises(InvalidKernel):
        KernelSpec("vadd", lay, 0, bp)
    with pytest.raises(InvalidKernel):
        KernelSpec("ntt", lay, 4, bp, None)
    with pytest.raises(InvalidKernel):
        KernelSpec("ntt", lay, 8, compute_barrett(nt.p, 16), nt)
    with pytest.raises(InvalidKernel):
        KernelSpec("addmod", lay, 1, None)
    with pytest.raises(InvalidKernel):
        KernelSpec("addmod", lay, 1, compute_barrett(13, 8))
    KernelSpec("ntt", lay, 4, compute_barrett(nt.p, 16), nt)


def test_make_spec_choices():
    spec = make_spec("mulmod", 16, 8)
    assert spec.barrett.q == 4093
    ntt = make_spec("ntt", 16, 8, size=8)
    assert ntt.ntt.p == 4073
    assert ntt.barrett.q == 4073
    wm = make_spec("widemul", 64, 8)
    assert wm.barrett is None and wm.ntt is None


def test_build_scalar_pinned_values():
    addmod = build_scalar("addmod", L13, Q500)
    assert validate(addmod) == []
    assert interpret(addmod, [300, 400]) == [200]
    submod = build_scalar("submod", L13, Q500)
    assert interpret(submod, [100, 300]) == [300]
    mulmod = build_scalar("mulmod", WordLayout(16, 8),
                          compute_barrett(4093, 16))
    assert interpret(mulmod, [3000, 2000]) == [3755]


@given(st.integers(0, 499), st.integers(0, 499))
@settings(max_examples=200)
def test_build_scalar_matches_oracle(a, b):
    for kind, want in [("addmod", (a + b) % 500),
                       ("submod", (a - b) % 500),
                       ("mulmod", a * b % 500)]:
        prog = build_scalar(kind, L13, Q500)
        assert interpret(prog, [a, b], strict=True) == [want]


def test_build_scalar_runtime_mode_takes_params_as_inputs():
    prog = build_scalar("mulmod", WordLayout(16, 8),
                        compute_barrett(4093, 16), params_mode="runtime")
    names = [v.name for v in prog.inputs]
    assert names == ["a", "b", "q", "mu"]
    assert interpret(prog, [3000, 2000, 4093, 32792]) == [3755]
    # the runner injects the baked attribute values
    assert run_program(prog, 3000, 2000) == 3755


def test_build_vector_pinned_values():
    vadd = build_vector("vadd", L13, 4, Q500)
    assert run_vector(vadd, [300, 499, 0, 250], [400, 1, 0, 250]) == \
        [200, 0, 0, 0]
    axpy = build_vector("axpy", L13, 3, Q500)
    assert run_vector(axpy, 0, [5, 6, 7], [9, 8, 7]) == [9, 8, 7]
    vmul = build_vector("vmul", L13, 3, Q500)
    assert run_vector(vmul, [1, 1, 1], [123, 456, 499]) == [123, 456, 499]


@given(st.data())
@settings(max_examples=60, deadline=None)
def test_build_vector_matches_oracle(data):
    n = 4
    q = Q500.q
    elems = st.lists(st.integers(0, q - 1), min_size=n, max_size=n)
    x, y = data.draw(elems), data.draw(elems)
    a = data.draw(st.integers(0, q - 1))
    assert run_vector(build_vector("vsub", L13, n, Q500), x, y) == \
        [(u - v) % q for u, v in zip(x, y)]
    assert run_vector(build_vector("axpy", L13, n, Q500), a, x, y) == \
        [(a * u + v) % q for u, v in zip(x, y)]


def test_vector_length_checks():
    vadd = build_vector("vadd", L13, 4, Q500)
    with pytest.raises(ValueError):
        run_vector(vadd, [1, 2, 3], [1, 2, 3, 4])
    with pytest.raises(InvalidKernel):
        build_vector("addmod", L13, 4, Q500)
    with pytest.raises(InvalidKernel):
        build_vector("vadd", L13, 0, Q500)


def test_twiddle_table_pinned():
    assert twiddle_table(find_ntt_params(8, 4)) == [1, 5]
    p17 = NttParams(n=8, p=17, root=2, root_inv=9, n_inv=15)
    assert twiddle_table(p17) == [1, 2, 4, 8]
    assert twiddle_table(p17, inverse=True) == [1, 9, 13, 15]
    for width, n in [(16, 8), (16, 32), (128, 16)]:
        assert twiddle_table(find_ntt_params(width, n))[0] == 1


def test_ntt_pinned_transforms():
    prog = build_ntt("ntt", WordLayout(8, 8), find_ntt_params(8, 4))
    assert validate(prog) == []
    assert run_ntt(prog, [1, 0, 0, 0]) == [1, 1, 1, 1]
    assert run_ntt(prog, [1, 1, 1, 1]) == [4, 0, 0, 0]
    assert run_ntt(prog, [1, 2, 3, 4]) == [10, 1, 11, 8]


def test_ntt_inverse_roundtrip_small():
    params = find_ntt_params(8, 4)
    fwd = build_ntt("ntt", WordLayout(8, 8), params)
    inv = build_ntt("intt", WordLayout(8, 8), params)
    r = random.Random(3)
    for _ in range(25):
        vec = [r.randrange(13) for _ in range(4)]
        assert run_ntt(inv, run_ntt(fwd, vec)) == vec


def test_build_ntt_rejects_bad_length():
    with pytest.raises(InvalidKernel):
        build_ntt("ntt", WordLayout(16, 8),
                  NttParams(n=3, p=13, root=3, root_inv=9, n_inv=9))
    with pytest.raises(InvalidKernel):
        build_ntt("addmod", WordLayout(16, 8), find_ntt_params(16, 4))


def test_bit_reverse_order():
    assert bit_reverse_order(1) == [0]
    assert bit_reverse_order(2) == [0, 1]
    assert bit_reverse_order(8) == [0, 4, 2, 6, 1, 5, 3, 7]
    for n in (4, 16, 64):
        rev = bit_reverse_order(n)
        assert sorted(rev) == list(range(n))
        assert all(rev[rev[i]] == i for i in range(n))
    with pytest.raises(InvalidKernel):
        bit_reverse_order(3)


@pytest.mark.parametrize("n", [2, 4, 8, 16, 32, 64])
def test_butterfly_schedule_shape(n):
    sched = butterfly_schedule(n)
    assert len(sched) == (n // 2) * (n.bit_length() - 1)  # (n/2) log2(n)
    stages = (n.bit_length() - 1)
    per_stage = n // 2
    for s in range(stages):
        stage = sched[s * per_stage:(s + 1) * per_stage]
        touched = [i for top, bot, _ in stage for i in (top, bot)]
        assert sorted(touched) == list(range(n))
        assert all(exp < n // 2 for _, _, exp in stage)


def test_butterfly_schedule_rejects():
    with pytest.raises(InvalidKernel):
        butterfly_schedule(1)
    with pytest.raises(InvalidKernel):
        butterfly_schedule(6)


def test_words_roundtrip():
    assert to_words(0x0102, 2, 8) == [1, 2]
    assert from_words([1, 2], 8) == 0x0102
    assert to_words(5, 4, 8) == [0, 0, 0, 5]


@given(st.integers(0, (1 << 64) - 1), st.sampled_from([8, 16, 32, 64]))
def test_words_roundtrip_property(value, width):
    count = 64 // width
    assert from_words(to_words(value, count, width), width) == \
        value % (1 << 64)


def test_zero_input_words_frozen():
    lowered = generate_kernel(make_spec("mulmod", 24, 8), prune=False)
    assert zero_input_words(lowered) == {"a__0__0", "b__0__0"}
    lowered12 = generate_kernel(make_spec("mulmod", 12, 8), prune=False)
    assert zero_input_words(lowered12) == {"a__0", "b__0"}
    # power-of-two widths have no padding to exploit
    aligned = generate_kernel(make_spec("mulmod", 16, 8), prune=False)
    assert zero_input_words(aligned) == set()
    assert zero_input_words(build_wide_mul(WordLayout(24, 8))) == set()


def test_zero_input_words_runtime_mu():
    prog = generate_kernel(make_spec("mulmod", 24, 8),
                           params_mode="runtime", prune=False)
    zeros = zero_input_words(prog)
    # q is bounded by mbits = 20 like the operands; mu by mbits+4 = 24,
    # which still leaves the top padding word (bits 24..31) clear
    assert zeros == {"a__0__0", "b__0__0", "q__0__0", "mu__0__0"}


def test_generate_kernel_frozen_sizes():
    mul = generate_kernel(make_spec("mulmod", 16, 8))
    assert len(mul.body) == 110
    add = generate_kernel(make_spec("addmod", 16, 8))
    assert len(add.body) == 24
    assert validate(mul) == [] and validate(add) == []


def test_generate_kernel_strict_clean():
    prog = generate_kernel(make_spec("mulmod", 16, 8))
    q = 4093
    r = random.Random(9)
    for _ in range(100):
        a, b = r.randrange(q), r.randrange(q)
        flat = to_words(a, 2, 8) + to_words(b, 2, 8)
        got = interpret(prog, flat, strict=True)
        assert from_words(got, 8) == a * b % q


def test_run_program_widemul_output_is_double_width():
    prog = generate_kernel(make_spec("widemul", 16, 8))
    assert run_program(prog, 0xFFFF, 0xFFFF) == 0xFFFF * 0xFFFF
    assert run_program(prog, 1234, 4321) == 1234 * 4321


def test_run_program_arity_check():
    prog = generate_kernel(make_spec("addmod", 16, 8))
    with pytest.raises(TypeError):
        run_program(prog, 1, 2, 3)


def test_run_ntt_length_check():
    prog = build_ntt("ntt", WordLayout(8, 8), find_ntt_params(8, 4))
    with pytest.raises(ValueError):
        run_ntt(prog, [1, 2, 3])


def test_build_program_dispatch():
    for kind, bits, size in [("addmod", 16, 1), ("vadd", 16, 4),
                             ("ntt", 16, 4), ("widemul", 16, 1)]:
        spec = make_spec(kind, bits, 8, size=size)
        prog = build_program(spec)
        assert validate(prog) == []
        assert prog.attributes["kernel"] == kind
        assert prog.attributes["lambda"] == bits


def test_count_ops_wide_before_lowering():
    prog = build_program(make_spec("mulmod", 64, 8))
    counts = count_ops(prog)
    assert all(cls == "wide" for _, cls in counts)
    lowered = generate_kernel(make_spec("mulmod", 64, 8))
    # only the hi/lo splitters of double-word intermediates stay wide
    wide = {kind for kind, cls in count_ops(lowered) if cls == "wide"}
    assert wide <= {"exthi", "extlo"}
    assert ("mul", "wide") not in count_ops(lowered)
