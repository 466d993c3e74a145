"""Recursive lowering of wide programs onto narrower machine words.

One level of lowering halves the interface word: every variable of the
current width ``D`` becomes a most-significant-first pair of ``D/2``
words, ``D+1``-bit sums become a carry flag plus a pair, and ``2D``-bit
product intermediates become four words.  Wide instructions are rewritten
into word instructions:

* double-word add      -> two adds with carry extraction
* double-word subtract -> wordwise wrapping subtract with borrow chain
* double-word compare  -> lexicographic lt/eq fold, most significant first
* double-word multiply -> schoolbook (4 muls) or carry-aware Karatsuba
  (3 muls plus conditional adds, no signed arithmetic)
* multi-word shift     -> word drop when aligned, shift/or recombination
  otherwise
* extracts and concats on split values resolve to renames and cost nothing

Repeating the level until the interface word reaches the machine word
``omega0`` leaves a program whose only wider-than-word values are the
``2*omega0`` multiply/add intermediates, which map onto a native double
word in C.  For targets without one, a final extra level halves the word
once more so every intermediate fits ``omega0``.

Variables whose width is at most the target word (flags, small carry
accumulator words) pass through a level untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ir import Instr, Program, Var, validate

STRATEGIES = ("schoolbook", "karatsuba")


class UnsupportedWidth(ValueError):
    """A variable width does not fit the lowering level's width classes."""


class ShiftOutOfRange(ValueError):
    """Shift amount outside the operand's total bit range."""


@dataclass(frozen=True)
class RewriteConfig:
    omega0: int = 64
    mul_strategy: str = "schoolbook"
    target_has_double_word: bool = True

    def __post_init__(self) -> None:
        if self.omega0 not in (8, 16, 32, 64):
            raise UnsupportedWidth(
                f"machine word must be 8/16/32/64 bits, got {self.omega0}")
        if self.mul_strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.mul_strategy!r}")


@dataclass(frozen=True)
class SplitMap:
    """Where each split variable's words went, plus words known zero."""

    mapping: dict
    known_zero: frozenset = frozenset()


class Ctx:
    """Collects instructions and hands out deterministic fresh names."""

    def __init__(self, prefix: str = "t"):
        self.body: list[Instr] = []
        self.prefix = prefix
        self.counter = 0
        self._consts: dict[tuple[int, int], Var] = {}

    def fresh(self, width: int) -> Var:
        v = Var(f"{self.prefix}{self.counter}", width)
        self.counter += 1
        return v

    def emit(self, kind: str, width: int, operands=(), imm: int | None = None) -> Var:
        dest = self.fresh(width)
        self.body.append(Instr(kind, dest, tuple(operands), imm))
        return dest

    def emit_raw(self, instr: Instr) -> Var:
        self.body.append(instr)
        return instr.dest

    def const(self, width: int, value: int) -> Var:
        key = (width, value)
        v = self._consts.get(key)
        if v is None:
            v = self.emit("const", width, imm=value)
            self._consts[key] = v
        return v


def _addchain(ctx: Ctx, terms, wordw: int, narrow: bool = False):
    """Add up to three terms; return ``(carry flag or None, word)``."""
    terms = [t for t in terms if t is not None]
    if not terms:
        return None, None
    if len(terms) == 1:
        return None, terms[0]
    natural = sum((1 << t.width) - 1 for t in terms).bit_length()
    if narrow:
        return None, ctx.emit("add", min(wordw, natural), terms)
    s = ctx.emit("add", natural, terms)
    if natural <= wordw:
        return None, s
    if natural > wordw + 1:
        # carry-out no longer fits a flag; callers keep per-position
        # sums to two full words plus flags so this cannot happen
        raise UnsupportedWidth(
            f"{natural}-bit sum of {len(terms)} terms overflows the carry flag")
    carry = ctx.emit("exthi", 1, [s])
    word = ctx.emit("extlo", wordw, [s])
    return carry, word


def mw_add(ctx: Ctx, lists, wordw: int, narrow_top: bool = False):
    """Ripple-carry addition of word lists (MSW first, ``None`` = zero).

    Returns ``(carry, words)``; with ``narrow_top`` the top word absorbs
    the final carry into a word-width destination (caller must know the
    sum fits, the strict interpreter checks it does).
    """
    k = max(len(l) for l in lists)
    padded = [[None] * (k - len(l)) + list(l) for l in lists]
    out = [None] * k
    carry = None
    for j in range(k - 1, -1, -1):
        terms = [l[j] for l in padded] + [carry]
        carry, out[j] = _addchain(ctx, terms, wordw,
                                  narrow=narrow_top and j == 0)
    return carry, out


def mw_sub(ctx: Ctx, a, b, wordw: int):
    """Wordwise wrapping subtraction with borrow chain, borrow-out dropped.

    Callers only subtract where the full result is nonnegative, mirroring
    the generated kernels, so the final borrow carries no information.
    """
    k = max(len(a), len(b))
    a = [None] * (k - len(a)) + list(a)
    b = [None] * (k - len(b)) + list(b)
    out = [None] * k
    borrow = None
    for j in range(k - 1, -1, -1):
        x, y = a[j], b[j]
        if y is None and borrow is None:
            out[j] = x
            continue
        if x is None:
            x = ctx.const(wordw, 0)
        t = x
        bflag = None
        if y is not None:
            nt = ctx.emit("sub", max(t.width, y.width), [t, y])
            bflag = ctx.emit("lt", 1, [t, y])
            t = nt
        if borrow is not None:
            nt = ctx.emit("sub", t.width, [t, borrow])
            b2 = ctx.emit("lt", 1, [t, borrow])
            t = nt
            bflag = b2 if bflag is None else ctx.emit("or", 1, [bflag, b2])
        out[j] = t
        borrow = bflag
    return out


def mw_lt(ctx: Ctx, a, b, wordw: int) -> Var:
    """Lexicographic unsigned less-than over word lists, MSW dominant."""
    def word(x):
        return x if x is not None else ctx.const(wordw, 0)

    k = max(len(a), len(b))
    a = [None] * (k - len(a)) + list(a)
    b = [None] * (k - len(b)) + list(b)
    acc = None
    for j in range(k - 1, -1, -1):
        x, y = word(a[j]), word(b[j])
        less = ctx.emit("lt", 1, [x, y])
        if acc is None:
            acc = less
        else:
            same = ctx.emit("eq", 1, [x, y])
            tail = ctx.emit("and", 1, [same, acc])
            acc = ctx.emit("or", 1, [less, tail])
    return acc


def mw_eq(ctx: Ctx, a, b, wordw: int) -> Var:
    def word(x):
        return x if x is not None else ctx.const(wordw, 0)

    k = max(len(a), len(b))
    a = [None] * (k - len(a)) + list(a)
    b = [None] * (k - len(b)) + list(b)
    acc = None
    for j in range(k):
        same = ctx.emit("eq", 1, [word(a[j]), word(b[j])])
        acc = same if acc is None else ctx.emit("and", 1, [acc, same])
    return acc


def _wmul(ctx: Ctx, x: Var, y: Var, wordw: int):
    """Widening word multiply split into (hi, lo)."""
    t = ctx.emit("mul", x.width + y.width, [x, y])
    hi = ctx.emit("exthi", wordw, [t])
    lo = ctx.emit("extlo", wordw, [t])
    return hi, lo


def mw_mul(ctx: Ctx, a, b, wordw: int, strategy: str = "schoolbook"):
    """Pair-by-pair multiply producing four words, MSW first."""
    if len(a) != 2 or len(b) != 2 or None in a or None in b:
        raise UnsupportedWidth("pair multiply expects two full pairs")
    a0, a1 = a
    b0, b1 = b
    if strategy == "schoolbook":
        h0, h1 = _wmul(ctx, a0, b0, wordw)
        l0, l1 = _wmul(ctx, a1, b1, wordw)
        f0, f1 = _wmul(ctx, a0, b1, wordw)
        g0, g1 = _wmul(ctx, a1, b0, wordw)
        mc, m = mw_add(ctx, [[f0, f1], [g0, g1]], wordw)
        _, out = mw_add(ctx, [[h0, h1, l0, l1], [mc, m[0], m[1], None]],
                        wordw, narrow_top=True)
        return out
    if strategy != "karatsuba":
        raise ValueError(f"unknown strategy {strategy!r}")
    h0, h1 = _wmul(ctx, a0, b0, wordw)
    l0, l1 = _wmul(ctx, a1, b1, wordw)
    ca, sa = _addchain(ctx, [a0, a1], wordw)
    cb, sb = _addchain(ctx, [b0, b1], wordw)
    p0, p1 = _wmul(ctx, sa, sb, wordw)
    zero = ctx.const(wordw, 0)
    x1 = ctx.emit("select", wordw, [cb, sa, zero])
    x2 = ctx.emit("select", wordw, [ca, sb, zero])
    kk = ctx.emit("and", 1, [ca, cb])
    k1, w0 = _addchain(ctx, [p0, x1], wordw)
    k2, w1 = _addchain(ctx, [w0, x2], wordw)
    _, s01 = _addchain(ctx, [k1, k2], wordw)
    _, s012 = _addchain(ctx, [s01, kk], wordw)
    # (a0+a1)(b0+b1) = [s012, w1, p1]; subtracting both square terms
    # leaves the cross product a0*b1 + a1*b0, always nonnegative.
    m3 = mw_sub(ctx, [s012, w1, p1], [None, h0, h1], wordw)
    m3 = mw_sub(ctx, m3, [None, l0, l1], wordw)
    _, out = mw_add(ctx, [[h0, h1, l0, l1], [m3[0], m3[1], m3[2], None]],
                    wordw, narrow_top=True)
    return out


def mw_shr(ctx: Ctx, words, amount: int, wordw: int, out_count: int):
    """Logical right shift of a word list by an immediate."""
    k = len(words)
    if not 0 <= amount < k * wordw:
        raise ShiftOutOfRange(f"shift {amount} of a {k * wordw}-bit value")
    d, r = divmod(amount, wordw)
    u = list(reversed(words))  # LSW first for index arithmetic
    out = []
    for j in range(out_count):
        lo = u[j + d] if j + d < k else None
        hi = u[j + d + 1] if j + d + 1 < k else None
        if r == 0:
            out.append(lo)
            continue
        parts = []
        if lo is not None and lo.width > r:
            parts.append(ctx.emit("shr", wordw, [lo], imm=r))
        if hi is not None:
            parts.append(ctx.emit("shl", wordw, [hi], imm=wordw - r))
        if not parts:
            out.append(None)
        elif len(parts) == 1:
            out.append(parts[0])
        else:
            out.append(ctx.emit("or", wordw, parts))
    return list(reversed(out))


def mw_shl(ctx: Ctx, words, amount: int, wordw: int, out_count: int):
    k = len(words)
    if not 0 <= amount < out_count * wordw:
        raise ShiftOutOfRange(f"shift {amount} of a {out_count * wordw}-bit value")
    d, r = divmod(amount, wordw)
    u = list(reversed(words))
    out = []
    for j in range(out_count):
        src = u[j - d] if 0 <= j - d < k else None
        prev = u[j - d - 1] if 0 <= j - d - 1 < k else None
        if r == 0:
            out.append(src)
            continue
        parts = []
        if src is not None:
            parts.append(ctx.emit("shl", wordw, [src], imm=r))
        if prev is not None and prev.width > wordw - r:
            parts.append(ctx.emit("shr", wordw, [prev], imm=wordw - r))
        if not parts:
            out.append(None)
        elif len(parts) == 1:
            out.append(parts[0])
        else:
            out.append(ctx.emit("or", wordw, parts))
    return list(reversed(out))


def lower_mod_after_add(ctx: Ctx, carry, words, q_words, wordw: int):
    """Conditional subtract after an add: keep if sum < q, else sum - q."""
    diff = mw_sub(ctx, words, q_words, wordw)
    low_lt = mw_lt(ctx, words, q_words, wordw)
    if carry is None:
        less = low_lt
    else:
        no_carry = ctx.emit("eq", 1, [carry, 0])
        less = ctx.emit("and", 1, [no_carry, low_lt])
    return [ctx.emit("select", wordw, [less, s, d])
            for s, d in zip(words, diff)]


def lower_modsub(ctx: Ctx, a, b, q_words, wordw: int):
    """Modular subtract: wrapping difference, add q back when a < b."""
    diff = mw_sub(ctx, a, b, wordw)
    _, fixed = mw_add(ctx, [diff, q_words], wordw)
    under = mw_lt(ctx, a, b, wordw)
    return [ctx.emit("select", wordw, [under, f, d])
            for f, d in zip(fixed, diff)]


def lower_modmul_barrett(ctx: Ctx, a, b, q_words, mu_words, params, wordw: int,
                         strategy: str = "schoolbook"):
    """Barrett multiply-reduce over word lists.

    Full widening multiply, quotient estimate via the two shifts and the
    precomputed ``mu``, low-half multiply-subtract, then one conditional
    subtraction of ``q``.
    """
    k = len(a)
    prod = mw_mul(ctx, a, b, wordw, strategy)
    r1 = mw_shr(ctx, prod, params.shift1, wordw, k)
    est = mw_mul(ctx, r1, mu_words, wordw, strategy)
    r3 = mw_shr(ctx, est, params.shift2, wordw, k)
    back = mw_mul(ctx, r3, q_words, wordw, strategy)
    diff = mw_sub(ctx, prod[k:], back[k:], wordw)
    fixed = mw_sub(ctx, diff, q_words, wordw)
    less = mw_lt(ctx, diff, q_words, wordw)
    return [ctx.emit("select", wordw, [less, d, f])
            for d, f in zip(diff, fixed)]


class _Split:
    """Word decomposition of a wide variable at the current level."""

    __slots__ = ("flag", "words")

    def __init__(self, flag, words):
        self.flag = flag
        self.words = tuple(words)


def _concrete(ctx: Ctx, word, wordw: int) -> Var:
    return word if word is not None else ctx.const(wordw, 0)


def lower_once(program: Program, mul_strategy: str = "schoolbook",
               trace: list | None = None):
    """Apply one level of lowering; returns ``(program, SplitMap)``."""
    level = program.attributes.get("level_bits")
    if level is None:
        level = max((v.width for v in program.inputs), default=0)
    if level <= 0 or level % 2:
        raise UnsupportedWidth(f"cannot halve interface width {level}")
    dd = level          # current double word
    ww = level // 2     # target word
    ctx = Ctx(prefix=f"x{ww}_")
    env: dict[str, object] = {}
    mapping: dict[str, tuple] = {}

    def split_names(name: str, count: int):
        return tuple(Var(f"{name}__{i}", ww) for i in range(count))

    def word_count(width: int):
        if width == dd:
            return 2
        if width == 2 * dd:
            return 4
        return None

    new_inputs: list[Var] = []
    for v in program.inputs:
        if v.width <= ww:
            env[v.name] = v
            new_inputs.append(v)
            continue
        k = word_count(v.width)
        if k is None:
            raise UnsupportedWidth(
                f"input {v.name}: width {v.width} at level {dd}")
        words = split_names(v.name, k)
        env[v.name] = _Split(None, words)
        mapping[v.name] = tuple(w.name for w in words)
        new_inputs.extend(words)

    def bind_split(dest: Var, flag, words):
        sp = _Split(flag, words)
        env[dest.name] = sp
        names = tuple(w.name if w is not None else None for w in words)
        if flag is not None:
            names = (flag.name,) + names
        mapping[dest.name] = names
        return sp

    def view(op):
        if isinstance(op, int):
            return ("lit", op)
        bound = env[op.name]
        if isinstance(bound, Var):
            return ("pass", bound)
        return ("vec", bound)

    def as_words(op, pad_to=2):
        """Word list for an add/sub/compare operand."""
        tag, val = view(op)
        if tag == "vec":
            if val.flag is not None:
                raise UnsupportedWidth("carry-tagged value used as words")
            return list(val.words)
        if tag == "pass":
            return [None] * (pad_to - 1) + [val]
        raise UnsupportedWidth(f"literal {val} in a wide operand position")

    for idx, ins in enumerate(program.body):
        before = len(ctx.body)
        kind = ins.kind
        dest = ins.dest
        views = [view(op) for op in ins.operands]
        wide = any(t == "vec" for t, _ in views) or dest.width > ww

        if not wide:
            # Flag/word-level instruction: keep it, with renames applied.
            remapped = tuple(val for _, val in views)
            ctx.emit_raw(Instr(kind, dest, remapped, ins.imm))
            env[dest.name] = dest
        elif kind == "const":
            k = word_count(dest.width)
            if k is not None:
                words = []
                for i in range(k):
                    shift = ww * (k - 1 - i)
                    val = (ins.imm >> shift) & ((1 << ww) - 1)
                    words.append(ctx.emit_raw(Instr(
                        "const", Var(f"{dest.name}__{i}", ww), (), val)))
                bind_split(dest, None, words)
            elif dest.width == dd + 1:
                flag = ctx.emit_raw(Instr(
                    "const", Var(f"{dest.name}__c", 1), (), ins.imm >> dd))
                words = []
                for i in range(2):
                    shift = ww * (1 - i)
                    val = (ins.imm >> shift) & ((1 << ww) - 1)
                    words.append(ctx.emit_raw(Instr(
                        "const", Var(f"{dest.name}__{i}", ww), (), val)))
                bind_split(dest, flag, words)
            else:
                raise UnsupportedWidth(
                    f"const {dest.name}: width {dest.width} at level {dd}")
        elif kind == "add":
            lists = [as_words(op) for op in ins.operands]
            if dest.width == dd + 1:
                carry, words = mw_add(ctx, lists, ww)
                bind_split(dest, carry, words)
            elif dest.width == dd:
                _, words = mw_add(ctx, lists, ww, narrow_top=True)
                bind_split(dest, None, words)
            else:
                raise UnsupportedWidth(
                    f"add {dest.name}: width {dest.width} at level {dd}")
        elif kind == "sub":
            a = as_words(ins.operands[0])
            b = as_words(ins.operands[1])
            words = mw_sub(ctx, a, b, ww)
            bind_split(dest, None, words)
        elif kind == "mul":
            a = as_words(ins.operands[0])
            b = as_words(ins.operands[1])
            words = mw_mul(ctx, a, b, ww, mul_strategy)
            bind_split(dest, None, words)
        elif kind in ("shl", "shr"):
            tag, val = views[0]
            if tag != "vec":
                raise UnsupportedWidth(f"{kind} on non-split operand")
            if val.flag is not None:
                raise UnsupportedWidth(f"{kind} on carry-tagged value")
            if dest.width % ww:
                raise UnsupportedWidth(
                    f"{kind} {dest.name}: width {dest.width} at level {dd}")
            count = dest.width // ww
            fn = mw_shr if kind == "shr" else mw_shl
            words = fn(ctx, list(val.words), ins.imm, ww, count)
            if count == 1:
                env[dest.name] = _concrete(ctx, words[0], ww)
            else:
                bind_split(dest, None, words)
        elif kind in ("and", "or"):
            a = as_words(ins.operands[0])
            b = as_words(ins.operands[1])
            words = []
            for x, y in zip(a, b):
                if x is None and y is None:
                    words.append(None)
                elif x is None:
                    words.append(y if kind == "or" else None)
                elif y is None:
                    words.append(x if kind == "or" else None)
                else:
                    words.append(ctx.emit(kind, max(x.width, y.width), [x, y]))
            bind_split(dest, None, words)
        elif kind in ("lt", "eq"):
            ta, va = views[0]
            tb, vb = views[1]
            if ta == "vec" and va.flag is not None:
                base = (mw_lt if kind == "lt" else mw_eq)(
                    ctx, list(va.words), as_words(ins.operands[1]), ww)
                no_carry = ctx.emit("eq", 1, [va.flag, 0])
                env[dest.name] = ctx.emit("and", 1, [no_carry, base])
            elif tb == "vec" and vb.flag is not None:
                raise UnsupportedWidth(f"{kind} against a carry-tagged value")
            else:
                a = as_words(ins.operands[0])
                b = as_words(ins.operands[1])
                env[dest.name] = (mw_lt if kind == "lt" else mw_eq)(
                    ctx, a, b, ww)
        elif kind == "select":
            tc, cond = views[0]
            if tc != "pass":
                raise UnsupportedWidth("select condition must be a flag")
            a = as_words(ins.operands[1], pad_to=2)
            b = as_words(ins.operands[2], pad_to=2)
            k = max(len(a), len(b))
            a = [None] * (k - len(a)) + a
            b = [None] * (k - len(b)) + b
            words = []
            for x, y in zip(a, b):
                if x is None and y is None:
                    words.append(None)
                else:
                    x = _concrete(ctx, x, ww)
                    y = _concrete(ctx, y, ww)
                    words.append(ctx.emit("select", ww, [cond, x, y]))
            bind_split(dest, None, words)
        elif kind in ("exthi", "extlo"):
            tag, val = views[0]
            if tag != "vec":
                raise UnsupportedWidth(f"{kind} on non-split operand")
            flag, words = val.flag, list(val.words)
            dw = dest.width
            if flag is not None:          # a carry-tagged pair (width dd+1)
                if kind == "exthi" and dw == 1:
                    env[dest.name] = _concrete(ctx, flag, 1)
                elif kind == "extlo" and dw == dd:
                    bind_split(dest, None, words)
                elif kind == "extlo" and dw == ww:
                    env[dest.name] = _concrete(ctx, words[-1], ww)
                else:
                    raise UnsupportedWidth(
                        f"{kind} of {dw} bits from carry-tagged value")
            else:
                total = len(words) * ww
                if dw % ww == 0 and dw <= total:
                    k = dw // ww
                    part = words[:k] if kind == "exthi" else words[-k:]
                    if k == 1:
                        env[dest.name] = _concrete(ctx, part[0], ww)
                    else:
                        bind_split(dest, None, part)
                elif kind == "exthi" and dw < ww:
                    top = _concrete(ctx, words[0], ww)
                    # top bits live entirely inside the leading word
                    src_w = ins.operands[0].width
                    drop = src_w - dw - (total - ww)
                    env[dest.name] = ctx.emit("shr", dw, [top], imm=drop)
                elif kind == "extlo" and dw < ww:
                    low = _concrete(ctx, words[-1], ww)
                    env[dest.name] = ctx.emit("extlo", dw, [low])
                else:
                    raise UnsupportedWidth(
                        f"{kind} of {dw} bits from {total}-bit value")
        elif kind == "concat":
            ta, va = views[0]
            tb, vb = views[1]
            if ta == "pass" and va.width == 1 and tb == "vec":
                if vb.flag is not None:
                    raise UnsupportedWidth("concat onto carry-tagged value")
                bind_split(dest, va, list(vb.words))
            else:
                parts = []
                for (tag, val), op in zip(views, ins.operands):
                    if tag == "pass" and val.width == ww:
                        parts.append(val)
                    elif tag == "vec" and val.flag is None:
                        parts.extend(val.words)
                    else:
                        raise UnsupportedWidth("unaligned concat")
                bind_split(dest, None, parts)
        else:
            raise UnsupportedWidth(f"cannot lower {kind} at level {dd}")

        if trace is not None:
            delta = len(ctx.body) - before
            trace.append(
                f"{dd}->{ww} @{idx} {kind} {dest.name}: +{delta}")

    new_outputs = []
    for v in program.outputs:
        bound = env[v.name]
        if isinstance(bound, Var):
            new_outputs.append(bound)
        else:
            if bound.flag is not None:
                raise UnsupportedWidth(f"output {v.name} carries a flag")
            for w in bound.words:
                new_outputs.append(_concrete(ctx, w, ww))
    attrs = dict(program.attributes)
    attrs["level_bits"] = ww
    lowered = Program(
        name=program.name,
        inputs=tuple(new_inputs),
        outputs=tuple(new_outputs),
        body=tuple(ctx.body),
        attributes=attrs,
    )
    return lowered, SplitMap(mapping=mapping)


def lower_program(program: Program, config: RewriteConfig,
                  trace: list | None = None) -> Program:
    """Lower until interface words reach the machine word.

    Takes ``log2(interface width / omega0)`` levels; one more when the
    target lacks a double word, so no intermediate exceeds ``omega0``.
    """
    level = program.attributes.get("level_bits")
    if level is None:
        level = max((v.width for v in program.inputs), default=0)
    ratio, rem = divmod(level, config.omega0)
    if rem or ratio < 1 or ratio & (ratio - 1):
        raise UnsupportedWidth(
            f"interface width {level} is not omega0 * power of two "
            f"(omega0={config.omega0})")
    out = program
    while level > config.omega0:
        out, _ = lower_once(out, config.mul_strategy, trace)
        level //= 2
    if not config.target_has_double_word:
        widths = [v.width for v in out.inputs]
        widths += [ins.dest.width for ins in out.body]
        if any(w > config.omega0 for w in widths):
            out, _ = lower_once(out, config.mul_strategy, trace)
    if out is program:
        out = Program(program.name, program.inputs, program.outputs,
                      program.body, dict(program.attributes))
    out.attributes["strategy"] = config.mul_strategy
    diags = validate(out)
    if diags:
        raise AssertionError(f"lowering produced invalid program: {diags[:4]}")
    return out


def prune_zero_words(program: Program, known_zero) -> Program:
    """Propagate statically-zero input words and drop dead code.

    ``known_zero`` names input words that always hold zero (padding above
    the modulus bound).  With an empty set the program is returned
    untouched.  The pass folds ``x+0``, ``x*0``, compares against zero
    and constant-flag selects, then removes instructions whose results
    are unused.  Running it twice gives the same program.
    """
    known = {n for n in known_zero}
    if not known:
        return program
    input_names = {v.name for v in program.inputs}
    unknown = known - input_names
    if unknown:
        raise KeyError(f"not input words: {sorted(unknown)}")

    ZERO = ("zero",)
    states: dict[str, object] = {n: ZERO for n in known}
    avail: dict[tuple[int, int], Var] = {}   # reusable const vars
    emitted: set[str] = set()
    fresh_seq = 0
    body: list[Instr] = []

    def materialize(width: int, value: int) -> Var:
        nonlocal fresh_seq
        key = (width, value)
        v = avail.get(key)
        if v is None:
            v = Var(f"zc{width}_{fresh_seq}", width)
            fresh_seq += 1
            avail[key] = v
        if v.name not in emitted:
            body.append(Instr("const", v, (), value))
            emitted.add(v.name)
        return v

    def resolve(op):
        """Returns (state, operand) with aliases chased."""
        if isinstance(op, int):
            return ("lit", op), op
        seen = op
        while True:
            st = states.get(seen.name)
            if isinstance(st, tuple) and st[0] == "alias":
                seen = st[1]
                continue
            return (st if st is not None else ("opaque",)), seen

    def operand_var(state, op, width=None):
        if state[0] == "lit":
            return op
        if state[0] == "zero":
            return materialize(width if width is not None else op.width, 0)
        if state[0] == "const":
            return materialize(op.width, state[1])
        return op

    def is_zero(state, op):
        if state[0] == "zero":
            return True
        if state[0] == "const" and state[1] == 0:
            return True
        if state[0] == "lit" and op == 0:
            return True
        return False

    for ins in program.body:
        kind = ins.kind
        dest = ins.dest
        res = [resolve(op) for op in ins.operands]

        if kind == "const":
            # Keep the instruction in place (dead ones fall to the final
            # liveness pass); sinking consts to first use would move when
            # an unrelated user later turns out dead.
            states[dest.name] = ZERO if ins.imm == 0 else ("const", ins.imm)
            key = (dest.width, ins.imm)
            canonical = avail.setdefault(key, dest)
            if canonical is dest and dest.name not in emitted:
                body.append(ins)
                emitted.add(dest.name)
            continue

        folded = False
        if kind == "add":
            live = [(st, op) for st, op in res if not is_zero(st, op)]
            if not live:
                states[dest.name] = ZERO
                folded = True
            elif len(live) == 1 and isinstance(live[0][1], Var) \
                    and live[0][1].width == dest.width:
                states[dest.name] = ("alias", live[0][1])
                folded = True
        elif kind == "sub":
            (sa, oa), (sb, ob) = res
            if is_zero(sb, ob):
                if is_zero(sa, oa):
                    states[dest.name] = ZERO
                    folded = True
                elif isinstance(oa, Var) and oa.width == dest.width:
                    states[dest.name] = ("alias", oa)
                    folded = True
        elif kind == "mul":
            if any(is_zero(st, op) for st, op in res):
                states[dest.name] = ZERO
                folded = True
        elif kind in ("shl", "shr", "extlo"):
            st, op = res[0]
            if is_zero(st, op):
                states[dest.name] = ZERO
                folded = True
        elif kind == "exthi":
            st, op = res[0]
            if is_zero(st, op):
                states[dest.name] = ZERO
                folded = True
        elif kind == "and":
            if any(is_zero(st, op) for st, op in res):
                states[dest.name] = ZERO
                folded = True
            else:
                for i in (0, 1):
                    st, op = res[i]
                    if st[0] == "const" and st[1] == 1 and op.width == 1:
                        other = res[1 - i][1]
                        if isinstance(other, Var) \
                                and other.width == dest.width:
                            states[dest.name] = ("alias", other)
                            folded = True
                        break
        elif kind == "or":
            for i in (0, 1):
                st, op = res[i]
                if is_zero(st, op):
                    other = res[1 - i][1]
                    if isinstance(other, Var) and other.width == dest.width:
                        states[dest.name] = ("alias", other)
                        folded = True
                    break
                if st[0] == "const" and st[1] == 1 and dest.width == 1:
                    states[dest.name] = ("const", 1)
                    folded = True
                    break
        elif kind == "lt":
            (sa, oa), (sb, ob) = res
            if is_zero(sb, ob):
                states[dest.name] = ZERO        # nothing is below zero
                folded = True
            elif is_zero(sa, oa) and sb[0] == "const" and sb[1] > 0:
                states[dest.name] = ("const", 1)
                folded = True
            elif sa[0] == "const" and sb[0] == "const":
                states[dest.name] = \
                    ("const", 1) if sa[1] < sb[1] else ZERO
                folded = True
        elif kind == "eq":
            (sa, oa), (sb, ob) = res
            za, zb = is_zero(sa, oa), is_zero(sb, ob)
            if za and zb:
                states[dest.name] = ("const", 1)
                folded = True
            elif (za and sb[0] == "const" and sb[1] != 0) or \
                    (zb and sa[0] == "const" and sa[1] != 0):
                states[dest.name] = ZERO
                folded = True
            elif sa[0] == "const" and sb[0] == "const":
                states[dest.name] = \
                    ("const", 1) if sa[1] == sb[1] else ZERO
                folded = True
        elif kind == "select":
            sc, oc = res[0]
            branch = None
            if is_zero(sc, oc):
                branch = res[2]
            elif sc[0] == "const" and sc[1] == 1:
                branch = res[1]
            elif sc[0] == "lit":
                branch = res[1] if oc else res[2]
            if branch is not None:
                st, op = branch
                if is_zero(st, op):
                    states[dest.name] = ZERO
                elif st[0] == "lit":
                    states[dest.name] = ("const", op) if op else ZERO
                else:
                    # Select branches share the destination width, so the
                    # alias never changes a declared width.
                    states[dest.name] = ("alias", op)
                folded = True
            else:
                st1, op1 = res[1]
                st2, op2 = res[2]
                if is_zero(st1, op1) and is_zero(st2, op2):
                    states[dest.name] = ZERO
                    folded = True
                elif isinstance(op1, Var) and isinstance(op2, Var) \
                        and op1.name == op2.name:
                    states[dest.name] = ("alias", op1)
                    folded = True
        elif kind == "concat":
            if all(is_zero(st, op) for st, op in res):
                states[dest.name] = ZERO
                folded = True

        if folded:
            continue
        new_ops = tuple(
            operand_var(st, op) for (st, op) in res)
        body.append(Instr(kind, dest, new_ops, ins.imm))
        states.setdefault(dest.name, None)

    # Resolve outputs, then drop everything they do not need.
    out_vars = []
    for v in program.outputs:
        st, op = resolve(v)
        if st[0] == "zero":
            out_vars.append(materialize(v.width, 0))
        elif st[0] == "const":
            out_vars.append(materialize(v.width, st[1]))
        else:
            out_vars.append(op)

    needed = {v.name for v in out_vars}
    kept = []
    for ins in reversed(body):
        if ins.dest.name in needed:
            kept.append(ins)
            for op in ins.operands:
                if isinstance(op, Var):
                    needed.add(op.name)
    kept.reverse()
    return Program(
        name=program.name,
        inputs=program.inputs,
        outputs=tuple(out_vars),
        body=tuple(kept),
        attributes=dict(program.attributes),
    )
