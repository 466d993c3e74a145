"""Differential verification of generated kernels against the oracle.

A verification run rebuilds the kernel from its spec, executes the
word-level program on seeded random operands (plus the edge set 0, 1,
q-1, and optionally the full operand square), and compares every result
with the arbitrary-precision reference.  Transform kernels additionally
check the forward transform against direct summation, the
inverse-forward roundtrip, cyclic convolution, and the schedule size.

Reports are plain data with a stable JSON encoding: same spec, seed and
trial count always produce byte-identical reports.
"""

from __future__ import annotations

import json
import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field

from .ir import compile_program, count_ops
from .kernels import (
    KernelSpec,
    NTT_KINDS,
    SCALAR_KINDS,
    VECTOR_KINDS,
    WordLayout,
    generate_kernel,
    make_spec,
    run_ntt,
    run_program,
    run_vector,
    to_words,
)
from .oracle import compute_barrett, convolve_mod, ntt_reference

import random

EXHAUSTIVE_CAP = 1 << 22    # operand pairs; q^2 above this refuses


@dataclass
class VerifyReport:
    kernel: str
    bits: int
    word: int
    size: int
    strategy: str
    seed: int
    trials: int
    exhaustive: bool
    q: str | None = None
    p: str | None = None
    instructions: int = 0
    opcounts: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    failure_count: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failure_count == 0 and all(self.checks.values())

    def to_json(self) -> str:
        doc = {
            "kernel": self.kernel,
            "bits": self.bits,
            "word": self.word,
            "size": self.size,
            "strategy": self.strategy,
            "seed": self.seed,
            "trials": self.trials,
            "exhaustive": self.exhaustive,
            "q": self.q,
            "p": self.p,
            "instructions": self.instructions,
            "opcounts": self.opcounts,
            "checks": self.checks,
            "failure_count": self.failure_count,
            "failures": self.failures,
            "ok": self.ok,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


_MAX_RECORDED_FAILURES = 20


class _Recorder:
    def __init__(self):
        self.count = 0
        self.rows = []

    def add(self, inputs, got, want):
        self.count += 1
        if len(self.rows) < _MAX_RECORDED_FAILURES:
            self.rows.append({
                "inputs": [str(x) for x in inputs],
                "got": str(got),
                "want": str(want),
            })


def _scalar_ref(kind: str, q: int):
    return {
        "addmod": lambda a, b: (a + b) % q,
        "submod": lambda a, b: (a - b) % q,
        "mulmod": lambda a, b: a * b % q,
        "vadd": lambda a, b: (a + b) % q,
        "vsub": lambda a, b: (a - b) % q,
        "vmul": lambda a, b: a * b % q,
    }[kind]


def run_verify(kind: str, bits: int, word: int, size: int = 1,
               strategy: str = "schoolbook", trials: int = 1000,
               seed: int = 0, exhaustive: bool = False) -> VerifyReport:
    spec = make_spec(kind, bits, word, size=size, strategy=strategy)
    program = generate_kernel(spec)
    fn = compile_program(program)
    report = VerifyReport(
        kernel=kind, bits=bits, word=word, size=spec.size,
        strategy=strategy, seed=seed, trials=trials, exhaustive=exhaustive,
        q=str(spec.barrett.q) if spec.barrett else None,
        p=str(spec.ntt.p) if spec.ntt else None,
        instructions=len(program.body),
        opcounts={f"{k}.{c}": v
                  for (k, c), v in sorted(count_ops(program).items())},
    )
    rec = _Recorder()
    rnd = random.Random(seed)

    if kind == "widemul":
        hi = 1 << spec.layout.bits
        cases = [(0, 0), (1, 1), (hi - 1, hi - 1), (1, hi - 1)]
        cases += [(rnd.randrange(hi), rnd.randrange(hi))
                  for _ in range(trials)]
        for a, b in cases:
            got = run_program(program, a, b, fn=fn)
            if got != a * b:
                rec.add((a, b), got, a * b)
        report.trials = len(cases)
    elif kind in SCALAR_KINDS:
        q = spec.barrett.q
        ref = _scalar_ref(kind, q)
        if exhaustive:
            if q * q > EXHAUSTIVE_CAP:
                raise ValueError(
                    f"exhaustive sweep of {q}^2 pairs is over the cap; "
                    f"use random trials")
            cases = ((a, b) for a in range(q) for b in range(q))
            total = q * q
        else:
            edge = (0, 1, q - 1)
            fixed = [(a, b) for a in edge for b in edge]
            cases = fixed + [(rnd.randrange(q), rnd.randrange(q))
                             for _ in range(trials)]
            total = len(cases)
        done = 0
        for a, b in cases:
            got = run_program(program, a, b, fn=fn)
            want = ref(a, b)
            if got != want:
                rec.add((a, b), got, want)
            done += 1
        report.trials = done
        assert done == total
    elif kind in VECTOR_KINDS:
        q = spec.barrett.q
        n = spec.size
        rounds = max(1, trials // max(1, n))
        done = 0
        for _ in range(rounds):
            xs = [rnd.randrange(q) for _ in range(n)]
            ys = [rnd.randrange(q) for _ in range(n)]
            if kind == "axpy":
                s = rnd.randrange(q)
                got = run_vector(program, s, xs, ys, fn=fn)
                want = [(s * x + y) % q for x, y in zip(xs, ys)]
            else:
                got = run_vector(program, xs, ys, fn=fn)
                ref = _scalar_ref(kind, q)
                want = [ref(x, y) for x, y in zip(xs, ys)]
            for i, (g, w) in enumerate(zip(got, want)):
                if g != w:
                    rec.add((i, xs[i], ys[i]), g, w)
            done += n
        report.trials = done
    else:   # transforms
        n = spec.size
        p = spec.ntt.p
        other_kind = "intt" if kind == "ntt" else "ntt"
        other = generate_kernel(make_spec(other_kind, bits, word, size=n,
                                          strategy=strategy))
        prod = generate_kernel(KernelSpec(
            "vmul", WordLayout(bits, word), n,
            compute_barrett(p, bits), None, strategy))
        fwd_prog, inv_prog = ((program, other) if kind == "ntt"
                              else (other, program))
        rounds = max(1, trials // max(1, n))
        roundtrip = reference = convolution = True
        done = 0
        for _ in range(rounds):
            vec = [rnd.randrange(p) for _ in range(n)]
            out = run_ntt(program, vec, fn=fn)
            want = ntt_reference(vec, spec.ntt, inverse=kind == "intt")
            if out != want:
                reference = False
                for i, (g, w) in enumerate(zip(out, want)):
                    if g != w:
                        rec.add((i,) + tuple(vec), g, w)
            back = run_ntt(other, out)
            if back != vec:
                roundtrip = False
            g2 = [rnd.randrange(p) for _ in range(n)]
            fa = run_ntt(fwd_prog, vec)
            fb = run_ntt(fwd_prog, g2)
            had = run_vector(prod, fa, fb)
            conv = run_ntt(inv_prog, had)
            if conv != convolve_mod(vec, g2, p):
                convolution = False
            done += n
        from .kernels import butterfly_schedule
        sched = butterfly_schedule(n)
        report.checks = {
            "reference_match": reference,
            "roundtrip": roundtrip,
            "convolution": convolution,
            "schedule_length": len(sched) == (n // 2) * (n.bit_length() - 1),
        }
        report.trials = done

    report.failure_count = rec.count
    report.failures = sorted(rec.rows,
                             key=lambda r: [int(x) for x in r["inputs"]])
    return report


# ------------------------------------------------------ C cross-checking

def find_cc() -> str | None:
    """C compiler to cross-check with: $WIDEMOD_CC, else cc/gcc/clang."""
    env = os.environ.get("WIDEMOD_CC")
    if env:
        return env if os.path.sep in env else shutil.which(env)
    for cand in ("cc", "gcc", "clang"):
        path = shutil.which(cand)
        if path:
            return path
    return None


def run_c_self_test(source: str, input_lines: list[str],
                    cc: str | None = None, timeout: float = 120.0
                    ) -> list[str]:
    """Compile an emitted self-test binary and feed it stdin records."""
    cc = cc or find_cc()
    if cc is None:
        raise RuntimeError("no C compiler found (set WIDEMOD_CC)")
    with tempfile.TemporaryDirectory(prefix="widemod_") as td:
        src = os.path.join(td, "kernel.c")
        exe = os.path.join(td, "kernel")
        with open(src, "w") as f:
            f.write(source)
        subprocess.run([cc, "-O1", "-o", exe, src], check=True,
                       capture_output=True, timeout=timeout)
        proc = subprocess.run(
            [exe], input="\n".join(input_lines) + "\n",
            capture_output=True, text=True, check=True, timeout=timeout)
    return proc.stdout.strip().splitlines()


def cross_check_c(program, cases, cc: str | None = None) -> int:
    """Run operand tuples through the compiled self-test and the
    interpreter; returns the number of disagreements."""
    from .emit import emit_c

    attrs = program.attributes
    word = attrs["level_bits"]
    per = attrs["padded_bits"] // word
    baked = {"q", "mu"} & set(attrs["arg_names"])
    source = emit_c(program, self_test=True)
    lines = []
    for case in cases:
        words = []
        it = iter(case)
        for name in attrs["arg_names"]:
            val = int(attrs[name]) if name in baked else next(it)
            words += to_words(val, per, word)
        lines.append(" ".join(f"{w:x}" for w in words))
    got = run_c_self_test(source, lines, cc)
    fn = compile_program(program)
    bad = 0
    for case, line in zip(cases, got):
        toks = [int(t, 16) for t in line.split()]
        want = run_program(program, *case, fn=fn)
        rets = attrs["ret_names"]
        per_ret = len(toks) // len(rets)
        vals = []
        for i in range(len(rets)):
            acc = 0
            for t in toks[i * per_ret:(i + 1) * per_ret]:
                acc = (acc << word) | t
            vals.append(acc)
        got_val = vals[0] if len(vals) == 1 else tuple(vals)
        if got_val != want:
            bad += 1
    return bad
