"""Exact big-integer reference semantics and parameter generation.

Everything in here runs on Python's arbitrary-precision integers and is
deliberately slow and obvious.  Generated word-level programs are tested
against these functions, never the other way around.

Residues are canonical throughout: values live in ``[0, q)`` and every
reduction subtracts ``q`` when the value is greater *or equal* to ``q``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass


class ZeroModulus(ValueError):
    """Modulus was zero (or negative)."""


class ModulusOutOfRange(ValueError):
    """Modulus violates the reduction-parameter bounds for the width."""


class NoSuitablePrime(ValueError):
    """No prime with the requested residue properties in the scan range."""


class LengthMismatch(ValueError):
    """Sequence operands have different lengths."""


_MODOP_KINDS = ("add", "sub", "mul", "pow")

# Deterministic Miller-Rabin witness set, sufficient for every n < 2**64
# (in fact for every n < 3.3e24).
_SMALL_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)

_RANDOM_ROUNDS = 40


@dataclass(frozen=True)
class Residue:
    """A canonical residue: ``0 <= value < modulus``."""

    value: int
    modulus: int

    def __post_init__(self) -> None:
        if self.modulus <= 0:
            raise ZeroModulus(f"modulus must be positive, got {self.modulus}")
        if not 0 <= self.value < self.modulus:
            raise ValueError(
                f"value {self.value} not canonical mod {self.modulus}")


@dataclass(frozen=True)
class BarrettParams:
    """Precomputed reduction constants for moduli just under ``2**mbits``.

    ``width`` is the bit width of the operand type the constants are sized
    for; ``mbits = width - 4`` and the modulus must satisfy
    ``2**(mbits-1) < q < 2**mbits`` so that ``mu`` fits in ``width`` bits.
    """

    q: int
    width: int
    mbits: int
    mu: int
    shift1: int
    shift2: int


@dataclass(frozen=True)
class NttParams:
    """A prime and primitive root of unity for length-``n`` transforms."""

    n: int
    p: int
    root: int
    root_inv: int
    n_inv: int


def modop(kind: str, a: int, b: int, q: int) -> int:
    """Reference modular op on nonnegative ints; result is canonical.

    ``kind`` is one of ``add``, ``sub``, ``mul``, ``pow``.

    Example:
        >>> modop("sub", 3, 5, 7)
        5
    """
    if q <= 1:
        raise ZeroModulus(f"modulus must exceed 1, got {q}")
    if kind not in _MODOP_KINDS:
        raise ValueError(f"unknown op kind {kind!r}")
    if a < 0 or b < 0:
        raise ValueError("operands must be nonnegative")
    if kind == "add":
        return (a + b) % q
    if kind == "sub":
        return (a - b) % q
    if kind == "mul":
        return (a * b) % q
    return pow(a, b, q)


def compute_barrett(q: int, width: int) -> BarrettParams:
    """Derive Barrett constants for ``q`` at the given operand width.

    ``mu = floor(2**(2*mbits + 3) / q)`` with ``mbits = width - 4``; the
    quotient estimate uses shifts ``mbits - 2`` and ``mbits + 5``.  The
    strict lower bound on ``q`` keeps ``mu`` below ``2**width``.

    Example:
        >>> compute_barrett(13, 8).mu
        157
    """
    if q <= 0:
        raise ZeroModulus(f"modulus must be positive, got {q}")
    if width < 8:
        raise ValueError(f"width must be at least 8, got {width}")
    mbits = width - 4
    if not (1 << (mbits - 1)) < q < (1 << mbits):
        raise ModulusOutOfRange(
            f"need 2**{mbits - 1} < q < 2**{mbits} for width {width}, "
            f"got q={q}")
    mu = (1 << (2 * mbits + 3)) // q
    if mu >= (1 << width):
        # Unreachable given the strict bound above; kept as a tripwire.
        raise ModulusOutOfRange(f"mu={mu} does not fit in {width} bits")
    return BarrettParams(q=q, width=width, mbits=mbits, mu=mu,
                         shift1=mbits - 2, shift2=mbits + 5)


def barrett_mulmod(a: int, b: int, params: BarrettParams) -> int:
    """Scalar Barrett multiply-reduce, mirroring the generated code.

    Computes ``t = a*b - floor((floor(a*b >> shift1) * mu) >> shift2) * q``
    followed by a single conditional subtraction.  Exhaustive sweeps in the
    test suite check that one subtraction is always enough.
    """
    t = a * b
    r = ((t >> params.shift1) * params.mu) >> params.shift2
    t -= r * params.q
    if t >= params.q:
        t -= params.q
    return t


def is_prime(n: int) -> bool:
    """Miller-Rabin primality test.

    Deterministic witness set below 2**64; above that, 40 rounds drawn
    from a generator seeded by ``n`` so verdicts are reproducible.
    """
    if n < 2:
        return False
    for p in _SMALL_WITNESSES:
        if n % p == 0:
            return n == p
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    if n < (1 << 64):
        witnesses = [a for a in _SMALL_WITNESSES if a < n - 1]
    else:
        rng = random.Random(n)
        witnesses = [rng.randrange(2, n - 1) for _ in range(_RANDOM_ROUNDS)]
    for a in witnesses:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def find_ntt_params(width: int, n: int) -> NttParams:
    """Find transform parameters for length ``n`` at the given width.

    Scans downward from ``2**(width-4) - 1`` for the largest prime
    ``p = 1 (mod n)`` with ``p > 2**(width-5)``, so ``p`` always satisfies
    the Barrett bounds for ``width``.  The root is the smallest integer of
    exact multiplicative order ``n`` mod ``p``: one such element comes
    from raising a small base to ``(p-1)/n``, and the rest are its odd
    powers, so the minimum is found without scanning the whole field.

    Example:
        >>> find_ntt_params(8, 4)
        NttParams(n=4, p=13, root=5, root_inv=8, n_inv=10)
    """
    if width < 8:
        raise ValueError(f"width must be at least 8, got {width}")
    if n < 1 or n & (n - 1):
        raise ValueError(f"transform length must be a power of two, got {n}")
    hi = (1 << (width - 4)) - 1
    lo = (1 << (width - 5)) + 1
    # Largest candidate <= hi that is 1 mod n, stepping down by n.
    p = hi - (hi - 1) % n
    while p >= lo:
        if is_prime(p):
            break
        p -= n
    else:
        raise NoSuitablePrime(
            f"no prime p = 1 (mod {n}) with 2**{width - 5} < p < "
            f"2**{width - 4}")
    if n == 1:
        root = 1
    else:
        seed = 0
        for base in range(2, p):
            cand = pow(base, (p - 1) // n, p)
            # n is a power of two, so exact order n means squaring
            # n/2 times does not reach 1 one step early.
            if cand != 1 and pow(cand, n // 2, p) != 1:
                seed = cand
                break
        if seed == 0:
            raise NoSuitablePrime(f"no element of order {n} mod {p}")
        # Every element of exact order n is an odd power of any one
        # of them; take the smallest for a canonical choice.
        sq = seed * seed % p
        root = seed
        x = seed
        for _ in range(n // 2 - 1):
            x = x * sq % p
            if x < root:
                root = x
    return NttParams(n=n, p=p, root=root,
                     root_inv=pow(root, -1, p), n_inv=pow(n, -1, p))


def convolve_mod(f: list[int], g: list[int], p: int) -> list[int]:
    """Cyclic convolution of two equal-length sequences mod ``p``.

    ``h[k] = sum_i f[i] * g[(k - i) mod n] mod p``.  This is the direct
    quadratic summation the transform kernels are checked against.
    """
    if p <= 0:
        raise ZeroModulus(f"modulus must be positive, got {p}")
    if len(f) != len(g):
        raise LengthMismatch(f"lengths differ: {len(f)} vs {len(g)}")
    n = len(f)
    out = []
    for k in range(n):
        acc = 0
        for i in range(n):
            acc += f[i] * g[(k - i) % n]
        out.append(acc % p)
    return out


def ntt_reference(vec: list[int], params: NttParams, *,
                  inverse: bool = False) -> list[int]:
    """Direct O(n^2) transform: ``y[k] = sum_j x[j] * root**(j*k) mod p``.

    The inverse uses ``root_inv`` and scales by ``n_inv``.
    """
    if len(vec) != params.n:
        raise LengthMismatch(
            f"vector length {len(vec)} != transform length {params.n}")
    w = params.root_inv if inverse else params.root
    p = params.p
    out = []
    for k in range(params.n):
        acc = 0
        for j, x in enumerate(vec):
            acc += x * pow(w, j * k, p)
        acc %= p
        if inverse:
            acc = acc * params.n_inv % p
        out.append(acc)
    return out
