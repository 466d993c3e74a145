"""Command line front end; a thin client over the service handlers.

Exit codes: 0 success, 1 verification found failures, 2 bad usage
(argparse), 3 parameter or generation failure (no suitable prime,
unsupported width, target mismatch, and friends).
"""

from __future__ import annotations

import argparse
import json
import sys

from .service import (
    BenchRequest,
    GenRequest,
    ParamsRequest,
    VerifyRequest,
    handle_bench,
    handle_gen,
    handle_params,
    handle_verify,
)


def _write(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _cmd_gen(args: argparse.Namespace) -> int:
    req = GenRequest(
        kernel=args.kernel, bits=args.bits, word=args.word, size=args.size,
        strategy=args.strategy, target=args.target,
        params_mode=args.params_mode, self_test=args.self_test,
        double_word=not args.no_double_word,
    )
    resp = handle_gen(req)
    _write(resp.source, args.out)
    if args.manifest:
        with open(args.manifest, "w") as f:
            f.write(resp.manifest)
    if args.out:
        print(f"{resp.kernel}: {resp.instructions} instructions "
              f"-> {args.out}", file=sys.stderr)
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    req = VerifyRequest(
        kernel=args.kernel, bits=args.bits, word=args.word, size=args.size,
        strategy=args.strategy, trials=args.trials, seed=args.seed,
        exhaustive=args.exhaustive,
    )
    resp = handle_verify(req)
    if args.json:
        _write(json.dumps(resp.report, sort_keys=True, indent=2) + "\n",
               args.out)
    else:
        checks = resp.report.get("checks", {})
        extra = "".join(f" {k}={'ok' if v else 'FAIL'}"
                        for k, v in sorted(checks.items()))
        line = (f"{args.kernel} bits={args.bits} word={args.word} "
                f"trials={resp.trials} failures={resp.failure_count}"
                f"{extra} -> {'ok' if resp.ok else 'FAIL'}")
        _write(line + "\n", args.out)
    return 0 if resp.ok else 1


def _cmd_params(args: argparse.Namespace) -> int:
    resp = handle_params(ParamsRequest(bits=args.bits, size=args.size))
    _write(json.dumps(resp.model_dump(), sort_keys=True, indent=2) + "\n",
           args.out)
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    req = BenchRequest(
        kernel=args.kernel, bits=args.bits, word=args.word, size=args.size,
        strategy=args.strategy, trials=args.trials, seed=args.seed,
    )
    resp = handle_bench(req)
    _write(json.dumps(resp.model_dump(), sort_keys=True, indent=2) + "\n",
           args.out)
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .app import app
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _add_kernel_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel", required=True,
                   help="addmod|submod|mulmod|vadd|vsub|vmul|axpy|"
                        "ntt|intt|widemul")
    p.add_argument("--bits", type=int, required=True,
                   help="interface width in bits")
    p.add_argument("--word", type=int, default=64,
                   help="machine word width (8/16/32/64)")
    p.add_argument("--size", type=int, default=1,
                   help="vector length or transform size")
    p.add_argument("--strategy", default="schoolbook",
                   choices=("schoolbook", "karatsuba"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="widemod",
        description="Generate and check wide modular-arithmetic kernels.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="emit kernel source")
    _add_kernel_flags(g)
    g.add_argument("--target", default="c",
                   choices=("c", "cuda", "ir", "manifest"))
    g.add_argument("--params-mode", default="baked",
                   choices=("baked", "runtime"))
    g.add_argument("--self-test", action="store_true",
                   help="include a stdin/stdout test driver (C only)")
    g.add_argument("--no-double-word", action="store_true",
                   help="lower once more so no value needs a double word")
    g.add_argument("--out", help="write source here instead of stdout")
    g.add_argument("--manifest", help="also write the JSON manifest here")
    g.set_defaults(func=_cmd_gen)

    v = sub.add_parser("verify", help="differential test against the oracle")
    _add_kernel_flags(v)
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--exhaustive", action="store_true",
                   help="sweep every operand pair (small moduli only)")
    v.add_argument("--json", action="store_true",
                   help="print the full report as JSON")
    v.add_argument("--out", help="write the report here instead of stdout")
    v.set_defaults(func=_cmd_verify)

    p = sub.add_parser("params", help="show modulus/reduction parameters")
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--size", type=int, default=1,
                   help="required root order (transform size)")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_params)

    b = sub.add_parser("bench", help="time the interpreted kernel")
    _add_kernel_flags(b)
    b.add_argument("--trials", type=int, default=10000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    b.set_defaults(func=_cmd_bench)

    s = sub.add_parser("serve", help="run the HTTP service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
