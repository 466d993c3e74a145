"""Generator and verification harness for wide modular arithmetic kernels.

The package lowers modular arithmetic at 128..1024+ bit widths into
straight-line programs over a configurable machine word, interprets them
exactly against an arbitrary-precision reference, and emits portable C
and CUDA source.  Submodules:

    oracle    exact big-integer reference semantics and parameter search
    ir        straight-line SSA word programs: validate / interpret / count
    rewrite   recursive lowering to narrower words, zero-word pruning
    kernels   kernel builders (scalar mod ops, vector ops, NTT)
    emit      C and CUDA source emission plus build manifests
    verify    differential testing against the oracle
    service   request/response models and handlers
    app       FastAPI wiring around the handlers
    cli       thin command line client (gen | verify | params | bench)
"""

__version__ = "0.1.0"
