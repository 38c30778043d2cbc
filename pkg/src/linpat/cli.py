"""Command-line entry point: analyze, gpy, count, increment, transfer.

Every subcommand emits a JSON document (or CSV / a short human summary) that
is byte-identical for identical inputs.  Exit codes: 0 success, 1 validation,
2 budget, 3 certification failure.  When ``--output`` is absent and the
environment variable LINPAT_OUTPUT_DIR is set, output goes to
``$LINPAT_OUTPUT_DIR/<subcommand>.<ext>``; otherwise to stdout.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

OUTPUT_ENV = "LINPAT_OUTPUT_DIR"
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")

PRESETS = {
    "3ap-small": {"N": 10_000, "omega": 3, "b": 1, "eta": 0.3, "L": 8.0, "samples": 20_000, "seed": 0},
    "3ap-medium": {"N": 100_000, "omega": 5, "b": 1, "eta": 0.05, "L": 8.0, "samples": 200_000, "seed": 0},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2, which is reserved for budget errors
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _existing(path: str) -> str:
    if not Path(path).is_file():
        raise argparse.ArgumentTypeError(f"no such file: {path}")
    return path


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _unit(s: str) -> float:
    v = float(s)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1]")
    return v


def _common(p: argparse.ArgumentParser, suppress: bool) -> None:
    """Shared flags, accepted before or after the subcommand."""
    def dflt(v):
        return argparse.SUPPRESS if suppress else v
    p.add_argument("--threads", type=_positive_int, default=dflt(None),
                   help="cap on BLAS/OpenMP worker threads")
    p.add_argument("--format", choices=("json", "csv", "human"), default=dflt("json"))
    p.add_argument("--output", default=dflt(None),
                   help=f"output file (default: ${OUTPUT_ENV}/<cmd> or stdout)")
    p.add_argument("--constants", type=_existing, default=dflt(None), help="TOML constants table")
    p.add_argument("--seed", type=int, default=dflt(0))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="linpat", description=__doc__.split("\n\n")[0])
    _common(p, suppress=False)
    shared = _Parser(add_help=False)
    _common(shared, suppress=True)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", parents=[shared], help="complexity, normal forms and parametrization of a system")
    g = a.add_mutually_exclusive_group(required=True)
    g.add_argument("--matrix", type=_existing)
    g.add_argument("--system", type=_existing)

    s = sub.add_parser("gpy", parents=[shared], help="sieve weights: correlation table, c_chi2, local probabilities")
    s.add_argument("--preset", choices=sorted(PRESETS), default=None)
    s.add_argument("--N", type=_positive_int)
    s.add_argument("--omega", type=float)
    s.add_argument("--b", type=int)
    s.add_argument("--eta", type=float)
    s.add_argument("--L", type=float)
    s.add_argument("--samples", type=int)
    s.add_argument("--P", type=_positive_int, default=None, help="box side (default N / (1 + max row norm))")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--matrix", type=_existing)
    g.add_argument("--system", type=_existing)

    c = sub.add_parser("count", parents=[shared], help="exact solution counts of V y = 0 in a set")
    c.add_argument("--matrix", type=_existing, required=True)
    c.add_argument("--set", dest="set_file", type=_existing, required=True)
    c.add_argument("--distinct", action="store_true")
    c.add_argument("--budget", type=_positive_int, default=50_000_000)

    i = sub.add_parser("increment", parents=[shared], help="density increment run on a set in [-N, N]")
    i.add_argument("--matrix", type=_existing, required=True)
    i.add_argument("--set", dest="set_file", type=_existing, required=True)
    i.add_argument("--N", type=_positive_int, default=None, help="default: max |a| over the set")
    i.add_argument("--no-oracle", action="store_true", help="skip the exact oracle count")

    t = sub.add_parser("transfer", parents=[shared], help="transference pipeline on W-tricked primes")
    t.add_argument("--N", type=_positive_int, required=True)
    t.add_argument("--omega", type=float, required=True)
    t.add_argument("--b", type=int, default=1)
    t.add_argument("--delta", type=_unit, default=0.1)
    t.add_argument("--eps", type=_unit, default=0.05)
    t.add_argument("--eta", type=float, default=0.05)
    t.add_argument("--matrix", type=_existing, required=True)
    t.add_argument("--M", type=_positive_int, default=None, help="modulus override (prime)")
    t.add_argument("--interval", type=float, default=1.0,
                   help="keep only primes with n <= interval * N")
    t.add_argument("--no-main", action="store_true", help="skip the level-set increment run")
    return p


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _complexity_json(x: float) -> Any:
    return int(x) if x != float("inf") else "inf"


def cmd_analyze(args) -> dict:
    from . import io, linsys
    from .errors import LinpatError, ValidationError

    if args.system:
        psi = io.read_system(args.system)
        lin = psi.linear_part()
        per = [linsys.complexity_partition(lin, i) for i in range(psi.t)]
        out = {"input": "system", "system": psi.to_dict(),
               "complexity": [_complexity_json(c) for c, _ in per],
               "global_complexity": _complexity_json(max((c for c, _ in per), default=0)),
               "partitions": [p for _, p in per],
               "witnesses": [_witness(lin, i) for i in range(psi.t)],
               "norm": linsys.system_norm(lin)}
        return out
    V = io.read_matrix(args.matrix)
    out: dict[str, Any] = {"input": "matrix", "matrix": V.to_list(), "r": V.r, "t": V.t,
                           "rank": V.rank(), "translation_invariant": linsys.is_translation_invariant(V),
                           "matrix_norm": linsys.matrix_norm(V)}
    if V.t >= 2 and V.r >= 1:
        per = [linsys.matrix_complexity_partition(V, i) for i in range(V.t)]
        out["complexity"] = [_complexity_json(c) for c, _ in per]
        out["global_complexity"] = _complexity_json(max(c for c, _ in per))
        out["partitions"] = [p for _, p in per]
    try:
        s = out.get("global_complexity", 1)
        if s == "inf":
            raise ValidationError("infinite complexity: no normal-form parametrization")
        kp = linsys.kernel_parametrization(V, max(1, int(s)))
        out["parametrization"] = {
            "s": max(1, int(s)), "psi": kp.psi.to_dict(), "phi": kp.phi.to_dict(),
            "kernel_basis": kp.basis,
            "witnesses": [_witness(kp.psi, i) for i in range(kp.psi.t)],
            "psi_norm": linsys.system_norm(kp.psi),
            "reduction_threshold": linsys.reduction_threshold(kp.psi, V)}
    except LinpatError as exc:
        out["parametrization"] = {"error": str(exc)}
    return out


def _witness(psi, i: int) -> Any:
    from . import linsys
    w = linsys.normal_witness(psi, i, psi.d)
    return None if w is None else {"s": w[0], "J": list(w[1])}


def _gpy_params(args) -> dict:
    from .errors import ValidationError
    base = dict(PRESETS[args.preset]) if args.preset else {}
    for k in ("N", "omega", "b", "eta", "L", "samples"):
        v = getattr(args, k)
        if v is not None:
            base[k] = v
    base.setdefault("b", 1)
    base.setdefault("L", 8.0)
    base.setdefault("samples", 20_000)
    missing = [k for k in ("N", "omega", "eta") if k not in base]
    if missing:
        raise ValidationError(f"missing parameters {missing} (give them or a --preset)")
    if base["samples"] < 1:
        raise ValidationError("sample count must be positive")
    base["seed"] = args.seed
    return base


def _gpy_systems(args):
    from . import io, linsys
    from .linsys import LinearSystem
    if args.system:
        return [("system", io.read_system(args.system))]
    if args.matrix:
        return [("matrix", linsys.kernel_parametrization(io.read_matrix(args.matrix), 1).psi)]
    return [("identity", LinearSystem(((1,),), 1)),
            ("3ap", LinearSystem(((1, 0), (1, 1), (1, 2)), 2)),
            ("midpoints", LinearSystem(((1, 2, 0), (1, 1, 1), (1, 0, 2)), 3))]


def cmd_gpy(args) -> dict:
    from . import sieve
    prm = _gpy_params(args)
    ctx = sieve.WTrickContext(prm["N"], prm["omega"], prm["b"])
    cfg = sieve.GpyConfig.create(ctx, prm["eta"], L=prm["L"])
    rows = []
    for name, psi in _gpy_systems(args):
        width = 1 + max(sum(abs(a) for a in row) for row in psi.coeffs)
        P = args.P or max(1, prm["N"] // width)
        st = sieve.correlation_harness(sieve.positive_shift(psi, P), P, ctx, cfg,
                                       samples=prm["samples"], seed=prm["seed"])
        rows.append({"system": name, "N": prm["N"], "omega": prm["omega"], "b": prm["b"],
                     "eta": prm["eta"], "P": P, "samples": st.samples, "exhaustive": st.exhaustive,
                     "mean": st.mean, "stderr": st.stderr, "deviation": st.deviation})
    c2 = sieve.sieve_factor_c2(2.0 / 2048, 0.2, 400.0)
    probe = sieve.LinearSystem(((1, 0), (1, 1), (1, 2)), 2)
    spots = []
    for p in [int(q) for q in sieve.primes_upto(40) if q > prm["omega"]][:4]:
        for B in ([(0, 0)], [(0, 0), (1, 0)], [(0, 0), (0, 1)]):
            spots.append({"p": p, "B": B, "alpha": sieve.local_alpha(p, B, probe, ctx),
                          "enumerated": sieve.local_alpha_enumerated(p, B, probe, ctx)})
    return {"params": prm, "W": ctx.W, "R": cfg.R, "degenerate": cfg.degenerate,
            "omega_relation": {"omega": prm["omega"], "log_N": math.log(prm["N"])},
            "table": rows,
            "c_chi2": {"double_integral": c2.double_integral,
                       "derivative_integral": c2.derivative_integral, "difference": c2.difference},
            "local_probabilities": spots}


def cmd_count(args) -> dict:
    from . import io, patterns
    V = io.read_matrix(args.matrix)
    A = io.read_set(args.set_file)
    out = {"count": patterns.count_solutions(V, A, args.budget), "method": "kernel-lattice",
           "budget_used": args.budget, "size": int(len(A))}
    if args.distinct:
        out["distinct"] = patterns.count_distinct_solutions(V, A)
    return out


def cmd_increment(args, consts) -> dict:
    from . import increment, io
    from .errors import ValidationError
    V = io.read_matrix(args.matrix)
    A = io.read_set(args.set_file)
    if len(A) == 0 and args.N is None:
        raise ValidationError("empty set needs an explicit --N")
    N = args.N if args.N is not None else int(max(abs(int(A.min())), abs(int(A.max()))))
    res = increment.run_increment(V, A, N, consts.increment, exact=not args.no_oracle)
    return {"N": N, **res.to_dict()}


def cmd_transfer(args, consts) -> dict:
    from . import increment, io, sieve
    from .errors import CertificationError
    V = io.read_matrix(args.matrix)
    ctx = sieve.WTrickContext(args.N, args.omega, args.b)
    A = increment.wtricked_primes(ctx)
    A = A[A <= args.interval * args.N]
    cfg = increment.TransferenceConfig(delta=args.delta, eps=args.eps, M=args.M)
    gpy = sieve.GpyConfig.create(ctx, args.eta)
    rep = increment.transference_pipeline(A, ctx, cfg, V, gpy, consts.increment,
                                          run_main=not args.no_main).to_dict()
    if rep.get("identity_ok") is False:
        raise CertificationError(f"expansion identity residual {rep['identity_residual']}")
    return rep


def _human(doc: dict) -> str:
    lines = []
    for k in sorted(doc):
        v = doc[k]
        if isinstance(v, (dict, list)):
            v = f"<{type(v).__name__} of {len(v)}>"
        lines.append(f"{k}: {v}")
    return "\n".join(lines) + "\n"


def _render(doc: dict, fmt: str, command: str) -> str:
    from . import io
    if fmt == "json":
        return io.dumps(doc)
    if fmt == "csv":
        if command == "gpy":
            cols = ["system", "N", "omega", "b", "eta", "P", "samples", "mean", "stderr", "deviation"]
            return io.table_csv(doc["table"], cols)
        flat = {k: v for k, v in io.to_jsonable(doc).items() if not isinstance(v, (dict, list))}
        return io.table_csv([flat], sorted(flat))
    return _human(io.to_jsonable(doc))


def _emit(text: str, args) -> None:
    target: Optional[Path] = None
    if args.output:
        target = Path(args.output)
    elif os.environ.get(OUTPUT_ENV):
        ext = {"json": "json", "csv": "csv", "human": "txt"}[args.format]
        target = Path(os.environ[OUTPUT_ENV]) / f"{args.command}.{ext}"
    if target is None:
        sys.stdout.write(text)
        return
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads:
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    from .constants import load_constants
    from .errors import LinpatError
    try:
        consts = load_constants(args.constants)
        if args.command == "analyze":
            doc = cmd_analyze(args)
        elif args.command == "gpy":
            doc = cmd_gpy(args)
        elif args.command == "count":
            doc = cmd_count(args)
        elif args.command == "increment":
            doc = cmd_increment(args, consts)
        else:
            doc = cmd_transfer(args, consts)
        _emit(_render(doc, args.format, args.command), args)
    except LinpatError as exc:
        sys.stderr.write(f"linpat {args.command}: {type(exc).__name__}: {exc}\n")
        return exc.exit_code
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
