"""Command-line interface.

Every subcommand writes one JSON document (to --out or stdout).  Exit codes:
0 success, 1 malformed input, 2 failed precondition, 3 numerical failure,
4 indeterminate feasibility.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import cyclic_ruled_out, zero_one_ruled_out
from .cones import as_vector
from .encoding import encode, reconstruct
from .errors import ConeScaleError, IndeterminateError, PreconditionError, SchemaError
from .io import (
    RunManifest,
    certificate_to_dict,
    dumps,
    factorization_to_dict,
    parse_cone,
    parse_encoding,
    parse_factorization,
    parse_instance,
    parse_points,
    read_json,
    sha256_file,
    write_atomic,
)
from .nets import NetSpec, enumerate_net, net_cardinality_bound, net_cardinality_bound_log2
from .polytopes import cyclic_instance, slack_factorization, zero_one_ground_set, zero_one_instance
from .recovery import counterexample_search, recover_linear_maps
from .scaling import SolverOptions, normalize_factorization, normalize_on_support, nt_scaling_point
from .barriers import BarrierPoint

log = logging.getLogger("conescale")


# ---------------------------------------------------------------------------
# helpers


def _emit(args, doc, manifest: RunManifest) -> None:
    text = dumps(doc)
    if args.out:
        manifest.outputs[str(args.out)] = write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def _input(manifest: RunManifest, path) -> object:
    data = read_json(path)
    manifest.inputs[str(path)] = sha256_file(path)
    return data


def _vector_arg(text: str, manifest: RunManifest) -> np.ndarray:
    if text.startswith("@"):
        data = _input(manifest, text[1:])
    else:
        try:
            data = [float(x) for x in text.replace(",", " ").split()]
        except ValueError:
            raise SchemaError(f"cannot parse vector {text!r}") from None
    if not isinstance(data, list):
        raise SchemaError("expected a list of numbers", text)
    return np.asarray(data, dtype=float)


def _int_list(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise SchemaError(f"cannot parse integer list {text!r}") from None


def _solver_options(args) -> SolverOptions:
    kw = {"seed": args.seed}
    if getattr(args, "tol", None) is not None:
        kw["kkt_tol"] = args.tol
    if getattr(args, "blockwise", False):
        kw["blockwise"] = True
    if getattr(args, "eps_zero", None) is not None:
        kw["eps_zero"] = args.eps_zero
    return SolverOptions(**kw)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CONESCALE_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# subcommands


def cmd_normalize(args, manifest):
    data = _input(manifest, args.factorization)
    cone = parse_cone(_input(manifest, args.cone)) if args.cone else None
    fac = parse_factorization(data, cone=cone)
    opts = _solver_options(args)
    manifest.options.update(opts.to_dict())
    scaled, cert = normalize_factorization(fac, opts)
    doc = certificate_to_dict(cert, fac.cone)
    doc["scaled"] = factorization_to_dict(scaled)
    return doc


def cmd_nt_scale(args, manifest):
    cone = parse_cone(_input(manifest, args.cone))
    a = as_vector(cone, _vector_arg(args.a, manifest))
    b = as_vector(cone, _vector_arg(args.b, manifest))
    manifest.options["method"] = args.method
    w = nt_scaling_point(cone, a, b, method=args.method)
    res = float(np.linalg.norm(BarrierPoint(cone, w).hessian_apply(a) - b))
    return {"cone": cone.to_dict(), "w": w.tolist(), "residual": res, "relative_residual": res / float(np.linalg.norm(b))}


def cmd_recover_maps(args, manifest):
    data = _input(manifest, args.pairs)
    from .io import _get, _matrix

    mats = {k: _matrix(_get(data, k, "pairs"), f"pairs.{k}") for k in ("A", "A_t", "B", "B_t")}
    manifest.options["tol"] = args.tol
    rec = recover_linear_maps(mats["A"], mats["A_t"], mats["B"], mats["B_t"], tol=args.tol)
    return {
        "G": rec.G.tolist(),
        "Q": rec.Q.tolist(),
        "basis_A": rec.basis_A,
        "basis_B": rec.basis_B,
        "consistency_residual": rec.consistency_residual,
        "inverse_adjoint_error": rec.inverse_adjoint_error,
    }


def cmd_counterexample(args, manifest):
    manifest.options.update(M=args.M, beta_range=list(args.beta_range), grid=args.grid)
    rec = counterexample_search(args.M, tuple(args.beta_range), args.grid)
    return {
        "M": rec.M,
        "beta_range": list(rec.beta_range),
        "grid_size": rec.grid_size,
        "delta": rec.delta,
        "lower_bound": rec.lower_bound,
        "min_max_norm": rec.min_max_norm,
        "certified": rec.certified,
        "families": [vars(f) for f in rec.families],
    }


def cmd_net(args, manifest):
    spec = NetSpec(args.n, args.rho, args.eps, "enumerated" if args.enumerate else "implicit-lattice")
    manifest.options.update(n=args.n, rho=args.rho, eps=args.eps, enumerate=args.enumerate)
    doc = {"n": spec.n, "rho": spec.rho, "eps": spec.eps, "mode": spec.mode, "spacing": spec.spacing}
    if spec.n >= 3:
        doc["cardinality_bound"] = net_cardinality_bound(spec.n, spec.rho, spec.eps)
        doc["cardinality_bound_log2"] = net_cardinality_bound_log2(spec.n, spec.rho, spec.eps)
    if args.enumerate:
        doc["enumerated_size"] = int(enumerate_net(spec).shape[0])
    return doc


def cmd_encode(args, manifest):
    fac = parse_factorization(_input(manifest, args.factorization))
    ground = None
    if args.instance:
        inst = parse_instance(_input(manifest, args.instance))
        ground = inst.ground_set()
    manifest.options.update(M=args.M, fc=args.fc, rho_variant=args.rho_variant, v_bound=args.v_bound)
    enc = encode(fac, args.M, args.fc, rho_variant=args.rho_variant, v_bound=args.v_bound, ground_set=ground)
    return enc.to_dict()


def _reconstruction_doc(rec) -> dict:
    return {
        "accepted": [list(p) for p in rec.accepted],
        "candidates": [
            {"point": list(c.point), "status": c.status, "violation": c.violation, "method": c.method}
            for c in rec.candidates
        ],
    }


def cmd_reconstruct(args, manifest):
    enc = parse_encoding(_input(manifest, args.encoded))
    P = parse_points(_input(manifest, args.candidates))
    manifest.options.update(max_iters=args.max_iters, halfwidth=enc.delta, accept_tol=enc.delta / 2,
                            reject_margin=enc.delta)
    rec = reconstruct(enc, P, args.max_iters)
    doc = _reconstruction_doc(rec)
    if rec.indeterminate:
        args._deferred_error = IndeterminateError(f"{len(rec.indeterminate)} candidate(s) indeterminate")
    return doc


def cmd_polytope(args, manifest):
    subset = _int_list(args.subset)
    if args.family == "zero-one":
        manifest.options.update(d=args.d, subset=subset)
        inst = zero_one_instance(args.d, subset)
    else:
        manifest.options.update(d=args.d, t=args.t, subset=subset)
        inst = cyclic_instance(args.d, args.t, subset)
    doc = inst.to_dict()
    if args.factorization:
        doc["factorization"] = factorization_to_dict(slack_factorization(inst))
    return doc


def cmd_bound(args, manifest):
    manifest.options.update(vars_subset(args, ("d", "n", "fc", "t", "rho_variant")))
    if args.family == "zero-one":
        rep = zero_one_ruled_out(args.d, args.n, args.fc, args.rho_variant)
    else:
        rep = cyclic_ruled_out(args.d, args.t, args.n, args.fc, args.rho_variant)
    return rep.to_dict()


def vars_subset(args, keys):
    return {k: getattr(args, k) for k in keys if hasattr(args, k)}


def _pipeline_one(d: int, index: int, X: list[int], opts: SolverOptions, rho_variant: str) -> dict:
    inst = zero_one_instance(d, X)
    fac = slack_factorization(inst)
    scaled, cert = normalize_on_support(fac, opts)
    f_c = math.sqrt(cert.theta)
    ground = zero_one_ground_set(d)
    enc = encode(scaled, inst.M, f_c, rho_variant=rho_variant, ground_set=ground)
    rec = reconstruct(enc, ground)
    exact = sorted(rec.accepted) == sorted(inst.V)
    return {
        "index": index,
        "instance": inst.to_dict(),
        "certificate": certificate_to_dict(cert, fac.cone),
        "encoding": enc.to_dict(),
        "reconstruction": _reconstruction_doc(rec),
        "exact": exact,
        "indeterminate": len(rec.indeterminate),
    }


def cmd_pipeline(args, manifest):
    d = args.d
    if args.cone != "orthant-auto":
        raise PreconditionError(f"unsupported cone mode {args.cone!r}")
    n_points = 2 ** (d - 1)
    if args.subset == "all":
        if n_points > 5:
            raise PreconditionError("--subset all enumerates 2^(2^(d-1)) sets; only d <= 3 is supported")
        masks = list(range(2**n_points))
    else:
        masks = _int_list(args.subset)
    opts = _solver_options(args)
    manifest.options.update(opts.to_dict(), d=d, subset=args.subset, cone=args.cone, rho_variant=args.rho_variant)
    jobs = [(m, [i for i in range(n_points) if (m >> i) & 1]) for m in masks]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(lambda j: _pipeline_one(d, j[0], j[1], opts, args.rho_variant), jobs))
    if args.out_dir:
        out_dir = Path(args.out_dir)
        for res in results:
            m = RunManifest("pipeline-instance", [f"mask={res['index']}"], options=dict(manifest.options))
            path = out_dir / f"instance_{res['index']:04d}.json"
            m.outputs[str(path)] = write_atomic(path, dumps(res))
            doc = m.finish(0)
            doc.pop("wall_time")
            write_atomic(out_dir / f"instance_{res['index']:04d}.manifest.json", dumps(doc))
    keys = {
        (tuple(map(tuple, r["encoding"]["F"])), tuple(map(tuple, r["encoding"]["net_coords"]))) for r in results
    }
    summary = {
        "d": d,
        "instances": len(results),
        "all_exact": all(r["exact"] for r in results),
        "distinct_encodings": len(keys),
        "indeterminate": sum(r["indeterminate"] for r in results),
        "results": [
            {"mask": r["index"], "exact": r["exact"], "rank": r["encoding"]["rank"],
             "accepted": r["reconstruction"]["accepted"]}
            for r in results
        ],
    }
    if summary["indeterminate"]:
        args._deferred_error = IndeterminateError("some candidates were indeterminate")
    return summary


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conescale", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument("--manifest", type=Path, help="write a run manifest here")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("normalize", parents=[common], help="normalize a factorization")
    s.add_argument("--cone", type=Path, help="cone JSON (overrides the factorization's cone)")
    s.add_argument("--factorization", type=Path, required=True)
    s.add_argument("--tol", type=float, default=None, help="KKT tolerance relative to 1 + Delta")
    s.add_argument("--blockwise", action="store_true")
    s.add_argument("--eps-zero", type=float, default=None)
    s.set_defaults(func=cmd_normalize)

    s = sub.add_parser("nt-scale", parents=[common], help="Nesterov-Todd scaling point")
    s.add_argument("--cone", type=Path, required=True)
    s.add_argument("--a", required=True, help="comma-separated vector or @file.json")
    s.add_argument("--b", required=True, help="comma-separated vector or @file.json")
    s.add_argument("--method", choices=("auto", "newton"), default="auto")
    s.set_defaults(func=cmd_nt_scale)

    s = sub.add_parser("recover-maps", parents=[common], help="recover linear maps from paired families")
    s.add_argument("--pairs", type=Path, required=True, help="JSON with A, A_t, B, B_t")
    s.add_argument("--tol", type=float, default=1e-9)
    s.set_defaults(func=cmd_recover_maps)

    s = sub.add_parser("counterexample", parents=[common], help="half-cone counterexample certificate")
    s.add_argument("--M", type=float, default=10.0)
    s.add_argument("--beta-range", type=float, nargs=2, default=(-10.0, 10.0))
    s.add_argument("--grid", type=int, default=4001)
    s.set_defaults(func=cmd_counterexample)

    s = sub.add_parser("net", parents=[common], help="lattice net parameters")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--rho", type=float, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--enumerate", action="store_true")
    s.set_defaults(func=cmd_net)

    s = sub.add_parser("encode", parents=[common], help="compact encoding of a labeled factorization")
    s.add_argument("--factorization", type=Path, required=True)
    s.add_argument("--M", type=int, required=True)
    s.add_argument("--fc", type=float, required=True)
    s.add_argument("--rho-variant", choices=("d+1", "n+1"), default="d+1")
    s.add_argument("--v-bound", type=float, default=1.0)
    s.add_argument("--instance", type=Path, help="instance JSON whose ground set is checked for separation")
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("reconstruct", parents=[common], help="reconstruct V from an encoding")
    s.add_argument("--encoded", type=Path, required=True)
    s.add_argument("--candidates", type=Path, required=True)
    s.add_argument("--max-iters", type=int, default=300)
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("polytope", help="generate a polytope instance")
    psub = s.add_subparsers(dest="family", required=True)
    z = psub.add_parser("zero-one", parents=[common])
    z.add_argument("--d", type=int, required=True)
    z.add_argument("--subset", default="", help="indices into {0,1}^(d-1), binary with the first coordinate most significant")
    z.add_argument("--factorization", action="store_true", help="include the slack factorization")
    z.set_defaults(func=cmd_polytope)
    c = psub.add_parser("cyclic", parents=[common])
    c.add_argument("--d", type=int, required=True)
    c.add_argument("--t", type=int, required=True)
    c.add_argument("--subset", default="")
    c.add_argument("--factorization", action="store_true")
    c.set_defaults(func=cmd_polytope)

    s = sub.add_parser("bound", help="counting bound report")
    bsub = s.add_subparsers(dest="family", required=True)
    for fam in ("zero-one", "cyclic"):
        b = bsub.add_parser(fam, parents=[common])
        b.add_argument("--d", type=int, required=True)
        if fam == "cyclic":
            b.add_argument("--t", type=int, required=True)
        b.add_argument("--n", type=int, required=True)
        b.add_argument("--fc", type=float, required=True)
        b.add_argument("--rho-variant", choices=("d+1", "n+1"), default="d+1")
        b.set_defaults(func=cmd_bound)

    s = sub.add_parser("pipeline", help="generate, normalize, encode and reconstruct a family")
    psub = s.add_subparsers(dest="family", required=True)
    z = psub.add_parser("zero-one", parents=[common])
    z.add_argument("--d", type=int, default=3)
    z.add_argument("--subset", default="all", help="'all' or a list of subset bitmasks")
    z.add_argument("--cone", default="orthant-auto")
    z.add_argument("--rho-variant", choices=("d+1", "n+1"), default="d+1")
    z.add_argument("--out-dir", type=Path, help="directory for per-instance results and manifests")
    z.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    command = args.command + (f" {args.family}" if getattr(args, "family", None) else "")
    manifest = RunManifest(command, argv, options={"seed": args.seed})
    code = 0
    try:
        doc = args.func(args, manifest)
        _emit(args, doc, manifest)
        deferred = getattr(args, "_deferred_error", None)
        if deferred is not None:
            raise deferred
    except ConeScaleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = exc.exit_code
    if args.manifest:
        write_atomic(args.manifest, dumps(manifest.finish(code)))
    return code


if __name__ == "__main__":
    sys.exit(main())
