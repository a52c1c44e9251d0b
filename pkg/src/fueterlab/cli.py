"""Command line driver: ``fueterlab {spectrum,specflow,verify,floer,ample,rerun}``.

Exit codes: 0 success, 1 input error, 2 uncertified truncation,
3 degenerate crossing, 4 degenerate critical point, 5 a verification
check failed its documented tolerance.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import frames as fr
from .reports import RunDirectory, write_csv, write_svg

EXIT_OK, EXIT_INPUT, EXIT_TRUNCATION, EXIT_CROSSING, EXIT_CRITICAL, EXIT_CHECK = 0, 1, 2, 3, 4, 5

CATALOG = {
    "torus3": fr.torus3,
    "standard_s3": fr.standard_s3,
    "singular_s3": fr.singular_s3,
    "product_s1s2": fr.product_s1s2,
}


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# ----------------------------------------------------------------- inputs


def _read_json_arg(arg, what):
    """Return (object, raw bytes) from a file path or inline JSON text."""
    p = Path(arg)
    try:
        raw = p.read_bytes() if p.exists() else arg.encode()
        return json.loads(raw.decode()), raw
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read {what} {arg!r}: {exc}") from exc


def load_frame(arg):
    if arg in CATALOG:
        f = CATALOG[arg]()
        return f, json.dumps(f.to_json(), sort_keys=True).encode()
    obj, raw = _read_json_arg(arg, "frame")
    if isinstance(obj, str) and obj in CATALOG:
        return load_frame(obj)
    try:
        return fr.FrameSpec.from_json(obj), raw
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid frame: {exc}") from exc


def _frame_cutoff(f, args):
    if f.manifold == fr.TORUS3:
        return args.kmax
    if f.manifold == fr.SPHERE3:
        return args.jmax
    return args.lmax


# --------------------------------------------------------------- commands


def cmd_spectrum(args, run):
    from .spectral import blocks_for, block_labels, kernel_dimension
    from .frames import random_points, spinc_lambda

    f, raw = load_frame(args.frame)
    cutoff = _frame_cutoff(f, args)
    tol = 1e-8 if args.tol is None else args.tol
    res = kernel_dimension(f, cutoff=cutoff, tol=tol, M_max=args.mmax)
    if f.manifold == fr.PRODUCT_S1S2:
        L = 8 if cutoff is None else cutoff
        labels = [(L, m) for m in range(args.mmax + 1)]
    else:
        labels = block_labels(f, cutoff)
    rows = []
    for b in blocks_for(f, labels):
        for i, w in enumerate(b.eigenvalues):
            rows.append((b.label_str(), i, w, str(b.weight)))
    write_csv(
        run.file("eigenvalues.csv"),
        ["block", "index", "eigenvalue", "weight"],
        rows,
        comments=[
            "quantity: eigenvalues of the Fueter operator d_v per block (units: 1/length)",
            f"frame: {json.dumps(f.to_json())}",
        ],
    )
    pts = random_points(f.manifold, 100, np.random.default_rng(args.seed))
    lam = spinc_lambda(f, pts)
    summary = {
        "kernel_dimension": res.dimension,
        "verdict": "Regular" if res.regular else "Singular",
        "lambda_spinc": float(np.mean(lam)),
        "lambda_spinc_spread": float(np.ptp(lam)),
        "gap": res.gap,
        "neglected_bound": res.neglected_bound,
        "per_block": res.per_block,
    }
    run.file("summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"kernel_dimension {res.dimension}")
    print(f"verdict {summary['verdict']}")
    print(f"lambda_spinc {summary['lambda_spinc']:.12g}")
    return EXIT_OK, {"frame": f.to_json(), "cutoff": str(cutoff), "tol": tol}, {"frame": raw}


def _load_path(args):
    from . import specflow as sf

    arg = args.path
    if arg == "s3_catalog":
        obj, raw = {"kind": "catalog"}, b'{"kind": "catalog"}'
    else:
        obj, raw = _read_json_arg(arg, "path")
    kind = obj.get("kind")
    s_range = tuple(args.s_range) if args.s_range else tuple(obj.get("s_range", ()))
    try:
        if kind == "catalog":
            p = sf.s3_catalog_path(s_range or (0.0, 1.2))
        elif kind == "perturbation":
            f, _ = load_frame(json.dumps(obj["frame"]) if not isinstance(obj["frame"], str) else obj["frame"])
            p = sf.perturbation_path(f, s_range or (-0.1, 0.1))
        elif kind == "constant":
            f, _ = load_frame(json.dumps(obj["frame"]) if not isinstance(obj["frame"], str) else obj["frame"])
            p = sf.constant_path(f, s_range or (0.0, 1.0))
        elif kind == "polynomial":
            p = sf.polynomial_path(obj["coeffs"], s_range or (-1.0, 1.0))
        elif kind == "linear":
            U0 = np.asarray(obj["U0"], dtype=float).reshape(3, 3)
            U1 = np.asarray(obj["U1"], dtype=float).reshape(3, 3)
            p = sf.linear_path(obj["manifold"], U0, U1, s_range or (0.0, 1.0))
        else:
            raise InputError(f"unknown path kind {kind!r}")
    except (KeyError, ValueError) as exc:
        raise InputError(f"invalid path: {exc}") from exc
    if args.reverse:
        p = p.reversed()
    return p, obj, raw


def cmd_specflow(args, run):
    from . import specflow as sf

    p, obj, raw = _load_path(args)
    cutoff = args.jmax if p.manifold == fr.SPHERE3 else args.kmax
    if cutoff is None:
        cutoff = 2
    if p.manifold is None:
        labels, cutoff = [None], None
    else:
        labels = sf.default_labels(p.manifold, cutoff, args.include_constants)
    a, b = p.s_range
    grid = np.linspace(a, b, args.grid)
    curves = sf.eigencurves(p, labels, grid)
    result = sf.spectral_flow(p, labels, args.grid, args.include_constants)
    rows = []
    for c in curves:
        lab = "model" if c.label is None else str(c.label)
        for i, s in enumerate(c.s):
            for k, w in enumerate(c.values[i]):
                rows.append((s, lab, k, w))
        write_svg(
            run.file(f"curves_{lab.replace('/', '_').replace(' ', '')}.svg"),
            {k: (c.s, c.values[:, k]) for k in range(c.values.shape[1])},
            title=f"block {lab}",
        )
    write_csv(
        run.file("curves.csv"),
        ["s", "block", "index", "eigenvalue"],
        rows,
        comments=["quantity: matched eigenvalue curves of d_v(s) per block (units: 1/length)"],
    )
    crossings = [r.to_json() for r in result.crossings]
    run.file("crossings.json").write_text(
        json.dumps({"flow": result.flow, "curve_count": result.curve_count,
                    "per_block": result.per_block, "crossings": crossings}, indent=2) + "\n"
    )
    for r in result.crossings:
        print(f"crossing s={r.s_star:.12f} block={r.label} signature={r.signature} weight={r.weight}")
    print(f"flow {result.flow}")
    print(f"curve_count {result.curve_count}")
    config = {"path": obj, "s_range": list(p.s_range), "grid": args.grid, "cutoff": str(cutoff),
              "reverse": args.reverse, "include_constants": args.include_constants}
    return EXIT_OK, config, {"path": raw}


VERIFY_TOL = {
    "energy": 1e-8,
    "dd2": 1e-10,
    "isoperimetric": 1e-10,
    "s1s2": 1e-7,
    "duality": 1e-10,
    "divergence": 1e-8,
}


def _verify_rows(identity, f, args, rng):
    from . import fields, spectral, variational

    rows = []
    if identity == "energy":
        tr = {fr.TORUS3: (2,), fr.SPHERE3: (3,), fr.PRODUCT_S1S2: (4, 2)}[f.manifold]
        for i in range(args.samples):
            g = fields.random_field(f.manifold, tr, rng, n=2)
            rows.append((i, variational.energy_identity_residual(f, g)))
    elif identity == "dd2":
        if f.manifold == fr.PRODUCT_S1S2:
            raise InputError("dd2 is checked on Torus3 and Sphere3 blocks")
        cutoff = 2 if f.manifold == fr.TORUS3 else Fraction(2)
        for i, lab in enumerate(spectral.block_labels(f, cutoff)):
            rows.append((i, spectral.verify_dd2(f, lab)))
    elif identity == "isoperimetric":
        ys = rng.standard_normal((20, 3))
        ys /= np.linalg.norm(ys, axis=1, keepdims=True)
        for i in range(args.samples):
            loop = variational.FourierLoop.random(8, rng)
            worst = max(l - r for l, r in (variational.isoperimetric_check(y, loop) for y in ys))
            rows.append((i, max(worst, 0.0)))
        y = ys[0]
        lhs, rhs = variational.isoperimetric_check(y, variational.extremal_loop(y))
        rows.append(("equality_witness", abs(lhs - rhs)))
    elif identity == "s1s2":
        for i in range(args.samples):
            g = fields.random_field(fr.PRODUCT_S1S2, (6, 2), rng)
            rows.append((i, variational.s1s2_identity_residual(g)))
    elif identity == "duality":
        pts = fr.random_points(f.manifold, max(args.samples, 1) * 20, rng)
        A = fr.dual_coframe(f, pts)
        V = fr.frame_vectors(f, pts)
        res = np.abs(np.einsum("pid,pjd->pij", A, V) - np.eye(3)).max(axis=(1, 2))
        rows = [(i, r) for i, r in enumerate(res)]
    elif identity == "divergence":
        for i in range(args.samples):
            rows.append((i, fr.divergence_residual(f, n=100, seed=int(rng.integers(2**31)))))
    return rows


def cmd_verify(args, run):
    if args.identity not in VERIFY_TOL:
        raise InputError(f"unknown identity {args.identity!r}; choose from {sorted(VERIFY_TOL)}")
    default = "product_s1s2" if args.identity == "s1s2" else "standard_s3"
    f, raw = load_frame(args.frame or default)
    if args.identity == "s1s2" and f.manifold != fr.PRODUCT_S1S2:
        raise InputError("s1s2 identity needs the ProductS1S2 frame")
    tol = args.tol if args.tol is not None else VERIFY_TOL[args.identity]
    rng = np.random.default_rng(args.seed)
    rows = _verify_rows(args.identity, f, args, rng)
    worst = max((r for _, r in rows), default=0.0)
    ok = worst < tol
    write_csv(
        run.file("residuals.csv"),
        ["sample", "residual"],
        rows,
        comments=[f"quantity: absolute residual of the {args.identity} identity (dimensionless)",
                  f"tolerance: {tol:.3g}"],
    )
    print(f"identity {args.identity}")
    print(f"max_residual {worst:.6e}")
    print("PASS" if ok else "FAIL")
    config = {"identity": args.identity, "frame": f.to_json(), "samples": args.samples,
              "seed": args.seed, "tol": tol}
    return (EXIT_OK if ok else EXIT_CHECK), config, {"frame": raw}


def _load_problem(arg):
    from .floer import HamiltonianSpec

    if arg.startswith("cosine:"):
        obj = {"frame": "torus3", "hamiltonian": {"cosine": float(arg.split(":", 1)[1])}}
        raw = json.dumps(obj, sort_keys=True).encode()
    else:
        obj, raw = _read_json_arg(arg, "problem")
    frame = obj.get("frame", "torus3")
    f, _ = load_frame(frame if isinstance(frame, str) else json.dumps(frame))
    h = obj.get("hamiltonian", {})
    n = int(obj.get("n", h.get("n", 1)))
    if "cosine" in h:
        H = HamiltonianSpec.cosine(float(h["cosine"]), n)
    elif h.get("zero"):
        H = HamiltonianSpec.zero(n)
    else:
        H = HamiltonianSpec.from_json(h)
    return f, H, obj, raw


def cmd_floer(args, run):
    from . import floer

    f, H, obj, raw = _load_problem(args.problem)
    N = int(obj.get("grid", 4))
    multistart = int(obj.get("multistart", 8))
    seed = int(obj.get("seed", args.seed))
    config = {"problem": obj, "grid": N, "multistart": multistart, "seed": seed}
    try:
        res = floer.arnold_count(f, H, multistart=multistart, N=N, seed=seed)
    except floer.DegenerateCriticalPoint as exc:
        print(f"degenerate: {exc}", file=sys.stderr)
        return EXIT_CRITICAL, config, {"problem": raw}
    rows = []
    for i, cp in enumerate(res.solutions):
        rows.append((i, *cp.mean, cp.residual, cp.sigma_min, cp.action, int(cp.is_constant)))
    dim = H.dim
    write_csv(
        run.file("critical_points.csv"),
        ["index", *[f"mean_x{a + 1}" for a in range(dim)], "residual", "sigma_min", "action", "constant"],
        rows,
        comments=["quantity: solutions of the perturbed Fueter equation found by multistart Newton",
                  "units: target coordinates in R^4n / Z^4n; action in units of H"],
    )
    print(f"arnold_count {res.count}")
    print(f"newton_failures {res.failures}")
    status = EXIT_OK
    if res.degenerate:
        print(f"degenerate_solutions {len(res.degenerate)}")
        status = EXIT_CRITICAL
    traj_cfg = obj.get("trajectory")
    if traj_cfg:
        p = floer.FloerProblem(
            f, H, np.asarray(traj_cfg["f_minus"], dtype=float), np.asarray(traj_cfg["f_plus"], dtype=float),
            S=float(traj_cfg.get("S", 3.0)), Ns=int(traj_cfg.get("Ns", 201)), N=N,
        )
        tr = floer.floer_trajectory(p)
        act = floer.action_profile(tr)
        dens = np.concatenate([[0.0], np.sum(np.diff(tr.u, axis=0) ** 2, axis=(1, 2)) / p.ds**2 / p.grid.npoints])
        write_csv(
            run.file("trajectory.csv"),
            ["s", "action", "energy_density"],
            list(zip(tr.s, act, dens)),
            comments=["quantity: action and |d_s u|^2 along the Floer trajectory (units of H)"],
        )
        er = floer.floer_energy_residual(tr)
        print(f"trajectory_residual {tr.residual:.3e}")
        print(f"energy_residual {er:.6e}")
        print(f"action_monotone {floer.action_is_monotone(tr)}")
    return status, config, {"problem": raw}


def cmd_ample(args, run):
    from . import ample

    rng = np.random.default_rng(args.seed)
    config = {"mode": args.mode, "samples": args.samples, "seed": args.seed}
    if args.mode == "equivalence":
        rows = []
        for i in range(args.samples):
            d = ample.random_instance(rng)
            s = ample.is_nondegenerate(d)
            o = ample.nondegenerate_oracle(d, seed=i)
            rows.append((i, s, int(o), int((s != 0) == o)))
        passes = sum(r[3] for r in rows)
        write_csv(run.file("equivalence.csv"), ["instance", "det_sign", "oracle_full_rank", "agree"], rows,
                  comments=["quantity: determinant criterion versus brute-force span test (dimensionless)"])
        print(f"passes {passes}/{args.samples}")
        return (EXIT_OK if passes == args.samples else EXIT_CHECK), config, {}
    if args.mode != "decompose":
        raise InputError(f"unknown mode {args.mode!r}")
    instances = [("canonical", ample.AmpleData(np.eye(3), np.zeros((3, 3, 3))))]
    instances += [(f"random{i}", ample.random_instance(rng)) for i in range(args.samples)]
    L = np.zeros((3, 3, 3))
    L[1, 2] = L[2, 1] = [1.0, 2.0, 3.0]
    instances.append(("empty", ample.AmpleData(np.zeros((3, 3)), L)))
    rows = []
    ok = True
    for name, d in instances:
        for target in (1, -1):
            try:
                dec = ample.convex_decompose(d, target)
            except ample.EmptyIntersection:
                rows.append((name, target, "nan", "nan", "nan", "nan", "empty_intersection"))
                continue
            good = (ample.is_nondegenerate(dec.L1) == target == ample.is_nondegenerate(dec.L2)
                    and dec.midpoint_error(d) < 1e-12)
            ok &= good
            rows.append((name, target, dec.t, dec.dets[0], dec.dets[1], dec.midpoint_error(d),
                         "ok" if good else "FAIL"))
    write_csv(run.file("decompose.csv"),
              ["instance", "target", "t", "det_plus", "det_minus", "midpoint_error", "status"], rows,
              comments=["quantity: convex decomposition L = (L' + L'')/2 with prescribed sign (dimensionless)"])
    print(f"decompositions {'ok' if ok else 'FAIL'}")
    return (EXIT_OK if ok else EXIT_CHECK), config, {}


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fueterlab", description="Fueter operators on divergence free frames.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--out", help="run directory (default: fueterlab-<command>)")
        p.add_argument("--force", action="store_true", help="overwrite a non-empty run directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=None)

    p = sub.add_parser("spectrum", help="block spectrum, kernel dimension and verdict")
    common(p)
    p.add_argument("--frame", required=True, help="frame JSON file, inline JSON, or catalog name")
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--jmax", type=Fraction, default=None)
    p.add_argument("--lmax", type=int, default=None)
    p.add_argument("--mmax", type=int, default=4)

    p = sub.add_parser("specflow", help="eigenvalue curves and spectral flow along a path")
    common(p)
    p.add_argument("--path", required=True, help="path JSON file, inline JSON, or 's3_catalog'")
    p.add_argument("--s-range", type=float, nargs=2, default=None)
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--jmax", type=Fraction, default=None)
    p.add_argument("--grid", type=int, default=121)
    p.add_argument("--reverse", action="store_true")
    p.add_argument("--include-constants", action="store_true")

    p = sub.add_parser("verify", help="check an identity and report residuals")
    common(p)
    p.add_argument("identity", help="one of " + ", ".join(sorted(VERIFY_TOL)))
    p.add_argument("--frame", default=None)
    p.add_argument("--samples", type=int, default=10)

    p = sub.add_parser("floer", help="critical points, Arnold count and trajectories on T^3")
    common(p)
    p.add_argument("--problem", required=True, help="problem JSON file, inline JSON, or 'cosine:<eps>'")

    p = sub.add_parser("ample", help="ampleness property checks")
    common(p)
    p.add_argument("--mode", required=True, choices=["equivalence", "decompose"])
    p.add_argument("--samples", type=int, default=1000)

    p = sub.add_parser("rerun", help="repeat the run recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    return parser


COMMANDS = {
    "spectrum": cmd_spectrum,
    "specflow": cmd_specflow,
    "verify": cmd_verify,
    "floer": cmd_floer,
    "ample": cmd_ample,
}


def _rerun_argv(args):
    manifest = json.loads(Path(args.manifest).read_text())
    argv = list(manifest["argv"])
    if "--out" in argv:
        i = argv.index("--out")
        del argv[i:i + 2]
    argv = [a for a in argv if a != "--force"]
    argv += ["--out", args.out] + (["--force"] if args.force else [])
    return argv


def main(argv=None) -> int:
    from .spectral import SpectralError
    from .specflow import MatchingAmbiguity, NonRegularCrossing

    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "rerun":
        try:
            return main(_rerun_argv(args))
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: cannot rerun manifest: {exc}", file=sys.stderr)
            return EXIT_INPUT
    try:
        run = RunDirectory(args.out or f"fueterlab-{args.command}", force=args.force)
    except (FileExistsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    t0 = time.perf_counter()
    config, inputs = {}, {}
    try:
        code, config, inputs = COMMANDS[args.command](args, run)
        status = "ok" if code == EXIT_OK else f"exit {code}"
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code, status = EXIT_INPUT, "input error"
    except SpectralError as exc:
        print(f"uncertified: {exc}", file=sys.stderr)
        code, status = EXIT_TRUNCATION, "uncertified truncation"
    except NonRegularCrossing as exc:
        print(f"degenerate crossing: {exc}", file=sys.stderr)
        code, status = EXIT_CROSSING, "degenerate crossing"
    except (MatchingAmbiguity, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code, status = EXIT_INPUT, "input error"
    run.write_manifest(args.command, argv, config, inputs, time.perf_counter() - t0, status)
    return code


if __name__ == "__main__":
    sys.exit(main())
