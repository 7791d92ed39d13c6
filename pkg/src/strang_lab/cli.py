"""Command-line entry point ``strang-lab``.

Exit codes: 0 success, 1 failed bound slacks or invalid mesh, 2 unknown
scheme or case, 3 TPFA admissibility failure, 4 non-coercive scheme (the
report is still written).
"""

import argparse
import math
import sys
import warnings

from .fv import AdmissibilityError
from .mesh import MeshError, build_cartesian, perturb, read_mesh, write_mesh
from .studies import (EXACT_TOL, StudySpec, UnknownNameError, default_seed, run_anisotropy_sweep,
                      run_bound_audit, run_convergence, run_projector_rates)

EXIT_OK, EXIT_SLACK, EXIT_NAME, EXIT_ADMISSIBILITY, EXIT_NONCOERCIVE = 0, 1, 2, 3, 4


def _levels(text):
    try:
        n0, count = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("levels must look like N0:L, e.g. 8:4") from None
    if n0 < 1 or count < 1:
        raise argparse.ArgumentTypeError("levels must be positive")
    return n0, count


def _floats(text):
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated list of numbers") from None


def _study_args(p):
    p.add_argument("--scheme", required=True,
                   help="tpfa, hmm, mpfa-uniform, mpfa-l, mpfa-g, vem1, vem2, dg1, dg2, dg3 "
                        "(or vem/dg with --k, mpfa with --mpfa-strategy)")
    p.add_argument("--case", default="smooth-sine", help="smooth-sine, affine or layered")
    p.add_argument("--k", type=int, default=None, help="polynomial degree")
    p.add_argument("--mesh", default="cartesian", help="cartesian or perturbed:AMP:SEED")
    p.add_argument("--levels", type=_levels, default=(8, 4), help="N0:L (default 8:4)")
    p.add_argument("--perturb", type=float, default=0.0, help="vertex perturbation amplitude")
    p.add_argument("--seed", type=int, default=None,
                   help="random seed (default: $STRANG_LAB_SEED or 0)")
    p.add_argument("--eta", type=float, default=10.0, help="DG penalty parameter")
    p.add_argument("--stab-scale", type=float, default=1.0, help="HMM stabilization scale")
    p.add_argument("--mpfa-strategy", choices=("uniform", "l", "g"), default=None)
    p.add_argument("--eps", type=float, default=None, help="use K = diag(1, eps)")
    p.add_argument("--out", default=None, help="CSV output path")


def _spec(args, **over):
    seed = default_seed() if args.seed is None else args.seed
    n0, count = args.levels
    kw = dict(scheme=args.scheme, case=args.case, k=args.k, mesh=args.mesh, n0=n0, levels=count,
              perturb=args.perturb, eta=args.eta, stab_scale=args.stab_scale,
              mpfa_strategy=args.mpfa_strategy, eps=args.eps, out=args.out, seed=seed)
    kw.update(over)
    return StudySpec(**kw)


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)


def _summary(rep):
    last = rep.rows[-1]
    if max(last.err_energy, rep.rows[-2].err_energy) <= EXACT_TOL:
        print(f"# {rep.spec.scheme} / {rep.spec.case}: exact", file=sys.stderr)
        return
    print(f"# {rep.spec.scheme} / {rep.spec.case}: eoc_energy={_num(last.eoc_energy)} "
          f"eoc_energy_recons={_num(last.eoc_energy_recons)} eoc_l2={_num(last.eoc_l2)} "
          f"eoc_cons_dual={_num(last.eoc_cons_dual)} gamma_min={_num(min(r.gamma_num for r in rep.rows))}",
          file=sys.stderr)


def _num(x):
    return "nan" if x is None or not math.isfinite(x) else f"{x:.4g}"


def _report_status(rep):
    if not rep.coercive:
        print("non-coercive scheme: gamma_num <= 0 on some level", file=sys.stderr)
        return EXIT_NONCOERCIVE
    if not rep.passed:
        print("FAILED: a bound slack is below -1e-9 (relative)", file=sys.stderr)
        return EXIT_SLACK
    return EXIT_OK


def cmd_study(args):
    rep = run_convergence(_spec(args))
    _emit(rep.to_csv(), args.out)
    _summary(rep)
    return _report_status(rep)


def cmd_bound_audit(args):
    from .studies import AUDIT_COLUMNS

    rep = run_bound_audit(_spec(args))
    _emit(rep.to_csv(AUDIT_COLUMNS), args.out)
    _summary(rep)
    return _report_status(rep)


def cmd_sweep(args):
    spec = _spec(args, eps=None)
    error = "err_energy_recons" if args.error == "recons" else "err_energy"
    rep = run_anisotropy_sweep(spec, args.eps_list, error=error)
    _emit(rep.to_csv(), args.out)
    print(f"# normalized-error ratio max/min = {rep.ratio:.4g}", file=sys.stderr)
    return EXIT_OK


def cmd_projector_rates(args):
    n0, count = args.levels
    _, text = run_projector_rates(args.projector, args.k, args.eps, levels=count, n0=n0,
                                  closure=args.closure, out=args.out)
    _emit(text, args.out)
    return EXIT_OK


def cmd_mesh(args):
    if args.mesh_cmd == "gen":
        mesh = build_cartesian(args.nx, args.ny or args.nx, n_subdomains_x=args.subdomains)
        if args.perturb > 0:
            seed = default_seed() if args.seed is None else args.seed
            mesh = perturb(mesh, args.perturb, seed=seed)
        if args.out:
            write_mesh(mesh, args.out)
        else:
            print(repr(mesh))
        return EXIT_OK
    try:
        mesh = read_mesh(args.path)
        mesh.validate()
    except (MeshError, OSError, ValueError) as exc:
        print(f"invalid mesh: {exc}", file=sys.stderr)
        return EXIT_SLACK
    m = mesh.regularity_metrics()
    print(f"ok: {mesh.ncells} cells, {mesh.nfaces} faces, h={m.h:.6g}, theta={m.theta:.6g}, "
          f"eta_jump={m.eta_jump:.6g}, max_faces_per_cell={m.max_faces_per_cell}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="strang-lab",
                                description="Polytopal diffusion schemes with error auditing.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("study", help="convergence study, CSV output")
    _study_args(s)
    s.set_defaults(func=cmd_study)

    s = sub.add_parser("bound-audit", help="energy bounds and Aubin-Nitsche decomposition")
    _study_args(s)
    s.set_defaults(func=cmd_bound_audit)

    s = sub.add_parser("sweep", help="anisotropy sweep with K = diag(1, eps)")
    _study_args(s)
    s.add_argument("--eps-list", type=_floats, default=(1.0, 1e-2, 1e-4))
    s.add_argument("--error", choices=("energy", "recons"), default="energy")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("projector-rates", help="projection errors on refined meshes")
    s.add_argument("--projector", choices=("oblique", "l2"), default="oblique")
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--eps", type=float, default=1.0)
    s.add_argument("--levels", type=_levels, default=(4, 4))
    s.add_argument("--closure", choices=("cell-mean", "boundary-mean"), default="cell-mean")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_projector_rates)

    s = sub.add_parser("mesh", help="generate or validate meshes")
    msub = s.add_subparsers(dest="mesh_cmd", required=True)
    g = msub.add_parser("gen")
    g.add_argument("--nx", type=int, required=True)
    g.add_argument("--ny", type=int, default=None)
    g.add_argument("--subdomains", type=int, default=1)
    g.add_argument("--perturb", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", default=None)
    v = msub.add_parser("validate")
    v.add_argument("path")
    s.set_defaults(func=cmd_mesh)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return args.func(args)
    except (UnknownNameError, KeyError) as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_NAME
    except AdmissibilityError as exc:
        print(f"error: mesh not admissible for TPFA: {exc}", file=sys.stderr)
        return EXIT_ADMISSIBILITY


if __name__ == "__main__":
    sys.exit(main())
