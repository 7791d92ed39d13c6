"""Convergence studies, anisotropy sweeps, projector-rate tables and bound
audits, with deterministic CSV output."""

import io
import math
import os
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import dg, fv, vem
from .framework import (aubin_nitsche_identity, consistency_dual_norm, error_measures,
                        solve_scheme, stability_constant, verify_energy_bound)
from .mesh import build_cartesian, perturb
from .model import CASES, get_case
from .polybasis import eoc, projector_rate_study

SCHEMES = ("tpfa", "hmm", "mpfa-uniform", "mpfa-l", "mpfa-g",
           "vem1", "vem2", "dg1", "dg2", "dg3")
CSV_COLUMNS = ("level", "h", "ndof", "err_energy", "err_energy_recons", "err_l2", "cons_dual",
               "gamma_num", "gamma_theory", "slack_upper", "slack_lower",
               "eoc_energy", "eoc_l2")
AUDIT_COLUMNS = ("form_norm", "an_g_term", "an_dual_term", "an_primal_dual", "an_residual")
EXACT_TOL = 1e-9
SLACK_TOL = 1e-9


class UnknownNameError(KeyError):
    """Unknown scheme or case name."""


def default_seed():
    return int(os.environ.get("STRANG_LAB_SEED", "0"))


def normalize_scheme(name, k=None, mpfa_strategy=None):
    """Canonical scheme name from a name plus optional degree or MPFA strategy.

    ``vem``/``dg`` take their degree from ``k``; ``mpfa`` takes the strategy.
    """
    name = name.lower()
    if name in ("vem", "dg"):
        if k is None:
            raise UnknownNameError(f"scheme {name!r} needs a degree")
        name = f"{name}{int(k)}"
    elif name == "mpfa":
        name = f"mpfa-{mpfa_strategy or 'uniform'}"
    elif k is not None and name[-1:].isdigit() and int(name[-1]) != int(k):
        raise UnknownNameError(f"scheme {name!r} conflicts with k = {k}")
    if name not in SCHEMES:
        raise UnknownNameError(f"unknown scheme {name!r}; known: {', '.join(SCHEMES)}")
    return name


def scheme_rate(name):
    """Predicted energy rate r of a scheme."""
    if name[-1].isdigit():
        return int(name[-1])
    return 1


@dataclass(frozen=True)
class StudySpec:
    scheme: str
    case: str = "smooth-sine"
    k: Optional[int] = None
    mesh: str = "cartesian"
    n0: int = 8
    levels: int = 4
    perturb: float = 0.0
    mesh_seed: Optional[int] = None
    eta: float = 10.0
    stab_scale: float = 1.0
    mpfa_strategy: Optional[str] = None
    eps: Optional[float] = None
    out: Optional[str] = None
    seed: int = field(default_factory=default_seed)

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("a study needs at least two levels")
        if self.n0 < 1:
            raise ValueError("the coarsest mesh needs at least one cell per direction")
        fam = self.mesh.split(":")
        if fam[0] == "perturbed":
            amp = float(fam[1]) if len(fam) > 1 else 0.1
            seed = int(fam[2]) if len(fam) > 2 else self.mesh_seed
            object.__setattr__(self, "mesh", "cartesian")
            object.__setattr__(self, "perturb", amp)
            object.__setattr__(self, "mesh_seed", seed)
        elif fam[0] != "cartesian" or len(fam) > 1:
            raise ValueError(f"unknown mesh family {self.mesh!r}")
        if self.case not in CASES:
            raise UnknownNameError(f"unknown case {self.case!r}; known: {', '.join(sorted(CASES))}")
        object.__setattr__(self, "scheme", normalize_scheme(self.scheme, self.k, self.mpfa_strategy))

    @property
    def rate(self):
        return scheme_rate(self.scheme)

    def sizes(self):
        return [self.n0 * 2 ** j for j in range(self.levels)]


# ----------------------------------------------------------------------
def make_case(name, eps=None):
    if eps is None:
        return get_case(name)
    if name == "layered":
        raise ValueError("the layered case has a fixed isotropic diffusion")
    return get_case(name, K=np.diag([1.0, float(eps)]))


def make_mesh(spec: StudySpec, n):
    nsub = 2 if spec.case == "layered" else 1
    mesh = build_cartesian(n, n, n_subdomains_x=nsub)
    if spec.perturb > 0:
        seed = spec.seed if spec.mesh_seed is None else spec.mesh_seed
        mesh = perturb(mesh, spec.perturb, seed=seed)
    return mesh


def build_scheme(name, mesh, case, eta=10.0, stab_scale=1.0, warn=True):
    """Assemble a named scheme on ``mesh`` for ``case``."""
    name = normalize_scheme(name)
    if name in fv.FV_SCHEMES:
        return fv.build_fv(name, mesh, case, stab_scale=stab_scale)
    k = int(name[-1])
    if name.startswith("vem"):
        return vem.assemble_vem(mesh, case.field, k, case)
    return dg.assemble_swip(mesh, case.field, k, eta, case, warn=warn)


@dataclass
class LevelResult:
    level: int
    n: int
    h: float
    ndof: int
    err_energy: float
    err_energy_recons: float
    err_l2: float
    cons_dual: float
    gamma_num: float
    gamma_theory: float
    slack_upper: float
    slack_lower: float
    bound: object = None
    aubin_nitsche: object = None
    eoc_energy: float = math.nan
    eoc_energy_recons: float = math.nan
    eoc_l2: float = math.nan
    eoc_cons_dual: float = math.nan

    @property
    def coercive(self):
        return self.gamma_num > 0

    @property
    def slacks_ok(self):
        return (not self.coercive) or (self.slack_upper >= -SLACK_TOL
                                       and self.slack_lower >= -SLACK_TOL)


@dataclass
class ConvergenceReport:
    spec: StudySpec
    rows: list

    @property
    def coercive(self):
        return all(r.coercive for r in self.rows)

    @property
    def passed(self):
        return all(r.slacks_ok for r in self.rows)

    def last_eoc(self, key):
        return getattr(self.rows[-1], "eoc_" + key)

    def slope(self, key):
        """Least-squares slope of log(error) against log(h)."""
        h = np.array([r.h for r in self.rows])
        e = np.array([getattr(r, key) for r in self.rows])
        ok = np.isfinite(e) & (e > 0)
        if ok.sum() < 2:
            return math.nan
        return float(np.polyfit(np.log(h[ok]), np.log(e[ok]), 1)[0])

    def to_csv(self, extra=()):
        return format_csv(self.rows, extra)


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None or not np.isfinite(x):
        return "nan"
    return f"{x:.10e}"


def _eoc_cell(row, prev, key):
    if prev is None:
        return ""
    a, b = getattr(prev, key), getattr(row, key)
    if np.isfinite(a) and np.isfinite(b) and max(a, b) <= EXACT_TOL:
        return "exact"
    return _fmt(getattr(row, "eoc_" + key.replace("err_", "")))


def format_csv(rows, extra=()):
    out = io.StringIO()
    out.write(",".join(CSV_COLUMNS + tuple(extra)) + "\n")
    prev = None
    for r in rows:
        vals = [r.level, r.h, r.ndof, r.err_energy, r.err_energy_recons, r.err_l2, r.cons_dual,
                r.gamma_num, r.gamma_theory, r.slack_upper, r.slack_lower]
        cells = [_fmt(v) for v in vals]
        cells.append(_eoc_cell(r, prev, "err_energy"))
        cells.append(_eoc_cell(r, prev, "err_l2"))
        for key in extra:
            cells.append(_fmt(_extra_value(r, key)))
        out.write(",".join(cells) + "\n")
        prev = r
    return out.getvalue()


def _extra_value(r, key):
    if key == "form_norm":
        return r.bound.form_norm if r.bound is not None else math.nan
    an = r.aubin_nitsche
    if an is None:
        return math.nan
    return getattr(an, key[3:])


def run_level(spec: StudySpec, level, n, case=None, audit=False, dual_case=None):
    case = make_case(spec.case, spec.eps) if case is None else case
    mesh = make_mesh(spec, n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = build_scheme(spec.scheme, mesh, case, spec.eta, spec.stab_scale)
    uh = solve_scheme(s)
    err, rec, l2 = error_measures(s, uh)
    stab = stability_constant(s, seed=spec.seed)
    g_th = math.nan if stab.gamma_theory is None else stab.gamma_theory
    bound = None
    if stab.coercive:
        bound = verify_energy_bound(s, uh, stab, seed=spec.seed)
        dual, su, sl = bound.dual, bound.rel_upper, bound.rel_lower
    else:
        dual, su, sl = consistency_dual_norm(s), math.nan, math.nan
    an = None
    if audit and s.R is not None:
        an = aubin_nitsche_identity(s, dual_case or case, uh)
    return LevelResult(level=level, n=n, h=mesh.h, ndof=s.ndof, err_energy=err,
                       err_energy_recons=rec, err_l2=l2, cons_dual=dual,
                       gamma_num=stab.gamma, gamma_theory=g_th, slack_upper=su,
                       slack_lower=sl, bound=bound, aubin_nitsche=an)


def _fill_eoc(rows):
    hs = [r.h for r in rows]
    for key in ("energy", "energy_recons", "l2", "cons_dual"):
        attr = key if key == "cons_dual" else "err_" + key
        rates = eoc([getattr(r, attr) for r in rows], hs)
        for r, v in zip(rows, rates):
            setattr(r, "eoc_" + key, float(v))


def _write(spec, text):
    if spec.out:
        with open(spec.out, "w", newline="\n") as fh:
            fh.write(text)


def run_convergence(spec: StudySpec, write=True):
    """Run all levels of a study; writes the CSV when ``spec.out`` is set."""
    case = make_case(spec.case, spec.eps)
    rows = [run_level(spec, j, n, case) for j, n in enumerate(spec.sizes())]
    _fill_eoc(rows)
    rep = ConvergenceReport(spec, rows)
    if write:
        _write(spec, rep.to_csv())
    return rep


def run_bound_audit(spec: StudySpec, write=True):
    """Convergence study plus ||a_h|| estimates and the Aubin-Nitsche
    decomposition with the smooth-sine dual solution."""
    case = make_case(spec.case, spec.eps)
    dual_case = make_case("smooth-sine", spec.eps) if spec.case != "layered" else None
    rows = [run_level(spec, j, n, case, audit=dual_case is not None, dual_case=dual_case)
            for j, n in enumerate(spec.sizes())]
    _fill_eoc(rows)
    pd = [abs(r.aubin_nitsche.primal_dual) if r.aubin_nitsche else math.nan for r in rows]
    rates = eoc(pd, [r.h for r in rows])
    for r, v in zip(rows, rates):
        r.eoc_primal_dual = float(v)
    rep = ConvergenceReport(spec, rows)
    if write:
        _write(spec, rep.to_csv(AUDIT_COLUMNS))
    return rep


# ----------------------------------------------------------------------
@dataclass
class SweepRow:
    eps: float
    level: int
    h: float
    err: float
    normalized: float


@dataclass
class SweepReport:
    spec: StudySpec
    eps: tuple
    rows: list
    ratios: list    # max/min of the normalized error across eps, per level

    @property
    def ratio(self):
        return max(self.ratios)

    def to_csv(self):
        out = io.StringIO()
        out.write("eps,level,h,err_energy,normalized\n")
        for r in self.rows:
            out.write(",".join([_fmt(r.eps), str(r.level), _fmt(r.h), _fmt(r.err),
                                _fmt(r.normalized)]) + "\n")
        out.write("level,ratio\n")
        for j, q in enumerate(self.ratios):
            out.write(f"{j},{_fmt(q)}\n")
        return out.getvalue()


def run_anisotropy_sweep(spec: StudySpec, eps_list=(1.0, 1e-2, 1e-4), error="err_energy",
                         write=True):
    """Errors divided by sqrt(alpha) sqrt(lambda_max) h^r for K = diag(1, eps)."""
    rows = []
    by_level = {}
    for e in eps_list:
        sub = replace(spec, eps=float(e), k=None, mpfa_strategy=None)
        lam_max = max(1.0, e)
        alpha = max(1.0, e) / min(1.0, e)
        case = make_case(spec.case, e)
        for j, n in enumerate(spec.sizes()):
            lv = _sweep_level(sub, j, n, case)
            err = getattr(lv, error)
            norm_err = err / (math.sqrt(alpha) * math.sqrt(lam_max) * lv.h ** spec.rate)
            rows.append(SweepRow(float(e), j, lv.h, err, norm_err))
            by_level.setdefault(j, []).append(norm_err)
    ratios = [max(v) / min(v) for _, v in sorted(by_level.items())]
    rep = SweepReport(spec, tuple(float(e) for e in eps_list), rows, ratios)
    if write:
        _write(spec, rep.to_csv())
    return rep


def _sweep_level(spec, level, n, case):
    mesh = make_mesh(spec, n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = build_scheme(spec.scheme, mesh, case, spec.eta, spec.stab_scale)
    uh = solve_scheme(s)
    err, rec, l2 = error_measures(s, uh)
    return LevelResult(level, n, mesh.h, s.ndof, err, rec, l2, *([math.nan] * 5))


# ----------------------------------------------------------------------
def run_projector_rates(projector="oblique", k=1, eps=1.0, levels=4, n0=4,
                        closure="cell-mean", out=None):
    """Projection errors of sin(pi x) sin(pi y) on refined Cartesian meshes.

    Returns ``(rows, csv_text)``; the weighted error is also reported divided
    by sqrt(lambda_max).
    """
    case = make_case("smooth-sine", eps)
    K = np.diag([1.0, float(eps)])
    rows = projector_rate_study(projector, K, case.u, case.grad, k, levels=levels, n0=n0,
                                closure=closure)
    lam_max = max(1.0, float(eps))
    keys = ("h", "l2", "h1", "weighted", "trace", "eoc_l2", "eoc_h1", "eoc_weighted",
            "eoc_trace")
    buf = io.StringIO()
    buf.write("level," + ",".join(keys) + ",weighted_normalized\n")
    for j, r in enumerate(rows):
        r["weighted_normalized"] = r["weighted"] / math.sqrt(lam_max)
        buf.write(f"{j}," + ",".join(_fmt(r[c]) for c in keys)
                  + "," + _fmt(r["weighted_normalized"]) + "\n")
    text = buf.getvalue()
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    return rows, text
