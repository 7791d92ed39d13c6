"""Energy error sandwiched between the consistency error and the stability
constant, and the Aubin-Nitsche decomposition of the L2 error functional.

Run with ``python demos/bound_audit.py``.
"""

from strang_lab.studies import StudySpec, run_bound_audit


def main():
    for name in ("vem1", "vem2", "dg1", "hmm"):
        rep = run_bound_audit(StudySpec(name, case="smooth-sine", eps=1e-2, n0=8, levels=2),
                              write=False)
        for r in rep.rows:
            b = r.bound
            line = (f"{name:5s} n={r.n:3d}  err={b.err:.3e}  dual/gamma={b.dual / b.gamma:.3e}"
                    f"  ||a_h||*err={b.form_norm * b.err:.3e}  dual={b.dual:.3e}")
            if r.aubin_nitsche is not None:
                line += f"  AN residual={r.aubin_nitsche.residual:.1e}"
            print(line)


if __name__ == "__main__":
    main()
