"""Error of vem1 and TPFA for K = diag(1, eps), normalized by
sqrt(alpha) sqrt(lambda_max) h.

The vem1 ratio stays near 10 while the TPFA normalized error shrinks like
eps: its norm carries lambda_min, so the estimate holds but is not sharp.
Run with ``python demos/anisotropy.py``.
"""

from strang_lab.studies import StudySpec, run_anisotropy_sweep


def main():
    for name in ("vem1", "tpfa", "hmm"):
        rep = run_anisotropy_sweep(StudySpec(name, n0=8, levels=2), write=False)
        last = [r for r in rep.rows if r.level == 1]
        cols = "  ".join(f"eps={r.eps:g}: {r.normalized:.3e}" for r in last)
        print(f"{name:5s} {cols}  ratio={rep.ratio:.3g}")


if __name__ == "__main__":
    main()
