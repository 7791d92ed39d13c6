"""Convergence of every scheme on the smooth sine solution.

Run with ``python demos/convergence.py``; prints the last-pair EOCs.
"""

from strang_lab.studies import EXACT_TOL, StudySpec, run_convergence

SCHEMES = ("tpfa", "hmm", "mpfa-uniform", "vem1", "vem2", "dg1", "dg2")


def _rate(rep, key):
    # errors at round-off level carry no rate (cell-exact schemes on uniform grids)
    errs = [getattr(r, "cons_dual" if key == "cons_dual" else "err_" + key) for r in rep.rows[-2:]]
    if max(errs) <= EXACT_TOL:
        return f"{'exact':>9s}"
    return f"{getattr(rep.rows[-1], 'eoc_' + key):9.3f}"


def main(levels=3):
    print(f"{'scheme':14s}{'energy':>9s}{'recons':>9s}{'L2':>9s}{'dual':>9s}{'gamma':>9s}")
    for name in SCHEMES:
        rep = run_convergence(StudySpec(name, n0=8, levels=levels), write=False)
        rates = "".join(_rate(rep, k) for k in ("energy", "energy_recons", "l2", "cons_dual"))
        print(f"{name:14s}{rates}{min(x.gamma_num for x in rep.rows):9.3f}")
    # on distorted quads TPFA is not admissible; MPFA with the L strategy is
    rep = run_convergence(StudySpec("mpfa-l", mesh="perturbed:0.1:0", n0=8, levels=levels),
                          write=False)
    print(f"{'mpfa-l (pert)':14s}{rep.rows[-1].eoc_energy:9.3f}")


if __name__ == "__main__":
    main()
