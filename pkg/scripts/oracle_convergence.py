"""DP oracle values against the closed forms under grid refinement (c=3, eps=0).

    python3 scripts/oracle_convergence.py [T ...]
"""
import sys

from freerider import values as val
from freerider.oracle import MUTANT_GRID, GridSpec, dp_mutant_value, dp_resident_value, richardson

C = 3.0
RESIDENT = (GridSpec(128, 256), GridSpec(256, 512), GridSpec(512, 1024))
MUTANT = (GridSpec(32, 128, control_levels=11), GridSpec(64, 256, control_levels=11), MUTANT_GRID)


def main(Ts):
    # grids: resident nx 128/256/512, mutant nx 32/64/128
    print("T      who  analytic    coarse      medium      fine        extrap      rel.err  order")
    for T in Ts:
        U_r, U_m, _ = val.season_values(T, C)
        for who, ref, grids, run in (
            ("res", U_r, RESIDENT, lambda g: dp_resident_value(C, T, g).value(0.0)),
            ("mut", U_m, MUTANT, lambda g: dp_mutant_value(C, 0.0, T, g, slices=1).value(0.0, 0.0)),
        ):
            vs = [run(g) for g in grids]
            ext, order = richardson(vs)
            cells = "  ".join(f"{v:.8f}" for v in vs)
            print(f"{T:<5g}  {who}  {ref:.8f}  {cells}  {ext:.8f}  {abs(ext / ref - 1):.1e}  {order:.2f}")


if __name__ == "__main__":
    main([float(a) for a in sys.argv[1:]] or [1.0, 2.0, 4.0])
