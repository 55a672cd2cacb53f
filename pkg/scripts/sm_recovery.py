"""Where the DP mutant switch departs from S_m, and a direct integrator check.

At c=3, eps=0, T=4 the DP argmax switch of the mutant is compared with
S_m: x_m = 1 - exp(-tau) on every x_r row where the resident feeds. A state
near the first departures is then re-examined without the DP: the closed-form
policy (feed until S_m) against reproducing for a short time dt first.

    python3 scripts/sm_recovery.py
"""
import math

import numpy as np
from scipy.interpolate import RectBivariateSpline

from freerider.model import FullState, ModelParams
from freerider.mutant import MutantPolicy
from freerider.oracle import MUTANT_GRID, dp_mutant_value
from freerider.resident import boundary_x
from freerider.trajectory import constant_policy, integrate

C, T = 3.0, 4.0


def recovery_table(m):
    x, h = m.x, m.x[1] - m.x[0]
    print("tau      rows  within-one-cell")
    for k in range(1, len(m.tau), 4):
        tau = m.tau[k]
        S = -math.expm1(-tau)
        feed = m.control[k - 1] >= 0.5
        far = np.abs(x - S) > h
        rows = [i for i in range(len(x)) if x[i] < boundary_x(tau, C) - h]
        hits = sum(np.array_equal(feed[i, far], x[far] < S) for i in rows)
        print(f"{tau:6.3f}  {len(rows):5d}  {hits:5d}")


def deviation(x_r, x_m, tau, dts=(0.0, 0.002, 0.005, 0.01, 0.02, 0.05)):
    p = ModelParams(T=T, c=C)
    pol = MutantPolicy(p)
    t0 = T - tau
    s0 = FullState(x_r, x_m, 1.0, t0)
    for dt in dts:
        if dt == 0.0:
            U = integrate(p, pol, s0).U_m
        else:
            # resident stays below its arc and feeds throughout
            a = integrate(p, constant_policy(1.0, 0.0), s0, t0 + dt)
            # U is per unit of the starting resource
            U = a.U_m + a.final.n * integrate(p, pol, a.final).U_m
        print(f"reproduce for dt={dt:<5g} then follow the policy: U_m = {U:.6f}")


if __name__ == "__main__":
    m = dp_mutant_value(C, 0.0, T, MUTANT_GRID, slices=64)
    recovery_table(m)
    k = int(np.argmin(np.abs(m.tau - 3.4375)))
    dp = RectBivariateSpline(m.x, m.x, m.U[k])(0.19, 0.85)[0, 0]
    print(f"DP value at (x_r=0.19, x_m=0.85, tau={m.tau[k]:.4f}): {dp:.6f}")
    deviation(0.19, 0.85, float(m.tau[k]))
