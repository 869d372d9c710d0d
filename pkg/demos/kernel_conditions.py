#!/usr/bin/env python3
# Large-momentum behaviour of hard-power collision kernels.
#
# The ball integral of A(g)/p10 over |p1| <= R grows linearly in p0 for a hard
# kernel. Divided by p0^2 it decays; divided by p0 it settles at a nonzero limit.
# The script prints both sequences and the closed form of the ball integral for
# A = C g^2, then shows how the truncated kernel B_n approaches B.
#
# Usage: python3 demos/kernel_conditions.py
import math

import numpy as np

from rbekit.kernels import (ball_integral, check_condition_de, check_condition_hard, de_leading_term,
                            hard_bound_closed_form, hard_power, total_mass_of_kernel, truncation_error)

k = hard_power()  # beta = gamma = 0, C = 1
R = 1.0
ps = np.concatenate([[0.0], np.logspace(0, 4, 9)])
hard = check_condition_hard(k, R, ps)
de = check_condition_de(k, R, ps)
print(f"{'|p|':>10s} {'p0^-2 sequence':>16s} {'p0^-1 sequence':>16s}")
for q, a, b in zip(ps, hard.values, de.values):
    print(f"{q:10.3g} {a:16.8g} {b:16.8g}")
print(f"p0^-2 decays: {hard.decays}; p0^-1 limit {de.values[-1]:.8g} "
      f"vs leading term {de_leading_term(k, R):.8g}")

print("\nball integral of C g^2 / p10:")
for C, R_, p0 in ((1, 1, 2), (1, 2, 5), (3, 1, 10)):
    exact = hard_bound_closed_form(C, R_, p0)
    num = ball_integral(lambda g: C * np.asarray(g) ** 2, math.sqrt(p0 * p0 - 1), R_)
    print(f"  C={C} R={R_} p0={p0}: closed form {exact:.10f}, quadrature {num:.10f}")

print("\ntruncation error of B_n on |p|, |p1| <= 5, relative to the kernel mass:")
total = total_mass_of_kernel(k, 5.0, 5.0)
for n in (5, 10, 20, 40, 80):
    print(f"  n={n:3d}: {truncation_error(k, n, 5.0, 5.0) / total:.3e}")
