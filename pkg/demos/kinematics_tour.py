#!/usr/bin/env python3
# Elastic two-body collisions in the centre-of-momentum frame.
#
# Draws a few random pairs, scatters them into random directions and shows that
# the 4-momentum, the relative momentum g and s = 4(1 + g^2) come out unchanged,
# and that the two scattering-angle formulas agree.
#
# Usage: python3 demos/kinematics_tour.py
import numpy as np

from rbekit.kinematics import (energy, g_squared, post_collision, random_pairs, scattering_angle,
                               scattering_angle_mandelstam, total_energy_invariant)
from rbekit.suites import kinematics_suite

rng = np.random.default_rng(11)
p, p1, omega = random_pairs(rng, 3)
pp, pp1 = post_collision(p, p1, omega)

for i in range(3):
    print(f"pair {i}")
    print(f"  in : p={p[i].round(3)}  p1={p1[i].round(3)}  E={energy(p[i]) + energy(p1[i]):.12f}")
    print(f"  out: p={pp[i].round(3)}  p1={pp1[i].round(3)}  E={energy(pp[i]) + energy(pp1[i]):.12f}")
    g_in, g_out = np.sqrt(g_squared(p[i], p1[i])), np.sqrt(g_squared(pp[i], pp1[i]))
    s = total_energy_invariant(p[i], p1[i])
    print(f"  g {g_in:.12f} -> {g_out:.12f};  s - 4(1+g^2) = {s - 4 * (1 + g_in**2):.1e}")
    print(f"  angle: arccos form {scattering_angle(p[i], p1[i], pp[i]):.12f}, "
          f"Mandelstam form {scattering_angle_mandelstam(p[i], p1[i], pp[i]):.12f}")

# the same checks on 10^4 pairs
print()
print("\n".join(kinematics_suite(10_000).lines()))
