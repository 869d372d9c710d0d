#!/usr/bin/env python3
# The discrete collision operator on a small momentum grid.
#
# Builds the operator for a truncated hard kernel, evaluates it on a random
# state and on a drifting Juettner state, and prints the conserved moments of Q,
# the entropy dissipation and the renormalized operator Q/(1 + mass/n).
#
# Usage: python3 demos/collision_properties.py
import numpy as np

from rbekit.collision import CollisionOperator, invariant_tests, juttner
from rbekit.kernels import hard_power
from rbekit.quadrature import MomentumGrid
from rbekit.suites import random_state

grid = MomentumGrid(4.0, 10)
op = CollisionOperator(grid, hard_power().truncate(10), partners=30, seed=1)
print(f"{grid.size} momentum cells, {op.events.size} collision events")

f = random_state(np.random.default_rng(0), grid)
q = op(f)
gain = op.gain(f)
print("\nrandom state")
for name, psi in invariant_tests(grid).items():
    print(f"  sum Q psi for psi = {name:3s}: {op.weak_form(f, psi):+.2e}  "
          f"(gain scale {np.sum(gain) * grid.cell_volume:.2e})")
print(f"  entropy dissipation {op.entropy_dissipation(f):.6e} (>= 0)")

eq = juttner(grid, c=1.5, drift=(0.4, 0.0, -0.2), amplitude=0.8)
print("\ndrifting Juettner state")
print(f"  max |Q| {np.max(np.abs(op(eq))):.2e}, dissipation {op.entropy_dissipation(eq):.2e}")

print("\nrenormalized operator on f, 2f, 4f with n = 10")
for a in (1, 2, 4):
    mass = a * f.sum() * grid.cell_volume
    r = op.renormalized(a * f, 10.0)
    print(f"  scale {a}: mass {mass:.3f}, |Q~|_1 / |Q|_1 = {np.sum(np.abs(r)) / np.sum(np.abs(op(a * f))):.4f}"
          f" = 1/(1 + mass/n) = {1 / (1 + mass / 10):.4f}")
