"""
Poincare constants: grid against snowflake
==========================================

On a grid the largest observed Poincare ratio settles as the grid is
refined.  Raising the distance to the power 1/2 (the snowflake) removes
rectifiable curves, and the observed constant keeps growing instead.
"""

from mmspace import grid, snowflake
from mmspace.poincare import poincare_sweep

print(f"{'k':>3s}{'grid cHat':>12s}{'snowflake cHat':>16s}")
for k in range(5, 9):
    base = grid(1, 2 ** k)
    c_grid = poincare_sweep(base, samples=None).c_hat
    c_snow = poincare_sweep(snowflake(base, 0.5), samples=None).c_hat
    print(f"{k:3d}{c_grid:12.4f}{c_snow:16.4f}")
