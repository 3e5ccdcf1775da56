"""
Mean oscillation on a finite space
==================================

Every closed ball around a point changes only at the sorted distances from
that point, so the mean oscillation ``m_f(x, t)`` is a step function of the
radius.  This script prints one profile and the discrete pointwise
Lipschitz constant built from it.
"""

import numpy as np

from mmspace import grid, lip_hat, g_hat, profile

# a 1-D grid of 17 points on [0, 1] and a kinked field
space = grid(1, 17)
x = space.coords[:, 0]
f = np.abs(x - 0.5)

# the profile at the kink: breakpoints are the distinct distances
prof = profile(space, f, 8)
for t, m in zip(prof.breakpoints[:6], prof.values[:6]):
    print(f"t = {t:.4f}   m_f = {m:.5f}")

# lip_hat takes the min over the first K breakpoints of the local slope;
# g_hat does the same with m_f(x, t) / t and never exceeds 2 lip_hat
lip = lip_hat(space, f)
g = g_hat(space, f)
print("lip_hat at kink and at x=0:", lip[8], lip[0])
print("max g_hat / lip_hat:", np.max(g / np.where(lip > 0, lip, 1)))
