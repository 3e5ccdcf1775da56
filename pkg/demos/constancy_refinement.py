"""
Recognising constants by refinement
===================================

The critical Besov sum ``sum |f_i - f_j|^p / (d_ij^p V_ij)`` of a
nonconstant smooth field grows by a fixed amount each time the grid is
halved; for a constant it is zero.  The detector fits that growth.
"""

from mmspace.constancy import detect_constant

for rule, params in [("constant", {"value": 5.0}), ("linear", {}), ("sin", {})]:
    for p in (1.0, 2.0):
        v = detect_constant(rule, p, levels=range(6, 11), rule_params=params)
        print(f"{rule:<9s} p={p:g}: {v.verdict:<20s} slope {v.slope:8.4f}  R^2 {v.r2:.4f}")
