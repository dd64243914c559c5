#!/usr/bin/env python3
"""Lower-bound demonstration: exact construction values against the
closed-form complexity floor over the default (h, m, p) grid."""

import math

from capnet import lowerbound

if __name__ == "__main__":
    rows = lowerbound.demonstrate_lower_bound(
        h_grid=(2, 4, 8), m_grid=(8, 16), p_grid=(1.0, 2.0, math.inf), seed=42)
    print(f"{'h':>3} {'m':>4} {'p':>5} {'diag':>10} {'scalar':>10} "
          f"{'floor':>10} {'ratio':>7}")
    for r in rows:
        p = "inf" if math.isinf(r["p"]) else f"{r['p']:g}"
        print(f"{r['h']:>3} {r['m']:>4} {p:>5} {r['diag_value']:>10.5f} "
              f"{r['scalar_value']:>10.5f} {r['bound_lower']:>10.5f} "
              f"{r['ratio']:>7.4f}")
