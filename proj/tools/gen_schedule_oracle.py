#!/usr/bin/env python3
"""Regenerate the frozen alpha_bar oracle table in tests/test_schedule.cpp.

The library computes alpha_bar[t] as a running product of IEEE doubles. This
script instead forms the exact rational product of the same IEEE-double beta
values (Fraction is exact), then rounds once to the nearest double, giving a
reference that is independent of the library's accumulation order and at most
0.5 ulp from the true value of the double-precision schedule.

Usage: tools/gen_schedule_oracle.py [T beta_start beta_end]
Defaults: 1000 1e-4 0.02 (the library's default schedule).
"""

import sys
from fractions import Fraction


def betas(T, beta_start, beta_end):
    """The exact doubles the library stores.

    Python floats are IEEE doubles with the same rounding, so evaluating the
    library's own expression beta_start + (t-1)*(beta_end-beta_start)/(T-1)
    in plain float arithmetic reproduces each stored beta bit for bit; only
    the running product is then carried out exactly.
    """
    diff = beta_end - beta_start
    return [Fraction(beta_start + t * diff / (T - 1)) for t in range(T)]


def main():
    T = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
    beta_start = float(sys.argv[2]) if len(sys.argv) > 2 else 1e-4
    beta_end = float(sys.argv[3]) if len(sys.argv) > 3 else 0.02

    bs = betas(T, beta_start, beta_end)
    probes = [1, 2, 100, 250, 300, 500, 600, 750, 999, 1000]
    probes = [t for t in probes if t <= T]

    prod = Fraction(1)
    table = {}
    for t, beta in enumerate(bs, start=1):
        prod *= 1 - beta
        if t in probes:
            table[t] = float(prod)

    print(f"// alpha_bar oracle for T={T}, beta {beta_start:g}..{beta_end:g}")
    for t in probes:
        print(f"    {{{t}, {table[t]!r}}},")
    mid = T // 2
    print(f"// beta_at({mid}) = {float(bs[mid - 1])!r}")


if __name__ == "__main__":
    main()
