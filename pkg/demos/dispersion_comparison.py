"""Compare the model dispersion relation with full potential theory.

Prints the relative phase-speed error of the model for a few choices of the
vertical basis and the fitted small-wavenumber error order.
"""
import numpy as np

from kakinuma import ModelParams
from kakinuma.lintheory import (convergence_order_scan, deep_water_limit, phase_speed_full,
                                phase_speed_kakinuma, phase_speed_shallow)

CASES = [(0, (0,)), (1, (0, 2)), (1, (0, 1, 2)), (2, (0, 2, 4))]


def params(N, p_list):
    # density ratio 2, depth ratio 3
    return ModelParams(1.0, 2.0, 1.0, 3.0, 9.81, N, p_list)


def main():
    xi = np.array([0.05, 0.2, 0.5, 1.0, 2.0, 5.0])
    print("relative error of c_K^2 against the full dispersion relation")
    print("h1*xi     " + "".join(f"{f'N={N} p={pl}':>20}" for N, pl in CASES))
    for x in xi:
        row = [phase_speed_kakinuma(x, params(N, pl)) / phase_speed_full(x, params(N, pl)) - 1
               for N, pl in CASES]
        print(f"{x:<10g}" + "".join(f"{r:>20.3e}" for r in row))

    print("\nsmall-wavenumber error order (expected 4N+2)")
    for N, pl in CASES[:3]:
        p = params(N, pl)
        slope = convergence_order_scan(p, np.geomspace(1e-2, 1e-1, 30) / (p.h1 + p.h2))
        print(f"  N={N} p={pl}: slope {slope:.3f}")

    print("\ndeep-water limits of c_K^2 (shallow-water value for reference)")
    for N, pl in CASES:
        p = params(N, pl)
        print(f"  N={N} p={pl}: {deep_water_limit(p):.6f}   c_SW^2 = {phase_speed_shallow(p):.6f}")


if __name__ == "__main__":
    main()
