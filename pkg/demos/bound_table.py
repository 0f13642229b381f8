"""Tabulate the certified regret bounds for a grid of game sizes.

For each (n, delta) pair this prints every bound the package certifies:
the closed-form exponential-weights guarantee, the Gaussian-smoothing
sandwich, and the ranked-max sandwich, each with its numerically
estimated error term folded in.  Values are reported in sqrt(1/delta)
units (the c_n column) so that rows with different stopping rates are
comparable.  The last two columns give the classical reference curves
the sandwich should squeeze between.

Run:  python3 demos/bound_table.py
"""

import math

from geostop import all_bounds, comparison_curves

SIZES = (2, 3, 5, 10)
RATES = (0.1, 0.01)

header = (f"{'n':>4} {'delta':>7} {'family':>11} {'side':>6} "
          f"{'bound':>12} {'c_n':>9} {'err':>10} {'mode':>22}")

for delta in RATES:
    print(f"\nstopping rate delta = {delta}  (mean horizon "
          f"{(1 - delta) / delta:.1f} rounds)")
    print(header)
    print("-" * len(header))
    for n in SIZES:
        for rep in all_bounds(n, delta):
            print(f"{rep.n:>4} {rep.delta:>7} {rep.family:>11} "
                  f"{rep.side:>6} {rep.bound:>12.5f} {rep.c_n:>9.5f} "
                  f"{rep.error_term:>10.2e} {rep.error_mode:>22}")
        curves = comparison_curves(n, delta)
        rt = math.sqrt(delta)
        print(f"{n:>4} {delta:>7} {'reference':>11} {'lower':>6} "
              f"{curves['gravin_lower_asymptote']:>12.5f} "
              f"{curves['gravin_lower_asymptote'] * rt:>9.5f}")
        print(f"{n:>4} {delta:>7} {'reference':>11} {'upper':>6} "
              f"{curves['gravin_upper']:>12.5f} "
              f"{curves['gravin_upper'] * rt:>9.5f}")

print("\nReading the table: the reference rows are asymptotes, valid as")
print("delta -> 0, so only the delta = 0.01 block is a fair fight.  There")
print("the heat lower bound clears the classical lower curve at every size")
print("shown, and the smoothed upper bounds undercut the exp_weights row")
print("until the numerically estimated error constants (which grow with n)")
print("wash the advantage out.  Shrink delta further and the sandwich")
print("tightens; demos/asymptotic_constants.py follows that limit.")
