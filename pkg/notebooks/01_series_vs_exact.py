# %% [markdown]
# # Truncated contrast series against the exact planar energy
#
# Two identical half-spaces of the Lorentz model with eps(0) = 1.5 are
# compared at separations spanning the plasma wavelength. Ratios near one
# mean the truncated series reproduces the exact energy.

# %%
import math

import numpy as np

from casimir_contrast import figure2_model, figure2_table, plasma_wavelength, ratio_crossover

model = figure2_model()
lam_p = plasma_wavelength(model)
xs = np.geomspace(0.01, 10.0, 13)
rows = figure2_table(xs * lam_p, model)

# %%
print(f"{'H/lam_p':>9} {'ratio_2':>9} {'ratio_4':>9} {'ratio_6':>9} {'ratio_CM':>9}")
for r in rows:
    print(f"{r['H_over_lambda_p']:9.4f} {r['ratio_2']:9.5f} {r['ratio_4']:9.5f} {r['ratio_6']:9.5f} "
          f"{r['ratio_CM']:9.5f}")

# %% [markdown]
# The second-order ratio moves between two plateaus. Its steepest point in
# log H sits near H = lam_p / (2 pi), where retardation sets in.

# %%
x_c = ratio_crossover(xs, [r["ratio_2"] for r in rows])
print(f"crossover at H/lam_p = {x_c:.3f}  (1/2pi = {1 / (2 * math.pi):.3f})")
