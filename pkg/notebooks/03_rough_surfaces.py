# %% [markdown]
# # Second-order energy of rough surfaces
#
# A Gaussian bump on one of two half-spaces. The pair-kernel sum is compared
# with the local proximity sum, which is exact at second order when the
# opposite surface is flat, and with the Clausius-Mossotti variant.

# %%
from casimir_contrast import HeightMap, RoughScenario, e2_proximity, e2_pws, e2_rough, figure2_model

model = figure2_model()
n, cell, H = 12, 4.0, 1.0
flat = HeightMap.flat(n, cell, label=1)

for amp in (0.0, 0.1, 0.2, 0.3):
    bump = HeightMap.gaussian_bump(n, cell, amp, 0.8)
    sc = RoughScenario(model, model, flat, bump, H)
    pair = e2_rough(sc).total
    local = e2_proximity(model, model, bump, H).total
    cm = e2_pws(sc).total
    print(f"amp={amp:.1f}  pair={pair:.6e}  local={local:.6e}  rel={pair / local - 1:+.1e}  cm={cm:.6e}")
