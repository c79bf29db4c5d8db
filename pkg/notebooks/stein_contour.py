# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Length of a normal mean vector
#
# One draw from N(theta, I_100) with ||theta|| = 4 sqrt(10).  The MLE of the
# length is ||x||, which is biased upward.  We compare it with the maximum
# typicality estimate and look at the typicality contour.

# %%
import numpy as np

from typik.contour import confidence_region, contour_grid
from typik.harness import STEIN_PHI, synthetic_dataset
from typik.models import Stein
from typik.objective import ObjectiveConfig, maximize

model = Stein(100)
x = synthetic_dataset(model, (STEIN_PHI,), 1022)
r = float(np.linalg.norm(x.values))
print(f"true length {STEIN_PHI:.4f}, observed |x| {r:.4f}")

# %% [markdown]
# ## Estimates across lambda

# %%
for lam in (0.0, 1.0, 5.0, 10.0):
    fit = maximize(model, x, ObjectiveConfig(lam=lam))
    print(f"lambda {lam:4g}: estimate {fit.theta_check.coords[0]:.4f}")
marg = maximize(Stein(100, likelihood="marginal"), x, ObjectiveConfig())
print(f"marginal likelihood: {marg.theta_check.coords[0]:.4f}")

# %% [markdown]
# ## Contour and 95% region
#
# The exact method uses the non-central chi-square law of ||X||^2.

# %%
grid = np.linspace(5.0, 25.0, 81)
cfg = ObjectiveConfig(lam=10.0)
cg = contour_grid(model, x, grid, cfg, 1000, 0, method="exact")
region = confidence_region(cg, 0.05)
print("95% region:", [(round(a, 3), round(b, 3)) for a, b in region.intervals])
print("contains truth:", region.contains(STEIN_PHI), " contains |x|:", region.contains(r))

# %%
for phi, tau in zip(cg.grid[::8, 0], cg.tau[::8]):
    print(f"{phi:6.2f} {'#' * int(round(40 * tau)):<40s} {tau:.3f}")
