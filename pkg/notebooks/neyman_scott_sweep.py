# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Paired normals with nuisance means
#
# Each of 100 pairs has its own mean, so the variance MLE settles at half
# the true value.  Raising lambda moves the typicality estimate toward 1.

# %%
from typik.harness import default_config, run

report = run(default_config("ns_bias", reps=100))
for name, row in report.summary["estimators"].items():
    print(f"{name:>16s}: mean {row['mean']:.4f}  se {row['se']:.4f}  bias {row['bias']:+.4f}")

# %% [markdown]
# ## Calibration at lambda = 4
#
# Under the true variance the contour should be no smaller than uniform.

# %%
val = run(default_config("validity", model_id="neyman_scott", truth=(1.0,), lambdas=(4,), reps=100, M=200, inner_points=None))
for a, row in val.summary["exceedance"]["tau_lambda_4"].items():
    print(f"alpha {a}: P(tau <= alpha) = {row['frequency']:.3f}  (bound {row['bound']:.3f})")
