"""
Shrinking a sensitive attribute
===============================

Admission-style tabular data: two noisy test scores reflect a latent
merit, and historical decisions gave one gender a bonus on top of merit.
Putting the gender column in the "spurious" group and penalizing it shrinks
its weight, which closes the gaps in true-positive rate (equal
opportunity) and in positive rate (demographic parity).

Run with ``python demos/fairness.py`` (a few seconds).
"""

from causalreg import PenaltyConfig, TrainConfig
from causalreg.data import synth_admission
from causalreg.experiments import GridSpec, grid_search, repeat_seeds

bundle = synth_admission(seed=0, n=20000)
print("features:", bundle.feature_names)
print("sensitive column:", bundle.sensitive_name, bundle.sensitive_values)

tcfg = TrainConfig(learning_rate=0.1)


def show(name, res):
    m = res.mean
    print(
        f"{name:10s} {str(res.lambdas):18s} acc={m['test_accuracy']:.3f}  "
        f"dEO={m['test_delta_eo']:.3f}  dDP={m['test_delta_dp']:.3f}"
    )


# %%
# Unregularized and uniformly regularized models pick up the bias.
show("none", repeat_seeds(bundle, PenaltyConfig(), tcfg, k=1))
show("uniform", repeat_seeds(bundle, PenaltyConfig.uniform(0.01), tcfg, k=1))

# A strong penalty on the gender columns only.
show("grouped", repeat_seeds(bundle, PenaltyConfig(0.0, 10.0, 0.0), tcfg, k=1))

# %%
# Let the grid choose: keep validation accuracy within 0.01 of the best,
# then take the smallest validation equal-opportunity gap.
grid = GridSpec(lambda_c=(0.0, 0.001), lambda_s=(0.1, 1.0, 10.0), lambda_r=(0.0, 0.1, 1.0))
report = grid_search(bundle, grid, tcfg, selection="fairness", k=1)
show("selected", report.best)
