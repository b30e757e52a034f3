"""Two-group comparison with a pointwise linear model.

Run: python3 demos/04_glm_pipeline.py
"""
# %% Simulate 40 subjects, half of them with a blob-shaped effect.
import numpy as np

from eclkc import (DesignMatrix, EECModel, FWER_ALPHA, FieldSample, IsotropicSpec, bhpe,
                   fit_pointwise, glm_standardized_residuals, simulate_isotropic,
                   solve_threshold, zscore_field)

N = 40
noise = simulate_isotropic(IsotropicSpec(50, 4.0), N, rng=5).data
group = np.repeat([0.0, 1.0], N // 2)
yy, xx = np.mgrid[:50, :50]
blob = 1.2 * np.exp(-((yy - 25) ** 2 + (xx - 15) ** 2) / (2 * 4.0 ** 2))
sample = FieldSample(noise + group[:, None, None] * blob)

# %% Fit intercept + group, test the group contrast.
design = DesignMatrix(np.column_stack([np.ones(N), group]), contrast=[0, 1])
fit = fit_pointwise(sample, design)
z = zscore_field(fit)

# %% LKCs of the noise come from the residuals via the multiplier bootstrap,
# then the EEC gives a threshold for the z field.
lkc = bhpe(glm_standardized_residuals(fit), M=500, seed=1)
u = solve_threshold(EECModel(lkc), FWER_ALPHA).u_hat
print("LKCs from residuals:", np.round(lkc.lkc, 2))
print(f"FWER threshold {u:.2f}; max z {z.values.max():.2f}; "
      f"{int((z.values > u).sum())} pixels above threshold")
