"""Expected EC curve, confidence bands and excursion thresholds.

Run: python3 demos/03_eec_inference.py [out.csv]
"""
# %%
import sys

import numpy as np

from eclkc import (CER_ALPHA, FWER_ALPHA, EECModel, IsotropicSpec, ec_curve, hpe_on_sample,
                   nonparametric_band, simulate_isotropic, solve_threshold, true_lkc_isotropic)

spec = IsotropicSpec(L=50, nu=5.0)
sample = simulate_isotropic(spec, 50, rng=11)
model = EECModel(hpe_on_sample(sample))
truth = EECModel(true_lkc_isotropic(spec))

# %% Plug-in band versus the band from raw EC curves at a few levels.
u = np.array([-2.0, 0.0, 2.0, 3.0])
lo, hi = model.band(u)
nlo, nhi = nonparametric_band([ec_curve(f) for f in sample], u)
for k, x in enumerate(u):
    print(f"u={x:+.1f}  true {truth(x):7.3f}   HPE [{lo[k]:7.3f}, {hi[k]:7.3f}]"
          f"   raw [{nlo[k]:7.3f}, {nhi[k]:7.3f}]")

# %% Thresholds: EEC(u) = 0.05 controls the family-wise error heuristically;
# EEC(u) = 1 bounds the expected number of false clusters.
for name, alpha in (("FWER", FWER_ALPHA), ("CER", CER_ALPHA)):
    est, ref = solve_threshold(model, alpha), solve_threshold(truth, alpha)
    print(f"{name}: u = {est.u_hat:.3f} +/- {est.se:.3f}  (true {ref.u_hat:.3f})")

# %% Export the curve on the default grid for plotting elsewhere.
if len(sys.argv) > 1:
    model.to_csv(sys.argv[1])
    print("wrote", sys.argv[1])
