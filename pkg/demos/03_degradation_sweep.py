"""Scale every attitude gain by alpha_d and let RCAC make up the difference.

alpha_d = 0.5 halves the fixed-gain attitude controller, alpha_d = 0 turns
it off entirely (cold start).  Each setting is flown with and without
adaptation; every metric is divided by the healthy fixed-gain run.
"""
import os
from pathlib import Path

import numpy as np

from fwrcac.scenario import OUTPUT_ROOT_ENV, ScenarioConfig, sweep

out = Path(os.environ.get(OUTPUT_ROOT_ENV, "demo_output")) / "degradation_sweep"
rows, table = sweep(ScenarioConfig(), alphas=[0.0, 0.5, 1.0], adaptive=[False, True],
                    out_dir=out)
print(table)

# The learned gains grow as the fixed controller is weakened.
for r in rows:
    if r.adaptive:
        tel = r.result.telemetry
        last = np.flatnonzero(tel["phase"] == "loiter")[-1]
        print(f"alpha_d = {r.alpha_d:.1f}: |theta_Theta| = {abs(tel['gain_theta'][last]):.2f}, "
              f"|theta_Phi| = {abs(tel['gain_phi'][last]):.2f}")
print(f"telemetry and plots in {out}")
