"""Loiter tracking with and without adaptive augmentation at nominal gains.

Both runs fly the simulation mission (climb to 20 m, loiter on a 30 m
circle for 60 s, glide to touchdown) in a 3 m/s crosswind.  The
fixed-gain run is the normalization baseline for every metric.
"""
import os
from pathlib import Path

from fwrcac.plots import ground_trace_svg, response_svg
from fwrcac.scenario import OUTPUT_ROOT_ENV, ScenarioConfig, simulate

out = Path(os.environ.get(OUTPUT_ROOT_ENV, "demo_output")) / "nominal_vs_adaptive"
out.mkdir(parents=True, exist_ok=True)

nominal = simulate(ScenarioConfig(name="nominal"))
adaptive = simulate(ScenarioConfig(name="adaptive", adaptive=True))
base = nominal.summary

print(f"{'run':10s} {'J_Phi':>8s} {'J_Theta':>8s} {'J_traj':>8s}   normalized J_traj")
for res in (nominal, adaptive):
    s = res.summary.normalize(base, "nominal")
    print(f"{res.name:10s} {s.J_Phi:8.4f} {s.J_Theta:8.4f} {s.J_traj:8.3f}   "
          f"{s.normalized['J_traj']:.3f}")

# learned angle-loop gains at the end of the loiter
tel = adaptive.telemetry
last = (tel["phase"] == "loiter").nonzero()[0][-1]
print(f"theta gain {tel['gain_theta'][last]:.2f}, phi gain {tel['gain_phi'][last]:.2f}")

(out / "ground.svg").write_text(ground_trace_svg({"nominal": nominal.telemetry,
                                                  "adaptive": adaptive.telemetry}))
(out / "adaptive_bank.svg").write_text(response_svg(adaptive.telemetry, "phi"))
print(f"plots in {out}")
