"""A left aileron freezes at -0.5 (normalized) as the loiter begins.

The allocator keeps commanding both ailerons as if they were healthy, so the
stuck surface leaves a roll-moment bias the fixed-gain loop has to fight.
Both faulted runs are normalized by the healthy fixed-gain baseline.
"""
import os
from pathlib import Path

from fwrcac.plots import ground_trace_svg
from fwrcac.scenario import OUTPUT_ROOT_ENV, ScenarioConfig, simulate

FAULT = {"surface": "aileron_left", "stuck_value": -0.5, "t_start": "loiter"}

out = Path(os.environ.get(OUTPUT_ROOT_ENV, "demo_output")) / "stuck_aileron"
out.mkdir(parents=True, exist_ok=True)

healthy = simulate(ScenarioConfig(name="healthy"))
runs = {"healthy": healthy,
        "fault_fixed": simulate(ScenarioConfig(name="fault_fixed", fault=FAULT)),
        "fault_adaptive": simulate(ScenarioConfig(name="fault_adaptive", fault=FAULT,
                                                  adaptive=True))}

for name, res in runs.items():
    if res.summary is None:
        print(f"{name:15s} failed: {res.reason}")
        continue
    s = res.summary.normalize(healthy.summary, "healthy")
    print(f"{name:15s} J_traj = {s.J_traj:6.3f} m   normalized {s.normalized['J_traj']:.3f}")

(out / "ground.svg").write_text(ground_trace_svg({k: r.telemetry for k, r in runs.items()}))
print(f"ground trace in {out / 'ground.svg'}")
