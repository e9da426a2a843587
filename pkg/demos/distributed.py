"""Five converter agents identify a shared model while under feedback control.

No agent's input is rich enough alone; sharing estimates with neighbours
makes the group converge. A lone identifier on the same loop stalls.

Run: python3 demos/distributed.py
"""

import numpy as np

from cpekit.experiments import distributed_scenario, feedback_only_identifier
from cpekit.identification import check_convergence_conditions, fit_log_linear
from cpekit.informativity import check_pe
from cpekit.trajectories import default_topology

topo = default_topology()
sc = distributed_scenario(0, 5000, alpha_gain=1.0, gamma_gain=0.25, xi=2.0, topology=topo)
errs = sc.trace.errors
print("each agent PE of order 3 alone?", [check_pe(r.input_traj, 3) for r in sc.records])
cond = check_convergence_conditions(1.0, 2.0, gamma_gain=0.25, topology=topo, inputs=sc.input_bundle, order=3, window_l=500)
print(f"gains admissible and windows collectively exciting: {cond.all_ok}")
for k in (0, 1000, 2500, 4999):
    print(f"step {k:5d}: errors " + " ".join(f"{v:.1e}" for v in errs[k]))
slope, r2 = fit_log_linear(errs.max(axis=1))
print(f"log-linear fit of the worst agent: slope {slope:.2e}, R^2 {r2:.3f}")
lone = feedback_only_identifier(0, 5000)
print(f"lone identifier: {lone.errors[0]:.2f} -> {lone.errors[-1]:.2f}")
