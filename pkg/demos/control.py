"""State feedback and receding-horizon control of the batch reactor from data.

Run: python3 demos/control.py
"""

import numpy as np

from cpekit.control import synthesize_gain
from cpekit.experiments import MODES, designed_records, mode_for, mpc_prior_basis, mpc_scenario
from cpekit.trajectories import builtin_system

sys = builtin_system("batch_reactor")
print(f"open-loop spectral radius {max(abs(np.linalg.eigvals(sys.a_matrix))):.3f}")
for name in MODES:
    recs, bundle, _ = designed_records(sys, name, seed=1)
    res = synthesize_gain(recs, mode_for(name), bundle.weights, sys=sys)
    print(f"{name:10s} gain found: {res.success}, closed-loop radius {res.closed_loop_radius:.3f}")

for name in MODES:
    basis = mpc_prior_basis(name, 0)
    run = mpc_scenario(name, 0)
    norms = run.state_norms
    print(
        f"{name:10s} basis {basis.matrix.shape}: |x| {norms[0]:.2f} -> {norms[-1]:.1e}, "
        f"median solve {np.median(run.solve_seconds) * 1e3:.2f} ms"
    )
