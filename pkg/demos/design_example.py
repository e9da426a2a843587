"""Five short signals that are excited of order 5 together but not alone.

Run: python3 demos/design_example.py
"""

from cpekit import CompositionMode, DesignRequest, design_signals, verify_design
from cpekit.bench import FlopModel, crossover_threshold, flop_costs
from cpekit.informativity import check_pe

req = DesignRequest(2, 5, (7, 7, 6, 6, 5), CompositionMode.mosaic(), rng_seed=0)
bundle, ledger = design_signals(req)
ok, report = verify_design(bundle, req)

print(f"lengths {bundle.lengths}, offsets {ledger.offsets}, diagonal indices {ledger.diagonal_indices}")
for i, z in enumerate(bundle.members, 1):
    print(f"  member {i}: PE of order 5 on its own? {check_pe(z, 5)}")
print(f"mosaic Hankel rank {report.rank_report.numeric_rank} of {report.target_rank}, verified {ok}")

model = FlopModel.from_lengths(2, 5, [14, 14], bundle.lengths)
print(f"flops: {flop_costs(model)}")
print(f"repeated PE trials of 10 columns pay off after K_th = {crossover_threshold(model.total_mosaic_columns, 10)}")
