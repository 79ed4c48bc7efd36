# Compare the three baselines on both workloads and look at the per-sample series.

import numpy as np

from elasticpool.bench import run_scenario
from elasticpool.bench.harness import comparison_text, compare
from elasticpool.scenario import Scenario

for workload in ("abrupt", "cyclic"):
    scenario = Scenario(seed=7, workload=workload)
    print("==", workload)
    print(comparison_text(compare(scenario, ["overprovision", "cpu_only", "fine_grained"])))

# one run in detail: where do excess and shortage come from?
res = run_scenario(Scenario(seed=7, workload="cyclic", policy="fine_grained"))
req = np.array([r.req_min for r in res.rows])
cap = np.array([r.cap_prov for r in res.rows])
print("samples", len(req), "mean gap", np.abs(cap - req).mean())
print("shortage samples", int((cap < req).sum()), "excess samples", int((cap > req).sum()))
print("first ten (req_min, cap_prov):", list(zip(req[:10].tolist(), cap[:10].tolist())))
print("provisioning intervals", sorted({round(r.interval, 2) for r in res.provisioning.closed}))
