"""Workloads, elasticity metrics and the benchmark driver."""

from .harness import (CSV_COLUMNS, InvariantViolation, RunResult, compare, run_baseline,
                      run_scenario, samples_csv, summary_text)
from .metrics import (AgilityReport, AgilitySample, ProvisioningRecord, QoSModel, agility,
                      make_samples, measure_provisioning, req_min)
from .workload import ABRUPT, CYCLIC, WorkloadPattern, arrivals_per_second, generate_workload
