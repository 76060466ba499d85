"""
Cost accounting
===============

"""

from uavzt.bench_cli import BenchConfig, bench_phases, bench_primitives, measured_sizes, report_sizes

cfg = BenchConfig(iterations=50, phase_runs=5, seed=0)

prims = bench_primitives(cfg)
for row in prims.select(metric="mean_ms"):
    print(f"{row['item']:8s} {row['value']:9.4f} ms   ({row['note']})")

phases = bench_phases(cfg)
for row in phases.select(metric="discrepancy"):
    print(row["item"], "->", row["value"])

sizes = report_sizes(cfg, pac_len=32)
print(sizes.to_csv())
print("measured:", measured_sizes())
