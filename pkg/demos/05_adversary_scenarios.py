"""
Scripted adversary scenarios
============================

"""

from uavzt.sim_harness import Scenario, scenario_suite

for scenario in scenario_suite():
    report = scenario.run()
    print(f"{scenario.name:32s} {report.outcomes()}  reps={report.reputations}")

# a custom script: steal A's memory, then try to pass as B
custom = Scenario("steal-then-forge", (
    {"op": "register", "uav": "A"},
    {"op": "register", "uav": "B"},
    {"op": "auth", "uav": "A"},
    {"op": "capture", "uav": "A"},
    {"op": "inject", "forge_as": "B", "using": "A"},
    {"op": "replay", "frame": 0},
    {"op": "tamper", "frame": 0, "field": "v", "offset": 0, "byte": "ff"},
), seed=3)
report = custom.run()
for event in report.events:
    print(event)
print("frames seen by adversary:", report.observed_frames)
