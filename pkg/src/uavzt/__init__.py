"""Zero-trust access control for UAV fleets over a symmetric pairing.

Modules
-------
crypto_core   symmetric pairing group, hash oracles, stream cipher, op counting
puf_sim       simulated physical unclonable functions
ledger        hash-chained store of UAV keys and reputations
protocol      KGC / UAV / SDP controller / SDP gateway actors
sim_harness   deterministic network simulation with a scripted adversary
bench_cli     cost accounting and the ``uavzt-bench`` command
"""

from .crypto_core import OpCounter, count_ops, setup
from .ledger import Chain, latest_record, validate_chain
from .protocol import Controller, Decision, Deployment, Gateway, KGC, Uav, make_id
from .sim_harness import World, run_scenario, scenario_suite

__all__ = [
    "Chain", "Controller", "Decision", "Deployment", "Gateway", "KGC", "OpCounter", "Uav", "World",
    "count_ops", "latest_record", "make_id", "run_scenario", "scenario_suite", "setup", "validate_chain",
]
__version__ = "0.1.0"
