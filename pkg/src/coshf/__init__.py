"""Dual-UAV jamming-aided secure communication trajectory design.

A transmitter UAV serves ground users while a jammer UAV degrades a ground
eavesdropper. Both trajectories, hover durations and user scheduling are
optimized jointly for max-min secrecy throughput over a finite waypoint
parametrization (synchronized hover pairs plus turning points), via
successive convex approximation. Time-discretized and single-UAV benchmarks
share the same solver and audit stack.
"""

from .scenario import (Scenario, ScenarioError, default_scenario,
                       load_scenario, random_scenario, save_scenario,
                       serialize_scenario)
from .trajectory import (CoShfTrajectory, DiscretePath, SegmentIndex,
                         throughput, total_time, to_discrete)
from .sca import ScaConfig, SolveReport, initialize, run, run_single_uav
from .bench_td import TdConfig, run_td
from .validate import Audit, audit

__all__ = [
    "Scenario", "ScenarioError", "default_scenario", "load_scenario",
    "random_scenario", "save_scenario", "serialize_scenario",
    "CoShfTrajectory", "DiscretePath", "SegmentIndex", "throughput",
    "total_time", "to_discrete",
    "ScaConfig", "SolveReport", "initialize", "run", "run_single_uav",
    "TdConfig", "run_td", "Audit", "audit",
]

__version__ = "0.1.0"
