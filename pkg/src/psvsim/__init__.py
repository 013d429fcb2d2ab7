"""Transient simulator and fuel-optimal scheduler for DC platform-supply-vessel
power systems.

Subpackages/modules:

* ``grid``       -- bus/branch network model, DC power flow, limit checks
* ``powertrain`` -- diesel-engine dynamics, governor, SFOC surface, DC link
* ``loads``      -- thruster, hotel, pulsed and mission load models
* ``storage``    -- battery + PV energy-storage system
* ``dispatch``   -- fuel-optimal unit scheduling (speed + power + ESS split)
* ``simcore``    -- time-domain co-simulation engine with network partitioning
* ``scenario``   -- scenario-file loading and validation
* ``cli``        -- command-line entry points (run / solve / validate / serve)
* ``server``     -- live telemetry/command gateway (WebSocket + HTTP)
"""

from __future__ import annotations

from .dispatch import (GenUnit, InfeasibleProblemError, OpfProblem, Schedule,
                       build_opf, enumerate_suboptimal, solve_opf,
                       standard_fleet)
from .grid import (Branch, Bus, FlowSolution, IslandingError, ModelError,
                   NetworkModel, Violation, ViolationReport, build_network,
                   check_limits, dc_power_flow, islands, isolate_buses,
                   standard_network)
from .loads import (LoadUnit, MissionProfile, ShedPlan, mission_preset,
                    mission_profile, shed_plan, standard_loads)
from .powertrain import (ConverterPlant, DieselEngineParams, DieselEngineState,
                         GovernorParams, GovernorState, SfocMap, StallError,
                         dc_link_step, de_step, default_sfoc_map,
                         engine_equilibrium, fuel_rate, governor_step,
                         load_sfoc_map, optimized_speed, sfoc_lookup)
from .scenario import (ContingencyEvent, PlantState, Scenario, ScenarioError,
                       SimParams, bundled_scenario_names, load_bundled,
                       load_scenario, scenario_from_dict, terminal_state,
                       validate_scenario)
from .simcore import (EnergyAudit, GyratorLink, InjectError, Partition,
                      Partitioning, RunResult, SimEngine, SimTrace, partition,
                      run_scenario)
from .storage import (BatteryPack, EssSetpoints, EssUnit, ModeError, PvArray,
                      charge_mode_select, ess_dispatch_limits, pv_power,
                      soc_step)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # grid
    "Branch", "Bus", "FlowSolution", "IslandingError", "ModelError",
    "NetworkModel", "Violation", "ViolationReport", "build_network",
    "check_limits", "dc_power_flow", "islands", "isolate_buses",
    "standard_network",
    # powertrain
    "ConverterPlant", "DieselEngineParams", "DieselEngineState",
    "GovernorParams", "GovernorState", "SfocMap", "StallError", "dc_link_step",
    "de_step", "default_sfoc_map", "engine_equilibrium", "fuel_rate",
    "governor_step", "load_sfoc_map", "optimized_speed", "sfoc_lookup",
    # loads
    "LoadUnit", "MissionProfile", "ShedPlan", "mission_preset",
    "mission_profile", "shed_plan", "standard_loads",
    # storage
    "BatteryPack", "EssSetpoints", "EssUnit", "ModeError", "PvArray",
    "charge_mode_select", "ess_dispatch_limits", "pv_power", "soc_step",
    # dispatch
    "GenUnit", "InfeasibleProblemError", "OpfProblem", "Schedule", "build_opf",
    "enumerate_suboptimal", "solve_opf", "standard_fleet",
    # scenario
    "ContingencyEvent", "PlantState", "Scenario", "ScenarioError", "SimParams",
    "bundled_scenario_names", "load_bundled", "load_scenario",
    "scenario_from_dict", "terminal_state", "validate_scenario",
    # simcore
    "EnergyAudit", "GyratorLink", "InjectError", "Partition", "Partitioning",
    "RunResult", "SimEngine", "SimTrace", "partition", "run_scenario",
]
