"""Multi-service federated learning resource allocation toolkit."""

from .scenario import (NetworkProfile, UEProfile, ServiceProfile,
                       LearningGlobals, Scenario, ScenarioConfig,
                       channel_gain_sample, generate_scenario,
                       load_scenario, save_scenario)
from .learning import (FedlConstants, fedl_constants, theta_cap,
                       num_global_rounds, num_local_rounds, sub1_objective,
                       optimal_eta)
from .costs import (Allocation, CostBreakdown, uplink_rate,
                    per_iteration_compute, uplink_time, service_round_time,
                    service_round_energy, total_cost)
from .solver import ConvexProgram, SolveReport, Multipliers, solve, \
    kkt_residual, grid_oracle
from .subproblems import (AdmmParams, build_sub2c, build_sub3c, build_sub2d,
                          build_sub3d)
from .orchestrator import (SolveOutcome, AdmmTrace, AdmmState,
                           solve_centralized, solve_decentralized,
                           consensus_dual_step, heuristic_equal,
                           heuristic_proportional, optimal_etas)
from .fedl_sim import (SyntheticTask, make_synthetic_task, local_train,
                       run_fedl)

__version__ = "0.1.0"
