"""dcspsim: deterministic multi-agent workbench for distributed constraint
satisfaction, with the APO mediation protocol, the AWC baseline, embedded
centralized solvers, seeded problem generators and an experiment harness."""

from .csp import (
    Assignment,
    Constraint,
    CspInstance,
    DomainTooLarge,
    Kind,
    Relation,
    Value,
    brute_force,
    conflicts_of,
    is_satisfied,
    parse_instance,
    verify_solution,
)
from .generators import (
    Family,
    GeneratorConfig,
    SensorFieldConfig,
    gen_minton,
    gen_random,
    gen_sensor_field,
)
from .apo import ApoAgent, InvariantViolation
from .awc import AwcAgent
from .sim import Simulation, TrialResult, Verdict, draw_initial_values, run_trial
from .solvers import (
    BnbSolution,
    FlowNetwork,
    SubProblem,
    branch_and_bound,
    build_flow_network,
    extract_assignment,
    ford_fulkerson,
)
from .metrics import BatchSummary, paired_t_test, pct_central, pct_links, summarize
from .experiments import ExperimentConfig, load_config, load_preset, replay, run_suite

__version__ = "0.1.0"

__all__ = [
    "ApoAgent", "Assignment", "AwcAgent", "BatchSummary", "BnbSolution",
    "Constraint", "CspInstance", "DomainTooLarge", "ExperimentConfig",
    "Family", "FlowNetwork", "GeneratorConfig", "InvariantViolation", "Kind",
    "Relation", "SensorFieldConfig", "Simulation", "SubProblem", "TrialResult",
    "Value", "Verdict", "branch_and_bound", "brute_force", "build_flow_network",
    "conflicts_of", "draw_initial_values", "extract_assignment",
    "ford_fulkerson", "gen_minton", "gen_random", "gen_sensor_field",
    "is_satisfied", "load_config", "load_preset", "paired_t_test",
    "parse_instance", "pct_central", "pct_links", "replay", "run_suite",
    "run_trial", "summarize", "verify_solution",
]
