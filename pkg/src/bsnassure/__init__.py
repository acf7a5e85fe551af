"""Body sensor network simulator with trace-based property checking and mining."""

from .cgm import Cgm, CgmError, default_cgm, load_cgm
from .config import ConfigError, Confirmation, Policy, ScenarioConfig, config_from_dict, load_config
from .core import RiskLevel, VitalKind, classify_vital, fuse_status
from .mining import fit_linear, learn_rules, learn_tree, mine_cgm
from .refine import refine_and_compare
from .simulator import run_simulation
from .stats import paired_t_ci, t_interval
from .trace import Event, Snapshot, Trace, TraceError, read_csv, write_csv
from .verifier import PropertyVerdict, Verdict, check_all, check_property, verify_report

__all__ = [
    "Cgm", "CgmError", "ConfigError", "Confirmation", "Event", "Policy", "PropertyVerdict",
    "RiskLevel", "ScenarioConfig", "Snapshot", "Trace", "TraceError", "Verdict", "VitalKind",
    "check_all", "check_property", "classify_vital", "config_from_dict", "default_cgm",
    "fit_linear", "fuse_status", "learn_rules", "learn_tree", "load_cgm", "load_config",
    "mine_cgm", "paired_t_ci", "read_csv", "refine_and_compare", "run_simulation",
    "t_interval", "verify_report", "write_csv",
]
