from core.verification.gradcheck import GradCheckReport, check_gradients, compare_gradients, finite_diff_grad
from core.verification.macs import MacModel, instrumented_count, mac_count, radius_sweep
from core.verification.oracle import OracleReport, oracle_equivalence, replay_case

__all__ = [
    "GradCheckReport",
    "check_gradients",
    "compare_gradients",
    "finite_diff_grad",
    "MacModel",
    "instrumented_count",
    "mac_count",
    "radius_sweep",
    "OracleReport",
    "oracle_equivalence",
    "replay_case",
]
