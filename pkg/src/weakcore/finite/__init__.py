"""Finite NTU strategic games: blocking, weak-core/α-core, characteristic form."""
from .blocking import (BlockingCertificate, alpha_core_members, certificate_margin,
                       find_blocking, is_blocked, iter_blocking, iter_weak_core,
                       verify_certificate, weak_core_members)
from .characteristic import (H_value, balanced_weights, balancedness_violations,
                             check_balanced, core_point_from_characteristic, in_V,
                             minimal_balanced_families, payoff_grid)
from .game import FiniteGame, evaluate

__all__ = [
    "BlockingCertificate", "FiniteGame", "H_value", "alpha_core_members",
    "balanced_weights", "balancedness_violations", "certificate_margin",
    "check_balanced", "core_point_from_characteristic", "evaluate", "find_blocking",
    "in_V", "is_blocked", "iter_blocking", "iter_weak_core", "minimal_balanced_families",
    "payoff_grid", "verify_certificate", "weak_core_members",
]
