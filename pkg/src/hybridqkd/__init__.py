"""Key rates of no-switching CV-QKD under individual, coherent and decoherence-limited hybrid attacks."""
from .attacks import eve_information, eve_terms, hybrid_bundle_circuit, hybrid_bundle_closed_form
from .finite_size import AttackClass, FiniteSizeConfig, KeyRateReport, asymptotic_key_rate, key_length
from .optimize import find_tau_threshold, find_tau_thresholds, maximize_over_mu, optimize_modulation_variance
from .protocol import MemoryParams, SystemModel, mutual_info_ab

__version__ = "0.1.0"

__all__ = [
    "AttackClass",
    "FiniteSizeConfig",
    "KeyRateReport",
    "MemoryParams",
    "SystemModel",
    "asymptotic_key_rate",
    "eve_information",
    "eve_terms",
    "find_tau_threshold",
    "find_tau_thresholds",
    "hybrid_bundle_circuit",
    "hybrid_bundle_closed_form",
    "key_length",
    "maximize_over_mu",
    "mutual_info_ab",
    "optimize_modulation_variance",
]
