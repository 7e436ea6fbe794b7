"""Joint transmit-signal and receive-filter design for ISAC with 1-bit DACs and ADCs."""

from .designs import (
    CommMetric,
    DacMode,
    DesignKind,
    DesignProblem,
    DesignResult,
    DesignStatus,
    design_continuous,
    design_qod,
    design_qos,
    solve_design,
)
from .model import SystemConfig, db_to_linear, linear_to_db
from .montecarlo import McConfig, mc_ber, mc_qscnr, mc_roc
from .radar import AdcMode, qscnr, receive_filter, scnr_infinite_bit

__version__ = "0.1.0"

__all__ = [
    "AdcMode",
    "CommMetric",
    "DacMode",
    "DesignKind",
    "DesignProblem",
    "DesignResult",
    "DesignStatus",
    "McConfig",
    "SystemConfig",
    "db_to_linear",
    "design_continuous",
    "design_qod",
    "design_qos",
    "linear_to_db",
    "mc_ber",
    "mc_qscnr",
    "mc_roc",
    "qscnr",
    "receive_filter",
    "scnr_infinite_bit",
    "solve_design",
]
