"""Averaging-principle lab for fractional backward SDEs."""

from ._core import (
    ConfigError,
    ConsistencyError,
    ContractError,
    DomainError,
    Error,
    InfeasibleError,
    IoError,
    NumericError,
    QuadratureError,
    c0_const,
    config_hash,
    fit_log_slope,
    kernel_transform,
    norm_sq,
    normalize_config,
    rho,
    run_command,
    sample_fbm,
    solve_alpha0,
)

__all__ = [name for name in dir() if not name.startswith("_")]
