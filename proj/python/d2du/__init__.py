"""Python access to the d2du simulator core."""

from d2du._core import (
    Allocation,
    ConfigError,
    LinkConstraints,
    LinkProblem,
    MlpParams,
    WifiPeak,
    WifiPhyParams,
    apply_blend,
    average_params,
    bianchi_throughput,
    blend_factor,
    brute_force_allocation,
    channel_traffic_load,
    find_peak,
    forward,
    init_params,
    kkt_residual,
    manifest,
    run,
    solve_allocation,
    throughput_curve,
)

__all__ = [
    "Allocation",
    "ConfigError",
    "LinkConstraints",
    "LinkProblem",
    "MlpParams",
    "WifiPeak",
    "WifiPhyParams",
    "apply_blend",
    "average_params",
    "bianchi_throughput",
    "blend_factor",
    "brute_force_allocation",
    "channel_traffic_load",
    "find_peak",
    "forward",
    "init_params",
    "kkt_residual",
    "manifest",
    "run",
    "solve_allocation",
    "throughput_curve",
]
