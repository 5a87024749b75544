"""Device-edge collaborative speculative decoding simulator.

A small language model on the device drafts token bursts that an edge-hosted
verifier accepts or trims; an online controller picks each burst's drafting
budget to maximize committed tokens per second under a long-run device energy
budget, and an in-burst uncertainty monitor stops drafting early when the
token stream turns unpredictable.
"""

from .channel import (
    ChannelConfig,
    ChannelSample,
    PayloadSpec,
    payload_bits,
    sample_channel,
    sample_gain,
    shannon_rate,
    uplink_cost,
)
from .compute import SlmProfile, VerifierProfile, draft_energy, draft_flops, draft_latency
from .config import (
    ConfigError,
    SimConfig,
    dbm_to_watts,
    load_config,
    make_config,
    parse_config_text,
)
from .early_exit import UncertaintyBucket, bucket_step, default_cap, drafting_loop
from .generation import (
    GAMMA_SAMPLER,
    TRACE_REPLAY,
    DraftToken,
    EntropyModel,
    TokenSource,
    TraceExhausted,
    VerifyResult,
    calibration_bins,
    load_trace,
    phi,
    phi_inverse,
    set_size,
    verify,
)
from .oracle import BoundReport, OracleResult, offline_oracle, theorem_check
from .policies import (
    DSSD,
    GELATO,
    STATIC_SD,
    Policy,
    StepContext,
    StepResult,
    parse_policy_name,
    policy_from_config,
    policy_step,
)
from .rng import RunDraws, derive_seed, generate_draws, stream_generator
from .runlog import RUN_HEADER, load_run, load_run_table, load_sidecar, save_run, save_sidecar
from .scheduler import (
    BudgetState,
    SchedulerParams,
    VirtualQueue,
    choose_budget,
    expected_hits,
    surrogate_energy,
    surrogate_latency,
    update_payload_estimate,
    update_queue,
    utility,
)
from .simulator import AggregateMetrics, Metrics, RunRecord, StepOutcome, aggregate, run

__version__ = "0.1.0"

__all__ = [
    "AggregateMetrics",
    "BoundReport",
    "BudgetState",
    "ChannelConfig",
    "ChannelSample",
    "ConfigError",
    "DSSD",
    "DraftToken",
    "EntropyModel",
    "GAMMA_SAMPLER",
    "GELATO",
    "Metrics",
    "OracleResult",
    "PayloadSpec",
    "Policy",
    "RUN_HEADER",
    "RunDraws",
    "RunRecord",
    "STATIC_SD",
    "SchedulerParams",
    "SimConfig",
    "SlmProfile",
    "StepContext",
    "StepOutcome",
    "StepResult",
    "TRACE_REPLAY",
    "TokenSource",
    "TraceExhausted",
    "UncertaintyBucket",
    "VerifierProfile",
    "VerifyResult",
    "VirtualQueue",
    "aggregate",
    "bucket_step",
    "calibration_bins",
    "choose_budget",
    "dbm_to_watts",
    "default_cap",
    "derive_seed",
    "draft_energy",
    "draft_flops",
    "draft_latency",
    "drafting_loop",
    "expected_hits",
    "generate_draws",
    "load_config",
    "load_run",
    "load_run_table",
    "load_sidecar",
    "load_trace",
    "make_config",
    "offline_oracle",
    "parse_config_text",
    "parse_policy_name",
    "payload_bits",
    "phi",
    "phi_inverse",
    "policy_from_config",
    "policy_step",
    "run",
    "sample_channel",
    "sample_gain",
    "save_run",
    "save_sidecar",
    "set_size",
    "shannon_rate",
    "stream_generator",
    "surrogate_energy",
    "surrogate_latency",
    "theorem_check",
    "update_payload_estimate",
    "update_queue",
    "utility",
    "verify",
    "__version__",
]
