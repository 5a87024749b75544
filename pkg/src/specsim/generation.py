"""Token-level generation model: entropy draws, top-p set sizes, acceptance law.

Draft-token difficulty is summarized by its predictive entropy H (nats). The
probability that the verifier accepts a draft token decays exponentially in H,
and the size of the compressed top-p set transmitted for that token grows
exponentially in H. Entropies come either from a calibrated Gamma sampler or
from a recorded trace; acceptance consumes one dedicated uniform draw per
token position so that every consumer of the same seed sees identical
randomness at the same (step, position).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

GAMMA_SAMPLER = "gamma-sampler"
TRACE_REPLAY = "trace-replay"

TRACE_HEADER = ("entropy_nats", "topp_size")


class TraceExhausted(Exception):
    """Raised when a replayed trace has no rows left for the requested token."""


def phi(entropy_nats: float, accept_coeff: float) -> float:
    """Per-token acceptance probability at entropy H: exp(-a*H)."""
    if entropy_nats < 0.0:
        raise ValueError(f"entropy must be >= 0, got {entropy_nats!r}")
    if not accept_coeff > 0.0:
        raise ValueError(f"accept_coeff must be positive, got {accept_coeff!r}")
    return math.exp(-accept_coeff * entropy_nats)


def phi_inverse(rho0: float, accept_coeff: float) -> float:
    """Entropy at which acceptance falls to rho0: the early-exit drain threshold."""
    if not 0.0 < rho0 <= 1.0:
        raise ValueError(f"rho0 must lie in (0, 1], got {rho0!r}")
    if not accept_coeff > 0.0:
        raise ValueError(f"accept_coeff must be positive, got {accept_coeff!r}")
    return -math.log(rho0) / accept_coeff


def set_size(entropy_nats: float, cp: float, smax: int) -> int:
    """Top-p set size at entropy H: ceil(cp * exp(H)), clamped to [1, smax]."""
    if entropy_nats < 0.0:
        raise ValueError(f"entropy must be >= 0, got {entropy_nats!r}")
    raw = math.ceil(cp * math.exp(entropy_nats))
    return max(1, min(smax, raw))


@dataclass(frozen=True, slots=True)
class DraftToken:
    """One drafted token: its entropy, transmitted set size, and acceptance draw."""

    entropy_nats: float
    topp_size: int
    accept_draw: float


@dataclass(frozen=True, slots=True)
class VerifyResult:
    accepted_prefix: int
    total_appended: int


def verify(tokens: list[DraftToken], accept_coeff: float) -> VerifyResult:
    """Parallel verification of a drafted block.

    Token i is accepted iff its uniform draw falls below phi(H_i). The first
    rejection truncates the block; the verifier then contributes one corrected
    token, so total_appended = accepted_prefix + 1.
    """
    if not tokens:
        raise ValueError("verify requires at least one drafted token")
    accepted = 0
    for token in tokens:
        if token.accept_draw < phi(token.entropy_nats, accept_coeff):
            accepted += 1
        else:
            break
    return VerifyResult(accepted_prefix=accepted, total_appended=accepted + 1)


@dataclass(frozen=True, slots=True)
class EntropyModel:
    """Entropy source configuration: Gamma sampler or trace replay."""

    law: str
    gamma_shape: float = 2.0
    gamma_scale: float = 0.1505
    cp: float = 1.0
    smax: int = 256
    trace_path: str = ""

    def __post_init__(self) -> None:
        if self.law not in (GAMMA_SAMPLER, TRACE_REPLAY):
            raise ValueError(f"unknown entropy law {self.law!r}")
        if self.law == GAMMA_SAMPLER:
            if not (self.gamma_shape > 0.0 and self.gamma_scale > 0.0):
                raise ValueError("gamma sampler requires positive shape and scale")
        if not self.cp > 0.0:
            raise ValueError(f"cp must be positive, got {self.cp!r}")
        if self.smax < 1:
            raise ValueError(f"smax must be >= 1, got {self.smax!r}")

    @property
    def mean_entropy(self) -> float:
        if self.law != GAMMA_SAMPLER:
            raise ValueError("mean_entropy is defined for the gamma sampler only")
        return self.gamma_shape * self.gamma_scale

    def sample_entropies(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.law != GAMMA_SAMPLER:
            raise ValueError("sample_entropies is defined for the gamma sampler only")
        return rng.gamma(self.gamma_shape, self.gamma_scale, size=n)


def next_token(
    model: EntropyModel,
    entropy_rng: np.random.Generator,
    accept_rng: np.random.Generator,
    size_scale: float = 1.0,
) -> DraftToken:
    """Draw one token sequentially from the model's entropy and acceptance streams."""
    if model.law != GAMMA_SAMPLER:
        raise ValueError("next_token draws from the gamma sampler; use a token source for traces")
    h = float(entropy_rng.gamma(model.gamma_shape, model.gamma_scale))
    return DraftToken(
        entropy_nats=h,
        topp_size=set_size(h, model.cp * size_scale, model.smax),
        accept_draw=float(accept_rng.random()),
    )


def load_trace(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a recorded entropy trace: CSV with header entropy_nats,topp_size."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"trace {path} is empty") from None
        if tuple(h.strip() for h in header) != TRACE_HEADER:
            raise ValueError(
                f"trace {path} must start with header {','.join(TRACE_HEADER)!r}, "
                f"got {','.join(header)!r}"
            )
        entropies: list[float] = []
        sizes: list[int] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"trace {path} line {lineno}: expected 2 columns")
            h = float(row[0])
            s = int(row[1])
            if h < 0.0:
                raise ValueError(f"trace {path} line {lineno}: entropy must be >= 0")
            if s < 1:
                raise ValueError(f"trace {path} line {lineno}: topp_size must be >= 1")
            entropies.append(h)
            sizes.append(s)
    if not entropies:
        raise ValueError(f"trace {path} contains no data rows")
    return np.asarray(entropies, dtype=float), np.asarray(sizes, dtype=np.int64)


class TokenSource:
    """Per-run token supply, indexable by (step, position within step).

    Sampler mode exposes a pre-drawn (steps x gamma0) entropy table; trace mode
    consumes recorded rows linearly. Acceptance draws always come from the
    pre-drawn (steps x gamma0) uniform table, so the draw at (step, position)
    does not depend on which policy is asking.
    """

    def __init__(
        self,
        model: EntropyModel,
        entropy_table: np.ndarray | None,
        accept_table: np.ndarray,
        trace_entropies: np.ndarray | None = None,
        trace_sizes: np.ndarray | None = None,
    ) -> None:
        self.model = model
        self._entropy = entropy_table
        self._accept = accept_table
        self._trace_h = trace_entropies
        self._trace_s = trace_sizes
        self._cursor = 0

    @property
    def max_positions(self) -> int:
        return self._accept.shape[1]

    def token(self, step_index: int, position: int, size_scale: float = 1.0) -> DraftToken:
        """Token at 0-based (step_index, position). Trace mode advances a cursor."""
        u = float(self._accept[step_index, position])
        if self.model.law == GAMMA_SAMPLER:
            assert self._entropy is not None
            h = float(self._entropy[step_index, position])
            size = set_size(h, self.model.cp * size_scale, self.model.smax)
        else:
            assert self._trace_h is not None and self._trace_s is not None
            if self._cursor >= len(self._trace_h):
                raise TraceExhausted(f"trace consumed after {self._cursor} tokens")
            h = float(self._trace_h[self._cursor])
            base = int(self._trace_s[self._cursor])
            self._cursor += 1
            size = max(1, min(self.model.smax, math.ceil(base * size_scale)))
        return DraftToken(entropy_nats=h, topp_size=size, accept_draw=u)


def calibration_bins(
    model: EntropyModel,
    accept_coeff: float,
    n_tokens: int,
    entropy_rng: np.random.Generator,
    accept_rng: np.random.Generator,
    bin_width: float = 0.1,
) -> list[tuple[float, float, int]]:
    """Monte-Carlo acceptance-vs-entropy bins for calibration export.

    Returns (bin_center, empirical_acceptance, count) rows for non-empty bins,
    sampling n_tokens from the entropy model with one acceptance draw each.
    """
    if n_tokens < 1:
        raise ValueError("n_tokens must be >= 1")
    if not bin_width > 0.0:
        raise ValueError("bin_width must be positive")
    entropies = model.sample_entropies(entropy_rng, n_tokens)
    draws = accept_rng.random(n_tokens)
    thresholds = np.exp(-accept_coeff * entropies)
    accepted = draws < thresholds
    indices = np.floor(entropies / bin_width).astype(np.int64)
    rows: list[tuple[float, float, int]] = []
    for idx in np.unique(indices):
        mask = indices == idx
        count = int(mask.sum())
        rows.append(
            (float((idx + 0.5) * bin_width), float(accepted[mask].mean()), count)
        )
    return rows
