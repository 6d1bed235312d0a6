"""Shared parameter, state, and service-distribution types.

Everything here is an immutable value type with validation; the analytic
solvers and the simulator both build on these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class InvalidParams(ValueError):
    """A model parameter violates its constraints; ``field`` names the offender."""

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(message or f"invalid parameter: {field}")


@dataclass(frozen=True)
class SystemParams:
    """One model instance: Poisson arrival rates, service rates, server count.

    Class 1 has preemptive-resume priority and is lost when all c servers are
    already held by class-1 customers; class 2 waits in an infinite FCFS buffer.
    """

    lambda1: float
    lambda2: float
    mu1: float
    mu2: float
    c: int

    @property
    def rho1(self) -> float:
        return self.lambda1 / self.mu1

    @property
    def rho2(self) -> float:
        return self.lambda2 / self.mu2


def validate(params: SystemParams) -> SystemParams:
    """Check all SystemParams invariants; return the params unchanged.

    Raises:
        InvalidParams: naming the first violated field.
    """
    if not isinstance(params.c, int) or isinstance(params.c, bool) or params.c < 1:
        raise InvalidParams("c", f"c must be a positive integer, got {params.c!r}")
    for name in ("lambda1", "lambda2", "mu1", "mu2"):
        v = getattr(params, name)
        if not math.isfinite(v):
            raise InvalidParams(name, f"{name} must be finite, got {v!r}")
    if params.lambda1 < 0:
        raise InvalidParams("lambda1", "lambda1 must be >= 0")
    if params.lambda2 <= 0:
        raise InvalidParams("lambda2", "lambda2 must be > 0")
    if params.mu1 <= 0:
        raise InvalidParams("mu1", "mu1 must be > 0")
    if params.mu2 <= 0:
        raise InvalidParams("mu2", "mu2 must be > 0")
    return params


@dataclass(frozen=True)
class State:
    """System state (i class-1 in service, j class-2 in system) for c servers."""

    i: int
    j: int
    c: int

    def __post_init__(self):
        if self.c < 1:
            raise InvalidParams("c")
        if self.i < 0 or self.i > self.c:
            raise InvalidParams("i", f"i must lie in 0..{self.c}, got {self.i}")
        if self.j < 0:
            raise InvalidParams("j", "j must be nonnegative")


# service-law kinds (shared with the numba simulator core)
EXPONENTIAL = 0
ERLANG = 1
DETERMINISTIC = 2

_KIND_NAMES = {EXPONENTIAL: "exponential", ERLANG: "erlang", DETERMINISTIC: "deterministic"}


@dataclass(frozen=True)
class ServiceDistribution:
    """Service-time law: exponential, Erlang, or deterministic.

    For Erlang, ``rate`` is the per-stage rate, so the mean is shape/rate.
    Use :func:`mean_preserving_erlang` to build an Erlang law with the same
    mean as an exponential with rate mu.
    """

    kind: int
    shape: int = 1       # Erlang stage count (1 for the others)
    rate: float = 0.0    # exponential rate, or Erlang per-stage rate
    duration: float = 0.0  # deterministic only

    @classmethod
    def exponential(cls, rate: float) -> "ServiceDistribution":
        if rate <= 0 or not math.isfinite(rate):
            raise InvalidParams("rate", "exponential rate must be > 0")
        return cls(EXPONENTIAL, 1, rate, 0.0)

    @classmethod
    def erlang(cls, shape: int, stage_rate: float) -> "ServiceDistribution":
        if not isinstance(shape, int) or shape < 1:
            raise InvalidParams("shape", "Erlang shape must be a positive integer")
        if stage_rate <= 0 or not math.isfinite(stage_rate):
            raise InvalidParams("rate", "Erlang per-stage rate must be > 0")
        return cls(ERLANG, shape, stage_rate, 0.0)

    @classmethod
    def deterministic(cls, duration: float) -> "ServiceDistribution":
        if duration <= 0 or not math.isfinite(duration):
            raise InvalidParams("duration", "deterministic duration must be > 0")
        return cls(DETERMINISTIC, 1, 0.0, duration)

    def mean(self) -> float:
        if self.kind == EXPONENTIAL:
            return 1.0 / self.rate
        if self.kind == ERLANG:
            return self.shape / self.rate
        return self.duration

    def variance(self) -> float:
        if self.kind == EXPONENTIAL:
            return 1.0 / self.rate**2
        if self.kind == ERLANG:
            return self.shape / self.rate**2
        return 0.0

    def sample(self, rng, size=None):
        """Draw samples using a numpy Generator (vectorized; for tests and checks)."""
        if self.kind == EXPONENTIAL:
            return rng.exponential(1.0 / self.rate, size)
        if self.kind == ERLANG:
            return rng.gamma(self.shape, 1.0 / self.rate, size)
        import numpy as np

        return np.full(size, self.duration) if size is not None else self.duration

    def core_params(self):
        """(kind, shape, rate-or-duration) triple consumed by the simulator core."""
        if self.kind == DETERMINISTIC:
            return (DETERMINISTIC, 1, self.duration)
        return (self.kind, self.shape, self.rate)

    def label(self) -> str:
        if self.kind == ERLANG:
            return f"erlang:{self.shape}"
        return "exp" if self.kind == EXPONENTIAL else "det"


def mean_preserving_erlang(mu: float, r: int) -> ServiceDistribution:
    """Erlang law with shape r whose mean equals 1/mu (per-stage rate r*mu)."""
    if not isinstance(r, int) or r < 1:
        raise InvalidParams("r", "Erlang shape must be a positive integer")
    if mu <= 0 or not math.isfinite(mu):
        raise InvalidParams("mu", "mu must be > 0")
    return ServiceDistribution.erlang(r, r * mu)


def distribution_from_spec(spec: str, mu: float) -> ServiceDistribution:
    """Parse a CLI distribution spec ('exp', 'erlang:R', 'det') with mean 1/mu."""
    s = spec.strip().lower()
    if s == "exp":
        return ServiceDistribution.exponential(mu)
    if s == "det":
        if mu <= 0:
            raise InvalidParams("mu")
        return ServiceDistribution.deterministic(1.0 / mu)
    if s.startswith("erlang:"):
        try:
            r = int(s.split(":", 1)[1])
        except ValueError:
            raise InvalidParams("dist", f"bad Erlang shape in {spec!r}") from None
        return mean_preserving_erlang(mu, r)
    raise InvalidParams("dist", f"unknown distribution spec {spec!r}")
