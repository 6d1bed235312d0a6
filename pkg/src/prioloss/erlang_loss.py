"""Class-1 subsystem analysis (M/G/c/0 loss system) and the stability criterion.

The class-1 customers alone form an Erlang loss system whose stationary
occupancy eta_i is the truncated Poisson distribution (insensitive to the
service law beyond its mean).  Class-2 stability requires the class-2 load to
stay below the mean number of servers left free by class 1:

    rho2 < Delta,   Delta = c - sum_i i * eta_i,

equivalently lambda2 < lambda_max with

    lambda_max = mu2 * [sum_{i<c} (c-i) rho1^i/i!] / [sum_{i<=c} rho1^i/i!].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import InvalidParams, SystemParams, validate


@dataclass(frozen=True)
class LossDistribution:
    """Stationary distribution of busy class-1 servers (length c+1)."""

    eta: np.ndarray

    @property
    def c(self) -> int:
        return len(self.eta) - 1

    @property
    def blocking(self) -> float:
        """Erlang-B blocking probability eta_c."""
        return float(self.eta[-1])


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    delta: float        # mean servers available to class 2
    rho2: float
    lambda_max: float   # critical class-2 arrival rate
    margin: float       # delta - rho2

    def to_dict(self) -> dict:
        return {
            "stable": self.stable,
            "delta": self.delta,
            "rho2": self.rho2,
            "lambda_max": self.lambda_max,
            "margin": self.margin,
        }


def loss_distribution(rho1: float, c: int) -> LossDistribution:
    """Truncated-Poisson occupancy eta_i = (rho1^i/i!) / sum_k rho1^k/k!.

    Weights are built by the recurrence w_i = w_{i-1} * rho1 / i to stay
    finite for large c.
    """
    if rho1 < 0 or not np.isfinite(rho1):
        raise InvalidParams("rho1", "rho1 must be >= 0 and finite")
    if not isinstance(c, int) or c < 1:
        raise InvalidParams("c", "c must be a positive integer")
    w = np.empty(c + 1)
    w[0] = 1.0
    for i in range(1, c + 1):
        w[i] = w[i - 1] * rho1 / i
    return LossDistribution(eta=w / w.sum())


def stability(params: SystemParams) -> StabilityReport:
    """Evaluate the ergodicity condition for class 2.

    Strict inequality: lambda2 == lambda_max is reported as unstable.
    """
    p = validate(params)
    eta = loss_distribution(p.rho1, p.c).eta
    idx = np.arange(p.c + 1)
    delta = p.c - float(idx @ eta)
    # lambda_max = mu2 * Delta; expand via the unnormalized weights for clarity
    lambda_max = p.mu2 * float((p.c - idx) @ eta)
    margin = delta - p.rho2
    return StabilityReport(
        stable=p.lambda2 < lambda_max,
        delta=delta,
        rho2=p.rho2,
        lambda_max=lambda_max,
        margin=margin,
    )


def no_loss_stability(rhos, c: int) -> bool:
    """Stability of the companion multiclass system without losses: sum(rho) < c."""
    rhos = np.asarray(rhos, dtype=float)
    if rhos.size and (rhos < 0).any():
        raise InvalidParams("rhos", "traffic intensities must be >= 0")
    if not isinstance(c, int) or c < 1:
        raise InvalidParams("c")
    return float(rhos.sum()) < c
