"""Stationary performance measures built on the matrix-geometric solution.

All infinite tail sums use closed forms in (I-R)^{-1} and (I-R)^{-2}; no
numeric truncation enters any measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import erlang_loss
from .model import SystemParams, validate
from .qbd import StationarySolution, Unstable


@dataclass(frozen=True)
class PerformanceReport:
    mean_wait: float            # E W_q of class-2 customers
    mean_terminations: float    # mean preemptions per class-2 customer
    throughput: float           # class-2 departure rate
    marginal_phase: np.ndarray  # P(i class-1 in service)
    queue_tail: dict            # k -> P(Q2 >= k)

    def to_dict(self) -> dict:
        return {
            "mean_wait": self.mean_wait,
            "mean_terminations": self.mean_terminations,
            "throughput": self.throughput,
            "marginal_phase": list(map(float, self.marginal_phase)),
            "queue_tail": {str(k): float(v) for k, v in self.queue_tail.items()},
        }


def _require_stable(solution: StationarySolution):
    if solution.spectral_radius_R >= 1.0 - 1e-12:
        raise Unstable(solution.spectral_radius_R)


def mean_waiting(solution: StationarySolution) -> float:
    """Mean class-2 waiting time via Little's law.

    E W_q = [ sum_{j=1}^{c-1} sum_{i=c-j+1}^{c} (i+j-c) pi(i,j)
              + pi_c (I-R)^{-2} R e + pi_c (I-R)^{-1} f ] / lambda2,
    with f = (0, 1, ..., c)^T.
    """
    _require_stable(solution)
    p = solution.params
    c = p.c
    head = 0.0
    for j in range(1, c):
        for i in range(c - j + 1, c + 1):
            head += (i + j - c) * solution.pi[j, i]
    I = np.eye(c + 1)
    Iinv = np.linalg.inv(I - solution.R)
    e = np.ones(c + 1)
    f = np.arange(c + 1, dtype=float)
    tail = solution.pi[c] @ Iinv @ Iinv @ solution.R @ e
    tail += solution.pi[c] @ Iinv @ f
    return float(head + tail) / p.lambda2


def termination_state_probability(solution: StationarySolution) -> float:
    """P((i,j) in S*) with S* = {i+j >= c, i <= c-1}: all servers busy and at
    least one class-2 customer in service."""
    _require_stable(solution)
    c = solution.blocks.c
    total = 0.0
    for j in range(1, c + 1):
        total += solution.pi[j, max(0, c - j): c].sum()
    I = np.eye(c + 1)
    tail = solution.pi[c] @ solution.R @ np.linalg.inv(I - solution.R)
    total += tail[:c].sum()
    return float(total)


def mean_terminations(solution: StationarySolution) -> float:
    """Mean number of preemption (termination) events per class-2 customer:
    (lambda1/lambda2) * P(S*), by PASTA."""
    p = solution.params
    return p.lambda1 / p.lambda2 * termination_state_probability(solution)


def throughput(params: SystemParams) -> float:
    """Class-2 departure rate: lambda2 while stable, saturating at lambda_max."""
    p = validate(params)
    report = erlang_loss.stability(p)
    return min(p.lambda2, report.lambda_max)


def marginal_phase(solution: StationarySolution) -> np.ndarray:
    """Marginal distribution of the class-1 count: sum_j pi(., j) with the
    geometric tail in closed form.  Coincides with the Erlang loss law eta."""
    c = solution.blocks.c
    I = np.eye(c + 1)
    marg = solution.pi[:c].sum(axis=0)
    marg = marg + solution.pi[c] @ np.linalg.inv(I - solution.R)
    return marg


def queue_tail(solution: StationarySolution, k: int) -> float:
    """P(Q2 >= k)."""
    _require_stable(solution)
    if k <= 0:
        return 1.0
    c = solution.blocks.c
    e = np.ones(c + 1)
    I = np.eye(c + 1)
    Iinv = np.linalg.inv(I - solution.R)
    if k > c:
        return float(
            solution.pi[c] @ np.linalg.matrix_power(solution.R, k - c) @ Iinv @ e
        )
    head = solution.pi[k:c].sum(axis=0) if k < c else np.zeros(c + 1)
    return float((head + solution.pi[c] @ Iinv) @ e)


def mean_waiting_count(solution: StationarySolution) -> float:
    """Mean number of waiting class-2 customers, lambda2 * E W_q."""
    return solution.params.lambda2 * mean_waiting(solution)


def performance_report(solution: StationarySolution, tail_ks=(1, 5, 10)) -> PerformanceReport:
    return PerformanceReport(
        mean_wait=mean_waiting(solution),
        mean_terminations=mean_terminations(solution),
        throughput=throughput(solution.params),
        marginal_phase=marginal_phase(solution),
        queue_tail={k: queue_tail(solution, k) for k in tail_ks},
    )
