"""Quasi-birth-death formulation and matrix-analytic stationary solver.

Levels index the class-2 population, phases the class-1 population (0..c).
The generator is block-tridiagonal with level-dependent blocks up to level c
and homogeneous blocks (A_c, B_c, C) beyond.  The stationary distribution is
matrix-geometric above level c: pi_j = pi_c R^(j-c).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .model import SystemParams, validate


class NotConverged(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"R iteration did not converge after {iterations} iterations "
            f"(residual {residual:.3e})"
        )


class Unstable(RuntimeError):
    def __init__(self, spectral_radius: float):
        self.spectral_radius = spectral_radius
        super().__init__(f"model is unstable: sp(R) = {spectral_radius:.12f} >= 1")


class SingularBoundary(RuntimeError):
    def __init__(self, j: int, message: str = ""):
        self.j = j
        super().__init__(message or f"singular boundary system at level {j}")


@dataclass(frozen=True)
class QbdBlocks:
    """Block matrices of the generator, all (c+1) x (c+1).

    A holds A_1..A_c (down-transitions), B holds B_0..B_c (local); for levels
    beyond c the chain is homogeneous with A_c and B_c.
    """

    params: SystemParams
    C: np.ndarray
    A: tuple        # A[n-1] = A_n, n = 1..c
    B: tuple        # B[n], n = 0..c

    @property
    def c(self) -> int:
        return self.params.c

    def A_at(self, n: int) -> np.ndarray:
        return self.A[min(n, self.c) - 1]

    def B_at(self, n: int) -> np.ndarray:
        return self.B[min(n, self.c)]


def build_blocks(params: SystemParams) -> QbdBlocks:
    """Assemble C, A_1..A_c, B_0..B_c from the transition rates.

    The class-1 departure rate out of phase i is i*mu1 on every subdiagonal
    (the row-sum-zero generator property pins this down); phase c has no
    class-1 arrival entry because arrivals finding c class-1 in service are
    lost.
    """
    p = validate(params)
    c = p.c
    lam1, lam2, mu1, mu2 = p.lambda1, p.lambda2, p.mu1, p.mu2
    C = lam2 * np.eye(c + 1)
    A = []
    for n in range(1, c + 1):
        A.append(np.diag([min(n, c - i) * mu2 for i in range(c + 1)]))
    B = []
    for n in range(0, c + 1):
        M = np.zeros((c + 1, c + 1))
        for i in range(c):
            M[i, i + 1] = lam1
            if i > 0:
                M[i, i - 1] = i * mu1
            M[i, i] = -(lam1 + lam2 + i * mu1 + min(c - i, n) * mu2)
        M[c, c - 1] = c * mu1
        M[c, c] = -(lam2 + c * mu1)
        B.append(M)
    return QbdBlocks(params=p, C=C, A=tuple(A), B=tuple(B))


def spectral_radius(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def _check_bc_conditioning(Bc: np.ndarray):
    if np.linalg.cond(Bc) > 1e14:
        raise SingularBoundary(-1, "B_c is numerically singular")


def _solve_R_iteration(blocks: QbdBlocks, tol: float, max_iter: int) -> tuple:
    """Monotone fixed point R_{k+1} = -(C + R_k^2 A_c) B_c^{-1} from R_0 = 0.

    Converges elementwise-nondecreasingly to the minimal nonnegative solution.
    """
    C, Bc, Ac = blocks.C, blocks.B[-1], blocks.A[-1]
    _check_bc_conditioning(Bc)
    Binv = np.linalg.inv(Bc)
    R = np.zeros_like(C)
    # successive-difference convergence alone can leave the equation residual
    # (and the spectral radius near the stability boundary) short of target;
    # polish until the residual reaches its rate-scaled floor
    resid_target = max(1e-12, 5e-15 * np.abs(Bc).max())
    for it in range(1, max_iter + 1):
        R_new = -(C + R @ R @ Ac) @ Binv
        diff = np.abs(R_new - R).max()
        R = R_new
        if diff < tol:
            resid = np.abs(C + R @ Bc + R @ R @ Ac).max()
            if resid < resid_target or diff == 0.0:
                return R, it
    resid = np.abs(C + R @ Bc + R @ R @ Ac).max()
    raise NotConverged(max_iter, resid)


def _solve_R_logred(blocks: QbdBlocks, tol: float, max_iter: int = 200) -> tuple:
    """Logarithmic-reduction solve for G, then R = C (-B_c - C G)^{-1}.

    Quadratic convergence; remains usable very close to the stability
    boundary where the linear fixed point stalls.
    """
    C, Bc, Ac = blocks.C, blocks.B[-1], blocks.A[-1]
    _check_bc_conditioning(Bc)
    m = C.shape[0]
    Binv = np.linalg.inv(-Bc)
    H = Binv @ C      # up
    L = Binv @ Ac     # down
    G = L.copy()
    T = H.copy()
    I = np.eye(m)
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(1, max_iter + 1):
            U = H @ L + L @ H
            M = np.linalg.inv(I - U)
            H = M @ (H @ H)
            L = M @ (L @ L)
            step = T @ L
            # at or past the stability boundary T stops decaying and
            # eventually overflows; G is as complete as it will get then
            if not np.isfinite(step).all():
                break
            G += step
            if np.abs(step).max() < tol:
                break
            T = T @ H
        else:
            raise NotConverged(max_iter, np.abs(step).max())
    R = C @ np.linalg.inv(-Bc - C @ G)
    return R, it


def solve_R(
    blocks: QbdBlocks,
    tol: float = 1e-12,
    max_iter: int = 100_000,
    method: str = "iteration",
    check_stability: bool = True,
    residual_tol: float = 1e-10,
) -> np.ndarray:
    """Minimal nonnegative solution of C + R B_c + R^2 A_c = 0.

    Args:
        method: "iteration" (default, monotone fixed point) or "logred".
        check_stability: raise :class:`Unstable` when sp(R) >= 1 - 1e-12.

    Raises:
        NotConverged: iteration cap hit before the tolerance.
        Unstable: spectral radius at or above 1 (stability check enabled).
    """
    if method == "logred":
        R, _ = _solve_R_logred(blocks, tol)
    else:
        R, _ = _solve_R_iteration(blocks, tol, max_iter)
    C, Bc, Ac = blocks.C, blocks.B[-1], blocks.A[-1]
    resid = np.abs(C + R @ Bc + R @ R @ Ac).max()
    sp = spectral_radius(R)
    if check_stability and sp >= 1.0 - 1e-12:
        raise Unstable(sp)
    if resid > residual_tol:
        raise NotConverged(0, resid)
    return R


def solve_boundary(blocks: QbdBlocks, R: np.ndarray) -> list:
    """Level-dependent matrices R^(1)..R^(c) with R^(c) = R.

    Downward recursion R^(j) = -C (B_j + R^(j+1) A_{j+1})^{-1}.
    Returned list is indexed so that result[j-1] = R^(j).
    """
    c = blocks.c
    Rj = [None] * c
    Rj[c - 1] = R
    for j in range(c - 1, 0, -1):
        M = blocks.B[j] + Rj[j] @ blocks.A_at(j + 1)
        try:
            Rj[j - 1] = -blocks.C @ np.linalg.inv(M)
        except np.linalg.LinAlgError:
            raise SingularBoundary(j) from None
        if np.linalg.cond(M) > 1e14:
            raise SingularBoundary(j)
    return Rj


@dataclass
class StationarySolution:
    """Solved stationary distribution in matrix-geometric form."""

    blocks: QbdBlocks
    R: np.ndarray
    Rj: list                    # Rj[j-1] = R^(j), j = 1..c
    pi: np.ndarray              # rows pi_0..pi_c
    spectral_radius_R: float
    residuals: dict = field(default_factory=dict)

    @property
    def params(self) -> SystemParams:
        return self.blocks.params

    def level(self, j: int) -> np.ndarray:
        """pi_j: stored for j <= c, pi_c R^(j-c) beyond."""
        c = self.blocks.c
        if j < 0:
            raise ValueError("level must be nonnegative")
        if j <= c:
            return self.pi[j]
        return self.pi[c] @ np.linalg.matrix_power(self.R, j - c)


def stationary_level(solution: StationarySolution, j: int) -> np.ndarray:
    return solution.level(j)


def solve_pi0(blocks: QbdBlocks, R: np.ndarray, Rj: list) -> StationarySolution:
    """Boundary solve: pi_0 (B_0 + R^(1) A_1) = 0 plus the full normalization.

    One column of the singular system is replaced by the all-ones vector to
    obtain a unique solution, which is then rescaled so that the total mass
    (including the geometric tail through (I - R)^{-1}) equals 1.
    """
    c = blocks.c
    m = c + 1
    M0 = blocks.B[0] + Rj[0] @ blocks.A[0]
    M = M0.copy()
    M[:, -1] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    try:
        pi0 = np.linalg.solve(M.T, rhs)
    except np.linalg.LinAlgError:
        raise SingularBoundary(0) from None
    if np.linalg.cond(M) > 1e14:
        raise SingularBoundary(0)

    # normalization: pi_0 (I + sum_{i=1}^{c-1} prod_{j<=i} R^(j)
    #                        + (prod_{j<=c} R^(j)) (I-R)^{-1}) e = 1
    I = np.eye(m)
    N = I.copy()
    prod = I.copy()
    for i in range(1, c):
        prod = prod @ Rj[i - 1]
        N += prod
    prod = prod @ Rj[c - 1]
    Itail = np.linalg.inv(I - R)
    N += prod @ Itail
    total = float(pi0 @ N @ np.ones(m))
    if total <= 0:
        raise SingularBoundary(0, "non-positive normalization constant")
    pi0 = pi0 / total

    pi = np.empty((c + 1, m))
    pi[0] = pi0
    for j in range(1, c + 1):
        pi[j] = pi[j - 1] @ Rj[j - 1]

    residuals = {
        "R_fixed_point": float(
            np.abs(blocks.C + R @ blocks.B[-1] + R @ R @ blocks.A[-1]).max()
        ),
        "pi0_boundary": float(np.abs(pi0 @ M0).max()),
        "normalization": abs(float(pi0 @ N @ np.ones(m)) - 1.0),
    }
    return StationarySolution(
        blocks=blocks,
        R=R,
        Rj=list(Rj),
        pi=pi,
        spectral_radius_R=spectral_radius(R),
        residuals=residuals,
    )


def solve(params: SystemParams, method: str = "iteration") -> StationarySolution:
    """Full pipeline: blocks -> R -> boundary matrices -> normalized pi."""
    blocks = build_blocks(params)
    R = solve_R(blocks, method=method)
    Rj = solve_boundary(blocks, R)
    return solve_pi0(blocks, R, Rj)


def total_mass(solution: StationarySolution) -> float:
    """Sum of all level masses using the closed-form geometric tail."""
    c = solution.blocks.c
    e = np.ones(c + 1)
    head = solution.pi[:c].sum(axis=0) @ e
    I = np.eye(c + 1)
    tail = solution.pi[c] @ np.linalg.inv(I - solution.R) @ e
    return float(head + tail)


def dump_matrices(blocks: QbdBlocks, R: np.ndarray | None, directory: str):
    """Write C, A_n, B_n (and R if given) as row-major CSV files for debugging."""
    os.makedirs(directory, exist_ok=True)
    np.savetxt(os.path.join(directory, "C.csv"), blocks.C, delimiter=",")
    for n, An in enumerate(blocks.A, start=1):
        np.savetxt(os.path.join(directory, f"A{n}.csv"), An, delimiter=",")
    for n, Bn in enumerate(blocks.B):
        np.savetxt(os.path.join(directory, f"B{n}.csv"), Bn, delimiter=",")
    if R is not None:
        np.savetxt(os.path.join(directory, "R.csv"), R, delimiter=",")
