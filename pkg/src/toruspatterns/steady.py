"""Stationary states of the diffusion-reaction balance by Newton continuation.

The root problem is L u + f(u) = 0 with the assembled surface Laplacian L.
The Jacobian is exact (L plus the diagonal of f'(u)), so convergence is
quadratic once inside the basin; continuation in the ripple amplitude
supplies the initial guesses, stepping from the known standard-torus
pattern.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NoConvergence, SingularJacobian
from .geometry import TorusParams
from .operators import DiscreteOperator, PeriodicGrid, assemble_laplacian, validate_field
from .profiles import Nonlinearity

__all__ = [
    "SteadyState",
    "ContinuationResult",
    "residual",
    "newton_solve",
    "continuation",
    "symmetry_check",
]


@dataclass
class SteadyState:
    field: np.ndarray
    residual_norm: float
    params: TorusParams
    grid: PeriodicGrid
    newton_iters: int
    residual_history: list = field(default_factory=list)

    def quadratic_constants(self):
        """C_k = r_{k+1} / r_k^2 over the recorded Newton residuals."""
        r = self.residual_history
        return [r[k + 1] / r[k] ** 2 for k in range(len(r) - 1) if r[k] > 0.0]

    def sidecar(self) -> dict:
        return {
            "epsilon": self.params.epsilon,
            "residual_norm": self.residual_norm,
            "newton_iters": self.newton_iters,
        }


def residual(u: np.ndarray, op: DiscreteOperator, nl: Nonlinearity) -> np.ndarray:
    """Pointwise L u + f(u)."""
    return op.apply(u) + nl(u)


def newton_solve(initial: np.ndarray, op: DiscreteOperator, nl: Nonlinearity,
                 tol: float = 1e-10, max_iter: int = 25) -> SteadyState:
    """Newton iteration to residual max-norm below tol.

    Raises NoConvergence when max_iter updates were not enough (step too
    large, or the initial guess left the basin) and SingularJacobian when
    the linearization loses invertibility (stability margin at zero).
    """
    u = validate_field(initial, op.grid)
    history = []
    for iterations in range(max_iter + 1):
        res = residual(u, op, nl)
        rnorm = float(np.max(np.abs(res)))
        history.append(rnorm)
        if not np.isfinite(rnorm):
            raise NoConvergence(
                "residual became non-finite", iterations=iterations,
                residuals=history, epsilon=op.params.epsilon,
            )
        if rnorm < tol:
            return SteadyState(u, rnorm, op.params, op.grid, iterations, history)
        jac = (op.matrix + sp.diags(nl.deriv(u).ravel())).tocsc()
        try:
            lu = spla.splu(jac)
        except RuntimeError as exc:
            raise SingularJacobian(
                f"Jacobian factorization failed: {exc}", epsilon=op.params.epsilon
            ) from exc
        step = lu.solve(-res.ravel())
        if not np.all(np.isfinite(step)):
            raise SingularJacobian(
                "Jacobian solve produced non-finite update",
                epsilon=op.params.epsilon,
            )
        scale = 1.0 + float(np.max(np.abs(u)))
        if float(np.max(np.abs(step))) > 1e12 * scale:
            raise SingularJacobian(
                "Jacobian is numerically singular (unbounded Newton step)",
                epsilon=op.params.epsilon,
            )
        u = u + step.reshape(op.shape)
    raise NoConvergence(
        f"no convergence in {max_iter} Newton iterations "
        f"(last residual {history[-1]:.3e})",
        iterations=max_iter, residuals=history, epsilon=op.params.epsilon,
    )


@dataclass
class ContinuationResult:
    final: SteadyState
    branch: list  # SteadyState at each visited epsilon, base first


def continuation(base: SteadyState, nl: Nonlinearity, target_eps: float,
                 steps: int | None = None, tol: float = 1e-10,
                 max_iter: int = 25) -> ContinuationResult:
    """Chain Newton solves from the base state to the target ripple amplitude.

    Default step count divides the target into quarters.  Solver failures
    propagate with the failing epsilon attached.
    """
    if target_eps == base.params.epsilon:
        return ContinuationResult(base, [base])
    if steps is None:
        steps = 4
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    start = base.params.epsilon
    branch = [base]
    state = base
    for k in range(1, steps + 1):
        eps_k = start + (target_eps - start) * k / steps
        params_k = base.params.with_epsilon(eps_k)
        op_k = assemble_laplacian(params_k, base.grid)
        state = newton_solve(state.field, op_k, nl, tol=tol, max_iter=max_iter)
        branch.append(state)
    return ContinuationResult(state, branch)


def symmetry_check(state: SteadyState) -> dict:
    """Reflection defects across the x3 = 0 plane and the n vertical planes.

    The vertical planes pass through theta_k = (2k+1) pi / (2n); the grid
    divisibility invariant puts those lines on grid indices.
    """
    u = state.field
    grid = state.grid
    n = state.params.n_waves
    grid.check_waves(n)

    n_phi, n_theta = grid.n_phi, grid.n_theta
    i = np.arange(n_phi)
    x3_defect = float(np.max(np.abs(u - u[(-i) % n_phi, :])))

    j = np.arange(n_theta)
    theta_defects = []
    for k in range(n):
        jk = (2 * k + 1) * n_theta // (4 * n)
        reflected = (2 * jk - j) % n_theta
        theta_defects.append(float(np.max(np.abs(u - u[:, reflected]))))

    return {
        "x3_plane": x3_defect,
        "theta_planes": theta_defects,
        "max_defect": max([x3_defect] + theta_defects),
    }
