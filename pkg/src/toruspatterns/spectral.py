"""Principal eigenpair of the linearized stability operator.

The stability operator is -(L + f'(U)) in the surface inner product; a
positive smallest eigenvalue certifies the pattern.  The flux-form
discretization is self-adjoint under the area weights, so the problem is
symmetrized exactly by the diagonal square-root scaling and solved by
shifted inverse iteration.  On the standard torus the problem reduces to
one variable, which provides both the shift estimate and an independent
cross-check of the 2-D eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NotConverged, NonPositiveEigenfield, ZeroField
from .geometry import TorusParams
from .operators import (
    PeriodicGrid,
    DiscreteOperator,
    dirichlet_form,
    quadrature,
    weighted_inner_product,
)
from .profiles import Nonlinearity, PeriodicPattern
from .steady import SteadyState, continuation

__all__ = [
    "SpectralResult",
    "SturmLiouvilleResult",
    "principal_eigpair",
    "rayleigh_quotient",
    "sl_reduction_eigpair",
    "half_torus_normalization_check",
    "ConvergenceStudy",
    "convergence_study",
]

TWO_PI = 2.0 * np.pi


@dataclass
class SpectralResult:
    lambda1: float
    eigenfield: np.ndarray
    residual: float
    normalization: float
    iterations: int = 0

    def sidecar(self) -> dict:
        return {"lambda1": self.lambda1, "residual": self.residual}


def _stability_matrix(op: DiscreteOperator, nl: Nonlinearity,
                      u: np.ndarray) -> sp.csr_matrix:
    """A = -(L + diag(f'(u))); self-adjoint in the weighted inner product."""
    return (-(op.matrix + sp.diags(nl.deriv(u).ravel()))).tocsr()


def principal_eigpair(steady: SteadyState, op: DiscreteOperator, nl: Nonlinearity,
                      tol: float = 1e-10, max_iter: int = 600,
                      lambda_est: float | None = None) -> SpectralResult:
    """Smallest eigenvalue and positive normalized eigenfield.

    Shifted inverse iteration on the symmetrized matrix, shift one unit
    below the estimate (from the 1-D reduction by default); the shift is
    re-anchored at the running Rayleigh quotient every 25 sweeps if
    convergence is slow.  Restarts once from the positive constant field
    if the iterate converges to a sign-changing mode.
    """
    grid, params = op.grid, op.params
    if lambda_est is None:
        pattern_vals = steady.field[:, 0]
        lambda_est = _lambda_estimate_1d(pattern_vals, nl, params, grid)

    a = _stability_matrix(op, nl, steady.field)
    sqrt_w = np.sqrt(op.weights.ravel())
    sym = sp.diags(sqrt_w) @ a @ sp.diags(1.0 / sqrt_w)
    sym = (0.5 * (sym + sym.T)).tocsc()
    size = sym.shape[0]

    def run(y0: np.ndarray):
        y = y0 / np.linalg.norm(y0)
        shift = lambda_est - 1.0
        lu = _factor_shift(sym, shift, size)
        lam = None
        total = 0
        for sweep in range(max_iter // 25 + 1):
            for _ in range(25):
                y = lu.solve(y)
                y /= np.linalg.norm(y)
                total += 1
                ay = sym @ y
                lam = float(y @ ay)
                res = float(np.linalg.norm(ay - lam * y))
                if res <= tol:
                    return lam, y, res, total
                if total >= max_iter:
                    break
            if total >= max_iter:
                break
            shift = lam - max(10.0 * res, 1e-9)
            lu = _factor_shift(sym, shift, size)
        raise NotConverged(
            f"eigen-iteration residual {res:.3e} above tol after {total} solves",
            tol=tol, iterations=total,
        )

    start = sqrt_w.copy()
    lam, y, res, iters = run(start)
    x = (y / sqrt_w).reshape(grid.n_phi, grid.n_theta)
    if quadrature(x, params, grid) < 0:
        x = -x
    if np.min(x) <= 0.0:
        lam, y, res, iters = run(np.abs(y) + sqrt_w)
        x = (y / sqrt_w).reshape(grid.n_phi, grid.n_theta)
        if quadrature(x, params, grid) < 0:
            x = -x
        if np.min(x) <= 0.0:
            raise NonPositiveEigenfield(
                "iteration returned a sign-changing eigenfield twice; "
                "the converged mode is not principal"
            )
    norm = weighted_inner_product(x, x, params, grid)
    x = x / np.sqrt(norm)
    normalization = weighted_inner_product(x, x, params, grid)
    # res is the 2-norm residual of the unit symmetrized iterate, which equals
    # the surface-L2 residual of the unit-normalized eigenfield.
    return SpectralResult(
        lambda1=lam, eigenfield=x, residual=res,
        normalization=normalization, iterations=iters,
    )


def _factor_shift(sym: sp.csc_matrix, shift: float, size: int):
    try:
        return spla.splu(sym - shift * sp.identity(size, format="csc"))
    except RuntimeError:
        return spla.splu(sym - (shift - 1e-8) * sp.identity(size, format="csc"))


def rayleigh_quotient(phi_field: np.ndarray, steady: SteadyState,
                      params: TorusParams, grid: PeriodicGrid,
                      nl: Nonlinearity) -> float:
    """(int |grad phi|^2 - f'(U) phi^2) / int phi^2 over the surface.

    The gradient integral uses the staggered half-index form, which
    matches the assembled operator identically, so the quotient is an
    upper bound for the discrete smallest eigenvalue up to rounding.
    """
    denom = weighted_inner_product(phi_field, phi_field, params, grid)
    if denom == 0.0 or not np.any(phi_field):
        raise ZeroField("Rayleigh quotient of the zero field")
    num = dirichlet_form(phi_field, params, grid) - quadrature(
        nl.deriv(steady.field) * phi_field * phi_field, params, grid
    )
    return num / denom


@dataclass
class SturmLiouvilleResult:
    lambda1: float
    eigenprofile: np.ndarray
    phi: np.ndarray
    params: TorusParams


def _assemble_1d(u_vals: np.ndarray, nl: Nonlinearity, params: TorusParams,
                 n_points: int):
    """Symmetrized 1-D reduction of the stability operator at epsilon = 0."""
    R, r = params.R, params.r
    h = TWO_PI / n_points
    phi = np.arange(n_points) * h
    w1 = r * (R + r * np.cos(phi))
    a_half = (R + r * np.cos(phi + 0.5 * h)) / r   # at i+1/2

    main = (a_half + np.roll(a_half, 1)) / (w1 * h * h) - nl.deriv(u_vals)
    upper = -a_half / (w1 * h * h)

    sqrt_w = np.sqrt(w1)
    # symmetrize: S = D (-L - f') D^{-1}, D = diag(sqrt_w)
    mat = np.zeros((n_points, n_points))
    idx = np.arange(n_points)
    mat[idx, idx] = main
    scale_up = sqrt_w / np.roll(sqrt_w, -1)
    mat[idx, (idx + 1) % n_points] = upper * scale_up
    mat[(idx + 1) % n_points, idx] = upper * scale_up
    return mat, phi, w1, sqrt_w


def sl_reduction_eigpair(pattern_vals: np.ndarray, nl: Nonlinearity,
                         params: TorusParams,
                         n_points: int | None = None) -> SturmLiouvilleResult:
    """Principal eigenpair of the single-variable reduction on the standard torus.

    `pattern_vals` are the stationary profile values on the uniform
    periodic phi-grid of size n_points (supplied directly, or resampled
    from a PeriodicPattern when one is given).
    """
    if params.epsilon != 0.0:
        raise ValueError("1-D reduction requires the standard torus (epsilon=0)")
    if isinstance(pattern_vals, PeriodicPattern):
        if n_points is None:
            n_points = 1024
        h = TWO_PI / n_points
        pattern_vals = pattern_vals.value(np.arange(n_points) * h)
    else:
        pattern_vals = np.asarray(pattern_vals, dtype=float)
        if n_points is None:
            n_points = pattern_vals.size
        if pattern_vals.size != n_points:
            raise ValueError("pattern_vals size does not match n_points")

    mat, phi, w1, sqrt_w = _assemble_1d(pattern_vals, nl, params, n_points)
    vals, vecs = scipy.linalg.eigh(mat, subset_by_index=[0, 0])
    lam = float(vals[0])
    x = vecs[:, 0] / sqrt_w
    if np.sum(x * w1) < 0:
        x = -x
    if np.min(x) <= 0.0:
        raise NonPositiveEigenfield("1-D principal eigenprofile is not positive")
    h = TWO_PI / n_points
    norm = TWO_PI * float(np.sum(x * x * w1) * h)
    x = x / np.sqrt(norm)
    return SturmLiouvilleResult(lambda1=lam, eigenprofile=x, phi=phi, params=params)


def _lambda_estimate_1d(pattern_vals, nl, params, grid) -> float:
    base = params.with_epsilon(0.0)
    return sl_reduction_eigpair(pattern_vals, nl, base,
                                n_points=pattern_vals.size).lambda1


def half_torus_normalization_check(eigenprofile: np.ndarray, params: TorusParams,
                                   tol: float = 1e-8) -> dict:
    """Check that sqrt(2) times the restriction to [0, pi] has unit norm.

    Expects a full-torus-normalized profile on the uniform periodic grid;
    the two half integrals of a symmetric profile are each 1/2.
    """
    x = np.asarray(eigenprofile, dtype=float)
    n = x.size
    if n % 2 != 0:
        raise ValueError("eigenprofile length must be even")
    h = TWO_PI / n
    phi = np.arange(n) * h
    w1 = params.r * (params.R + params.r * np.cos(phi))
    g = x * x * w1
    m = n // 2
    low = TWO_PI * h * (0.5 * g[0] + np.sum(g[1:m]) + 0.5 * g[m])
    total = TWO_PI * h * np.sum(g)
    high = total - low
    defect = abs(2.0 * low - 1.0)
    return {
        "half_integral_low": float(low),
        "half_integral_high": float(high),
        "scaled_unit_defect": float(defect),
        "passed": bool(defect < tol),
    }


@dataclass
class ConvergenceStudy:
    rows: list
    fitted_order: float
    monotone: bool


def convergence_study(eps_list, base: SteadyState, nl: Nonlinearity,
                      lambda1_base: float, newton_tol: float = 1e-10,
                      eigen_tol: float = 1e-10,
                      branch_states: dict | None = None) -> ConvergenceStudy:
    """Eigenvalue gap |lambda1(eps) - lambda1(0)| along the ripple branch.

    Returns one row per epsilon plus the fitted decay order in eps; a
    non-monotone gap sequence is flagged in the result, not an error.
    """
    from .operators import assemble_laplacian

    rows = [{"epsilon": 0.0, "lambda1": lambda1_base, "gap": 0.0, "sup_diff": 0.0}]
    lam_prev = lambda1_base
    for eps in eps_list:
        if branch_states is not None and eps in branch_states:
            state = branch_states[eps]
        else:
            state = continuation(base, nl, eps, tol=newton_tol).final
        op_eps = assemble_laplacian(state.params, state.grid)
        spec = principal_eigpair(state, op_eps, nl, tol=eigen_tol,
                                 lambda_est=lam_prev)
        lam_prev = spec.lambda1
        rows.append({
            "epsilon": eps,
            "lambda1": spec.lambda1,
            "gap": abs(spec.lambda1 - lambda1_base),
            "sup_diff": float(np.max(np.abs(state.field - base.field))),
        })

    gaps = [(row["epsilon"], row["gap"]) for row in rows if row["epsilon"] > 0.0
            and row["gap"] > 0.0]
    if len(gaps) >= 2:
        le = np.log([g[0] for g in gaps])
        lg = np.log([g[1] for g in gaps])
        fitted = float(np.polyfit(le, lg, 1)[0])
    else:
        fitted = float("nan")
    ordered = sorted((row["epsilon"], row["gap"]) for row in rows)
    gap_seq = [g for _, g in ordered]
    monotone = all(gap_seq[i] <= gap_seq[i + 1] for i in range(len(gap_seq) - 1))
    return ConvergenceStudy(rows=rows, fitted_order=fitted, monotone=monotone)
