"""Locate, classify, and count critical points of a field on the torus.

Cells where both covariant gradient components straddle zero seed a
Newton refinement on the trigonometric interpolant of the field, which
is spectrally accurate for the smooth steady states produced here.  The
refined points are deduplicated, classified by the coordinate Hessian
(valid where the gradient vanishes, since the metric weights are
positive), and matched against the predicted set {0, pi} x {theta_k},
theta_k = (2k+1) pi / (2n).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import TorusParams, metric_at
from .operators import PeriodicGrid

__all__ = [
    "CriticalPoint",
    "CriticalPointReport",
    "expected_set",
    "locate_critical_points",
    "verify_count",
]

TWO_PI = 2.0 * np.pi


@dataclass
class CriticalPoint:
    phi: float
    theta: float
    kind: str  # "max" | "min" | "saddle" | "degenerate"
    grad_norm: float


@dataclass
class CriticalPointReport:
    points: list
    expected: list
    count: int
    max_match_distance: float
    grad_threshold: float
    grad_scale: float
    off_margin: float
    degenerate: bool = False
    notes: list = field(default_factory=list)

    def to_jsonable(self) -> dict:
        return {
            "count": self.count,
            "points": [
                {"phi": p.phi, "theta": p.theta, "kind": p.kind,
                 "grad_norm": p.grad_norm}
                for p in self.points
            ],
            "expected": [{"phi": e[0], "theta": e[1]} for e in self.expected],
            "max_match_distance": self.max_match_distance,
            "off_margin": self.off_margin,
            "degenerate": self.degenerate,
            "notes": self.notes,
        }


def expected_set(params: TorusParams):
    """The 4n predicted critical locations {0, pi} x {theta_k}."""
    n = params.n_waves
    thetas = [(2 * k + 1) * np.pi / (2 * n) for k in range(2 * n)]
    return [(p, t) for p in (0.0, np.pi) for t in thetas]


class _TrigInterpolant:
    """Evaluate a periodic grid field and derivatives at arbitrary points."""

    def __init__(self, values: np.ndarray, grid: PeriodicGrid):
        self.coeffs = np.fft.fft2(values) / (grid.n_phi * grid.n_theta)
        self.kp = np.fft.fftfreq(grid.n_phi, d=1.0 / grid.n_phi)
        self.kt = np.fft.fftfreq(grid.n_theta, d=1.0 / grid.n_theta)

    def eval(self, phi: float, theta: float, d_phi: int = 0, d_theta: int = 0) -> float:
        ep = np.exp(1j * self.kp * phi) * (1j * self.kp) ** d_phi
        et = np.exp(1j * self.kt * theta) * (1j * self.kt) ** d_theta
        return float(np.real(ep @ self.coeffs @ et))

    def jet(self, phi: float, theta: float):
        """Gradient and Hessian in one pass (theta matvecs are shared)."""
        et = np.exp(1j * self.kt * theta)
        col0 = self.coeffs @ et
        col1 = self.coeffs @ (et * (1j * self.kt))
        col2 = self.coeffs @ (et * (1j * self.kt) ** 2)
        ep = np.exp(1j * self.kp * phi)
        ep1 = ep * (1j * self.kp)
        ep2 = ep * (1j * self.kp) ** 2
        g = np.array([np.real(ep1 @ col0), np.real(ep @ col1)])
        hess = np.array([
            [np.real(ep2 @ col0), np.real(ep1 @ col1)],
            [np.real(ep1 @ col1), np.real(ep @ col2)],
        ])
        return g, hess

    def grad(self, phi: float, theta: float):
        return (self.eval(phi, theta, 1, 0), self.eval(phi, theta, 0, 1))


def _sign_change(a: np.ndarray, axis_pairs) -> np.ndarray:
    lo = a.copy()
    hi = a.copy()
    for shift, axis in axis_pairs:
        rolled = np.roll(a, shift, axis=axis)
        lo = np.minimum(lo, rolled)
        hi = np.maximum(hi, rolled)
    return (lo <= 0.0) & (hi >= 0.0)


def _grad_fields(u: np.ndarray, grid: PeriodicGrid):
    du_p = (np.roll(u, -1, axis=0) - np.roll(u, 1, axis=0)) / (2.0 * grid.h_phi)
    du_t = (np.roll(u, -1, axis=1) - np.roll(u, 1, axis=1)) / (2.0 * grid.h_theta)
    return du_p, du_t


def _metric_grad_norm(params, phi, theta, gp, gt) -> float:
    mp = metric_at(params, phi, theta)
    return float(np.sqrt(gp * gp / mp.g11 + gt * gt / mp.g22))


def locate_critical_points(u: np.ndarray, params: TorusParams, grid: PeriodicGrid,
                           threshold_rel: float = 1e-6,
                           max_points: int = 4096) -> CriticalPointReport:
    """Find all gradient zeros of the field at sub-cell resolution.

    threshold_rel scales the detection threshold off the sup of the
    field's own gradient norm; points whose refined gradient stays above
    it are discarded as discretization artifacts.
    """
    du_p, du_t = _grad_fields(u, grid)
    mp = metric_at(params, *grid.mesh())
    grad_norm_grid = np.sqrt(du_p ** 2 / mp.g11 + du_t ** 2 / mp.g22)
    grad_scale = float(np.max(grad_norm_grid))
    threshold = threshold_rel * grad_scale

    pairs = [(-1, 0), (-1, 1), (0, 1)]  # other three corners of cell (i, j)
    candidates = _sign_change(du_p, pairs) & _sign_change(du_t, pairs)
    idx_phi, idx_theta = np.nonzero(candidates)

    interp = _TrigInterpolant(u, grid)
    hess_scale = max(
        abs(interp.eval(0.0, 0.0, 2, 0)), abs(interp.eval(np.pi, 0.0, 2, 0)), 1e-30
    )
    h_cell = max(grid.h_phi, grid.h_theta)

    points: list[CriticalPoint] = []
    degenerate_seen = False
    notes: list[str] = []

    def near_existing(phi, theta, radius_cells):
        for q in points:
            if (_ang_dist(q.phi, phi) < radius_cells * grid.h_phi
                    and _ang_dist(q.theta, theta) < radius_cells * grid.h_theta):
                return True
        return False

    for i, j in zip(idx_phi, idx_theta):
        if len(points) >= max_points:
            notes.append(f"point cap {max_points} reached; census truncated")
            break
        phi = grid.phi[i] + 0.5 * grid.h_phi
        theta = grid.theta[j] + 0.5 * grid.h_theta
        # clusters of candidate cells around one zero refine to one point
        if near_existing(phi, theta, 1.5):
            continue
        ok = True
        for _ in range(12):
            g, hess = interp.jet(phi, theta)
            det = float(np.linalg.det(hess))
            if abs(det) < 1e-9 * hess_scale ** 2:
                degenerate_seen = True
                # whole curves of zeros: park on the lowest-gradient cell corner
                best_gn, best_loc = np.inf, None
                for i2 in (i % grid.n_phi, (i + 1) % grid.n_phi):
                    for j2 in (j % grid.n_theta, (j + 1) % grid.n_theta):
                        cphi, ctheta = grid.phi[i2], grid.theta[j2]
                        gn = _metric_grad_norm(params, cphi, ctheta,
                                               du_p[i2, j2], du_t[i2, j2])
                        if gn < best_gn:
                            best_gn, best_loc = gn, (cphi, ctheta)
                if best_gn <= threshold and not near_existing(*best_loc, 0.75):
                    points.append(CriticalPoint(float(best_loc[0] % TWO_PI),
                                                float(best_loc[1] % TWO_PI),
                                                "degenerate", float(best_gn)))
                ok = False
                break
            step = np.linalg.solve(hess, -g)
            if np.max(np.abs(step)) > 2.0 * h_cell:
                ok = False  # refinement left the cell: spurious candidate
                break
            phi += step[0]
            theta += step[1]
            if np.max(np.abs(step)) < 1e-13:
                break
        if not ok:
            continue
        g, hess = interp.jet(phi, theta)
        gn = _metric_grad_norm(params, phi, theta, g[0], g[1])
        if gn > threshold:
            continue
        if near_existing(phi, theta, 0.5):
            continue
        det = float(np.linalg.det(hess))
        if det < 0.0:
            kind = "saddle"
        elif np.trace(hess) > 0.0:
            kind = "min"
        else:
            kind = "max"
        points.append(CriticalPoint(float(phi % TWO_PI), float(theta % TWO_PI),
                                    kind, gn))

    expected = expected_set(params)
    max_match = _max_match_distance(points, expected, grid)
    off_margin = _off_set_margin(grad_norm_grid, expected, grid)
    return CriticalPointReport(
        points=points, expected=expected, count=len(points),
        max_match_distance=max_match, grad_threshold=threshold,
        grad_scale=grad_scale, off_margin=off_margin,
        degenerate=degenerate_seen, notes=notes,
    )


def _ang_dist(a: float, b: float) -> float:
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


def _max_match_distance(points, expected, grid) -> float:
    """Worst distance, in cell units, from an expected point to its nearest find."""
    if not points:
        return float("inf")
    worst = 0.0
    for ep, et in expected:
        best = min(
            max(_ang_dist(p.phi, ep) / grid.h_phi, _ang_dist(p.theta, et) / grid.h_theta)
            for p in points
        )
        worst = max(worst, best)
    return worst


def _off_set_margin(grad_norm_grid, expected, grid) -> float:
    """Smallest gradient norm among grid points more than 3 cells from the
    predicted set: a positive margin certifies no other critical points at
    grid resolution."""
    pp, tt = np.meshgrid(grid.phi, grid.theta, indexing="ij")
    near = np.zeros(grad_norm_grid.shape, dtype=bool)
    for ep, et in expected:
        dp = np.abs((pp - ep + np.pi) % TWO_PI - np.pi) / grid.h_phi
        dt = np.abs((tt - et + np.pi) % TWO_PI - np.pi) / grid.h_theta
        near |= (dp <= 3.0) & (dt <= 3.0)
    if np.all(near):
        return 0.0
    return float(np.min(grad_norm_grid[~near]))


def verify_count(report: CriticalPointReport, params: TorusParams,
                 match_cells: float = 2.0) -> dict:
    """Verdict on 'exactly 4n critical points at the predicted set'."""
    n = params.n_waves
    expected_count = 4 * n
    reasons = []
    if params.epsilon == 0.0:
        reasons.append("epsilon=0: critical set degenerates to two circles")
    if report.degenerate:
        reasons.append("degenerate Hessian encountered (critical circles)")
    if report.count != expected_count:
        reasons.append(f"count {report.count} != 4n = {expected_count}")
    if report.max_match_distance > match_cells:
        reasons.append(
            f"match distance {report.max_match_distance:.2f} cells "
            f"exceeds {match_cells}"
        )
    if not (report.off_margin > 0.0):
        reasons.append("off-set gradient margin not positive")
    return {
        "passed": not reasons,
        "count": report.count,
        "expected_count": expected_count,
        "max_match_distance": report.max_match_distance,
        "off_margin": report.off_margin,
        "reasons": reasons,
    }
