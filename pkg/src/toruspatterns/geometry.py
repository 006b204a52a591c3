"""Closed-form metric quantities for standard and rippled tori.

Surfaces are parameterized by two angles (phi, theta) on S^1 x S^1.  The
tube radius is the periodic function r_eps(theta) = r + epsilon*sin(n*theta);
epsilon = 0 recovers the standard torus of revolution with radii (R, r).
All derivatives used downstream (tube radius, area density, operator
coefficients) are coded analytically so that no finite-difference noise
enters the operator assembly or its tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "TorusParams",
    "MetricPoint",
    "SurfaceProfile",
    "torus_generatrix",
    "metric_at",
    "laplace_coefficients",
    "gradient_norm_sq",
    "stas_indicator",
]


@dataclass(frozen=True)
class TorusParams:
    """Major radius R, tube radius r, ripple amplitude epsilon, wave count n_waves."""

    R: float
    r: float
    epsilon: float = 0.0
    n_waves: int = 1

    def __post_init__(self) -> None:
        if self.r <= 0.0:
            raise ValueError(f"tube radius must be positive, got r={self.r}")
        n = self.n_waves
        if n < 1 or int(n) != n:
            raise ValueError(f"n_waves must be a positive integer, got {n!r}")
        if self.R <= self.r + abs(self.epsilon):
            raise ValueError(
                "embedding condition R > r + |epsilon| violated: "
                f"R={self.R}, r={self.r}, epsilon={self.epsilon}"
            )
        if abs(self.epsilon) >= self.r:
            raise ValueError(
                "tube radius r + epsilon*sin must stay positive: "
                f"need |epsilon| < r, got epsilon={self.epsilon}, r={self.r}"
            )

    def with_epsilon(self, epsilon: float) -> "TorusParams":
        """Same torus family at a different ripple amplitude."""
        return TorusParams(self.R, self.r, epsilon, self.n_waves)

    def tube_radius(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.r + self.epsilon * np.sin(self.n_waves * theta)

    def tube_radius_d1(self, theta):
        theta = np.asarray(theta, dtype=float)
        n = self.n_waves
        return self.epsilon * n * np.cos(n * theta)

    def tube_radius_d2(self, theta):
        theta = np.asarray(theta, dtype=float)
        n = self.n_waves
        return -self.epsilon * n * n * np.sin(n * theta)


@dataclass(frozen=True)
class MetricPoint:
    """Metric data at one or more (phi, theta) points.

    g11, g22 are the diagonal metric coefficients, sqrt_det the area
    density, Phi the combined theta-stretch sqrt((R + r_eps cos phi)^2
    + r_eps'^2), r_eps and dr_eps the tube radius and its derivative.
    """

    g11: np.ndarray
    g22: np.ndarray
    sqrt_det: np.ndarray
    Phi: np.ndarray
    r_eps: np.ndarray
    dr_eps: np.ndarray


def metric_at(params: TorusParams, phi, theta) -> MetricPoint:
    """Evaluate all metric quantities from closed forms (broadcasts)."""
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    re = params.tube_radius(theta)
    dre = params.tube_radius_d1(theta)
    p = params.R + re * np.cos(phi)
    Phi = np.hypot(p, dre)
    re, dre, Phi = np.broadcast_arrays(re, dre, Phi)
    return MetricPoint(
        g11=re * re,
        g22=Phi * Phi,
        sqrt_det=re * Phi,
        Phi=Phi,
        r_eps=re,
        dr_eps=dre,
    )


def laplace_coefficients(params: TorusParams, phi, theta):
    """Coefficients (c_pp, c_tt, c_p, c_t) of u_pp, u_tt, u_p, u_t in the
    Laplace-Beltrami operator, all from closed-form derivatives of the metric."""
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    re = params.tube_radius(theta)
    dre = params.tube_radius_d1(theta)
    d2re = params.tube_radius_d2(theta)
    p = params.R + re * np.cos(phi)
    Phi = np.hypot(p, dre)
    # dPhi/dphi and dPhi/dtheta, analytically
    Phi_p = -p * re * np.sin(phi) / Phi
    Phi_t = (p * (dre * np.cos(phi)) + dre * d2re) / Phi
    c_pp = 1.0 / (re * re)
    c_tt = 1.0 / (Phi * Phi)
    c_p = Phi_p / (re * re * Phi)
    c_t = (dre * Phi - re * Phi_t) / (re * Phi ** 3)
    c_pp, c_tt, c_p, c_t = np.broadcast_arrays(c_pp, c_tt, c_p, c_t)
    return c_pp, c_tt, c_p, c_t


def gradient_norm_sq(u_phi, u_theta, mp: MetricPoint):
    """Squared Riemannian gradient norm from partials: u_phi^2/r_eps^2 + u_theta^2/Phi^2."""
    u_phi = np.asarray(u_phi, dtype=float)
    u_theta = np.asarray(u_theta, dtype=float)
    return u_phi * u_phi / mp.g11 + u_theta * u_theta / mp.g22


def stas_indicator(params: TorusParams, phi):
    """Layer-placement indicator -(r + R cos phi)/(r (R + r cos phi)^2).

    Positive exactly where cos phi < -r/R; a profile transition layer must
    sit where this is positive for the constructed pattern to be stable.
    """
    phi = np.asarray(phi, dtype=float)
    R, r = params.R, params.r
    p = R + r * np.cos(phi)
    return -(r + R * np.cos(phi)) / (r * p * p)


@dataclass(frozen=True)
class SurfaceProfile:
    """Arc-length generatrix (psi, chi) of a surface of revolution on [0, L].

    Extension point for general surfaces of revolution; only the torus
    instantiation below is exercised.
    """

    psi: Callable[[np.ndarray], np.ndarray]
    chi: Callable[[np.ndarray], np.ndarray]
    length: float


def torus_generatrix(params: TorusParams) -> SurfaceProfile:
    """Generatrix of the upper half of the standard torus: rho = r*phi in [0, r*pi]."""
    R, r = params.R, params.r
    return SurfaceProfile(
        psi=lambda rho: R + r * np.cos(np.asarray(rho, dtype=float) / r),
        chi=lambda rho: r * np.sin(np.asarray(rho, dtype=float) / r),
        length=np.pi * r,
    )
