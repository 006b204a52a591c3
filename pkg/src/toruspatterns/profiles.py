"""Monotone generatrix profiles and the reaction term forged from them.

The profile U(phi) on [0, pi] is a normalized weighted integral,

    U(phi) = height * int_0^phi w(s) ds / int_0^pi w(s) ds,
    w(s)   = sin(s) * exp(-steepness * (cos s - cos phi0)^2),

which vanishes at 0, reaches `height` at pi, is strictly increasing in
between, and has a transition layer near phi0.  Because w and its first
two derivatives have closed forms, U', U'' and U''' are analytic; only
U itself needs one accurate cumulative quadrature.  The reaction term f
is then defined along the profile so that U is an exact stationary state
of the diffusion-reaction balance on the standard torus, and is stored
as a C^1 cubic Hermite table in s = U(phi) with analytic slopes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .errors import NonMonotonicProfile
from .geometry import TorusParams

__all__ = [
    "ProfileConfig",
    "Profile",
    "PeriodicPattern",
    "Nonlinearity",
    "ThresholdResult",
    "build_profile",
    "extend_symmetric",
    "forge_nonlinearity",
    "threshold_waves",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ProfileConfig:
    phi0: float
    steepness: float
    height: float = 1.0
    samples: int = 4001


def _weight(phi, phi0, k):
    phi = np.asarray(phi, dtype=float)
    return np.sin(phi) * np.exp(-k * (np.cos(phi) - np.cos(phi0)) ** 2)


def _weight_d1(phi, phi0, k):
    phi = np.asarray(phi, dtype=float)
    e = np.exp(-k * (np.cos(phi) - np.cos(phi0)) ** 2)
    m = 2.0 * k * np.sin(phi) * (np.cos(phi) - np.cos(phi0))
    return e * (np.cos(phi) + m * np.sin(phi))


def _weight_d2(phi, phi0, k):
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    e = np.exp(-k * (c - np.cos(phi0)) ** 2)
    m = 2.0 * k * s * (c - np.cos(phi0))
    mp = 2.0 * k * (c * (c - np.cos(phi0)) - s * s)
    return e * (2.0 * m * c + (m * m + mp - 1.0) * s)


def _cumulative_gauss(func, x, order=8):
    """Cumulative integral of func from x[0] along sorted nodes x.

    Composite Gauss-Legendre per interval; for smooth integrands the
    result is accurate to rounding at the sample spacings used here.
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)
    a, b = x[:-1], x[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    seg = (func(pts) @ weights) * half
    out = np.empty_like(x)
    out[0] = 0.0
    np.cumsum(seg, out=out[1:])
    return out


class Profile:
    """Strictly increasing pattern generatrix on [0, pi].

    Carries a dense sample table (phi_i, U_i, U'_i, U''_i) plus analytic
    derivative evaluation; `value` interpolates U off-sample with a cubic
    spline of the table.
    """

    def __init__(self, config: ProfileConfig, phi: np.ndarray, u: np.ndarray,
                 normalizer: float):
        self.config = config
        self.phi = phi
        self.u = u
        self.normalizer = normalizer  # int_0^pi w
        self.du = self.deriv(phi)
        # sin(pi) rounds to ~1e-16; the endpoint slopes are analytically zero
        self.du[0] = 0.0
        self.du[-1] = 0.0
        self.d2u = self.deriv2(phi)
        self._spline = CubicSpline(phi, u, bc_type=((1, 0.0), (1, 0.0)))

    @property
    def height(self) -> float:
        return self.config.height

    def value(self, phi):
        return self._spline(np.asarray(phi, dtype=float))

    def deriv(self, phi):
        cfg = self.config
        return cfg.height * _weight(phi, cfg.phi0, cfg.steepness) / self.normalizer

    def deriv2(self, phi):
        cfg = self.config
        return cfg.height * _weight_d1(phi, cfg.phi0, cfg.steepness) / self.normalizer

    def deriv3(self, phi):
        cfg = self.config
        return cfg.height * _weight_d2(phi, cfg.phi0, cfg.steepness) / self.normalizer

    def to_json(self) -> str:
        doc = {
            "format": "toruspatterns.profile",
            "version": 1,
            "phi0": self.config.phi0,
            "steepness": self.config.steepness,
            "height": self.config.height,
            "samples": int(self.config.samples),
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str, params: TorusParams) -> "Profile":
        doc = json.loads(text)
        if doc.get("format") != "toruspatterns.profile":
            raise ValueError("not a profile document")
        cfg = ProfileConfig(
            phi0=doc["phi0"], steepness=doc["steepness"],
            height=doc["height"], samples=doc["samples"],
        )
        return build_profile(cfg, params)


def build_profile(config: ProfileConfig, params: TorusParams) -> Profile:
    """Construct the monotone profile; rejects layer positions where the
    stability indicator fails (cos phi0 >= -r/R) and non-positive shape knobs."""
    cfg = config
    if not (0.0 < cfg.phi0 < np.pi):
        raise ValueError(f"phi0 must lie in (0, pi), got {cfg.phi0}")
    if np.cos(cfg.phi0) >= -params.r / params.R:
        raise ValueError(
            "stas violated: need cos(phi0) < -r/R "
            f"(cos(phi0)={np.cos(cfg.phi0):.6g}, -r/R={-params.r / params.R:.6g})"
        )
    if cfg.steepness <= 0.0:
        raise ValueError(f"steepness must be positive, got {cfg.steepness}")
    if cfg.height <= 0.0:
        raise ValueError(f"height must be positive, got {cfg.height}")
    if cfg.samples < 3:
        raise ValueError(f"need at least 3 samples, got {cfg.samples}")

    phi = np.linspace(0.0, np.pi, cfg.samples)
    w = lambda x: _weight(x, cfg.phi0, cfg.steepness)
    raw = _cumulative_gauss(w, phi)
    total = raw[-1]
    u = cfg.height * raw / total
    u[0] = 0.0
    u[-1] = cfg.height
    return Profile(cfg, phi, u, total)


class PeriodicPattern:
    """Even, 2*pi-periodic extension of a profile to the whole torus.

    Minimum circle at phi = 0, maximum circle at phi = pi; the reflection
    makes U' vanish from both sides on each circle.
    """

    def __init__(self, profile: Profile):
        self.profile = profile

    @staticmethod
    def _fold(phi):
        x = np.mod(np.asarray(phi, dtype=float), TWO_PI)
        over = x > np.pi
        folded = np.where(over, TWO_PI - x, x)
        sign = np.where(over, -1.0, 1.0)
        return folded, sign

    def value(self, phi):
        folded, _ = self._fold(phi)
        return self.profile.value(folded)

    def deriv(self, phi):
        folded, sign = self._fold(phi)
        return sign * self.profile.deriv(folded)

    def deriv2(self, phi):
        folded, _ = self._fold(phi)
        return self.profile.deriv2(folded)

    @property
    def height(self) -> float:
        return self.profile.height

    def sample_field(self, grid) -> np.ndarray:
        """Theta-independent field of profile values on a periodic grid."""
        col = self.value(grid.phi)
        return np.repeat(col[:, None], grid.n_theta, axis=1)


def extend_symmetric(profile: Profile) -> PeriodicPattern:
    return PeriodicPattern(profile)


class Nonlinearity:
    """C^1 reaction term tabulated over s in [0, height], linear outside.

    Values and slopes at the knots are analytic, so the table is exact at
    knots; a cubic Hermite interpolant fills in between and the linear
    extension keeps f' bounded by the tabulated maximum.
    """

    def __init__(self, knots_s: np.ndarray, knots_f: np.ndarray,
                 knots_fp: np.ndarray):
        ds = np.diff(knots_s)
        if np.any(ds <= 0.0):
            raise NonMonotonicProfile(
                "profile values are not strictly increasing; "
                "nonlinearity table would not be invertible"
            )
        self.knots_s = knots_s
        self.knots_f = knots_f
        self.knots_fp = knots_fp
        self._spline = CubicHermiteSpline(knots_s, knots_f, knots_fp)
        self._dspline = self._spline.derivative()
        self._ispline = self._spline.antiderivative()
        self.s_lo = knots_s[0]
        self.s_hi = knots_s[-1]
        self.max_abs_fprime = float(np.max(np.abs(knots_fp)))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        sc = np.clip(s, self.s_lo, self.s_hi)
        slope = np.where(s < self.s_lo, self.knots_fp[0], self.knots_fp[-1])
        return self._spline(sc) + (s - sc) * slope

    def deriv(self, s):
        s = np.asarray(s, dtype=float)
        sc = np.clip(s, self.s_lo, self.s_hi)
        return self._dspline(sc)

    def antideriv(self, s):
        """F(s) = int_{s_lo}^s f; quadratic continuation outside the table."""
        s = np.asarray(s, dtype=float)
        sc = np.clip(s, self.s_lo, self.s_hi)
        d = s - sc
        slope = np.where(s < self.s_lo, self.knots_fp[0], self.knots_fp[-1])
        return self._ispline(sc) + self._spline(sc) * d + 0.5 * slope * d * d

    def to_csv(self) -> str:
        lines = ["s,f,fprime"]
        for s, f, fp in zip(self.knots_s, self.knots_f, self.knots_fp):
            lines.append(f"{s:.17g},{f:.17g},{fp:.17g}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "format": "toruspatterns.nonlinearity",
            "version": 1,
            "knots": {
                "s": self.knots_s.tolist(),
                "f": self.knots_f.tolist(),
                "fprime": self.knots_fp.tolist(),
            },
            "extension_rule": "linear-c1",
            "max_abs_fprime": self.max_abs_fprime,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Nonlinearity":
        doc = json.loads(text)
        if doc.get("format") != "toruspatterns.nonlinearity":
            raise ValueError("not a nonlinearity document")
        k = doc["knots"]
        return cls(np.asarray(k["s"]), np.asarray(k["f"]), np.asarray(k["fprime"]))


def forge_nonlinearity(profile: Profile, params: TorusParams) -> Nonlinearity:
    """Define f so the profile balances diffusion exactly on the standard torus.

    f(U(phi)) = -U''(phi)/r^2 + sin(phi)/(r (R + r cos phi)) * U'(phi),
    with df/ds computed analytically at every knot (chain rule inside,
    closed-form limits at the endpoints where U' vanishes).
    """
    if params.epsilon != 0.0:
        raise ValueError("nonlinearity is forged on the standard torus (epsilon=0)")
    R, r = params.R, params.r
    cfg = profile.config
    phi = profile.phi
    du, d2u = profile.du, profile.d2u
    d3u = profile.deriv3(phi)

    p = R + r * np.cos(phi)
    c = np.sin(phi) / (r * p)
    cp = (R * np.cos(phi) + r) / (r * p * p)

    s = profile.u
    f = -d2u / (r * r) + c * du

    fp = np.empty_like(f)
    inner = slice(1, -1)
    fp[inner] = (-d3u[inner] / (r * r) + cp[inner] * du[inner]
                 + c[inner] * d2u[inner]) / du[inner]
    # endpoint limits of df/ds (both f' and s' vanish linearly there)
    k, phi0 = cfg.steepness, cfg.phi0
    mu = 2.0 * k * (1.0 - np.cos(phi0))
    nu = 2.0 * k * (1.0 + np.cos(phi0))
    fp[0] = -(3.0 * mu - 1.0) / (r * r) + 2.0 / (r * (R + r))
    fp[-1] = -(3.0 * nu - 1.0) / (r * r) - 2.0 / (r * (R - r))
    return Nonlinearity(s, f, fp)


@dataclass(frozen=True)
class ThresholdResult:
    n_min: int
    bound: float


def threshold_waves(nl: Nonlinearity, params: TorusParams) -> ThresholdResult:
    """Smallest wave count N with N^2 > max|f'| * (R + r)^2."""
    target = nl.max_abs_fprime * (params.R + params.r) ** 2
    n = max(1, int(np.floor(np.sqrt(target))) + 1)
    while n * n <= target:
        n += 1
    while n > 1 and (n - 1) * (n - 1) > target:
        n -= 1
    return ThresholdResult(n_min=n, bound=float(np.sqrt(target)))
