import numpy as np
import pytest

from toruspatterns.census import (CriticalPoint, expected_set,
                                  locate_critical_points, verify_count)
from toruspatterns.geometry import TorusParams
from toruspatterns.operators import PeriodicGrid


def test_expected_set_counts():
    p15 = TorusParams(R=5.0, r=1.0, epsilon=0.2, n_waves=15)
    assert len(expected_set(p15)) == 60

    p1 = TorusParams(R=5.0, r=1.0, n_waves=1)
    pts = expected_set(p1)
    assert len(pts) == 4
    assert sorted(set(t for _, t in pts)) == pytest.approx([np.pi / 2,
                                                            3 * np.pi / 2])

    p2 = TorusParams(R=5.0, r=1.0, n_waves=2)
    thetas = sorted(set(t for _, t in expected_set(p2)))
    assert thetas == pytest.approx([np.pi / 4, 3 * np.pi / 4,
                                    5 * np.pi / 4, 7 * np.pi / 4])


def test_synthetic_field_with_known_zeros(params5):
    """sin(phi)*cos(theta) has 8 isolated critical points at analytic spots."""
    grid = PeriodicGrid(64, 64)
    phi, theta = grid.mesh()
    u = np.sin(phi) * np.cos(theta)
    rep = locate_critical_points(u, params5, grid)
    assert rep.count == 8
    expected = {(np.pi / 2, 0.0), (np.pi / 2, np.pi),
                (3 * np.pi / 2, 0.0), (3 * np.pi / 2, np.pi),
                (0.0, np.pi / 2), (np.pi, np.pi / 2),
                (0.0, 3 * np.pi / 2), (np.pi, 3 * np.pi / 2)}
    def ang(a, b):
        d = abs(a - b) % (2 * np.pi)
        return min(d, 2 * np.pi - d)

    for p in rep.points:
        best = min(max(ang(p.phi, ep), ang(p.theta, et))
                   for ep, et in expected)
        assert best < 1e-8
        assert p.grad_norm <= rep.grad_threshold
    kinds = sorted(p.kind for p in rep.points)
    assert kinds.count("max") == 2 and kinds.count("min") == 2
    assert kinds.count("saddle") == 4


def test_cos_phi_degenerate_circles(params5):
    grid = PeriodicGrid(32, 32)
    u = np.cos(grid.phi)[:, None] * np.ones(32)[None, :]
    rep = locate_critical_points(u, params5, grid)
    assert rep.degenerate
    rows = sorted(set(round(p.phi, 8) for p in rep.points))
    assert rows == pytest.approx([0.0, np.pi])
    assert all(p.kind == "degenerate" for p in rep.points)


def test_eps0_pattern_degenerate_and_verdict(setup_small):
    s = setup_small
    rep = locate_critical_points(s.base.field, s.params, s.grid)
    assert rep.degenerate
    verdict = verify_count(rep, s.params)
    assert not verdict["passed"]
    assert any("degenerate" in r for r in verdict["reasons"])
    assert any("epsilon=0" in r for r in verdict["reasons"])


def test_verify_count_flags_extra_point(params5):
    grid = PeriodicGrid(64, 64)
    params = TorusParams(R=5.0, r=1.0, epsilon=0.05, n_waves=1)
    phi, theta = grid.mesh()
    # a clean 4-point field aligned with the predicted set for n = 1
    u = 0.1 * np.cos(phi) * np.ones_like(theta) + 0.01 * np.sin(theta)
    rep = locate_critical_points(u, params, grid)
    ver = verify_count(rep, params)
    assert ver["expected_count"] == 4
    if ver["passed"]:
        rep.points.append(CriticalPoint(1.0, 1.0, "min", 0.0))
        rep.count += 1
        ver2 = verify_count(rep, params)
        assert not ver2["passed"]
        assert any("count" in r for r in ver2["reasons"])


def test_verify_count_rejects_missing_margin(setup_small):
    s = setup_small
    rep = locate_critical_points(s.base.field, s.params, s.grid)
    rep.off_margin = 0.0
    ver = verify_count(rep, s.params)
    assert any("margin" in r for r in ver["reasons"])
