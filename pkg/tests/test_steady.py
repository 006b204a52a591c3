import numpy as np
import pytest
from scipy.optimize import brentq

from toruspatterns.errors import NoConvergence
from toruspatterns.geometry import TorusParams
from toruspatterns.operators import assemble_laplacian
from toruspatterns.steady import (continuation, newton_solve, residual,
                                  symmetry_check)


def test_residual_at_sampled_pattern(setup_small):
    s = setup_small
    res = residual(s.pattern.sample_field(s.grid), s.op, s.nl)
    # discrete truncation O(h^2); the solved state is far tighter
    assert np.max(np.abs(res)) < 0.1
    assert s.base.residual_norm < 1e-10


def test_residual_constant_root(setup_small):
    s = setup_small
    c = brentq(lambda x: float(s.nl(x)), 1e-9, s.profile.height - 1e-9)
    u = np.full(s.op.shape, c)
    assert np.max(np.abs(residual(u, s.op, s.nl))) < 1e-10


def test_residual_constant_nonroot(setup_small):
    s = setup_small
    c = 0.5 * s.profile.height
    fval = float(s.nl(c))
    assume_nonzero = abs(fval) > 1e-6
    assert assume_nonzero
    res = residual(np.full(s.op.shape, c), s.op, s.nl)
    assert np.allclose(res, fval, atol=1e-10)


def test_newton_converges_quickly_from_pattern(setup_small):
    s = setup_small
    state = newton_solve(s.pattern.sample_field(s.grid), s.op, s.nl, tol=1e-10)
    assert state.newton_iters <= 6
    assert state.residual_norm < 1e-10
    consts = state.quadratic_constants()
    assert consts and all(np.isfinite(consts))


def test_newton_out_of_basin_is_never_silent(setup_small):
    s = setup_small
    rng = np.random.default_rng(5)
    initial = s.base.field + 50.0 * rng.standard_normal(s.op.shape)
    try:
        state = newton_solve(initial, s.op, s.nl, tol=1e-10, max_iter=40)
    except NoConvergence:
        return
    # converged somewhere else: must be an honest root, far from the pattern
    assert state.residual_norm < 1e-10
    assert np.max(np.abs(state.field - s.base.field)) > 1e-3


def test_continuation_zero_target(setup_small):
    s = setup_small
    result = continuation(s.base, s.nl, 0.0)
    assert result.final is s.base
    assert result.branch == [s.base]


def test_continuation_branch_continuity(setup_small):
    s = setup_small
    result = continuation(s.base, s.nl, 2e-3, steps=4, tol=1e-10)
    assert len(result.branch) == 5
    eps = [st.params.epsilon for st in result.branch]
    assert eps == pytest.approx([0.0, 5e-4, 1e-3, 1.5e-3, 2e-3])
    jumps = [np.max(np.abs(a.field - b.field))
             for a, b in zip(result.branch, result.branch[1:])]
    # no jumps: successive states move proportionally to the step
    assert max(jumps) < 20.0 * 5e-4


def test_continuation_rejects_invalid_amplitude(setup_small):
    s = setup_small
    with pytest.raises(ValueError):
        continuation(s.base, s.nl, 4.5)  # violates R > r + |eps|
    with pytest.raises(ValueError):
        continuation(s.base, s.nl, 1e-3, steps=0)


def test_symmetry_check_clean_and_broken(setup_small):
    s = setup_small
    rep = symmetry_check(s.base)
    assert rep["x3_plane"] < 1e-12
    assert max(rep["theta_planes"]) < 1e-12
    assert len(rep["theta_planes"]) == s.params.n_waves

    broken = s.base.field + 0.1 * np.cos(s.grid.theta)[None, :]
    from dataclasses import replace
    bad = replace(s.base, field=broken)
    rep2 = symmetry_check(bad)
    assert rep2["x3_plane"] < 1e-12          # cos(theta) keeps x3 symmetry
    assert max(rep2["theta_planes"]) > 1e-3  # but breaks the vertical planes


def test_perturbed_symmetry_defects(setup_small):
    s = setup_small
    state = continuation(s.base, s.nl, 2e-3, steps=2, tol=1e-10).final
    rep = symmetry_check(state)
    assert rep["max_defect"] < 10.0 * 1e-10


def test_first_order_conditions_at_predicted_rows(setup_small):
    """Centered differences vanish on phi in {0, pi} rows and theta_k lines."""
    s = setup_small
    state = continuation(s.base, s.nl, 2e-3, steps=2, tol=1e-10).final
    u = state.field
    grid = s.grid
    du_p = (np.roll(u, -1, 0) - np.roll(u, 1, 0)) / (2 * grid.h_phi)
    du_t = (np.roll(u, -1, 1) - np.roll(u, 1, 1)) / (2 * grid.h_theta)
    row0 = 0
    rowpi = grid.n_phi // 2
    assert np.max(np.abs(du_p[row0])) < 10 * 1e-10
    assert np.max(np.abs(du_p[rowpi])) < 10 * 1e-10
    n = s.params.n_waves
    cols = [(2 * k + 1) * grid.n_theta // (4 * n) for k in range(2 * n)]
    assert np.max(np.abs(du_t[:, cols])) < 10 * 1e-10


def test_sidecar_payload(setup_small):
    doc = setup_small.base.sidecar()
    assert set(doc) == {"epsilon", "residual_norm", "newton_iters"}
    assert doc["epsilon"] == 0.0
