import numpy as np
import pytest

from toruspatterns.dynamics import (band_limited_noise, default_dt, energy,
                                    stability_probe, step_imex)


class ZeroReaction:
    max_abs_fprime = 0.0

    def __call__(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def deriv(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def antideriv(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))


def test_default_dt(setup_small):
    assert default_dt(setup_small.nl) == pytest.approx(
        0.5 / setup_small.nl.max_abs_fprime)
    assert default_dt(ZeroReaction()) == 0.5


def test_step_rejects_nonpositive_dt(setup_small):
    s = setup_small
    with pytest.raises(ValueError):
        step_imex(s.base.field, 0.0, s.op, s.nl)


def test_steady_state_is_fixed_point(setup_small):
    s = setup_small
    dt = default_dt(s.nl)
    u1 = step_imex(s.base.field, dt, s.op, s.nl)
    assert np.max(np.abs(u1 - s.base.field)) < 10 * (1e-10 + 1e-12)


def test_pure_diffusion_constant_unchanged(setup_small):
    s = setup_small
    u = np.full(s.op.shape, 0.37)
    u1 = step_imex(u, 0.1, s.op, ZeroReaction())
    assert np.max(np.abs(u1 - u)) < 1e-12


def test_pure_diffusion_decays_cos_phi(setup_small):
    s = setup_small
    u = np.cos(s.grid.phi)[:, None] * np.ones(s.grid.n_theta)[None, :]
    sups = [np.max(np.abs(u))]
    for _ in range(20):
        u = step_imex(u, 0.1, s.op, ZeroReaction())
        sups.append(np.max(np.abs(u)))
    assert all(b < a for a, b in zip(sups, sups[1:]))


def test_energy_decreases_along_flow(setup_small):
    s = setup_small
    rng = np.random.default_rng(2)
    u = s.base.field + 0.05 * band_limited_noise(s.grid, rng)
    dt = default_dt(s.nl)
    e_prev = energy(u, s.op, s.nl)
    for _ in range(40):
        u = step_imex(u, dt, s.op, s.nl)
        e = energy(u, s.op, s.nl)
        assert e <= e_prev + 1e-10
        e_prev = e


def test_comparison_principle(setup_small):
    s = setup_small
    dt = 1.0 / s.nl.max_abs_fprime  # at the order-preservation bound
    rng = np.random.default_rng(4)
    u = s.base.field + 0.01 * band_limited_noise(s.grid, rng)
    v = u + 0.02 * (1.0 + np.cos(s.grid.theta))[None, :]  # v0 >= u0
    for _ in range(30):
        u = step_imex(u, dt, s.op, s.nl)
        v = step_imex(v, dt, s.op, s.nl)
        assert np.all(u <= v + 1e-8)


def test_band_limited_noise_properties(setup_small):
    grid = setup_small.grid
    a = band_limited_noise(grid, np.random.default_rng(9))
    b = band_limited_noise(grid, np.random.default_rng(9))
    assert np.array_equal(a, b)  # seed-reproducible
    assert np.max(np.abs(a)) == pytest.approx(1.0, abs=1e-14)
    coeffs = np.fft.fft2(a)
    mask = np.ones_like(coeffs, dtype=bool)
    idx_p = np.fft.fftfreq(grid.n_phi, 1 / grid.n_phi).astype(int)
    idx_t = np.fft.fftfreq(grid.n_theta, 1 / grid.n_theta).astype(int)
    keep = (np.abs(idx_p)[:, None] <= 8) & (np.abs(idx_t)[None, :] <= 8)
    assert np.max(np.abs(coeffs[~keep])) < 1e-10 * np.max(np.abs(coeffs))


def test_stability_probe_trace(setup_small):
    s = setup_small
    delta = 1e-2 * float(np.max(np.abs(s.base.field)))
    trace = stability_probe(s.base, s.op, s.nl, delta=delta, horizon=2.0,
                            dt=default_dt(s.nl), seed=3)
    assert trace.times[0] == 0.0
    assert np.all(np.diff(trace.times) > 0)
    assert trace.sup_distance[0] == pytest.approx(delta, rel=1e-12)
    assert np.max(np.diff(trace.energy)) <= 1e-10
    csv = trace.to_csv()
    assert csv.splitlines()[0] == "t,sup_distance,energy"

    with pytest.raises(ValueError):
        stability_probe(s.base, s.op, s.nl, delta=-1.0, horizon=1.0,
                        dt=0.01, seed=0)


def test_probe_zero_delta_stays_put(setup_small):
    s = setup_small
    trace = stability_probe(s.base, s.op, s.nl, delta=0.0, horizon=0.5,
                            dt=default_dt(s.nl), seed=1)
    assert np.max(trace.sup_distance) < 1e-8
