"""System generation and SDE integration."""

import numpy as np
import pytest
from scipy.linalg import expm

from sdenet.errors import ConfigError, DataError
from sdenet.simulator import (
    SystemMatrices,
    coarsen_path,
    generate_random_network,
    generate_ring_network,
    integrate_sde_path,
    is_hurwitz,
    noise_scale_from_snr,
    sigma_e_from_snr,
    simulate_equivalent_realization,
    simulate_sde,
    wiener_path,
)


def test_random_network_shapes_and_stability(rng):
    system = generate_random_network(8, 5, density=0.25, rng=rng)
    assert system.a.shape == (8, 8)
    assert is_hurwitz(system.a)
    assert np.all(np.diag(system.a) < 0)
    assert np.array_equal(system.b, np.vstack([np.eye(5), np.zeros((3, 5))]))
    assert np.array_equal(system.k, np.vstack([np.eye(5), np.zeros((3, 5))]))
    limited = generate_random_network(6, 4, rng=rng, n_inputs=2)
    assert limited.b.shape == (6, 2)
    with pytest.raises(ConfigError):
        generate_random_network(4, 5, rng=rng)
    with pytest.raises(ConfigError):
        generate_random_network(4, 2, density=0.0, rng=rng)


def test_random_network_density_is_roughly_respected():
    rng = np.random.default_rng(11)
    fills = []
    for _ in range(40):
        system = generate_random_network(10, 5, density=0.3, rng=rng)
        fills.append(np.mean(system.a != 0))
    # Hurwitz rejection biases slightly sparse; stay near the target
    assert 0.2 < float(np.mean(fills)) < 0.4


def test_ring_network_structure(rng):
    system = generate_ring_network(5, rng, n_hidden=2)
    a = system.a
    off = a[:5, :5].copy()
    np.fill_diagonal(off, 0.0)
    nz = np.array(np.nonzero(off)).T
    expected = {((j + 1) % 5, j) for j in range(5)}
    assert {tuple(map(int, rc)) for rc in nz} == expected
    mags = np.abs(off[off != 0])
    assert np.all((mags >= 0.5) & (mags <= 1.5))
    # hidden nodes are pure sinks: rows may hit measured nodes, columns
    # never feed back
    assert np.array_equal(a[:5, 5:], np.zeros((5, 2)))
    assert is_hurwitz(a)
    with pytest.raises(ConfigError):
        generate_ring_network(1, rng)


def test_snr_conversion():
    assert sigma_e_from_snr(10.0) == pytest.approx(0.1)
    assert sigma_e_from_snr(0.0) == pytest.approx(1.0)
    assert sigma_e_from_snr(None) == 1.0
    assert noise_scale_from_snr(20.0) == pytest.approx(0.1)


def test_simulation_is_deterministic():
    system = generate_ring_network(3, np.random.default_rng(5))
    times = np.arange(10.0)
    a = simulate_sde(system, times, np.random.default_rng(42), snr_db=10.0,
                     lam_meas=1e-3)
    b = simulate_sde(system, times, np.random.default_rng(42), snr_db=10.0,
                     lam_meas=1e-3)
    assert np.array_equal(a.z, b.z)
    assert np.array_equal(a.x_true, b.x_true)
    assert np.array_equal(a.u, b.u)


def test_simulation_grid_contract():
    system = generate_ring_network(2, np.random.default_rng(1))
    times = np.array([0.0, 1.0, 2.5, 3.0])
    sim = simulate_sde(system, times, np.random.default_rng(0), lam_meas=0.0)
    # internal grid hits every instant exactly and steps stay small enough
    for t in times:
        assert np.any(np.isclose(sim.t_fine, t, atol=1e-12))
    assert np.max(np.diff(sim.t_fine)) <= 0.5 / 50.0 + 1e-12
    # with no measurement noise z is the measured latent state
    idx = [int(np.argmin(np.abs(sim.t_fine - t))) for t in times]
    assert np.allclose(sim.z, sim.x_true[idx][:, :2], atol=1e-12)


def test_dt_internal_precondition():
    system = generate_ring_network(2, np.random.default_rng(1))
    times = np.arange(5.0)
    with pytest.raises(ConfigError, match="min spacing / 50"):
        simulate_sde(system, times, np.random.default_rng(0), dt_internal=0.05)
    simulate_sde(system, times, np.random.default_rng(0), dt_internal=0.02)
    with pytest.raises(ConfigError):
        simulate_sde(system, times, np.random.default_rng(0), dt_internal=-0.1)


def test_unstable_system_warns():
    a = np.array([[0.1]])
    system = SystemMatrices(a=a, b=np.zeros((1, 0)), k=np.eye(1),
                            n_obs=1, n_hidden=0)
    with pytest.warns(UserWarning, match="Hurwitz"):
        simulate_sde(system, np.arange(3.0), np.random.default_rng(0))


def test_noise_free_integration_matches_matrix_exponential():
    rng = np.random.default_rng(9)
    system = generate_random_network(4, 2, density=0.5, rng=rng)
    system.k[:] = 0.0
    system.b = np.zeros((4, 0))  # no inputs either: fully deterministic
    x0 = rng.standard_normal(4)
    sim = simulate_sde(
        system, np.array([0.0, 1.0]), np.random.default_rng(0),
        x0=x0, dt_internal=1e-4, lam_meas=0.0,
    )
    exact = (expm(system.a * 1.0) @ x0)[:2]
    assert np.allclose(sim.z[1], exact, atol=1e-3)


def test_exact_stepping_matches_em_statistics():
    # scalar OU dx = -x dt + dW has stationary variance 1/2
    system = SystemMatrices(a=np.array([[-1.0]]), b=np.zeros((1, 0)),
                            k=np.eye(1), n_obs=1, n_hidden=0)
    times = 2.0 * np.arange(1500.0)
    sim = simulate_sde(system, times, np.random.default_rng(7),
                       method="exact", lam_meas=0.0)
    var = float(np.var(sim.z[50:]))
    assert abs(var - 0.5) < 0.05
    sim_em = simulate_sde(system, 1.0 * np.arange(3000.0),
                          np.random.default_rng(8), lam_meas=0.0)
    assert abs(float(np.var(sim_em.z[50:])) - 0.5) < 0.05
    with pytest.raises(ConfigError, match="autonomous"):
        sys_u = generate_ring_network(2, np.random.default_rng(1))
        simulate_sde(sys_u, np.arange(4.0), np.random.default_rng(0),
                     method="exact")


def test_path_driven_euler_matches_euler_maruyama(rng):
    system = generate_random_network(4, 2, density=0.5, rng=rng)
    dt = 1e-3
    steps = 500
    w = wiener_path(steps, 2, dt, rng)
    y_em = integrate_sde_path(system, dt, w, noise_scale=0.4)
    y_ode = simulate_equivalent_realization(system, dt, w, noise_scale=0.4,
                                            method="euler")
    assert np.allclose(y_em, y_ode, atol=1e-10)


def test_path_driven_heun_gap_shrinks_with_step(rng):
    system = generate_random_network(3, 2, density=0.5, rng=rng)
    dt = 2e-4
    steps = 4000
    w_fine = wiener_path(2 * steps, 2, dt / 2.0, rng)
    w = coarsen_path(w_fine, 2)
    gap = np.max(np.abs(
        integrate_sde_path(system, dt, w)
        - simulate_equivalent_realization(system, dt, w)
    ))
    gap_fine = np.max(np.abs(
        integrate_sde_path(system, dt / 2.0, w_fine)
        - simulate_equivalent_realization(system, dt / 2.0, w_fine)
    ))
    assert gap < 5e-3
    assert gap / gap_fine > 1.5


def test_wiener_and_coarsen_helpers(rng):
    w = wiener_path(200, 3, 0.1, rng)
    assert w.shape == (201, 3)
    assert np.array_equal(w[0], np.zeros(3))
    inc = np.diff(w, axis=0)
    assert abs(float(np.var(inc)) - 0.1) < 0.02
    c = coarsen_path(w, 4)
    assert np.array_equal(c, w[::4])
    with pytest.raises(DataError):
        coarsen_path(w, 3)


def test_system_matrices_roundtrip_and_validation():
    system = generate_ring_network(3, np.random.default_rng(2), n_hidden=1)
    clone = SystemMatrices.from_dict(system.to_dict())
    assert np.array_equal(clone.a, system.a)
    assert np.array_equal(clone.b, system.b)
    assert np.array_equal(clone.k, system.k)
    assert clone.n_obs == 3 and clone.n_hidden == 1
    assert system.a11.shape == (3, 3)
    assert system.a12.shape == (3, 1)
    assert system.a21.shape == (1, 3)
    assert system.a22.shape == (1, 1)
    with pytest.raises(DataError):
        SystemMatrices.from_dict({"a": [[1]]})
    with pytest.raises(DataError):
        SystemMatrices(a=np.zeros((2, 3)), b=np.zeros((2, 1)),
                       k=np.zeros((2, 1)), n_obs=1, n_hidden=1)
