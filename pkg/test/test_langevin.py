import pytest
import numpy as np
from dataclasses import replace

from .helpers import *


def random_state(grid, seed=0, scale=1.0):
    from ymmodel.fieldgrid import GridField

    rng = np.random.default_rng(seed)
    return GridField.from_values(grid, scale * rng.standard_normal(grid.sizes + (9,)))


def small_spatial_grid():
    from ymmodel.langevin import spatial_grid

    return spatial_grid(nx=4, box_length=2.4)


def test_spatial_grid_and_modes():
    from ymmodel.langevin import wave_numbers, mode_variance_oracle, to_modes, from_modes, mollifier_spectrum

    grid = small_spatial_grid()
    assert grid.sizes == (1, 4, 4, 4)
    assert grid.ht == pytest.approx(grid.hx**2)

    k_squared = wave_numbers(grid)
    assert k_squared.shape == (4, 4, 3)
    assert k_squared[0, 0, 0] == 0.0
    assert k_squared[1, 0, 0] == pytest.approx((2 * np.pi / 2.4) ** 2)
    assert mode_variance_oracle(0.0) == pytest.approx(0.5)
    assert mode_variance_oracle(1.0, mass=0.0) == pytest.approx(0.5)

    state = random_state(grid)
    modes = to_modes(state)
    assert modes.shape == (1, 4, 4, 3, 9)
    assert np.allclose(from_modes(grid, modes).values, state.values)

    spectrum = mollifier_spectrum(grid, SMALL_RHO)
    assert spectrum.shape == k_squared.shape
    assert spectrum[0, 0, 0] == pytest.approx(1.0)
    assert np.all(np.abs(spectrum) <= 1.0 + 1e-12)
    assert np.all(mollifier_spectrum(grid, 0) == 1.0)


def test_langevin_config():
    from ymmodel.fieldgrid import ParabolicGrid
    from ymmodel.langevin import LangevinConfig
    from ymmodel.model import RenormConstants

    config = LangevinConfig(grid=small_spatial_grid(), horizon=0.5, dt=0.1)
    assert config.steps == 5
    assert config.counterterm == 0.0
    with_constants = replace(config, coupling=2.0, constants=RenormConstants((1.0, 0.5, 0.0, 0.0)))
    assert with_constants.counterterm == pytest.approx(2.0 + 0.5 * 4.0)
    assert config.json()["dt"] == 0.1
    assert config.json()["lie"]["name"] == "su2"

    with pytest.raises(ValueError):
        LangevinConfig(grid=ParabolicGrid.from_nx(4, 2.4, 2.88))
    with pytest.raises(ValueError):
        LangevinConfig(grid=small_spatial_grid(), dt=0.0)


def test_linear_flow_is_exact():
    from ymmodel.langevin import LangevinConfig, LangevinIntegrator, spectral_flow, integrate_step

    grid = small_spatial_grid()
    state = random_state(grid, seed=1)
    config = LangevinConfig(grid=grid, coupling=0.0, noise=False, horizon=1.0, dt=0.1)
    trajectory = LangevinIntegrator(config).run(state)
    assert len(trajectory.times) == 11
    assert trajectory.times[-1] == pytest.approx(1.0)
    assert np.allclose(trajectory.final.values, spectral_flow(state, 1.0).values, atol=1e-8)
    # the heat flow only loses norm
    assert all(b <= a + 1e-12 for a, b in zip(trajectory.norms, trajectory.norms[1:]))

    stepped = integrate_step(state, 0.3, config)
    assert np.allclose(stepped.values, spectral_flow(state, 0.3).values)


def test_counterterm_only():
    from ymmodel.langevin import LangevinConfig, LangevinIntegrator, spectral_flow
    from ymmodel.model import RenormConstants
    from ymmodel.fieldgrid import GridField
    from ymmodel.tensoralg import LieData

    # abelian: the nonlinearity vanishes, and a constant state solves A' = (c − m²) A
    grid = small_spatial_grid()
    abelian_config = LangevinConfig(
        grid=grid,
        lie=LieData.abelian(),
        constants=RenormConstants((0.5, 0.0, 0.0, 0.0)),
        noise=False,
        horizon=0.1,
        dt=0.1,
    )
    integrator = LangevinIntegrator(abelian_config)
    assert not integrator.nonlinear
    state = GridField.constant(grid, np.ones(9))
    stepped = integrator.step(state)
    # exponential Euler on the k = 0 mode: e^{-dt} + (1 − e^{-dt})·0.5
    expected = np.exp(-0.1) + (1 - np.exp(-0.1)) * 0.5
    assert np.allclose(stepped.values, expected)
    assert not np.allclose(stepped.values, spectral_flow(state, 0.1).values)


def test_nonlinear_step_and_aborts():
    from ymmodel.errors import NumericalAbort
    from ymmodel.langevin import LangevinConfig, LangevinIntegrator

    grid = small_spatial_grid()
    config = LangevinConfig(grid=grid, noise=False, horizon=0.02, dt=0.01)
    integrator = LangevinIntegrator(config)
    assert integrator.nonlinear
    state = random_state(grid, seed=2, scale=0.1)
    assert integrator.stability_bound(state) > config.dt
    linear = LangevinIntegrator(replace(config, coupling=0.0))
    assert not np.allclose(integrator.step(state).values, linear.step(state).values)

    with pytest.raises(NumericalAbort):
        integrator.step(random_state(grid, seed=2, scale=1e6))
    with pytest.raises(NumericalAbort):
        LangevinIntegrator(replace(config, noise=True, blowup=1e-12)).run()


def test_trajectory_output(temp_dir):
    from ymmodel.fieldgrid import load_field
    from ymmodel.langevin import LangevinConfig, run_trajectory

    config = LangevinConfig(grid=small_spatial_grid(), horizon=0.05, dt=0.01, seed=3, snapshot_every=2)
    trajectory = run_trajectory(config)
    assert len(trajectory.norms) == 6
    assert trajectory.norms[0] == 0.0
    assert trajectory.norms[-1] > 0
    # t = 0, 0.02, 0.04
    assert [t for t, _ in trajectory.snapshots] == pytest.approx([0.0, 0.02, 0.04])

    again = run_trajectory(config)
    assert again.norms == trajectory.norms

    lines = trajectory.write_csv(temp_dir / "norms.csv").read_text().splitlines()
    assert lines[0] == "t,l2_norm"
    assert len(lines) == 7
    files = trajectory.dump_snapshots(temp_dir / "snapshots")
    assert [f["file"] for f in files] == ["snapshot_0000.bin", "snapshot_0001.bin", "snapshot_0002.bin"]
    loaded = load_field(temp_dir / "snapshots" / files[-1]["file"])
    assert np.array_equal(loaded.values, trajectory.snapshots[-1][1].values)


def test_coupled_distances():
    from ymmodel.langevin import LangevinConfig, run_coupled_comparison, linear_filter_distance
    from ymmodel.model import RenormConstants

    config = LangevinConfig(grid=small_spatial_grid(), horizon=0.05, dt=0.01, seed=4)
    same = run_coupled_comparison(config, SMALL_RHO, SMALL_RHO, RenormConstants((0.1, 0.0, 0.0, 0.0)))
    assert same["with_counterterm"] == 0.0
    assert same["without_counterterm"] == 0.0
    assert same["constants"]["c"] == [0.1, 0.0, 0.0, 0.0]
    assert linear_filter_distance(config, SMALL_RHO, SMALL_RHO) == 0.0

    different = run_coupled_comparison(config, SMALL_RHO, 0.0)
    assert different["without_counterterm"] > 0
    assert linear_filter_distance(config, SMALL_RHO, 0.0) > 0


@pytest.mark.slow
def test_stationary_variance():
    from ymmodel.langevin import LangevinConfig, stationary_mode_variance, mode_variance_oracle, wave_numbers
    from ymmodel.tensoralg import LieData

    grid = small_spatial_grid()
    config = LangevinConfig(grid=grid, lie=LieData.abelian(), rho=0.0, dt=0.5, horizon=1000.0, seed=5)
    measured = stationary_mode_variance(config, burn_in=10.0)
    ratio = measured / mode_variance_oracle(wave_numbers(grid))
    assert np.mean(ratio) == pytest.approx(1.0, rel=0.05)
    assert np.all(np.abs(ratio - 1.0) < 0.25)

    with pytest.raises(ValueError):
        stationary_mode_variance(replace(config, horizon=1.0), burn_in=10.0)
