"""
Experimental integrator for the renormalized Langevin equation on the spatial torus

    ∂_t A = (Δ − m²) A + g𝒜(A, A) + g²ℬ(A, A, A) + cA + ξ^ρ,

with c = Σ c_k g^k.

The linear part and the noise are integrated exactly per Fourier mode (an Ornstein-Uhlenbeck step);
the nonlinearity and the counterterm enter explicitly through a first-order exponential step. Modes
are normalized as Â_k = L^{-3/2} Σ_y A(y) e^{-ik·y} hx³, so a stationary mode has variance
1/(2(|k|² + m²)) for white noise.
"""

import logging
import numpy as np
from pathlib import Path
from dataclasses import dataclass, field, replace

from ymmodel import defaults
from ymmodel.base import ModelBase
from ymmodel.bumps import normalized_bump
from ymmodel.tensoralg import LieData
from ymmodel.errors import NumericalAbort, SupportError
from ymmodel.model import RenormConstants, nonlinearity_eval
from ymmodel.fieldgrid import GridField, ParabolicGrid, dump_field

log = logging.getLogger(__name__)

SPACE_AXES = (1, 2, 3)


def spatial_grid(nx=defaults.langevin_nx, box_length=defaults.box_length):
    """
    A single time slice: Nt = 1 with the parabolic time step hx².
    """
    hx = box_length / nx
    return ParabolicGrid(1, nx, hx**2, box_length)


def wave_numbers(grid):
    """
    |k|² on the half spectrum of a real field, shape ``(Nx, Nx, Nx//2+1)``.
    """
    full = 2 * np.pi * np.fft.fftfreq(grid.nx, d=grid.hx)
    half = 2 * np.pi * np.fft.rfftfreq(grid.nx, d=grid.hx)
    k1, k2, k3 = np.meshgrid(full, full, half, indexing="ij")
    return k1**2 + k2**2 + k3**2


def mode_eigenvalues(grid, mass=defaults.mass):
    return wave_numbers(grid) + mass**2


def mode_variance_oracle(k_squared, mass=defaults.mass):
    """
    Stationary variance 1/(2(|k|² + m²)) of a Fourier mode driven by white noise.
    """
    return 1.0 / (2.0 * (np.asarray(k_squared, dtype=float) + mass**2))


def _mode_factor(grid):
    return grid.hx**3 / grid.box_length**1.5


def to_modes(field):
    values = field.values
    return np.fft.rfftn(values, axes=SPACE_AXES) * _mode_factor(field.grid)


def from_modes(grid, modes):
    values = np.fft.irfftn(modes / _mode_factor(grid), s=(grid.nx,) * 3, axes=SPACE_AXES)
    return GridField.from_values(grid, values)


def _broadcast_modes(array, modes):
    return array.reshape((1,) + array.shape + (1,) * (modes.ndim - 4))


def spectral_flow(field, t, mass=defaults.mass):
    """
    e^{t(Δ − m²)} A in closed form.
    """
    modes = to_modes(field)
    decay = np.exp(-t * mode_eigenvalues(field.grid, mass))
    return from_modes(field.grid, modes * _broadcast_modes(decay, modes))


def mollifier_spectrum(grid, rho):
    """
    Fourier multiplier of the spatial marginal of η^ρ, equal to 1 at k = 0.
    """
    if rho == 0:
        return np.ones(wave_numbers(grid).shape)
    patch = normalized_bump((grid.hx**2, grid.hx), rho)
    extent = patch.extent()
    if any(2 * e >= grid.nx for e in extent[1:]):
        raise SupportError(f"mollifier at ρ={rho} does not embed in the {grid.nx}^3 spatial torus")
    kernel = np.zeros((grid.nx,) * 3)
    index = tuple(patch.offsets[:, axis] % grid.nx for axis in SPACE_AXES)
    np.add.at(kernel, index, patch.weights * grid.hx**2)
    return np.real(np.fft.rfftn(kernel)) * grid.hx**3


@dataclass(frozen=True)
class LangevinConfig:
    """
    One integration run. ``dt`` must stay below :meth:`LangevinIntegrator.stability_bound` along the run.
    """

    grid: ParabolicGrid = field(default_factory=spatial_grid)
    mass: float = defaults.mass
    coupling: float = defaults.coupling
    rho: float = defaults.rho
    constants: RenormConstants = field(default_factory=RenormConstants.zero)
    horizon: float = defaults.langevin_horizon
    dt: float = defaults.langevin_dt
    seed: int = defaults.seed
    lie: LieData = field(default_factory=LieData.su2)
    noise: bool = True
    blowup: float = defaults.langevin_blowup
    snapshot_every: int = 0

    def __post_init__(self):
        if self.grid.nt != 1:
            raise ValueError(f"the Langevin state lives on a single time slice, got Nt={self.grid.nt}")
        if self.dt <= 0 or self.horizon < 0:
            raise ValueError(f"invalid step {self.dt} or horizon {self.horizon}")

    @property
    def steps(self):
        return int(round(self.horizon / self.dt))

    @property
    def counterterm(self):
        return sum(self.constants.value(k) * self.coupling**k for k in range(1, 5))

    def json(self):
        return {
            "grid": self.grid.json(),
            "mass": self.mass,
            "coupling": self.coupling,
            "rho": self.rho,
            "constants": self.constants.json(),
            "horizon": self.horizon,
            "dt": self.dt,
            "seed": self.seed,
            "lie": self.lie.json(),
            "noise": self.noise,
        }


def l2_norm(field):
    values = field.values
    return float(np.sqrt(np.sum(values**2) * field.grid.hx**3))


class LangevinIntegrator(ModelBase):
    def __init__(self, config, noise_filter=None):
        super().__init__()
        self.config = config
        self.grid = config.grid
        self.dim_v = config.lie.dim_v
        eigen = mode_eigenvalues(self.grid, config.mass)
        self.decay = np.exp(-eigen * config.dt)
        self.phi = -np.expm1(-eigen * config.dt) / eigen
        if noise_filter is None:
            noise_filter = mollifier_spectrum(self.grid, config.rho)
        self.noise_scale = np.sqrt(-np.expm1(-2 * eigen * config.dt) / (2 * eigen)) * noise_filter
        self.rng = np.random.default_rng(config.seed)
        self.nonlinear = config.coupling != 0 and not config.lie.is_abelian

    def nonlinearity(self, state):
        g = self.config.coupling
        result = state * self.config.counterterm
        if self.nonlinear:
            lie = self.config.lie
            result = result + nonlinearity_eval("A", [state, state], lie) * g
            result = result + nonlinearity_eval("B", [state, state, state], lie) * g**2
        return result

    def stability_bound(self, state):
        """
        Largest explicit step for the current state: dt·(|c| + g‖A‖∞/hx + g²‖A‖∞²) ≤ 1/2.
        """
        amplitude = state.max_abs()
        g = abs(self.config.coupling) if self.nonlinear else 0.0
        rate = abs(self.config.counterterm) + g * amplitude / self.grid.hx + g**2 * amplitude**2
        return np.inf if rate == 0 else 0.5 / rate

    def noise_increment(self):
        """
        Exact OU noise over one step in mode space, from cell-wise white noise of unit rate.
        """
        white = self.rng.standard_normal(self.grid.sizes + (self.dim_v,)) / np.sqrt(self.grid.hx**3)
        modes = np.fft.rfftn(white, axes=SPACE_AXES) * _mode_factor(self.grid)
        return modes * _broadcast_modes(self.noise_scale, modes)

    def step(self, state, noise=None):
        dt = self.config.dt
        bound = self.stability_bound(state)
        if dt > bound:
            raise NumericalAbort(f"step {dt} exceeds the stability bound {bound:.3g}")
        modes = to_modes(state)
        modes = modes * _broadcast_modes(self.decay, modes)
        forcing = self.nonlinearity(state)
        if forcing.terms:
            forced = to_modes(forcing)
            modes = modes + forced * _broadcast_modes(self.phi, forced)
        if noise is None and self.config.noise:
            noise = self.noise_increment()
        if noise is not None:
            modes = modes + noise
        return from_modes(self.grid, modes)

    def initial_state(self):
        return GridField.from_values(self.grid, np.zeros(self.grid.sizes + (self.dim_v,)))

    def run(self, state=None, observer=None):
        """
        Integrate to the horizon, recording the L₂ norm after every step.

        Raises:
            NumericalAbort: when the norm exceeds the blow-up threshold or a step breaks the stability bound.
        """
        config = self.config
        state = state if state is not None else self.initial_state()
        trajectory = Trajectory([0.0], [l2_norm(state)], [(0.0, state)] if config.snapshot_every else [])
        for n in range(1, config.steps + 1):
            state = self.step(state)
            t = n * config.dt
            norm = l2_norm(state)
            if not np.isfinite(norm) or norm > config.blowup:
                raise NumericalAbort(f"blow-up at t={t:.4g}: ‖A‖₂ = {norm:.3g}")
            trajectory.times.append(t)
            trajectory.norms.append(norm)
            if config.snapshot_every and n % config.snapshot_every == 0:
                trajectory.snapshots.append((t, state))
            if observer is not None:
                observer(t, state)
        trajectory.final = state
        self.log.debug(f"integrated {config.steps} steps, final ‖A‖₂ = {trajectory.norms[-1]:.4g}")
        return trajectory


def integrate_step(state, dt, config, noise=None):
    """
    One step of size ``dt``; ``noise`` is a mode-space increment, drawn from the config's seed when omitted.
    """
    return LangevinIntegrator(replace(config, dt=dt)).step(state, noise)


@dataclass
class Trajectory:
    times: list
    norms: list
    snapshots: list = field(default_factory=list)
    final: GridField = None

    def write_csv(self, path):
        path = Path(path)
        np.savetxt(path, np.column_stack([self.times, self.norms]), delimiter=",", header="t,l2_norm", comments="")
        return path

    def dump_snapshots(self, out_dir):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        files = []
        for n, (t, state) in enumerate(self.snapshots):
            path = out_dir / f"snapshot_{n:04d}.bin"
            dump_field(state, path)
            files.append({"t": t, "file": path.name})
        return files


def run_trajectory(config, state=None):
    return LangevinIntegrator(config).run(state)


def stationary_mode_variance(config, burn_in=0.0):
    """
    Time average of |Â_k|² over the run after ``burn_in``, averaged over V-components.
    """
    integrator = LangevinIntegrator(config)
    total = np.zeros(wave_numbers(config.grid).shape)
    count = 0

    def observe(t, state):
        nonlocal total, count
        if t >= burn_in:
            modes = to_modes(state)[0]
            total = total + np.mean(np.abs(modes) ** 2, axis=-1)
            count += 1

    integrator.run(observer=observe)
    if not count:
        raise ValueError(f"burn-in {burn_in} leaves no samples before the horizon {config.horizon}")
    return total / count


def _coupled_distance(config, rho, rho_prime):
    # both integrators draw from the same seed, so they see the same white noise
    first = LangevinIntegrator(replace(config, rho=rho))
    second = LangevinIntegrator(replace(config, rho=rho_prime))
    a, b = first.initial_state(), second.initial_state()
    distance = 0.0
    for n in range(1, config.steps + 1):
        a, b = first.step(a), second.step(b)
        if max(l2_norm(a), l2_norm(b)) > config.blowup:
            raise NumericalAbort(f"blow-up at t={n * config.dt:.4g} in the coupled run")
        distance = max(distance, l2_norm(a - b))
    return distance


def linear_filter_distance(config, rho, rho_prime):
    """
    sup_t ‖A^ρ − A^{ρ′}‖₂ for the linear equation, integrated directly with the filter η̂_ρ − η̂_{ρ′}.
    """
    linear = replace(config, coupling=0.0, constants=RenormConstants.zero())
    noise_filter = mollifier_spectrum(config.grid, rho) - mollifier_spectrum(config.grid, rho_prime)
    return max(LangevinIntegrator(linear, noise_filter=noise_filter).run().norms)


def run_coupled_comparison(config, rho, rho_prime, constants=None):
    """
    sup-in-time L₂ distance between the runs at ρ and ρ′ driven by the same white noise, with the
    counterterm and without it.
    """
    constants = constants if constants is not None else config.constants
    with_counterterm = _coupled_distance(replace(config, constants=constants), rho, rho_prime)
    without_counterterm = _coupled_distance(replace(config, constants=RenormConstants.zero()), rho, rho_prime)
    log.info(
        f"coupled distance ρ={rho} vs ρ′={rho_prime}: {with_counterterm:.4g} with c, {without_counterterm:.4g} without"
    )
    return {
        "rho": rho,
        "rho_prime": rho_prime,
        "with_counterterm": with_counterterm,
        "without_counterterm": without_counterterm,
        "constants": constants.json(),
    }
