import logging
import numpy as np
from dataclasses import dataclass, field, replace

from ymmodel import defaults
from ymmodel.base import ModelBase
from ymmodel.bumps import TestFunction
from ymmodel.errors import IndexSetError
from ymmodel.helpers import SampleRunner
from ymmodel.tensoralg import LieData, reflection_signs, v_reflection_signs
from ymmodel.fieldgrid import ParabolicGrid, KernelSpec, pair, sample_white_noise
from ymmodel.model import ModelInstance, RenormConstants
from ymmodel.indexcalc import DEFAULT_PARAMS, GradedValue, HomParams, MultiIndex, grade, membership, population


log = logging.getLogger(__name__)

ORIGIN = (0, 0, 0, 0)
LEVELS = (1, 2, 3, 4)


def bphz_index(k):
    """
    kδg + δ0, the index whose expectation fixes c_k.
    """
    return MultiIndex.g(k) + MultiIndex.delta(ORIGIN)


def parity_sign(beta):
    """
    Sign picked up by Π⁻_β under ξ → −ξ together with the opposite bracket.
    """
    return -1.0 if beta.poly_total % 2 == 0 else 1.0


def noise_parity_sign(beta):
    """
    Sign picked up by Π⁻_β under ξ → −ξ alone, valid while the odd constants vanish.
    """
    return 1.0 if population(beta) % 2 else -1.0


def reflect_sample(noise, axis, dim_k):
    """
    The reflected sample P_i ξ(R_i ·).
    """
    return noise.reflect(axis).scale_axis(v_reflection_signs(axis, dim_k), 0)


def sample_draws(nsamples, seed, antithetic=defaults.antithetic):
    """
    ``(seed, sign)`` per sample; antithetic runs pair every seed with its negated noise.
    """
    if nsamples < 2:
        raise ValueError(f"at least two samples are needed for a standard error, got {nsamples}")
    if not antithetic:
        return [(seed + i, 1.0) for i in range(nsamples)]
    if nsamples % 2:
        raise ValueError(f"antithetic sampling needs an even number of samples, got {nsamples}")
    return [(seed + i, sign) for i in range(nsamples // 2) for sign in (1.0, -1.0)]


@dataclass(frozen=True)
class SampleSetup:
    """
    Everything a worker needs to rebuild a model instance from a ``(seed, sign)`` draw.
    """

    grid: ParabolicGrid
    lie: LieData = field(default_factory=LieData.su2)
    spec: KernelSpec = field(default_factory=KernelSpec)
    rho: float = defaults.rho
    bound: GradedValue = GradedValue(defaults.grade_bound)
    params: HomParams = DEFAULT_PARAMS

    def noise(self, seed, sign=1.0):
        noise = sample_white_noise(self.grid, seed, self.lie.dim_v)
        return noise if sign == 1.0 else noise * sign

    def instance(self, seed, sign=1.0, constants=None, noise=None):
        if noise is None:
            noise = self.noise(seed, sign)
        return ModelInstance(
            self.grid,
            seed=seed,
            rho=self.rho,
            lie=self.lie,
            spec=self.spec,
            constants=constants,
            bound=self.bound,
            params=self.params,
            base_points=[ORIGIN],
            noise=noise,
        )

    def json(self):
        return {
            "grid": self.grid.json(),
            "lie": self.lie.json(),
            "kernel": self.spec.json(),
            "rho": self.rho,
            "bound": GradedValue.coerce(self.bound).json(),
        }


def origin_minus(instance, beta):
    return instance.direct(ORIGIN, [beta])[beta][1]


def pairing_sample(draw, setup, beta, constants, scale):
    """
    pair(Π⁻_{0β}, ψ^λ_0) for one draw, shape ``(dim V, dim W_β)``.
    """
    seed, sign = draw
    instance = setup.instance(seed, sign, constants)
    return pair(origin_minus(instance, beta), TestFunction("psi", scale))


@dataclass(frozen=True)
class McEstimate:
    """
    Monte-Carlo mean and standard error over noise samples.

    With antithetic draws the error is computed from the pair means, which are independent.
    """

    mean: np.ndarray
    std_error: np.ndarray
    nsamples: int
    seed: int
    antithetic: bool = False

    @classmethod
    def from_samples(cls, values, seed=None, antithetic=False):
        values = np.asarray(values, dtype=float)
        nsamples = len(values)
        groups = values.reshape((nsamples // 2, 2) + values.shape[1:]).mean(axis=1) if antithetic else values
        if len(groups) < 2:
            raise ValueError(f"need at least two independent groups, got {len(groups)}")
        mean = groups.mean(axis=0)
        std_error = groups.std(axis=0, ddof=1) / np.sqrt(len(groups))
        return cls(mean, std_error, nsamples, seed, antithetic)

    def z_scores(self):
        mean = np.abs(np.asarray(self.mean))
        se = np.asarray(self.std_error)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, mean / np.where(se > 0, se, 1.0), np.where(mean > 0, np.inf, 0.0))
        return z

    def within(self, k=3.0):
        """
        Whether every component of the mean lies within ``k`` standard errors of zero.
        """
        return bool(np.all(self.z_scores() <= k))

    def json(self):
        return {
            "mean": np.asarray(self.mean).tolist(),
            "std_error": np.asarray(self.std_error).tolist(),
            "nsamples": self.nsamples,
            "seed": self.seed,
            "antithetic": self.antithetic,
        }


def _check_target(beta, params):
    if not membership(beta).in_Mprime:
        raise IndexSetError(f"{beta} is not in M′")
    if not grade(beta, "plain", params) < 2:
        raise IndexSetError(f"{beta} has grade {grade(beta, 'plain', params)}, expected below 2")


def collect_pairings(setup, beta, constants, scale, draws, runner=None):
    runner = runner or SampleRunner()
    TestFunction("psi", scale).check_support(setup.grid)
    values = runner.map(pairing_sample, draws, setup=setup, beta=beta, constants=constants, scale=scale)
    return np.stack(values)


def mc_pairing_expectation(
    beta,
    scale=defaults.lambda_bar,
    rho=None,
    nsamples=defaults.samples,
    seed=defaults.seed,
    constants=None,
    setup=None,
    antithetic=False,
    runner=None,
):
    """
    Estimate E pair(Π⁻_{0β}, ψ^λ_0) over independent noise samples.

    Args:
        beta (MultiIndex): index in M′ with grade below 2.
        scale (float): the test-function scale λ.
        rho (float): mollification scale; overrides ``setup.rho`` when given.
        nsamples (int): number of samples.
        seed (int): first seed; sample i uses ``seed + i``.
        constants (RenormConstants): counterterm coefficients, zero by default.
        setup (SampleSetup): grid, algebra and kernel.
        antithetic (bool): pair every sample with its negated noise.
        runner (SampleRunner): worker pool.

    Returns:
        McEstimate: mean and standard error, shape ``(dim V, dim W_β)``.
    """
    if setup is None:
        raise ValueError("a SampleSetup is required")
    if rho is not None:
        setup = replace(setup, rho=float(rho))
    _check_target(beta, setup.params)
    constants = constants or RenormConstants.zero()
    values = collect_pairings(setup, beta, constants, scale, sample_draws(nsamples, seed, antithetic), runner)
    return McEstimate.from_samples(values, seed, antithetic)


def trace_projection(values, dim_v):
    return np.trace(values, axis1=-2, axis2=-1) / dim_v


@dataclass(frozen=True)
class BphzResult:
    constants: RenormConstants
    std_errors: tuple
    rho: float
    lambda_bar: float
    nsamples: int
    seed: int
    antithetic: bool = defaults.antithetic
    schedule: tuple = None

    def json(self):
        return {
            "c": list(self.constants.c),
            "se": list(self.std_errors),
            "rho": self.rho,
            "lambda_bar": self.lambda_bar,
            "nsamples": self.nsamples,
            "seed": self.seed,
            "antithetic": self.antithetic,
            "schedule": list(self.schedule) if self.schedule else None,
        }

    def closure_z_scores(self, estimates, atol=1e-12):
        """
        |mean| / SE per level for a closure re-estimate on independent draws.

        The SE combines the re-estimate's error with that of the fitted c_k; means below ``atol`` score 0.
        """
        scores = []
        for estimate, fit_se in zip(estimates, self.std_errors):
            mean = abs(float(estimate.mean))
            se = float(np.hypot(float(estimate.std_error), fit_se))
            scores.append(0.0 if mean <= atol else (mean / se if se > 0 else np.inf))
        return scores

    def closure_within(self, estimates, k=3.0, atol=1e-12):
        return all(z <= k for z in self.closure_z_scores(estimates, atol))


class BphzFitter(ModelBase):
    """
    Fixes c_1..c_4 one level at a time so that E Π⁻_{0,kδg+δ0}(ψ) vanishes.

    At level k the lower constants are already fixed and c_k is held at zero; Π⁻ then differs from its
    renormalized value by c_k·Id, so c_k is minus the identity component of the estimate.
    """

    def __init__(
        self,
        setup,
        lambda_bar=defaults.lambda_bar,
        nsamples=defaults.samples,
        seed=defaults.seed,
        antithetic=defaults.antithetic,
        schedule=None,
        runner=None,
    ):
        super().__init__()
        self.setup = setup
        self.lambda_bar = float(lambda_bar)
        self.schedule = tuple(float(_) for _ in (schedule or (lambda_bar,) * len(LEVELS)))
        if len(self.schedule) != len(LEVELS) or any(s <= 0 for s in self.schedule):
            raise ValueError(f"expected four positive scales, got {self.schedule}")
        self.nsamples = nsamples
        self.seed = seed
        self.antithetic = antithetic
        self.runner = runner or SampleRunner()
        self.draws = sample_draws(nsamples, seed, antithetic)

    def level_estimate(self, k, constants, draws=None, seed=None):
        """
        Identity component of E pair(Π⁻_{0,kδg+δ0}, ψ^{λ_k}) under ``constants``, on the fit's draws by default.
        """
        if draws is None:
            draws, seed = self.draws, self.seed
        values = collect_pairings(self.setup, bphz_index(k), constants, self.schedule[k - 1], draws, self.runner)
        return McEstimate.from_samples(trace_projection(values, self.setup.lie.dim_v), seed, self.antithetic)

    def fit(self):
        constants = RenormConstants.zero()
        std_errors = []
        for k in LEVELS:
            estimate = self.level_estimate(k, constants)
            c_k = 0.0 - float(estimate.mean)
            constants = constants.with_value(k, c_k)
            std_errors.append(float(estimate.std_error))
            self.log.info(f"c_{k} = {c_k:.6g} ± {float(estimate.std_error):.2g}")
        constants = replace(constants, provenance="bphz", scale=self.lambda_bar, nsamples=self.nsamples, seed=self.seed)
        return BphzResult(
            constants,
            tuple(std_errors),
            self.setup.rho,
            self.lambda_bar,
            self.nsamples,
            self.seed,
            self.antithetic,
            self.schedule,
        )

    def closure(self, constants, seed=None):
        """
        Re-estimate every level with the fixed constants on fresh draws.

        ``seed`` defaults to the first seed past the fit's own draws. Passing the fit seed repeats its draws, and
        then every mean vanishes up to roundoff.
        """
        seed = self.seed + self.nsamples if seed is None else seed
        draws = sample_draws(self.nsamples, seed, self.antithetic)
        return [self.level_estimate(k, constants, draws, seed) for k in LEVELS]


def fix_bphz_constants(
    setup,
    schedule=None,
    nsamples=defaults.samples,
    seed=defaults.seed,
    antithetic=defaults.antithetic,
    runner=None,
):
    fitter = BphzFitter(setup, nsamples=nsamples, seed=seed, antithetic=antithetic, schedule=schedule, runner=runner)
    return fitter.fit().constants


def parity_discrepancy(setup, seed, beta, constants=None, flip_bracket=True):
    """
    Largest entry of Π⁻_{0β}[−ξ] − s·Π⁻_{0β}[ξ].

    With ``flip_bracket`` the negated sample is paired with the opposite algebra and s is
    :func:`parity_sign`; otherwise s is :func:`noise_parity_sign`, which needs vanishing odd constants.
    """
    plain = origin_minus(setup.instance(seed, 1.0, constants), beta)
    if flip_bracket:
        flipped = replace(setup, lie=setup.lie.opposite())
        sign = parity_sign(beta)
    else:
        flipped = setup
        sign = noise_parity_sign(beta)
    negated = origin_minus(flipped.instance(seed, -1.0, constants), beta)
    return (negated - plain * sign).max_abs(), plain.max_abs()


def reflection_discrepancy(setup, seed, beta, axis, constants=None):
    """
    Largest entry of Π⁻_{0β}[P_iξ(R_i·)] − P_i Π⁻_{0β}[ξ](R_i·) T_β, with T_β the reflection on W_β.
    """
    instance = setup.instance(seed, 1.0, constants)
    plain = origin_minus(instance, beta)
    reflected_noise = reflect_sample(instance.noise, axis, setup.lie.dim_k)
    reflected = origin_minus(setup.instance(seed, 1.0, constants, noise=reflected_noise), beta)
    expected = (
        plain.reflect(axis)
        .scale_axis(v_reflection_signs(axis, setup.lie.dim_k), 0)
        .scale_axis(reflection_signs(beta, axis, setup.lie.dim_v), 1)
    )
    return (reflected - expected).max_abs(), plain.max_abs()
