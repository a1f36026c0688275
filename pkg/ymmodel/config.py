"""
Run configuration: a flat ``key = value`` file with ``[section]`` headers.

    # comment
    [grid]
    nx = 8
    [grades]
    eps = 1/128
    [algebra]
    lie = custom
    dim_k = 3
    structure_constants = 0 1 2 1.0; 1 2 0 1.0; 2 0 1 1.0
    [model]
    base_points = 0 0 0 0; 1 1 0 0; 2 0 -1 1

Lists are separated by ``,`` or ``;``; points and structure-constant triples by ``;``.
"""

import os
import logging
from pathlib import Path
from fractions import Fraction
from dataclasses import dataclass, fields, replace

from ymmodel import defaults
from ymmodel.errors import ConfigError, LieAlgebraError, ModelError
from ymmodel.tensoralg import LieData
from ymmodel.indexcalc import GradedValue, HomParams
from ymmodel.fieldgrid import KernelSpec, ParabolicGrid
from ymmodel.model import MAX_GRADE_BOUND, ModelInstance, RenormConstants
from ymmodel.renorm import SampleSetup
from ymmodel.langevin import LangevinConfig, spatial_grid


log = logging.getLogger(__name__)


def parse_bool(text):
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got '{text}'")


def parse_fraction(text):
    return Fraction(text.strip())


def parse_number(text):
    text = text.strip()
    return float(Fraction(text)) if "/" in text else float(text)


def _split(text, separators=",;"):
    for separator in separators[1:]:
        text = text.replace(separator, separators[0])
    return [item.strip() for item in text.split(separators[0]) if item.strip()]


def parse_list(convert):
    def parse(text):
        return tuple(convert(item) for item in _split(text))

    return parse


def parse_points(text):
    points = []
    for item in _split(text, ";"):
        point = tuple(int(_) for _ in item.split())
        if len(point) != 4:
            raise ValueError(f"a base point needs four lattice coordinates, got '{item}'")
        points.append(point)
    return tuple(points)


def parse_triples(text):
    triples = []
    for item in _split(text, ";"):
        parts = item.split()
        if len(parts) != 4:
            raise ValueError(f"a structure constant is 'a b c value', got '{item}'")
        a, b, c = (int(_) for _ in parts[:3])
        triples.append((a, b, c, parse_number(parts[3])))
    return tuple(triples)


def parse_lie(text):
    value = text.strip().lower()
    if value not in ("su2", "abelian", "custom"):
        raise ValueError(f"unknown Lie algebra '{text}' (expected su2, abelian or custom)")
    return value


# (section, key) -> (field, parser)
SCHEMA = {
    ("grid", "nx"): ("nx", int),
    ("grid", "box_length"): ("box_length", parse_number),
    ("grid", "box_time"): ("box_time", parse_number),
    ("kernel", "mass"): ("mass", parse_number),
    ("algebra", "lie"): ("lie", parse_lie),
    ("algebra", "dim_k"): ("dim_k", int),
    ("algebra", "structure_constants"): ("structure_constants", parse_triples),
    ("grades", "eps"): ("eps", parse_fraction),
    ("grades", "eps_minus"): ("eps_minus", parse_fraction),
    ("grades", "bound"): ("bound", parse_fraction),
    ("model", "rho"): ("rho", parse_number),
    ("model", "seed"): ("seed", int),
    ("model", "base_points"): ("base_points", parse_points),
    ("model", "coupling"): ("coupling", parse_number),
    ("bphz", "lambda_bar"): ("lambda_bar", parse_number),
    ("bphz", "samples"): ("samples", int),
    ("bphz", "antithetic"): ("antithetic", parse_bool),
    ("bphz", "moment_order"): ("moment_order", int),
    ("bphz", "schedule"): ("schedule", parse_list(parse_number)),
    ("verify", "p"): ("p", parse_number),
    ("verify", "lambdas"): ("lambdas", int),
    ("verify", "halvings"): ("halvings", int),
    ("verify", "tolerance"): ("tolerance", parse_number),
    ("verify", "route_tolerance"): ("route_tolerance", parse_number),
    ("verify", "suites"): ("suites", parse_list(str)),
    ("langevin", "nx"): ("langevin_nx", int),
    ("langevin", "dt"): ("langevin_dt", parse_number),
    ("langevin", "horizon"): ("langevin_horizon", parse_number),
    ("langevin", "blowup"): ("langevin_blowup", parse_number),
    ("run", "workers"): ("workers", int),
    ("run", "out"): ("out", str),
}

SECTIONS = sorted({section for section, _ in SCHEMA})
SUITES = ("algebra", "translation", "symmetry", "stochastic", "weight", "pointwise")


@dataclass(frozen=True)
class RunConfig:
    nx: int = defaults.grid_nx
    box_length: float = defaults.box_length
    box_time: float = defaults.box_time
    mass: float = defaults.mass
    lie: str = defaults.lie_algebra
    dim_k: int = 3
    structure_constants: tuple = ()
    eps: Fraction = defaults.eps
    eps_minus: Fraction = defaults.eps_minus
    bound: Fraction = defaults.grade_bound
    rho: float = defaults.rho
    seed: int = defaults.seed
    base_points: tuple = tuple(defaults.base_points)
    coupling: float = defaults.coupling
    lambda_bar: float = defaults.lambda_bar
    samples: int = defaults.samples
    antithetic: bool = defaults.antithetic
    moment_order: int = defaults.moment_order
    schedule: tuple = ()
    p: float = defaults.lp_exponent
    lambdas: int = defaults.scaling_lambdas
    halvings: int = defaults.cauchy_halvings
    tolerance: float = defaults.algebra_tolerance
    route_tolerance: float = defaults.route_tolerance
    suites: tuple = ("algebra",)
    langevin_nx: int = defaults.langevin_nx
    langevin_dt: float = defaults.langevin_dt
    langevin_horizon: float = defaults.langevin_horizon
    langevin_blowup: float = defaults.langevin_blowup
    workers: int = defaults.workers
    out: str = None

    def with_overrides(self, **overrides):
        """
        Replace the given fields, skipping ``None`` so unset CLI flags keep the file values.
        """
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **overrides).validate()

    def validate(self):
        """
        Build every derived object once so errors surface before any computation.

        Raises:
            ConfigError: naming the offending key.
        """
        if self.lie not in ("su2", "abelian", "custom"):
            raise ConfigError(f"unknown Lie algebra '{self.lie}'", key="lie")
        checks = [
            ("eps", self.params),
            ("nx", self.grid),
            ("structure_constants", self.lie_data),
            ("mass", self.spec),
            ("langevin_nx", lambda: spatial_grid(self.langevin_nx, self.box_length)),
        ]
        for key, build in checks:
            try:
                build()
            except (ValueError, ZeroDivisionError, ModelError) as e:
                raise ConfigError(str(e), key=key)
        if self.grade_bound() > MAX_GRADE_BOUND:
            raise ConfigError(f"grade bound {self.bound} exceeds the supported maximum {MAX_GRADE_BOUND}", key="bound")
        if self.samples < 2:
            raise ConfigError(f"need at least two samples, got {self.samples}", key="samples")
        if self.antithetic and self.samples % 2:
            raise ConfigError(f"antithetic sampling needs an even sample count, got {self.samples}", key="samples")
        if self.rho < 0:
            raise ConfigError(f"mollification scale must be non-negative, got {self.rho}", key="rho")
        if self.schedule and (len(self.schedule) != 4 or any(s <= 0 for s in self.schedule)):
            raise ConfigError(f"schedule needs four positive scales, got {self.schedule}", key="schedule")
        if self.workers < 0:
            raise ConfigError(f"worker count must be non-negative, got {self.workers}", key="workers")
        unknown = [s for s in self.suites if s not in SUITES]
        if unknown:
            raise ConfigError(f"unknown suite(s) {unknown}, expected some of {list(SUITES)}", key="suites")
        return self

    @property
    def pool_size(self):
        # 0 means all available cores
        return self.workers or os.cpu_count() or 1

    def params(self):
        return HomParams(eps=self.eps, eps_minus=self.eps_minus)

    def grid(self):
        return ParabolicGrid.from_nx(self.nx, self.box_length, self.box_time)

    def spec(self):
        return KernelSpec(self.mass)

    def lie_data(self):
        if self.lie == "su2":
            return LieData.su2()
        if self.lie == "abelian":
            return LieData.abelian(self.dim_k)
        if not self.structure_constants:
            raise LieAlgebraError("a custom algebra needs structure_constants")
        return LieData.from_triples(self.dim_k, self.structure_constants)

    def grade_bound(self):
        return GradedValue(self.bound)

    def setup(self):
        return SampleSetup(
            self.grid(), lie=self.lie_data(), spec=self.spec(), rho=self.rho, bound=self.grade_bound(), params=self.params()
        )

    def instance(self, constants=None, seed=None):
        return ModelInstance(
            self.grid(),
            seed=self.seed if seed is None else seed,
            rho=self.rho,
            lie=self.lie_data(),
            spec=self.spec(),
            constants=constants,
            bound=self.grade_bound(),
            params=self.params(),
            base_points=self.base_points,
        )

    def langevin_config(self, constants=None, **overrides):
        settings = dict(
            grid=spatial_grid(self.langevin_nx, self.box_length),
            mass=self.mass,
            coupling=self.coupling,
            rho=self.rho,
            constants=constants if constants is not None else RenormConstants.zero(),
            horizon=self.langevin_horizon,
            dt=self.langevin_dt,
            seed=self.seed,
            lie=self.lie_data(),
            blowup=self.langevin_blowup,
        )
        settings.update(overrides)
        return LangevinConfig(**settings)

    def json(self):
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Fraction):
                value = str(value)
            elif isinstance(value, tuple):
                value = [list(v) if isinstance(v, tuple) else v for v in value]
            out[f.name] = value
        return out


def parse_config(text, source="<config>"):
    """
    Parse configuration text into a validated :class:`RunConfig`.

    Raises:
        ConfigError: with the line number and key of the first problem.
    """
    values = {}
    section = None
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{source}: malformed section header '{line}'", line=line_number)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"{source}: unknown section '{section}'", line=line_number)
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: expected 'key = value'", line=line_number)
        key, value = (_.strip() for _ in line.split("=", 1))
        if section is None:
            raise ConfigError(f"{source}: '{key}' appears before any section", line=line_number, key=key)
        try:
            name, convert = SCHEMA[(section, key)]
        except KeyError:
            raise ConfigError(f"{source}: unknown key in [{section}]", line=line_number, key=key)
        try:
            values[name] = convert(value)
        except (ValueError, ZeroDivisionError) as e:
            raise ConfigError(f"{source}: {e}", line=line_number, key=key)
        log.debug(f"{source}:{line_number} {section}.{key} = {values[name]!r}")
    return RunConfig(**values).validate()


def load_config(path=None):
    if path is None:
        return RunConfig().validate()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")
    return parse_config(text, source=str(path))
