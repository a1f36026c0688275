import pytest
from fractions import Fraction

from .helpers import *


def test_parse_small_config():
    from ymmodel.config import parse_config

    config = parse_config(small_config)
    assert config.nx == 4
    assert config.box_length == 2.4
    assert config.rho == 0.9
    assert config.seed == 7
    assert config.samples == 4
    assert config.base_points == ((0, 0, 0, 0), (1, 1, 0, 0), (2, 0, -1, 1))
    assert config.suites == ("algebra",)
    # untouched keys keep their defaults
    assert config.eps == Fraction(1, 128)
    assert config.antithetic is True

    assert config.grid().sizes == (8, 4, 4, 4)
    assert config.lie_data().name == "su2"
    setup = config.setup()
    assert setup.rho == 0.9
    instance = config.instance(seed=3)
    assert instance.seed == 3
    assert instance.base_points == [(0, 0, 0, 0), (1, 1, 0, 0), (2, 0, -1, 1)]
    assert config.instance().seed == 7

    langevin = config.langevin_config(horizon=0.1)
    assert langevin.horizon == 0.1
    assert langevin.grid.sizes == (1, 8, 8, 8)
    assert langevin.grid.hx == pytest.approx(0.3)

    data = config.json()
    assert data["eps"] == "1/128"
    assert data["base_points"][1] == [1, 1, 0, 0]
    assert data["out"] is None


def test_parse_values():
    from ymmodel.config import parse_config, parse_bool, parse_number, parse_points, parse_triples

    assert parse_bool("Yes") is True
    assert parse_bool("off") is False
    with pytest.raises(ValueError):
        parse_bool("maybe")
    assert parse_number("1/4") == 0.25
    assert parse_number(" 2.5 ") == 2.5
    assert parse_points("0 0 0 0; 1 -1 0 2") == ((0, 0, 0, 0), (1, -1, 0, 2))
    with pytest.raises(ValueError):
        parse_points("0 0 0")
    assert parse_triples("0 1 2 1.0; 1 2 0 1/2") == ((0, 1, 2, 1.0), (1, 2, 0, 0.5))

    text = """
    [grades]
    eps = 1/256     # finer surrogate
    eps_minus = 1/32768
    bound = 3/2
    [bphz]
    antithetic = no
    samples = 3
    schedule = 1, 0.5; 0.25, 0.125
    [algebra]
    lie = custom
    dim_k = 3
    structure_constants = 0 1 2 1.0; 1 2 0 1.0; 2 0 1 1.0
    [run]
    workers = 0
    """
    config = parse_config(text)
    assert config.params().eps == Fraction(1, 256)
    assert config.grade_bound().r == Fraction(3, 2)
    assert config.antithetic is False
    assert config.samples == 3
    assert config.schedule == (1.0, 0.5, 0.25, 0.125)
    assert config.lie_data().name == "custom"
    assert config.lie_data().jacobi_residual() == 0.0
    assert config.pool_size >= 1


@pytest.mark.parametrize(
    "text, line, key",
    [
        ("[grid]\nnx = four\n", 2, "nx"),
        ("[grid]\nwidth = 4\n", 2, "width"),
        ("nx = 4\n", 1, "nx"),
        ("[colors]\n", 1, None),
        ("[grid\n", 1, None),
        ("[grid]\nnx\n", 2, None),
        ("# comment\n[model]\nbase_points = 0 0 0; 1 1 1 1\n", 3, "base_points"),
        ("[grades]\neps = 1/0\n", 2, "eps"),
    ],
)
def test_parse_errors(text, line, key):
    from ymmodel.errors import ConfigError
    from ymmodel.config import parse_config

    with pytest.raises(ConfigError) as excinfo:
        parse_config(text, source="bad.conf")
    assert excinfo.value.line == line
    assert excinfo.value.key == key
    assert f"line {line}" in str(excinfo.value)
    assert "bad.conf" in str(excinfo.value)


@pytest.mark.parametrize(
    "text, key",
    [
        ("[bphz]\nsamples = 3\n", "samples"),
        ("[bphz]\nsamples = 1\nantithetic = false\n", "samples"),
        ("[bphz]\nschedule = 1, 1, 1\n", "schedule"),
        ("[model]\nrho = -0.1\n", "rho"),
        ("[grades]\nbound = 4\n", "bound"),
        ("[grades]\neps = 1/100\neps_minus = 1/10\n", "eps"),
        ("[algebra]\nlie = custom\n", "structure_constants"),
        ("[algebra]\nlie = custom\nstructure_constants = 0 1 2 1.0; 1 2 1 1.0\n", "structure_constants"),
        ("[algebra]\nlie = e8\n", "lie"),
        ("[verify]\nsuites = algebra, everything\n", "suites"),
        ("[run]\nworkers = -1\n", "workers"),
        ("[grid]\nbox_length = 4.0\nnx = 8\nbox_time = 1.1\n", "nx"),
    ],
)
def test_validation_errors(text, key):
    from ymmodel.errors import ConfigError
    from ymmodel.config import parse_config

    with pytest.raises(ConfigError) as excinfo:
        parse_config(text)
    assert excinfo.value.key == key


def test_overrides_and_load(config_file, temp_dir):
    from ymmodel.errors import ConfigError
    from ymmodel.config import RunConfig, load_config

    config = load_config(config_file)
    assert config.nx == 4
    overridden = config.with_overrides(seed=11, rho=None, samples=6)
    assert overridden.seed == 11
    assert overridden.rho == 0.9
    assert overridden.samples == 6
    assert config.seed == 7
    with pytest.raises(ConfigError):
        config.with_overrides(samples=5)

    assert load_config() == RunConfig()
    with pytest.raises(ConfigError):
        load_config(temp_dir / "missing.conf")


def test_default_pool_size(config_file):
    import os
    from ymmodel.config import RunConfig, load_config

    config = RunConfig()
    assert config.workers == 0
    assert config.pool_size == (os.cpu_count() or 1)
    assert config.with_overrides(workers=3).pool_size == 3
    assert load_config(config_file).pool_size == 1
