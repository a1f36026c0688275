import pytest
import shutil
import logging
import tempfile
from pathlib import Path

from ymmodel.tensoralg import LieData
from ymmodel.renorm import SampleSetup
from ymmodel.fieldgrid import ParabolicGrid


log = logging.getLogger("ymmodel.tests")

# 8 x 4^3 lattice with hx = 0.6, ht = 0.36: the kernel cutoff and the ψ test functions embed in the torus
SMALL_GRID = dict(nx=4, box_length=2.4, box_time=2.88)
SMALL_RHO = 0.9

small_config = """
# small lattice used throughout the tests
[grid]
nx = 4
box_length = 2.4
box_time = 2.88

[algebra]
lie = su2

[model]
rho = 0.9
seed = 7
base_points = 0 0 0 0; 1 1 0 0; 2 0 -1 1

[bphz]
samples = 4
lambda_bar = 1.0

[verify]
suites = algebra

[run]
workers = 1
"""


def small_grid():
    return ParabolicGrid.from_nx(**SMALL_GRID)


@pytest.fixture
def grid():
    return small_grid()


@pytest.fixture
def su2():
    return LieData.su2()


@pytest.fixture
def abelian():
    return LieData.abelian()


@pytest.fixture
def sample_setup(grid, su2):
    return SampleSetup(grid, lie=su2, rho=SMALL_RHO)


@pytest.fixture
def abelian_sample_setup(grid, abelian):
    return SampleSetup(grid, lie=abelian, rho=SMALL_RHO)


@pytest.fixture
def temp_dir():
    tempdir = Path(tempfile.gettempdir()) / ".ymmodel-test"
    tempdir.mkdir(parents=True, exist_ok=True)
    yield tempdir
    shutil.rmtree(tempdir, ignore_errors=True)


@pytest.fixture
def config_file(temp_dir):
    path = temp_dir / "small.conf"
    path.write_text(small_config)
    return path
