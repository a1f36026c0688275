# set multiprocess start method to spawn
import multiprocessing

try:
    multiprocessing.set_start_method("spawn")
except RuntimeError:
    pass

from .indexcalc import MultiIndex, GradedValue, HomParams
from .tensoralg import LieData
from .fieldgrid import ParabolicGrid, GridField, KernelSpec
from .model import ModelInstance, RenormConstants

__all__ = [
    "MultiIndex",
    "GradedValue",
    "HomParams",
    "LieData",
    "ParabolicGrid",
    "GridField",
    "KernelSpec",
    "ModelInstance",
    "RenormConstants",
]
