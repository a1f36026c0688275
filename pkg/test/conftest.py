import pytest

from .helpers import *
