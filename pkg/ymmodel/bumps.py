"""
Compactly supported bump profiles, their lattice discretizations, and test functions.

All profiles live on parabolic balls B_R = {t² + x₁⁴ + x₂⁴ + x₃⁴ < R⁴}. A profile is sampled on the lattice
at scale λ as φ^λ(y) = λ^{-5} φ(t/λ², x̄/λ) and then normalized discretely, so that lattice sums reproduce
the declared mass and vanishing moments exactly.
"""

import logging
import numpy as np
from functools import lru_cache
from dataclasses import dataclass

from ymmodel import defaults
from ymmodel.errors import BumpConstructionError, SupportError
from ymmodel.indexcalc import multi_indices_upto, parabolic_degree


log = logging.getLogger(__name__)

PARABOLIC_DIM = 5
# ω is supported in B_{1/6}, so that ψ = ω(2)∗ω is supported in B_{1/2}
OMEGA_RADIUS = 1 / 6


def parabolic_radius4(t, x1, x2, x3):
    return t**2 + x1**4 + x2**4 + x3**4


def bump_profile(t, x1, x2, x3, radius=1.0):
    """
    exp(−1/(1 − |x|⁴/R⁴)) inside B_R, zero outside; even in every coordinate.
    """
    u = np.asarray(parabolic_radius4(t, x1, x2, x3) / radius**4, dtype=float)
    out = np.zeros(u.shape)
    inside = u < 1
    out[inside] = np.exp(-1.0 / (1.0 - u[inside]))
    return out


def smooth_step(s):
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        rise = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        fall = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return rise / (rise + fall)


def cutoff_profile(t, x1, x2, x3):
    """
    The kernel cutoff ς: identically 1 on B_{1/2}, supported in B_1, smooth in between.
    """
    u = np.asarray(parabolic_radius4(t, x1, x2, x3), dtype=float)
    return smooth_step((1.0 - u) / (1.0 - 1.0 / 16))


@dataclass(frozen=True, eq=False)
class PatchWeights:
    """
    A lattice stencil: integer offsets ``(P, 4)`` with real weights ``(P,)``.
    """

    offsets: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.weights)

    def mass(self, vol):
        return float(self.weights.sum() * vol)

    def moment(self, m, spacing, vol):
        ht, hx = spacing
        coords = self.offsets * np.array([ht, hx, hx, hx])
        monomial = np.prod(coords ** np.asarray(m), axis=1)
        return float((self.weights * monomial).sum() * vol)

    def extent(self):
        """
        Largest absolute offset per axis, in cells.
        """
        if not len(self):
            return np.zeros(4, dtype=int)
        return np.abs(self.offsets).max(axis=0)

    def scaled(self, factor):
        return PatchWeights(self.offsets, self.weights * factor)

    def convolve(self, other, vol):
        """
        Discrete convolution Σ_z a(z) b(y − z) vol of two patches.
        """
        offsets = (self.offsets[:, None, :] + other.offsets[None, :, :]).reshape(-1, 4)
        weights = (self.weights[:, None] * other.weights[None, :]).reshape(-1) * vol
        return merge_patches(offsets, weights)

    def reflect(self, axis):
        offsets = self.offsets.copy()
        offsets[:, axis] *= -1
        return PatchWeights(offsets, self.weights.copy())


def merge_patches(offsets, weights):
    """
    Sum the weights of repeated offsets and drop zeros.
    """
    if not len(weights):
        return PatchWeights(np.zeros((0, 4), dtype=int), np.zeros(0))
    unique, inverse = np.unique(offsets, axis=0, return_inverse=True)
    summed = np.bincount(inverse.reshape(-1), weights=weights, minlength=len(unique))
    keep = summed != 0
    return PatchWeights(unique[keep].astype(int), summed[keep])


def sample_profile(profile, spacing, scale, radius):
    """
    Sample ``profile`` rescaled to ``scale`` on every lattice offset of its support.

    Args:
        profile (callable): vectorized ``profile(t, x1, x2, x3)``.
        spacing (tuple): ``(ht, hx)``.
        scale (float): the λ of φ^λ.
        radius (float): the profile is supported in B_radius.

    Returns:
        PatchWeights: nonzero samples of λ^{-5} φ(t/λ², x̄/λ).
    """
    ht, hx = spacing
    t_cells = int(np.ceil(scale**2 * radius**2 / ht))
    x_cells = int(np.ceil(scale * radius / hx))
    t_range = np.arange(-t_cells, t_cells + 1)
    x_range = np.arange(-x_cells, x_cells + 1)
    grid = np.stack(np.meshgrid(t_range, x_range, x_range, x_range, indexing="ij"), axis=-1).reshape(-1, 4)
    values = profile(
        grid[:, 0] * ht / scale**2, grid[:, 1] * hx / scale, grid[:, 2] * hx / scale, grid[:, 3] * hx / scale
    )
    values = np.asarray(values, dtype=float) * scale ** (-PARABOLIC_DIM)
    keep = values != 0
    return PatchWeights(grid[keep], values[keep])


def normalized_bump(spacing, scale, radius=1.0):
    patch = sample_profile(lambda *a: bump_profile(*a, radius=radius), spacing, scale, radius)
    vol = spacing[0] * spacing[1] ** 3
    return patch.scaled(1.0 / patch.mass(vol))


@dataclass(frozen=True)
class BumpFamily:
    """
    The bump functions used throughout: kernel cutoff ς, mollifier η, moment-cancelling ω, and ψ = ω(2)∗ω.

    ``omega_scales`` and ``omega_coefficients`` describe ω = Σ_j a_j b_{s_j} with each b_s a unit-mass bump
    supported in B_{s/6}.
    """

    r: int
    omega_scales: tuple
    omega_coefficients: tuple

    cutoff = staticmethod(cutoff_profile)

    @staticmethod
    def mollifier(t, x1, x2, x3):
        return bump_profile(t, x1, x2, x3, radius=1.0)

    @property
    def moment_degrees(self):
        return tuple(range(2, self.r, 2))

    def omega(self, spacing, scale):
        """
        ω^λ on the lattice, with coefficients re-solved against the discrete moments.
        """
        vol = spacing[0] * spacing[1] ** 3
        components = [normalized_bump(spacing, scale, OMEGA_RADIUS * s) for s in self.omega_scales]
        moments = [m for m in multi_indices_upto(self.r - 1) if parabolic_degree(m) > 0]
        rows = [[c.mass(vol) for c in components]]
        targets = [1.0]
        for m in moments:
            rows.append([c.moment(m, spacing, vol) for c in components])
            targets.append(0.0)
        coefficients, *_ = np.linalg.lstsq(np.array(rows), np.array(targets), rcond=None)
        omega = merge_patches(
            np.concatenate([p.offsets for p in components]),
            np.concatenate([a * p.weights for a, p in zip(coefficients, components)]),
        )
        mass = omega.mass(vol)
        if abs(mass) < 1e-12:
            raise BumpConstructionError(f"discrete ω has vanishing mass at scale {scale}")
        return omega.scaled(1.0 / mass)

    def psi(self, spacing, scale):
        """
        ψ^λ = (ω rescaled by 2)^λ ∗ ω^λ, a discrete convolution with unit mass.
        """
        vol = spacing[0] * spacing[1] ** 3
        return self.omega(spacing, 2 * scale).convolve(self.omega(spacing, scale), vol)

    def json(self):
        return {
            "r": self.r,
            "omega_scales": list(self.omega_scales),
            "omega_coefficients": list(self.omega_coefficients),
        }


@lru_cache(maxsize=None)
def bump_functions(r=defaults.moment_order):
    """
    Build the bump family for smoothness class ``r``.

    ω is an even combination of unit-mass bumps at scales s_j = 2^{-j}. Its moments of parabolic degree q
    scale like s^q, so the vanishing of every moment with 0 < |m| ≤ r−1 is a Vandermonde system in s²
    over the even degrees (odd moments vanish by evenness).

    Raises:
        BumpConstructionError: if r < 3 or the moment system is singular.
    """
    if r < 3:
        raise BumpConstructionError(f"smoothness class r={r} is too small (need r ≥ 3)")
    degrees = [0] + list(range(2, r, 2))
    scales = [2.0**-j for j in range(len(degrees))]
    system = np.array([[s**q for s in scales] for q in degrees])
    if np.linalg.cond(system) > 1e12:
        raise BumpConstructionError(f"moment system for r={r} is singular")
    targets = np.zeros(len(degrees))
    targets[0] = 1.0
    coefficients = np.linalg.solve(system, targets)
    log.debug(f"ω coefficients for r={r}: {coefficients}")
    return BumpFamily(r, tuple(scales), tuple(float(c) for c in coefficients))


@lru_cache(maxsize=256)
def _profile_patch(profile, spacing, scale, r):
    if profile == "bump":
        return normalized_bump(spacing, scale)
    family = bump_functions(r)
    if profile == "omega":
        return family.omega(spacing, scale)
    if profile == "psi":
        return family.psi(spacing, scale)
    raise ValueError(f"unknown test function profile '{profile}'")


@dataclass(frozen=True)
class TestFunction:
    """
    φ^λ_x for one of the built-in profiles: ``bump`` (unit mass, B_1), ``omega`` or ``psi``.
    """

    __test__ = False

    profile: str = "bump"
    scale: float = 1.0
    center: tuple = (0, 0, 0, 0)
    r: int = defaults.moment_order

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError(f"test function scale must be positive, got {self.scale}")
        object.__setattr__(self, "center", tuple(int(_) for _ in self.center))

    def patch(self, grid):
        return _profile_patch(self.profile, (grid.ht, grid.hx), float(self.scale), self.r)

    def at(self, center):
        return TestFunction(self.profile, self.scale, center, self.r)

    def check_support(self, grid):
        extent = self.patch(grid).extent()
        if any(2 * e >= n for e, n in zip(extent, grid.sizes)):
            raise SupportError(f"{self} does not fit the {grid} torus (extent {tuple(extent)} cells)")
