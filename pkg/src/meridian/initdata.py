"""Boundary-compatible, axis-regular initial data families.

Every family is built from two closed-form bases whose boundary behavior is
exact by construction:

    swirl circulation:   r**2 (R**2 - r**2)**2 (r/R)**(2n) cos(k pi z / H)
    scaled vorticity:    (R**2 - r**2) (r/R)**(2n) sin(m pi z / H)

The swirl factor has a double root at r = R (zero radial derivative there),
vanishes like r**2 at the axis, and its z-derivative vanishes on the
horizontal sides; the vorticity factor vanishes on the three true boundary
sides and is even in r.  Closed forms make every compatibility check and
every rescaling exactly computable.

``rescaled`` pulls a family through the natural rescaling
v -> lam v(lam x, lam**2 t): on the shrunken cylinder (R/lam, H/lam) the
swirl circulation is scale-degree 0, gamma_lam(r, z) = gamma(lam r, lam z),
while the scaled vorticity picks up lam**3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .diagnostics import BoundConstants, smallness_from_fields
from .dynamics import FAMILIES, FlowState
from .grid import MeridianGrid


@dataclass(frozen=True)
class DataFamily:
    """Tag plus amplitude/wavenumber parameters of one initial-data family.

    A scales the swirl circulation, B the scaled vorticity.  For the
    deterministic families k and m are the single vertical wavenumbers; for
    random_smooth they are the mode cutoffs and ``seed`` feeds the
    coefficient generator.
    """

    tag: str
    A: float = 0.1
    B: float = 0.1
    k: int = 1
    m: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.tag not in FAMILIES:
            raise ValueError(f"unknown family tag {self.tag!r}")
        if self.k < 1 or self.m < 1:
            raise ValueError("wavenumbers must be positive")
        if not (math.isfinite(self.A) and math.isfinite(self.B)):
            raise ValueError("amplitudes must be finite")


def _gamma_mode(R: float, H: float, n: int, k: int) -> Callable:
    def fn(r, z):
        return r**2 * (R**2 - r**2) ** 2 * (r / R) ** (2 * n) \
            * np.cos(k * np.pi * z / H)
    return fn


def _omega_mode(R: float, H: float, n: int, m: int) -> Callable:
    def fn(r, z):
        return (R**2 - r**2) * (r / R) ** (2 * n) * np.sin(m * np.pi * z / H)
    return fn


def analytic_fields(family: DataFamily, R: float, H: float) -> tuple[Callable, Callable]:
    """Closed-form (gamma, omega) generators for extents (R, H).

    The random_smooth coefficients are drawn in a fixed order (radial factor
    outer, vertical mode inner; swirl before vorticity), so a seed pins the
    fields exactly.
    """
    tag = family.tag
    if tag in ("poly_swirl", "combined", "poly_vorticity", "swirl_free"):
        g_modes = [(family.A, _gamma_mode(R, H, 0, family.k))] \
            if tag in ("poly_swirl", "combined") else []
        w_modes = [(family.B, _omega_mode(R, H, 0, family.m))] \
            if tag in ("poly_vorticity", "combined", "swirl_free") else []
    elif tag == "random_smooth":
        rng = np.random.default_rng(family.seed)
        g_modes = []
        for n in (0, 1):
            for k in range(1, family.k + 1):
                g_modes.append((family.A * rng.standard_normal() / (2 * family.k),
                                _gamma_mode(R, H, n, k)))
        w_modes = []
        for n in (0, 1):
            for m in range(1, family.m + 1):
                w_modes.append((family.B * rng.standard_normal() / (2 * family.m),
                                _omega_mode(R, H, n, m)))
    else:  # pragma: no cover - DataFamily already validates
        raise ValueError(f"unknown family tag {tag!r}")

    def gamma_fn(r, z):
        total = np.zeros(np.broadcast(r, z).shape)
        for c, fn in g_modes:
            total += c * fn(r, z)
        return total

    def omega_fn(r, z):
        total = np.zeros(np.broadcast(r, z).shape)
        for c, fn in w_modes:
            total += c * fn(r, z)
        return total

    return gamma_fn, omega_fn


def make_initial(family: DataFamily, grid: MeridianGrid) -> FlowState:
    """Sample the family at cell centers; the returned state has both ghost
    layers filled and satisfies its bc relations exactly."""
    gamma_fn, omega_fn = analytic_fields(family, grid.R, grid.H)
    rr, zz = grid.meshgrid()
    return FlowState.create(grid, gamma_fn(rr, zz), omega_fn(rr, zz))


def rescaled(family: DataFamily, lam: float, grid: MeridianGrid) -> FlowState:
    """The family pulled through v -> lam v(lam x), living on the shrunken
    cylinder (R/lam, H/lam) at the same cell counts."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    gamma_fn, omega_fn = analytic_fields(family, grid.R, grid.H)
    shrunk = MeridianGrid(grid.nr, grid.nz, grid.R / lam, grid.H / lam)
    rr, zz = shrunk.meshgrid()
    return FlowState.create(shrunk, gamma_fn(lam * rr, lam * zz),
                            lam**3 * omega_fn(lam * rr, lam * zz))


def amplitude_for_smallness(family: DataFamily, grid: MeridianGrid,
                            consts: BoundConstants, target: float = 0.25,
                            rtol: float = 1e-10) -> float:
    """Joint amplitude multiplier alpha so that the family scaled to
    (alpha A, alpha B) has smallness quantity equal to ``target``.

    The smallness quantity is continuous, strictly increasing in the joint
    amplitude for nonzero data, zero at zero amplitude and unbounded, so
    bisection always lands.
    """
    def s_of(alpha: float) -> float:
        fam = replace(family, A=alpha * family.A, B=alpha * family.B)
        state = make_initial(fam, grid)
        return smallness_from_fields(state.gamma, state.omega, consts)

    if s_of(1.0) == 0.0:
        raise ValueError("family generates zero data; no amplitude matches")
    lo, hi = 0.0, 1.0
    while s_of(hi) < target:
        hi *= 2.0
        if hi > 1e12:
            raise ValueError("amplitude search diverged")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * hi:
            break
        if s_of(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
