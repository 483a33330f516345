"""Cell-centered meridian-plane grid, ghost layers, and weighted norms.

All fields live on the half-section (r, z) in (0, R) x (0, H) of a cylinder,
discretized with nr x nz cells and cell centers

    r_i = (i + 1/2) dr,   z_j = (j + 1/2) dz,

so no node sits on the axis r = 0 and every 1/r, 1/r**2, 1/r**4 coefficient is
finite at all nodes.  Arrays carry one ghost layer on each of the four sides;
the ghost-inclusive shape is (nr + 2, nz + 2) with the interior at
``[1:-1, 1:-1]`` and index 0 of axis 0 being the ghost column at r = -dr/2.

Integrals use the cylindrical measure r dr dz (the 2*pi factor is dropped
throughout), so the quadrature weight of cell (i, j) is w_ij = r_i dr dz and
``sum(w) == R**2 H / 2`` exactly.

Ghost closures are second-order midpoint relations on the boundary face:

    dirichlet(g):  (ghost + interior) / 2 == g
    neumann(g):    (ghost - interior) / dn == g      (outward normal derivative)
    robin(a, b):   a (ghost + interior) / 2 + b (ghost - interior) / dn == 0
    parity:        ghost == +-interior across the axis, per ``axis_parity``

Reductions (norms, integrals) use numpy's row-major pairwise summation over
the C-contiguous interior, so results are bit-reproducible run to run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class ConfigurationError(ValueError):
    """A field or problem is missing required setup (e.g. a bc descriptor)."""


@dataclass(frozen=True)
class BoundaryCondition:
    """One side's ghost-closure rule.

    kind is one of "dirichlet", "neumann", "robin", "parity".  For robin the
    closure is alpha*u + beta*du/dn = 0 on the face, with du/dn the outward
    normal derivative.  "parity" is only meaningful on the axis side and
    defers to the field's axis_parity tag.
    """

    kind: str
    value: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann", "robin", "parity"):
            raise ConfigurationError(f"unknown bc kind {self.kind!r}")


def dirichlet(value: float = 0.0) -> BoundaryCondition:
    return BoundaryCondition("dirichlet", value=float(value))


def neumann(value: float = 0.0) -> BoundaryCondition:
    return BoundaryCondition("neumann", value=float(value))


def robin(alpha: float, beta: float) -> BoundaryCondition:
    if beta == 0.0:
        raise ConfigurationError("robin bc needs beta != 0 (else use dirichlet)")
    return BoundaryCondition("robin", alpha=float(alpha), beta=float(beta))


def parity() -> BoundaryCondition:
    return BoundaryCondition("parity")


@dataclass(frozen=True)
class BoundarySet:
    """Ghost closures for the four sides of the meridian rectangle."""

    axis: BoundaryCondition
    outer: BoundaryCondition
    bottom: BoundaryCondition
    top: BoundaryCondition


@dataclass(frozen=True)
class MeridianGrid:
    """Uniform cell-centered mesh of (0, R) x (0, H) with one ghost layer."""

    nr: int
    nz: int
    R: float = 1.0
    H: float = 1.0

    def __post_init__(self):
        if self.nr < 1 or self.nz < 1:
            raise ConfigurationError("nr and nz must be positive")
        if not (self.R > 0 and self.H > 0):
            raise ConfigurationError("R and H must be positive")

    @property
    def dr(self) -> float:
        return self.R / self.nr

    @property
    def dz(self) -> float:
        return self.H / self.nz

    @property
    def r(self) -> np.ndarray:
        """Cell-center radii, shape (nr,); all strictly positive."""
        return (np.arange(self.nr) + 0.5) * self.dr

    @property
    def z(self) -> np.ndarray:
        """Cell-center heights, shape (nz,)."""
        return (np.arange(self.nz) + 0.5) * self.dz

    @property
    def r_faces(self) -> np.ndarray:
        """Radial face positions 0, dr, ..., R, shape (nr + 1,)."""
        return np.arange(self.nr + 1) * self.dr

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights w_ij = r_i dr dz, broadcastable shape (nr, 1)."""
        return (self.r * self.dr * self.dz)[:, None]

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.r, self.z, indexing="ij")


@dataclass
class ScalarField:
    """One scalar unknown on a MeridianGrid.

    data has ghost-inclusive shape (nr + 2, nz + 2).  axis_parity records how
    the underlying smooth function behaves under r -> -r ("even" or "odd");
    it drives the axis ghost fill when the axis bc kind is "parity".  bc may
    be None for derived/diagnostic fields that never need a ghost fill.
    ghosts_valid is maintained by :func:`fill_ghosts` and ``set_interior``.
    """

    grid: MeridianGrid
    data: np.ndarray
    axis_parity: str = "even"
    bc: Optional[BoundarySet] = None
    ghosts_valid: bool = False

    def __post_init__(self):
        expected = (self.grid.nr + 2, self.grid.nz + 2)
        if self.data.shape != expected:
            raise ValueError(f"field shape {self.data.shape} != {expected}")
        if self.axis_parity not in ("even", "odd"):
            raise ValueError(f"axis_parity must be 'even' or 'odd', got {self.axis_parity!r}")

    @classmethod
    def zeros(cls, grid: MeridianGrid, axis_parity: str = "even",
              bc: Optional[BoundarySet] = None) -> "ScalarField":
        return cls(grid, np.zeros((grid.nr + 2, grid.nz + 2)), axis_parity, bc)

    @classmethod
    def from_interior(cls, grid: MeridianGrid, values: np.ndarray,
                      axis_parity: str = "even",
                      bc: Optional[BoundarySet] = None) -> "ScalarField":
        f = cls.zeros(grid, axis_parity, bc)
        f.data[1:-1, 1:-1] = values
        return f

    @classmethod
    def from_function(cls, grid: MeridianGrid, fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
                      axis_parity: str = "even",
                      bc: Optional[BoundarySet] = None) -> "ScalarField":
        """Sample fn(r, z) at interior cell centers (ghosts left unfilled)."""
        rr, zz = grid.meshgrid()
        return cls.from_interior(grid, np.asarray(fn(rr, zz), dtype=float), axis_parity, bc)

    @property
    def interior(self) -> np.ndarray:
        """View of the interior values, shape (nr, nz)."""
        return self.data[1:-1, 1:-1]

    def set_interior(self, values: np.ndarray) -> None:
        self.data[1:-1, 1:-1] = values
        self.ghosts_valid = False

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.data.copy(), self.axis_parity, self.bc,
                           self.ghosts_valid)


def _ghost_factor(bc: BoundaryCondition, dn: float) -> tuple[float, float]:
    """Return (s, c) so that ghost = s * interior + c for a homogeneous-form
    midpoint closure on a face with spacing dn."""
    if bc.kind == "dirichlet":
        return -1.0, 2.0 * bc.value
    if bc.kind == "neumann":
        return 1.0, bc.value * dn
    if bc.kind == "robin":
        q = bc.alpha * dn / (2.0 * bc.beta)
        return (1.0 - q) / (1.0 + q), 0.0
    raise ConfigurationError(f"no ghost closure for bc kind {bc.kind!r}")


def fill_ghosts(f: ScalarField) -> ScalarField:
    """Populate the ghost layer so every discrete bc relation holds exactly.

    The radial sides are filled first on interior rows, then the vertical
    sides are filled on every column including the fresh ghost columns, which
    defines the four corner ghosts (needed by cross-derivative stencils).
    Idempotent: filling twice changes nothing.
    """
    if f.bc is None:
        raise ConfigurationError("field has no bc descriptor")
    d = f.data
    dr, dz = f.grid.dr, f.grid.dz

    ax = f.bc.axis
    if ax.kind == "parity":
        sign = 1.0 if f.axis_parity == "even" else -1.0
        d[0, 1:-1] = sign * d[1, 1:-1]
    else:
        s, c = _ghost_factor(ax, dr)
        d[0, 1:-1] = s * d[1, 1:-1] + c

    s, c = _ghost_factor(f.bc.outer, dr)
    d[-1, 1:-1] = s * d[-2, 1:-1] + c

    s, c = _ghost_factor(f.bc.bottom, dz)
    d[:, 0] = s * d[:, 1] + c
    s, c = _ghost_factor(f.bc.top, dz)
    d[:, -1] = s * d[:, -2] + c

    f.ghosts_valid = True
    return f


def _check_finite(f: ScalarField) -> None:
    if not np.isfinite(f.interior).all():
        raise ValueError("non-finite field")


def weighted_lp_norm(f: ScalarField, p: float) -> float:
    """L^p norm with the cylindrical weight: (sum |f|^p r dr dz)^(1/p).

    Midpoint-rule quadrature over cell centers; second-order accurate for
    smooth integrands.  Non-integer and odd p use |f|^p pointwise.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    _check_finite(f)
    vals = np.abs(f.interior) ** p * f.grid.weights
    return float(np.sum(vals) ** (1.0 / p))


def linf_norm(f: ScalarField) -> float:
    """Nodal sup norm max |f_ij| over interior cells."""
    _check_finite(f)
    return float(np.abs(f.interior).max())


def integrate(f: ScalarField) -> float:
    """Integral of f against the cylindrical measure r dr dz."""
    _check_finite(f)
    return float(np.sum(f.interior * f.grid.weights))
