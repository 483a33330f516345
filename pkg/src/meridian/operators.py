"""Discrete cylindrical differential operators on meridian-plane fields.

All stencils are centered 5-point (plus the corner-using cross derivative)
and second-order accurate.  The radial part of the cylindrical Laplacian is
written in conservative flux form,

    (1/r_i) [ r_{i+1/2} (f_{i+1} - f_i) - r_{i-1/2} (f_i - f_{i-1}) ] / dr**2,

which keeps the discrete divergence-theorem structure that the energy and
maximum-principle identities rely on: summed against the cylindrical weight
it telescopes to pure boundary terms.  At the axis cell the inner face sits
at r = 0 so its flux coefficient vanishes identically and the axis ghost
never enters the conservative radial part.

The first-order drift (2/r) d/dr is discretized non-conservatively with a
plain centered difference; it carries a sign rather than a cancellation, so
conservativity buys nothing there.

Every operator requires the input field's ghosts to be filled and returns
fields with ``bc=None`` (derived quantities; fill their ghosts only after
attaching a descriptor).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import MeridianGrid, ScalarField


@dataclass
class MeridianVector:
    """In-plane vector field b = b_r e_r + b_z e_z on one grid."""

    r_component: ScalarField
    z_component: ScalarField

    def __post_init__(self):
        if self.r_component.grid is not self.z_component.grid and \
           self.r_component.grid != self.z_component.grid:
            raise ValueError("vector components live on different grids")

    @property
    def grid(self) -> MeridianGrid:
        return self.r_component.grid


@dataclass
class HessianParts:
    """The four distinct entries of the cylindrical Hessian of an
    axisymmetric scalar: d2/dr2, (1/r) d/dr, d2/dz2 and the mixed d2/drdz.
    The squared Frobenius norm weights the mixed entry twice."""

    d2_rr: ScalarField
    dr_over_r: ScalarField
    d2_zz: ScalarField
    d2_rz: ScalarField


def _require_ghosts(f: ScalarField) -> None:
    if not f.ghosts_valid:
        raise ValueError("ghost layer not filled (call fill_ghosts first)")


def _ddr(data: np.ndarray, dr: float) -> np.ndarray:
    return (data[2:, 1:-1] - data[:-2, 1:-1]) / (2.0 * dr)


def _ddz(data: np.ndarray, dz: float) -> np.ndarray:
    return (data[1:-1, 2:] - data[1:-1, :-2]) / (2.0 * dz)


def _d2r(data: np.ndarray, dr: float) -> np.ndarray:
    return (data[2:, 1:-1] - 2.0 * data[1:-1, 1:-1] + data[:-2, 1:-1]) / dr**2


def _d2z(data: np.ndarray, dz: float) -> np.ndarray:
    return (data[1:-1, 2:] - 2.0 * data[1:-1, 1:-1] + data[1:-1, :-2]) / dz**2


def _d2rz(data: np.ndarray, dr: float, dz: float) -> np.ndarray:
    return (data[2:, 2:] - data[2:, :-2] - data[:-2, 2:] + data[:-2, :-2]) \
        / (4.0 * dr * dz)


def _lap_cyl(data: np.ndarray, grid: MeridianGrid) -> np.ndarray:
    r = grid.r[:, None]
    rf = grid.r_faces
    up = rf[1:][:, None]
    lo = rf[:-1][:, None]
    rad = (up * (data[2:, 1:-1] - data[1:-1, 1:-1])
           - lo * (data[1:-1, 1:-1] - data[:-2, 1:-1])) / (r * grid.dr**2)
    return rad + _d2z(data, grid.dz)


def _derived(f: ScalarField, values: np.ndarray, parity: str) -> ScalarField:
    return ScalarField.from_interior(f.grid, values, axis_parity=parity, bc=None)


def _flip(parity: str) -> str:
    return "odd" if parity == "even" else "even"


def grad_meridian(f: ScalarField) -> MeridianVector:
    """Centered in-plane gradient (df/dr, df/dz)."""
    _require_ghosts(f)
    return MeridianVector(
        _derived(f, _ddr(f.data, f.grid.dr), _flip(f.axis_parity)),
        _derived(f, _ddz(f.data, f.grid.dz), f.axis_parity),
    )


def laplacian_cyl(f: ScalarField) -> ScalarField:
    """Axisymmetric scalar Laplacian d2/dr2 + (1/r) d/dr + d2/dz2,
    conservative radial flux form."""
    _require_ghosts(f)
    return _derived(f, _lap_cyl(f.data, f.grid), f.axis_parity)


def laplacian_cyl4(f: ScalarField) -> ScalarField:
    """laplacian_cyl plus the (2/r) d/dr drift; equals the radial Laplacian
    of R^4 plus a vertical second derivative: d2/dr2 + (3/r) d/dr + d2/dz2."""
    _require_ghosts(f)
    drift = (2.0 / f.grid.r[:, None]) * _ddr(f.data, f.grid.dr)
    return _derived(f, _lap_cyl(f.data, f.grid) + drift, f.axis_parity)


def advect(b: MeridianVector, f: ScalarField) -> ScalarField:
    """Drift term b_r df/dr + b_z df/dz with centered differences.

    Skew-symmetry against the cylindrical weight (up to O(h^2)) requires b to
    be discretely divergence-free with zero normal flux, as delivered by
    :func:`meridian.elliptic.velocity_from_stream`.
    """
    _require_ghosts(f)
    vals = (b.r_component.interior * _ddr(f.data, f.grid.dr)
            + b.z_component.interior * _ddz(f.data, f.grid.dz))
    return _derived(f, vals, f.axis_parity)


def hessian_cyl(f: ScalarField) -> HessianParts:
    """The four distinct cylindrical Hessian entries of an axisymmetric
    scalar (the mixed one appears twice in the Frobenius norm).  The cross
    stencil reaches corner ghosts, which fill_ghosts defines."""
    _require_ghosts(f)
    g = f.grid
    return HessianParts(
        d2_rr=_derived(f, _d2r(f.data, g.dr), f.axis_parity),
        dr_over_r=_derived(f, _ddr(f.data, g.dr) / g.r[:, None], f.axis_parity),
        d2_zz=_derived(f, _d2z(f.data, g.dz), f.axis_parity),
        d2_rz=_derived(f, _d2rz(f.data, g.dr, g.dz), _flip(f.axis_parity)),
    )
