"""Manufactured-solution convergence studies for operators and solvers.

Operator studies sample the exact solution on the full ghost-extended
stencil, so they measure pure stencil consistency in the max norm; the ghost
closures are verified separately (their discrete relations are exact by
construction, and the elliptic studies below exercise them globally).  The
manufactured operator family is

    f(r, z) = (R**2 - r**2)**2 cos(pi z / H),

even in r, flat at r = R and with vanishing z-derivative on the horizontal
sides.  The radial factor must be at least quartic: centered stencils are
exact on radial quadratics, which would leave the purely radial operators
with rounding-level errors and no observable order.  The advecting field
for the drift study is derived from the stream function
r**2 (R**2 - r**2)**2 sin(pi z / H)**2, which is tangent on the whole
boundary.

Elliptic studies solve with the production boundary closures and measure the
weighted-L2 recovery error of a compatible manufactured solution, so they
verify stencil, closure and solver together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import elliptic
from .grid import MeridianGrid, ScalarField
from .operators import (MeridianVector, advect, grad_meridian, hessian_cyl,
                        laplacian_cyl, laplacian_cyl4)

OPERATOR_NAMES = ("grad_r", "grad_z", "laplacian_cyl", "laplacian_cyl4",
                  "advect", "hessian_rr", "hessian_dr_over_r", "hessian_zz",
                  "hessian_rz")
ELLIPTIC_NAMES = ("stream", "vr_over_r")


@dataclass(frozen=True)
class OrderStudy:
    """Errors over a size ladder and the observed orders between rungs."""

    sizes: tuple
    errors: tuple

    @property
    def orders(self) -> tuple:
        return tuple(math.log2(a / b) for a, b in zip(self.errors[:-1], self.errors[1:]))


def exact_field(grid: MeridianGrid, fn, axis_parity: str = "even") -> ScalarField:
    """Sample fn(r, z) on interior and ghost cells alike; marks ghosts valid."""
    r_all = (np.arange(grid.nr + 2) - 0.5) * grid.dr
    z_all = (np.arange(grid.nz + 2) - 0.5) * grid.dz
    rr, zz = np.meshgrid(r_all, z_all, indexing="ij")
    f = ScalarField(grid, np.asarray(fn(rr, zz), dtype=float), axis_parity, bc=None)
    f.ghosts_valid = True
    return f


def _f(R, H):
    return lambda r, z: (R**2 - r**2) ** 2 * np.cos(np.pi * z / H)


def _advecting_velocity(grid: MeridianGrid) -> MeridianVector:
    """Analytic b = (-(1/r) dpsi/dz, (1/r) dpsi/dr) for the tangent stream
    function psi = r**2 (R**2 - r**2)**2 sin(pi z / H)**2."""
    R, H = grid.R, grid.H
    rr, zz = grid.meshgrid()
    s = np.pi / H
    br = -rr * (R**2 - rr**2) ** 2 * s * np.sin(2 * s * zz)
    bz = 2.0 * (R**2 - rr**2) * (R**2 - 3 * rr**2) * np.sin(s * zz) ** 2
    return MeridianVector(
        ScalarField.from_interior(grid, br, "odd", bc=None),
        ScalarField.from_interior(grid, bz, "even", bc=None),
    )


def _operator_errors(n: int, R: float, H: float) -> dict[str, float]:
    grid = MeridianGrid(n, n, R, H)
    rr, zz = grid.meshgrid()
    s = np.pi / H
    cos = np.cos(s * zz)
    sin = np.sin(s * zz)
    f = exact_field(grid, _f(R, H))

    q = R**2 - rr**2
    f_r = -4.0 * rr * q * cos
    f_z = -s * q**2 * sin
    lap = (-8.0 * R**2 + 16.0 * rr**2 - s**2 * q**2) * cos
    lap4 = (-16.0 * R**2 + 24.0 * rr**2 - s**2 * q**2) * cos
    hess_rr = (-4.0 * R**2 + 12.0 * rr**2) * cos
    hess_dr_over_r = -4.0 * q * cos
    hess_zz = -s**2 * q**2 * cos
    hess_rz = 4.0 * s * rr * q * sin

    b = _advecting_velocity(grid)
    adv = b.r_component.interior * f_r + b.z_component.interior * f_z

    g = grad_meridian(f)
    h = hessian_cyl(f)
    out = {
        "grad_r": g.r_component.interior - f_r,
        "grad_z": g.z_component.interior - f_z,
        "laplacian_cyl": laplacian_cyl(f).interior - lap,
        "laplacian_cyl4": laplacian_cyl4(f).interior - lap4,
        "advect": advect(b, f).interior - adv,
        "hessian_rr": h.d2_rr.interior - hess_rr,
        "hessian_dr_over_r": h.dr_over_r.interior - hess_dr_over_r,
        "hessian_zz": h.d2_zz.interior - hess_zz,
        "hessian_rz": h.d2_rz.interior - hess_rz,
    }
    return {k: float(np.abs(v).max()) for k, v in out.items()}


def operator_orders(sizes=(32, 64, 128), R: float = 1.0,
                    H: float = 1.0) -> dict[str, OrderStudy]:
    """Max-norm convergence study of every discrete operator."""
    per_size = [_operator_errors(n, R, H) for n in sizes]
    return {name: OrderStudy(tuple(sizes), tuple(e[name] for e in per_size))
            for name in OPERATOR_NAMES}


def _stream_error(n: int, R: float, H: float, method: str) -> float:
    grid = MeridianGrid(n, n, R, H)
    rr, zz = grid.meshgrid()
    s = np.pi / H
    g = np.sin(s * zz) ** 2
    gpp = 2.0 * s**2 * np.cos(2 * s * zz)
    psi_exact = rr**2 * (R**2 - rr**2) ** 2 * g
    # (f'' - f'/r) g + f g'' with f = r^2 (R^2 - r^2)^2
    radial = (-16.0 * R**2 * rr**2 + 24.0 * rr**4) * g
    omega_vals = -(radial + rr**2 * (R**2 - rr**2) ** 2 * gpp) / rr**2
    from .dynamics import OMEGA_BC
    from .grid import fill_ghosts
    omega = fill_ghosts(ScalarField.from_interior(grid, omega_vals, "even", OMEGA_BC))
    psi = elliptic.solve_stream(omega, method=method)
    err = ScalarField.from_interior(grid, psi.interior - psi_exact, "even", bc=None)
    from .grid import weighted_lp_norm
    return weighted_lp_norm(err, 2)


def _vr_over_r_error(n: int, R: float, H: float, method: str) -> float:
    grid = MeridianGrid(n, n, R, H)
    rr, zz = grid.meshgrid()
    s = np.pi / H
    phi_exact = (R**2 - rr**2) * np.cos(s * zz)
    forcing = (-8.0 - s**2 * (R**2 - rr**2)) * np.cos(s * zz)
    problem = elliptic.vr_over_r_problem(grid)
    phi = problem.solve(forcing, method=method)
    err = ScalarField.from_interior(grid, phi - phi_exact, "even", bc=None)
    from .grid import weighted_lp_norm
    return weighted_lp_norm(err, 2)


def elliptic_orders(sizes=(32, 64, 128), R: float = 1.0, H: float = 1.0,
                    method: str = "direct") -> dict[str, OrderStudy]:
    """Weighted-L2 recovery study of both velocity-reconstruction routes."""
    return {
        "stream": OrderStudy(tuple(sizes),
                             tuple(_stream_error(n, R, H, method) for n in sizes)),
        "vr_over_r": OrderStudy(tuple(sizes),
                                tuple(_vr_over_r_error(n, R, H, method) for n in sizes)),
    }


def all_orders(sizes=(32, 64, 128)) -> dict[str, OrderStudy]:
    """Every operator and both elliptic routes in one table."""
    out = operator_orders(sizes)
    out.update(elliptic_orders(sizes))
    return out
