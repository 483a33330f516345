"""Time evolution of the prognostic pair (gamma, omega).

gamma = r * v_theta (swirl circulation) and omega = omega_theta / r (scaled
angular vorticity) form a closed system once the in-plane velocity
b = (v_r, v_z) is reconstructed from omega through the stream function:

    d(gamma)/dt = Lap(gamma) - b.grad(gamma) - (2/r) d(gamma)/dr
    d(omega)/dt = Lap(omega) + (2/r) d(omega)/dr - b.grad(omega)
                  + d/dz(gamma**2) / r**4

with Lap the axisymmetric scalar Laplacian.  The last term is the swirl
source written through gamma: with v_swirl = v_theta/sqrt(r) it equals
d/dz(v_swirl**2)/r, and gamma**2 = O(r**4) near the axis keeps it finite at
every node.  Evolving (gamma, omega) rather than (v_swirl, omega) avoids the
sqrt(r) axis behavior and the -3/(4 r**2) zeroth-order coefficient of the
v_swirl form; v_swirl is reconstructed only for diagnostics.

Boundary closures (all second-order midpoint relations):

    gamma: 0 at the axis face, zero normal derivative at r = R and on the
           horizontal sides;
    omega: even across the axis, 0 on the other three sides.

Time integration is the three-stage strong-stability-preserving Runge-Kutta
scheme over the method-of-lines system; every stage refills ghosts, re-solves
the stream function and re-evaluates the right-hand sides.  Viscosity is
fixed to 1 and there is no external forcing.

The right-hand sides exist twice on purpose: ``rhs_gamma``/``rhs_omega``
compose the public operators (readable reference), while the time loop runs
a fused stencil kernel; the two are equal to rounding and a test pins that.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .grid import (BoundarySet, ConfigurationError, MeridianGrid, ScalarField,
                   dirichlet, fill_ghosts, neumann, parity)
from .operators import (MeridianVector, _ddr, _ddz, advect, laplacian_cyl,
                        laplacian_cyl4)
from . import elliptic
from .elliptic import EllipticProblem, solve_stream, stream_vr_over_r, velocity_from_stream

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


GAMMA_BC = BoundarySet(axis=dirichlet(0.0), outer=neumann(0.0),
                       bottom=neumann(0.0), top=neumann(0.0))
OMEGA_BC = BoundarySet(axis=parity(), outer=dirichlet(0.0),
                       bottom=dirichlet(0.0), top=dirichlet(0.0))

FAMILIES = ("poly_swirl", "poly_vorticity", "combined", "swirl_free", "random_smooth")


class BlowupError(RuntimeError):
    """A prognostic field left the representable range during a step."""

    def __init__(self, t: float, field_name: str):
        super().__init__(f"non-finite values in {field_name} at t = {t:.6g}")
        self.t = t
        self.field_name = field_name


@dataclass(frozen=True)
class SimConfig:
    """Resolved run parameters (see meridian.io.parse_config for the file keys)."""

    nr: int = 128
    nz: int = 128
    R: float = 1.0
    H: float = 1.0
    T: float = 0.1
    cfl: float = 0.4
    dt: Optional[float] = None
    family: str = "combined"
    A: float = 0.1
    B: float = 0.1
    k: int = 1
    m: int = 1
    seed: int = 0
    cadence: int = 10
    tol: float = 1e-10
    outdir: str = "out"

    def __post_init__(self):
        if self.nr < 1 or self.nz < 1:
            raise ConfigurationError("grid sizes must be positive")
        if not (self.R > 0 and self.H > 0):
            raise ConfigurationError("domain extents must be positive")
        if not (0.0 < self.cfl <= 1.0):
            raise ConfigurationError("cfl must lie in (0, 1]")
        if self.T < 0:
            raise ConfigurationError("end time must be nonnegative")
        if self.dt is not None and not self.dt > 0:
            raise ConfigurationError("fixed dt must be positive")
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}")
        if self.k < 1 or self.m < 1:
            raise ConfigurationError("wavenumbers must be positive")
        if self.cadence < 1:
            raise ConfigurationError("cadence must be positive")
        if not self.tol > 0:
            raise ConfigurationError("solver tolerance must be positive")

    def grid(self) -> MeridianGrid:
        return MeridianGrid(self.nr, self.nz, self.R, self.H)


@dataclass
class Derived:
    """Fields reconstructed from one (gamma, omega) snapshot."""

    psi: ScalarField
    v: MeridianVector
    v_theta: ScalarField
    v_swirl: ScalarField
    phi: ScalarField  # v_r / r, stream route, ghosts filled


@dataclass
class FlowState:
    """Prognostic snapshot at time t, with a lazily built derived cache."""

    t: float
    gamma: ScalarField
    omega: ScalarField
    derived_cache: Optional[Derived] = None

    @property
    def grid(self) -> MeridianGrid:
        return self.gamma.grid

    @classmethod
    def create(cls, grid: MeridianGrid, gamma_interior: np.ndarray,
               omega_interior: np.ndarray, t: float = 0.0) -> "FlowState":
        gamma = ScalarField.from_interior(grid, gamma_interior, "even", GAMMA_BC)
        omega = ScalarField.from_interior(grid, omega_interior, "even", OMEGA_BC)
        if not np.isfinite(gamma.interior).all():
            raise BlowupError(t, "gamma")
        if not np.isfinite(omega.interior).all():
            raise BlowupError(t, "omega")
        fill_ghosts(gamma)
        fill_ghosts(omega)
        return cls(t, gamma, omega)

    @property
    def derived(self) -> Derived:
        if self.derived_cache is None:
            raise RuntimeError("stale derived cache: call Simulation.ensure first")
        return self.derived_cache

    def invalidate(self) -> None:
        self.derived_cache = None


def rhs_gamma(state: FlowState) -> ScalarField:
    """Reference right-hand side for gamma: Lap - drift - (2/r) d/dr."""
    b = state.derived.v
    g = state.gamma
    drift = (2.0 / g.grid.r[:, None]) * _ddr(g.data, g.grid.dr)
    vals = laplacian_cyl(g).interior - advect(b, g).interior - drift
    return ScalarField.from_interior(g.grid, vals, "even", bc=None)


def rhs_omega(state: FlowState) -> ScalarField:
    """Reference right-hand side for omega, with the swirl source
    d/dz(gamma**2)/r**4 evaluated pointwise at cell centers."""
    b = state.derived.v
    w = state.omega
    grid = w.grid
    gamma_sq = state.gamma.data ** 2
    source = _ddz(gamma_sq, grid.dz) / grid.r[:, None] ** 4
    vals = laplacian_cyl4(w).interior - advect(b, w).interior + source
    return ScalarField.from_interior(grid, vals, "even", bc=None)


if HAVE_NUMBA:

    @njit(cache=True)
    def _fused_rhs(Gg, Wg, Pg, r, cu, cl, cz, inv2dr, inv2dz,
                   dG, dW, vr, vz):  # pragma: no cover - exercised via step
        nr = Gg.shape[0] - 2
        nz = Gg.shape[1] - 2
        for i in range(nr):
            ri = r[i]
            cui = cu[i]
            cli = cl[i]
            for j in range(nz):
                I = i + 1
                J = j + 1
                vrij = (Pg[I, J - 1] - Pg[I, J + 1]) * inv2dz / ri
                vzij = (Pg[I + 1, J] - Pg[I - 1, J]) * inv2dr / ri
                vr[i, j] = vrij
                vz[i, j] = vzij
                gc = Gg[I, J]
                lap_g = (cui * (Gg[I + 1, J] - gc) - cli * (gc - Gg[I - 1, J])
                         + cz * (Gg[I, J + 1] - 2.0 * gc + Gg[I, J - 1]))
                dgr = (Gg[I + 1, J] - Gg[I - 1, J]) * inv2dr
                dgz = (Gg[I, J + 1] - Gg[I, J - 1]) * inv2dz
                dG[i, j] = lap_g - (vrij + 2.0 / ri) * dgr - vzij * dgz
                wc = Wg[I, J]
                lap_w = (cui * (Wg[I + 1, J] - wc) - cli * (wc - Wg[I - 1, J])
                         + cz * (Wg[I, J + 1] - 2.0 * wc + Wg[I, J - 1]))
                dwr = (Wg[I + 1, J] - Wg[I - 1, J]) * inv2dr
                dwz = (Wg[I, J + 1] - Wg[I, J - 1]) * inv2dz
                src = (Gg[I, J + 1] ** 2 - Gg[I, J - 1] ** 2) * inv2dz / ri**4
                dW[i, j] = lap_w + (2.0 / ri - vrij) * dwr - vzij * dwz + src


def _fused_rhs_numpy(Gg, Wg, Pg, r, cu, cl, cz, inv2dr, inv2dz, dG, dW, vr, vz):
    rc = r[:, None]
    vr[:] = (Pg[1:-1, :-2] - Pg[1:-1, 2:]) * inv2dz / rc
    vz[:] = (Pg[2:, 1:-1] - Pg[:-2, 1:-1]) * inv2dr / rc
    gc = Gg[1:-1, 1:-1]
    lap_g = (cu[:, None] * (Gg[2:, 1:-1] - gc) - cl[:, None] * (gc - Gg[:-2, 1:-1])
             + cz * (Gg[1:-1, 2:] - 2.0 * gc + Gg[1:-1, :-2]))
    dgr = (Gg[2:, 1:-1] - Gg[:-2, 1:-1]) * inv2dr
    dgz = (Gg[1:-1, 2:] - Gg[1:-1, :-2]) * inv2dz
    dG[:] = lap_g - (vr + 2.0 / rc) * dgr - vz * dgz
    wc = Wg[1:-1, 1:-1]
    lap_w = (cu[:, None] * (Wg[2:, 1:-1] - wc) - cl[:, None] * (wc - Wg[:-2, 1:-1])
             + cz * (Wg[1:-1, 2:] - 2.0 * wc + Wg[1:-1, :-2]))
    dwr = (Wg[2:, 1:-1] - Wg[:-2, 1:-1]) * inv2dr
    dwz = (Wg[1:-1, 2:] - Wg[1:-1, :-2]) * inv2dz
    src = (Gg[1:-1, 2:] ** 2 - Gg[1:-1, :-2] ** 2) * inv2dz / rc**4
    dW[:] = lap_w + (2.0 / rc - vr) * dwr - vz * dwz + src


def stable_dt_bounds(grid: MeridianGrid, vmax_r: float, vmax_z: float,
                     cfl: float = 0.4) -> float:
    """Explicit step bound: cfl times the minimum of the diffusive limit and
    the two advective limits.

    The diffusive limit dr**2 dz**2 / (2 (dr**2 + dz**2)) is divided by
    nu_eff = 1 + dr / (2 r_min), which folds in the strongest first-order
    radial coefficient, the (2/r) drift at the first cell off the axis (its
    own step restriction is dr * r_min / 2).  Never returns 0 or NaN.
    """
    dr, dz = grid.dr, grid.dz
    diff = dr * dr * dz * dz / (2.0 * (dr * dr + dz * dz))
    nu_eff = 1.0 + dr / (2.0 * grid.r[0])
    bound = diff / nu_eff
    if vmax_r > 0:
        bound = min(bound, dr / vmax_r)
    if vmax_z > 0:
        bound = min(bound, dz / vmax_z)
    return cfl * bound


def stable_dt(state: FlowState, cfl: float = 0.4) -> float:
    """Stable explicit step for the current state (derived cache required)."""
    v = state.derived.v
    return stable_dt_bounds(state.grid,
                            float(np.abs(v.r_component.interior).max()),
                            float(np.abs(v.z_component.interior).max()), cfl)


@dataclass
class RunResult:
    records: list
    final: FlowState
    steps: int


class Simulation:
    """Owns the grid, the cached stream solver and the stepping scratch."""

    def __init__(self, grid: MeridianGrid, tol: float = 1e-10,
                 method: str = "direct"):
        self.grid = grid
        self.method = method
        self.stream = elliptic.stream_problem(grid, tol=tol)
        r, rf, dr = grid.r, grid.r_faces, grid.dr
        self._cu = rf[1:] / (r * dr * dr)
        self._cl = rf[:-1] / (r * dr * dr)
        self._cz = 1.0 / grid.dz**2
        self._inv2dr = 1.0 / (2.0 * dr)
        self._inv2dz = 1.0 / (2.0 * grid.dz)
        n = (grid.nr, grid.nz)
        self._scratch = tuple(np.empty(n) for _ in range(4))
        self._rhs_impl = _fused_rhs if HAVE_NUMBA else _fused_rhs_numpy

    def ensure(self, state: FlowState) -> Derived:
        """Build (or return) the derived cache of a state."""
        if state.derived_cache is not None:
            return state.derived_cache
        psi = solve_stream(state.omega, self.stream, method=self.method)
        v = velocity_from_stream(psi)
        grid = self.grid
        r = grid.r[:, None]
        v_theta = ScalarField.from_interior(grid, state.gamma.interior / r,
                                            "odd", bc=None)
        v_swirl = ScalarField.from_interior(grid, state.gamma.interior / r**1.5,
                                            "even", bc=None)
        phi = stream_vr_over_r(psi)
        state.derived_cache = Derived(psi, v, v_theta, v_swirl, phi)
        return state.derived_cache

    def _rhs_into(self, gamma: ScalarField, omega: ScalarField,
                  psi: ScalarField, dG, dW, vr, vz) -> None:
        self._rhs_impl(gamma.data, omega.data, psi.data, self.grid.r,
                       self._cu, self._cl, self._cz, self._inv2dr,
                       self._inv2dz, dG, dW, vr, vz)

    def _advance(self, gamma: ScalarField, omega: ScalarField, t: float,
                 coeffs, dt: float, psi: Optional[ScalarField] = None):
        """One Shu-Osher stage: new = ca*base + cb*(cur + dt*rhs(cur))."""
        ca, base_g, base_w, cb = coeffs
        if psi is None:
            psi = solve_stream(omega, self.stream, method=self.method)
        dG, dW, vr, vz = self._scratch
        self._rhs_into(gamma, omega, psi, dG, dW, vr, vz)
        new_g = ca * base_g + cb * (gamma.interior + dt * dG)
        new_w = ca * base_w + cb * (omega.interior + dt * dW)
        if not np.isfinite(new_g).all():
            raise BlowupError(t, "gamma")
        if not np.isfinite(new_w).all():
            raise BlowupError(t, "omega")
        gamma_f = fill_ghosts(ScalarField.from_interior(self.grid, new_g, "even", GAMMA_BC))
        omega_f = fill_ghosts(ScalarField.from_interior(self.grid, new_w, "even", OMEGA_BC))
        return gamma_f, omega_f

    def step(self, state: FlowState, dt: float) -> FlowState:
        """Advance one SSP-RK3 step; returns a fresh state with empty cache."""
        g0, w0 = state.gamma, state.omega
        psi0 = state.derived_cache.psi if state.derived_cache is not None else None
        g1, w1 = self._advance(g0, w0, state.t, (0.0, g0.interior, w0.interior, 1.0), dt, psi0)
        g2, w2 = self._advance(g1, w1, state.t, (0.75, g0.interior, w0.interior, 0.25), dt)
        g3, w3 = self._advance(g2, w2, state.t, (1.0 / 3.0, g0.interior, w0.interior, 2.0 / 3.0), dt)
        return FlowState(state.t + dt, g3, w3)


def run(config: SimConfig,
        record_sink: Optional[Callable] = None) -> RunResult:
    """Run a configured simulation, emitting diagnostics records at t = 0,
    every ``cadence`` steps, and after the final step.

    Deterministic for a fixed config.  Step errors propagate after all
    records produced so far have been handed to ``record_sink``.
    """
    from .diagnostics import RecordComputer, compute_constants
    from .initdata import DataFamily, make_initial

    grid = config.grid()
    family = DataFamily(tag=config.family, A=config.A, B=config.B,
                        k=config.k, m=config.m, seed=config.seed)
    state = make_initial(family, grid)
    sim = Simulation(grid, tol=config.tol)
    computer = RecordComputer(compute_constants())

    records = []

    def emit(s: FlowState) -> None:
        sim.ensure(s)
        rec = computer.record(s)
        records.append(rec)
        if record_sink is not None:
            record_sink(rec)

    emit(state)
    steps = 0
    end = config.T
    while end - state.t > 1e-12 * max(end, 1.0):
        sim.ensure(state)
        dt_cap = config.dt if config.dt is not None else stable_dt(state, config.cfl)
        dt = min(dt_cap, end - state.t)
        try:
            state = sim.step(state, dt)
        except BlowupError as exc:
            exc.state = state  # last representable state, for the dump
            raise
        steps += 1
        if steps % config.cadence == 0:
            emit(state)
    if steps > 0:
        emit(state)
    return RunResult(records, state, steps)
