"""Runtime verification harness: constants, norms, energy, and the margin of
every monitored inequality.

The monitored inequalities, with phi = v_r/r reconstructed through the
stream route and all norms cylindrically weighted:

* gradient bound      ||grad phi||_2 <= ||omega||_2
* Hessian bound       ||Hess phi||_2 <= c_hessian ||d(omega)/dz||_2
  (Frobenius norm with the distinct cylindrical entries, mixed entry twice)
* sup bound (Agmon)   ||phi||_inf <= c_agmon ||grad phi||_2^1/2 ||Hess phi||_2^1/2
* vertical average    integral of phi over z vanishes for every r
  (exact discrete identity through the stream route: a telescoping sum of
  d(psi)/dz with psi = 0 on the horizontal sides)
* maximum principle   ||gamma(t)||_p nonincreasing, p in {2, 4, inf}
* energy dissipation  E = 1/4 ||v_swirl^2||_2^2 + 1/2 ||omega||_2^2
  nonincreasing whenever the initial smallness quantity is at most 1/4

The smallness quantity gating the energy statement is

    S = (9 c_agmon sqrt(c_hessian) / 4)
        * (1/2 ||v_swirl||_4^4 + ||omega||_2^2)^(1/4) * ||gamma||_4,

which is invariant under the natural rescaling v -> lam v(lam x, lam**2 t)
on the correspondingly shrunken cylinder; ``scaling_invariance`` measures
that invariance numerically.

Each margin is reported as (right-hand side) - (left-hand side), nonnegative
when the inequality is satisfied.  Continuum inequalities cannot be asserted
exactly on a grid, so the acceptance checks allow an explicit O(h^2) slack
and additionally require any violation to shrink under refinement at order
>= 1.5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Optional

import mpmath
import numpy as np

from .grid import ScalarField, linf_norm, weighted_lp_norm
from .operators import _ddz, grad_meridian, hessian_cyl


@dataclass(frozen=True)
class BoundConstants:
    """Closed-form constants appearing in the monitored inequalities.

    c_agmon multiplies the interpolation product in the sup bound, c_hessian
    multiplies ||d(omega)/dz||_2 in the Hessian bound, and c_poincare bounds
    the Poincare constant of the unit-square section.
    """

    c_agmon: float
    c_hessian: float
    c_poincare: float


def compute_constants() -> BoundConstants:
    """Evaluate the closed forms in 50-digit arithmetic, round to doubles.

    c_hessian = ((2 + 3/sqrt(2))**2 + 5/2)**(1/2)
    c_agmon   = (1 + sqrt(2)) * 2 sqrt(pi) * 536**(1/4)
                * (57452 (1 + 5/pi**2) + 60)**(1/4)
    c_poincare = sqrt(5)/pi
    """
    with mpmath.workdps(50):
        c_hessian = mpmath.sqrt((2 + 3 / mpmath.sqrt(2)) ** 2 + mpmath.mpf(5) / 2)
        c_agmon = ((1 + mpmath.sqrt(2)) * 2 * mpmath.sqrt(mpmath.pi)
                   * mpmath.root(536, 4)
                   * mpmath.root(57452 * (1 + 5 / mpmath.pi**2) + 60, 4))
        c_poincare = mpmath.sqrt(5) / mpmath.pi
        return BoundConstants(float(c_agmon), float(c_hessian), float(c_poincare))


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One row of the time-series output (CSV column order = field order)."""

    t: float
    gamma_l2: float
    gamma_l4: float
    gamma_linf: float
    omega_l2: float
    dz_omega_l2: float
    v_swirl_l4: float
    v2_over_r_l2: float
    energy: float
    smallness: float
    margin_grad: float
    margin_hess: float
    margin_swirl_decay: float
    margin_vertical_avg: float
    margin_sup: float
    sup_ratio: float
    vr_l4: float
    v3_l4: float
    vtheta_l4: float


CSV_FIELDS = tuple(f.name for f in fields(DiagnosticsRecord))


def _dz_omega_field(omega: ScalarField) -> ScalarField:
    # Same centered stencil the dynamics uses, so the Hessian bound's RHS is
    # measured with the operator its LHS discretization sees.
    if not omega.ghosts_valid:
        raise ValueError("omega ghosts not filled")
    return ScalarField.from_interior(omega.grid, _ddz(omega.data, omega.grid.dz),
                                     "even", bc=None)


def gradient_norm(phi: ScalarField) -> float:
    """Weighted L2 norm of the in-plane gradient of an axisymmetric scalar."""
    g = grad_meridian(phi)
    return math.hypot(weighted_lp_norm(g.r_component, 2),
                      weighted_lp_norm(g.z_component, 2))


def hessian_frobenius_norm(phi: ScalarField) -> float:
    """Weighted L2 Frobenius norm of the cylindrical Hessian (mixed entry
    counted twice)."""
    h = hessian_cyl(phi)
    return math.sqrt(weighted_lp_norm(h.d2_rr, 2) ** 2
                     + weighted_lp_norm(h.dr_over_r, 2) ** 2
                     + weighted_lp_norm(h.d2_zz, 2) ** 2
                     + 2.0 * weighted_lp_norm(h.d2_rz, 2) ** 2)


def smallness_from_fields(gamma: ScalarField, omega: ScalarField,
                          consts: BoundConstants) -> float:
    """Smallness quantity from the prognostic fields alone (no solve)."""
    grid = gamma.grid
    v_swirl = ScalarField.from_interior(
        grid, gamma.interior / grid.r[:, None] ** 1.5, "even", bc=None)
    v4 = weighted_lp_norm(v_swirl, 4)
    o2 = weighted_lp_norm(omega, 2)
    g4 = weighted_lp_norm(gamma, 4)
    return (9.0 * consts.c_agmon * math.sqrt(consts.c_hessian) / 4.0
            * (0.5 * v4**4 + o2**2) ** 0.25 * g4)


def smallness(state, consts: BoundConstants) -> float:
    """Smallness quantity of a FlowState."""
    return smallness_from_fields(state.gamma, state.omega, consts)


def energy(state) -> float:
    """E = 1/4 ||v_swirl||_4^4 + 1/2 ||omega||_2^2 (the dissipated functional)."""
    v4 = weighted_lp_norm(state.derived.v_swirl, 4)
    o2 = weighted_lp_norm(state.omega, 2)
    return 0.25 * v4**4 + 0.5 * o2**2


def gradient_bound_margins(state, consts: BoundConstants) -> tuple[float, float]:
    """Margins (RHS - LHS) of the gradient and Hessian bounds on the current
    state, with phi from the stream route."""
    phi = state.derived.phi
    o2 = weighted_lp_norm(state.omega, 2)
    dzo2 = weighted_lp_norm(_dz_omega_field(state.omega), 2)
    m_grad = o2 - gradient_norm(phi)
    m_hess = consts.c_hessian * dzo2 - hessian_frobenius_norm(phi)
    return m_grad, m_hess


def vertical_average_deviation(state) -> float:
    """max over radii of |sum_j phi_ij dz| for phi = v_r/r (stream route);
    zero to rounding by telescoping."""
    phi = state.derived.phi
    return float(np.abs(phi.interior.sum(axis=1) * phi.grid.dz).max())


def sup_bound_margin(state, consts: BoundConstants) -> tuple[float, float]:
    """(margin, empirical ratio) of the sup bound.  For phi identically zero
    the margin is the +inf sentinel and the ratio is reported as 0."""
    phi = state.derived.phi
    denom = math.sqrt(gradient_norm(phi)) * math.sqrt(hessian_frobenius_norm(phi))
    sup = linf_norm(phi)
    if denom == 0.0:
        return math.inf, 0.0
    return consts.c_agmon * denom - sup, sup / denom


class RecordComputer:
    """Produces DiagnosticsRecord rows; remembers the initial swirl norms so
    the maximum-principle margin can be reported per record."""

    def __init__(self, consts: BoundConstants):
        self.consts = consts
        self._gamma0: Optional[tuple[float, float, float]] = None

    def record(self, state) -> DiagnosticsRecord:
        d = state.derived
        g2 = weighted_lp_norm(state.gamma, 2)
        g4 = weighted_lp_norm(state.gamma, 4)
        gi = linf_norm(state.gamma)
        if self._gamma0 is None:
            self._gamma0 = (g2, g4, gi)
        o2 = weighted_lp_norm(state.omega, 2)
        dzo2 = weighted_lp_norm(_dz_omega_field(state.omega), 2)
        v4 = weighted_lp_norm(d.v_swirl, 4)
        grid = state.grid
        v2_over_r = ScalarField.from_interior(
            grid, d.v_swirl.interior**2 / grid.r[:, None], "odd", bc=None)
        m_grad, m_hess = gradient_bound_margins(state, self.consts)
        m_decay = min(a - b for a, b in zip(self._gamma0, (g2, g4, gi)))
        phi = d.phi
        dev = vertical_average_deviation(state)
        m_vavg = 1e-12 * (1.0 + linf_norm(phi)) - dev
        m_sup, ratio = sup_bound_margin(state, self.consts)
        return DiagnosticsRecord(
            t=state.t,
            gamma_l2=g2, gamma_l4=g4, gamma_linf=gi,
            omega_l2=o2, dz_omega_l2=dzo2,
            v_swirl_l4=v4,
            v2_over_r_l2=weighted_lp_norm(v2_over_r, 2),
            energy=0.25 * v4**4 + 0.5 * o2**2,
            smallness=smallness(state, self.consts),
            margin_grad=m_grad, margin_hess=m_hess,
            margin_swirl_decay=m_decay, margin_vertical_avg=m_vavg,
            margin_sup=m_sup, sup_ratio=ratio,
            vr_l4=weighted_lp_norm(d.v.r_component, 4),
            v3_l4=weighted_lp_norm(d.v.z_component, 4),
            vtheta_l4=weighted_lp_norm(d.v_theta, 4),
        )


def max_principle_growth(records) -> dict[str, float]:
    """Worst relative per-record growth of each swirl norm along a history.

    Returns 0 for a norm that stays at zero (swirl-free runs).
    """
    if len(records) < 2:
        raise ValueError("need at least two records")
    worst = {"l2": 0.0, "l4": 0.0, "linf": 0.0}
    keys = {"l2": "gamma_l2", "l4": "gamma_l4", "linf": "gamma_linf"}
    for prev, cur in zip(records[:-1], records[1:]):
        for name, attr in keys.items():
            a = getattr(prev, attr)
            b = getattr(cur, attr)
            if a > 0.0:
                worst[name] = max(worst[name], (b - a) / a)
    return worst


def energy_drift(records) -> Optional[float]:
    """Worst relative per-record energy increase, or None when the initial
    smallness quantity exceeds 1/4 (the dissipation statement is gated)."""
    if len(records) < 2:
        raise ValueError("need at least two records")
    if records[0].smallness > 0.25:
        return None
    worst = 0.0
    for prev, cur in zip(records[:-1], records[1:]):
        if prev.energy > 0.0:
            worst = max(worst, (cur.energy - prev.energy) / prev.energy)
    return worst


def first_doubling_time(records) -> Optional[float]:
    """First time ||omega||_2^(1/2) exceeds twice its initial value, if ever.

    Reported as data only; no claim is attached to it.
    """
    if not records:
        return None
    ref = records[0].omega_l2 ** 0.5
    for rec in records[1:]:
        if rec.omega_l2 ** 0.5 > 2.0 * ref:
            return rec.t
    return None


@dataclass(frozen=True)
class RatioCheck:
    observed: float
    expected: float

    @property
    def deviation(self) -> float:
        return abs(self.observed - self.expected) / abs(self.expected)


@dataclass(frozen=True)
class ScalingCheck:
    """Result of the criticality check: the smallness quantity before and
    after the rescaling v -> lam v(lam x) onto the (R/lam, H/lam) cylinder,
    plus the three individual norm ratios against lam**(-+3/4)."""

    s_base: float
    s_rescaled: float
    ratio_v_swirl: RatioCheck
    ratio_gamma: RatioCheck
    ratio_omega_sqrt: RatioCheck

    @property
    def deviation(self) -> float:
        return abs(self.s_rescaled - self.s_base) / self.s_base


def scaling_invariance(family, lam: float, nr: int, nz: int,
                       consts: Optional[BoundConstants] = None) -> ScalingCheck:
    """Generate a family on the unit cylinder and its lam-rescaling on the
    shrunken cylinder at matched resolution; compare smallness and norms."""
    from .grid import MeridianGrid
    from .initdata import make_initial, rescaled

    if lam <= 0:
        raise ValueError("lambda must be positive")
    if consts is None:
        consts = compute_constants()
    grid = MeridianGrid(nr, nz, 1.0, 1.0)
    base = make_initial(family, grid)
    resc = rescaled(family, lam, grid)

    s_base = smallness_from_fields(base.gamma, base.omega, consts)
    if s_base == 0.0:
        raise ValueError("scaling check requires nonzero data")
    s_resc = smallness_from_fields(resc.gamma, resc.omega, consts)

    def v_swirl_l4(state):
        g = state.grid
        f = ScalarField.from_interior(g, state.gamma.interior / g.r[:, None] ** 1.5,
                                      "even", bc=None)
        return weighted_lp_norm(f, 4)

    lam34 = lam ** 0.75
    return ScalingCheck(
        s_base=s_base,
        s_rescaled=s_resc,
        ratio_v_swirl=RatioCheck(v_swirl_l4(base) / v_swirl_l4(resc), 1.0 / lam34),
        ratio_gamma=RatioCheck(weighted_lp_norm(base.gamma, 4)
                               / weighted_lp_norm(resc.gamma, 4), lam34),
        ratio_omega_sqrt=RatioCheck((weighted_lp_norm(base.omega, 2)
                                     / weighted_lp_norm(resc.omega, 2)) ** 0.5,
                                    1.0 / lam34),
    )
