"""Functionals and inequality checks evaluated along a trajectory.

All integrals use the solver's own discrete operators and quadrature, so the
exact cancellations the scheme was built around carry over to the reported
balances instead of failing by discretization mismatch.  Two diffusion
production forms appear:

  * P_diff, the nodal-gradient form D int |grad theta|^2 / theta^2 used for
    reporting, and
  * prod_diff_edge, the edge (Dirichlet-form) representation
    D (1/theta) . (W lap_N) theta that the implicit heat step produces
    exactly; the per-step entropy balance is one-sided only in this form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from . import tensors as tn
from .errors import ConfigError
from .materials import M_DEFAULT

_E = math.e


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Every scalar functional of one state snapshot."""

    t: float
    kinetic: float
    elastic: float
    thermal: float
    F: float
    S: float
    S_hat: float
    P_diff: float
    P_visc: float
    P_src: float
    L1: float
    L2: float
    llogl: float
    lnsq: float
    u_norm: float
    v_l1: float
    theta_l1: float
    prod_diff_edge: float
    visc_lb: float
    corner_t1: float
    corner_t2: float
    min_theta: float
    max_theta: float

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def as_row(self):
        return [getattr(self, name) for name in self.field_names()]


@dataclass(frozen=True)
class WindowMetrics:
    """Unit-window averages used by the stabilization checks."""

    t0: float
    w_theta_half: float
    w_theta_1: float
    w_ut: float
    theta_inf: float
    L: float


@dataclass(frozen=True)
class LimitReport:
    """Estimated large-time limits of the entropy mean and the temperature."""

    L: float
    theta_inf: float
    theta_inf_energy: float
    converged: bool


def _safe_ratio(num, den):
    """num / den with the 0/0 convention -> 0 (numerator-null integrands)."""
    out = np.zeros_like(num)
    nz = num != 0.0
    with np.errstate(divide="ignore"):
        out[nz] = num[nz] / den[nz]
    return out


class Diagnostics:
    """Bound evaluator: one grid, one tensor set, one (floored) law, one M."""

    def __init__(self, grid, tensors, model, d_diff, m_shift=M_DEFAULT):
        if m_shift < M_DEFAULT - 1e-9:
            raise ConfigError("diagnostics need M >= e^4")
        self.grid = grid
        self.tensors = tensors
        self.model = model
        self.d_diff = float(d_diff)
        self.m_shift = float(m_shift)
        self.comp_D = tn.component_matrix(tensors.D4)
        self.comp_C = tn.component_matrix(tensors.C4)
        self.a_n = grid.neumann_weighted()

    def record(self, state, forcing):
        g = self.grid
        model = self.model
        m_shift = self.m_shift
        theta = state.theta
        v = state.v

        speed2 = v[..., 0] ** 2 + v[..., 1] ** 2
        kinetic = 0.5 * g.integrate(speed2)
        strain_u = g.sym_grad(state.u)
        elastic = 0.5 * g.integrate(
            np.einsum("ab,ija,ijb->ij", self.comp_C, strain_u, strain_u))
        thermal = g.integrate(model.K(theta))

        strain = g.sym_grad(v)
        qd = np.einsum("ab,ija,ijb->ij", self.comp_D, strain, strain)
        strain_sq = strain[..., 0] ** 2 + strain[..., 1] ** 2 + 2.0 * strain[..., 2] ** 2
        strain_abs = np.sqrt(strain_sq)

        gt = g.grad(theta)
        grad_sq = gt[..., 0] ** 2 + gt[..., 1] ** 2

        with np.errstate(divide="ignore", invalid="ignore"):
            s_val = g.integrate(model.ell(theta))
            p_diff = self.d_diff * g.integrate(_safe_ratio(grad_sq, theta ** 2))
            p_visc = g.integrate(_safe_ratio(qd, theta))
            g_field = forcing.g(state.t, g)
            p_src = g.integrate(_safe_ratio(g_field, theta))
            log_e = np.log(theta + _E) ** 2
            l1 = self.d_diff * g.integrate(log_e * grad_sq / (theta + 1.0) ** 2)
            l2 = g.integrate(log_e * strain_sq / (theta + 1.0))
            lnsq = g.integrate(np.where(theta > 0, np.log(
                np.maximum(theta, 1e-300)) ** 2, np.inf))
            log_m = np.log(theta + m_shift) ** 2
            corner_t1 = g.integrate(log_m * grad_sq / (theta + m_shift) ** 2)
            corner_t2 = g.integrate(log_m * strain_sq / (theta + m_shift))
            if theta.min() > 0.0:
                prod_edge = self.d_diff * float(
                    (1.0 / theta.ravel()) @ (self.a_n @ theta.ravel()))
            else:
                # an edge with theta = 0 next to theta > 0 makes the
                # Dirichlet-form production genuinely infinite
                prod_edge = math.inf
            visc_lb = self.tensors.kD * g.integrate(_safe_ratio(strain_sq, theta))

        return DiagnosticsRecord(
            t=state.t,
            kinetic=kinetic, elastic=elastic, thermal=thermal,
            F=kinetic + elastic + thermal,
            S=s_val,
            S_hat=g.integrate(model.ell_hat(theta, m_shift)),
            P_diff=p_diff, P_visc=p_visc, P_src=p_src,
            L1=l1, L2=l2,
            llogl=g.integrate(strain_abs * np.log(strain_abs + _E)),
            lnsq=lnsq,
            u_norm=math.sqrt(g.integrate(state.u[..., 0] ** 2 + state.u[..., 1] ** 2)),
            v_l1=g.integrate(np.sqrt(speed2)),
            theta_l1=g.integrate(np.abs(theta)),
            prod_diff_edge=prod_edge,
            visc_lb=visc_lb,
            corner_t1=corner_t1, corner_t2=corner_t2,
            min_theta=float(theta.min()), max_theta=float(theta.max()),
        )


def energy_balance_residual(rec_k, rec_k1, step_work):
    """F(t+) - F(t) + eps-dissipation - work done by the sources.

    The semi-implicit step makes this exactly the (nonpositive) numerical
    dissipation, so values above +1e-9 F(0) indicate a broken balance.
    """
    return (rec_k1.F - rec_k.F + step_work.eps_dissipation
            - step_work.work_f - step_work.work_g)


def entropy_balance_residual(rec_k, rec_k1, dt):
    """Entropy increment minus dt times the solver-consistent production.

    Uses the edge-form diffusion production and the coercivity-lower-bounded
    viscous production at the end state; the implicit step makes the result
    nonnegative up to solver tolerance whenever g >= 0.
    """
    production = rec_k1.prod_diff_edge + rec_k1.visc_lb + rec_k1.P_src
    return (rec_k1.S - rec_k.S) - dt * production


def log_entropy_inequality(rec_k, rec_k1, dt, tensors, d_diff, area,
                           m_shift=M_DEFAULT, rel_tol=1e-8):
    """Per-step form of the log-weighted entropy inequality.

    Checks  dS_hat >= dt [ (D/4) T1 + (kD/2) T2 - c1 int |v|^2 - c2 ] - tol
    with the explicit constants c1 = 4 |B|^2 / D and
    c2 = 2 M^2 |B|^2 |Omega| / (e^2 kD), evaluated at the end state.
    """
    b2 = tensors.b_norm ** 2
    c1 = 4.0 * b2 / d_diff
    c2 = 2.0 * m_shift ** 2 * b2 * area / (math.e ** 2 * tensors.kD)
    t1 = rec_k1.corner_t1
    t2 = rec_k1.corner_t2
    v_sq = 2.0 * rec_k1.kinetic
    lhs = rec_k1.S_hat - rec_k.S_hat
    rhs = dt * (0.25 * d_diff * t1 + 0.5 * tensors.kD * t2 - c1 * v_sq - c2)
    tol = rel_tol * (1.0 + abs(rec_k1.S_hat))
    return {
        "lhs": lhs, "rhs": rhs, "margin": lhs - rhs, "tol": tol,
        "holds": bool(lhs >= rhs - tol),
        "t1": t1, "t2": t2, "c1": c1, "c2": c2, "v_sq": v_sq,
    }


def theta_infinity(records, model, area, energy_budget=None, mono_tol=1e-8):
    """Large-time limits from a window of records near the final time.

    L is the window mean of S / |Omega| and theta_inf its image under the
    inverse entropy primitive.  When an energy budget (F(0) plus cumulative
    source work) is supplied, the energy-based cross-check solves
    K(theta) |Omega| = budget, which is the limit value when the mechanical
    energy has fully relaxed.
    """
    if len(records) < 10:
        raise ConfigError("theta_infinity needs a window of at least 10 records")
    s_vals = np.array([r.S for r in records])
    drops = np.diff(s_vals)
    converged = bool(np.all(drops >= -mono_tol * (1.0 + np.abs(s_vals[:-1]))))
    big_l = float(s_vals.mean()) / area
    theta_inf = model.ell_inverse(big_l)
    theta_energy = math.nan
    if energy_budget is not None:
        theta_energy = model.K_inverse(energy_budget / area)
    return LimitReport(L=big_l, theta_inf=theta_inf,
                       theta_inf_energy=theta_energy, converged=converged)


@dataclass(frozen=True)
class WindowSample:
    """One retained temperature snapshot for window metrics."""

    t: float
    theta: np.ndarray
    v_l1: float


def window_metrics(samples, grid, t0, theta_inf, L=math.nan):
    """Time-trapezoid of the stabilization integrands over [t0, t0 + 1].

    samples must cover the window densely (cadence at most 0.05); endpoint
    values are linearly interpolated so the window is exact.
    """
    times = np.array([s.t for s in samples])
    if times.size < 3 or times[0] > t0 + 1e-9 or times[-1] < t0 + 1.0 - 1e-9:
        raise ConfigError(f"window [{t0}, {t0 + 1}] is not covered by samples")
    if np.max(np.diff(times)) > 0.05 + 1e-12:
        raise ConfigError("window metrics need sample cadence <= 0.05")

    half = np.array([grid.integrate(np.sqrt(np.abs(s.theta - theta_inf)))
                     for s in samples])
    one = np.array([grid.integrate(np.abs(s.theta - theta_inf)) for s in samples])
    ut = np.array([s.v_l1 for s in samples])

    def clip_trapz(vals):
        lo, hi = t0, t0 + 1.0
        inside = (times > lo) & (times < hi)
        ts = np.concatenate([[lo], times[inside], [hi]])
        vs = np.concatenate([[np.interp(lo, times, vals)], vals[inside],
                             [np.interp(hi, times, vals)]])
        return float(np.trapezoid(vs, ts))

    return WindowMetrics(t0=t0, w_theta_half=clip_trapz(half),
                         w_theta_1=clip_trapz(one), w_ut=clip_trapz(ut),
                         theta_inf=theta_inf, L=L)
