"""Semi-implicit time stepping for the regularized Kelvin-Voigt system.

One step advances (u, v, theta) by:

    (W + dt A_D + dt eps A_R + dt^2 A_C) v+ = W v + dt (-A_C u + T_B theta+ + W f)
    u+ = u + dt v+
    [kappa_bar/dt + b - D lap_N] theta+ = kappa_bar theta/dt + q + g

where A_D, A_C are the quadrature-exact viscous/elastic stiffness forms,
T_B the thermal-force operator, b = <B, sym_grad v+> and
q = <D: sym_grad v+, sym_grad v+> are nodal fields, and kappa_bar is the
chord mean of the (floored) heat capacity over [theta, theta+].

The velocity and temperature solves are iterated to a joint fixed point, so
the thermal force uses the same end-of-step temperature that the heat
equation cools with, and the dt^2 elastic term evaluates the elastic force
at the end-of-step displacement.  With those choices the discrete total
energy obeys

    F+ - F = -1/2 |v+ - v|_W^2 - dt^2/2 <C: sym_grad v+, sym_grad v+>
             - dt eps |lap^m v+|^2 + dt (f . v+) + dt int g

exactly (to solver tolerance), and the discrete entropy sum of ell(theta) is
nondecreasing whenever g >= 0: the viscous heating q converts one-for-one,
the exchange integral of <B, sym_grad v+> vanishes identically on
boundary-clamped fields, and the implicit heat solve is an M-matrix, which
also yields strictly positive temperatures under the diagonal guard.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import tensors as tn
from .errors import ConfigError, SolverError, StepError
from .grid import solve_spd


@dataclass
class FieldState:
    """Displacement u, velocity v = u_t and temperature theta at time t."""

    u: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    t: float = 0.0

    def validate(self, grid):
        shp = (grid.ny, grid.nx)
        if self.u.shape != shp + (2,) or self.v.shape != shp + (2,):
            raise ConfigError("u and v must have shape (ny, nx, 2)")
        if self.theta.shape != shp:
            raise ConfigError("theta must have shape (ny, nx)")
        bmask = grid.boundary_mask
        if np.any(self.u[bmask] != 0.0) or np.any(self.v[bmask] != 0.0):
            raise ConfigError("u and v must vanish on boundary nodes")
        if np.any(self.theta < 0.0):
            raise ConfigError("theta must be nonnegative")

    def copy(self):
        return FieldState(self.u.copy(), self.v.copy(), self.theta.copy(), self.t)


@dataclass
class SolverConfig:
    """Time-step controls for the semi-implicit integrator."""

    dt0: float = 0.01
    dt_min: float = 1e-7
    dt_max: float = 0.01
    eps_reg: float = 0.0
    m: int = 1
    theta_safety: float = 0.5
    cg_tol: float = 1e-12
    cg_maxiter_factor: int = 10
    picard_tol: float = 1e-11
    picard_max: int = 80
    kappa_secant: bool = True
    single_pass: bool = False
    dt_growth: float = 1.2

    def validate(self):
        if not (0 < self.dt_min <= self.dt0 <= self.dt_max):
            raise ConfigError("need 0 < dt_min <= dt0 <= dt_max")
        if self.eps_reg < 0:
            raise ConfigError("eps_reg must be >= 0")
        if self.eps_reg > 0 and not 1 <= self.m <= 3:
            raise ConfigError("regularization order m must lie in 1..3")
        if not 0.0 < self.theta_safety < 1.0:
            raise ConfigError("theta_safety must lie in (0, 1)")


class Forcing:
    """Time-dependent sources: f drives the momentum, g >= 0 heats."""

    def f(self, t, grid):
        return np.zeros((grid.ny, grid.nx, 2))

    def g(self, t, grid):
        return np.zeros((grid.ny, grid.nx))

    def describe(self):
        return {"type": "zero"}


class ZeroForcing(Forcing):
    pass


class PulseForcing(Forcing):
    """Time-compact mechanical pulse and exponentially decaying heat source.

    Both envelopes are integrable in time, so the decay hypotheses of the
    stabilization results hold along these runs.
    """

    def __init__(self, amp_f=0.0, t0=1.0, tau_f=0.25, amp_g=0.0, tau_g=1.0):
        if amp_g < 0:
            raise ConfigError("heat-source amplitude must be >= 0")
        self.amp_f = amp_f
        self.t0 = t0
        self.tau_f = tau_f
        self.amp_g = amp_g
        self.tau_g = tau_g

    def f(self, t, grid):
        env = self.amp_f * math.exp(-((t - self.t0) / self.tau_f) ** 2)
        out = np.zeros((grid.ny, grid.nx, 2))
        out[..., 0] = env * np.sin(np.pi * grid.X / grid.Lx) * np.sin(np.pi * grid.Y / grid.Ly)
        return out

    def g(self, t, grid):
        env = self.amp_g * math.exp(-t / self.tau_g)
        r2 = (grid.X - 0.5 * grid.Lx) ** 2 + (grid.Y - 0.5 * grid.Ly) ** 2
        return env * np.exp(-r2 / (0.1 * grid.Lx) ** 2 / 2.0)

    def describe(self):
        return {"type": "pulse", "amp_f": self.amp_f, "t0": self.t0,
                "tau_f": self.tau_f, "amp_g": self.amp_g, "tau_g": self.tau_g}


class CallableForcing(Forcing):
    """Wraps callables (t, grid) -> field; clips g roundoff below zero."""

    def __init__(self, f_fn=None, g_fn=None, label="callable"):
        self.f_fn = f_fn
        self.g_fn = g_fn
        self.label = label

    def f(self, t, grid):
        return super().f(t, grid) if self.f_fn is None else self.f_fn(t, grid)

    def g(self, t, grid):
        if self.g_fn is None:
            return super().g(t, grid)
        out = self.g_fn(t, grid)
        if out.min() < -1e-10 * (1.0 + abs(out.max())):
            raise ConfigError(f"heat source went negative: min g = {out.min():g}")
        return np.maximum(out, 0.0)

    def describe(self):
        return {"type": self.label}


@dataclass
class StepReport:
    """Exact per-step bookkeeping used by the diagnostics and the manifest."""

    t_new: float
    dt: float
    picard_iters: int
    cg_iters_velocity: int
    cg_iters_heat: int
    rejections: int
    work_f: float
    work_g: float
    eps_dissipation: float
    energy_residual: float
    entropy_residual: float
    F_old: float
    F_new: float
    S_old: float
    S_new: float
    prod_diffusion: float
    prod_viscous_lb: float
    prod_source: float
    exchange_sum: float
    min_theta: float


class Integrator:
    """Owns the assembled operators and advances one FieldState in time."""

    def __init__(self, grid, tensors, model, config):
        config.validate()
        self.grid = grid
        self.tensors = tensors
        self.model = model  # the (possibly floored) law actually integrated
        self.config = config
        self.comp_D = tn.component_matrix(tensors.D4)
        self.comp_C = tn.component_matrix(tensors.C4)
        self.b_triple = tensors.b_triple
        idx2 = np.concatenate([grid.interior_idx, grid.interior_idx + grid.n_nodes])
        self._idx2 = idx2
        self.A_D = grid.interior_submatrix(grid.quadratic_form_matrix(self.comp_D))
        self.A_C = grid.interior_submatrix(grid.quadratic_form_matrix(self.comp_C))
        self.T_B = grid.coupling_force_matrix(self.b_triple)
        self.A_N = grid.neumann_weighted()
        self.w_flat = grid.weights.ravel()
        w2 = np.concatenate([self.w_flat, self.w_flat])
        self.w2_int = w2[idx2]
        self.D_diff = None  # set via diffusivity property
        self._vel_cache = {}
        self._heat_base = None
        self._heat_diag_pos = None
        self._reg_block = self._build_regularization() if config.eps_reg > 0 else None
        self.dt_prev = config.dt0

    # -- setup -----------------------------------------------------------
    def set_diffusivity(self, d_diff):
        if d_diff <= 0:
            raise ConfigError("diffusivity D must be positive")
        self.D_diff = float(d_diff)
        base = (-d_diff) * self.A_N
        base = base.tocsr()
        base.sort_indices()
        self._heat_base = base
        self._heat_diag_pos = self._diag_positions(base)
        return self

    def _build_regularization(self):
        lap = self.grid.dirichlet_laplacian_interior()
        op = (-lap)
        power = op
        for _ in range(2 * self.config.m - 1):
            power = (power @ op).tocsr()
        w_cell = self.grid.hx * self.grid.hy
        block = sp.block_diag([w_cell * power, w_cell * power], format="csr")
        half = op
        for _ in range(self.config.m - 1):
            half = (half @ op).tocsr()
        self._reg_half = sp.block_diag([half, half], format="csr")
        return block

    @staticmethod
    def _diag_positions(a):
        pos = np.empty(a.shape[0], dtype=np.int64)
        for i in range(a.shape[0]):
            lo, hi = a.indptr[i], a.indptr[i + 1]
            cols = a.indices[lo:hi]
            j = np.searchsorted(cols, i)
            if j >= hi - lo or cols[j] != i:
                raise RuntimeError("matrix misses a diagonal entry")
            pos[i] = lo + j
        return pos

    def _velocity_matrix(self, dt):
        key = float(dt)
        if key not in self._vel_cache:
            if len(self._vel_cache) > 8:
                self._vel_cache.clear()
            m = sp.diags(self.w2_int) + dt * self.A_D + dt * dt * self.A_C
            pre_apply = None
            if self._reg_block is not None:
                m = m + dt * self.config.eps_reg * self._reg_block
                # the high-order term conditions the system like h^{-4m};
                # an exact factorization preconditioner keeps the iteration
                # count independent of that (a few refinement passes)
                pre_apply = sp.linalg.splu(m.tocsc()).solve
            m = m.tocsr()
            self._vel_cache[key] = (m, m.diagonal(), pre_apply)
        return self._vel_cache[key]

    # -- nodal contractions ------------------------------------------------
    def coupling_field(self, strain):
        """b = <B, E> at every node for a symmetric-matrix field E."""
        b = self.b_triple
        return b[0] * strain[..., 0] + b[1] * strain[..., 1] + 2.0 * b[2] * strain[..., 2]

    def heating_field(self, strain):
        """q = <D: E, E> at every node; nonnegative by coercivity."""
        return np.einsum("ab,...a,...b->...", self.comp_D, strain, strain)

    # -- step operations ----------------------------------------------------
    def velocity_step(self, state, forcing, dt, theta_force=None, x0=None):
        """Implicit velocity update; theta_force defaults to state.theta.

        The system matrix contains the viscous form, the optional high-order
        regularization and the dt^2 elastic term that evaluates the elastic
        force at the end-of-step displacement.
        """
        g = self.grid
        theta = state.theta if theta_force is None else theta_force
        f_field = forcing.f(state.t + dt, g)
        u_int = g.interior_vec(state.u)
        v_int = g.interior_vec(state.v)
        f_int = g.interior_vec(f_field)
        rhs = (self.w2_int * v_int
               + dt * (-(self.A_C @ u_int) + self.T_B @ theta.ravel()
                       + self.w2_int * f_int))
        m, diag, pre_apply = self._velocity_matrix(dt)
        x, iters = solve_spd(m, rhs, tol=self.config.cg_tol,
                             maxiter=self.config.cg_maxiter_factor * rhs.size,
                             x0=v_int if x0 is None else x0, precond_diag=diag,
                             precond_apply=pre_apply)
        return x, iters

    @staticmethod
    def displacement_step(u, v_new, dt):
        """u+ = u + dt v+, consistent with the implicit elastic pairing."""
        return u + dt * v_new

    def temperature_step(self, state, v_new, forcing, dt, theta_guess=None,
                         kappa_bar=None):
        """Positivity-preserving implicit heat update given the new velocity.

        Solves [kappa_bar/dt + b - D lap_N] theta+ = kappa_bar theta/dt + q + g.
        The system is an M-matrix whenever the diagonal guard
        kappa_bar/dt + b > 0 holds at every node; a violation raises StepError
        (the step is rejected, never clamped).
        """
        g = self.grid
        strain = g.sym_grad(v_new)
        b = self.coupling_field(strain).ravel()
        q = self.heating_field(strain).ravel()
        theta_old = state.theta.ravel()
        if kappa_bar is None:
            kappa_bar = self.model.kappa(state.theta).ravel()
        diag_add = self.w_flat * (kappa_bar / dt + b)
        if np.any(diag_add <= 0.0):
            node = int(np.argmin(kappa_bar / dt + b))
            raise StepError("temperature diagonal guard failed "
                            f"(kappa/dt + b <= 0 at node {node})", node=node, dt=dt)
        g_field = forcing.g(state.t + dt, g)
        if g_field.min() < 0.0:
            raise ConfigError("heat source g must be nonnegative")
        s = self._heat_base.copy()
        s.data[self._heat_diag_pos] += diag_add
        rhs = self.w_flat * (kappa_bar * theta_old / dt + q + g_field.ravel())
        x0 = theta_old if theta_guess is None else theta_guess.ravel()
        theta_new, iters = solve_spd(s, rhs, tol=self.config.cg_tol,
                                     maxiter=self.config.cg_maxiter_factor * rhs.size,
                                     x0=x0, precond_diag=s.diagonal())
        return theta_new.reshape(g.ny, g.nx), iters, b, q, g_field

    def adaptive_dt(self, state, v_new):
        """Largest admissible dt for the positivity guard, capped at dt_max.

        Requires dt <= safety * kappa(theta) / max(0, -b) at every node; when
        b >= 0 everywhere the guard does not bind.  Falling below dt_min is
        reported with the offending node.
        """
        strain = self.grid.sym_grad(v_new)
        b = self.coupling_field(strain)
        kap = self.model.kappa(state.theta)
        neg = np.maximum(0.0, -b)
        dt = self.config.dt_max
        if np.any(neg > 0):
            ratios = np.where(neg > 0, kap / np.where(neg > 0, neg, 1.0), np.inf)
            bound = self.config.theta_safety * float(ratios.min())
            if bound < self.config.dt_min:
                node = int(np.argmin(ratios))
                raise StepError(
                    f"positivity guard needs dt = {bound:.3e} < dt_min at node {node}",
                    node=node, dt=bound)
            dt = min(dt, bound)
        return dt

    # -- full step ---------------------------------------------------------
    def step(self, state, forcing, dt_request=None):
        """Advance one accepted step; returns (new_state, StepReport).

        Rejected attempts (guard, solver or positivity failures) halve dt and
        retry without mutating the input state.
        """
        cfg = self.config
        if self.D_diff is None:
            raise ConfigError("set_diffusivity must be called before stepping")
        dt = min(cfg.dt_max, self.dt_prev * cfg.dt_growth)
        if dt_request is not None:
            dt = min(dt, dt_request)
        dt = min(dt, self.adaptive_dt(state, state.v))
        rejections = 0
        while True:
            try:
                result = self._attempt(state, forcing, dt)
                break
            except (StepError, SolverError) as err:
                rejections += 1
                dt *= 0.5
                if dt < cfg.dt_min:
                    raise StepError(
                        f"step rejected below dt_min ({err})", dt=dt) from err
        new_state, report = result
        report.rejections = rejections
        self.dt_prev = report.dt
        return new_state, report

    def _attempt(self, state, forcing, dt):
        cfg = self.config
        g = self.grid
        model = self.model
        theta_old = state.theta
        kappa_bar = model.kappa(theta_old).ravel()
        theta_force = theta_old
        v_guess = None
        theta_field = theta_old
        picard_iters = 0
        it_v_total = it_h_total = 0
        for picard_iters in range(1, cfg.picard_max + 1):
            v_int, it_v = self.velocity_step(state, forcing, dt,
                                             theta_force=theta_force, x0=v_guess)
            it_v_total += it_v
            v_guess = v_int
            v_full = g.vec_from_interior(v_int)
            theta_new, it_h, b, q, g_field = self.temperature_step(
                state, v_full, forcing, dt, theta_guess=theta_field,
                kappa_bar=kappa_bar)
            it_h_total += it_h
            change = float(np.abs(theta_new - theta_force).max())
            scale = 1.0 + float(np.abs(theta_new).max())
            theta_force = theta_new
            theta_field = theta_new
            if cfg.kappa_secant:
                kappa_bar = np.asarray(
                    model.kappa_chord(theta_old.ravel(), theta_new.ravel()))
            if cfg.single_pass or change <= cfg.picard_tol * scale:
                break
        else:
            raise StepError(f"fixed-point iteration did not converge (last "
                            f"change {change:.2e})", dt=dt)
        min_theta = float(theta_new.min())
        if min_theta <= 0.0:
            node = int(np.argmin(theta_new))
            raise StepError(f"temperature positivity lost at node {node}",
                            node=node, dt=dt)

        u_new = self.displacement_step(state.u, v_full, dt)
        t_new = state.t + dt
        new_state = FieldState(u_new, v_full, theta_new, t_new)

        report = self._bookkeeping(state, new_state, forcing, dt, v_int, b, q,
                                   g_field, picard_iters, it_v_total, it_h_total)
        return new_state, report

    # -- exact energy / entropy bookkeeping --------------------------------
    def total_energy(self, state):
        """F = kinetic + elastic + thermal with the solver's own quadrature."""
        g = self.grid
        kinetic = 0.5 * g.integrate(state.v[..., 0] ** 2 + state.v[..., 1] ** 2)
        u_int = g.interior_vec(state.u)
        elastic = 0.5 * float(u_int @ (self.A_C @ u_int))
        thermal = float(np.sum(self.w_flat * self.model.K(state.theta).ravel()))
        return kinetic + elastic + thermal

    def entropy(self, state):
        """S = integral of ell(theta) for the integrated (floored) law."""
        return float(np.sum(self.w_flat * self.model.ell(state.theta).ravel()))

    def _bookkeeping(self, state, new_state, forcing, dt, v_int, b, q, g_field,
                     picard_iters, it_v, it_h):
        g = self.grid
        f_field = forcing.f(new_state.t, g)
        work_f = dt * g.integrate(f_field[..., 0] * new_state.v[..., 0]
                                  + f_field[..., 1] * new_state.v[..., 1])
        work_g = dt * g.integrate(g_field)
        eps_diss = 0.0
        if self._reg_block is not None:
            half = self._reg_half @ v_int
            eps_diss = dt * self.config.eps_reg * self.grid.hx * self.grid.hy \
                * float(half @ half)
        f_old = self.total_energy(state)
        f_new = self.total_energy(new_state)
        energy_residual = f_new - f_old + eps_diss - work_f - work_g

        s_old = self.entropy(state)
        s_new = self.entropy(new_state)
        theta_new_flat = new_state.theta.ravel()
        prod_diff = self.D_diff * float(
            (1.0 / theta_new_flat) @ (self.A_N @ theta_new_flat))
        strain = g.sym_grad(new_state.v)
        strain_sq = (strain[..., 0] ** 2 + strain[..., 1] ** 2
                     + 2.0 * strain[..., 2] ** 2)
        visc_lb = self.tensors.kD * float(
            np.sum(self.w_flat * strain_sq.ravel() / theta_new_flat))
        src = float(np.sum(self.w_flat * g_field.ravel() / theta_new_flat))
        entropy_residual = (s_new - s_old) - dt * (prod_diff + visc_lb + src)
        exchange = float(np.sum(self.w_flat * b))

        return StepReport(
            t_new=new_state.t, dt=dt, picard_iters=picard_iters,
            cg_iters_velocity=it_v, cg_iters_heat=it_h, rejections=0,
            work_f=work_f, work_g=work_g, eps_dissipation=eps_diss,
            energy_residual=energy_residual, entropy_residual=entropy_residual,
            F_old=f_old, F_new=f_new, S_old=s_old, S_new=s_new,
            prod_diffusion=prod_diff, prod_viscous_lb=visc_lb, prod_source=src,
            exchange_sum=exchange, min_theta=float(new_state.theta.min()))
