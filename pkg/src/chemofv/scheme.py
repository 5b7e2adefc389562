"""Linearly implicit IMEX stepper: solve the chemoattractant system first with
the old density as source, then the density system with the fresh motility.

Both matrices are M-matrices, so positive data stays positive for any time
step.  `run` drives a (dt, count) schedule, applies the per-step structure
checks (mass, positivity, entropy budget, per-step duality inequality), and
collects the observable series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diagnostics as diag
from .linsolve import SparseSystem, assemble_edge_system, poisson_solver, solve
from .mesh import DiscreteField, Mesh, discrete_seminorm, mean_value
from .params import SchemeParams, total_time

__all__ = [
    "State",
    "SchemeError",
    "assemble_Mv",
    "assemble_Mu",
    "step",
    "run",
    "stationary_v_init",
    "initial_state",
]


class SchemeError(RuntimeError):
    """A runtime contract of the scheme was violated."""


@dataclass
class State:
    u: DiscreteField
    v: DiscreteField
    step: int = 0
    t: float = 0.0


def assemble_Mv(mesh: Mesh, params: SchemeParams, dt: float) -> SparseSystem:
    """Chemoattractant matrix: diag m(K)(eps + dt beta) + delta dt sum tau,
    off-diagonal -delta dt tau.  Independent of the state."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    base = mesh.cell_volumes * (params.eps + dt * params.beta)
    coeff = params.delta * dt * mesh.int_tau
    return assemble_edge_system(mesh, base, coeff, coeff)


def assemble_Mu(mesh: Mesh, params: SchemeParams, dt: float, v: DiscreteField) -> SparseSystem:
    """Density matrix for the motility gamma(v): diag m(K) + dt sum tau gamma(v_K),
    entry (K, L) = -dt tau gamma(v_L) -- the off-diagonal carries the
    neighbor's motility, which makes the column sums equal m(K)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    gamma = params.motility(v.values)
    coeff_K = dt * mesh.int_tau * gamma[mesh.int_K]
    coeff_L = dt * mesh.int_tau * gamma[mesh.int_L]
    return assemble_edge_system(mesh, mesh.cell_volumes.copy(), coeff_K, coeff_L)


def step(
    state: State,
    mesh: Mesh,
    params: SchemeParams,
    dt: float,
    mv: SparseSystem | None = None,
) -> State:
    """One IMEX step: v-solve from the old density, then u-solve with gamma(v_new)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if np.any(state.u.values < 0):
        raise SchemeError("density has negative components")
    if mv is None:
        mv = assemble_Mv(mesh, params, dt)
    vol = mesh.cell_volumes
    b_v = vol * (params.eps * state.v.values + dt * state.u.values)
    v_new = solve(mv, b_v, params.solver_tol)
    mu_sys = assemble_Mu(mesh, params, dt, DiscreteField(v_new, mesh))
    u_new = solve(mu_sys, vol * state.u.values, params.solver_tol)
    return State(
        u=DiscreteField(u_new, mesh),
        v=DiscreteField(v_new, mesh),
        step=state.step + 1,
        t=state.t + dt,
    )


def stationary_v_init(mesh: Mesh, params: SchemeParams, u0: DiscreteField) -> DiscreteField:
    """Solve the stationary chemoattractant balance (-delta Lap + beta) v = u0.

    Row sums give beta <v> = <u0> by construction.
    """
    base = mesh.cell_volumes * params.beta
    coeff = params.delta * mesh.int_tau
    system = assemble_edge_system(mesh, base, coeff, coeff)
    v = solve(system, mesh.cell_volumes * u0.values, params.solver_tol)
    return DiscreteField(v, mesh)


def initial_state(
    mesh: Mesh, params: SchemeParams, u0: DiscreteField, v0: DiscreteField | None = None
) -> State:
    """Pack initial fields; with eps = 0 the chemoattractant may be omitted and
    is produced by the stationary solve."""
    if np.any(u0.values < 0):
        raise ValueError("initial density must be nonnegative")
    if v0 is None:
        if params.eps > 0:
            raise ValueError("eps > 0 needs an initial chemoattractant field")
        v0 = stationary_v_init(mesh, params, u0)
    elif np.any(v0.values < 0):
        raise ValueError("initial chemoattractant must be nonnegative")
    return State(u=u0.copy(), v=v0.copy(), step=0, t=0.0)


class _Monitor:
    """Per-step structure checks; raises SchemeError on the first violation
    unless collect=True, in which case violations are tallied."""

    def __init__(self, mesh, params, state0, summary, collect=False):
        self.mesh = mesh
        self.params = params
        self.summary = summary
        self.collect = collect
        self.u0_mean = mean_value(state0.u)
        self.strict_positive = float(np.min(state0.u.values)) > 0 and float(
            np.min(state0.v.values)
        ) > 0
        self.exponential = params.motility.entropy_dissipative
        self.v_mean_product = 1.0
        self.v0_mean = mean_value(state0.v)
        if self.exponential:
            self.poisson = poisson_solver(mesh)
            self.prev_entropy = diag.entropy(state0.u, state0.v, mesh, params).total
            self.prev_dual_sq = self._dual_sq(state0.u)
            summary.initial_dual_sq = self.prev_dual_sq
            summary.max_dual_sq = self.prev_dual_sq

    def _dual_sq(self, u: DiscreteField) -> float:
        w = u.values - mean_value(u)
        scale = float(np.max(np.abs(u.values)))
        if float(np.max(np.abs(w))) <= 1e-13 * (1.0 + scale):
            return 0.0  # homogeneous up to roundoff
        # second centering pass: the first leaves a roundoff mean at the scale
        # of u, which can dominate a tiny fluctuation field
        w -= np.dot(self.mesh.cell_volumes, w) / self.mesh.domain_measure
        z = self.poisson.solve_values(w)
        return discrete_seminorm(DiscreteField(z, self.mesh), 2) ** 2

    def _flag(self, kind, detail):
        self.summary.violations.append((kind, detail))
        if not self.collect:
            raise SchemeError(f"{kind}: {detail}")

    def after_step(self, prev: State, new: State, dt: float) -> float:
        """Run all checks; returns the dual norm N(u - <u0>) of the new state
        (nan when it is not computed)."""
        p, s = self.params, self.summary
        s.steps += 1
        vol = self.mesh.cell_volumes

        u_min = float(np.min(new.u.values))
        v_min = float(np.min(new.v.values))
        s.min_u = min(s.min_u, u_min)
        s.min_v = min(s.min_v, v_min)
        if self.strict_positive:
            if u_min <= 0 or v_min <= 0:
                self._flag("positivity", f"step {new.step}: min u={u_min}, min v={v_min}")
        elif u_min < 0 or v_min < 0:
            self._flag("nonnegativity", f"step {new.step}: min u={u_min}, min v={v_min}")

        u_mean = mean_value(new.u)
        mass_err = abs(u_mean - self.u0_mean)
        s.mass_worst = max(s.mass_worst, mass_err)
        if mass_err > 10 * p.solver_tol * max(abs(self.u0_mean), 1e-300):
            self._flag("mass", f"step {new.step}: |<u>-<u0>| = {mass_err:.3e}")

        self.v_mean_product *= p.eps / (p.eps + p.beta * dt)
        v_mean_pred = self.u0_mean / p.beta + self.v_mean_product * (
            self.v0_mean - self.u0_mean / p.beta
        )
        v_err = abs(mean_value(new.v) - v_mean_pred)
        s.v_mean_worst = max(s.v_mean_worst, v_err)
        if v_err > 1e-9 * max(1.0, abs(v_mean_pred)):
            self._flag("v-mean", f"step {new.step}: closed-form gap {v_err:.3e}")

        dual = math.nan
        if self.exponential:
            gamma = p.motility(new.v.values)
            s.max_gamma = max(s.max_gamma, float(gamma.max()))
            if s.max_gamma > 1 + 1e-14:
                self._flag("gamma-bound", f"step {new.step}: max gamma = {s.max_gamma}")

            h_new = diag.entropy(new.u, new.v, self.mesh, p).total
            d_new = diag.dissipation(new.u, new.v, prev.v, self.mesh, p, dt)
            slack = 1e-12 * (1.0 + abs(self.prev_entropy))
            s.entropy_checked += 1
            if h_new + dt * d_new > self.prev_entropy + slack:
                s.entropy_violations += 1
                self._flag(
                    "entropy",
                    f"step {new.step}: H + dt D - H_prev = "
                    f"{h_new + dt * d_new - self.prev_entropy:.3e}",
                )
            self.prev_entropy = h_new

            dual_sq = self._dual_sq(new.u)
            ugamma2 = float(np.dot(vol, new.u.values ** 2 * gamma))
            rhs = self.prev_dual_sq + 2 * dt * self.mesh.domain_measure * self.u0_mean ** 2
            lhs = dual_sq + 2 * dt * ugamma2
            s.duality_checked += 1
            if lhs > rhs + 1e-10 * (1.0 + abs(rhs)):
                s.duality_violations += 1
                self._flag("duality", f"step {new.step}: per-step gap {lhs - rhs:.3e}")
            self.prev_dual_sq = dual_sq
            s.max_dual_sq = max(s.max_dual_sq, dual_sq)
            s.sum_dt_ugamma2 += dt * ugamma2
            dual = math.sqrt(dual_sq)
        return dual


def _record(mesh, params, state, dissipation_val, dual_val) -> diag.ObservableRecord:
    ent = diag.entropy(state.u, state.v, mesh, params)
    gamma = params.motility(state.v.values)
    ugamma2 = float(np.dot(mesh.cell_volumes, state.u.values ** 2 * gamma))
    if math.isnan(dual_val):
        try:
            w = state.u.values - mean_value(state.u)
            scale = float(np.max(np.abs(state.u.values)))
            if float(np.max(np.abs(w))) <= 1e-13 * (1.0 + scale):
                dual_val = 0.0
            else:
                w -= np.dot(mesh.cell_volumes, w) / mesh.domain_measure
                z = poisson_solver(mesh).solve_values(w)
                dual_val = discrete_seminorm(DiscreteField(z, mesh), 2)
        except Exception:
            dual_val = math.nan
    return diag.ObservableRecord(
        time=state.t,
        u_mean=mean_value(state.u),
        v_mean=mean_value(state.v),
        entropy=ent.total,
        dissipation=dissipation_val,
        entropy_boltzmann=ent.boltzmann,
        entropy_quadratic=ent.quadratic,
        entropy_cross=ent.cross,
        entropy_gradient=ent.gradient,
        u_max=float(np.max(np.abs(state.u.values))),
        v_max=float(np.max(np.abs(state.v.values))),
        u_dual_norm=dual_val,
        ugamma_l2_sq=ugamma2,
        dvdt_mean=math.nan,
        dvdt_l2=math.nan,
    )


def run(
    initial: State,
    mesh: Mesh,
    params: SchemeParams,
    t_final: float | None = None,
    observers=(),
    on_step=(),
    record_every: int = 1,
    check_structure: bool = True,
    collect_violations: bool = False,
) -> diag.ObservableSeries:
    """Step through the schedule, checking the structure contracts each step
    and recording observables every `record_every` steps (plus first/last).

    `observers` are called as observer(mesh, params, state, record) whenever a
    record is emitted; `on_step` callbacks as cb(prev_state, new_state, dt)
    after every step.  Observers must not mutate the state.
    """
    schedule = params.schedule
    horizon = total_time(schedule)
    if t_final is not None and horizon < t_final * (1 - 1e-12):
        raise ValueError(f"schedule covers {horizon}, which is short of t_final={t_final}")

    series = diag.ObservableSeries(
        u0_mean=mean_value(initial.u), domain_measure=mesh.domain_measure
    )
    monitor = (
        _Monitor(mesh, params, initial, series.summary, collect=collect_violations)
        if check_structure
        else None
    )

    state = initial
    rec = _record(mesh, params, state, math.nan, math.nan)
    series.append(rec)
    for obs in observers:
        obs(mesh, params, state, rec)
    last_rec_step = state.step
    last_rec = rec

    done = False
    for seg_idx, (dt, count) in enumerate(schedule):
        if done or count == 0:
            continue
        mv = assemble_Mv(mesh, params, dt)
        for i in range(count):
            if t_final is not None and state.t >= t_final * (1 - 1e-12):
                done = True
                break
            new = step(state, mesh, params, dt, mv=mv)
            dual = monitor.after_step(state, new, dt) if monitor else math.nan
            for cb in on_step:
                cb(state, new, dt)
            if last_rec_step == state.step:
                # the previous record can now receive its forward difference
                w = (new.v.values - state.v.values) / dt
                wm = float(np.dot(mesh.cell_volumes, w) / mesh.domain_measure)
                last_rec.dvdt_mean = wm
                last_rec.dvdt_l2 = float(np.sqrt(np.dot(mesh.cell_volumes, (w - wm) ** 2)))
            is_final = (seg_idx == len(schedule) - 1 and i == count - 1) or (
                t_final is not None and new.t >= t_final * (1 - 1e-12)
            )
            if new.step % record_every == 0 or is_final:
                d_val = diag.dissipation(new.u, new.v, state.v, mesh, params, dt)
                rec = _record(mesh, params, new, d_val, dual)
                series.append(rec)
                for obs in observers:
                    obs(mesh, params, new, rec)
                last_rec_step, last_rec = new.step, rec
            state = new
    series.total_time = state.t
    series.final_state = state
    return series
