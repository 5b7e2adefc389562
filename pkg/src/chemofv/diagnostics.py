"""Structure-preserving observables: entropy and its dissipation, relative
entropy, the discrete dual norm, per-step duality budget, quasi-stationary
diagnostics, the linear-stability threshold, and the projection
counterexample."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linsolve import poisson_solver, smallest_nonzero_eigenvalue
from .mesh import DiscreteField, Mesh, build_uniform_1d, discrete_seminorm
from .params import SchemeParams

__all__ = [
    "EntropyBreakdown",
    "entropy",
    "dissipation",
    "relative_entropy",
    "dual_norm",
    "dual_potential",
    "ObservableRecord",
    "ObservableSeries",
    "StructureSummary",
    "DualityReport",
    "duality_budget",
    "APReport",
    "ap_observables",
    "stability_threshold",
    "CounterexampleReport",
    "projection_counterexample",
    "CSV_COLUMNS",
]


def _boltzmann(u: np.ndarray) -> np.ndarray:
    # h(x) = x(log x - 1) + 1 extended by h(0) = 1
    out = np.ones_like(u)
    pos = u > 0
    up = u[pos]
    out[pos] = up * (np.log(up) - 1.0) + 1.0
    return out


@dataclass(frozen=True)
class EntropyBreakdown:
    """Total entropy and its four constituent terms (total is their sum)."""

    total: float
    boltzmann: float
    quadratic: float
    cross: float
    gradient: float


def entropy(u: DiscreteField, v: DiscreteField, mesh: Mesh, params: SchemeParams) -> EntropyBreakdown:
    """Discrete entropy sum m(K)[h(u) + beta v^2/2 - u v] + (delta/2)|v|_{1,2}^2."""
    if np.any(u.values < 0):
        raise ValueError("entropy needs nonnegative u")
    vol = mesh.cell_volumes
    boltz = float(np.dot(vol, _boltzmann(u.values)))
    quad = float(0.5 * params.beta * np.dot(vol, v.values ** 2))
    cross = float(-np.dot(vol, u.values * v.values))
    grad = float(0.5 * params.delta * discrete_seminorm(v, 2) ** 2)
    return EntropyBreakdown(boltz + quad + cross + grad, boltz, quad, cross, grad)


def dissipation(
    u_n: DiscreteField,
    v_n: DiscreteField,
    v_prev: DiscreteField,
    mesh: Mesh,
    params: SchemeParams,
    dt: float,
) -> float:
    """4 sum tau (D sqrt(u gamma(v)))^2 + eps sum m(K) ((v^n - v^{n-1})/dt)^2."""
    if np.any(u_n.values < 0):
        raise ValueError("dissipation needs nonnegative u")
    s = np.sqrt(u_n.values * params.motility(v_n.values))
    jumps = s[mesh.int_L] - s[mesh.int_K]
    out = 4.0 * float(np.dot(mesh.int_tau, jumps ** 2))
    if params.eps > 0:
        rate = (v_n.values - v_prev.values) / dt
        out += params.eps * float(np.dot(mesh.cell_volumes, rate ** 2))
    return out


def relative_entropy(
    u: DiscreteField, v: DiscreteField, mu: float, params: SchemeParams, mesh: Mesh
) -> float:
    """Entropy relative to the homogeneous state (mu, mu/beta)."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    if np.any(u.values <= 0):
        raise ValueError("relative entropy needs positive u")
    u_star = mu
    v_star = mu / params.beta
    vol = mesh.cell_volumes
    du = u.values - u_star
    dv = v.values - v_star
    out = float(np.dot(vol, du * np.log(u.values / u_star)))
    out += float(0.5 * params.beta * np.dot(vol, dv ** 2))
    out -= float(np.dot(vol, du * dv))
    out += float(0.5 * params.delta * discrete_seminorm(v, 2) ** 2)
    return out


def dual_potential(w: DiscreteField) -> DiscreteField:
    """Zero-mean potential z of the discrete Neumann Poisson problem with data w."""
    return poisson_solver(w.mesh).solve(w)


def dual_norm(w: DiscreteField) -> float:
    """Discrete (H^1)'-type norm of a zero-mean field: |z|_{1,2} for the
    potential z."""
    z = dual_potential(w)
    return discrete_seminorm(z, 2)


# --- observable series ------------------------------------------------------

CSV_COLUMNS = (
    "time",
    "u_mean",
    "v_mean",
    "entropy",
    "dissipation",
    "entropy_boltzmann",
    "entropy_quadratic",
    "entropy_cross",
    "entropy_gradient",
    "u_max",
    "v_max",
    "u_dual_norm",
    "ugamma_l2_sq",
    "dvdt_mean",
    "dvdt_l2",
)


@dataclass
class ObservableRecord:
    time: float
    u_mean: float
    v_mean: float
    entropy: float
    dissipation: float
    entropy_boltzmann: float
    entropy_quadratic: float
    entropy_cross: float
    entropy_gradient: float
    u_max: float
    v_max: float
    u_dual_norm: float
    ugamma_l2_sq: float
    dvdt_mean: float = math.nan
    dvdt_l2: float = math.nan

    def row(self) -> str:
        return ",".join(repr(getattr(self, c)) for c in CSV_COLUMNS)


@dataclass
class StructureSummary:
    """Running tallies from the per-step structure checks of a run."""

    steps: int = 0
    entropy_checked: int = 0
    entropy_violations: int = 0
    duality_checked: int = 0
    duality_violations: int = 0
    mass_worst: float = 0.0
    v_mean_worst: float = 0.0
    min_u: float = math.inf
    min_v: float = math.inf
    max_gamma: float = 0.0
    max_dual_sq: float = 0.0
    initial_dual_sq: float = 0.0
    sum_dt_ugamma2: float = 0.0
    violations: list = field(default_factory=list)


@dataclass
class ObservableSeries:
    """Time-indexed observables of a run plus run-level metadata."""

    records: list = field(default_factory=list)
    u0_mean: float = math.nan
    domain_measure: float = math.nan
    total_time: float = 0.0
    summary: StructureSummary = field(default_factory=StructureSummary)
    final_state: object | None = None  # filled by the runner

    def append(self, rec: ObservableRecord) -> None:
        if self.records and not rec.time > self.records[-1].time:
            raise ValueError("record times must be strictly increasing")
        self.records.append(rec)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for rec in self.records:
                fh.write(rec.row() + "\n")

    @staticmethod
    def read_csv(path) -> dict[str, np.ndarray]:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            rows = [ln.strip().split(",") for ln in fh if ln.strip()]
        data = np.array([[float(x) for x in row] for row in rows])
        if data.size == 0:
            data = data.reshape(0, len(header))
        return {name: data[:, i] for i, name in enumerate(header)}


@dataclass
class DualityReport:
    per_step_checked: int
    per_step_violations: int
    global_lhs: float
    global_rhs: float
    ok: bool
    details: list


def duality_budget(series: ObservableSeries) -> DualityReport:
    """Check the telescoped per-step duality inequality tallies of a run and
    the summed bound max N^2 + 2 sum dt ||u sqrt(gamma)||^2 <= N(0)^2 + 2 T m(Omega) <u0>^2."""
    s = series.summary
    lhs = s.max_dual_sq + 2.0 * s.sum_dt_ugamma2
    rhs = s.initial_dual_sq + 2.0 * series.total_time * series.domain_measure * series.u0_mean ** 2
    ok = s.duality_violations == 0 and lhs <= rhs * (1 + 1e-10) + 1e-14
    return DualityReport(
        per_step_checked=s.duality_checked,
        per_step_violations=s.duality_violations,
        global_lhs=lhs,
        global_rhs=rhs,
        ok=ok,
        details=list(s.violations),
    )


@dataclass
class APReport:
    xi: float
    w_mean: np.ndarray
    w_centered_l2: np.ndarray
    recursion_deviation: float
    w0_deviation: float


def ap_observables(
    v_fields, dt: float, params: SchemeParams, u0_mean: float | None = None
) -> APReport:
    """Finite differences w^n = (v^{n+1} - v^n)/dt of a constant-step v
    trajectory, with the closed-form mean checks.

    For eps > 0 the means follow <w^n> = <w^0>/(1+xi)^n with xi = beta dt/eps,
    and <w^0> = (<u^0> - beta <v^0>)/(eps (1+xi)); for eps = 0 the means
    vanish from n = 1 on.
    """
    if len(v_fields) < 2:
        raise ValueError("need at least 2 stored v snapshots")
    mesh = v_fields[0].mesh
    vol = mesh.cell_volumes
    m_omega = mesh.domain_measure
    w_mean = []
    w_l2 = []
    for a, b in zip(v_fields[:-1], v_fields[1:]):
        w = (b.values - a.values) / dt
        mean = float(np.dot(vol, w) / m_omega)
        w_mean.append(mean)
        w_l2.append(float(np.sqrt(np.dot(vol, (w - mean) ** 2))))
    w_mean = np.array(w_mean)
    w_l2 = np.array(w_l2)

    if params.eps > 0:
        xi = params.beta * dt / params.eps
        n = np.arange(len(w_mean))
        predicted = w_mean[0] / (1.0 + xi) ** n
        scale = max(abs(w_mean[0]), 1e-300)
        deviation = float(np.max(np.abs(w_mean - predicted)) / scale)
        w0_dev = math.nan
        if u0_mean is not None:
            v0_mean = float(np.dot(vol, v_fields[0].values) / m_omega)
            w0_pred = (u0_mean - params.beta * v0_mean) / (params.eps * (1.0 + xi))
            w0_dev = abs(w_mean[0] - w0_pred) / max(abs(w0_pred), 1e-300)
    else:
        xi = math.inf
        deviation = float(np.max(np.abs(w_mean[1:]))) if len(w_mean) > 1 else 0.0
        w0_dev = math.nan
    return APReport(xi, w_mean, w_l2, deviation, w0_dev)


def stability_threshold(mesh: Mesh, params: SchemeParams, tol: float = 1e-10) -> float:
    """Critical mass beta + delta * lambda_1 of the FV Laplacian on this mesh."""
    if params.delta == 0:
        return params.beta
    return params.beta + params.delta * smallest_nonzero_eigenvalue(mesh, tol)


@dataclass
class CounterexampleReport:
    m: int
    r: int
    n_value: float
    lower_bound: float
    dual_upper_bound: float
    certified_ratio: float


def projection_counterexample(m: int, r: int) -> CounterexampleReport:
    """Dipole of point masses at +-1/r projected on the 2m-cell grid over
    (-1,1): the dual norm of the projection stays >= 1/sqrt(m) while the
    (H^1)' norm of the dipole is <= sqrt(2)/sqrt(r)."""
    if m < 2:
        raise ValueError("need m >= 2")
    if r < m:
        raise ValueError("need r >= m")
    mesh = build_uniform_1d(-1.0, 1.0, 2 * m)
    values = np.zeros(2 * m)
    values[m - 1] = -float(m)
    values[m] = float(m)
    n_value = dual_norm(DiscreteField(values, mesh))
    lower = 1.0 / math.sqrt(m)
    upper = math.sqrt(2.0) / math.sqrt(r)
    if not n_value >= lower * (1 - 1e-12):
        raise AssertionError(f"dual norm {n_value} fell below the bound {lower}")
    return CounterexampleReport(m, r, n_value, lower, upper, n_value / upper)
