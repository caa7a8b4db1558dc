"""
Time marching of the bubble.

The production scheme is a two-stage exponential integrator (ETDRK2) in the
eigenvector frame y = S^{-1} Pf of the linear system: the stiff part
-a_k y_k is propagated exactly and the remainder N_{>=2} is interpolated
linearly over the step. An explicit RK4 on Pf is kept as a reference for
small cutoffs. The pole is integrated with the trapezoid rule.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from modules.contour_evolution import c_dot, full_rhs, projected_velocity_field
from modules.errors import (
    IntegrationAbort,
    InvariantViolationError,
    MuskatError,
    ParameterError,
    PicardEscapeError,
    StepRejectedError,
)
from modules.geometry import BubbleState, area, zero_mode_residual
from modules.linear_theory import DuhamelPropagator, build_diagonalizer, build_system
from modules.spectral_core import (
    NormSpec,
    grid_size,
    norm_f11,
    project_mean_zero,
    wiener_norm,
)
from modules.vorticity_solver import DEFAULT_TOLERANCE, VorticityField

logger = logging.getLogger(__name__)

SCHEMES = ("etdrk2-diagonalized", "rk4-explicit")
DEFAULT_NU = 0.1


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "etdrk2-diagonalized"
    dt: float = 1e-3
    t_end: float = 5.0
    n_max: int = 128
    tol_vorticity: float = DEFAULT_TOLERANCE
    safety: float = 2.0
    dealias_factor: float = 4.0
    norm_floor: float = 1e-13
    area_tolerance: float = 1e-8
    max_halvings: int = 20
    cfl_const: float = 2.5
    nu: float = DEFAULT_NU

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ParameterError("; ".join(problems))

    def problems(self):
        """List of violated constraints (empty when the configuration is usable)."""
        found = []
        if self.scheme not in SCHEMES:
            found.append(f"scheme must be one of {', '.join(SCHEMES)}")
        if not self.dt > 0:
            found.append("dt must be positive")
        if not self.t_end >= 0:
            found.append("t_end must be non-negative")
        if int(self.n_max) != self.n_max or self.n_max < 2:
            found.append("n_max must be an integer >= 2")
        if not self.tol_vorticity > 0:
            found.append("tol_vorticity must be positive")
        if not self.safety > 1:
            found.append("safety must exceed 1")
        if self.dealias_factor * self.n_max <= 3 * self.n_max:
            found.append("dealias_factor must exceed 3")
        if self.nu < 0:
            found.append("nu must be non-negative")
        if self.scheme == "rk4-explicit" and self.n_max >= 2 and self.dt > self.cfl_limit:
            found.append(f"rk4-explicit needs dt <= {self.cfl_limit:.3e} (cfl_const / n_max^3)")
        return found

    @property
    def cfl_limit(self):
        return self.cfl_const / self.n_max ** 3

    @property
    def grid(self):
        return grid_size(self.n_max, self.dealias_factor)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class StepRecord:
    """Diagnostics of one stored snapshot."""

    t: float
    norm_f01: float
    norm_f11: float
    norm_f11_nu: float
    area_residual: float
    zero_mode_residual: float
    vorticity_mean: float
    vorticity_residual: float
    vorticity_iterations: int
    c_x: float
    c_y: float
    c_dot_x: float
    c_dot_y: float
    halvings: int = 0
    linear_only: bool = False


def make_record(state, cdot, nu, omega=None, halvings=0, linear_only=False):
    f = state.f
    return StepRecord(
        t=state.t,
        norm_f01=wiener_norm(f),
        norm_f11=norm_f11(f),
        norm_f11_nu=wiener_norm(f, NormSpec(1.0, nu, state.t)),
        area_residual=abs(area(f) - np.pi),
        zero_mode_residual=zero_mode_residual(f),
        vorticity_mean=abs(omega.mean) if omega is not None else 0.0,
        vorticity_residual=omega.residual if omega is not None else float("nan"),
        vorticity_iterations=omega.iterations if omega is not None else 0,
        c_x=float(state.c[0]),
        c_y=float(state.c[1]),
        c_dot_x=float(cdot[0]),
        c_dot_y=float(cdot[1]),
        halvings=halvings,
        linear_only=linear_only,
    )


@dataclass
class Trajectory:
    """Time-ordered snapshots with their diagnostics records."""

    snapshots: List[BubbleState] = field(default_factory=list)
    records: List[StepRecord] = field(default_factory=list)
    vorticity: List[Optional[VorticityField]] = field(default_factory=list)
    status: str = "ok"
    converged_at: Optional[float] = None

    def append(self, state, record, omega=None):
        if self.snapshots and state.t <= self.snapshots[-1].t:
            raise InvariantViolationError(f"non-increasing snapshot time {state.t} after {self.snapshots[-1].t}")
        self.snapshots.append(state)
        self.records.append(record)
        self.vorticity.append(omega)

    def __len__(self):
        return len(self.snapshots)

    @property
    def final(self):
        return self.snapshots[-1]

    @property
    def times(self):
        return np.array([state.t for state in self.snapshots])

    def norms(self, spec=None):
        return np.array([wiener_norm(state.f, spec) for state in self.snapshots])

    def to_frame(self):
        return pd.DataFrame([asdict(record) for record in self.records])


class Stepper:
    """
    Step machinery for one configuration: linear system, diagonalizer and
    per-dt propagators are built once and reused.
    """

    def __init__(self, cfg, params):
        self.cfg = cfg
        self.params = params
        self.m = cfg.grid
        self.system = build_system(cfg.n_max, params)
        self.pair = build_diagonalizer(self.system)
        self._propagators = {}

    def propagator(self, dt):
        if dt not in self._propagators:
            self._propagators[dt] = DuhamelPropagator(self.system, dt, self.pair)
        return self._propagators[dt]

    def _rhs(self, state):
        return full_rhs(state, self.params, self.cfg.tol_vorticity, self.m)

    def _next_state(self, state, pf, dt, cdot_start):
        new_f = BubbleState.from_projection(pf).f
        pole = state.c + 0.5 * dt * (cdot_start + c_dot(new_f, self.params))
        return BubbleState(new_f, pole, state.t + dt)

    def etdrk2_attempt(self, state, dt):
        """One ETDRK2 step, returning the new state and the vorticity solved at `state`."""
        prop = self.propagator(dt)
        rhs, omega = self._rhs(state)
        y = prop.to_diagonal(project_mean_zero(state.f))
        n_start = prop.to_diagonal(rhs.projected_remainder)
        y_pred = prop.advance(y, n_start)
        predicted = self._next_state(state, prop.from_diagonal(y_pred), dt, rhs.c_dot)
        rhs_pred, _ = self._rhs(predicted)
        n_end = prop.to_diagonal(rhs_pred.projected_remainder)
        y_new = y_pred + prop.phi2 * (n_end - n_start)
        return self._next_state(state, prop.from_diagonal(y_new), dt, rhs.c_dot), omega

    def rk4_attempt(self, state, dt):
        def velocity(pf):
            return projected_velocity_field(pf, self.params, self.cfg.tol_vorticity, self.m)

        pf = project_mean_zero(state.f)
        k1, c1, omega = velocity(pf)
        k2, c2, _ = velocity(pf + 0.5 * dt * k1)
        k3, c3, _ = velocity(pf + 0.5 * dt * k2)
        k4, c4, _ = velocity(pf + dt * k3)
        pf_new = pf + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        new_f = BubbleState.from_projection(pf_new).f
        pole = state.c + (dt / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        return BubbleState(new_f, pole, state.t + dt), omega

    def linear_attempt(self, state, dt):
        """Semigroup-only step, used once the perturbation is below the norm floor."""
        prop = self.propagator(dt)
        y = prop.advance(prop.to_diagonal(project_mean_zero(state.f)))
        return self._next_state(state, prop.from_diagonal(y), dt, c_dot(state.f, self.params)), None

    def _acceptable(self, old, new):
        old_norm, new_norm = norm_f11(old.f), norm_f11(new.f)
        if new_norm > self.cfg.safety * old_norm and new_norm > self.cfg.norm_floor:
            return f"norm grew from {old_norm:.3e} to {new_norm:.3e}"
        residual = abs(area(new.f) - np.pi)
        if residual > self.cfg.area_tolerance:
            return f"area residual {residual:.3e}"
        return None

    def advance(self, state, dt=None, linear_only=False, depth=0):
        """
        Advance by dt, replacing a rejected step by two half steps.

        Returns:
            tuple: (new_state, omega at state or None, number of halvings)

        Raises:
            StepRejectedError: more than max_halvings nested halvings
        """
        dt = self.cfg.dt if dt is None else dt
        try:
            if linear_only:
                new_state, omega = self.linear_attempt(state, dt)
            elif self.cfg.scheme == "rk4-explicit":
                new_state, omega = self.rk4_attempt(state, dt)
            else:
                new_state, omega = self.etdrk2_attempt(state, dt)
            reason = self._acceptable(state, new_state)
        except MuskatError as exc:
            reason = f"{type(exc).__name__}: {exc}"
        if reason is None:
            return new_state, omega, depth
        if depth >= self.cfg.max_halvings:
            raise StepRejectedError(f"step at t={state.t:.6g} rejected after {depth} halvings ({reason})")
        logger.info("step at t=%.6g with dt=%.3e rejected (%s), halving", state.t, dt, reason)
        middle, omega, used = self.advance(state, 0.5 * dt, linear_only, depth + 1)
        final, _, used_second = self.advance(middle, 0.5 * dt, linear_only, depth + 1)
        return final, omega, max(used, used_second)


def step(state, cfg, params):
    """Advance a state by cfg.dt with the configured scheme."""
    new_state, _, _ = Stepper(cfg, params).advance(state)
    return new_state


def run(initial, cfg, params, stepper=None):
    """
    Integrate from initial.t to cfg.t_end on the uniform grid t0 + i dt.

    Once ||f||_{F^{1,1}} drops below cfg.norm_floor the nonlinear solve is
    skipped and the remaining steps are pure semigroup steps.

    Raises:
        IntegrationAbort: with the accepted part of the trajectory attached
    """
    stepper = stepper or Stepper(cfg, params)
    trajectory = Trajectory()
    n_steps = int(round((cfg.t_end - initial.t) / cfg.dt))
    if n_steps < 0:
        raise ParameterError(f"t_end={cfg.t_end} precedes the initial time {initial.t}")
    logger.info("run: %s, n_max=%d, dt=%.3e, %d steps from t=%.6g",
                cfg.scheme, cfg.n_max, cfg.dt, n_steps, initial.t)

    state = initial
    linear_only = norm_f11(state.f) < cfg.norm_floor
    if linear_only:
        trajectory.converged_at = state.t
    try:
        for index in range(1, n_steps + 1):
            new_state, omega, halvings = stepper.advance(state, linear_only=linear_only)
            trajectory.append(state, make_record(state, c_dot(state.f, params), cfg.nu, omega,
                                                 halvings, linear_only), omega)
            # keep the time grid exact
            state = BubbleState(new_state.f, new_state.c, initial.t + index * cfg.dt)
            residual = zero_mode_residual(state.f)
            if residual > 1e-10:
                raise InvariantViolationError(f"zero-mode residual {residual:.3e} at t={state.t:.6g}")
            if not linear_only and norm_f11(state.f) < cfg.norm_floor:
                linear_only = True
                trajectory.converged_at = state.t
                logger.info("perturbation below %.1e at t=%.6g, continuing with the linear flow",
                            cfg.norm_floor, state.t)
        omega = None
        if not linear_only:
            _, omega = full_rhs(state, params, cfg.tol_vorticity, stepper.m)
        trajectory.append(state, make_record(state, c_dot(state.f, params), cfg.nu, omega, 0, linear_only), omega)
    except IntegrationAbort as exc:
        trajectory.status = "aborted"
        exc.trajectory = trajectory
        raise
    except MuskatError as exc:
        trajectory.status = "aborted"
        raise IntegrationAbort(f"{type(exc).__name__} at t={state.t:.6g}: {exc}", trajectory) from exc
    return trajectory


# Picard iteration of the mild formulation

def _picard_sweep(stepper, states, dt, nonlinear):
    """One application of the fixed-point map on the time grid."""
    prop = stepper.propagator(dt)
    y = prop.to_diagonal(project_mean_zero(states[0].f))
    new_states = [states[0]]
    for index in range(len(states) - 1):
        if nonlinear is None:
            y = prop.advance(y)
        else:
            y = prop.advance(y, nonlinear[index], nonlinear[index + 1])
        previous = new_states[-1]
        try:
            f = BubbleState.from_projection(prop.from_diagonal(y)).f
        except MuskatError as exc:
            raise PicardEscapeError(f"iterate left the admissible set at t={previous.t + dt:.6g}: {exc}") from exc
        cdot_start = c_dot(previous.f, stepper.params)
        pole = previous.c + 0.5 * dt * (cdot_start + c_dot(f, stepper.params))
        new_states.append(BubbleState(f, pole, states[0].t + (index + 1) * dt))
    return new_states


def picard_iterate(initial, cfg, params, k_iters, horizon=None, escape_factor=10.0):
    """
    Successive iterates of the fixed-point map on [t0, t0 + T].

    Iterate 0 is the linear evolution; iterate j + 1 is the semigroup term plus
    the Duhamel integral of N_{>=2} evaluated along iterate j, with the same
    linear-in-time weights as the ETDRK2 scheme.

    Returns:
        list of Trajectory, k_iters + 1 entries

    Raises:
        PicardEscapeError: an iterate's F^{1,1} norm exceeds escape_factor times the initial one
    """
    horizon = cfg.t_end - initial.t if horizon is None else horizon
    if not 0 < horizon <= 1.0:
        raise ParameterError(f"Picard horizon must lie in (0, 1], got {horizon}")
    stepper = Stepper(cfg, params)
    dt = cfg.dt
    n_steps = int(round(horizon / dt))
    radius = escape_factor * max(norm_f11(initial.f), cfg.norm_floor)

    states = [initial] * (n_steps + 1)
    nonlinear = None
    iterates = []
    for iteration in range(k_iters + 1):
        states = _picard_sweep(stepper, states, dt, nonlinear)
        worst = max(norm_f11(state.f) for state in states)
        if worst > radius:
            raise PicardEscapeError(f"iterate {iteration} reached ||f||_F11 = {worst:.3e} > {radius:.3e}")
        trajectory = Trajectory()
        for state in states:
            trajectory.append(state, make_record(state, c_dot(state.f, params), cfg.nu))
        iterates.append(trajectory)
        if iteration < k_iters:
            prop = stepper.propagator(dt)
            nonlinear = [
                prop.to_diagonal(full_rhs(state, params, cfg.tol_vorticity, stepper.m)[0].projected_remainder)
                for state in states
            ]
        logger.debug("Picard iterate %d: max ||f||_F11 = %.3e", iteration, worst)
    return iterates


def x_norm(times, functions, nu=DEFAULT_NU):
    """
    sup_t ||g(t)||_{F^{0,1}_nu} + int ||g(t)||_{F^{4,1}_nu} dt, with the
    analyticity weight measured from the first time.
    """
    times = np.asarray(times, dtype=float)
    elapsed = times - times[0]
    low = [wiener_norm(g, NormSpec(0.0, nu, tau)) for g, tau in zip(functions, elapsed)]
    high = [wiener_norm(g, NormSpec(4.0, nu, tau)) for g, tau in zip(functions, elapsed)]
    return float(max(low) + trapezoid(high, times))


def contraction_ratios(iterates, nu=DEFAULT_NU):
    """Ratios ||u_{j+1} - u_j||_X / ||u_j - u_{j-1}||_X for j = 1..len - 2."""
    times = iterates[0].times
    gaps = []
    for before, after in zip(iterates[:-1], iterates[1:]):
        differences = [project_mean_zero(b.f) - project_mean_zero(a.f)
                       for a, b in zip(before.snapshots, after.snapshots)]
        gaps.append(x_norm(times, differences, nu))
    return [later / earlier if earlier > 0 else 0.0 for earlier, later in zip(gaps[:-1], gaps[1:])]
