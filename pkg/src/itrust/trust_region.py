"""Trust-region driver whose subproblems are box-constrained quadratics.

Each outer iteration builds the local quadratic model, hands it to one of
three interchangeable subproblem backends (the iterative machine, the exact
ball solver on the inscribed ball, or the grid oracle), and adapts the trust
radius from the realized-versus-predicted reduction.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .ecim import DivergenceError, EcimConfig, run_ecim
from .model import Objective, QuadraticModel, build_subproblem, energy
from .oracles import NumericalError, exact_ball_minimize, grid_minimize_box

# Predicted reductions smaller than this are indistinguishable from roundoff;
# the reduction ratio is undefined there.
DEGENERATE_MODEL_TOL = 1e-14

# Keeps the radius constructible after long runs of rejected iterations.
_DELTA_FLOOR = 1e-300


class DegenerateModelError(ArithmeticError):
    """Predicted reduction too small to divide by."""


@dataclass(frozen=True)
class ExactBallSolver:
    """Solve each subproblem exactly on the inscribed Euclidean ball."""


@dataclass(frozen=True)
class GridSolver:
    """Solve each subproblem with the exhaustive grid oracle."""

    resolution: float = 0.01


SubproblemSolver = Union[EcimConfig, ExactBallSolver, GridSolver]


@dataclass(frozen=True)
class TrustRegionConfig:
    """Outer-loop hyperparameters.

    ``mu`` is the rejection threshold and ``1 - mu`` the growth threshold of
    the radius update; ``eta`` is the acceptance threshold. The boundary test
    for radius growth uses ``boundary_tol * max(1, delta)``. ``gtol`` of None
    disables the gradient-norm early stop. ``scaling`` applies an elliptical
    change of coordinates to every subproblem. With ``warm_start`` the
    machine starts from the previous step instead of a fresh random point.
    """

    delta0: float = 1.0
    delta_max: float = 100.0
    mu: float = 0.1
    eta: float = 0.75
    gamma1: float = 0.25
    gamma2: float = 2.0
    iterations: int = 100
    solver: SubproblemSolver = field(default_factory=EcimConfig)
    boundary_tol: float = 1e-9
    gtol: float | None = 1e-8
    scaling: np.ndarray | None = None
    warm_start: bool = False

    def __post_init__(self):
        if not 0.0 < self.delta0 <= self.delta_max:
            raise ValueError(
                f"need 0 < delta0 <= delta_max, got {self.delta0}, {self.delta_max}"
            )
        if not 0.0 < self.mu < self.eta < 1.0:
            raise ValueError(f"need 0 < mu < eta < 1, got {self.mu}, {self.eta}")
        if not 0.0 < self.gamma1 < 1.0 < self.gamma2:
            raise ValueError(
                f"need 0 < gamma1 < 1 < gamma2, got {self.gamma1}, {self.gamma2}"
            )
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.boundary_tol < 0.0:
            raise ValueError(f"boundary_tol must be >= 0, got {self.boundary_tol}")
        if self.gtol is not None and self.gtol < 0.0:
            raise ValueError(f"gtol must be >= 0 or None, got {self.gtol}")


def reduction_ratio(
    objective: Objective, theta: np.ndarray, step: np.ndarray, model_value: float
) -> float:
    """Realized over predicted reduction ``(f(theta + step) - f(theta)) / m``.

    Raises
    ------
    DegenerateModelError
        When ``|model_value| < DEGENERATE_MODEL_TOL``; the caller treats the
        iteration as rejected and shrinks the radius.
    """
    if abs(model_value) < DEGENERATE_MODEL_TOL:
        raise DegenerateModelError(
            f"predicted reduction {model_value!r} below {DEGENERATE_MODEL_TOL}"
        )
    theta = np.asarray(theta, dtype=float)
    step = np.asarray(step, dtype=float)
    return (objective.value(theta + step) - objective.value(theta)) / model_value


def update_radius(
    rho: float, delta: float, step_inf_norm: float, config: TrustRegionConfig
) -> float:
    """Next trust radius: shrink below ``mu``, grow above ``1 - mu`` when the
    step touched the box boundary, otherwise keep."""
    if rho < config.mu:
        return config.gamma1 * delta
    on_boundary = abs(step_inf_norm - delta) <= config.boundary_tol * max(1.0, delta)
    if rho > 1.0 - config.mu and on_boundary:
        return min(config.gamma2 * delta, config.delta_max)
    return delta


def solve_subproblem(
    model: QuadraticModel,
    solver: SubproblemSolver,
    seed: int = 0,
    s0: np.ndarray | None = None,
):
    """Minimize one subproblem with the selected backend.

    Applies the model's elliptical scaling (solvers run in scaled
    coordinates, the returned step is mapped back), then dispatches on the
    solver spec. Returns ``(step, value)`` with the value measured by the
    original model.
    """
    work = model.in_scaled_coordinates()
    if isinstance(solver, EcimConfig):
        trace = run_ecim(work, replace(solver, seed=seed), s0=s0)
        u = trace.best_iterate
    elif isinstance(solver, ExactBallSolver):
        sol = exact_ball_minimize(work.field, work.symmetric_coupling(), work.delta)
        u = sol.s_star
    elif isinstance(solver, GridSolver):
        sol = grid_minimize_box(work, solver.resolution)
        u = sol.s_star
    else:
        raise TypeError(f"unknown solver spec {solver!r}")
    step = model.from_scaled(u)
    return step, energy(model, step)


@dataclass
class TrustRegionRecord:
    """One outer iteration. ``step`` is None when the solver failed; ``rho``
    is nan for rejected-degenerate and failed iterations."""

    t: int
    theta: np.ndarray
    delta: float
    rho: float
    step: np.ndarray | None
    model_value: float
    f_value: float
    accepted: bool
    grad_norm: float
    step_inf_norm: float
    solver_failed: bool = False


@dataclass
class TrustRegionTrace:
    """Per-iteration records plus the final iterate."""

    records: list[TrustRegionRecord]
    theta_final: np.ndarray
    converged: bool

    @property
    def n_iterations(self) -> int:
        return len(self.records)

    def to_csv(self, path) -> None:
        """One row per outer iteration: t, delta, rho, f, grad_norm,
        model_value, step_inf_norm, accepted, solver_failed."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "t",
                    "delta",
                    "rho",
                    "f",
                    "grad_norm",
                    "model_value",
                    "step_inf_norm",
                    "accepted",
                    "solver_failed",
                ]
            )
            for r in self.records:
                writer.writerow(
                    [
                        r.t,
                        repr(float(r.delta)),
                        repr(float(r.rho)),
                        repr(float(r.f_value)),
                        repr(float(r.grad_norm)),
                        repr(float(r.model_value)),
                        repr(float(r.step_inf_norm)),
                        int(r.accepted),
                        int(r.solver_failed),
                    ]
                )

    def to_json(self, path) -> None:
        payload = {
            "converged": bool(self.converged),
            "theta_final": self.theta_final.tolist(),
            "records": [
                {
                    "t": r.t,
                    "theta": r.theta.tolist(),
                    "delta": float(r.delta),
                    "rho": float(r.rho),
                    "step": None if r.step is None else r.step.tolist(),
                    "model_value": float(r.model_value),
                    "f_value": float(r.f_value),
                    "accepted": bool(r.accepted),
                    "grad_norm": float(r.grad_norm),
                    "step_inf_norm": float(r.step_inf_norm),
                    "solver_failed": bool(r.solver_failed),
                }
                for r in self.records
            ],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")


def itrust(
    objective: Objective, config: TrustRegionConfig, theta0: np.ndarray
) -> TrustRegionTrace:
    """Run the trust-region loop from theta0.

    Each iteration solves the box subproblem of half-width ``delta_t``,
    measures the reduction ratio, adapts the radius, and accepts the step
    only when the ratio exceeds ``eta``. Iterations whose predicted
    reduction is non-negative or degenerate, and iterations whose solver
    diverged, are rejected with a radius shrink. A machine backend is
    reseeded per iteration (base seed plus t) so runs are reproducible.

    Raises
    ------
    RuntimeError
        When the objective returns a non-finite value.
    """
    theta = np.array(theta0, dtype=float)
    if theta.shape != (objective.dim,):
        raise ValueError(f"theta0 shape {theta.shape}, expected ({objective.dim},)")
    delta = config.delta0
    f_cur = objective.value(theta)
    if not math.isfinite(f_cur):
        raise RuntimeError(f"objective is not finite at the start point: {f_cur!r}")

    base_seed = config.solver.seed if isinstance(config.solver, EcimConfig) else 0
    scaling = config.scaling
    records: list[TrustRegionRecord] = []
    converged = False
    previous_step: np.ndarray | None = None

    for t in range(config.iterations):
        grad = objective.gradient(theta)
        grad_norm = float(np.linalg.norm(grad))
        if config.gtol is not None and grad_norm <= config.gtol:
            converged = True
            break

        model = build_subproblem(objective, theta, delta, scaling=scaling)
        s0 = None
        if config.warm_start and previous_step is not None:
            s0 = previous_step if scaling is None else scaling * previous_step

        try:
            step, mval = solve_subproblem(
                model, config.solver, seed=base_seed + t, s0=s0
            )
        except (DivergenceError, NumericalError):
            records.append(
                TrustRegionRecord(
                    t=t,
                    theta=theta.copy(),
                    delta=delta,
                    rho=math.nan,
                    step=None,
                    model_value=math.nan,
                    f_value=f_cur,
                    accepted=False,
                    grad_norm=grad_norm,
                    step_inf_norm=math.nan,
                    solver_failed=True,
                )
            )
            delta = max(config.gamma1 * delta, _DELTA_FLOOR)
            continue

        # Boundary contact is judged in solver coordinates, where the box
        # actually lives.
        u = step if scaling is None else scaling * step
        step_inf = float(np.max(np.abs(u)))

        degenerate = False
        rho = math.nan
        try:
            rho = reduction_ratio(objective, theta, step, mval)
        except DegenerateModelError:
            degenerate = True
        if degenerate or mval >= 0.0:
            records.append(
                TrustRegionRecord(
                    t=t,
                    theta=theta.copy(),
                    delta=delta,
                    rho=math.nan,
                    step=step,
                    model_value=mval,
                    f_value=f_cur,
                    accepted=False,
                    grad_norm=grad_norm,
                    step_inf_norm=step_inf,
                    solver_failed=False,
                )
            )
            delta = max(config.gamma1 * delta, _DELTA_FLOOR)
            continue
        if not math.isfinite(rho):
            raise RuntimeError(
                f"objective is not finite at the trial point of iteration {t}"
            )

        accepted = rho > config.eta
        records.append(
            TrustRegionRecord(
                t=t,
                theta=theta.copy(),
                delta=delta,
                rho=rho,
                step=step,
                model_value=mval,
                f_value=f_cur,
                accepted=accepted,
                grad_norm=grad_norm,
                step_inf_norm=step_inf,
            )
        )
        delta = max(update_radius(rho, delta, step_inf, config), _DELTA_FLOOR)
        if accepted:
            theta = theta + step
            f_cur = objective.value(theta)
            previous_step = step

    if not converged and config.gtol is not None:
        grad_norm = float(np.linalg.norm(objective.gradient(theta)))
        converged = grad_norm <= config.gtol

    return TrustRegionTrace(records=records, theta_final=theta, converged=converged)
