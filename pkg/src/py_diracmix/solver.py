"""
Generic numerical machinery: an augmented-Lagrangian maximizer for smooth
objectives under equality and inequality constraints, a Levenberg-Marquardt
root / least-squares solver, and central finite-difference oracles.

All callbacks return their value together with the analytic derivative:

    objective(x)  -> (f, grad f)                 with grad f of shape (n,)
    equality(x)   -> (c, J_c)   meaning c(x) = 0, J_c of shape (m_e, n)
    inequality(x) -> (g, J_g)   meaning g(x) <= 0, J_g of shape (m_i, n)
    residual(x)   -> (r, J_r)   for lm_root, J_r of shape (m, n)
"""

import dataclasses
import logging
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from typing import Annotated, Any, Literal

import numpy as np
import scipy.optimize

from .decorators import enforce
from .exceptions import NonFiniteObjectiveError, ValidationError
from .validators import Finite, NotEmpty, Positive

logger = logging.getLogger(__name__)

type ValueAndGradient = Callable[[np.ndarray], tuple[float, np.ndarray]]
type ValueAndJacobian = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]

PENALTY_CAP = 1e12
INFEASIBILITY_DECREASE = 0.25
INNER_FTOL = 1e-15
ALIASES = {"ε_slack": "eps_slack"}


@dataclass(frozen=True)
class SolverOptions:
    tol_eq: float = 1e-6
    tol_obj: float = 1e-8
    eps_slack: float = 1e-3
    max_outer: int = 50
    max_inner: int = 500
    penalty_init: float = 10.0
    penalty_growth: float = 5.0
    seed: int = 0
    d_max: float | None = None
    restarts: int = 5
    grid_points: int = 1000

    def __post_init__(self) -> None:
        for name in ("tol_eq", "tol_obj", "penalty_init"):
            Positive().validate(getattr(self, name), "SolverOptions", name)
        Positive().validate(self.d_max, "SolverOptions", "d_max")
        for name in ("max_outer", "max_inner", "restarts", "grid_points"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(
                    f"Parameter '{name}' must be at least 1 for function "
                    f"'SolverOptions'."
                )
        if not 0 <= self.eps_slack < 1:
            raise ValidationError(
                "Parameter 'eps_slack' must be within [0, 1) for function "
                "'SolverOptions'."
            )
        if not self.penalty_growth > 1:
            raise ValidationError(
                "Parameter 'penalty_growth' must be greater than 1 for function "
                "'SolverOptions'."
            )

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any] | None) -> "SolverOptions":
        """Reads the `solver` block of a problem file."""
        if not mapping:
            return cls()
        values = {ALIASES.get(k, k): v for k, v in mapping.items()}
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValidationError(f"Unknown solver options: {', '.join(unknown)}.")
        return cls(**values)

    def replace(self, **overrides: Any) -> "SolverOptions":
        """Returns a copy with every override that is not None applied."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass
class SolverTrace:
    outer_iterations: int = 0
    inner_iterations: int = 0
    objective: float = math.nan
    max_eq_violation: float = 0.0
    max_ineq_violation: float = 0.0
    stationarity: float = math.nan
    converged: bool = False
    message: str = ""
    history: list[dict[str, float]] = field(default_factory=list)

    @property
    def max_violation(self) -> float:
        return max(self.max_eq_violation, self.max_ineq_violation)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


# --- Augmented Lagrangian ---


def _no_constraints(n: int) -> ValueAndJacobian:
    def constraints(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return np.zeros(0), np.zeros((0, n))

    return constraints


def _check_finite(value: float, where: str) -> None:
    if not math.isfinite(value):
        raise NonFiniteObjectiveError(f"Objective is not finite ({value}) at {where}.")


@enforce
def maximize_constrained(
    objective: ValueAndGradient,
    x0: Annotated[np.ndarray, NotEmpty(), Finite()],
    opts: SolverOptions,
    equality: ValueAndJacobian | None = None,
    inequality: ValueAndJacobian | None = None,
) -> tuple[np.ndarray, SolverTrace]:
    """
    Maximizes `objective` subject to equality(x) = 0 and inequality(x) <= 0.

    Equalities enter the augmented Lagrangian as lambda'c + mu/2 |c|^2,
    inequalities through the squared hinge (max(0, nu + mu g)^2 - nu^2) / (2 mu).
    Each outer iteration minimizes the augmented Lagrangian with L-BFGS-B,
    updates the multipliers, and grows mu when the worst violation is above
    tol_eq and did not drop below a quarter of its previous value. A run
    converges once the inner solve succeeded, the violation is at most tol_eq
    and the Lagrangian gradient is at most tol_obj * (1 + |f|) in the inf-norm.

    Returns the converged iterate, or the least infeasible iterate seen when the
    outer iteration budget runs out (with `converged=False`).
    """
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    equality = equality or _no_constraints(n)
    inequality = inequality or _no_constraints(n)

    f, _ = objective(x)
    _check_finite(f, "the start point")
    c, _ = equality(x)
    g, _ = inequality(x)
    lam = np.zeros(c.size)
    nu = np.zeros(g.size)
    mu = float(opts.penalty_init)

    def augmented(z: np.ndarray) -> tuple[float, np.ndarray]:
        with np.errstate(over="ignore", invalid="ignore"):
            fz, grad = objective(z)
            cz, jc = equality(z)
            gz, jg = inequality(z)
            hinge = np.maximum(0.0, nu + mu * gz)
            value = (
                -fz
                + lam @ cz
                + 0.5 * mu * (cz @ cz)
                + (hinge @ hinge - nu @ nu) / (2.0 * mu)
            )
            gradient = -grad + jc.T @ (lam + mu * cz) + jg.T @ hinge
        if not np.isfinite(value) or not np.all(np.isfinite(gradient)):
            return math.inf, np.zeros_like(z)
        return float(value), gradient

    trace = SolverTrace()
    best: tuple[float, float, np.ndarray] | None = None
    previous_violation = math.inf

    logger.info(
        "Augmented Lagrangian start: n=%d, equalities=%d, inequalities=%d",
        n,
        c.size,
        g.size,
    )

    for outer in range(1, opts.max_outer + 1):
        result = scipy.optimize.minimize(
            augmented,
            x,
            jac=True,
            method="L-BFGS-B",
            options={
                "maxiter": opts.max_inner,
                "gtol": opts.tol_obj,
                "ftol": INNER_FTOL,
            },
        )
        x = result.x
        trace.inner_iterations += int(result.nit)
        # Gradient of the Lagrangian at the multipliers updated below.
        _, lagrangian_grad = augmented(x)
        stationarity = float(np.max(np.abs(lagrangian_grad))) if n else 0.0

        f, _ = objective(x)
        _check_finite(f, f"outer iteration {outer}")
        c, _ = equality(x)
        g, _ = inequality(x)
        eq_violation = float(np.max(np.abs(c))) if c.size else 0.0
        ineq_violation = float(max(0.0, np.max(g))) if g.size else 0.0
        violation = max(eq_violation, ineq_violation)

        logger.info(
            "Outer %d: objective=%.10g, worst violation=%.3e, penalty=%.3e",
            outer,
            f,
            violation,
            mu,
        )
        logger.debug("Inner status: %s (%d iterations)", result.message, result.nit)

        trace.history.append(
            {"objective": float(f), "violation": violation, "penalty": mu}
        )
        trace.outer_iterations = outer

        if best is None or (violation, -f) < (best[0], -best[1]):
            best = (violation, f, x.copy())

        stationary = result.success and stationarity <= opts.tol_obj * (1.0 + abs(f))
        if violation <= opts.tol_eq and stationary:
            trace.converged = True
            best = (violation, f, x.copy())
            trace.stationarity = stationarity
            break

        lam = lam + mu * c
        nu = np.maximum(0.0, nu + mu * g)
        logger.debug(
            "Multipliers: |lambda|_inf=%.3e, |nu|_inf=%.3e",
            float(np.max(np.abs(lam))) if lam.size else 0.0,
            float(np.max(nu)) if nu.size else 0.0,
        )

        if (
            violation > opts.tol_eq
            and violation > INFEASIBILITY_DECREASE * previous_violation
        ):
            mu = min(mu * opts.penalty_growth, PENALTY_CAP)
        previous_violation = violation
        trace.stationarity = stationarity

    assert best is not None
    _, f, x = best
    c, _ = equality(x)
    g, _ = inequality(x)
    trace.objective = float(f)
    trace.max_eq_violation = float(np.max(np.abs(c))) if c.size else 0.0
    trace.max_ineq_violation = float(max(0.0, np.max(g))) if g.size else 0.0

    if trace.converged:
        trace.message = f"converged after {trace.outer_iterations} outer iterations"
    else:
        trace.message = (
            f"no convergence within {opts.max_outer} outer iterations; "
            f"worst violation {trace.max_violation:.3e}"
        )
        logger.warning("Augmented Lagrangian: %s", trace.message)

    return x, trace


# --- Levenberg-Marquardt ---


@enforce
def lm_root(
    residual: ValueAndJacobian,
    x0: Annotated[np.ndarray, NotEmpty(), Finite()],
    opts: SolverOptions,
    mode: Literal["root", "least_squares"] = "root",
) -> tuple[np.ndarray, SolverTrace]:
    """
    Levenberg-Marquardt iteration on |r(x)|^2 / 2 with damping lambda * I.

    Damping starts at 1e-3 times the largest diagonal entry of J'J, shrinks by 3
    when the gain ratio exceeds 0.75 and doubles when it falls below 0.25;
    rejected steps grow it geometrically. The system may have fewer, as many, or
    more residuals than unknowns.

    In "root" mode the result counts as converged when |r| <= tol_eq; in
    "least_squares" mode a stationary point (|J'r|_inf <= tol_obj) suffices too.
    """
    x = np.asarray(x0, dtype=float).copy()
    r, jac = residual(x)
    cost = 0.5 * float(r @ r)
    _check_finite(cost, "the start point")

    trace = SolverTrace()
    hessian = jac.T @ jac
    damping = 1e-3 * float(np.max(np.diag(hessian))) if hessian.size else 0.0
    growth = 2.0

    for _ in range(opts.max_inner):
        gradient = jac.T @ r
        norm = math.sqrt(2.0 * cost)
        if norm <= opts.tol_eq:
            trace.converged = True
            trace.message = "residual below tolerance"
            break
        if float(np.max(np.abs(gradient))) <= opts.tol_obj:
            trace.converged = mode == "least_squares"
            trace.message = "stationary point of the squared residual"
            break
        if damping == 0.0 or not np.any(hessian):
            trace.message = "Jacobian rank collapse: J'J vanishes at a non-root"
            logger.warning("Levenberg-Marquardt: %s", trace.message)
            break

        trace.inner_iterations += 1
        try:
            step = np.linalg.solve(hessian + damping * np.eye(x.size), -gradient)
        except np.linalg.LinAlgError:
            damping *= growth
            growth *= 2.0
            continue

        if np.linalg.norm(step) <= 1e-15 * (np.linalg.norm(x) + 1e-15):
            trace.converged = mode == "least_squares"
            trace.message = "step size below machine precision"
            break

        candidate = x + step
        with np.errstate(over="ignore", invalid="ignore"):
            r_new, jac_new = residual(candidate)
            cost_new = 0.5 * float(r_new @ r_new)
        predicted = 0.5 * float(step @ (damping * step - gradient))
        gain = (cost - cost_new) / predicted if predicted > 0 else -1.0

        if math.isfinite(cost_new) and gain > 0:
            x, r, jac, cost = candidate, r_new, jac_new, cost_new
            hessian = jac.T @ jac
            trace.outer_iterations += 1
            growth = 2.0
            if gain > 0.75:
                damping /= 3.0
            elif gain < 0.25:
                damping *= 2.0
        else:
            damping *= growth
            growth *= 2.0
    else:
        trace.message = f"no convergence within {opts.max_inner} iterations"

    trace.objective = cost
    trace.max_eq_violation = math.sqrt(2.0 * cost)
    trace.stationarity = float(np.max(np.abs(jac.T @ r))) if r.size else 0.0
    if not trace.converged:
        logger.warning("Levenberg-Marquardt: %s", trace.message)
    logger.info(
        "Levenberg-Marquardt finished: |r|=%.3e after %d accepted steps",
        trace.max_eq_violation,
        trace.outer_iterations,
    )
    return x, trace


# --- Finite differences ---


@enforce
def fd_gradient(
    f: Callable[[np.ndarray], float],
    x: Annotated[np.ndarray, Finite()],
    h: Annotated[float, Positive()] = 1e-6,
    scheme: Literal["central"] = "central",
) -> np.ndarray:
    """Central-difference gradient estimate, O(h^2) accurate for smooth f."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    gradient = np.empty(x.size)
    for k in range(x.size):
        step = np.zeros_like(x)
        step.flat[k] = h
        gradient[k] = (f(x + step) - f(x - step)) / (2.0 * h)
    return gradient.reshape(x.shape)


@enforce
def fd_jacobian(
    f: Callable[[np.ndarray], np.ndarray],
    x: Annotated[np.ndarray, Finite()],
    h: Annotated[float, Positive()] = 1e-6,
) -> np.ndarray:
    """Central-difference Jacobian of a vector function, shape (m, n)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    columns = []
    for k in range(x.size):
        step = np.zeros_like(x)
        step[k] = h
        forward = np.asarray(f(x + step), dtype=float)
        backward = np.asarray(f(x - step), dtype=float)
        columns.append((forward - backward) / (2.0 * h))
    return np.stack(columns, axis=-1)
