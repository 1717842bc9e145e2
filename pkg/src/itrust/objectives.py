"""Test problems, finite-difference checks, and constant estimation.

Everything downstream verification needs: a small library of smooth
objectives with analytic derivatives, seeded random subproblem generators,
central-difference derivative checks, and estimators for the gradient bound,
smoothness, and curvature constants of a quadratic subproblem.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from .model import Objective, QuadraticModel

CONVEXITY_CLASSES = ("strongly-convex", "convex", "invex-like", "nonconvex")

# Above this dimension the corner scan for the gradient bound is replaced by
# the norm bound ||S|| * delta * sqrt(n) + ||h||.
_CORNER_MAX_DIM = 20

# Iterates closer to the optimum than this are excluded from curvature-ratio
# estimation; the quotient is pure noise there.
MU_P_GAP_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# Finite differences


def finite_difference_gradient(f, theta, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    theta = np.asarray(theta, dtype=float)
    g = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2.0 * h)
    return g


def finite_difference_hessian(f, theta, h: float = 1e-4) -> np.ndarray:
    """Symmetric four-point Hessian of a scalar function."""
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    H = np.empty((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        H[i, i] = (f(theta + ei) - 2.0 * f(theta) + f(theta - ei)) / (h * h)
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h
            H[i, j] = H[j, i] = (
                f(theta + ei + ej)
                - f(theta + ei - ej)
                - f(theta - ei + ej)
                + f(theta - ei - ej)
            ) / (4.0 * h * h)
    return H


def finite_diff_check(objective: Objective, theta, h: float = 1e-5):
    """Max relative error of analytic gradient and Hessian at one point.

    Errors are infinity-norm deviations against central differences, scaled
    by max(1, reference magnitude). The Hessian uses a wider step than the
    gradient because the four-point formula loses more digits to roundoff.
    """
    theta = np.asarray(theta, dtype=float)
    fd_g = finite_difference_gradient(objective.value, theta, h)
    g = objective.gradient(theta)
    grad_err = float(np.max(np.abs(fd_g - g)) / max(1.0, np.max(np.abs(g))))

    fd_h = finite_difference_hessian(objective.value, theta, max(h, 1e-4))
    H = objective.hessian(theta)
    hess_err = float(np.max(np.abs(fd_h - H)) / max(1.0, np.max(np.abs(H))))
    return grad_err, hess_err


def make_objective(dim, value, gradient=None, hessian=None, optimum=None):
    """Objective with missing derivatives filled in by central differences."""
    if gradient is None:
        gradient = lambda t: finite_difference_gradient(value, t)
    if hessian is None:
        hessian = lambda t: finite_difference_hessian(value, t)
    return Objective(dim, value, gradient, hessian, optimum)


# ---------------------------------------------------------------------------
# Problem library


@dataclass(frozen=True)
class TestProblem:
    """Named objective with whatever ground truth is available.

    ``theta_star``/``f_star`` are None when no closed form exists (or, for
    the rank-deficient quadratic, ``theta_star`` is just one minimizer of
    many; compare against ``f_star`` instead). ``scaling`` is a suggested
    elliptical scaling for badly scaled problems.
    """

    name: str
    objective: Objective
    convexity_class: str
    start: np.ndarray
    theta_star: np.ndarray | None = None
    f_star: float | None = None
    scaling: np.ndarray | None = None

    def __post_init__(self):
        if self.convexity_class not in CONVEXITY_CLASSES:
            raise ValueError(f"unknown convexity class {self.convexity_class!r}")


def _quadratic_objective(A: np.ndarray, b: np.ndarray) -> Objective:
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    return Objective(
        dim=b.size,
        value=lambda t: float(0.5 * t @ (A @ t) + b @ t),
        gradient=lambda t: A @ t + b,
        hessian=lambda t: A.copy(),
    )


def _random_spd(n: int, seed: int, eig_lo: float, eig_hi: float):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    eigs = rng.uniform(eig_lo, eig_hi, n)
    A = (Q * eigs) @ Q.T
    A = 0.5 * (A + A.T)
    b = rng.normal(size=n)
    return A, b


def _quadratic_problem(name: str, n: int, seed: int) -> TestProblem:
    A, b = _random_spd(n, seed, 0.5, 3.0)
    theta_star = -np.linalg.solve(A, b)
    return TestProblem(
        name=name,
        objective=_quadratic_objective(A, b),
        convexity_class="strongly-convex",
        start=np.zeros(n),
        theta_star=theta_star,
        f_star=float(0.5 * b @ theta_star),
    )


def _pl_quadratic_problem() -> TestProblem:
    # Rank-deficient PSD quadratic with the field inside the range, so the
    # gradient-domination inequality holds without strong convexity and the
    # minimizer set is a line.
    rng = np.random.default_rng(31)
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    A = (Q * np.array([0.0, 0.7, 1.8])) @ Q.T
    A = 0.5 * (A + A.T)
    b = A @ rng.normal(size=3)
    pinv = np.linalg.pinv(A)
    theta_star = -pinv @ b
    return TestProblem(
        name="plquad",
        objective=_quadratic_objective(A, b),
        convexity_class="invex-like",
        start=np.zeros(3),
        theta_star=theta_star,
        f_star=float(-0.5 * b @ (pinv @ b)),
    )


def _rosenbrock_objective(n: int) -> Objective:
    def value(t):
        return float(
            np.sum(100.0 * (t[1:] - t[:-1] ** 2) ** 2 + (1.0 - t[:-1]) ** 2)
        )

    def gradient(t):
        g = np.zeros(n)
        d = t[1:] - t[:-1] ** 2
        g[:-1] = -400.0 * t[:-1] * d - 2.0 * (1.0 - t[:-1])
        g[1:] += 200.0 * d
        return g

    def hessian(t):
        H = np.zeros((n, n))
        i = np.arange(n - 1)
        H[i, i] = 1200.0 * t[:-1] ** 2 - 400.0 * t[1:] + 2.0
        H[i + 1, i + 1] += 200.0
        H[i, i + 1] = H[i + 1, i] = -400.0 * t[:-1]
        return H

    return Objective(n, value, gradient, hessian, optimum=np.ones(n))


def _rosenbrock_problem(name: str, n: int) -> TestProblem:
    start = np.ones(n)
    start[0::2] = -1.2
    return TestProblem(
        name=name,
        objective=_rosenbrock_objective(n),
        convexity_class="nonconvex",
        start=start,
        theta_star=np.ones(n),
        f_star=0.0,
    )


LOGISTIC_SEED = 7
LOGISTIC_RIDGE = 1e-3


def logistic_dataset():
    """Fixed 40-sample, two-feature, two-class synthetic dataset.

    Two overlapping Gaussian blobs, labels in {-1, +1}, drawn once from seed
    ``LOGISTIC_SEED``. Returns (features, labels).
    """
    rng = np.random.default_rng(LOGISTIC_SEED)
    pos = rng.normal(loc=(1.2, 0.8), scale=1.1, size=(20, 2))
    neg = rng.normal(loc=(-1.0, -0.6), scale=1.1, size=(20, 2))
    X = np.vstack([pos, neg])
    y = np.concatenate([np.ones(20), -np.ones(20)])
    return X, y


def write_logistic_dataset(path) -> None:
    """Serialize the synthetic dataset as CSV (columns x1, x2, label)."""
    X, y = logistic_dataset()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "x2", "label"])
        for row, label in zip(X, y):
            writer.writerow([repr(float(row[0])), repr(float(row[1])), int(label)])


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _logistic_problem() -> TestProblem:
    X, y = logistic_dataset()
    design = np.hstack([X, np.ones((X.shape[0], 1))])
    m = design.shape[0]
    reg = LOGISTIC_RIDGE

    def value(t):
        z = design @ t
        return float(np.mean(np.logaddexp(0.0, -y * z)) + 0.5 * reg * (t @ t))

    def gradient(t):
        z = design @ t
        w = -y * _sigmoid(-y * z)
        return design.T @ w / m + reg * t

    def hessian(t):
        p = _sigmoid(design @ t)
        w = p * (1.0 - p)
        return (design.T * w) @ design / m + reg * np.eye(t.size)

    return TestProblem(
        name="logistic",
        objective=Objective(3, value, gradient, hessian),
        convexity_class="convex",
        start=np.zeros(3),
    )


def _ill_scaled_problem() -> TestProblem:
    # Diagonal quadratic spanning four decades of curvature; the suggested
    # scaling whitens it exactly.
    diag = np.logspace(0.0, 4.0, 4)
    A = np.diag(diag)
    theta_star = np.array([0.5, -0.4, 0.3, -0.2])
    b = -A @ theta_star
    return TestProblem(
        name="illscaled",
        objective=_quadratic_objective(A, b),
        convexity_class="strongly-convex",
        start=np.zeros(4),
        theta_star=theta_star,
        f_star=float(0.5 * b @ theta_star),
        scaling=np.sqrt(diag),
    )


def problem_suite() -> list[TestProblem]:
    """The full library, in a stable order."""
    return [
        _quadratic_problem("quad2", 2, 12),
        _quadratic_problem("quad5", 5, 5),
        _quadratic_problem("quad20", 20, 20),
        _pl_quadratic_problem(),
        _rosenbrock_problem("rosenbrock2", 2),
        _rosenbrock_problem("rosenbrock10", 10),
        _logistic_problem(),
        _ill_scaled_problem(),
    ]


def get_problem(name: str) -> TestProblem:
    for problem in problem_suite():
        if problem.name == name:
            return problem
    known = ", ".join(p.name for p in problem_suite())
    raise KeyError(f"unknown problem {name!r}; known problems: {known}")


# ---------------------------------------------------------------------------
# Random subproblem instances for the verification campaigns

INSTANCE_KINDS = ("strongly-convex", "psd", "singular", "indefinite", "pl")


def random_box_quadratic(
    n: int, seed: int, delta: float = 0.5, kind: str = "psd"
) -> QuadraticModel:
    """Seeded random quadratic subproblem on the box ``|s_i| <= delta``.

    ``strongly-convex`` draws eigenvalues in [0.4, 2], ``psd`` in [0, 2],
    ``singular`` zeroes one eigenvalue exactly, and ``indefinite`` forces at
    least one negative eigenvalue. The field norm is kept in [0.15, 0.5] so
    instances are neither degenerate nor dominated by the linear term.

    ``pl`` plants a strictly interior minimizer: it draws a strongly convex
    coupling, picks s* uniformly in the inner 60% of the box, and sets
    h = -J s*. The constrained optimum then has the closed form
    E* = energy(s*), and the tight gradient-domination constant equals the
    smallest eigenvalue.
    """
    if kind not in INSTANCE_KINDS:
        raise ValueError(f"kind must be one of {INSTANCE_KINDS}, got {kind!r}")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    if kind in ("strongly-convex", "pl"):
        eigs = rng.uniform(0.4, 2.0, n)
    elif kind == "psd":
        eigs = rng.uniform(0.0, 2.0, n)
    elif kind == "singular":
        eigs = rng.uniform(0.5, 2.0, n)
        eigs[0] = 0.0
    else:
        eigs = rng.uniform(-1.5, 2.0, n)
        if np.all(eigs > 0.0):
            eigs[0] = -rng.uniform(0.2, 1.5)
    J = (Q * eigs) @ Q.T
    J = 0.5 * (J + J.T)
    if kind == "pl":
        s_star = rng.uniform(-0.6 * delta, 0.6 * delta, n)
        h = -J @ s_star
    else:
        direction = rng.normal(size=n)
        direction /= np.linalg.norm(direction)
        h = rng.uniform(0.15, 0.5) * direction
    return QuadraticModel(J, h, delta)


# ---------------------------------------------------------------------------
# Constant estimation


@dataclass(frozen=True)
class ConstantEstimates:
    """Gradient bound G, smoothness L, curvature mu, and the empirical
    gradient-domination constant mu_p (None when not estimable)."""

    G: float
    L: float
    mu: float | None
    mu_p: float | None = None


def _gradient_bound(model: QuadraticModel) -> float:
    S = model.symmetric_coupling()
    h = model.field
    n = model.dim
    delta = model.delta
    if n > _CORNER_MAX_DIM:
        spectral = float(np.linalg.norm(S, 2))
        return spectral * delta * np.sqrt(n) + float(np.linalg.norm(h))
    # ||S s + h|| is convex in s, so its box maximum sits at a corner.
    best = 0.0
    corners = itertools.product((-delta, delta), repeat=n)
    chunk = []
    for corner in corners:
        chunk.append(corner)
        if len(chunk) == 65536:
            arr = np.array(chunk)
            best = max(best, float(np.max(np.linalg.norm(arr @ S + h, axis=1))))
            chunk = []
    if chunk:
        arr = np.array(chunk)
        best = max(best, float(np.max(np.linalg.norm(arr @ S + h, axis=1))))
    return best


def estimate_mu_p(trace, e_star: float) -> float | None:
    """Smallest gradient-domination ratio seen along a run.

    Ratios ``||g(k)||^2 / (2 (E(s(k)) - E*))`` over the run's iterates,
    excluding iterates whose gap is below ``MU_P_GAP_FLOOR``. Returns None
    when every iterate is excluded.
    """
    gaps = trace.energies[: len(trace.gm_norms)] - e_star
    keep = gaps >= MU_P_GAP_FLOOR
    if not np.any(keep):
        return None
    ratios = trace.gm_norms[keep] ** 2 / (2.0 * gaps[keep])
    return float(np.min(ratios))


def estimate_constants(
    model: QuadraticModel, trace=None, e_star: float | None = None
) -> ConstantEstimates:
    """Constants of one subproblem: exact G and L, mu when positive definite,
    and the empirical mu_p when a run and reference optimum are supplied."""
    S = model.symmetric_coupling()
    eigs = np.linalg.eigvalsh(S)
    L = float(np.max(np.abs(eigs)))
    mu = float(eigs[0]) if eigs[0] > 0.0 else None
    mu_p = None
    if trace is not None and e_star is not None:
        mu_p = estimate_mu_p(trace, e_star)
    return ConstantEstimates(G=_gradient_bound(model), L=L, mu=mu, mu_p=mu_p)
