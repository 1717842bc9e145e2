"""Command-line interface: solves, bound verification, rate fits, oracle
comparisons.

Every command emits a deterministic report: CSV reports are byte-identical
for identical configs and seeds, JSON reports identical up to their
``timestamp`` field. Rows carry the seed and a hash of the resolved options
so reports remain attributable when files are moved around.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 numerical
error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ecim import DivergenceError, EcimConfig, run_ecim
from .model import energy
from .objectives import (
    estimate_constants,
    estimate_mu_p,
    get_problem,
    problem_suite,
    random_box_quadratic,
)
from .oracles import (
    NumericalError,
    OracleCapabilityError,
    exact_ball_minimize,
    grid_minimize_box,
)
from .trust_region import (
    ExactBallSolver,
    GridSolver,
    TrustRegionConfig,
    itrust,
)

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

# Gaps at or below this are roundoff against the reference optimum and are
# excluded from fits and bound checks.
GAP_FLOOR = 1e-14

# Options that shape the output location, not the experiment itself; they
# stay out of the config hash.
_NON_EXPERIMENT_KEYS = {"out", "format", "jobs", "config", "func"}


class InsufficientDataError(ValueError):
    """Too few usable points to fit a rate."""


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of a gap decay curve."""

    slope: float
    intercept: float
    r_squared: float
    n_points: int


def _least_squares(x: np.ndarray, y: np.ndarray) -> RateFit:
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    total = y - np.mean(y)
    denom = float(total @ total)
    r2 = 1.0 - float(residuals @ residuals) / denom if denom > 0.0 else 1.0
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r2,
        n_points=len(x),
    )


def fit_rate(horizons, gaps) -> RateFit:
    """Fit log(gap) against log(K), dropping non-positive gaps.

    Raises
    ------
    InsufficientDataError
        With fewer than 4 usable (gap above ``GAP_FLOOR``) pairs.
    """
    horizons = np.asarray(horizons, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    keep = np.isfinite(gaps) & (gaps > GAP_FLOOR)
    if int(np.sum(keep)) < 4:
        raise InsufficientDataError(
            f"need >= 4 positive gaps to fit a rate, got {int(np.sum(keep))}"
        )
    return _least_squares(np.log(horizons[keep]), np.log(gaps[keep]))


def fit_linear_decay(iterations, gaps) -> RateFit:
    """Fit log(gap) against the raw iteration count (geometric decay check)."""
    iterations = np.asarray(iterations, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    keep = np.isfinite(gaps) & (gaps > GAP_FLOOR)
    if int(np.sum(keep)) < 4:
        raise InsufficientDataError(
            f"need >= 4 positive gaps to fit a decay, got {int(np.sum(keep))}"
        )
    return _least_squares(iterations[keep], np.log(gaps[keep]))


# ---------------------------------------------------------------------------
# Option plumbing


def _parse_seeds(spec: str) -> list[int]:
    seeds: list[int] = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError(f"no seeds in {spec!r}")
    return seeds


def _parse_ks(spec: str) -> list[int]:
    ks = [int(p) for p in spec.split(",") if p.strip()]
    if not ks:
        raise ValueError(f"no horizons in {spec!r}")
    return ks


def _parse_beta0(spec: str):
    if spec.lower() in ("auto", "none", ""):
        return None
    return float(spec)


def read_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` option file; '#' starts a comment line."""
    values: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _config_hash(options: dict) -> str:
    payload = {
        k: v for k, v in options.items() if k not in _NON_EXPERIMENT_KEYS
    }
    canon = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _write_csv(path: str, fieldnames: list[str], rows: list[dict]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            out = []
            for name in fieldnames:
                v = row.get(name)
                if isinstance(v, bool):
                    out.append(int(v))
                elif isinstance(v, float):
                    out.append(repr(v))
                else:
                    out.append(v)
            writer.writerow(out)


def _write_report(
    out_dir: str,
    name: str,
    fmt: str,
    fieldnames: list[str],
    rows: list[dict],
    summary: dict,
    options: dict,
) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{name}.{fmt}")
    if fmt == "csv":
        _write_csv(path, fieldnames, rows)
    else:
        payload = {
            "command": name,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "config": {
                k: v
                for k, v in options.items()
                if k not in _NON_EXPERIMENT_KEYS
            },
            "config_hash": _config_hash(options),
            "rows": rows,
            "summary": summary,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True, default=str)
            fh.write("\n")
    return path


def _run_cells(cells, worker, jobs: int):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(worker, cells))
    else:
        results = [worker(cell) for cell in cells]
    return [row for result in results for row in result]


def _solver_spec(options: dict):
    name = options["solver"]
    if name == "ecim":
        return EcimConfig(
            schedule=options["schedule"],
            beta0=options["beta0"],
            sigma2=options["sigma2"],
            iterations=options["K"],
            seed=options["seed"],
            modulate_noise=options["modulate_noise"],
        )
    if name == "exact-ball":
        return ExactBallSolver()
    if name == "grid":
        return GridSolver(resolution=options["resolution"])
    raise ValueError(f"unknown solver {name!r}")


# ---------------------------------------------------------------------------
# solve


def cmd_solve(options: dict) -> int:
    try:
        problem = get_problem(options["problem"])
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return EXIT_USAGE

    config = TrustRegionConfig(
        delta0=options["delta0"],
        delta_max=options["delta_max"],
        mu=options["mu"],
        eta=options["eta"],
        iterations=options["T"],
        solver=_solver_spec(options),
        gtol=options["gtol"],
        scaling=problem.scaling if options["use_scaling"] else None,
        warm_start=options["warm_start"],
    )
    trace = itrust(problem.objective, config, problem.start)

    theta = trace.theta_final
    grad_norm = float(np.linalg.norm(problem.objective.gradient(theta)))
    min_eig = float(np.min(np.linalg.eigvalsh(problem.objective.hessian(theta))))
    summary = {
        "problem": problem.name,
        "solver": options["solver"],
        "seed": options["seed"],
        "config_hash": _config_hash(options),
        "theta": [float(v) for v in theta],
        "f": problem.objective.value(theta),
        "grad_norm": grad_norm,
        "min_hessian_eigenvalue": min_eig,
        "iterations": trace.n_iterations,
        "converged": trace.converged,
    }

    out_dir = options["out"]
    os.makedirs(out_dir, exist_ok=True)
    stem = f"solve-{problem.name}-{options['solver']}-seed{options['seed']}"
    trace_path = os.path.join(out_dir, f"{stem}.trace.{options['format']}")
    if options["format"] == "csv":
        trace.to_csv(trace_path)
    else:
        trace.to_json(trace_path)
    summary_path = os.path.join(out_dir, f"{stem}.summary.json")
    with open(summary_path, "w") as fh:
        payload = dict(summary)
        payload["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")

    print(
        f"{problem.name}: f = {summary['f']:.6e}, grad_norm = {grad_norm:.3e}, "
        f"iterations = {trace.n_iterations}, converged = {trace.converged}"
    )
    print(f"trace: {trace_path}")
    print(f"summary: {summary_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify-bounds


def _grid_reference(model, resolution: float, polish_steps: int = 400):
    return grid_minimize_box(model, resolution, polish_steps=polish_steps)


def _resolution_for(n: int) -> float:
    return {1: 0.001, 2: 0.005, 3: 0.02}.get(n, 0.05)


def _verify_cell(args) -> list[dict]:
    options, seed = args
    n = options["n"]
    K = options["K"]
    hash_ = _config_hash(options)
    rows: list[dict] = []

    def row(check, instance, horizon, observed, bound, passed):
        return {
            "check": check,
            "instance": instance,
            "seed": seed,
            "K": horizon,
            "observed": float(observed),
            "bound": float(bound),
            "passed": bool(passed),
            "config_hash": hash_,
        }

    # Fixed-step suboptimality bound on a convex instance.
    model = random_box_quadratic(n, seed, kind="psd")
    ref = _grid_reference(model, _resolution_for(n))
    consts = estimate_constants(model)
    beta0 = options["beta0"]
    beta = beta0 if beta0 is not None else (1.0 / consts.L if consts.L > 0 else 1.0)
    cfg = EcimConfig(
        schedule="fixed",
        beta0=beta,
        sigma2=options["sigma2"],
        iterations=K,
        seed=seed,
    )
    trace = run_ecim(model, cfg)
    d = float(np.linalg.norm(trace.iterates[0] - ref.s_star))
    best = np.minimum.accumulate(trace.energies)
    horizon = 10
    while horizon <= K:
        observed = float(best[horizon]) - ref.value
        bound = 0.5 * (d * d / (beta * horizon) + beta * consts.G**2)
        rows.append(
            row(
                "fixed-step-bound",
                f"psd-n{n}",
                horizon,
                observed,
                bound,
                observed <= bound + 1e-9,
            )
        )
        horizon *= 10

    # Averaged-iterate decay under the decreasing schedule.
    cfg = EcimConfig(schedule="decreasing", beta0=1.0, iterations=K, seed=seed)
    trace = run_ecim(model, cfg)
    checkpoints = [h for h in (100, 1000, 10000, 100000) if h <= K]
    gaps = [
        energy(model, trace.averaged_iterate_at(h)) - ref.value
        for h in checkpoints
    ]
    for i in range(1, len(gaps)):
        rows.append(
            row(
                "averaged-decay",
                f"psd-n{n}",
                checkpoints[i],
                gaps[i],
                gaps[i - 1],
                gaps[i] <= gaps[i - 1] * (1.0 + 1e-6) + 1e-15,
            )
        )

    # Linear rate and iteration complexity on a strongly convex instance.
    model = random_box_quadratic(n, seed, kind="strongly-convex")
    ref = _grid_reference(model, _resolution_for(n))
    consts = estimate_constants(model)
    beta = 1.0 / consts.L
    horizon = min(K, 4000)
    cfg = EcimConfig(schedule="fixed", beta0=beta, iterations=horizon, seed=seed)
    trace = run_ecim(model, cfg)
    mu_p = estimate_mu_p(trace, ref.value)
    if mu_p is None or mu_p <= 0.0:
        rows.append(
            row("linear-rate-bound", f"sc-n{n}", horizon, math.inf, 1.0, False)
        )
        return rows
    gaps_k = trace.energies - ref.value
    gap0 = float(gaps_k[0])
    worst = 0.0
    factor = 1.0
    for k in range(1, len(gaps_k)):
        factor *= 1.0 - beta * mu_p
        if gaps_k[k] > GAP_FLOOR and factor * gap0 > 0.0:
            worst = max(worst, float(gaps_k[k]) / (factor * gap0))
    rows.append(
        row(
            "linear-rate-bound",
            f"sc-n{n}",
            horizon,
            worst,
            1.0,
            worst <= 1.0 + 1e-6,
        )
    )

    epsilon = 1e-6
    if gap0 > epsilon:
        reached = np.nonzero(gaps_k <= epsilon)[0]
        measured = float(reached[0]) if reached.size else math.inf
        complexity = (consts.L / mu_p) * math.log(gap0 / epsilon)
        rows.append(
            row(
                "iteration-complexity",
                f"sc-n{n}",
                horizon,
                measured,
                1.1 * complexity,
                measured <= 1.1 * complexity,
            )
        )
    return rows


def cmd_verify_bounds(options: dict) -> int:
    if options["n"] > 3:
        print("verify-bounds supports n <= 3 (grid oracle range)", file=sys.stderr)
        return EXIT_USAGE
    seeds = options["seeds"]
    rows = _run_cells(
        [(options, seed) for seed in seeds], _verify_cell, options["jobs"]
    )
    rows.sort(key=lambda r: (r["check"], r["instance"], r["seed"], r["K"]))
    n_failed = sum(1 for r in rows if not r["passed"])
    summary = {
        "rows": len(rows),
        "failed": n_failed,
        "seeds": len(seeds),
    }
    path = _write_report(
        options["out"],
        f"verify-bounds-n{options['n']}",
        options["format"],
        ["check", "instance", "seed", "K", "observed", "bound", "passed", "config_hash"],
        rows,
        summary,
        options,
    )
    print(f"{len(rows)} checks, {n_failed} failed")
    print(f"report: {path}")
    return EXIT_OK if n_failed == 0 else EXIT_VERIFICATION_FAILED


# ---------------------------------------------------------------------------
# rate-fit


def _rate_cell(args) -> list[dict]:
    options, seed = args
    n = options["n"]
    schedule = options["schedule"]
    hash_ = _config_hash(options)

    if schedule == "fixed-horizon":
        # Sublinear regime: singular convex instance with an active noise
        # floor. The floor scales with the step size, so the tail-averaged
        # gap of a horizon-K run decays like 1/sqrt(K).
        model = random_box_quadratic(n, seed, kind="singular")
        ref = _grid_reference(model, _resolution_for(n))
        consts = estimate_constants(model)
        sigma2 = options["sigma2"] if options["sigma2"] is not None else 0.01
        gaps = []
        ks = options["ks"]
        for K in ks:
            probe = run_ecim(
                model,
                EcimConfig(schedule="fixed", beta0=1.0, iterations=1, seed=seed),
            )
            d = float(np.linalg.norm(probe.iterates[0] - ref.s_star))
            beta0 = options["beta0"] if options["beta0"] is not None else d / consts.G
            cfg = EcimConfig(
                schedule="fixed-horizon",
                beta0=beta0,
                sigma2=sigma2,
                iterations=K,
                seed=seed,
            )
            trace = run_ecim(model, cfg)
            gaps.append(float(np.mean(trace.energies[K // 2 :])) - ref.value)
        fit = fit_rate(ks, gaps)
        lo, hi, r2_min = -0.7, -0.4, 0.0
        passed = lo <= fit.slope <= hi
        instance = f"singular-n{n}"
    else:
        # Geometric regime: planted-interior instance whose optimum is known
        # in closed form. A gentle step stretches the decay over enough
        # iterations to expose the line.
        model = random_box_quadratic(n, seed, kind="pl")
        s_star = np.linalg.solve(model.symmetric_coupling(), -model.field)
        e_star = float(energy(model, s_star))
        consts = estimate_constants(model)
        K = max(options["ks"]) if options["ks"] else 2000
        beta0 = options["beta0"] if options["beta0"] is not None else 0.2 / consts.L
        sigma2 = options["sigma2"] if options["sigma2"] is not None else 0.0
        cfg = EcimConfig(
            schedule="fixed", beta0=beta0, sigma2=sigma2, iterations=K, seed=seed
        )
        trace = run_ecim(model, cfg)
        gaps_all = trace.energies - e_star
        usable = np.nonzero(gaps_all > GAP_FLOOR)[0]
        k_max = int(usable[-1]) if usable.size else 0
        # The first tenth of the decay can bend while box clipping is still
        # active; fit past it.
        start = max(1, k_max // 10)
        candidates = sorted(
            set(int(k) for k in np.linspace(start, max(k_max, start + 11), 12))
        )
        ks, gaps = [], []
        for k in candidates:
            if k < len(gaps_all) and gaps_all[k] > GAP_FLOOR:
                ks.append(k)
                gaps.append(float(gaps_all[k]))
        fit = fit_linear_decay(ks, gaps)
        lo, hi, r2_min = -math.inf, 0.0, 0.95
        passed = fit.slope < hi and fit.r_squared >= r2_min
        instance = f"pl-n{n}"

    return [
        {
            "instance": instance,
            "seed": seed,
            "schedule": schedule,
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "n_points": fit.n_points,
            "band_lo": lo,
            "band_hi": hi,
            "r2_min": r2_min,
            "passed": bool(passed),
            "config_hash": hash_,
            "_ks": ks,
            "_gaps": gaps,
        }
    ]


def cmd_rate_fit(options: dict) -> int:
    seeds = options["seeds"]
    rows = _run_cells(
        [(options, seed) for seed in seeds], _rate_cell, options["jobs"]
    )
    rows.sort(key=lambda r: (r["instance"], r["seed"]))

    # Per-seed slopes fluctuate with the noise realization; the rate claim
    # is about the family, so the verdict pools gaps geometrically across
    # seeds at each horizon before fitting.
    if options["schedule"] == "fixed-horizon":
        ks = rows[0]["_ks"]
        pooled = [
            float(np.exp(np.mean([math.log(r["_gaps"][i]) for r in rows])))
            if all(r["_gaps"][i] > 0 for r in rows)
            else math.nan
            for i in range(len(ks))
        ]
        pooled_fit = fit_rate(ks, pooled)
        verdict = -0.7 <= pooled_fit.slope <= -0.4
        pooled_summary = {
            "pooled_slope": pooled_fit.slope,
            "pooled_r_squared": pooled_fit.r_squared,
        }
    else:
        verdict = all(r["passed"] for r in rows)
        pooled_summary = {}
    for r in rows:
        r.pop("_ks")
        r.pop("_gaps")
    n_failed = sum(1 for r in rows if not r["passed"])
    slopes = [r["slope"] for r in rows]
    summary = {
        "rows": len(rows),
        "failed": n_failed,
        "mean_slope": float(np.mean(slopes)) if slopes else math.nan,
        "verdict_passed": bool(verdict),
        **pooled_summary,
    }
    path = _write_report(
        options["out"],
        f"rate-fit-{options['schedule']}-n{options['n']}",
        options["format"],
        [
            "instance",
            "seed",
            "schedule",
            "slope",
            "intercept",
            "r_squared",
            "n_points",
            "band_lo",
            "band_hi",
            "r2_min",
            "passed",
            "config_hash",
        ],
        rows,
        summary,
        options,
    )
    for r in rows:
        print(
            f"{r['instance']} seed {r['seed']}: slope = {r['slope']:.3f}, "
            f"r2 = {r['r_squared']:.4f}, passed = {r['passed']}"
        )
    if "pooled_slope" in summary:
        print(f"pooled slope = {summary['pooled_slope']:.3f}")
    print(f"report: {path}")
    return EXIT_OK if verdict else EXIT_VERIFICATION_FAILED


# ---------------------------------------------------------------------------
# compare-oracles


def _compare_cell(args) -> list[dict]:
    options, index = args
    dims = options["dims"]
    kinds = ("strongly-convex", "psd", "singular")
    n = dims[index % len(dims)]
    kind = kinds[index % len(kinds)]
    seed = options["seed"] + index
    hash_ = _config_hash(options)

    model = random_box_quadratic(n, seed, kind=kind)
    consts = estimate_constants(model)
    cfg = EcimConfig(
        schedule="fixed",
        beta0=1.0 / consts.L if consts.L > 0 else 1.0,
        iterations=options["K"],
        seed=seed,
    )
    trace = run_ecim(model, cfg)
    ball = exact_ball_minimize(
        model.field, model.symmetric_coupling(), model.delta
    )
    grid = _grid_reference(model, _resolution_for(n))

    ecim_value = trace.best_energy
    ratio = -ecim_value / abs(ball.value) if ball.value < -1e-12 else math.nan
    passed = (
        ecim_value <= ball.value + 1e-6
        and ecim_value <= grid.value + 1e-4
        and ecim_value >= grid.value - 1e-9
        and (math.isnan(ratio) or ratio >= 0.9)
    )
    return [
        {
            "instance": f"{kind}-n{n}",
            "seed": seed,
            "n": n,
            "kind": kind,
            "ecim_value": float(ecim_value),
            "ball_value": float(ball.value),
            "grid_value": float(grid.value),
            "ecim_minus_ball": float(ecim_value - ball.value),
            "ecim_minus_grid": float(ecim_value - grid.value),
            "coherence_ratio": float(ratio),
            "passed": bool(passed),
            "config_hash": hash_,
        }
    ]


def cmd_compare_oracles(options: dict) -> int:
    rows = _run_cells(
        [(options, i) for i in range(options["count"])],
        _compare_cell,
        options["jobs"],
    )
    rows.sort(key=lambda r: (r["instance"], r["seed"]))
    n_failed = sum(1 for r in rows if not r["passed"])
    ratios = [r["coherence_ratio"] for r in rows if not math.isnan(r["coherence_ratio"])]
    summary = {
        "rows": len(rows),
        "failed": n_failed,
        "min_coherence_ratio": min(ratios) if ratios else math.nan,
    }
    path = _write_report(
        options["out"],
        "compare-oracles",
        options["format"],
        [
            "instance",
            "seed",
            "n",
            "kind",
            "ecim_value",
            "ball_value",
            "grid_value",
            "ecim_minus_ball",
            "ecim_minus_grid",
            "coherence_ratio",
            "passed",
            "config_hash",
        ],
        rows,
        summary,
        options,
    )
    print(f"{len(rows)} subproblems, {n_failed} failed")
    print(f"report: {path}")
    return EXIT_OK if n_failed == 0 else EXIT_VERIFICATION_FAILED


# ---------------------------------------------------------------------------
# list-problems


def cmd_list_problems(options: dict) -> int:
    for problem in problem_suite():
        known = "f* known" if problem.f_star is not None else "f* unknown"
        print(
            f"{problem.name:<14} dim {problem.objective.dim:>3}  "
            f"{problem.convexity_class:<16} {known}"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value option file")
    parser.add_argument("--out", default="reports", help="report directory")
    parser.add_argument(
        "--format", choices=("csv", "json"), default="csv", help="report format"
    )
    parser.add_argument("--jobs", type=int, default=1, help="worker pool size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="itrust",
        description="Trust-region optimization with a simulated Ising-machine "
        "subproblem solver, plus bound verification harnesses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the trust-region loop on a problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--solver", choices=("ecim", "exact-ball", "grid"), default="ecim")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--T", type=int, default=100, help="outer iterations")
    p.add_argument("--K", type=int, default=2000, help="machine iterations")
    p.add_argument("--beta0", type=_parse_beta0, default=None)
    p.add_argument("--sigma2", type=float, default=0.0)
    p.add_argument(
        "--schedule",
        choices=("fixed", "fixed-horizon", "decreasing"),
        default="fixed",
    )
    p.add_argument("--modulate-noise", action="store_true")
    p.add_argument("--delta0", type=float, default=1.0)
    p.add_argument("--delta-max", type=float, default=100.0)
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--eta", type=float, default=0.75)
    p.add_argument("--gtol", type=float, default=1e-8)
    p.add_argument("--resolution", type=float, default=0.01, help="grid solver")
    p.add_argument("--use-scaling", action="store_true")
    p.add_argument("--warm-start", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify-bounds", help="check suboptimality bounds")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--seeds", type=_parse_seeds, default=list(range(10)))
    p.add_argument("--K", type=int, default=10000)
    p.add_argument("--beta0", type=_parse_beta0, default=None)
    p.add_argument("--sigma2", type=float, default=0.0)
    _add_common(p)
    p.set_defaults(func=cmd_verify_bounds)

    p = sub.add_parser("rate-fit", help="fit empirical convergence rates")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--seeds", type=_parse_seeds, default=list(range(5)))
    p.add_argument(
        "--schedule", choices=("fixed-horizon", "fixed"), default="fixed-horizon"
    )
    p.add_argument(
        "--ks",
        type=_parse_ks,
        default=[316, 1000, 3162, 10000, 31623, 100000],
    )
    p.add_argument("--beta0", type=_parse_beta0, default=None)
    p.add_argument("--sigma2", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_rate_fit)

    p = sub.add_parser("compare-oracles", help="machine vs reference solvers")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dims", type=_parse_ks, default=[2, 3])
    p.add_argument("--K", type=int, default=20000)
    _add_common(p)
    p.set_defaults(func=cmd_compare_oracles)

    p = sub.add_parser("list-problems", help="list the problem library")
    _add_common(p)
    p.set_defaults(func=cmd_list_problems)

    return parser


_FILE_CONVERTERS = {
    "problem": str,
    "solver": str,
    "seed": int,
    "seeds": _parse_seeds,
    "K": int,
    "T": int,
    "beta0": _parse_beta0,
    "sigma2": float,
    "schedule": str,
    "modulate_noise": lambda s: s.lower() in ("1", "true", "yes"),
    "delta0": float,
    "delta_max": float,
    "mu": float,
    "eta": float,
    "gtol": float,
    "resolution": float,
    "use_scaling": lambda s: s.lower() in ("1", "true", "yes"),
    "warm_start": lambda s: s.lower() in ("1", "true", "yes"),
    "n": int,
    "ks": _parse_ks,
    "count": int,
    "dims": _parse_ks,
    "out": str,
    "format": str,
    "jobs": int,
}


def _apply_config_file(args: argparse.Namespace, argv: list[str]) -> None:
    """File values fill in options the command line left at their defaults."""
    if not getattr(args, "config", None):
        return
    values = read_config_file(args.config)
    explicit = set()
    for token in argv:
        if token.startswith("--"):
            explicit.add(token[2:].split("=", 1)[0].replace("-", "_"))
    for key, raw in values.items():
        if key not in _FILE_CONVERTERS:
            raise ValueError(f"unknown config key {key!r}")
        if key in explicit or not hasattr(args, key):
            continue
        setattr(args, key, _FILE_CONVERTERS[key](raw))


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args, argv)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    options = vars(args).copy()
    command = options.pop("command")
    func = options.pop("func")
    try:
        return func(options)
    except (OracleCapabilityError, KeyError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InsufficientDataError as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DivergenceError, NumericalError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RuntimeError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
